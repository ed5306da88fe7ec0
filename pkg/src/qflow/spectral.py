"""Periodic spectral grid, transforms and Fourier-multiplier operators.

All fields live on a square torus [0, len)^2 sampled on an n x n lattice
(n a power of two).  Real fields are float64 arrays of shape (..., n, n);
their spectral mirrors are complex128 arrays of the same shape produced by
an unscaled forward FFT (the inverse carries the 1/n^2).  Wavenumbers are
the integer lattice {-n/2+1, ..., n/2} per axis scaled by 2*pi/len; the
Nyquist index is mapped to +n/2.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft


def fft_workers() -> int:
    """Worker count for scipy FFTs, capped by the QFLOW_THREADS env var."""
    raw = os.environ.get("QFLOW_THREADS", "1")
    try:
        w = int(raw)
    except ValueError:
        raise ValueError(f"QFLOW_THREADS must be an integer, got {raw!r}")
    if w < 1:
        raise ValueError(f"QFLOW_THREADS must be >= 1, got {w}")
    return w


@dataclass(frozen=True)
class Grid:
    """Precomputed lattice and multiplier tables for one resolution.

    Parameters
    ----------
    n : int
        Points per axis; must be a power of two, n >= 8.
    length : float
        Physical period of the torus (default 2*pi).
    """

    n: int
    length: float = 2.0 * np.pi

    # filled in __post_init__
    k1: np.ndarray = field(init=False, repr=False, compare=False)
    k2: np.ndarray = field(init=False, repr=False, compare=False)
    ksq: np.ndarray = field(init=False, repr=False, compare=False)
    kmag: np.ndarray = field(init=False, repr=False, compare=False)
    dealias_mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = self.n
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"grid size must be a power of two >= 8, got {n}")
        if not self.length > 0:
            raise ValueError(f"period must be positive, got {self.length}")
        idx = np.fft.fftfreq(n, 1.0 / n)
        idx[n // 2] = n // 2  # Nyquist convention: +n/2, not -n/2
        scale = 2.0 * np.pi / self.length
        kx, ky = np.meshgrid(idx * scale, idx * scale, indexing="ij")
        ix, iy = np.meshgrid(idx, idx, indexing="ij")
        mask = np.maximum(np.abs(ix), np.abs(iy)) <= n / 3.0
        object.__setattr__(self, "k1", kx)
        object.__setattr__(self, "k2", ky)
        object.__setattr__(self, "ksq", kx**2 + ky**2)
        object.__setattr__(self, "kmag", np.sqrt(kx**2 + ky**2))
        object.__setattr__(self, "dealias_mask", mask)
        # half-spectrum views matching the rfft layout (fast paths)
        half = n // 2 + 1
        for name in ("k1", "k2", "ksq", "kmag", "dealias_mask"):
            object.__setattr__(self, name + "_r", getattr(self, name)[:, :half])
        # Parseval weights on the half lattice: interior columns count twice
        dup = np.full(half, 2.0)
        dup[0] = dup[-1] = 1.0
        object.__setattr__(self, "parseval_r", dup[None, :])

    # -- transforms ---------------------------------------------------------

    def fft(self, f: np.ndarray) -> np.ndarray:
        """Forward transform (unscaled), batched over leading axes."""
        return scipy.fft.fft2(f, axes=(-2, -1), workers=fft_workers())

    def ifft(self, fh: np.ndarray) -> np.ndarray:
        """Inverse transform (carries 1/n^2); returns the real part."""
        return scipy.fft.ifft2(fh, axes=(-2, -1), workers=fft_workers()).real

    def rfft(self, f: np.ndarray) -> np.ndarray:
        """Half-spectrum forward transform for real fields (internal fast path)."""
        return scipy.fft.rfft2(f, axes=(-2, -1), workers=fft_workers())

    def irfft(self, fh: np.ndarray) -> np.ndarray:
        return scipy.fft.irfft2(fh, s=(self.n, self.n), axes=(-2, -1), workers=fft_workers())

    # -- pointwise lattice data --------------------------------------------

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n) * (self.length / self.n)
        return np.meshgrid(x, x, indexing="ij")

    @property
    def cell_area(self) -> float:
        return (self.length / self.n) ** 2

    # -- multiplier operators (spectral in, spectral out) -------------------

    def deriv_hat(self, fh: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
        """Multiply by (i*k_axis)^order.  axis is 1 or 2."""
        if axis not in (1, 2):
            raise ValueError(f"axis must be 1 or 2, got {axis}")
        if order < 1:
            raise ValueError(f"derivative order must be >= 1, got {order}")
        k = self.k1 if axis == 1 else self.k2
        return fh * (1j * k) ** order

    def laplacian_hat(self, fh: np.ndarray) -> np.ndarray:
        return -self.ksq * fh

    def leray_hat(self, vh: np.ndarray) -> np.ndarray:
        """Project a 2-component spectral field onto divergence-free fields.

        The zero mode is passed through unchanged (mean removal is a
        separate, deliberate step).
        """
        if vh.shape[:-2] != (2,):
            raise ValueError(f"expected shape (2, n, n), got {vh.shape}")
        ksq = np.where(self.ksq == 0.0, 1.0, self.ksq)
        kdotv = self.k1 * vh[0] + self.k2 * vh[1]
        out = np.empty_like(vh)
        out[0] = vh[0] - self.k1 * kdotv / ksq
        out[1] = vh[1] - self.k2 * kdotv / ksq
        out[..., 0, 0] = vh[..., 0, 0]
        return out

    def freq_cutoff_hat(self, fh: np.ndarray, m: int) -> np.ndarray:
        """Sharp annulus cutoff: keep modes with |k| in [1/m, m], zero the rest.

        The zero mode always lies outside the annulus and is removed.
        """
        if m < 1:
            raise ValueError(f"cutoff index must be >= 1, got {m}")
        keep = (self.kmag >= 1.0 / m) & (self.kmag <= float(m))
        return fh * keep

    def dealias_hat(self, fh: np.ndarray) -> np.ndarray:
        """Two-thirds rule: zero modes with max(|k1|,|k2|) > n/3 (lattice units)."""
        return fh * self.dealias_mask

    # -- half-spectrum (rfft layout) operator variants ------------------------

    def deriv_hat_r(self, fh: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
        k = self.k1_r if axis == 1 else self.k2_r
        return fh * (1j * k) ** order

    def laplacian_hat_r(self, fh: np.ndarray) -> np.ndarray:
        return -self.ksq_r * fh

    def leray_hat_r(self, vh: np.ndarray) -> np.ndarray:
        ksq = np.where(self.ksq_r == 0.0, 1.0, self.ksq_r)
        kdotv = self.k1_r * vh[0] + self.k2_r * vh[1]
        out = np.empty_like(vh)
        out[0] = vh[0] - self.k1_r * kdotv / ksq
        out[1] = vh[1] - self.k2_r * kdotv / ksq
        out[..., 0, 0] = vh[..., 0, 0]
        return out

    def freq_cutoff_hat_r(self, fh: np.ndarray, m: int) -> np.ndarray:
        keep = (self.kmag_r >= 1.0 / m) & (self.kmag_r <= float(m))
        return fh * keep

    # -- real-space convenience wrappers -------------------------------------

    def deriv(self, f: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
        return self.irfft(self.deriv_hat_r(self.rfft(f), axis, order))

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.irfft(self.laplacian_hat_r(self.rfft(f)))

    def leray(self, v: np.ndarray) -> np.ndarray:
        return self.irfft(self.leray_hat_r(self.rfft(v)))

    def dealias(self, f: np.ndarray) -> np.ndarray:
        return self.irfft(self.dealias_mask_r * self.rfft(f))

    def freq_cutoff(self, f: np.ndarray, m: int) -> np.ndarray:
        if m < 1:
            raise ValueError(f"cutoff index must be >= 1, got {m}")
        return self.irfft(self.freq_cutoff_hat_r(self.rfft(f), m))

    def grad(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        fh = self.rfft(f)
        return self.irfft(self.deriv_hat_r(fh, 1)), self.irfft(self.deriv_hat_r(fh, 2))

    def zero_mean(self, f: np.ndarray) -> np.ndarray:
        return f - f.mean(axis=(-2, -1), keepdims=True)

    # -- quadrature, norms and inner products ---------------------------------

    def integral(self, f: np.ndarray) -> float:
        """Trapezoid quadrature of a scalar field over the torus."""
        return float(f.sum()) * self.cell_area

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Discrete L^2 inner product, summed over any leading component axes."""
        return float(np.sum(f * g)) * self.cell_area

    def norm_l2(self, f: np.ndarray) -> float:
        return float(np.sqrt(np.sum(f * f) * self.cell_area))

    def norm_lp(self, f: np.ndarray, p: float) -> float:
        """L^p norm of the pointwise Euclidean magnitude over component axes."""
        mag2 = self._mag2(f)
        if p == np.inf:
            return float(np.sqrt(mag2.max(initial=0.0)))
        return float((np.sum(mag2 ** (p / 2.0)) * self.cell_area) ** (1.0 / p))

    @staticmethod
    def _mag2(f: np.ndarray) -> np.ndarray:
        if f.ndim == 2:
            return f * f
        return np.sum(f * f, axis=tuple(range(f.ndim - 2)))

    def spectral_norm_l2(self, fh: np.ndarray) -> float:
        """L^2 norm evaluated from spectral coefficients (Parseval)."""
        w = self.cell_area / self.n**2
        return float(np.sqrt(np.sum(np.abs(fh) ** 2) * w))

    def inner_hat(self, fh: np.ndarray, gh: np.ndarray, weight: np.ndarray | None = None) -> float:
        """L^2 pairing from spectral coefficients, optionally multiplier-weighted."""
        w = self.cell_area / self.n**2
        prod = (fh * gh.conj()).real
        if weight is not None:
            prod = prod * weight
        return float(np.sum(prod) * w)

    def inner_hat_r(self, fh: np.ndarray, gh: np.ndarray, weight: np.ndarray | None = None) -> float:
        """inner_hat for half-spectrum (rfft) coefficients of real fields."""
        w = self.cell_area / self.n**2
        prod = (fh * gh.conj()).real * self.parseval_r
        if weight is not None:
            prod = prod * weight
        return float(np.sum(prod) * w)

    def sobolev_multiplier_norm(self, fh: np.ndarray, s: float, homogeneous: bool = True) -> float:
        """Direct-multiplier Sobolev norm: weight |k|^(2s) or (1+|k|^2)^s."""
        if homogeneous:
            weight = np.where(self.ksq == 0.0, 0.0, self.ksq**s)
        else:
            weight = (1.0 + self.ksq) ** s
        return float(np.sqrt(max(self.inner_hat(fh, fh, weight), 0.0)))

    def divergence_residual(self, vh: np.ndarray) -> float:
        """max_k |k . v_hat(k)| relative to the coefficient magnitude."""
        kdotv = np.abs(self.k1 * vh[0] + self.k2 * vh[1])
        scale = np.abs(vh).max(initial=0.0) * max(self.kmag.max(), 1.0)
        if scale == 0.0:
            return 0.0
        return float(kdotv.max() / scale)


# -- seeded band-limited field generators -------------------------------------


def random_scalar(
    grid: Grid,
    rng: np.random.Generator,
    kmin: float = 1.0,
    kmax: float | None = None,
    decay: float = 1.5,
) -> np.ndarray:
    """Mean-zero real field with power-law amplitude and random phases.

    Spectral support is the annulus kmin <= |k| <= kmax in lattice units;
    kmax defaults to n/4 so that triple products stay alias-free under the
    two-thirds rule.
    """
    n = grid.n
    if kmax is None:
        kmax = n / 4.0
    scale = 2.0 * np.pi / grid.length
    band = (grid.kmag >= kmin * scale) & (grid.kmag <= kmax * scale)
    amp = np.zeros((n, n))
    amp[band] = (grid.kmag[band] / scale) ** (-decay)
    phases = rng.uniform(0.0, 2.0 * np.pi, (n, n))
    fh = amp * np.exp(1j * phases) * n**2
    f = grid.ifft(fh)  # taking the real part Hermitian-symmetrizes
    f = grid.zero_mean(f)
    peak = np.abs(f).max()
    return f / peak if peak > 0 else f


def random_velocity(
    grid: Grid,
    rng: np.random.Generator,
    kmin: float = 1.0,
    kmax: float | None = None,
    decay: float = 1.5,
) -> np.ndarray:
    """Divergence-free, mean-zero 2-component field (Leray-projected)."""
    v = np.stack([random_scalar(grid, rng, kmin, kmax, decay) for _ in range(2)])
    v = grid.zero_mean(grid.leray(v))
    peak = np.sqrt(np.sum(v * v, axis=0)).max()
    return v / peak if peak > 0 else v
