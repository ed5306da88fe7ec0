"""Verification harness: identity and a-priori-estimate checks on numerical
data, with least-squares-fitted constants frozen as regression baselines.

Every check returns a Report that is deterministic given (seed, config,
tolerance).  Ratio checks guard denominators below 1e-30 and report a
vacuous pass.  Fitted constants for the non-explicit estimates are
measured once at a reference resolution (see BASELINES) and reruns are
guarded against drifting above them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .dyadic import DyadicPartition, NormSpec, commutator, product_estimate_sample
from .qtensor import (
    ModelParams,
    State,
    bulk_force,
    q_to_mat,
    random_qtensor,
    velocity_gradient,
    vorticity_mat,
)
from .spectral import Grid, random_scalar, random_velocity
from .timestepping import TimeConfig, Trajectory, TwinDiff, run

DENOM_FLOOR = 1e-30

#: Fitted constants measured once at the reference resolution (n=128,
#: trials=100, envelope over seeds 0..2) and frozen; reruns act as
#: regression guards and must stay within 10% of these bounds.
BASELINES: dict[str, dict[str, float]] = {
    "commutator_estimate": {"C": 1.05, "n": 128, "trials": 100},
    "neg_index_equiv": {"c": 0.95, "C": 1.00, "n": 128, "trials": 100},
    "linf_interp_s0p25": {"C": 0.064, "n": 128, "trials": 100},
    "linf_interp_s0p5": {"C": 0.055, "n": 128, "trials": 100},
    "linf_interp_s1": {"C": 0.055, "n": 128, "trials": 100},
    "force_estimate_s0p25": {"ratio": 5.0e-06, "n": 128, "trials": 100},
    "force_estimate_s0p5": {"ratio": 5.0e-06, "n": 128, "trials": 100},
}


def _baseline(key: str, field_name: str, grid: Grid, override: float | None) -> float | None:
    """Regression bound for a fitted constant, if one applies.

    An explicit override always binds; a stored baseline binds only at its
    recorded resolution (the fitted ratios drift with n).
    """
    if override is not None:
        return override
    entry = BASELINES.get(key)
    if entry is not None and entry.get("n") == grid.n:
        return entry[field_name]
    return None


@dataclass
class Report:
    """Outcome of one check: measured quantities, tolerance, verdict."""

    name: str
    passed: bool
    tolerance: float
    measured: dict[str, float] = field(default_factory=dict)
    fitted: dict[str, float] = field(default_factory=dict)
    inputs: str = ""
    note: str = ""

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        bits = [f"{k}={v:.6g}" for k, v in self.measured.items()]
        bits += [f"{k}*={v:.6g}" for k, v in self.fitted.items()]
        detail = ", ".join(bits)
        note = f" [{self.note}]" if self.note else ""
        return f"{verdict} {self.name}: {detail} (tol={self.tolerance:g}){note}"

    def row(self) -> dict[str, object]:
        out: dict[str, object] = {"check": self.name, "passed": int(self.passed),
                                  "tolerance": self.tolerance, "inputs": self.inputs}
        out.update({f"measured_{k}": v for k, v in self.measured.items()})
        out.update({f"fitted_{k}": v for k, v in self.fitted.items()})
        return out


# -- pointwise/bilinear identity checks -------------------------------------------


def cancellation_check(grid: Grid, q1: np.ndarray, q2: np.ndarray, u: np.ndarray,
                       tolerance: float = 1e-8) -> Report:
    """Commutator cancellation joining the corotation and stress pairings.

        int tr{(Omega Q2 - Q2 Omega) lap Q1} + int tr{(lap Q1 Q2 - Q2 lap Q1) grad u} = 0

    for symmetric Q1, Q2 and any velocity; this is the exchange that removes
    the unsigned terms from the energy balance.
    """
    om = vorticity_mat(grid, u)
    g3 = velocity_gradient(grid, u)
    m2 = q_to_mat(q2)
    lap1 = q_to_mat(grid.ifft(grid.laplacian_hat(grid.fft(q1))))

    t1 = grid.integral(np.trace((om @ m2 - m2 @ om) @ lap1, axis1=-2, axis2=-1))
    t2 = grid.integral(np.trace((lap1 @ m2 - m2 @ lap1) @ g3, axis1=-2, axis2=-1))
    scale = abs(t1) + abs(t2) + DENOM_FLOOR
    total = abs(t1 + t2)
    return Report(
        "cancellation", total <= tolerance * scale, tolerance,
        measured={"term1": t1, "term2": t2, "sum_rel": total / scale},
    )


def cancellation_ensemble(grid: Grid, trials: int = 1000, seed: int = 0,
                          tolerance: float = 1e-8) -> Report:
    """cancellation_check over seeded random (Q1, Q2, u) triples."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        q1 = random_qtensor(grid, rng)
        q2 = random_qtensor(grid, rng)
        u = random_velocity(grid, rng)
        rep = cancellation_check(grid, q1, q2, u, tolerance)
        worst = max(worst, rep.measured["sum_rel"])
    return Report(
        "cancellation_ensemble", worst <= tolerance, tolerance,
        measured={"worst_rel": worst}, inputs=f"trials={trials} seed={seed} n={grid.n}",
    )


def transport_cancellation_check(grid: Grid, trials: int = 100, seed: int = 0,
                                 tolerance: float = 1e-10) -> Report:
    """Quadrature cancellations <u.grad u, u> = <u.grad Q, Q> = <[Omega,Q], Q> = 0.

    Band-limited samples keep the triple products alias-free, so the
    discrete integrals vanish to roundoff.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        u = random_velocity(grid, rng)
        q = random_qtensor(grid, rng)
        uh = grid.fft(u)
        qh = grid.fft(q)
        gradu = np.stack([grid.ifft(grid.deriv_hat(uh, ax)) for ax in (1, 2)])
        adv_u = u[0] * gradu[0] + u[1] * gradu[1]
        gradq = np.stack([grid.ifft(grid.deriv_hat(qh, ax)) for ax in (1, 2)])
        adv_q = u[0] * gradq[0] + u[1] * gradq[1]
        om = vorticity_mat(grid, u)
        m = q_to_mat(q)
        comm = om @ m - m @ om
        coro = np.trace(comm @ m, axis1=-2, axis2=-1)
        comm_l2 = math.sqrt(grid.integral(np.sum(comm * comm, axis=(-2, -1))))

        r1 = abs(grid.inner(adv_u, u)) / (grid.norm_l2(adv_u) * grid.norm_l2(u) + DENOM_FLOOR)
        r2 = abs(grid.inner(adv_q, q)) / (grid.norm_l2(adv_q) * grid.norm_l2(q) + DENOM_FLOOR)
        r3 = abs(grid.integral(coro)) / (comm_l2 * grid.norm_l2(q) + DENOM_FLOOR)
        worst = max(worst, r1, r2, r3)
    return Report(
        "transport_cancellation", worst <= tolerance, tolerance,
        measured={"worst_rel": worst}, inputs=f"trials={trials} seed={seed} n={grid.n}",
    )


# -- Littlewood-Paley machinery checks ---------------------------------------------


def partition_unity_check(grid: Grid, tolerance: float = 1e-12) -> Report:
    """max over nonzero lattice modes of |sum_q phi_q(k) - 1|."""
    part = DyadicPartition(grid)
    total = sum(part.phi[q] for q in part.qs)
    nz = grid.kmag > 0
    dev = float(np.abs(total[nz] - 1.0).max())
    dev0 = float(abs(total[~nz]).max())
    return Report(
        "partition_unity", dev <= tolerance and dev0 <= tolerance, tolerance,
        measured={"max_dev": dev, "zero_mode": dev0},
        inputs=f"n={grid.n} q=[{part.q_min},{part.q_max}]",
    )


def bony_check(grid: Grid, trials: int = 100, seed: int = 0,
               tolerance: float = 1e-10) -> Report:
    """Paraproduct reconstruction f*g = T_f g + T_g f + R + mean terms."""
    part = DyadicPartition(grid)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        f = random_scalar(grid, rng) + rng.normal()
        g = random_scalar(grid, rng) + rng.normal()
        fbar, gbar = f.mean(), g.mean()
        tfg, tgf, rem = part.bony(f, g)
        recon = tfg + tgf + rem + fbar * g + gbar * f - fbar * gbar
        err = np.abs(recon - f * g).max() / (np.abs(f * g).max() + DENOM_FLOOR)
        worst = max(worst, err)
    return Report(
        "bony_reconstruction", worst <= tolerance, tolerance,
        measured={"worst_rel": worst}, inputs=f"trials={trials} seed={seed} n={grid.n}",
    )


def sym_decomp_check(grid: Grid, trials: int = 100, seed: int = 0,
                     tolerance: float = 1e-10) -> Report:
    """Per-block reconstruction block_q(AB) = J1 + J2 + J3 + J4 on matrix pairs."""
    from .dyadic import SymDecompContext

    part = DyadicPartition(grid)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        a = np.moveaxis(q_to_mat(random_qtensor(grid, rng)), (0, 1), (2, 3))
        b = np.moveaxis(q_to_mat(random_qtensor(grid, rng)), (0, 1), (2, 3))
        ctx = SymDecompContext(part, a, b)
        for q in part.qs:
            lhs = ctx.block_product(q)
            den = np.abs(lhs).max()
            if den <= 1e-14:
                continue
            resid = np.abs(sum(ctx.terms(q)) - lhs).max() / den
            worst = max(worst, resid)
    return Report(
        "sym_decomp_reconstruction", worst <= tolerance, tolerance,
        measured={"worst_rel": worst}, inputs=f"trials={trials} seed={seed} n={grid.n}",
    )


def commutator_estimate_check(grid: Grid, trials: int = 100, seed: int = 0,
                              baseline: float | None = None) -> Report:
    """Fitted C in ||[block_q, S_{q'-1}A] block_q' f|| <= C 2^-q ||S grad A||_inf ||block_q' f||."""
    part = DyadicPartition(grid)
    rng = np.random.default_rng(seed)
    cfit = 0.0
    for _ in range(trials):
        a = random_scalar(grid, rng)
        f = random_scalar(grid, rng)
        q = int(rng.integers(part.q_min + 1, part.q_max))
        qp = int(np.clip(q + rng.integers(-1, 2), part.q_min, part.q_max))
        comm = commutator(part, a, f, q, qp)
        grada = np.stack(grid.grad(a))
        sgrada = grid.ifft(part.lowpass_multiplier(qp - 1) * grid.fft(grada))
        rhs = 2.0 ** (-q) * grid.norm_lp(sgrada, np.inf) * grid.norm_l2(
            grid.ifft(part.phi[qp] * grid.fft(f)))
        if rhs > DENOM_FLOOR:
            cfit = max(cfit, grid.norm_l2(comm) / rhs)
    base = _baseline("commutator_estimate", "C", grid, baseline)
    ok = math.isfinite(cfit) and (base is None or cfit <= 1.1 * base)
    return Report(
        "commutator_estimate", ok, 1.1 * (base or 0.0),
        fitted={"C": cfit}, inputs=f"trials={trials} seed={seed} n={grid.n}",
        note="" if base is not None else "no baseline at this resolution",
    )


def neg_index_check(grid: Grid, s: float = -0.5, trials: int = 100, seed: int = 0,
                    baseline: tuple[float, float] | None = None) -> Report:
    """Ratio band for the lowpass characterization of negative-index norms."""
    from .dyadic import neg_index_equiv

    part = DyadicPartition(grid)
    rng = np.random.default_rng(seed)
    spec = NormSpec(s)
    ratios = []
    for _ in range(trials):
        f = random_scalar(grid, rng)
        _, _, ratio = neg_index_equiv(part, f, spec)
        if ratio is not None:
            ratios.append(ratio)
    lo, hi = float(min(ratios)), float(max(ratios))
    if baseline is not None:
        clo, chi = baseline
    else:
        entry = BASELINES["neg_index_equiv"]
        clo, chi = (entry["c"], entry["C"]) if entry.get("n") == grid.n else (None, None)
    ok = math.isfinite(lo) and math.isfinite(hi) and lo > 0
    if clo is not None:
        ok = ok and lo >= clo / 1.1 and hi <= chi * 1.1
    return Report(
        "neg_index_equiv", ok, 1.1, measured={"ratio_min": lo, "ratio_max": hi},
        inputs=f"s={s} trials={trials} seed={seed} n={grid.n}",
        note="" if clo is not None else "no baseline at this resolution",
    )


def product_law_check(grid: Grid, s: float, t: float, trials: int = 100,
                      seeds: tuple[int, ...] = (0, 1, 2),
                      drift_tol: float = 0.05) -> Report:
    """Boundedness and seed-stability of the product-estimate ratio sampler."""
    part = DyadicPartition(grid)
    maxima = [product_estimate_sample(part, s, t, trials, seed=sd)["max"] for sd in seeds]
    spread = (max(maxima) - min(maxima)) / (sum(maxima) / len(maxima))
    ok = all(math.isfinite(m) for m in maxima) and spread <= drift_tol
    return Report(
        f"product_law_s{s:g}_t{t:g}", ok, drift_tol,
        measured={"max_ratio": max(maxima), "drift": spread},
        inputs=f"trials={trials} seeds={seeds} n={grid.n}",
    )


def linf_interp_check(grid: Grid, s: float = 0.5, n_range: range = range(1, 11),
                      trials: int = 100, seed: int = 0,
                      baseline: float | None = None) -> Report:
    """One fitted C in ||f||_inf <= C(||f||_2 + sqrt(N)||f||_H1 + 2^-Ns ||f||_{H^{1+s}})."""
    part = DyadicPartition(grid)
    rng = np.random.default_rng(seed)
    cfit = 0.0
    for _ in range(trials):
        f = random_scalar(grid, rng)
        fh = grid.fft(f)
        linf = float(np.abs(f).max())
        l2 = grid.norm_l2(f)
        h1 = grid.sobolev_multiplier_norm(fh, 1.0, homogeneous=False)
        hs1 = math.sqrt(part.hs_norm2_hat(fh, 1.0 + s))
        for nn in n_range:
            rhs = l2 + math.sqrt(nn) * h1 + 2.0 ** (-nn * s) * hs1
            if rhs > DENOM_FLOOR:
                cfit = max(cfit, linf / rhs)
    key = f"linf_interp_s{s:g}".replace(".", "p")
    base = _baseline(key, "C", grid, baseline)
    ok = math.isfinite(cfit) and (base is None or cfit <= 1.1 * base)
    return Report(
        "linf_interpolation", ok, 1.1 * (base or 0.0), fitted={"C": cfit},
        inputs=f"s={s} N={n_range.start}..{n_range.stop - 1} trials={trials} seed={seed} n={grid.n}",
        note="" if base is not None else "no baseline at this resolution",
    )


def force_estimate_check(grid: Grid, p: ModelParams, s: float = 0.5,
                         trials: int = 100, seed: int = 0,
                         baseline: float | None = None) -> Report:
    """Bound <P(Q), lap Q>_{H^s} <= C (1 + ||Q||_H2 + ||Q||_H2^2) ||grad Q||_{H^s}^2."""
    part = DyadicPartition(grid)
    rng = np.random.default_rng(seed)
    worst = 0.0
    vacuous = True
    for _ in range(trials):
        q = random_qtensor(grid, rng) * rng.uniform(0.1, 2.0)
        qh = grid.fft(q)
        pq = bulk_force(q, p)  # pointwise bulk algebra, no dealiasing
        lapq = grid.ifft(grid.laplacian_hat(qh))
        w = part.sobolev_weight(s)
        lhs = grid.inner_hat(grid.fft(pq), grid.fft(lapq), w)
        gradq = np.stack([grid.ifft(grid.deriv_hat(qh, ax)) for ax in (1, 2)])
        gq2 = grid.inner_hat(grid.fft(gradq), grid.fft(gradq), w)
        h2 = grid.sobolev_multiplier_norm(qh, 2.0, homogeneous=False)
        rhs = (1.0 + h2 + h2**2) * gq2
        if rhs > DENOM_FLOOR:
            vacuous = False
            worst = max(worst, lhs / rhs)
    key = f"force_estimate_s{s:g}".replace(".", "p")
    base = _baseline(key, "ratio", grid, baseline)
    ok = vacuous or (math.isfinite(worst) and (base is None or worst <= 1.1 * base))
    note = "vacuous" if vacuous else ("" if base is not None else "no baseline at this resolution")
    return Report(
        f"force_estimate_s{s:g}", ok, 1.1 * (base or 0.0), fitted={"ratio": worst},
        inputs=f"s={s} trials={trials} seed={seed} n={grid.n}", note=note,
    )


# -- trajectory-level checks --------------------------------------------------------


def energy_residual(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Residual of the discrete energy balance along a stored run.

    d/dt[||u||^2 + ||Q||^2 + L||grad Q||^2] + 2 nu ||grad u||^2
      + 2 gamma L ||grad Q||^2 + 2 gamma L^2 ||lap Q||^2
      - 2 gamma <P(Q), Q - L lap Q>  -> 0 at the scheme's order.

    Centered differences inside, one-sided at the endpoints.
    """
    p = traj.params
    t = traj.times
    S = traj.series
    e = S["l2_u2"] + S["l2_q2"] + p.L * S["gradq2"]
    dedt = np.gradient(e, t)
    r = (dedt + 2 * p.nu * S["gradu2"] + 2 * p.gamma * p.L * S["gradq2"]
         + 2 * p.gamma * p.L**2 * S["lapq2"]
         - 2 * p.gamma * (S["pq_q"] - p.L * S["pq_lapq"]))
    return t, r


def energy_balance_check(trajs: list[Trajectory], t_skip: float = 0.1,
                         order_tol: float = 1.9) -> Report:
    """Convergence of the energy residual under dt refinement.

    With one trajectory only the residual magnitude is reported; with a
    dt-halving sequence the measured order must reach order_tol.  The
    first t_skip units are excluded: the startup layer of unprepared data
    carries unbounded time derivatives and no asymptotic rate.
    """
    maxima = []
    for traj in trajs:
        t, r = energy_residual(traj)
        dt = float(np.median(np.diff(t)))
        skip = min(t_skip, 0.5 * (t[-1] - t[0]))  # short runs: measure the back half
        sel = (t >= t[0] + skip) & (t <= t[-1] - 2 * dt)
        if not sel.any():
            sel = slice(1, -1)
        maxima.append(float(np.abs(r[sel]).max()))
    measured: dict[str, float] = {f"resid_{i}": m for i, m in enumerate(maxima)}
    if len(maxima) < 2:
        ok = math.isfinite(maxima[0])
        return Report("energy_balance", ok, 0.0, measured=measured, note="single run")
    orders = [math.log2(maxima[i] / maxima[i + 1]) for i in range(len(maxima) - 1)]
    for i, o in enumerate(orders):
        measured[f"order_{i}"] = o
    ok = min(orders) >= order_tol
    return Report("energy_balance", ok, order_tol, measured=measured)


def lp_bound_check(traj: Trajectory, p_exp: int = 1) -> Report:
    """Exponential-in-time majorant for ||Q(t)||_{L^{2p}}.

    Fits the minimal C >= 0 with ||Q(t)||_{L^2p} <= ||Q_0||_{H^1} exp(C t)
    on the sampled series, plus the residual of a least-squares linear fit
    to log||Q(t)|| as a log-linearity measure.
    """
    t = traj.times
    qn = traj.series[f"l2p{p_exp}_q"]
    h1_0 = math.sqrt(traj.series["l2_q2"][0] + traj.series["gradq2"][0])
    if h1_0 <= DENOM_FLOOR or np.all(qn <= DENOM_FLOOR):
        return Report(f"lp_bound_p{p_exp}", True, 0.0,
                      measured={"max_norm": float(qn.max())}, note="vacuous")
    pos = t > t[0]
    cfit = float(np.max(np.log(np.maximum(qn[pos], DENOM_FLOOR) / h1_0) / (t[pos] - t[0])))
    cfit = max(cfit, 0.0)
    logq = np.log(np.maximum(qn, DENOM_FLOOR))
    coef = np.polyfit(t, logq, 1)
    fit_resid = float(np.abs(logq - np.polyval(coef, t)).max())
    ok = math.isfinite(cfit) and cfit >= 0.0
    return Report(
        f"lp_bound_p{p_exp}", ok, 0.0,
        measured={"h1_init": h1_0, "max_norm": float(qn.max()), "fit_resid": fit_resid,
                  "slope": float(coef[0])},
        fitted={"C": cfit},
    )


@dataclass
class OsgoodDiagnostics:
    """Series and fitted constant for the logarithmic growth inequality."""

    times: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    C: float
    envelope: np.ndarray
    verdict: np.ndarray  # per-time envelope verdict

    @property
    def report(self) -> Report:
        ok = math.isfinite(self.C) and bool(self.verdict.all())
        return Report(
            "osgood_growth", ok, 0.0,
            measured={"phi_max": float(self.phi.max()), "envelope_ok": float(self.verdict.all())},
            fitted={"C": self.C},
        )


def osgood_check(traj: Trajectory, s: float = 0.5) -> OsgoodDiagnostics:
    """Fit the smallest C validating, at every sampled time,

        Phi' + Psi <= C (f1 + f2) Phi log2(2 + 4C + Phi)

    with Phi = ||u||_{Hs}^2 + ||grad Q||_{Hs}^2, Psi the same one derivative
    up, f1 = ||(u, grad Q)||_L2^2 + 1 + ||Q||_H2 + ||Q||_H2^2 and
    f2 = ||(u, grad Q)||_{H1}^2; then verify the integrated
    double-exponential envelope with that C.
    """
    from .timestepping import _hs_tag

    tag = _hs_tag(s)
    S = traj.series
    try:
        phi = S[f"hs{tag}_u2"] + S[f"hs{tag}_gradq2"]
        psi = S[f"hs{tag}_gradu2"] + S[f"hs{tag}_lapq2"]
    except KeyError:
        raise KeyError(f"trajectory lacks hs probes at s={s}; rerun with hs_probes=({s},)")
    f1 = S["l2_u2"] + S["gradq2"] + 1.0 + S["h2_q"] + S["h2_q"] ** 2
    f2 = S["h1dot_u2"] + S["h1dot_gradq2"]
    t = traj.times
    if len(t) < 3:
        raise ValueError("series too short to difference")
    dphi = np.gradient(phi, t)

    need = dphi + psi
    cfit = 0.0
    for i in range(len(t)):
        if need[i] <= 0 or phi[i] <= DENOM_FLOOR:
            continue
        base = (f1[i] + f2[i]) * phi[i]
        lo, hi = 0.0, 1.0
        while hi * base * np.log2(2 + 4 * hi + phi[i]) < need[i]:
            hi *= 2.0
            if hi > 1e12:
                break
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mid * base * np.log2(2 + 4 * mid + phi[i]) >= need[i]:
                hi = mid
            else:
                lo = mid
        cfit = max(cfit, hi)

    c = cfit
    integ = cumulative_trapezoid(f1 + f2, t, initial=0.0)
    envelope = (2 + 4 * c + phi[0]) ** np.exp((c / math.log(2.0)) * integ)
    verdict = (2 + 4 * c + phi) <= envelope * (1 + 1e-9)
    return OsgoodDiagnostics(t, phi, psi, f1, f2, c, envelope, verdict)


# -- twin-run checks ------------------------------------------------------------------


def gronwall_majorant(diff: TwinDiff) -> np.ndarray:
    """The explicit rate assembled from the background-solution norms.

    One fixed assembly of the L2/H1/lap-level norm products appearing in
    the term-by-term difference estimates (simpler + residual groups):

        chi = |a| + ||(Q1,Q2)||^2 + ||(Q1,Q2)||^2 ||grad(Q1,Q2)||^2
            + ||grad Q1||^(2/3) ||lap Q1||^2 + ||grad Q2||^(2/3) ||lap Q2||^2
            + ||u2||^(2/3) ||grad u2||^2 + ||grad(u1,u2)||^2
            + ||lap(Q1,Q2)||^2 + ||grad Q2||^2 ||lap Q2||^2
    """
    S = diff.series
    a = abs(diff.params.a)
    q2 = S["q1_l22"] + S["q2_l22"]
    gq2 = S["gq1_l22"] + S["gq2_l22"]
    chi = (a + q2 + q2 * gq2
           + S["gq1_l22"] ** (1.0 / 3.0) * S["lq1_l22"]
           + S["gq2_l22"] ** (1.0 / 3.0) * S["lq2_l22"]
           + S["u2_l22"] ** (1.0 / 3.0) * S["gu2_l22"]
           + S["gu1_l22"] + S["gu2_l22"]
           + S["lq1_l22"] + S["lq2_l22"]
           + S["gq2_l22"] * S["lq2_l22"])
    return chi


def uniqueness_check(diff: TwinDiff, zero_floor: float = 1e-28) -> Report:
    """Gronwall envelope Phi(t) <= Phi(0) exp(C int chi) with one fitted C.

    Identical-data twins report the Phi == 0 branch; perturbed twins fit
    the smallest C validating the envelope on the sampled series.
    """
    t = diff.times
    phi = diff.series["phi"]
    if phi[0] <= zero_floor:
        ok = bool(np.all(phi <= zero_floor))
        return Report(
            "uniqueness_contraction", ok, zero_floor,
            measured={"phi_max": float(phi.max())}, note="identical data",
        )
    chi = gronwall_majorant(diff)
    integ = cumulative_trapezoid(chi, t, initial=0.0)
    pos = integ > 0
    with np.errstate(divide="ignore"):
        lr = np.log(np.maximum(phi, DENOM_FLOOR) / phi[0])
    cfit = float(np.max(lr[pos] / integ[pos])) if pos.any() else 0.0
    cfit = max(cfit, 0.0)
    envelope_ok = bool(np.all(phi <= phi[0] * np.exp(cfit * integ) * (1 + 1e-9)))
    ok = math.isfinite(cfit) and envelope_ok
    return Report(
        "uniqueness_contraction", ok, 0.0,
        measured={"phi0": float(phi[0]), "phi_max": float(phi.max()),
                  "chi_int": float(integ[-1])},
        fitted={"C": cfit},
    )


def difference_regularity_check(diff: TwinDiff) -> Report:
    """Finiteness of sup_t of the weak-norm differences plus interpolation.

    Reports sup ||du||_{H^-1/2}, sup ||grad dQ||_{H^-1/2} and the fitted C
    in ||grad du||_{H^-1/2} <= C(||du||_{H^-1/2} + ||grad du||_{L2}).
    """
    S = diff.series
    sup_du = float(np.sqrt(S["du_hm2"]).max())
    sup_gdq = float(np.sqrt(S["gdq_hm2"]).max())
    den = np.sqrt(S["du_hm2"]) + np.sqrt(S["gdu_l22"])
    num = np.sqrt(S["gdu_hm2"])
    mask = den > 1e-15
    cfit = float((num[mask] / den[mask]).max()) if mask.any() else 0.0
    ok = math.isfinite(sup_du) and math.isfinite(sup_gdq) and math.isfinite(cfit)
    note = "" if mask.any() else "vacuous"
    return Report(
        "difference_regularity", ok, 0.0,
        measured={"sup_du_hm": sup_du, "sup_gdq_hm": sup_gdq},
        fitted={"C_interp": cfit}, note=note,
    )


# -- Friedrichs-mode consistency -------------------------------------------------------


def friedrichs_consistency_check(grid: Grid, init: State, p: ModelParams,
                                 tc: TimeConfig, cutoffs: tuple[int, ...] = (8, 16, 32)) -> Report:
    """L^2 gap at t_end between annulus-truncated runs and the uncut run.

    The gap must decrease monotonically as the cutoff index grows.
    """
    from dataclasses import replace

    ref = run(grid, init, p, tc).states[-1]
    gaps = []
    for m in cutoffs:
        sol = run(grid, init, replace(p, n_cutoff=m), tc).states[-1]
        gap = math.sqrt(
            grid.norm_l2(sol.u - ref.u) ** 2 + grid.norm_l2(sol.q - ref.q) ** 2
        )
        gaps.append(gap)
    monotone = all(gaps[i + 1] < gaps[i] for i in range(len(gaps) - 1))
    measured = {f"gap_n{m}": g for m, g in zip(cutoffs, gaps)}
    return Report("friedrichs_consistency", monotone, 0.0, measured=measured,
                  inputs=f"cutoffs={cutoffs} t_end={tc.t_end}")
