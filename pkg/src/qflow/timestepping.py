"""Time advancement: integrating-factor RK2 stepping, trajectory recording
and twin-run orchestration for the contraction experiment.

The stiff dissipative operators (nu*lap for u, gamma*L*lap for Q) are
integrated exactly in spectral space through the multiplier exp(-c k^2 dt);
everything else is explicit.  One step of the Heun-type scheme:

    k1   = N(U_n)
    U*   = E (U_n + dt k1)
    U_n1 = E U_n + dt/2 (E k1 + N(U*))

which is exact for vanishing N and second order otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicPartition
from .qtensor import (
    ModelParams,
    State,
    bulk_force,
    tensor_rhs_nonstiff,
    trace_q2,
    velocity_rhs_nonstiff,
)
from .spectral import Grid, random_scalar, random_velocity


class BlowUpError(RuntimeError):
    """Raised when a run leaves the finite/bounded regime.

    Carries the diagnostics of the offending step and, when raised from
    run(), the partial (times, series) recorded before the abort.
    """

    def __init__(self, message: str, t: float, diagnostics: dict[str, float]):
        super().__init__(f"{message} at t={t:.6g}: {diagnostics}")
        self.t = t
        self.diagnostics = diagnostics
        self.partial: tuple[np.ndarray, dict[str, np.ndarray]] | None = None


@dataclass(frozen=True)
class TimeConfig:
    """Step size policy and horizon; dt='auto' uses the CFL/bulk-reaction cap."""

    dt: float | str = "auto"
    t_end: float = 1.0
    cfl: float = 0.4
    scheme: str = "if-rk2"

    def __post_init__(self) -> None:
        if isinstance(self.dt, str):
            if self.dt != "auto":
                raise ValueError(f"dt must be a positive number or 'auto', got {self.dt!r}")
        elif not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.cfl < 1:
            raise ValueError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.scheme != "if-rk2":
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass
class Trajectory:
    """Sampled scalar diagnostics plus (strided) stored states."""

    grid: Grid
    params: ModelParams
    times: np.ndarray
    series: dict[str, np.ndarray]
    states: list[State] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return self.series[name]


@dataclass
class TwinDiff:
    """Per-step difference diagnostics of a twin run."""

    grid: Grid
    params: ModelParams
    eps: float
    times: np.ndarray
    series: dict[str, np.ndarray]
    final_a: State | None = None
    final_b: State | None = None

    def column(self, name: str) -> np.ndarray:
        return self.series[name]


class Stepper:
    """IF-RK2 stepping with cached exponential multipliers."""

    def __init__(self, grid: Grid, params: ModelParams, tc: TimeConfig):
        self.grid = grid
        self.params = params
        self.tc = tc
        self._exp_cache: tuple[float, np.ndarray, np.ndarray] | None = None

    def auto_dt(self, s: State) -> float:
        g, p = self.grid, self.params
        h = g.length / g.n
        umax = float(np.sqrt(np.sum(s.u**2, axis=0)).max(initial=0.0))
        dt = self.tc.cfl * h / max(1.0, umax)
        qmax = float(np.sqrt(trace_q2(s.q)).max(initial=0.0))
        react = p.gamma * (abs(p.a) + abs(p.b) * qmax + p.c * qmax**2)
        if react > 0:
            dt = min(dt, 1.0 / react)
        return dt

    def _multipliers(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        if self._exp_cache is not None and self._exp_cache[0] == dt:
            return self._exp_cache[1], self._exp_cache[2]
        g, p = self.grid, self.params
        eu = np.exp(-p.nu * g.ksq_r * dt)
        eq = np.exp(-p.gamma * p.L * g.ksq_r * dt)
        self._exp_cache = (dt, eu, eq)
        return eu, eq

    def step(self, s: State, dt: float) -> State:
        g, p = self.grid, self.params
        eu, eq = self._multipliers(dt)

        k1u = velocity_rhs_nonstiff(g, s, p)
        k1q = tensor_rhs_nonstiff(g, s, p)
        pred = State(
            g.irfft(eu * g.rfft(s.u + dt * k1u)),
            g.irfft(eq * g.rfft(s.q + dt * k1q)),
            s.t + dt,
        )
        k2u = velocity_rhs_nonstiff(g, pred, p)
        k2q = tensor_rhs_nonstiff(g, pred, p)

        uh = eu * (g.rfft(s.u) + 0.5 * dt * g.rfft(k1u)) + 0.5 * dt * g.rfft(k2u)
        uh = g.leray_hat_r(uh)
        uh[:, 0, 0] = 0.0
        qh = eq * (g.rfft(s.q) + 0.5 * dt * g.rfft(k1q)) + 0.5 * dt * g.rfft(k2q)
        out = State(g.irfft(uh), g.irfft(qh), s.t + dt)
        if not (np.all(np.isfinite(out.u)) and np.all(np.isfinite(out.q))):
            raise BlowUpError(
                "non-finite state",
                out.t,
                {"max_u": float(np.abs(s.u).max()), "max_q": float(np.abs(s.q).max()), "dt": dt},
            )
        return out


def step(grid: Grid, s: State, p: ModelParams, tc: TimeConfig) -> State:
    """Advance one step; dt resolved from the config (auto uses the CFL bound)."""
    st = Stepper(grid, p, tc)
    dt = st.auto_dt(s) if tc.dt == "auto" else float(tc.dt)
    return st.step(s, dt)


# -- diagnostics -----------------------------------------------------------------


def standard_probes(
    grid: Grid, part: DyadicPartition, s: State, p: ModelParams, hs_list: tuple[float, ...] = ()
) -> dict[str, float]:
    """Scalar diagnostic channels for one state.

    Always includes the L^2/H^1-level energy bookkeeping and the L^{2p}
    norms of Q for p in {1, 2, 3}; for every s in hs_list adds the
    Besov-flavored homogeneous-Sobolev channels used by the growth checks.
    """
    g = grid
    uh = g.rfft(s.u)
    qh = g.rfft(s.q)
    lapq = g.irfft(g.laplacian_hat_r(qh))
    pq = bulk_force(s.q, p, g)

    out: dict[str, float] = {}
    out["l2_u2"] = g.inner(s.u, s.u)
    out["l2_q2"] = g.inner(s.q, s.q)
    out["gradu2"] = g.inner_hat_r(uh, uh, g.ksq_r)
    out["gradq2"] = g.inner_hat_r(qh, qh, g.ksq_r)
    out["lapq2"] = g.inner_hat_r(qh, qh, g.ksq_r**2)
    out["energy"] = out["l2_u2"] + out["l2_q2"] + p.L * out["gradq2"]
    out["pq_q"] = g.inner(pq, s.q)
    out["pq_lapq"] = g.inner(pq, lapq)
    for pex in (1, 2, 3):
        out[f"l2p{pex}_q"] = g.norm_lp(s.q, 2 * pex)
    out["max_u"] = float(np.sqrt(np.sum(s.u**2, axis=0)).max(initial=0.0))

    if hs_list:
        h2w = (1.0 + g.ksq_r) ** 2
        out["h2_q"] = float(np.sqrt(max(g.inner_hat_r(qh, qh, h2w), 0.0)))
        w1 = part.sobolev_weight_r(1.0)
        out["h1dot_u2"] = g.inner_hat_r(uh, uh, w1)
        out["h1dot_gradq2"] = g.inner_hat_r(qh, qh, w1 * g.ksq_r)
    for sv in hs_list:
        w = part.sobolev_weight_r(sv)
        tag = _hs_tag(sv)
        out[f"hs{tag}_u2"] = g.inner_hat_r(uh, uh, w)
        out[f"hs{tag}_gradq2"] = g.inner_hat_r(qh, qh, w * g.ksq_r)
        out[f"hs{tag}_gradu2"] = g.inner_hat_r(uh, uh, w * g.ksq_r)
        out[f"hs{tag}_lapq2"] = g.inner_hat_r(qh, qh, w * g.ksq_r**2)
    return out


def _hs_tag(s: float) -> str:
    return f"{s:g}".replace("-", "m").replace(".", "p")


def run(
    grid: Grid,
    init: State,
    p: ModelParams,
    tc: TimeConfig,
    hs_probes: tuple[float, ...] = (),
    state_stride: int = 0,
    energy_guard: float = 1e6,
) -> Trajectory:
    """Advance to t_end recording every diagnostic channel at every step.

    state_stride > 0 stores every stride-th state (plus initial and final);
    aborting steps flush the partial series into the raised error.
    """
    part = DyadicPartition(grid)
    stepper = Stepper(grid, p, tc)
    s = init.copy()
    times = [s.t]
    rows = [standard_probes(grid, part, s, p, hs_probes)]
    states = [s.copy()]
    e0 = max(rows[0]["energy"], 1e-300)

    def flush(err: BlowUpError) -> BlowUpError:
        err.diagnostics["steps_completed"] = float(k)
        err.partial = (np.array(times), {key: np.array([r[key] for r in rows])
                                         for key in rows[0]})
        return err

    k = 0
    t_final = init.t + tc.t_end
    while s.t < t_final - 1e-12:
        dt = stepper.auto_dt(s) if tc.dt == "auto" else float(tc.dt)
        dt = min(dt, t_final - s.t)
        try:
            s = stepper.step(s, dt)
        except BlowUpError as err:
            raise flush(err)
        k += 1
        times.append(s.t)
        row = standard_probes(grid, part, s, p, hs_probes)
        rows.append(row)
        if row["energy"] > energy_guard * e0:
            raise flush(BlowUpError(
                "energy guard tripped", s.t,
                {"energy": row["energy"], "energy0": e0},
            ))
        if state_stride > 0 and k % state_stride == 0:
            states.append(s.copy())
    if not states or states[-1].t != s.t:
        states.append(s.copy())

    series = {key: np.array([r[key] for r in rows]) for key in rows[0]}
    return Trajectory(grid, p, np.array(times), series, states)


# -- twin runs --------------------------------------------------------------------


@dataclass(frozen=True)
class Perturbation:
    """Seeded, mean-zero, solenoidal-in-u perturbation of size eps."""

    eps: float
    seed: int = 0
    kmin: float = 1.0
    kmax: float | None = None
    decay: float = 2.0

    def apply(self, grid: Grid, s: State) -> State:
        if self.eps == 0.0:
            return s.copy()
        rng = np.random.default_rng(self.seed)
        du = random_velocity(grid, rng, self.kmin, self.kmax, self.decay)
        dq = np.stack([random_scalar(grid, rng, self.kmin, self.kmax, self.decay)
                       for _ in range(5)])
        return State(s.u + self.eps * du, s.q + self.eps * dq, s.t)


def twin_run(
    grid: Grid,
    init: State,
    perturb: Perturbation,
    p: ModelParams,
    tc: TimeConfig,
) -> TwinDiff:
    """Evolve the state and its perturbed twin under identical stepping.

    Records the contraction functional Phi(t) = 1/2 ||du||^2_{H^-1/2}
    + L ||grad dQ||^2_{H^-1/2}, its dissipation channels, the background
    norms entering the Gronwall majorant, and the empirical rate
    chi = Phi'/Phi wherever Phi > 0.
    """
    part = DyadicPartition(grid)
    stepper = Stepper(grid, p, tc)
    sa = init.copy()
    sb = perturb.apply(grid, init)

    times = [sa.t]
    rows = [_twin_probes(grid, part, sa, sb, p)]
    t_final = init.t + tc.t_end
    while sa.t < t_final - 1e-12:
        dt = stepper.auto_dt(sa) if tc.dt == "auto" else float(tc.dt)
        dt = min(dt, t_final - sa.t)
        sa = stepper.step(sa, dt)
        sb = stepper.step(sb, dt)
        times.append(sa.t)
        rows.append(_twin_probes(grid, part, sa, sb, p))

    series = {key: np.array([r[key] for r in rows]) for key in rows[0]}
    t = np.array(times)
    series["chi"] = _log_derivative(t, series["phi"])
    return TwinDiff(grid, p, perturb.eps, t, series, final_a=sa, final_b=sb)


def _twin_probes(
    grid: Grid, part: DyadicPartition, sa: State, sb: State, p: ModelParams
) -> dict[str, float]:
    g = grid
    w = part.sobolev_weight_r(-0.5)
    du = sb.u - sa.u
    dq = sb.q - sa.q
    duh = g.rfft(du)
    dqh = g.rfft(dq)

    out: dict[str, float] = {}
    out["du_hm2"] = g.inner_hat_r(duh, duh, w)
    out["gdq_hm2"] = g.inner_hat_r(dqh, dqh, w * g.ksq_r)
    out["phi"] = 0.5 * out["du_hm2"] + p.L * out["gdq_hm2"]
    out["gdu_hm2"] = g.inner_hat_r(duh, duh, w * g.ksq_r)
    out["lapdq_hm2"] = g.inner_hat_r(dqh, dqh, w * g.ksq_r**2)
    out["du_l22"] = g.inner(du, du)
    out["gdu_l22"] = g.inner_hat_r(duh, duh, g.ksq_r)
    out["dq_l22"] = g.inner(dq, dq)

    for tag, s in (("1", sa), ("2", sb)):
        uh = g.rfft(s.u)
        qh = g.rfft(s.q)
        out[f"u{tag}_l22"] = g.inner(s.u, s.u)
        out[f"q{tag}_l22"] = g.inner(s.q, s.q)
        out[f"gu{tag}_l22"] = g.inner_hat_r(uh, uh, g.ksq_r)
        out[f"gq{tag}_l22"] = g.inner_hat_r(qh, qh, g.ksq_r)
        out[f"lq{tag}_l22"] = g.inner_hat_r(qh, qh, g.ksq_r**2)
    return out


def _log_derivative(t: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Centered-difference d(phi)/dt / phi; zero where phi vanishes."""
    chi = np.zeros_like(phi)
    if len(t) < 3:
        return chi
    dphi = np.gradient(phi, t)
    pos = phi > 0
    chi[pos] = dphi[pos] / phi[pos]
    return chi
