import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qflow.qtensor import (
    S0_BASIS,
    ModelParams,
    State,
    advect,
    bulk_force,
    corotation,
    elastic_stress_div,
    mat_to_q,
    molecular_field,
    q_to_mat,
    random_qtensor,
    stress_tensor,
    tensor_rhs,
    trace_q2,
    trace_q3,
    velocity_gradient,
    velocity_rhs,
    vorticity_mat,
)
from qflow.spectral import Grid, random_scalar, random_velocity


@pytest.fixture(scope="module")
def grid():
    return Grid(64)


def params(**kw):
    base = dict(a=-0.2, b=0.8, c=1.0, gamma=0.8, nu=0.25, L=0.4)
    base.update(kw)
    return ModelParams(**base)


def uniaxial(grid, s):
    """Q = s (e3.e3 - Id/3) for a scalar field or constant s."""
    q = np.zeros((5, grid.n, grid.n))
    q[1] = -np.sqrt(2.0 / 3.0) * s
    return q


def test_basis_orthonormal_traceless():
    for a in range(5):
        ea = S0_BASIS[a]
        assert abs(np.trace(ea)) <= 1e-15
        assert np.abs(ea - ea.T).max() == 0.0
        for b in range(5):
            assert abs(np.trace(S0_BASIS[a] @ S0_BASIS[b]) - (a == b)) <= 1e-15


def test_mat_roundtrip_and_frobenius(grid):
    rng = np.random.default_rng(0)
    q = random_qtensor(grid, rng)
    m = q_to_mat(q)
    assert np.abs(np.trace(m, axis1=-2, axis2=-1)).max() <= 1e-14
    assert np.abs(m - np.swapaxes(m, -1, -2)).max() == 0.0
    assert np.abs(mat_to_q(m) - q).max() <= 1e-14
    frob = np.sum(m * m, axis=(-2, -1))
    assert np.abs(frob - trace_q2(q)).max() <= 1e-13


def test_params_constraints():
    with pytest.raises(ValueError):
        params(c=-1.0)
    with pytest.raises(ValueError):
        params(c=0.0)
    with pytest.raises(ValueError):
        params(nu=-0.1)
    with pytest.raises(ValueError):
        params(n_cutoff=0)


def test_bulk_force_zero(grid):
    p = params()
    q = np.zeros((5, grid.n, grid.n))
    assert np.abs(bulk_force(q, p)).max() == 0.0


def test_bulk_force_uniaxial_formula(grid):
    # P(s(e3.e3 - Id/3)) = (-a + b s/3 - 2 c s^2/3) s (e3.e3 - Id/3)
    p = params(a=0.3, b=1.1, c=0.9)
    s = 0.7
    q = uniaxial(grid, s)
    got = bulk_force(q, p)
    factor = -p.a + p.b * s / 3.0 - 2.0 * p.c * s**2 / 3.0
    assert np.abs(got - factor * q).max() <= 1e-13


def test_bulk_force_matches_dense_oracle(grid):
    rng = np.random.default_rng(1)
    p = params()
    q = random_qtensor(grid, rng)
    m = q_to_mat(q)
    m2 = m @ m
    tr2 = np.trace(m2, axis1=-2, axis2=-1)
    eye = np.eye(3)
    expect = (-p.a * m + p.b * (m2 - tr2[..., None, None] * eye / 3.0)
              - p.c * tr2[..., None, None] * m)
    got = q_to_mat(bulk_force(q, p))  # pointwise evaluation, no dealiasing
    assert np.abs(got - expect).max() <= 1e-12 * np.abs(expect).max()
    # trace-free to near machine precision for every point
    assert np.abs(np.trace(got, axis1=-2, axis2=-1)).max() <= 1e-14


def test_molecular_field(grid):
    p = params(a=0.4, b=0.7, c=1.2)
    q = uniaxial(grid, 0.5)  # constant in space
    h = molecular_field(grid, q, p)
    assert np.abs(h - bulk_force(q, p)).max() <= 1e-12

    x, _ = grid.nodes()
    p0 = params(a=0.0, b=0.0, c=1e-14)
    q = np.zeros((5, grid.n, grid.n))
    q[0] = np.sin(x)
    h = molecular_field(grid, q, p0)
    assert np.abs(h + p0.L * q).max() <= 1e-11


def test_corotation_examples(grid):
    rng = np.random.default_rng(2)
    q = random_qtensor(grid, rng)
    assert np.abs(corotation(grid, q, np.zeros((2, grid.n, grid.n)))).max() == 0.0

    # planar Q = diag(1,-1,0), Omega_12 = 1 at x = 0 via u = (0, 2 sin x)
    x, _ = grid.nodes()
    u = np.stack([np.zeros_like(x), 2.0 * np.sin(x)])
    qc = np.zeros((5, grid.n, grid.n))
    qc[0] = np.sqrt(2.0)  # diag(1,-1,0)
    out = q_to_mat(corotation(grid, qc, u, dealias=False))
    col0 = out[0, 0]  # x = 0 column
    assert abs(col0[0, 1] + 2.0) <= 1e-12 and abs(col0[1, 0] + 2.0) <= 1e-12
    assert np.abs(np.diagonal(col0)).max() <= 1e-12

    u_rand = random_velocity(grid, rng)
    flipped = corotation(grid, q, -u_rand)
    assert np.abs(flipped + corotation(grid, q, u_rand)).max() <= 1e-13


def test_corotation_output_symmetric_traceless(grid):
    rng = np.random.default_rng(3)
    q = random_qtensor(grid, rng)
    u = random_velocity(grid, rng)
    m = q_to_mat(corotation(grid, q, u))
    assert np.abs(m - np.swapaxes(m, -1, -2)).max() == 0.0
    assert np.abs(np.trace(m, axis1=-2, axis2=-1)).max() <= 1e-14
    # basis projection is lossless here: the dense commutator is already in S0
    om = vorticity_mat(grid, u)
    mq = q_to_mat(q)
    dense = om @ mq - mq @ om
    assert np.abs(m - grid.dealias(np.moveaxis(dense, (-2, -1), (0, 1))).transpose(2, 3, 0, 1)
                  ).max() <= 1e-12


def test_advection_examples(grid):
    x, _ = grid.nodes()
    u = np.stack([np.ones_like(x), np.zeros_like(x)])
    assert np.abs(advect(grid, u, np.ones_like(x))).max() <= 1e-13
    out = advect(grid, u, np.sin(x), dealias=False)
    assert np.abs(out - np.cos(x)).max() <= 1e-12

    rng = np.random.default_rng(4)
    udiv = random_velocity(grid, rng)
    f = random_scalar(grid, rng)
    mean = abs(grid.integral(advect(grid, udiv, f)))
    assert mean <= 1e-10 * grid.norm_l2(udiv) * grid.norm_l2(f)


def test_stress_divergence_examples(grid):
    p = params()
    q0 = uniaxial(grid, 0.3)
    assert np.abs(elastic_stress_div(grid, q0, p)).max() <= 1e-12

    rng = np.random.default_rng(5)
    q = random_qtensor(grid, rng)
    force = elastic_stress_div(grid, q, p)
    assert np.abs(force.mean(axis=(-2, -1))).max() <= 1e-10 * np.abs(force).max()


def test_stress_duality(grid):
    # <div S, u> = -<S, grad u> under the Frobenius pairing, by quadrature
    rng = np.random.default_rng(6)
    p = params()
    q = random_qtensor(grid, rng)
    u = random_velocity(grid, rng)
    force = elastic_stress_div(grid, q, p)
    sigma = p.L * stress_tensor(grid, q)
    uh = grid.fft(u)
    pairing = 0.0
    for i in range(2):
        for j in range(2):
            pairing += grid.inner(sigma[i, j], grid.ifft(grid.deriv_hat(uh[j], i + 1)))
    lhs = grid.inner(force, u)
    assert abs(lhs + pairing) <= 1e-8 * (abs(lhs) + abs(pairing))


def test_tensor_rhs_examples(grid):
    p = params(a=0.5, b=0.0, c=1e-14, gamma=1.3)
    q = uniaxial(grid, 0.4)
    s = State(np.zeros((2, grid.n, grid.n)), q)
    rhs = tensor_rhs(grid, s, p)
    assert np.abs(rhs + p.gamma * p.a * q).max() <= 1e-12

    rng = np.random.default_rng(7)
    s2 = State(random_velocity(grid, rng), random_qtensor(grid, rng))
    m = q_to_mat(tensor_rhs(grid, s2, params()))
    assert np.abs(np.trace(m, axis1=-2, axis2=-1)).max() <= 1e-13


def test_friedrichs_wrapping(grid):
    # velocity modes outside the annulus [1/m, m] do not transport Q
    x, y = grid.nodes()
    p = params(n_cutoff=2)
    u_high = np.stack([np.sin(5 * y), np.sin(5 * x)])  # |k|=5 > m=2: erased by the cutoff
    rng = np.random.default_rng(8)
    q = random_qtensor(grid, rng)
    s = State(u_high, q)
    rhs_cut = tensor_rhs(grid, s, p)
    rhs_ref = tensor_rhs(grid, State(np.zeros_like(u_high), q), params())
    assert np.abs(rhs_cut - p.gamma / params().gamma * rhs_ref).max() <= 1e-11

    # momentum nonlinearities are annulus-supported in Friedrichs mode
    p4 = params(n_cutoff=4, nu=1e-12)
    s3 = State(random_velocity(grid, rng), q)
    rhsh = grid.fft(velocity_rhs(grid, s3, p4))
    outside = (grid.kmag < 1.0 / 4.0) | (grid.kmag > 4.0)
    assert np.abs(rhsh[:, outside]).max() <= 1e-9 * np.abs(rhsh).max()


def test_velocity_rhs_examples(grid):
    # Taylor-Green: advection is a gradient, the projector leaves -2 nu u
    x, y = grid.nodes()
    u = np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])
    p = params(nu=0.3)
    s = State(u, np.zeros((5, grid.n, grid.n)))
    rhs = velocity_rhs(grid, s, p)
    assert np.abs(rhs + 2 * p.nu * u).max() <= 1e-11

    q0 = uniaxial(grid, 0.3)
    s2 = State(np.zeros((2, grid.n, grid.n)), q0)
    assert np.abs(velocity_rhs(grid, s2, p)).max() <= 1e-12

    rng = np.random.default_rng(9)
    s3 = State(random_velocity(grid, rng), random_qtensor(grid, rng))
    rhsh = grid.fft(velocity_rhs(grid, s3, p))
    assert grid.divergence_residual(rhsh) <= 1e-12


def test_cubic_traces(grid):
    s = 0.8
    q = uniaxial(grid, s)
    assert np.abs(trace_q2(q) - 2 * s**2 / 3).max() <= 1e-13
    assert np.abs(trace_q3(q) - 2 * s**3 / 9).max() <= 1e-13
    z = np.zeros((5, grid.n, grid.n))
    assert np.abs(trace_q2(z)).max() == 0.0 and np.abs(trace_q3(z)).max() == 0.0


def test_trace_q3_eigenvalue_identity(grid):
    rng = np.random.default_rng(10)
    q = random_qtensor(grid, rng)
    m = q_to_mat(q)[::8, ::8]  # subsample: eigendecompositions are slow
    lam = np.linalg.eigvalsh(m)
    expect = np.sum(lam**3, axis=-1)  # = 3 l1 l2 l3 = -3 l1 l2 (l1+l2) for trace-free
    got = trace_q3(q)[::8, ::8]
    assert np.abs(got - expect).max() <= 1e-12


def test_trace_q3_young_bound(grid):
    # |tr Q^3| <= eps tr{Q^2}^2 + C(eps) tr{Q^2} at eps = 1; sharp C is 1/24
    rng = np.random.default_rng(11)
    cfit = 0.0
    for _ in range(20):
        q = random_qtensor(grid, rng) * rng.uniform(0.05, 3.0)
        t2 = trace_q2(q)
        t3 = np.abs(trace_q3(q))
        mask = t2 > 1e-14
        cfit = max(cfit, ((t3[mask] - t2[mask] ** 2) / t2[mask]).max())
    assert cfit <= 1.0 / 24.0 + 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 5.0))
def test_s0_closure_property(seed, amp):
    grid = Grid(16)
    rng = np.random.default_rng(seed)
    q = amp * random_qtensor(grid, rng, kmax=4)
    u = random_velocity(grid, rng, kmax=4)
    out = tensor_rhs(grid, State(u, q), params())
    m = q_to_mat(out)
    assert np.abs(m - np.swapaxes(m, -1, -2)).max() == 0.0
    assert np.abs(np.trace(m, axis1=-2, axis2=-1)).max() <= 1e-12 * (1 + np.abs(out).max())


def test_corotation_orthogonality(grid):
    rng = np.random.default_rng(12)
    q = random_qtensor(grid, rng)
    u = random_velocity(grid, rng)
    co = corotation(grid, q, u, dealias=False)
    val = abs(grid.inner(co, q))
    m = q_to_mat(co)
    scale = grid.norm_l2(np.sqrt(np.sum(m * m, axis=(-2, -1)))) * grid.norm_l2(q)
    assert val <= 1e-10 * scale


def test_transport_skew_symmetry(grid):
    rng = np.random.default_rng(13)
    q = random_qtensor(grid, rng)
    u = random_velocity(grid, rng)
    adv = advect(grid, u, q, dealias=False)
    val = abs(grid.inner(adv, q))
    assert val <= 1e-10 * grid.norm_l2(adv) * grid.norm_l2(q)


def test_stress_transport_pairing(grid):
    # int tr{(u.grad Q) lap Q} = int div{grad Q o grad Q} . u
    rng = np.random.default_rng(14)
    q = random_qtensor(grid, rng)
    u = random_velocity(grid, rng)
    qh = grid.fft(q)
    lapq = grid.ifft(grid.laplacian_hat(qh))
    lhs = grid.inner(advect(grid, u, q, dealias=False), lapq)

    dq = (grid.ifft(grid.deriv_hat(qh, 1)), grid.ifft(grid.deriv_hat(qh, 2)))
    div = np.zeros((2, grid.n, grid.n))
    for j in range(2):
        col = np.stack([np.sum(dq[0] * dq[j], axis=0), np.sum(dq[1] * dq[j], axis=0)])
        colh = grid.fft(col)
        div[j] = grid.ifft(grid.deriv_hat(colh[0], 1) + grid.deriv_hat(colh[1], 2))
    rhs = grid.inner(div, u)
    assert abs(lhs - rhs) <= 1e-8 * (abs(lhs) + abs(rhs) + 1e-30)


def test_velocity_gradient_embedding(grid):
    rng = np.random.default_rng(15)
    u = random_velocity(grid, rng)
    g3 = velocity_gradient(grid, u)
    assert np.abs(g3[..., 2, :]).max() == 0.0 and np.abs(g3[..., :, 2]).max() == 0.0
    om = vorticity_mat(grid, u)
    assert np.abs(om + np.swapaxes(om, -1, -2)).max() == 0.0
    # Omega_12 = vorticity/2 with the d_i u_j convention
    uh = grid.fft(u)
    vort = grid.ifft(grid.deriv_hat(uh[1], 1) - grid.deriv_hat(uh[0], 2))
    assert np.abs(om[..., 0, 1] - 0.5 * vort).max() <= 1e-12
