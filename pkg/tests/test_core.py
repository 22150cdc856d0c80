import numpy as np
import pytest

from puretomo.core import (
    DensityOperator,
    PureState,
    SystemShape,
    UnitaryMatrix,
    apply_local_unitary,
    fidelity_pure,
    haar_random_state,
    haar_random_unitary,
    kron,
    partial_trace,
    schur_unitary,
    sorted_schur,
    trace_distance,
)
from puretomo.errors import (
    ConvergenceFailure,
    DimensionMismatch,
    DomainError,
    InvalidOperator,
)

from conftest import random_density


# ---------------------------------------------------------------- kron

def kron_oracle(x, y):
    """Element-wise tensor product straight from the index formula."""
    rx, cx = x.shape
    ry, cy = y.shape
    out = np.zeros((rx * ry, cx * cy), dtype=complex)
    for i in range(rx):
        for j in range(ry):
            for k in range(cx):
                for l in range(cy):
                    out[i * ry + j, k * cy + l] = x[i, k] * y[j, l]
    return out


def test_kron_identity():
    assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))


def test_kron_scalar_factor():
    assert np.array_equal(kron(np.diag([1.0, 2.0]), np.eye(1)), np.diag([1.0, 2.0]))


def test_kron_matches_index_oracle():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    y = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    assert np.abs(kron(x, y) - kron_oracle(x, y)).max() < 1e-14


@pytest.mark.parametrize("seed", range(5))
def test_kron_norm_multiplicative_and_associative(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    y = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    assert abs(np.linalg.norm(kron(x, y)) - np.linalg.norm(x) * np.linalg.norm(y)) < 1e-12
    left = kron(kron(x, y), z)
    right = kron(x, kron(y, z))
    assert np.abs(left - right).max() < 1e-12


# ------------------------------------------------------- partial trace

def ptrace_oracle_keep_first_and_third(rho):
    """Brute-force quadruple index sum for a 3-qubit operator, keep sites 0 and 2."""
    t = rho.reshape(2, 2, 2, 2, 2, 2)
    out = np.zeros((4, 4), dtype=complex)
    for a in range(2):
        for c in range(2):
            for a2 in range(2):
                for c2 in range(2):
                    s = 0.0
                    for b in range(2):
                        s += t[a, b, c, a2, b, c2]
                    out[a * 2 + c, a2 * 2 + c2] = s
    return out


def test_partial_trace_bell_marginal():
    amps = np.zeros(4, dtype=complex)
    amps[0] = amps[3] = 1.0 / np.sqrt(2.0)
    bell = PureState(SystemShape((2, 2)), amps)
    red = partial_trace(bell.density(), [0])
    assert np.abs(red.matrix - np.eye(2) / 2.0).max() < 1e-14


def test_partial_trace_product_factorization():
    rng = np.random.default_rng(3)
    r1 = random_density(rng, 2)
    r2 = random_density(rng, 3)
    rho = DensityOperator(SystemShape((2, 3)), kron(r1, r2))
    red = partial_trace(rho, [0])
    assert np.abs(red.matrix - r1).max() < 1e-12


def test_partial_trace_matches_index_sum_oracle():
    rng = np.random.default_rng(11)
    mat = random_density(rng, 8)
    rho = DensityOperator(SystemShape((2, 2, 2)), mat)
    red = partial_trace(rho, [0, 2])
    assert np.abs(red.matrix - ptrace_oracle_keep_first_and_third(mat)).max() < 1e-13
    assert red.shape.dims == (2, 2)


@pytest.mark.parametrize("seed", range(4))
def test_partial_trace_preserves_trace_and_hermiticity(seed):
    rng = np.random.default_rng(seed)
    mat = random_density(rng, 12)
    rho = DensityOperator(SystemShape((2, 3, 2)), mat)
    for keep in ([0], [1], [2], [0, 1], [1, 2]):
        red = partial_trace(rho, keep)
        assert abs(np.trace(red.matrix) - np.trace(mat)) < 1e-10
        assert np.abs(red.matrix - red.matrix.conj().T).max() < 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_partial_trace_commutes_with_local_unitaries(seed):
    # rotating all three parties and tracing out C equals tracing out C
    # first and rotating the kept parties
    psi = haar_random_state((2, 3, 3), seed)
    ua = haar_random_unitary(2, 10 + seed)
    ub = haar_random_unitary(3, 20 + seed)
    uc = haar_random_unitary(3, 30 + seed)
    rotated = apply_local_unitary(
        apply_local_unitary(apply_local_unitary(psi, ua, 0), ub, 1), uc, 2)
    left = partial_trace(rotated.density(), [0, 1]).matrix
    u_ab = kron(ua.matrix, ub.matrix)
    right = u_ab @ partial_trace(psi.density(), [0, 1]).matrix @ u_ab.conj().T
    assert np.abs(left - right).max() < 1e-10


def test_partial_trace_bad_index_raises():
    rho = haar_random_state((2, 2), 0).density()
    with pytest.raises(IndexError):
        partial_trace(rho, [2])
    with pytest.raises(IndexError):
        partial_trace(rho, [])


# -------------------------------------------------- local unitaries

def test_apply_local_unitary_identity():
    psi = haar_random_state((2, 3, 3), 5)
    out = apply_local_unitary(psi, UnitaryMatrix(np.eye(3)), 1)
    assert np.abs(out.amplitudes - psi.amplitudes).max() == 0.0


def test_apply_local_unitary_flip():
    # qubit flip on the first site sends |1,1> to |2,1> (paper indexing)
    amps = np.zeros(4, dtype=complex)
    amps[0] = 1.0
    psi = PureState(SystemShape((2, 2)), amps)
    flip = UnitaryMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    out = apply_local_unitary(psi, flip, 0)
    expect = np.zeros(4, dtype=complex)
    expect[2] = 1.0
    assert np.abs(out.amplitudes - expect).max() < 1e-15


@pytest.mark.parametrize("site", [0, 1, 2])
def test_apply_local_unitary_matches_kron_oracle(site):
    psi = haar_random_state((2, 3, 2), 8)
    dims = psi.shape.dims
    u = haar_random_unitary(dims[site], 42 + site)
    mats = [np.eye(d) for d in dims]
    mats[site] = u.matrix
    full = kron(kron(mats[0], mats[1]), mats[2])
    out = apply_local_unitary(psi, u, site)
    assert np.abs(out.amplitudes - full @ psi.amplitudes).max() < 1e-12
    assert abs(np.linalg.norm(out.amplitudes) - 1.0) < 1e-12


def test_apply_local_unitary_dimension_mismatch():
    psi = haar_random_state((2, 3), 1)
    with pytest.raises(DimensionMismatch):
        apply_local_unitary(psi, UnitaryMatrix(np.eye(2)), 1)


# ----------------------------------------------------- Haar sampling

def test_haar_state_normalized():
    for seed in range(10):
        psi = haar_random_state((2, 3, 3), seed)
        assert abs(np.linalg.norm(psi.amplitudes) - 1.0) < 1e-12


def test_haar_state_deterministic():
    a = haar_random_state((2, 2, 2), 42)
    b = haar_random_state((2, 2, 2), 42)
    assert np.array_equal(a.amplitudes, b.amplitudes)


def test_haar_state_first_component_statistics():
    # mean of |<e1|psi>|^2 over many samples should match 1/total
    total = 8
    n = 10_000
    vals = np.empty(n)
    for seed in range(n):
        vals[seed] = abs(haar_random_state((2, 2, 2), seed).amplitudes[0]) ** 2
    se = vals.std(ddof=1) / np.sqrt(n)
    assert abs(vals.mean() - 1.0 / total) < 5 * se


def test_haar_unitary_is_unitary_and_deterministic():
    u = haar_random_unitary(4, 3)
    assert np.abs(u.matrix @ u.matrix.conj().T - np.eye(4)).max() < 1e-12
    assert np.array_equal(u.matrix, haar_random_unitary(4, 3).matrix)


# --------------------------------------------------------- fidelity

def test_fidelity_self_and_orthogonal():
    psi = haar_random_state((2, 2), 1)
    assert abs(fidelity_pure(psi, psi) - 1.0) < 1e-12
    e0 = PureState(SystemShape((2, 2)), np.array([1, 0, 0, 0], dtype=complex))
    e1 = PureState(SystemShape((2, 2)), np.array([0, 1, 0, 0], dtype=complex))
    assert fidelity_pure(e0, e1) == 0.0


def test_fidelity_global_phase_invariant():
    rng = np.random.default_rng(9)
    psi = haar_random_state((2, 3), 4)
    for _ in range(5):
        theta = rng.uniform(0, 2 * np.pi)
        rotated = PureState(psi.shape, np.exp(1j * theta) * psi.amplitudes)
        assert abs(fidelity_pure(psi, rotated) - 1.0) < 1e-12


def test_fidelity_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        fidelity_pure(haar_random_state((2, 2), 0), haar_random_state((4,), 0))


# ------------------------------------------------------------ Schur

def charpoly_roots_oracle(m):
    """Eigenvalues via determinant sampling + polynomial interpolation."""
    d = m.shape[0]
    xs = np.exp(2j * np.pi * np.arange(d + 1) / (d + 1)) * (1.0 + np.abs(m).max())
    vals = [np.linalg.det(m - x * np.eye(d)) for x in xs]
    coeffs = np.polyfit(xs, vals, d)
    return np.roots(coeffs)


def test_schur_diagonal_input():
    m = np.diag([3.0, 1.0, 2.0]).astype(complex)
    q, t = schur_unitary(m)
    assert np.abs(np.tril(t, -1)).max() < 1e-12
    assert sorted(np.diag(t).real.tolist()) == [1.0, 2.0, 3.0]
    # q is a permutation with phases: exactly one unit entry per row
    mags = np.abs(q.matrix)
    assert np.allclose(np.sort(mags, axis=1)[:, :-1], 0.0, atol=1e-12)


def test_schur_residual_and_unitarity():
    rng = np.random.default_rng(12)
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    q, t = schur_unitary(m)
    scale = np.linalg.norm(m)
    assert np.linalg.norm(q.matrix @ m @ q.matrix.conj().T - t) < 1e-10 * scale
    assert np.abs(q.matrix @ q.matrix.conj().T - np.eye(4)).max() < 1e-12
    assert np.abs(np.tril(t, -1)).max() < 1e-10 * scale


@pytest.mark.parametrize("seed", range(4))
def test_schur_eigenvalues_match_charpoly_oracle(seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    _, t = schur_unitary(m)
    got = np.sort_complex(np.diag(t))
    want = np.sort_complex(charpoly_roots_oracle(m))
    assert np.abs(got - want).max() < 1e-8


def test_sorted_schur_orders_diagonal():
    rng = np.random.default_rng(17)
    m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    q, t = sorted_schur(m)
    diag = np.diag(t)
    keys = [(z.real, z.imag) for z in diag]
    assert keys == sorted(keys)
    assert np.linalg.norm(q @ t @ q.conj().T - m) < 1e-10 * np.linalg.norm(m)


# ------------------------------------------------------ type checks

def test_pure_state_norm_enforced():
    with pytest.raises(InvalidOperator):
        PureState(SystemShape((2,)), np.array([1.0, 1.0]))
    PureState(SystemShape((2,)), np.array([1.0, 1.0]), normalized=False)  # allowed


def test_density_operator_validation():
    with pytest.raises(InvalidOperator):
        DensityOperator(SystemShape((2,)), np.array([[1.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(InvalidOperator):  # negative eigenvalue
        DensityOperator(SystemShape((2,)), np.diag([1.5, -0.5]))
    with pytest.raises(InvalidOperator):  # trace mismatch
        DensityOperator(SystemShape((2,)), np.diag([0.4, 0.4]))


def test_unitary_validation():
    with pytest.raises(InvalidOperator):
        UnitaryMatrix(np.array([[1.0, 0.0], [0.0, 2.0]]))
    with pytest.raises(DimensionMismatch):
        UnitaryMatrix(np.ones((2, 3)))


def test_system_shape_validation():
    with pytest.raises(DomainError):
        SystemShape((2, 0, 2))


def test_trace_distance_known_value(ghz3):
    proj = ghz3.density()
    mix = (np.outer(np.eye(8)[0], np.eye(8)[0]) + np.outer(np.eye(8)[7], np.eye(8)[7])) / 2.0
    assert abs(trace_distance(proj, DensityOperator(SystemShape((2, 2, 2)), mix)) - 0.5) < 1e-12
