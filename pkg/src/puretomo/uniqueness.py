"""Empirical unique-determinability checks.

Two density operators on a tripartite space are *compatible* when they
share the reduced operators on parties (A, B) and (A, C).  The set of
Hermitian directions preserving both marginals is a linear space; its
intersection with the PSD cone at a pure target decides whether any other
state reproduces the target's data.  `search_alternative` explores that
intersection by alternating projections from random starts: finding a
distant feasible point yields an explicit witness, while repeated collapse
back to the target is reported as an empirical (not mathematical)
certificate of uniqueness.
"""

from dataclasses import dataclass

import numpy as np

from .core import (
    DensityOperator,
    PureState,
    SystemShape,
    _ptrace_array,
    regroup_state,
    rng_from,
    trace_distance,
)
from .errors import DimensionMismatch, DomainError, NotRegularTriangular, RdmMismatch
from .canonical import is_regular_triangular

DEFAULT_SPLIT = ((0,), (1,), (2,))


@dataclass(frozen=True, eq=False)
class CompatibilityDirection:
    """Unit-Frobenius Hermitian direction with vanishing (A,B) and (A,C) marginals."""

    delta: np.ndarray
    dims: tuple

    def __post_init__(self):
        d = np.array(self.delta, dtype=np.complex128)
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)
        if np.abs(d - d.conj().T).max() > 1e-12:
            raise DimensionMismatch("direction must be Hermitian")
        p, db, dc = self.dims
        tb, _ = _ptrace_array(d, (p, db, dc), [0, 1])
        tc, _ = _ptrace_array(d, (p, db, dc), [0, 2])
        if max(np.abs(tb).max(), np.abs(tc).max()) > 1e-12:
            raise DimensionMismatch("direction must have vanishing partial traces")
        if abs(np.linalg.norm(d) - 1.0) > 1e-10:
            raise DimensionMismatch("direction must have unit Frobenius norm")


@dataclass(frozen=True)
class Witness:
    """Explicit operator sharing the target's reduced data but distinct from it."""

    rho: DensityOperator
    separation: float     # trace distance to the target projector
    seed: int


@dataclass(frozen=True)
class NoneFound:
    """Empirical failure to find an alternative; not a proof of uniqueness."""

    n_starts: int
    best_separation: float
    empirical: bool = True


@dataclass(frozen=True)
class SearchOptions:
    n_starts: int = 50
    min_separation: float = 1e-3
    seed: int = 0
    max_iter: int = 10_000
    step_tol: float = 1e-10
    start_scale: float = 0.5
    max_dim: int = 256
    match_tol: float = 1e-8


def _grouped_density(rho, split):
    """Matrix of `rho` with subsystems permuted into the three party groups."""
    dims = rho.shape.dims
    flat = [i for grp in split for i in grp]
    if sorted(flat) != list(range(len(dims))):
        raise IndexError(f"split {split} does not cover subsystems 0..{len(dims) - 1} exactly once")
    n = len(dims)
    tens = rho.tensor()
    perm = flat + [n + i for i in flat]
    mat = np.transpose(tens, perm).reshape(rho.shape.total, rho.shape.total)
    grouped = rho.shape.grouped(split)
    return mat, grouped.dims


def rdm_match(rho, sigma, split=None, tol=1e-10):
    """True iff rho and sigma share both the (A,B) and the (A,C) marginals."""
    if rho.shape.dims != sigma.shape.dims:
        raise DimensionMismatch(f"shapes {rho.shape.dims} and {sigma.shape.dims} differ")
    split = split or DEFAULT_SPLIT
    rmat, dims = _grouped_density(rho, split)
    smat, _ = _grouped_density(sigma, split)
    diff = rmat - smat
    ab, _ = _ptrace_array(diff, dims, [0, 1])
    ac, _ = _ptrace_array(diff, dims, [0, 2])
    return bool(np.linalg.norm(ab) <= tol and np.linalg.norm(ac) <= tol)


import functools


@functools.lru_cache(maxsize=None)
def _triu_cache(n):
    iu = np.triu_indices(n, 1)
    return iu, np.diag_indices(n)


def _hermitian_basis_vec(mat, n):
    """Isometric real coordinates of a Hermitian matrix (Frobenius-preserving)."""
    iu, _ = _triu_cache(n)
    return np.concatenate([
        np.diag(mat).real,
        np.sqrt(2.0) * mat[iu].real,
        np.sqrt(2.0) * mat[iu].imag,
    ])


def _hermitian_basis_unvec(vec, n):
    iu, di = _triu_cache(n)
    k = iu[0].size
    mat = np.zeros((n, n), dtype=np.complex128)
    mat[di] = vec[:n]
    upper = (vec[n:n + k] + 1j * vec[n + k:]) / np.sqrt(2.0)
    mat[iu] = upper
    mat[(iu[1], iu[0])] = upper.conj()
    return mat


def _constraint_matrix(p, db, dc):
    """Real-linear map from Hermitian operators to their two marginals."""
    n = p * db * dc
    nab = p * db
    nac = p * dc
    cols = []
    for col in range(n * n):
        unit = np.zeros(n * n)
        unit[col] = 1.0
        mat = _hermitian_basis_unvec(unit, n)
        tb, _ = _ptrace_array(mat, (p, db, dc), [0, 1])
        tc, _ = _ptrace_array(mat, (p, db, dc), [0, 2])
        cols.append(np.concatenate([
            _hermitian_basis_vec(tb, nab),
            _hermitian_basis_vec(tc, nac),
        ]))
    return np.array(cols).T


def matching_nullspace_basis(shape, max_dim=256):
    """Orthonormal basis of Hermitian directions with both marginals zero.

    Assembles the real-linear constraint map densely and extracts its null
    space; the result spans exactly the traceless directions invisible to
    the two reduced operators.
    """
    if isinstance(shape, SystemShape):
        dims = shape.dims
    else:
        dims = tuple(shape)
    if len(dims) != 3:
        raise DimensionMismatch(f"need a three-party view, got {dims}")
    p, db, dc = dims
    n = p * db * dc
    if n > max_dim:
        raise DomainError(f"total dimension {n} exceeds max_dim {max_dim}")
    cmat = _constraint_matrix(p, db, dc)
    u, s, vt = np.linalg.svd(cmat)
    tol = max(cmat.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    null = vt[rank:]
    return [CompatibilityDirection(_hermitian_basis_unvec(row, n), (p, db, dc)) for row in null]


def _project_affine(mat, target, basis_rows, n):
    """Orthogonal projection onto the affine set of matching Hermitian operators."""
    vec = _hermitian_basis_vec(mat - target, n)
    coeff = basis_rows @ vec
    return target + _hermitian_basis_unvec(basis_rows.T @ coeff, n)


def _project_psd_unit(mat):
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2.0)
    w = np.clip(w, 0.0, None)
    s = w.sum()
    if s <= 0.0:
        n = mat.shape[0]
        return np.eye(n, dtype=np.complex128) / n
    return (v * (w / s)) @ v.conj().T


def _converge(start, target, basis_rows, n, opts, max_iter=None):
    """Alternate projections; return the affine-side iterate.

    Exits on small steps, on collapse back to the target, or when the step
    size stagnates (the sublinear tail near tangential intersections, which
    the Gauss-Newton polish handles better than more sweeps would).
    """
    rho = start
    prev = None
    out = None
    budget = opts.max_iter if max_iter is None else max_iter
    checkpoint = np.inf
    step = np.inf
    for it in range(budget):
        aff = _project_affine(rho, target, basis_rows, n)
        rho = _project_psd_unit(aff)
        step = np.linalg.norm(rho - prev) if prev is not None else np.inf
        prev = rho
        out = aff
        if step < opts.step_tol:
            break
        if it % 100 == 99:
            if trace_distance(rho, target) < 0.3 * opts.min_separation:
                break  # collapsing back onto the target; no intrusion here
        if it % 300 == 299:
            if step > 0.5 * checkpoint:
                break  # stagnating
            checkpoint = step
    return out


def _marginal_vec(mat, dims):
    p, db, dc = dims
    ab, _ = _ptrace_array(mat, dims, [0, 1])
    ac, _ = _ptrace_array(mat, dims, [0, 2])
    return np.concatenate([
        _hermitian_basis_vec(ab, p * db),
        _hermitian_basis_vec(ac, p * dc),
    ])


def _gauss_newton_polish(x, bvec, dims, n, tol=1e-12):
    """Drive a near-feasible point onto the matching set exactly.

    Factors x = Y Y^dag at its numerical rank (PSD holds structurally) and
    solves the quadratic marginal constraints by damped Gauss-Newton; near
    the feasible face this converges quadratically where the alternating
    projections slow to a crawl.  Returns the polished matrix or None.
    """
    w, v = np.linalg.eigh((x + x.conj().T) / 2.0)
    w = np.clip(w[::-1], 0.0, None)
    v = v[:, ::-1]
    ratios = np.clip(w[:-1], 1e-300, None) / np.clip(w[1:], 1e-300, None)
    k_gap = int(np.argmax(ratios)) + 1
    for k in {k_gap, min(k_gap + 1, n), n}:
        y = v[:, :k] * np.sqrt(w[:k])[None, :]
        y, res = _gauss_newton_run(y, bvec, dims, n, tol)
        if res <= tol:
            return y @ y.conj().T
    return None


def _gauss_newton_run(y, bvec, dims, n, tol, iters=40):
    k = y.shape[1]
    history = []
    for it in range(iters):
        res = _marginal_vec(y @ y.conj().T, dims) - bvec
        res_norm = float(np.linalg.norm(res))
        history.append(res_norm)
        if res_norm <= tol:
            break
        if it >= 5 and res_norm > 0.3 * history[it - 3]:
            break  # stagnating; no quadratic basin here
        cols = []
        for idx in range(n * k):
            for part in (1.0, 1j):
                dy = np.zeros((n, k), dtype=np.complex128)
                dy[idx // k, idx % k] = part
                dx = dy @ y.conj().T + y @ dy.conj().T
                cols.append(_marginal_vec(dx, dims))
        jac = np.array(cols).T
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        dy = (step[0::2] + 1j * step[1::2]).reshape(n, k)
        damp = 1.0
        for _ in range(25):
            y_try = y + damp * dy
            if np.linalg.norm(_marginal_vec(y_try @ y_try.conj().T, dims) - bvec) < res_norm:
                y = y_try
                break
            damp /= 2.0
        else:
            break  # no descent left
    return y, float(np.linalg.norm(_marginal_vec(y @ y.conj().T, dims) - bvec))


def search_alternative(psi, split=None, opts=None):
    """Look for a density operator sharing psi's two marginals.

    Random starts seed alternating projections between the PSD cone and
    the affine matching set.  The deepest intrusion (max separation from
    the target, ties broken by start seed) is pushed outward along its
    separating direction and then polished onto the feasible set; if the
    polished point stays at least min_separation away it is returned as a
    Witness, otherwise the start statistics are reported as NoneFound
    (an empirical record, never a proof).
    """
    opts = opts or SearchOptions()
    split = split or (DEFAULT_SPLIT if len(psi.shape.dims) == 3 else None)
    if split is None:
        raise IndexError("split is required for states with more than three subsystems")
    grouped = regroup_state(psi, split)
    dims = grouped.shape.dims
    n = grouped.shape.total
    if n > opts.max_dim:
        raise DomainError(f"total dimension {n} exceeds max_dim {opts.max_dim}")
    target = np.outer(grouped.amplitudes, grouped.amplitudes.conj())
    basis = matching_nullspace_basis(dims, max_dim=opts.max_dim)
    if not basis:
        return NoneFound(n_starts=0, best_separation=0.0)
    basis_rows = np.array([_hermitian_basis_vec(b.delta, n) for b in basis])
    raw_best = None
    raw_sep = 0.0
    raw_seed = -1
    for start_idx in range(opts.n_starts):
        rng = rng_from(opts.seed, 31, start_idx)
        coeff = rng.standard_normal(len(basis))
        coeff /= np.linalg.norm(coeff)
        scale = opts.start_scale * (1.0 + start_idx % 3)
        start = _project_psd_unit(target + scale * _hermitian_basis_unvec(basis_rows.T @ coeff, n))
        aff = _converge(start, target, basis_rows, n, opts)
        if aff is None:
            continue
        sep = trace_distance(aff, target)
        if sep > raw_sep:
            raw_sep, raw_best, raw_seed = sep, aff, start_idx
    if raw_best is None or raw_sep < 0.3 * opts.min_separation:
        return NoneFound(n_starts=opts.n_starts, best_separation=0.0)
    # polish the deepest intrusion onto the feasible set; unique targets
    # make this collapse (or fail), which settles NoneFound cheaply
    bvec = _marginal_vec(target, dims)
    polished = _gauss_newton_polish(raw_best, bvec, dims, n)
    if polished is None:
        return NoneFound(n_starts=opts.n_starts, best_separation=0.0)
    sep = trace_distance(polished, target)
    if sep < 0.3 * opts.min_separation:
        return NoneFound(n_starts=opts.n_starts, best_separation=float(sep))
    # ratchet outward along the separating direction, polishing each step
    current, cur_sep = polished, sep
    for _ in range(20):
        push = current + 0.6 * (current - target)
        approx = _converge(_project_psd_unit(push), target, basis_rows, n, opts, max_iter=400)
        if approx is None:
            break
        cand = _gauss_newton_polish(approx, bvec, dims, n)
        if cand is None:
            break
        cand_sep = trace_distance(cand, target)
        if cand_sep <= cur_sep + 1e-9:
            break
        current, cur_sep = cand, cand_sep
    if cur_sep >= opts.min_separation:
        herm = (current + current.conj().T) / 2.0
        rho = DensityOperator(SystemShape(dims), herm, trace=float(np.trace(herm).real))
        return Witness(rho=rho, separation=float(cur_sep), seed=raw_seed)
    return NoneFound(n_starts=opts.n_starts, best_separation=float(cur_sep))


@dataclass(frozen=True)
class ReductionDiagnostics:
    """Residuals of the level-compression identities for a compatible operator."""

    top_block_residual: float     # || P1 rho P1 - P1 |phi><phi| P1 ||_F
    compressed_rdm_mismatch: float  # marginal mismatch of P2 rho P2 vs P2 |phi><phi| P2


def verify_theorem_reduce(phi, rho, tol=1e-10):
    """Check the compression identities a compatible operator must satisfy.

    For a regular triangular phi and any PSD rho matching both marginals of
    |phi><phi|, the top-level block of rho (third party in its highest
    basis state) must equal that of the projector exactly, and the
    compressed operators must again share both marginals.  Returns the two
    residuals; valid inputs drive both to zero.
    """
    if not is_regular_triangular(phi):
        raise NotRegularTriangular("input state fails the regularity conditions")
    d = phi.d
    proj = phi.state.density()
    if rho.shape.dims != proj.shape.dims:
        raise DimensionMismatch(f"shapes {rho.shape.dims} and {proj.shape.dims} differ")
    if not rdm_match(rho, proj, tol=tol):
        raise RdmMismatch("rho does not match the reference marginals at the stated tolerance")
    p1 = np.zeros((d, d))
    p1[d - 1, d - 1] = 1.0
    p2 = np.eye(d) - p1
    full_p1 = np.kron(np.eye(2 * d), p1)
    full_p2 = np.kron(np.eye(2 * d), p2)
    diff = rho.matrix - proj.matrix
    top = full_p1 @ diff @ full_p1
    top_res = float(np.linalg.norm(top))
    comp = full_p2 @ diff @ full_p2
    ab, _ = _ptrace_array(comp, (2, d, d), [0, 1])
    ac, _ = _ptrace_array(comp, (2, d, d), [0, 2])
    comp_res = float(max(np.linalg.norm(ab), np.linalg.norm(ac)))
    return ReductionDiagnostics(top_block_residual=top_res, compressed_rdm_mismatch=comp_res)


def alpha_expansion(phi, alpha):
    """Cross-term interpolation of the projector through the level split.

    Builds P1 rho P1 + P2 rho P2 + alpha P1 rho P2 + conj(alpha) P2 rho P1
    for rho = |phi><phi|; only alpha = 1 reproduces an operator compatible
    with phi's marginals.
    """
    d = phi.d
    proj = phi.state.density().matrix
    p1 = np.zeros((d, d))
    p1[d - 1, d - 1] = 1.0
    full_p1 = np.kron(np.eye(2 * d), p1)
    full_p2 = np.kron(np.eye(2 * d), np.eye(d) - p1)
    alpha = complex(alpha)
    mat = (full_p1 @ proj @ full_p1 + full_p2 @ proj @ full_p2
           + alpha * full_p1 @ proj @ full_p2 + np.conj(alpha) * full_p2 @ proj @ full_p1)
    return mat
