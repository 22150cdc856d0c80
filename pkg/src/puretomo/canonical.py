"""Triangular canonical form for pure states on C2 x Cd x Cd.

A state psi with a 2-dimensional first party maps linearly to a pair of
d x d matrices (A, B): A holds the amplitudes with the first party in its
first basis state, B those with the second.  Rotating the two d-level
parties acts on the pair as (A, B) -> (U A V^dag, U B V^dag), so a state
is brought to canonical form by simultaneously triangularizing the pair
and then fixing the left/right diagonal phase gauge.  In the canonical
form both matrices are upper triangular and the diagonal plus first
superdiagonal of A are real non-negative.

Note the bookkeeping between the two pictures: a pair-side right factor V
corresponds to applying conj(V) to the third subsystem of the state.
"""

import numpy as np
import scipy.linalg as la

from .core import PureState, SystemShape, UnitaryMatrix, apply_local_unitary, sorted_schur
from .errors import (
    DegeneratePencil,
    DimensionMismatch,
    DomainError,
    NotRegularTriangular,
    NotTriangular,
)

from dataclasses import dataclass

PENCIL_TOL = 1e-10
ROOT_GROUP_TOL = 1e-8
TRIANGULAR_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MatrixPair:
    """The matrix image (A, B) of a state on C2 x Cd x Cd."""

    d: int
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=np.complex128)
        b = np.array(self.b, dtype=np.complex128)
        if a.shape != (self.d, self.d) or b.shape != (self.d, self.d):
            raise DimensionMismatch(
                f"pair matrices must both be {self.d}x{self.d}, got {a.shape} and {b.shape}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


def state_to_pair(psi):
    """Matrix image of a (2, d, d) state: A[i, j] = psi[0, i, j], B[i, j] = psi[1, i, j]."""
    dims = psi.shape.dims
    if len(dims) != 3 or dims[0] != 2 or dims[1] != dims[2]:
        raise DimensionMismatch(f"state must have shape (2, d, d), got {dims}")
    tens = psi.tensor()
    return MatrixPair(dims[1], tens[0], tens[1])


def pair_to_state(pair):
    """Inverse of state_to_pair.  The output is not renormalized."""
    amps = np.stack([pair.a, pair.b]).reshape(-1)
    return PureState(SystemShape((2, pair.d, pair.d)), amps, normalized=False)


def triangular_manifold_dim(d):
    """Real dimension 2*d^2 + 1 of the canonical-form manifold."""
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    return 2 * d * d + 1


def _pencil_full_degree(b, tol):
    """det(A - xB) has degree d exactly when det(B) != 0; decided at scale ||B||_F^d."""
    d = b.shape[0]
    scale = np.linalg.norm(b) ** d
    return abs(np.linalg.det(b)) > tol * scale


def _reality_phases(ta, tol, scale):
    """Diagonal phases (mu, nu) making diag and superdiag of e^{i mu} TA e^{-i nu} real >= 0.

    Entries below tol*scale leave the gauge underdetermined; they are
    skipped and reported in `flagged`.
    """
    d = ta.shape[0]
    mu = np.zeros(d)
    nu = np.zeros(d)
    flagged = []
    for i in range(d):
        if abs(ta[i, i]) > tol * scale:
            mu[i] = nu[i] - np.angle(ta[i, i])
        else:
            mu[i] = nu[i]
            flagged.append((i, i))
        if i + 1 < d:
            if abs(ta[i, i + 1]) > tol * scale:
                nu[i + 1] = mu[i] + np.angle(ta[i, i + 1])
            else:
                nu[i + 1] = mu[i]
                flagged.append((i, i + 1))
    return mu, nu, flagged


def _apply_reality_gauge(u, v, ta, tb, tol):
    scale = max(np.abs(ta).max(), np.abs(tb).max(), 1e-300)
    mu, nu, flagged = _reality_phases(ta, tol, scale)
    dl = np.exp(1j * mu)
    dr = np.exp(1j * nu)
    ta = dl[:, None] * ta * dr.conj()[None, :]
    tb = dl[:, None] * tb * dr.conj()[None, :]
    u = dl[:, None] * u
    v = dr[:, None] * v
    return u, v, ta, tb, flagged


def _coincident_roots(roots, tol):
    srt = sorted(roots, key=lambda z: (z.real, z.imag))
    scale = max(1.0, max(abs(z) for z in srt))
    return any(abs(srt[k + 1] - srt[k]) <= tol * scale for k in range(len(srt) - 1))


def simultaneous_triangularize(pair, tol=PENCIL_TOL, strict=True):
    """Unitaries U, V with TA = U A V^dag and TB = U B V^dag both upper triangular.

    Requires the pencil A - xB to have full degree (det(B) away from zero
    at scale tol * ||B||_F^d).  U comes from the ordered Schur basis of
    A B^-1 and V from the ordered Schur basis of B^-1 A with a shared
    eigenvalue ordering; when the two frames misalign beyond budget, V is
    recomputed from the triangular-times-unitary factorization of U B.
    After triangularization a diagonal phase gauge makes the diagonal and
    first superdiagonal of TA real non-negative.

    Returns (U, V, TA, TB) as (UnitaryMatrix, UnitaryMatrix, ndarray, ndarray).
    """
    a, b, d = pair.a, pair.b, pair.d
    if not _pencil_full_degree(b, tol):
        raise DegeneratePencil(
            f"det(B) = {np.linalg.det(b):.3e} too small: pencil degree below d = {d}")
    scale = max(np.abs(a).max(), np.abs(b).max())
    binv = np.linalg.inv(b)
    qm, tm = sorted_schur(a @ binv)
    qn, tn = sorted_schur(binv @ a)
    roots = np.diag(tm)
    if _coincident_roots(roots, ROOT_GROUP_TOL):
        if strict:
            raise DegeneratePencil("coincident pencil roots within grouping tolerance")
        # lenient mode: keep the deterministic sorted order and push on
    u = qm.conj().T
    v = qn.conj().T
    ta = u @ a @ v.conj().T
    tb = u @ b @ v.conj().T
    budget = tol * scale
    if max(_below_diag_max(ta), _below_diag_max(tb)) > 0.25 * budget:
        # realign V with U through U B = TB V, which needs no second flag
        tb_rq, v_rq = la.rq(u @ b)
        v = v_rq
        ta = u @ a @ v.conj().T
        tb = tb_rq
    if max(_below_diag_max(ta), _below_diag_max(tb)) > budget:
        raise DegeneratePencil(
            "triangularization residual above tolerance; pencil roots too clustered")
    u, v, ta, tb, _ = _apply_reality_gauge(u, v, ta, tb, tol)
    return UnitaryMatrix(u), UnitaryMatrix(v), ta, tb


def _below_diag_max(t):
    d = t.shape[0]
    if d < 2:
        return 0.0
    return float(np.abs(np.tril(t, -1)).max())


def _unitary_sending_to_e1(vec):
    """Unitary W with W vec = ||vec|| e1, built from one Householder reflector."""
    v = np.asarray(vec, dtype=np.complex128)
    n = v.size
    nrm = np.linalg.norm(v)
    u = v / nrm
    e1 = np.zeros(n, dtype=np.complex128)
    e1[0] = 1.0
    ph = u[0] / abs(u[0]) if abs(u[0]) > 0 else 1.0
    w = u + ph * e1
    h = np.eye(n, dtype=np.complex128) - 2.0 * np.outer(w, w.conj()) / np.vdot(w, w).real
    # h sends u to -ph*e1; a diagonal phase finishes the job
    d = np.ones(n, dtype=np.complex128)
    d[0] = -np.conj(ph)
    return d[:, None] * h


def triangularize_by_deflation(pair, tol=PENCIL_TOL):
    """Reference triangularization by recursive root deflation.

    At each level one pencil root x1 (smallest under the (Re, Im) order)
    is found, a kernel vector v of A - x1 B is rotated to e1 on the right
    and B v to e1 on the left, and the procedure recurses on the trailing
    (d-1) x (d-1) block.  Slower and less stable than the Schur route; kept
    as an independent cross-check of the pencil spectrum and the form.
    """
    a, b, d = pair.a, pair.b, pair.d
    if not _pencil_full_degree(b, tol):
        raise DegeneratePencil(
            f"det(B) = {np.linalg.det(b):.3e} too small: pencil degree below d = {d}")
    u, v = _deflate(a, b)
    ta = u @ a @ v.conj().T
    tb = u @ b @ v.conj().T
    u, v, ta, tb, _ = _apply_reality_gauge(u, v, ta, tb, tol)
    return UnitaryMatrix(u), UnitaryMatrix(v), ta, tb


def _deflate(a, b):
    d = a.shape[0]
    if d == 1:
        one = np.ones((1, 1), dtype=np.complex128)
        return one, one
    roots = la.eig(a, b, right=False)
    roots = sorted(roots, key=lambda z: (z.real, z.imag))
    x1 = roots[0]
    # kernel vector of A - x1 B: smallest right singular vector
    _, _, vh = np.linalg.svd(a - x1 * b)
    vker = vh[-1].conj()
    w = b @ vker
    v1 = _unitary_sending_to_e1(vker)
    w1 = _unitary_sending_to_e1(w)
    a1 = w1 @ a @ v1.conj().T
    b1 = w1 @ b @ v1.conj().T
    u2, v2 = _deflate(a1[1:, 1:], b1[1:, 1:])
    u = np.eye(d, dtype=np.complex128)
    v = np.eye(d, dtype=np.complex128)
    u[1:, 1:] = u2
    v[1:, 1:] = v2
    return u @ w1, v @ v1


def pencil_roots(pair, tol=PENCIL_TOL):
    """Generalized eigenvalues of (A, B) sorted by (Re, Im)."""
    if not _pencil_full_degree(pair.b, tol):
        raise DegeneratePencil("pencil degree below d")
    roots = la.eig(pair.a, pair.b, right=False)
    return np.array(sorted(roots, key=lambda z: (z.real, z.imag)))


@dataclass(frozen=True, eq=False)
class TriangularState:
    """A (2, d, d) state whose matrix image is upper triangular with the real pattern.

    The expansion coefficients come in 2-vectors psi_ij = (A[i, j], B[i, j])
    for i <= j; everything below the diagonal vanishes.
    """

    state: PureState
    zero_tol: float = TRIANGULAR_TOL

    def __post_init__(self):
        pair = state_to_pair(self.state)
        scale = max(1.0, float(np.linalg.norm(self.state.amplitudes)))
        lo = max(_below_diag_max(pair.a), _below_diag_max(pair.b))
        if lo > self.zero_tol * scale:
            raise NotTriangular(f"below-diagonal magnitude {lo:.3e} exceeds {self.zero_tol}")
        d = pair.d
        imag = 0.0
        for i in range(d):
            imag = max(imag, abs(pair.a[i, i].imag))
            if i + 1 < d:
                imag = max(imag, abs(pair.a[i, i + 1].imag))
        if imag > self.zero_tol * scale:
            raise NotTriangular(f"real-pattern imaginary part {imag:.3e} exceeds {self.zero_tol}")

    @property
    def d(self):
        return self.state.shape.dims[1]

    def pair(self):
        return state_to_pair(self.state)

    def block(self, i, j):
        """2-vector (A[i, j], B[i, j]) of the expansion, 0-based indices."""
        tens = self.state.tensor()
        return np.array([tens[0, i, j], tens[1, i, j]])

    def blocks(self):
        """Array of shape (d, d, 2) holding every expansion 2-vector."""
        tens = self.state.tensor()
        return np.stack([tens[0], tens[1]], axis=-1)


def is_regular_triangular(phi, tol=1e-8):
    """Regularity predicate for a triangular state.

    True iff every 2-vector block psi_ij (i <= j) is nonzero beyond tol and
    no block is collinear with a diagonal block psi_kk except trivially;
    collinearity is decided by the smallest singular value of the 2x2
    matrix [psi_ij, psi_kk].
    """
    d = phi.d
    blk = phi.blocks()
    for i in range(d):
        for j in range(i, d):
            if np.linalg.norm(blk[i, j]) <= tol:
                return False
    for i in range(d):
        for j in range(i, d):
            for k in range(d):
                if i == j == k:
                    continue
                pairmat = np.stack([blk[i, j], blk[k, k]], axis=1)
                if np.linalg.svd(pairmat, compute_uv=False)[-1] <= tol:
                    return False
    return True


def triangular_form(psi, tol=PENCIL_TOL, strict=True):
    """Canonical triangular representative of a (2, d, d) state.

    Returns (phi, U, V) where phi = (I2 x U x V) psi passes the
    TriangularState checks; U and V act on the second and third subsystems
    in the state picture.  The pencil roots are ordered by (Re, Im), which
    fixes the representative.
    """
    pair = state_to_pair(psi)
    u_pair, v_pair, _, _ = simultaneous_triangularize(pair, tol=tol, strict=strict)
    u_state = u_pair
    v_state = UnitaryMatrix(v_pair.matrix.conj())
    rotated = apply_local_unitary(apply_local_unitary(psi, u_state, 1), v_state, 2)
    return TriangularState(rotated), u_state, v_state


def project_out_last_level(phi):
    """Drop the highest level of the third party and renormalize.

    For an upper-triangular state this removes the last row and column of
    both pair matrices and yields a triangular state one size down; for a
    regular input the result is again regular.
    """
    pair = phi.pair()
    d = pair.d
    if d < 2:
        raise DomainError("cannot compress a d = 1 triangular state")
    a = pair.a[:d - 1, :d - 1]
    b = pair.b[:d - 1, :d - 1]
    amps = np.stack([a, b]).reshape(-1)
    weight = np.linalg.norm(amps)
    if weight == 0.0:
        raise NotRegularTriangular("compressed state vanishes")
    small = PureState(SystemShape((2, d - 1, d - 1)), amps / weight)
    return TriangularState(small), float(weight ** 2)
