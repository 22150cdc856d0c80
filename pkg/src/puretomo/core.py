"""Dense complex linear algebra over multi-qudit Hilbert spaces.

Conventions used throughout the package:

* subsystem indices are 0-based; the ket written |1> in the usual physics
  notation is stored at index 0 (index_paper = index_internal + 1),
* amplitudes are stored row-major with the leftmost subsystem slowest,
* all randomness flows through counter-based Philox streams keyed by an
  explicit integer seed, so identical seeds give bitwise-identical output.

All public types are immutable after construction and safe to share.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    DomainError,
    InvalidOperator,
)

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
UNITARY_TOL = 1e-12


def rng_from(seed, *stream):
    """Counter-based generator for the key (seed, *stream).

    Distinct stream tuples give statistically independent streams, which is
    what batch drivers use to parallelize over trials or records.
    """
    key = (int(seed),) + tuple(int(s) for s in stream)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def _frozen(array, dtype=np.complex128):
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SystemShape:
    """Ordered list of subsystem dimensions."""

    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise DomainError(f"subsystem dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self):
        return int(np.prod(self.dims))

    def __len__(self):
        return len(self.dims)

    def grouped(self, split):
        """Shape after merging subsystems into the three groups of `split`."""
        return SystemShape(tuple(int(np.prod([self.dims[i] for i in grp], initial=1)) for grp in split))


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized complex amplitude vector over a SystemShape.

    `normalized=False` marks intermediate vectors (e.g. images of linear
    maps) that the caller has not renormalized; the norm check is skipped.
    """

    shape: SystemShape
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        amps = _frozen(np.asarray(self.amplitudes).reshape(-1))
        object.__setattr__(self, "amplitudes", amps)
        if amps.size != self.shape.total:
            raise DimensionMismatch(
                f"amplitude vector of length {amps.size} does not fit shape {self.shape.dims}")
        if self.normalized:
            nrm = np.linalg.norm(amps)
            if abs(nrm - 1.0) > NORM_TOL:
                raise InvalidOperator(f"state norm {nrm!r} deviates from 1 beyond {NORM_TOL}")

    def tensor(self):
        """Amplitudes reshaped to one axis per subsystem."""
        return self.amplitudes.reshape(self.shape.dims)

    def density(self):
        """Projector |psi><psi| as a DensityOperator."""
        mat = np.outer(self.amplitudes, self.amplitudes.conj())
        tr = float(np.vdot(self.amplitudes, self.amplitudes).real)
        return DensityOperator(self.shape, mat, trace=tr)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian PSD matrix with a declared trace over a SystemShape."""

    shape: SystemShape
    matrix: np.ndarray
    trace: float = 1.0

    def __post_init__(self):
        mat = _frozen(self.matrix)
        object.__setattr__(self, "matrix", mat)
        n = self.shape.total
        if mat.shape != (n, n):
            raise DimensionMismatch(f"matrix shape {mat.shape} does not fit shape {self.shape.dims}")
        herm = np.abs(mat - mat.conj().T).max()
        if herm > HERMITIAN_TOL:
            raise InvalidOperator(f"Hermiticity deviation {herm:.3e} exceeds {HERMITIAN_TOL}")
        lo = float(np.linalg.eigvalsh((mat + mat.conj().T) / 2.0).min())
        if lo < -PSD_TOL:
            raise InvalidOperator(f"minimum eigenvalue {lo:.3e} below -{PSD_TOL}")
        tr = complex(np.trace(mat))
        if abs(tr - self.trace) > TRACE_TOL:
            raise InvalidOperator(f"trace {tr!r} deviates from declared {self.trace}")

    def tensor(self):
        """Matrix reshaped to (row axes..., column axes...), one per subsystem."""
        return self.matrix.reshape(self.shape.dims + self.shape.dims)


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    """Square matrix verified unitary to UNITARY_TOL."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        object.__setattr__(self, "matrix", mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch(f"unitary must be square, got shape {mat.shape}")
        dev = np.abs(mat @ mat.conj().T - np.eye(mat.shape[0])).max()
        if dev > UNITARY_TOL:
            raise InvalidOperator(f"unitarity deviation {dev:.3e} exceeds {UNITARY_TOL}")

    @property
    def dim(self):
        return self.matrix.shape[0]

    def dagger(self):
        return UnitaryMatrix(self.matrix.conj().T)


def kron(x, y):
    """Tensor (Kronecker) product of two matrices."""
    return np.kron(np.asarray(x, dtype=np.complex128), np.asarray(y, dtype=np.complex128))


def _ptrace_array(mat, dims, keep):
    """Partial trace of a square matrix over all subsystems not in `keep`."""
    dims = tuple(dims)
    n = len(dims)
    keep = sorted(keep)
    if any(k < 0 or k >= n for k in keep):
        raise IndexError(f"keep indices {keep} out of range for {n} subsystems")
    if not keep:
        raise IndexError("keep must name at least one subsystem")
    tens = mat.reshape(dims + dims)
    # einsum: kept row/col axes get distinct labels, traced pairs share one
    row = list(range(n))
    col = [n + i if i in keep else i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    reduced = np.einsum(tens, row + col, out)
    m = int(np.prod([dims[i] for i in keep]))
    return reduced.reshape(m, m), tuple(dims[i] for i in keep)


def partial_trace(rho, keep):
    """Reduced operator of `rho` on the subsystems listed in `keep`.

    The result keeps the original subsystem order; the trace and the
    declared trace carry over unchanged.
    """
    mat, dims = _ptrace_array(rho.matrix, rho.shape.dims, keep)
    return DensityOperator(SystemShape(dims), mat, trace=rho.trace)


def apply_local_unitary(psi, u, site):
    """Apply a unitary to one subsystem of a pure state."""
    umat = u.matrix if isinstance(u, UnitaryMatrix) else np.asarray(u, dtype=np.complex128)
    dims = psi.shape.dims
    if site < 0 or site >= len(dims):
        raise IndexError(f"site {site} out of range for {len(dims)} subsystems")
    if umat.shape != (dims[site], dims[site]):
        raise DimensionMismatch(
            f"unitary of dim {umat.shape[0]} does not match subsystem dim {dims[site]}")
    tens = np.moveaxis(psi.tensor(), site, 0)
    tens = np.tensordot(umat, tens, axes=(1, 0))
    tens = np.moveaxis(tens, 0, site)
    return PureState(psi.shape, tens.reshape(-1), normalized=psi.normalized)


def haar_random_state(shape, seed):
    """Haar-random pure state: a normalized complex Gaussian vector."""
    if not isinstance(shape, SystemShape):
        shape = SystemShape(tuple(shape))
    rng = rng_from(seed)
    vec = rng.standard_normal(shape.total) + 1j * rng.standard_normal(shape.total)
    return PureState(shape, vec / np.linalg.norm(vec))


def haar_random_unitary(dim, seed):
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    rng = rng_from(seed)
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    # fix the gauge so the distribution is exactly Haar
    ph = np.diag(r).copy()
    ph /= np.abs(ph)
    return UnitaryMatrix(q * ph[np.newaxis, :].conj())


def fidelity_pure(psi, phi):
    """Squared overlap |<psi|phi>|^2 of two pure states."""
    if psi.shape.dims != phi.shape.dims:
        raise DimensionMismatch(f"shapes {psi.shape.dims} and {phi.shape.dims} differ")
    return float(abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2)


def trace_distance(a, b):
    """Trace distance (1/2)||a - b||_1 between two Hermitian matrices."""
    amat = a.matrix if isinstance(a, DensityOperator) else np.asarray(a)
    bmat = b.matrix if isinstance(b, DensityOperator) else np.asarray(b)
    diff = amat - bmat
    return float(0.5 * np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2.0)).sum())


def schur_unitary(m):
    """Unitary Schur triangularization Q m Q^dag = T.

    Returns (Q, T) with Q unitary and T upper triangular carrying the
    eigenvalues of m on its diagonal.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got shape {m.shape}")
    try:
        t, z = la.schur(m, output="complex")
    except la.LinAlgError as exc:  # QR iteration exceeded its budget
        raise ConvergenceFailure(f"Schur iteration failed to converge: {exc}") from exc
    return UnitaryMatrix(z.conj().T), t


def _eig_key(z):
    return (z.real, z.imag)


def _swap_adjacent(t, q, k):
    """Swap eigenvalues at diagonal positions k, k+1 of a complex Schur form."""
    a, b, c = t[k, k], t[k, k + 1], t[k + 1, k + 1]
    x = np.array([b, c - a], dtype=np.complex128)
    nx = np.linalg.norm(x)
    if nx <= 1e3 * np.finfo(float).eps * (abs(a) + abs(b) + abs(c) + 1e-300):
        return False  # numerically identical eigenvalues: nothing to order
    x /= nx
    g = np.array([[x[0], -np.conj(x[1])], [x[1], np.conj(x[0])]])
    t[:, k:k + 2] = t[:, k:k + 2] @ g
    t[k:k + 2, :] = g.conj().T @ t[k:k + 2, :]
    t[k + 1, k] = 0.0
    q[:, k:k + 2] = q[:, k:k + 2] @ g
    return True


def sorted_schur(m):
    """Complex Schur form m = Q T Q^dag with diag(T) sorted by (Re, Im).

    The reordering applies backward-stable unitary 2x2 swaps, so the
    residual stays at the level of the unsorted decomposition.
    """
    m = np.asarray(m, dtype=np.complex128)
    try:
        t, q = la.schur(m, output="complex")
    except la.LinAlgError as exc:
        raise ConvergenceFailure(f"Schur iteration failed to converge: {exc}") from exc
    t = t.copy()
    q = q.copy()
    d = t.shape[0]
    for _ in range(d):
        moved = False
        for k in range(d - 1):
            if _eig_key(t[k + 1, k + 1]) < _eig_key(t[k, k]):
                moved |= _swap_adjacent(t, q, k)
        if not moved:
            break
    return q, t


def repair_density(mat, trace=1.0):
    """Project a noisy Hermitian estimate onto the PSD cone at fixed trace.

    Hermitizes, clips negative eigenvalues to zero, and rescales the trace;
    this is the standard repair for linear-inversion estimates.
    """
    mat = np.asarray(mat, dtype=np.complex128)
    herm = (mat + mat.conj().T) / 2.0
    w, v = np.linalg.eigh(herm)
    w = np.clip(w, 0.0, None)
    s = w.sum()
    if s <= 0.0:
        # fullyingested noise: fall back to the maximally mixed operator
        n = herm.shape[0]
        return np.eye(n, dtype=np.complex128) * (trace / n)
    w *= trace / s
    return (v * w) @ v.conj().T


def regroup_state(psi, split):
    """View a multi-subsystem state as three grouped parties.

    `split` is a triple of disjoint index tuples covering every subsystem;
    the amplitudes are permuted so the groups appear in order, then merged.
    """
    dims = psi.shape.dims
    flat = [i for grp in split for i in grp]
    if sorted(flat) != list(range(len(dims))):
        raise IndexError(f"split {split} does not cover subsystems 0..{len(dims) - 1} exactly once")
    tens = np.transpose(psi.tensor(), flat)
    grouped = psi.shape.grouped(split)
    return PureState(grouped, tens.reshape(-1), normalized=psi.normalized)


def fix_global_phase(amps):
    """Rotate so the largest-magnitude amplitude is real positive."""
    idx = int(np.argmax(np.abs(amps)))
    piv = amps[idx]
    if abs(piv) == 0.0:
        return amps
    return amps * (abs(piv) / piv)
