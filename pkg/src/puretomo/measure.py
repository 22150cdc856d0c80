"""Local-measurement simulation and linear-inversion estimation.

Observables are the generalized Gell-Mann family per site (identity plus
symmetric, antisymmetric, and diagonal traceless matrices), which is
trace-orthogonal, so estimating a reduced operator is a diagonal rescale
of measured expectation values.  Shot noise follows the Born distribution
of each product observable exactly, sampled as a multinomial over its
eigenbasis.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .core import (
    DensityOperator,
    SystemShape,
    kron,
    partial_trace,
    repair_density,
    rng_from,
)
from .errors import DomainError, IncompleteBasis

EXACT = "exact"


@dataclass(frozen=True, eq=False)
class ObservableBasis:
    """Trace-orthogonal Hermitian basis of d x d matrices, identity first."""

    d: int
    operators: tuple

    def norms(self):
        """Tr(O_i^2) for each element (d for the identity, 2 otherwise)."""
        return np.array([float(np.trace(op @ op).real) for op in self.operators])


def observable_basis(d):
    """Generalized Gell-Mann basis of Hermitian d x d matrices.

    Ordering: identity, then for each index pair j < k the symmetric and
    antisymmetric elements, then the diagonal family.  For d = 2 this is
    exactly (I, X, Y, Z).
    """
    if d < 2:
        raise DomainError(f"site dimension must be >= 2, got {d}")
    ops = [np.eye(d, dtype=np.complex128)]
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=np.complex128)
            sym[j, k] = sym[k, j] = 1.0
            ops.append(sym)
            asym = np.zeros((d, d), dtype=np.complex128)
            asym[j, k] = -1.0j
            asym[k, j] = 1.0j
            ops.append(asym)
    for level in range(1, d):
        diag = np.zeros((d, d), dtype=np.complex128)
        for m in range(level):
            diag[m, m] = 1.0
        diag[level, level] = -level
        ops.append(diag * np.sqrt(2.0 / (level * (level + 1))))
    for op in ops:
        op.setflags(write=False)
    return ObservableBasis(d=d, operators=tuple(ops))


def measurement_count(n, d):
    """Number of product-basis observables for the two-RDM scheme: 2 * d^(2*ceil((N+1)/2))."""
    if n < 3:
        raise DomainError(f"need at least 3 qudits, got {n}")
    if d < 2:
        raise DomainError(f"qudit dimension must be >= 2, got {d}")
    body = (n + 2) // 2          # = ceil((N+1)/2)
    return 2 * d ** (2 * body)


def deduplicated_measurement_count(n, d):
    """Same count with the doubly-measured A-only observables removed."""
    na, _, _ = (n - 2 * ((n - 1) // 2), (n - 1) // 2, (n - 1) // 2)
    return measurement_count(n, d) - d ** (2 * na)


@dataclass(frozen=True)
class ExpectationRecord:
    """One measured product observable on a subset of qudits."""

    subset: tuple              # qudit indices, ascending
    operator_index: tuple      # per-site index into the observable basis
    value: float
    shots: object              # positive int, or EXACT
    seed: int

    def __post_init__(self):
        if self.shots != EXACT and (not isinstance(self.shots, int) or self.shots < 1):
            raise DomainError(f"shots must be a positive integer or EXACT, got {self.shots!r}")


def _product_operator(basis, index):
    op = basis.operators[index[0]]
    for i in index[1:]:
        op = kron(op, basis.operators[i])
    return op


def simulate_expectations(psi, subset, shots, seed):
    """Expectation records for the complete product basis on `subset`.

    EXACT mode evaluates Tr(rho_subset O); shot mode draws the stated
    number of samples from the Born distribution of each observable, with
    one independent stream per record derived from (seed, subset, index).
    Records are ordered canonically by the per-site multi-index.
    """
    subset = tuple(sorted(int(i) for i in subset))
    dims = psi.shape.dims
    for i in subset:
        if i < 0 or i >= len(dims):
            raise IndexError(f"subset index {i} out of range for {len(dims)} subsystems")
    d = dims[subset[0]]
    if any(dims[i] != d for i in subset):
        raise DomainError("subset sites must share one dimension")
    rho = partial_trace(psi.density(), subset).matrix
    basis = observable_basis(d)
    records = []
    for linear, index in enumerate(itertools.product(range(d * d), repeat=len(subset))):
        op = _product_operator(basis, index)
        if shots == EXACT:
            value = float(np.trace(rho @ op).real)
        else:
            evals, evecs = np.linalg.eigh(op)
            probs = np.einsum("ij,jk,ki->i", evecs.conj().T, rho, evecs).real
            probs = np.clip(probs, 0.0, None)
            probs /= probs.sum()
            rng = rng_from(seed, *subset, linear)
            counts = rng.multinomial(shots, probs)
            value = float(counts @ evals / shots)
        records.append(ExpectationRecord(
            subset=subset, operator_index=tuple(index), value=value, shots=shots, seed=seed))
    return records


def linear_inversion(records, d):
    """Raw basis-expansion estimate sum_i value_i O_i / Tr(O_i^2), unrepaired."""
    if not records:
        raise IncompleteBasis("no records supplied")
    k = len(records[0].subset)
    expected = {idx for idx in itertools.product(range(d * d), repeat=k)}
    seen = {rec.operator_index for rec in records}
    if seen != expected:
        raise IncompleteBasis(
            f"records cover {len(seen)} of {len(expected)} product-basis observables")
    basis = observable_basis(d)
    norms = basis.norms()
    n = d ** k
    est = np.zeros((n, n), dtype=np.complex128)
    for rec in records:
        op = _product_operator(basis, rec.operator_index)
        weight = float(np.prod([norms[i] for i in rec.operator_index]))
        est += rec.value * op / weight
    return est


def rdm_from_expectations(records, d, repair=True):
    """Reduced-operator estimate from a complete record set.

    Linear inversion followed by the PSD repair (Hermitize, clip, trace
    renormalize) unless `repair=False`.
    """
    est = linear_inversion(records, d)
    k = len(records[0].subset)
    if repair:
        est = repair_density(est, trace=1.0)
    return DensityOperator(SystemShape((d,) * k), est, trace=float(np.trace(est).real))
