"""End-to-end experiment pipeline and report generation.

One experiment draws Haar-random N-qudit states, measures the two
contiguous-block subsets with complete product bases (exactly or with
shot noise), estimates the reduced operators by linear inversion with PSD
repair, reconstructs each state, and writes a JSON report, a delimited
per-trial table, and rendered figures.  Identical configurations produce
bitwise-identical report files.
"""

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import SystemShape, fidelity_pure, haar_random_state, partial_trace
from .errors import DomainError
from .measure import (
    EXACT,
    deduplicated_measurement_count,
    measurement_count,
    rdm_from_expectations,
    simulate_expectations,
)
from .reconstruct import (
    RdmPair,
    ReconstructOptions,
    bipartition_split,
    reconstruct_2dd,
    reconstruct_pdd,
)

NOISE_MODELS = ("none", "shot")


@dataclass(frozen=True)
class ExperimentConfig:
    qudits: int
    qudit_dim: int
    seed: int
    shots: object = EXACT            # positive int, or EXACT
    noise_model: str = "none"        # "none" forces exact expectations
    strategy: str = "PENCIL"
    trials: int = 1
    tolerances: dict = field(default_factory=dict)
    output_dir: str = "experiment_out"
    figures: bool = True

    def __post_init__(self):
        if self.qudits < 3:
            raise DomainError(f"need at least 3 qudits, got {self.qudits}")
        if self.qudit_dim < 2:
            raise DomainError(f"qudit dimension must be >= 2, got {self.qudit_dim}")
        if self.noise_model not in NOISE_MODELS:
            raise DomainError(f"noise_model must be one of {NOISE_MODELS}")
        if self.shots != EXACT and (not isinstance(self.shots, int) or self.shots < 1):
            raise DomainError(f"shots must be a positive integer or {EXACT!r}")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise DomainError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self):
        out = dataclasses.asdict(self)
        return out


def _subsets(n, d):
    na, nb, nc = bipartition_split(n, d)
    ab = tuple(range(na + nb))
    ac = tuple(range(na)) + tuple(range(n - nc, n))
    return ab, ac


def measurement_summary(n, d):
    """Measurement accounting block of the report (counts product observables)."""
    na, nb, nc = bipartition_split(n, d)
    body = (n + 2) // 2
    count = measurement_count(n, d)
    return {
        "unit": "product-basis observables; overlap on party A measured twice",
        "rdm_body_size": body,
        "per_subset": d ** (2 * body),
        "count": count,
        "deduplicated": deduplicated_measurement_count(n, d),
        "full_tomography": d ** (2 * n),
        "ratio_to_state_dim": count / d ** n,
    }


def _reconstruct_options(config):
    fields = {f.name for f in dataclasses.fields(ReconstructOptions)}
    unknown = set(config.tolerances) - fields
    if unknown:
        raise DomainError(f"unknown tolerance fields: {sorted(unknown)}")
    opts = ReconstructOptions(strategy=config.strategy, **config.tolerances)
    return opts


def run_trial(config, trial):
    """One generate/measure/estimate/reconstruct cycle; returns the trial row."""
    n, d = config.qudits, config.qudit_dim
    state_seed = int(np.random.SeedSequence((config.seed, trial)).generate_state(1)[0])
    psi = haar_random_state((d,) * n, state_seed)
    ab, ac = _subsets(n, d)
    exact = config.noise_model == "none" or config.shots == EXACT
    shots = EXACT if exact else config.shots
    recs_ab = simulate_expectations(psi, ab, shots, seed=state_seed + 1)
    recs_ac = simulate_expectations(psi, ac, shots, seed=state_seed + 2)
    rho_ab = rdm_from_expectations(recs_ab, d, repair=not exact)
    rho_ac = rdm_from_expectations(recs_ac, d, repair=not exact)
    na, nb, nc = bipartition_split(n, d)
    shape = (d ** na, d ** nb, d ** nc)
    if exact:
        pair = RdmPair.from_matrices(shape, rho_ab.matrix, rho_ac.matrix,
                                     trace=1.0, consistency_tol=1e-9)
    else:
        pair = RdmPair.repaired(shape, rho_ab.matrix, rho_ac.matrix, trace=1.0)
    opts = dataclasses.replace(
        _reconstruct_options(config),
        truth=psi, seed=state_seed)
    if shape[0] == 2:
        psi_hat, report = reconstruct_2dd(pair, opts)
    else:
        psi_hat, report = reconstruct_pdd(pair, opts)
    ideal = psi.density()
    ideal_ab = partial_trace(ideal, ab).matrix
    ideal_ac = partial_trace(ideal, ac).matrix
    spectra = {
        "estimated_ab": sorted(np.linalg.eigvalsh(rho_ab.matrix).tolist(), reverse=True),
        "estimated_ac": sorted(np.linalg.eigvalsh(rho_ac.matrix).tolist(), reverse=True),
        "ideal_ab": sorted(np.linalg.eigvalsh(ideal_ab).tolist(), reverse=True),
        "ideal_ac": sorted(np.linalg.eigvalsh(ideal_ac).tolist(), reverse=True),
    }
    row = {
        "trial": trial,
        "state_seed": state_seed,
        "records_consumed": len(recs_ab) + len(recs_ac),
        "fidelity_vs_truth": report.fidelity_vs_truth,
        "rdm_residual": report.rdm_residual,
        "strategy": report.strategy,
        "uniqueness_flag": report.uniqueness_flag,
        "marginal_mismatch": pair.marginal_mismatch(),
    }
    return row, spectra


def run_experiment(config, out_dir=None):
    """Run all trials, write report.json / trials.csv / figures, return the report."""
    out_dir = Path(out_dir if out_dir is not None else config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    spectra = None
    for trial in range(config.trials):
        row, spectra = run_trial(config, trial)
        rows.append(row)
    fids = [r["fidelity_vs_truth"] for r in rows]
    report = {
        "config": config.to_dict(),
        "bipartition": dict(zip(("na", "nb", "nc"), bipartition_split(config.qudits,
                                                                      config.qudit_dim))),
        "measurements": measurement_summary(config.qudits, config.qudit_dim),
        "trials": rows,
        "summary": {
            "median_fidelity": float(np.median(fids)),
            "min_fidelity": float(np.min(fids)),
            "median_residual": float(np.median([r["rdm_residual"] for r in rows])),
        },
        "last_trial_spectra": spectra,
    }
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    csv_path = out_dir / "trials.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    written = [report_path, csv_path]
    if config.figures:
        from .figures import render_experiment_figures
        written += render_experiment_figures(report, out_dir)
    return report, written
