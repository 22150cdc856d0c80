"""Command-line interface.

Exit codes: 0 success, 2 validation error, 3 numerical failure (degenerate
pencil, non-unique candidate, pivot or convergence failure), 4 I/O error.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import arrayio
from .canonical import pencil_roots, state_to_pair, triangular_form
from .core import DensityOperator, PureState, SystemShape, haar_random_state
from .errors import (
    ConvergenceFailure,
    DegeneratePencil,
    DimensionMismatch,
    DomainError,
    IncompleteBasis,
    InconsistentRdms,
    InvalidOperator,
    ManifestError,
    NonUniqueSuspect,
    NotRegularTriangular,
    NotTriangular,
    PivotFailure,
    RdmMismatch,
    TomographyError,
)
from .experiment import ExperimentConfig, measurement_summary, run_experiment
from .measure import EXACT, measurement_count, rdm_from_expectations, simulate_expectations
from .reconstruct import (
    RdmPair,
    ReconstructOptions,
    bipartition_split,
    rdms_of,
    reconstruct_2dd,
    reconstruct_pdd,
)
from .uniqueness import NoneFound, SearchOptions, Witness, search_alternative

VALIDATION_ERRORS = (
    ManifestError, DomainError, DimensionMismatch, InvalidOperator,
    InconsistentRdms, IncompleteBasis, NotTriangular, NotRegularTriangular,
    RdmMismatch, ValueError, json.JSONDecodeError,
)
NUMERICAL_ERRORS = (DegeneratePencil, NonUniqueSuspect, ConvergenceFailure, PivotFailure)


def _parse_dims(text):
    try:
        dims = tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise DomainError(f"cannot parse dimensions {text!r}") from exc
    return dims


def _parse_indices(text):
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise DomainError(f"cannot parse index list {text!r}") from exc


def _shots_arg(args):
    if args.exact:
        return EXACT
    if args.shots is None:
        raise DomainError("either --shots or --exact is required")
    if args.shots < 1:
        raise DomainError("--shots must be positive")
    return args.shots


def cmd_gen(args):
    dims = _parse_dims(args.dims)
    psi = haar_random_state(dims, args.seed)
    arrayio.save_state(args.output, psi)
    print(f"wrote Haar state of shape {dims} (seed {args.seed}) to {args.output}")
    return 0


def cmd_rdms(args):
    psi = arrayio.load_state(args.state)
    dims = psi.shape.dims
    if args.split:
        groups = tuple(_parse_indices(part) for part in args.split.split("/"))
        if len(groups) != 3:
            raise DomainError("--split must have three '/'-separated groups")
    elif len(dims) == 3:
        groups = ((0,), (1,), (2,))
    else:
        na, nb, nc = bipartition_split(len(dims), dims[0])
        groups = (tuple(range(na)), tuple(range(na, na + nb)),
                  tuple(range(na + nb, len(dims))))
    pair = rdms_of(psi, groups)
    ga, gb, gc = groups
    dims_a = [dims[i] for i in ga]
    dims_b = [dims[i] for i in gb]
    dims_c = [dims[i] for i in gc]
    ab = DensityOperator(SystemShape(tuple(dims_a + dims_b)), pair.rho_ab.matrix,
                         trace=pair.rho_ab.trace)
    ac = DensityOperator(SystemShape(tuple(dims_a + dims_c)), pair.rho_ac.matrix,
                         trace=pair.rho_ac.trace)
    arrayio.save_density(args.out_ab, ab, extra={"subset": list(ga + gb)})
    arrayio.save_density(args.out_ac, ac, extra={"subset": list(ga + gc)})
    print(f"wrote exact reduced operators to {args.out_ab} and {args.out_ac}")
    return 0


def cmd_measure(args):
    psi = arrayio.load_state(args.state)
    subset = _parse_indices(args.subset)
    shots = _shots_arg(args)
    records = simulate_expectations(psi, subset, shots, seed=args.seed)
    d = psi.shape.dims[subset[0]]
    arrayio.save_records(args.output, records, qudit_dim=d)
    label = "exact" if shots == EXACT else f"{shots} shots"
    print(f"wrote {len(records)} expectation records ({label}) to {args.output}")
    return 0


def cmd_estimate(args):
    records, d = arrayio.load_records(args.records)
    repair = not args.no_repair and records[0].shots != EXACT
    rho = rdm_from_expectations(records, d, repair=repair)
    arrayio.save_density(args.output, rho, extra={"subset": list(records[0].subset)})
    print(f"wrote estimated reduced operator ({'repaired' if repair else 'raw'}) to {args.output}")
    return 0


def _infer_parties(doc_ab, doc_ac):
    s1 = [int(i) for i in doc_ab.get("subset", [])]
    s2 = [int(i) for i in doc_ac.get("subset", [])]
    if not s1 or not s2:
        raise ManifestError("both operator manifests must carry a 'subset' field")
    shared = [i for i in s1 if i in set(s2)]
    k = len(shared)
    if k == 0 or s1[:k] != shared or s2[:k] != shared:
        raise ManifestError(
            f"subsets {s1} and {s2} must share a common leading party")
    return k


def cmd_reconstruct(args):
    rho_ab, doc_ab = arrayio.load_density(args.rdm_ab)
    rho_ac, doc_ac = arrayio.load_density(args.rdm_ac)
    k = _infer_parties(doc_ab, doc_ac)
    dims_ab = rho_ab.shape.dims
    dims_ac = rho_ac.shape.dims
    p = int(np.prod(dims_ab[:k]))
    if int(np.prod(dims_ac[:k])) != p:
        raise ManifestError("the shared party has inconsistent dimensions")
    db = int(np.prod(dims_ab[k:], initial=1))
    dc = int(np.prod(dims_ac[k:], initial=1))
    shape = (p, db, dc)
    if args.repair:
        pair = RdmPair.repaired(shape, rho_ab.matrix, rho_ac.matrix, trace=1.0)
    else:
        pair = RdmPair.from_matrices(shape, rho_ab.matrix, rho_ac.matrix,
                                     trace=rho_ab.trace, consistency_tol=1e-8)
    opts = ReconstructOptions(strategy=args.strategy, fallback=not args.no_fallback)
    if args.truth:
        truth = arrayio.load_state(args.truth)
        opts = ReconstructOptions(strategy=args.strategy, fallback=not args.no_fallback,
                                  truth=truth)
    if p == 2:
        psi_hat, report = reconstruct_2dd(pair, opts)
    else:
        psi_hat, report = reconstruct_pdd(pair, opts)
    out_dims = tuple(dims_ab[:k]) + tuple(dims_ab[k:]) + tuple(dims_ac[k:])
    psi_out = PureState(SystemShape(out_dims), psi_hat.amplitudes)
    arrayio.save_state(args.output, psi_out)
    if args.report:
        Path(args.report).write_text(
            json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
    print(f"reconstructed state via {report.strategy} "
          f"(residual {report.rdm_residual:.3e}, {report.uniqueness_flag}) -> {args.output}")
    if report.fidelity_vs_truth is not None:
        print(f"fidelity vs truth: {report.fidelity_vs_truth:.12f}")
    return 0


def cmd_canonicalize(args):
    psi = arrayio.load_state(args.state)
    phi, u, v = triangular_form(psi)
    arrayio.save_state(args.output, phi.state)
    roots = pencil_roots(state_to_pair(psi))
    doc = {
        "u_re": u.matrix.real.tolist(), "u_im": u.matrix.imag.tolist(),
        "v_re": v.matrix.real.tolist(), "v_im": v.matrix.imag.tolist(),
        "pencil_roots_re": roots.real.tolist(),
        "pencil_roots_im": roots.imag.tolist(),
        "root_order": "sorted by (Re, Im)",
    }
    if args.unitaries:
        Path(args.unitaries).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote triangular form to {args.output}")
    return 0


def cmd_verify_uda(args):
    psi = arrayio.load_state(args.state)
    opts = SearchOptions(n_starts=args.starts, seed=args.seed)
    split = None
    if len(psi.shape.dims) != 3:
        na, nb, nc = bipartition_split(len(psi.shape.dims), psi.shape.dims[0])
        split = (tuple(range(na)), tuple(range(na, na + nb)),
                 tuple(range(na + nb, len(psi.shape.dims))))
    outcome = search_alternative(psi, split=split, opts=opts)
    if isinstance(outcome, Witness):
        doc = {"verdict": "witness", "separation": outcome.separation,
               "start_seed": outcome.seed, "empirical": True}
        if args.witness:
            arrayio.save_density(args.witness, outcome.rho)
            doc["witness_file"] = Path(args.witness).name
        print(f"witness found: trace distance {outcome.separation:.4f} from the pure projector")
    else:
        doc = {"verdict": "none-found", "n_starts": outcome.n_starts,
               "best_separation": outcome.best_separation, "empirical": True}
        print(f"no alternative found over {outcome.n_starts} starts "
              f"(best separation {outcome.best_separation:.2e}); empirical only")
    if args.output:
        Path(args.output).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_experiment(args):
    doc = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
    overrides = {
        "qudits": args.qudits, "qudit_dim": args.qudit_dim, "seed": args.seed,
        "trials": args.trials, "strategy": args.strategy, "output_dir": args.outdir,
    }
    for key, val in overrides.items():
        if val is not None:
            doc[key] = val
    if args.exact:
        doc["shots"] = EXACT
        doc["noise_model"] = "none"
    elif args.shots is not None:
        doc["shots"] = args.shots
        doc["noise_model"] = "shot"
    if args.no_figures:
        doc["figures"] = False
    if "seed" not in doc:
        raise DomainError("a seed is required (flag --seed or config field)")
    config = ExperimentConfig.from_dict(doc)
    report, written = run_experiment(config)
    print(f"experiment complete: median fidelity {report['summary']['median_fidelity']:.6f} "
          f"over {config.trials} trial(s)")
    for path in written:
        print(f"  wrote {path}")
    return 0


def cmd_dims(args):
    na, nb, nc = bipartition_split(args.qudits, args.qudit_dim)
    doc = {"qudits": args.qudits, "qudit_dim": args.qudit_dim,
           "bipartition": {"na": na, "nb": nb, "nc": nc}}
    doc.update(measurement_summary(args.qudits, args.qudit_dim))
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="puretomo",
        description="Reconstruct multipartite pure states from two reduced density matrices.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a Haar-random pure state to a file")
    p.add_argument("--dims", required=True, help="comma-separated subsystem dimensions")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("rdms", help="exact reduced operators on the two standard subsets")
    p.add_argument("state")
    p.add_argument("--split", help="three '/'-separated groups of subsystem indices")
    p.add_argument("--out-ab", required=True)
    p.add_argument("--out-ac", required=True)
    p.set_defaults(func=cmd_rdms)

    p = sub.add_parser("measure", help="simulate product-basis expectation values")
    p.add_argument("state")
    p.add_argument("--subset", required=True, help="comma-separated qudit indices")
    p.add_argument("--shots", type=int)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("estimate", help="linear-inversion reduced operator from records")
    p.add_argument("records")
    p.add_argument("--no-repair", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("reconstruct", help="reconstruct a pure state from two RDM files")
    p.add_argument("rdm_ab")
    p.add_argument("rdm_ac")
    p.add_argument("--strategy", choices=["PENCIL", "PURIFY"], default="PENCIL")
    p.add_argument("--no-fallback", action="store_true")
    p.add_argument("--repair", action="store_true",
                   help="repair noisy inputs before reconstruction")
    p.add_argument("--truth", help="state file to score fidelity against")
    p.add_argument("--report", help="write the reconstruction report JSON here")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("canonicalize", help="triangular canonical form of a (2,d,d) state")
    p.add_argument("state")
    p.add_argument("--unitaries", help="write the rotations and pencil roots JSON here")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_canonicalize)

    p = sub.add_parser("verify-uda", help="search for an operator sharing the state's RDMs")
    p.add_argument("state")
    p.add_argument("--starts", type=int, default=50)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--witness", help="write a found witness operator here")
    p.add_argument("-o", "--output", help="write the verdict JSON here")
    p.set_defaults(func=cmd_verify_uda)

    p = sub.add_parser("experiment", help="full generate/measure/estimate/reconstruct pipeline")
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--qudits", type=int)
    p.add_argument("--qudit-dim", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--trials", type=int)
    p.add_argument("--strategy", choices=["PENCIL", "PURIFY"])
    p.add_argument("--outdir")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("dims", help="print the bipartition and measurement counts")
    p.add_argument("--qudits", type=int, required=True)
    p.add_argument("--qudit-dim", type=int, required=True)
    p.set_defaults(func=cmd_dims)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
