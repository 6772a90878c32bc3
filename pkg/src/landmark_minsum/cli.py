"""Command-line surface: generate / cluster / sweep / baseline / evaluate /
verify / ingest, with JSON artifacts and machine-readable errors.

Exit codes: 0 success, 2 parameter error, 3 data error, 4 sweep failure.
Every artifact embeds the seed, the parameters and the tool version so a
run can be reproduced byte-for-byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .errors import (
    DataError,
    LandmarkMinsumError,
    ParameterError,
    SweepFailure,
)
from .evaluation import (
    balanced_k_median,
    classify_points,
    clustering_distance,
    embed_kmeans_baseline,
    min_sum,
    verify_stability,
    verify_structure,
)
from .generate import (
    Instance,
    InstanceSpec,
    generate,
    load_bundle,
    save_bundle,
)
from .landmark import (
    Clustering,
    StabilityParams,
    assign_remainder,
    build_landmark_table,
    cluster_min_sum,
    landmark_count_for,
    sample_landmarks,
    threshold_from_opt,
)
from .metric import (
    MatrixDistanceSource,
    MetricMatrix,
    QueryLedger,
    check_metric,
    ingest_similarity,
    read_labels_csv,
    read_pair_file,
)
from .sweep import enumerate_thresholds, stop_bound_from, sweep

SEED_ENV_VAR = "LANDMARK_MINSUM_SEED"


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ParameterError(f"{SEED_ENV_VAR} must be an integer, got {env!r}")
    return 0


def _emit(payload: dict, args) -> None:
    indent = None if getattr(args, "format", "json") == "compact" else 2
    text = json.dumps(payload, indent=indent, sort_keys=True)
    out = getattr(args, "output", None)
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _load_matrix(args) -> MetricMatrix:
    path = args.input
    if path is None:
        raise ParameterError("--input is required")
    kind = getattr(args, "input_kind", "auto")
    if kind == "auto":
        with open(path) as fh:
            first = fh.readline().strip()
        kind = "matrix" if first.isdigit() else "pairs"
    if kind == "matrix":
        return MetricMatrix.from_csv(path)
    pairs, _labels = read_pair_file(path)
    return ingest_similarity(pairs, policy=getattr(args, "policy", "min_distance"))


def _stability_from(args, required: bool = False) -> StabilityParams | None:
    if args.alpha is None and args.epsilon is None:
        if required:
            raise ParameterError("need --alpha and --epsilon")
        return None
    if args.alpha is None or args.epsilon is None:
        raise ParameterError("--alpha and --epsilon must be given together")
    return StabilityParams(
        alpha=args.alpha, epsilon=args.epsilon,
        delta=args.delta if args.delta is not None else 0.05,
    )


def _clustering_payload(c: Clustering, params: dict, queries: int) -> dict:
    payload = c.to_dict()
    payload["params"] = params
    payload["queries_issued"] = queries
    return payload


def _load_clustering_json(path) -> Clustering:
    with open(path) as fh:
        data = json.load(fh)
    return Clustering.from_dict(data)


def _clustering_from_labels_file(path, n: int) -> Clustering:
    labels = read_labels_csv(path)
    missing = [i for i in range(n) if i not in labels]
    if missing:
        raise DataError(f"label file misses point {missing[0]}")
    lab_list = [labels[i] for i in range(n)]
    if all(v.lstrip("-").isdigit() for v in lab_list):
        lab_list = [int(v) for v in lab_list]
    return Clustering.from_labels(lab_list, n=n)


def cmd_generate(args) -> dict:
    seed = _resolve_seed(args)
    sizes = tuple(int(s) for s in args.sizes.split(","))
    spec = InstanceSpec(
        sizes=sizes,
        theta=args.theta,
        separation_factor=args.separation_factor,
        bad_fraction=args.bad_fraction,
        embed_dim=args.embed_dim,
        seed=seed,
    )
    inst = generate(spec)
    if args.output is None:
        raise ParameterError("generate needs --output DIRECTORY")
    save_bundle(inst, args.output)
    bundle_dir = args.output
    args.output = None  # bundle owns the path; summary goes to stdout
    return {
        "version": __version__,
        "output": str(bundle_dir),
        "n": inst.n,
        "k": spec.k,
        "seed": seed,
        "spec": spec.to_dict(),
        "stability": inst.stability.to_dict() if inst.stability else None,
    }


def _landmark_setup(args, matrix: MetricMatrix, k: int, seed: int):
    stability = _stability_from(args)
    if args.landmarks is not None:
        n_prime = args.landmarks
    elif stability is not None:
        n_prime = landmark_count_for(stability, k, matrix.n)
    else:
        raise ParameterError("need --landmarks or stability parameters")
    ledger = QueryLedger(budget=args.budget)
    source = MatrixDistanceSource(matrix, ledger)
    landmark_ids = sample_landmarks(matrix.n, n_prime, seed)
    table = build_landmark_table(source, landmark_ids)
    return table, ledger, stability, n_prime


def cmd_cluster(args) -> dict:
    seed = _resolve_seed(args)
    matrix = _load_matrix(args)
    k = args.k
    if k is None:
        raise ParameterError("--k is required")
    table, ledger, stability, n_prime = _landmark_setup(args, matrix, k, seed)
    if args.threshold is not None:
        threshold = args.threshold
    elif args.opt is not None:
        if stability is None:
            raise ParameterError("--opt needs --alpha and --epsilon")
        threshold = threshold_from_opt(
            stability.alpha, stability.epsilon, args.opt, matrix.n
        )
    else:
        raise ParameterError("need --threshold, or --opt with stability params")
    run = cluster_min_sum(table, k, threshold)
    if not args.raw:
        run = assign_remainder(run, table)
    params = {
        "command": "cluster",
        "version": __version__,
        "seed": seed,
        "k": k,
        "landmarks": n_prime,
        "landmark_ids": table.landmark_ids,
        "threshold": threshold,
        "raw": bool(args.raw),
        "stability": stability.to_dict() if stability else None,
    }
    return _clustering_payload(run, params, ledger.queries_issued)


def cmd_sweep(args) -> dict:
    seed = _resolve_seed(args)
    matrix = _load_matrix(args)
    k = args.k
    if k is None:
        raise ParameterError("--k is required")
    table, ledger, stability, n_prime = _landmark_setup(args, matrix, k, seed)
    if args.stop_bound is not None:
        bound = args.stop_bound
    elif stability is not None:
        bound = stop_bound_from(stability, matrix.n)
    else:
        raise ParameterError("need --stop-bound or stability parameters")
    candidates = enumerate_thresholds(
        table, matrix.n, mode=args.mode, gamma=args.gamma
    )
    result = sweep(table, k, candidates, bound)
    payload = result.to_dict()
    payload["params"] = {
        "command": "sweep",
        "version": __version__,
        "seed": seed,
        "k": k,
        "landmarks": n_prime,
        "landmark_ids": table.landmark_ids,
        "stop_bound": bound,
        "mode": args.mode,
        "stability": stability.to_dict() if stability else None,
    }
    payload["queries_issued"] = ledger.queries_issued
    return payload


def cmd_baseline(args) -> dict:
    seed = _resolve_seed(args)
    matrix = _load_matrix(args)
    if args.k is None or args.landmarks is None:
        raise ParameterError("baseline needs --k and --landmarks")
    ledger = QueryLedger(budget=args.budget)
    source = MatrixDistanceSource(matrix, ledger)
    run = embed_kmeans_baseline(
        source, args.landmarks, args.k, seed=seed, max_iters=args.max_iters
    )
    params = {
        "command": "baseline",
        "version": __version__,
        "seed": seed,
        "k": args.k,
        "landmarks": args.landmarks,
        "max_iters": args.max_iters,
    }
    return _clustering_payload(run, params, ledger.queries_issued)


def cmd_evaluate(args) -> dict:
    clustering = _load_clustering_json(args.clustering)
    matrix = _load_matrix(args) if args.input else None
    if args.against:
        other = _load_clustering_json(args.against)
    elif args.labels:
        other = _clustering_from_labels_file(args.labels, clustering.n)
    else:
        raise ParameterError("evaluate needs --against or --labels")
    out: dict = {
        "version": __version__,
        "n": clustering.n,
        "dist_to_target": clustering_distance(clustering, other),
    }
    if matrix is not None:
        out["phi"] = min_sum(clustering, matrix).value
        out["psi"] = balanced_k_median(clustering, matrix).value
    return out


def cmd_verify(args) -> dict:
    path = Path(args.input) if args.input else None
    if path and path.is_dir():
        inst = load_bundle(path)
        matrix, target = inst.matrix, inst.target
        stability = inst.stability
    else:
        matrix = _load_matrix(args)
        if not args.labels:
            raise ParameterError("verify needs a bundle dir or --labels")
        target = _clustering_from_labels_file(args.labels, matrix.n)
        stability = None
    override = _stability_from(args)
    if override is not None:
        stability = override
    if stability is None:
        raise ParameterError(
            "no stability parameters: pass --alpha/--epsilon or use a bundle"
        )
    report = classify_points(matrix, target, stability)
    verify_structure(report, matrix)
    out = report.to_dict()
    out["version"] = __version__
    metric_report = check_metric(
        matrix,
        mode="exhaustive" if matrix.n <= 300 else "sampled",
        seed=_resolve_seed(args),
    )
    out["metric_check"] = {
        "mode": metric_report.mode,
        "triples_checked": metric_report.triples_checked,
        "violations": len(metric_report.violations),
    }
    if args.check_stability:
        verdict = verify_stability(
            matrix, target, max(target.k, 1), stability, cap=args.brute_cap
        )
        out["stability_holds"] = verdict.holds
        if not verdict.holds:
            out["stability_counterexample"] = {
                "clusters": verdict.counterexample.to_dict()["clusters"],
                "value": verdict.counterexample_value,
                "distance": verdict.counterexample_distance,
            }
    return out


def cmd_ingest(args) -> dict:
    pairs, labels = read_pair_file(args.input)
    matrix = ingest_similarity(pairs, policy=args.policy)
    if args.output is None:
        raise ParameterError("ingest needs --output for the matrix CSV")
    matrix.to_csv(args.output)
    matrix_path = args.output
    args.output = None  # matrix owns the path; summary goes to stdout
    payload: dict = {
        "version": __version__,
        "n": matrix.n,
        "output": str(matrix_path),
        "policy": args.policy,
    }
    if args.ids_output:
        with open(args.ids_output, "w") as fh:
            fh.write("point_id,label\n")
            for i, lab in enumerate(labels):
                fh.write(f"{i},{lab}\n")
        payload["ids_output"] = str(args.ids_output)
    return payload


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default: ${SEED_ENV_VAR} or 0)")
    p.add_argument("--output", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=["json", "compact"], default="json")


def _add_matrix_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=False, help="matrix CSV or pair TSV")
    p.add_argument("--input-kind", choices=["auto", "matrix", "pairs"],
                   default="auto")
    p.add_argument("--policy", choices=["min_distance", "max_distance", "mean"],
                   default="min_distance", help="pair symmetrization policy")


def _add_stability(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landmark-minsum",
        description="Landmark-based min-sum clustering under a query budget",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a planted-core instance bundle")
    p.add_argument("--sizes", required=True, help="comma-separated core sizes")
    p.add_argument("--theta", type=float, required=True,
                   help="size*diameter product for the cores")
    p.add_argument("--separation-factor", type=float, default=1.5)
    p.add_argument("--bad-fraction", type=float, default=0.0)
    p.add_argument("--embed-dim", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("cluster", help="run the landmark clustering once")
    _add_matrix_input(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--landmarks", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--opt", type=float, default=None,
                   help="known optimum; threshold becomes alpha*OPT/(40*eps*n)")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--raw", action="store_true",
                   help="skip remainder assignment")
    _add_stability(p)
    _add_common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sweep", help="ascending-threshold sweep (unknown OPT)")
    _add_matrix_input(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--landmarks", type=int, default=None)
    p.add_argument("--stop-bound", type=int, default=None,
                   help="stop once n - b points are clustered")
    p.add_argument("--mode", choices=["exact", "geometric"], default="exact")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--budget", type=int, default=None)
    _add_stability(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("baseline", help="embed-then-k-means comparison run")
    _add_matrix_input(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--landmarks", type=int, default=None,
                   help="embedding dimension = number of queries")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--budget", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="score a clustering against another")
    _add_matrix_input(p)
    p.add_argument("--clustering", required=True, help="clustering JSON")
    p.add_argument("--against", default=None, help="other clustering JSON")
    p.add_argument("--labels", default=None, help="target label CSV")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify", help="structure / stability report")
    _add_matrix_input(p)
    p.add_argument("--labels", default=None, help="target label CSV")
    p.add_argument("--check-stability", action="store_true")
    p.add_argument("--brute-cap", type=int, default=12)
    _add_stability(p)
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ingest", help="similarity TSV -> distance matrix CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--policy", choices=["min_distance", "max_distance", "mean"],
                   default="min_distance")
    p.add_argument("--ids-output", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    return parser


def _error_payload(exc: Exception) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, SweepFailure):
        payload["best_threshold"] = exc.best_threshold
        payload["best_coverage"] = exc.best_coverage
    return payload


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = args.func(args)
    except SweepFailure as exc:
        sys.stderr.write(json.dumps(_error_payload(exc)) + "\n")
        return 4
    except ParameterError as exc:
        sys.stderr.write(json.dumps(_error_payload(exc)) + "\n")
        return 2
    except DataError as exc:
        sys.stderr.write(json.dumps(_error_payload(exc)) + "\n")
        return 3
    except LandmarkMinsumError as exc:
        sys.stderr.write(json.dumps(_error_payload(exc)) + "\n")
        return 3
    _emit(payload, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
