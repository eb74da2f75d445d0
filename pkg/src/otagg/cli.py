"""Command-line surface for solving, aggregating, indexing, and evaluating.

stdout carries machine-readable JSON (or output paths) only; diagnostics go
to stderr. Exit codes: 0 success, 2 bad input or format, 3 degenerate
computation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import aggregator, ot_core, retrieval, synth, tensor_io
from .errors import ConfigError, DegenerateError, DimensionError, FormatError
from .ot_core import LogMarginals, SolverConfig

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3


def _emit(doc: dict) -> None:
    print(json.dumps(doc))


def _load_marginals(a_path: str, b_path: str) -> LogMarginals:
    return LogMarginals(tensor_io.load_tensor(a_path).astype(np.float64),
                        tensor_io.load_tensor(b_path).astype(np.float64))


def _load_matrix(path: str) -> np.ndarray:
    m = tensor_io.load_tensor(path)
    if m.ndim != 2:
        raise DimensionError(f"{path} must hold a 2-D matrix, got shape {m.shape}")
    return m.astype(np.float64)


def cmd_solve(args: argparse.Namespace) -> int:
    m = _load_matrix(args.scores)
    marginals = _load_marginals(args.log_a, args.log_b)
    cfg = SolverConfig(tau=args.tau, iters=args.iters)
    if args.baseline:
        plan = ot_core.sinkhorn_baseline(m, marginals, cfg)
    else:
        plan = ot_core.asymmetric_transport(m, marginals, cfg)
    tensor_io.save_tensor(plan, args.out)
    res = ot_core.marginal_residuals(plan, marginals)
    _emit({"row_linf": res.row_linf, "col_linf": res.col_linf})
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    m = _load_matrix(args.scores)
    marginals = _load_marginals(args.log_a, args.log_b)
    plan_asym = ot_core.asymmetric_transport(
        m, marginals, SolverConfig(tau=args.tau, iters=args.iters))
    plan_base = ot_core.sinkhorn_baseline(
        m, marginals, SolverConfig(tau=args.tau, iters=args.baseline_iters))
    res_a = ot_core.marginal_residuals(plan_asym, marginals)
    res_b = ot_core.marginal_residuals(plan_base, marginals)
    comparison = {
        "asymmetric": {
            "row_linf": res_a.row_linf,
            "col_linf": res_a.col_linf,
            "entropy": ot_core.plan_entropy(plan_asym),
        },
        "baseline": {
            "row_linf": res_b.row_linf,
            "col_linf": res_b.col_linf,
            "entropy": ot_core.plan_entropy(plan_base),
        },
        "max_plan_diff": float(np.max(np.abs(np.exp(plan_asym) - np.exp(plan_base)))),
    }
    if args.report_dir:
        from . import reporting

        reporting.write_compare_report(comparison, plan_asym, plan_base, args.report_dir)
    _emit(comparison)
    return EXIT_OK


def _apply_overrides(cfg: aggregator.PipelineConfig,
                     args: argparse.Namespace) -> aggregator.PipelineConfig:
    if getattr(args, "no_gc", False):
        cfg = aggregator.disable_geometry(cfg)
    if getattr(args, "no_asym", False):
        cfg = aggregator.disable_asymmetric(cfg)
    return cfg


def cmd_aggregate(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(aggregator.PipelineConfig.load(args.config), args)
    params = tensor_io.load_params(args.params)
    fm = aggregator.FeatureMap(tensor_io.load_tensor(args.features),
                               tensor_io.load_tensor(args.token))
    descriptor = aggregator.run_pipeline(fm, params, cfg)
    tensor_io.save_tensor(descriptor, args.out)
    print(args.out)
    return EXIT_OK


def _feature_pairs(directory: Path) -> list[tuple[str, Path, Path]]:
    pairs = []
    for feat in sorted(directory.glob("*.features.ftx")):
        stem = feat.name[: -len(".features.ftx")]
        token = directory / f"{stem}.token.ftx"
        if not token.exists():
            raise FormatError(f"missing token file for {feat.name}")
        pairs.append((stem, feat, token))
    if not pairs:
        raise FormatError(f"no *.features.ftx files in {directory}")
    return pairs


def cmd_aggregate_batch(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(aggregator.PipelineConfig.load(args.config), args)
    params = tensor_io.load_params(args.params)
    records = []
    for stem, feat_path, token_path in _feature_pairs(Path(args.features_dir)):
        fm = aggregator.FeatureMap(tensor_io.load_tensor(feat_path),
                                   tensor_io.load_tensor(token_path))
        descriptor = aggregator.run_pipeline(fm, params, cfg)
        records.append(tensor_io.DescriptorRecord(stem, descriptor.astype(np.float32)))
    tensor_io.save_descriptor_db(records, args.out)
    print(args.out)
    return EXIT_OK


def cmd_index(args: argparse.Namespace) -> int:
    index = retrieval.build_index(tensor_io.load_descriptor_db(args.db))
    _emit({"count": index.count, "dim": index.dim})
    return EXIT_OK


def cmd_retrieve(args: argparse.Namespace) -> int:
    index = retrieval.build_index(tensor_io.load_descriptor_db(args.db))
    queries = tensor_io.load_descriptor_db(args.queries)
    results = []
    for rec in queries:
        ranked = retrieval.search(index, rec.descriptor, args.k)
        results.append({
            "id": rec.id,
            "neighbors": [{"id": rid, "distance": dist} for rid, dist in ranked],
        })
    _emit({"k": args.k, "results": results})
    return EXIT_OK


def _parse_ks(text: str) -> list[int]:
    try:
        ks = [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise ConfigError(f"bad cutoff list {text!r}; expected e.g. 1,5,10") from exc
    if not ks:
        raise ConfigError(f"bad cutoff list {text!r}; expected e.g. 1,5,10")
    return ks


def cmd_eval(args: argparse.Namespace) -> int:
    index = retrieval.build_index(tensor_io.load_descriptor_db(args.db))
    queries = [(rec.id, rec.descriptor)
               for rec in tensor_io.load_descriptor_db(args.queries)]
    gt = tensor_io.read_ground_truth(args.gt)
    report = retrieval.recall_at_k(index, queries, gt, _parse_ks(args.k))
    if args.report_dir:
        from . import reporting

        reporting.write_recall_report(report, args.report_dir)
    _emit(report.to_json_dict())
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    spec = synth.SynthSpec(seed=args.seed, n_places=args.places,
                           views_per_place=args.views, h=args.height, w=args.width,
                           d=args.dim, noise_sigma=args.sigma,
                           cluster_structure=args.prototypes)
    if args.config:
        cfg = aggregator.PipelineConfig.load(args.config)
    else:
        cfg = aggregator.PipelineConfig()

    out_dir = Path(args.out_dir)
    db_dir = out_dir / "database"
    query_dir = out_dir / "queries"
    db_dir.mkdir(parents=True, exist_ok=True)
    query_dir.mkdir(parents=True, exist_ok=True)

    dataset = synth.gen_dataset(spec)
    for directory, entries in ((db_dir, dataset.database), (query_dir, dataset.queries)):
        for entry_id, fm in entries:
            tensor_io.save_tensor(fm.local, directory / f"{entry_id}.features.ftx")
            tensor_io.save_tensor(fm.global_token, directory / f"{entry_id}.token.ftx")

    params = synth.gen_params(spec.seed, cfg, feature_dim=spec.d)
    tensor_io.save_params(params, out_dir / "params.ftp")
    cfg.save(out_dir / "config.json")
    tensor_io.write_ground_truth(dataset.gt, out_dir / "gt.json")

    manifest = {
        "spec": {
            "seed": spec.seed, "n_places": spec.n_places,
            "views_per_place": spec.views_per_place, "h": spec.h, "w": spec.w,
            "d": spec.d, "noise_sigma": spec.noise_sigma,
            "cluster_structure": spec.cluster_structure,
        },
        "database_ids": [entry_id for entry_id, _ in dataset.database],
        "query_ids": [entry_id for entry_id, _ in dataset.queries],
        "files": ["config.json", "params.ftp", "gt.json", "manifest.json",
                  "database/", "queries/"],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                           encoding="utf-8")
    _emit({"out_dir": str(out_dir), "database": len(dataset.database),
           "queries": len(dataset.queries)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otagg",
        description="Transport-based descriptor aggregation and exact retrieval "
                    "evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run a transport solver on a score matrix")
    p.add_argument("scores", help="FTX file with the 2-D log-affinity matrix")
    p.add_argument("log_a", help="FTX file with the log source marginal (rows)")
    p.add_argument("log_b", help="FTX file with the log target marginal (columns)")
    p.add_argument("--out", default="plan.ftx", help="where to write the log plan")
    p.add_argument("--tau", type=float, default=1.0, help="temperature")
    p.add_argument("--iters", type=int, default=3, help="normalization iterations")
    p.add_argument("--baseline", action="store_true",
                   help="use alternating Sinkhorn scaling instead of the "
                        "averaged+calibrated solver")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="contrast both solvers on one instance")
    p.add_argument("scores")
    p.add_argument("log_a")
    p.add_argument("log_b")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=3,
                   help="iterations for the averaged solver")
    p.add_argument("--baseline-iters", type=int, default=200,
                   help="iterations for the alternating baseline")
    p.add_argument("--report-dir", help="also write CSV and figures here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("aggregate", help="turn one feature map into a descriptor")
    p.add_argument("features", help="FTX file with (d, H, W) local features")
    p.add_argument("token", help="FTX file with the (d,) global token")
    p.add_argument("params", help="FTP parameter bundle")
    p.add_argument("config", help="pipeline config JSON")
    p.add_argument("--out", default="descriptor.ftx")
    p.add_argument("--no-gc", action="store_true",
                   help="disable the geometric score term")
    p.add_argument("--no-asym", action="store_true",
                   help="use the alternating baseline solver")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("aggregate-batch",
                       help="aggregate every *.features.ftx in a directory into "
                            "a descriptor DB")
    p.add_argument("features_dir")
    p.add_argument("params")
    p.add_argument("config")
    p.add_argument("--out", default="descriptors.adb")
    p.add_argument("--no-gc", action="store_true")
    p.add_argument("--no-asym", action="store_true")
    p.set_defaults(func=cmd_aggregate_batch)

    p = sub.add_parser("index", help="validate a descriptor DB and print stats")
    p.add_argument("db")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("retrieve", help="top-k neighbors for every query descriptor")
    p.add_argument("db")
    p.add_argument("queries")
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("eval", help="Recall@K against explicit ground truth")
    p.add_argument("db")
    p.add_argument("queries")
    p.add_argument("gt")
    p.add_argument("--k", default="1,5,10", help="comma-separated cutoffs")
    p.add_argument("--report-dir", help="also write CSV and figures here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="generate a seeded synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--places", type=int, default=20)
    p.add_argument("--views", type=int, default=3)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--height", type=int, default=8)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--prototypes", type=int, default=8)
    p.add_argument("--config", help="pipeline config JSON to copy into the dataset")
    p.set_defaults(func=cmd_gen)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DegenerateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (FormatError, ConfigError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
