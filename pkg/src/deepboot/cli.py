"""Command-line entry point: ``deepboot {run,lasso-path,arch-sweep,smoke,report}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import metrics, plotting
from .data import SampleBatch

VERB_EXPERIMENT = {"lasso-path": "lasso_path", "arch-sweep": "arch_sweep", "smoke": "concentration_smoke"}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepboot", description="Deep bootstrap sampler experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("run", "lasso-path", "arch-sweep", "smoke"):
        p = sub.add_parser(verb)
        if verb == "run":
            p.add_argument("--experiment", choices=["svm_npl", "lad_gibbs"], default=None,
                           help="preset to start from when no config file is given")
        p.add_argument("--config", type=Path, help="YAML file overriding the preset")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--reps", type=int, help="number of replications")
        p.add_argument("--methods", help="comma-separated subset of DBS,WLB,MCMC")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--full-scale", action="store_true", help="use the large presets")
        p.add_argument("--dump-weights", type=int, default=0, metavar="N",
                       help="also write N compact weight draws of the DBS scheme to CSV")
        p.add_argument("--no-report", action="store_true", help="skip the summary and figures")
    p = sub.add_parser("report", help="aggregate results.csv into summaries and figures")
    p.add_argument("--out", type=Path, required=True, help="directory holding results.csv")
    return parser


def build_config(args) -> ex.ExperimentConfig:
    name = VERB_EXPERIMENT.get(args.verb) or args.experiment
    doc = {}
    if args.config is not None:
        import yaml

        doc = yaml.safe_load(args.config.read_text()) or {}
        if name and doc.get("experiment", name) != name:
            raise ValueError(f"config is for {doc['experiment']!r}, verb expects {name!r}")
    name = doc.get("experiment") or name or "svm_npl"
    doc["experiment"] = name
    base = ex.preset(name, full_scale=args.full_scale)
    cfg = ex.config_from_dict(doc, base)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.reps is not None:
        cfg.replications = args.reps
    if args.methods:
        cfg.methods = [m.strip().upper() for m in args.methods.split(",") if m.strip()]
    if args.out is not None:
        cfg.output_dir = str(args.out)
    cfg.full_scale = args.full_scale or cfg.full_scale
    cfg.__post_init__()
    return cfg


def _dump_weights(cfg, count):
    from .weights import gibbs_weights, npl_weights, dump_csv

    rng = np.random.default_rng(cfg.master_seed)
    n = cfg.design.n
    S = min(cfg.dbs.subgroups, n)
    if cfg.experiment == "svm_npl":
        n_prime = cfg.dbs.n_prime or n
        wv = npl_weights(n, n_prime, S, min(cfg.dbs.pseudo_subgroups, n_prime), cfg.alpha, rng, size=count)
    else:
        wv = gibbs_weights(n, S, rng, size=count)
    path = Path(cfg.output_dir) / "weights.csv"
    dump_csv(path, wv.compact)
    return path


def report(out: Path) -> list[Path]:
    """Write ``summary.csv`` and figures from the files in ``out``."""
    rows = ex.read_results(out / "results.csv")
    summary = ex.summarize(rows)
    written = [out / "summary.csv"]
    ex.write_summary(written[0], summary)
    experiment = rows[0]["experiment"] if rows else None
    plain = [r for r in summary if r["method"] in ("DBS", "WLB", "MCMC")]
    if experiment in ("svm_npl", "lad_gibbs") and plain:
        keep = None
        if experiment == "svm_npl":
            keep = {"accuracy", "precision", "recall", "f1", "roc_auc", "pr_auc"}
        else:
            keep = {"coverage+", "coverage-", "length+", "length-", "bias+", "bias-"}
        written.append(plotting.metric_bars(plain, out / "metrics.png", keep))
        batches = {}
        for method in ("DBS", "WLB", "MCMC"):
            path = out / f"samples_rep0_{method}.csv"
            if path.exists():
                batch = SampleBatch.from_csv(path)
                if batch.N >= 30:
                    batches[method] = batch
        grids = {}
        if batches:
            # one extent for all methods so the panels are comparable
            pts = np.vstack([b.draws[:, 1:3] for b in batches.values()])
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            pad = 0.1 * (hi - lo) + 1e-9
            extent = (lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1])
        for method, batch in batches.items():
            g = metrics.kde_2d(batch, 1, 2, grid=(80, 80), extent=extent)
            g.to_csv(out / f"kde_rep0_{method}.csv")
            written.append(out / f"kde_rep0_{method}.csv")
            grids[method] = g
        if grids:
            written.append(plotting.density_contours(grids, out / "density_rep0.png"))
    elif experiment == "lasso_path":
        for path in sorted(out.glob("lasso_path_rep*.csv")):
            with path.open() as fh:
                path_rows = list(csv.DictReader(fh))
            written.append(plotting.lasso_path(path_rows, path.with_suffix(".png")))
    elif experiment == "arch_sweep":
        written.append(plotting.sweep_lines(summary, out / "arch_sweep.png"))
    elif experiment == "concentration_smoke":
        written.append(plotting.bias_vs_n(summary, out / "bias_vs_n.png"))
    trace = out / "trace_rep0_DBS.csv"
    if trace.exists():
        values = np.loadtxt(trace, delimiter=",", skiprows=1)[:, 1]
        written.append(plotting.trace(values, out / "trace_rep0_DBS.png"))
    return written


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.verb == "report":
        for path in report(args.out):
            print(path)
        return 0
    try:
        cfg = build_config(args)
    except (OSError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    if args.dump_weights:
        print(_dump_weights(cfg, args.dump_weights))
    try:
        manifest = ex.run_experiment(cfg)
    except RuntimeError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if not args.no_report:
        report(Path(cfg.output_dir))
    print(f"{manifest.succeeded}/{cfg.replications} replications succeeded -> {cfg.output_dir}")
    return 0 if manifest.ok else 1


if __name__ == "__main__":
    sys.exit(main())
