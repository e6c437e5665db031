"""Experiment presets and the runner behind the command line.

Each replication generates its data from a seed shared by all methods, then
runs the requested samplers in a fixed order (DBS, WLB, MCMC) and appends
long-format rows ``(experiment, replication, seed, method, setting, metric,
value)`` to ``results.csv``. A ``manifest.json`` records the configuration,
the seeds, a content hash of the inputs, stage timings and every file written.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import hashlib
import json
import logging
import time
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy.stats import spearmanr

from . import dbs, exact, mcmc, metrics
from .data import SampleBatch
from .datagen import (
    LadDesign,
    LassoDesign,
    SvmDesign,
    TargetSpec,
    gen_lad,
    gen_lasso,
    gen_svm,
    population_target,
    svm_pseudo_sampler,
)
from .losses import LaplacePrior, LossModel

log = logging.getLogger(__name__)

EXPERIMENTS = ("svm_npl", "lad_gibbs", "lasso_path", "arch_sweep", "concentration_smoke")
METHOD_ORDER = ("DBS", "WLB", "MCMC")
METHOD_CODE = {"data": 0, "DBS": 1, "WLB": 2, "MCMC": 3, "aux": 4}
RESULT_FIELDS = ["experiment", "replication", "seed", "method", "setting", "metric", "value"]


@dataclass
class DesignConfig:
    n: int = 50
    p: int = 10
    rho: float = 0.6
    model: str = "M2"
    n_test: int = 100


@dataclass
class SweepConfig:
    """Grids for the path, architecture and concentration experiments."""

    # lasso path: penalty per observation on a log grid, lambda = 2 n exp(value)
    log_alpha_start: float = -6.0
    log_alpha_stop: float = -1.0
    n_lambdas: int = 8
    path_level: float = 0.95
    depths: list = field(default_factory=lambda: [2, 3, 4, 5])
    widths: list = field(default_factory=lambda: [16, 32, 64, 128])
    fixed_width: int = 128
    fixed_depth: int = 3
    settings: list = field(default_factory=lambda: [[100, 8]])
    sizes: list = field(default_factory=lambda: [100, 400, 1600])


@dataclass
class ExperimentConfig:
    experiment: str = "svm_npl"
    design: DesignConfig = field(default_factory=DesignConfig)
    methods: list = field(default_factory=lambda: ["DBS", "WLB"])
    replications: int = 10
    n_draws: int = 10_000
    wlb_draws: int | None = None
    lam: float | None = None  # None: chosen by BIC for LAD designs
    alpha: float = 1.0
    dbs: dbs.DbsConfig = field(default_factory=dbs.DbsConfig)
    solver: exact.SolverConfig = field(default_factory=exact.SolverConfig)
    mcmc: mcmc.McmcConfig = field(default_factory=lambda: mcmc.McmcConfig(iterations=200_000, burn_in=10_000))
    target: TargetSpec = field(default_factory=lambda: TargetSpec(n_samples=200_000, iterations=1000))
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output_dir: str = "runs/out"
    master_seed: int = 0
    save_samples: bool = True
    save_checkpoints: bool = True
    full_scale: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not self.methods:
            raise ValueError("at least one method is required")
        bad = set(self.methods) - set(METHOD_ORDER)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")

    @property
    def n_wlb(self) -> int:
        return self.n_draws if self.wlb_draws is None else self.wlb_draws

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


_SECTIONS = {
    "design": DesignConfig,
    "dbs": dbs.DbsConfig,
    "solver": exact.SolverConfig,
    "mcmc": mcmc.McmcConfig,
    "target": TargetSpec,
    "sweep": SweepConfig,
}


def _build(cls, values: dict, where: str):
    if not isinstance(values, dict):
        raise ValueError(f"section {where!r} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ValueError(f"unknown keys in {where!r}: {sorted(unknown)}")
    return cls(**values)


def config_from_dict(doc: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Overlay ``doc`` on ``base`` (or the preset named by ``doc['experiment']``).

    Unknown keys at any level raise ``ValueError``.
    """
    doc = dict(doc or {})
    if base is None:
        base = preset(doc.get("experiment", "svm_npl"))
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(doc) - top
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    merged = base.to_dict()
    for key, value in doc.items():
        if key in _SECTIONS and value is not None:
            section = dict(merged[key])
            _build(_SECTIONS[key], value, key)  # reject unknown keys early
            section.update(value)
            merged[key] = section
        else:
            merged[key] = value
    kwargs = {k: v for k, v in merged.items() if k not in _SECTIONS}
    for key, cls in _SECTIONS.items():
        kwargs[key] = _build(cls, merged[key], key)
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    doc = yaml.safe_load(Path(path).read_text()) or {}
    return config_from_dict(doc)


def preset(name: str, full_scale: bool = False) -> ExperimentConfig:
    """Desk-scale defaults for each experiment; ``full_scale`` restores the larger settings."""
    if name == "svm_npl":
        cfg = ExperimentConfig("svm_npl", DesignConfig(n=50, p=10, rho=0.6), ["DBS", "WLB"],
                               wlb_draws=500)
        if full_scale:
            cfg.design = DesignConfig(n=5000, p=500, rho=0.6)
            cfg.wlb_draws = None
    elif name == "lad_gibbs":
        cfg = ExperimentConfig("lad_gibbs", DesignConfig(n=100, p=8, model="M2"),
                               ["DBS", "WLB", "MCMC"], wlb_draws=500)
        if full_scale:
            cfg.design = DesignConfig(n=1000, p=50, model="M2")
            cfg.wlb_draws = None
            cfg.mcmc = mcmc.McmcConfig()
    elif name == "lasso_path":
        cfg = ExperimentConfig("lasso_path", DesignConfig(n=1000, p=50, rho=0.6), ["DBS", "WLB"],
                               replications=1, wlb_draws=500, n_draws=5000)
        # squared loss at n=1000 is still drifting after 4000 epochs
        cfg.dbs.epochs = 16_000
    elif name == "arch_sweep":
        cfg = ExperimentConfig("arch_sweep", DesignConfig(n=100, p=8, model="M2"), ["DBS"],
                               replications=1, n_draws=5000)
        if full_scale:
            cfg.sweep.settings = [[100, 8], [1000, 50]]
    elif name == "concentration_smoke":
        cfg = ExperimentConfig("concentration_smoke", DesignConfig(n=100, p=8, model="M2"), ["WLB"],
                               wlb_draws=200, solver=exact.SolverConfig(max_epochs=5000))
    else:
        raise ValueError(f"unknown experiment {name!r}")
    cfg.full_scale = full_scale
    return cfg


def replication_seed(master_seed: int, replication: int, method: str) -> int:
    ss = np.random.SeedSequence([int(master_seed), int(replication), METHOD_CODE[method]])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def rng_for(master_seed: int, replication: int, method: str) -> np.random.Generator:
    return np.random.default_rng(replication_seed(master_seed, replication, method))


def content_hash(doc) -> str:
    """Git-style blob hash of the canonical JSON form of ``doc``."""
    body = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


@dataclass
class RunManifest:
    config: dict
    seeds: dict = field(default_factory=dict)
    input_hash: str = ""
    timings: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    succeeded: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def add(self, path) -> Path:
        self.artifacts.append(Path(path).name)
        return Path(path)

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / "manifest.json"
        if path.name not in self.artifacts:
            self.artifacts.append(path.name)
        path.write_text(json.dumps(_plain(asdict(self)), indent=2, sort_keys=True))
        return path


class _Results:
    def __init__(self, path, experiment):
        self.path = Path(path)
        self.experiment = experiment
        self.rows = []

    def add(self, rep, seed, method, setting, values: dict):
        for metric, value in values.items():
            self.rows.append([self.experiment, rep, seed, method, setting, metric, float(value)])

    def write(self):
        with self.path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RESULT_FIELDS)
            for r in self.rows:
                writer.writerow(r[:-1] + [repr(r[-1])])


def read_results(path) -> list[dict]:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["value"] = float(r["value"])
        r["replication"] = int(r["replication"])
    return rows


# -- shared pieces -----------------------------------------------------------

def _lad_model(cfg: ExperimentConfig, data):
    if cfg.lam is not None:
        return LossModel.lad(LaplacePrior(cfg.lam)), None
    sel = metrics.bic_select_lambda(data, LossModel.lad(), solver=cfg.solver)
    return LossModel.lad(LaplacePrior(sel.lam)), sel


def _save_batch(cfg, manifest, out, tag, batch: SampleBatch):
    if cfg.save_samples:
        batch.to_csv(manifest.add(out / f"samples_{tag}.csv"))


def _run_dbs(cfg, manifest, out, tag, trainer, rng, n_draws):
    sampler = trainer(rng)
    batch = dbs.sample(sampler, n_draws, rng)
    dbs.write_trace(manifest.add(out / f"trace_{tag}.csv"), sampler.trace)
    if cfg.save_checkpoints:
        sampler.save(manifest.add(out / f"checkpoint_{tag}.json"))
    _save_batch(cfg, manifest, out, tag, batch)
    return sampler, batch


def _timing(batch: SampleBatch, per: int = 10_000) -> dict:
    """Seconds per ``per`` draws; DBS keeps the training/sampling split."""
    if batch.method == "DBS":
        return {"train_seconds": batch.train_seconds,
                "sample_seconds": batch.sample_seconds * per / batch.N}
    return {"seconds": batch.total_seconds * per / batch.N}


# -- experiments -------------------------------------------------------------

def _svm_replication(cfg, rep, manifest, results, out, theta0):
    design = SvmDesign(cfg.design.n, cfg.design.p, cfg.design.rho, cfg.design.n_test)
    train, test = gen_svm(design, rng_for(cfg.master_seed, rep, "data"))
    model = LossModel.hinge()
    setting = f"p={design.p},n={design.n},rho={design.rho}"
    pseudo_source = svm_pseudo_sampler(train)
    mask = np.zeros(design.p + 1, dtype=bool)
    mask[1:] = theta0[1:] != 0
    for method in (m for m in METHOD_ORDER if m in cfg.methods):
        seed = replication_seed(cfg.master_seed, rep, method)
        rng = np.random.default_rng(seed)
        tag = f"rep{rep}_{method}"
        if method == "DBS":
            n_prime = cfg.dbs.n_prime or train.n

            def trainer(r):
                pseudo = pseudo_source(r, n_prime)
                return dbs.train_npl(train, pseudo, model, cfg.dbs, rng=r)

            _, batch = _run_dbs(cfg, manifest, out, tag, trainer, rng, cfg.n_draws)
        elif method == "WLB":
            batch = exact.npl_sample(train, pseudo_source, cfg.alpha, cfg.dbs.n_prime or train.n,
                                     cfg.n_wlb, model, cfg.solver, rng)
            _save_batch(cfg, manifest, out, tag, batch)
        else:
            raise ValueError("MCMC is not defined for the nonparametric SVM posterior")
        rep_c = metrics.classification_report(batch, test)
        rep_i = metrics.interval_report(batch, theta0, mask)
        values = {k: v for k, v in rep_c.to_dict().items() if k != "flags"}
        values["bias"] = float(np.mean(rep_i.bias[1:]))
        values.update(_timing(batch))
        results.add(rep, seed, method, setting, values)


def _lad_replication(cfg, rep, manifest, results, out, design=None, methods=None, setting=None):
    design = design or LadDesign(cfg.design.n, cfg.design.p, cfg.design.model)
    data = gen_lad(design, rng_for(cfg.master_seed, rep, "data"))
    model, sel = _lad_model(cfg, data)
    setting = setting or f"{design.model},p={design.p},n={design.n}"
    theta0 = design.truth
    batches = {}
    for method in (m for m in METHOD_ORDER if m in (methods or cfg.methods)):
        seed = replication_seed(cfg.master_seed, rep, method)
        rng = np.random.default_rng(seed)
        tag = f"rep{rep}_{method}"
        extra = {}
        if method == "DBS":
            _, batch = _run_dbs(cfg, manifest, out, tag,
                                lambda r: dbs.train_gibbs(data, model, cfg.dbs, rng=r), rng, cfg.n_draws)
            timing = _timing(batch)
        elif method == "WLB":
            batch = exact.wlb_sample(data, model, cfg.n_wlb, cfg.solver, rng)
            _save_batch(cfg, manifest, out, tag, batch)
            timing = _timing(batch)
        else:
            batch, summary, chains = mcmc.mh_run(data, model, 1.0, cfg.mcmc, rng, keep_chains=True)
            summary.to_json(manifest.add(out / f"mcmc_summary_{tag}.json"))
            _save_batch(cfg, manifest, out, tag, batch)
            timing = {"seconds": summary.seconds_per_10k_ess}
            extra = {"acceptance_rate": summary.acceptance_rate, "min_ess": summary.min_ess,
                     "max_rhat": float(np.nanmax(summary.split_rhat)) if np.any(
                         np.isfinite(summary.split_rhat)) else float("nan")}
        report = metrics.interval_report(batch, theta0, design.active_mask)
        values = dict(report.summary())
        values["lambda"] = model.prior.lam
        values.update(timing)
        values.update(extra)
        results.add(rep, seed, method, setting, values)
        batches[method] = batch
    return batches


def _smoke_replication(cfg, rep, manifest, results, out):
    for n in cfg.sweep.sizes:
        design = LadDesign(int(n), cfg.design.p, cfg.design.model)
        data = gen_lad(design, rng_for(cfg.master_seed, rep * 1000 + int(n), "data"))
        model, _ = _lad_model(cfg, data)
        seed = replication_seed(cfg.master_seed, rep * 1000 + int(n), "WLB")
        batch = exact.wlb_sample(data, model, cfg.n_wlb, cfg.solver, np.random.default_rng(seed))
        bias = float(np.linalg.norm(batch.draws.mean(axis=0) - design.truth))
        results.add(rep, seed, "WLB", f"n={n}", {"bias": bias, "lambda": model.prior.lam,
                                                 **_timing(batch)})


def lasso_lambdas(cfg: ExperimentConfig) -> np.ndarray:
    """Penalty grid on the summed-loss scale: ``lambda = 2 n exp(a)`` for ``a`` on a
    linear grid, so ``exp(a)`` is the per-observation penalty of a mean-squared-error fit."""
    a = np.linspace(cfg.sweep.log_alpha_start, cfg.sweep.log_alpha_stop, cfg.sweep.n_lambdas)
    return 2.0 * cfg.design.n * np.exp(a)


def _lasso_replication(cfg, rep, manifest, results, out):
    design = LassoDesign(cfg.design.n, cfg.design.p, cfg.design.rho)
    data = gen_lasso(design, rng_for(cfg.master_seed, rep, "data"))
    rows = []
    level = cfg.sweep.path_level
    n_active = len(design.active)
    ratios = []
    lams = lasso_lambdas(cfg)
    for li, lam in enumerate(lams):
        model = LossModel.squared(LaplacePrior(float(lam)))
        widths = {}
        for method in (m for m in ("DBS", "WLB") if m in cfg.methods):
            seed = replication_seed(cfg.master_seed, rep * 1000 + li, method)
            rng = np.random.default_rng(seed)
            tag = f"rep{rep}_lam{li}_{method}"
            if method == "DBS":
                _, batch = _run_dbs(cfg, manifest, out, tag,
                                    lambda r: dbs.train_gibbs(data, model, cfg.dbs, rng=r), rng, cfg.n_draws)
            else:
                batch = exact.wlb_sample(data, model, cfg.n_wlb, cfg.solver, rng)
                _save_batch(cfg, manifest, out, tag, batch)
            lo, hi = metrics.credible_interval(batch.draws[:, :n_active], level)
            mean = batch.draws[:, :n_active].mean(axis=0)
            widths[method] = hi - lo
            for j in range(n_active):
                rows.append([rep, float(lam), j + 1, method, lo[j], hi[j], mean[j]])
            results.add(rep, seed, method, f"lambda={lam:.6g}",
                        {"mean_width": float(np.mean(hi - lo)), **_timing(batch)})
        if "DBS" in widths and "WLB" in widths:
            ok = widths["WLB"] > 0
            if ok.any():
                ratio = float(np.mean(widths["DBS"][ok] / widths["WLB"][ok]))
                ratios.append((float(lam), ratio))
                results.add(rep, 0, "DBS/WLB", f"lambda={lam:.6g}", {"width_ratio": ratio})
    path = manifest.add(out / f"lasso_path_rep{rep}.csv")
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replication", "lambda", "coord", "method", "lo", "hi", "mean"])
        for r in rows:
            writer.writerow(r[:4] + [repr(float(v)) for v in r[4:]])
    if len(ratios) >= 3:
        rho = spearmanr([r[0] for r in ratios], [r[1] for r in ratios]).statistic
        results.add(rep, 0, "DBS/WLB", "path", {"spearman_lambda_ratio": float(rho)})


def _arch_replication(cfg, rep, manifest, results, out):
    cells = [("depth", d, [cfg.sweep.fixed_width] * int(d)) for d in cfg.sweep.depths]
    cells += [("width", w, [int(w)] * cfg.sweep.fixed_depth) for w in cfg.sweep.widths]
    for n, p in cfg.sweep.settings:
        design = LadDesign(int(n), int(p), cfg.design.model)
        data = gen_lad(design, rng_for(cfg.master_seed, rep * 100_000 + int(n), "data"))
        model, _ = _lad_model(cfg, data)
        for ci, (kind, value, widths) in enumerate(cells):
            dcfg = copy.deepcopy(cfg.dbs)
            dcfg.hidden_widths = widths
            seed = replication_seed(cfg.master_seed, rep * 100_000 + int(n) * 10 + ci, "DBS")
            rng = np.random.default_rng(seed)
            sampler = dbs.train_gibbs(data, model, dcfg, rng=rng)
            batch = dbs.sample(sampler, cfg.n_draws, rng)
            report = metrics.interval_report(batch, design.truth, design.active_mask)
            results.add(rep, seed, "DBS", f"p={p},n={n},{kind}={value}",
                        {**report.summary(), **_timing(batch)})


_RUNNERS = {
    "lad_gibbs": _lad_replication,
    "concentration_smoke": _smoke_replication,
    "lasso_path": _lasso_replication,
    "arch_sweep": _arch_replication,
}


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    """Run every replication, fail-soft per replication, and write all outputs."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = cfg.to_dict()
    manifest = RunManifest(config=doc, input_hash=content_hash({k: v for k, v in doc.items()
                                                               if k != "output_dir"}))
    results = _Results(out / "results.csv", cfg.experiment)
    start = time.perf_counter()
    theta0 = None
    if cfg.experiment == "svm_npl":
        t = time.perf_counter()
        design = SvmDesign(cfg.design.n, cfg.design.p, cfg.design.rho)
        target = population_target(LossModel.hinge(), design, cfg.target)
        theta0 = target.theta0
        manifest.timings["population_target"] = time.perf_counter() - t
        manifest.config["theta0"] = theta0.tolist()
        if not target.converged:
            log.warning("population target did not meet its convergence tolerance")
    for rep in range(cfg.replications):
        manifest.seeds[str(rep)] = {m: replication_seed(cfg.master_seed, rep, m)
                                    for m in ("data", *cfg.methods)}
        t = time.perf_counter()
        n_rows = len(results.rows)
        try:
            if cfg.experiment == "svm_npl":
                _svm_replication(cfg, rep, manifest, results, out, theta0)
            else:
                _RUNNERS[cfg.experiment](cfg, rep, manifest, results, out)
            manifest.succeeded += 1
        except Exception as exc:  # fail-soft: keep going with the next replication
            del results.rows[n_rows:]
            log.error("replication %d failed: %s", rep, exc)
            manifest.failures.append({"replication": rep, "error": repr(exc),
                                      "traceback": traceback.format_exc()})
        manifest.timings[f"replication_{rep}"] = time.perf_counter() - t
    manifest.timings["total"] = time.perf_counter() - start
    results.write()
    manifest.add(results.path)
    manifest.write(out)
    if manifest.succeeded == 0:
        raise RuntimeError(f"all {cfg.replications} replications failed; see {out / 'manifest.json'}")
    return manifest


# -- aggregation -------------------------------------------------------------

def summarize(rows: list[dict]) -> list[dict]:
    """Mean and standard deviation over replications per (method, setting, metric)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["experiment"], r["method"], r["setting"], r["metric"]), []).append(r["value"])
    out = []
    for (exp, method, setting, metric), vals in groups.items():
        v = np.asarray(vals, dtype=float)
        fin = v[np.isfinite(v)]
        out.append({"experiment": exp, "method": method, "setting": setting, "metric": metric,
                    "mean": float(fin.mean()) if fin.size else float("nan"),
                    "sd": float(fin.std()) if fin.size > 1 else 0.0, "reps": int(v.size)})
    return out


def write_summary(path, summary: list[dict]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["experiment", "method", "setting", "metric", "mean", "sd", "reps"])
        writer.writeheader()
        for r in summary:
            writer.writerow(r)
