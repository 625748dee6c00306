"""Seeded replicate experiments comparing the four classifier variants on a
shifted target domain, plus quartile aggregation and report writing.

Every random stage of replicate ``r`` draws from
``derive_seed(master_seed, r, stage)``, so any replicate can be rerun alone.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import data as dmod
from .fair_erm import TrainConfig, train
from .graph import check_assumption_1, check_assumption_2, load_graph, parse_graph
from .metrics import density_ratio_weights, estimate_group_class_risk, estimate_target_risk, evaluate
from .scm import FLU_GRAPH, ScmConfig, generate_domain, pooled, sample_coefficients
from .selection import choose_subset, enumerate_subsets, rank_subsets_by_risk

log = logging.getLogger(__name__)

ALL = "SVC w. All Features"
SUBSET = "SVC w. Feature Subset"
FAIR = " + Fair Const"
VARIANTS = (ALL, SUBSET, ALL + FAIR, SUBSET + FAIR)

STAGES = {"coefficients": 1, "scm": 2, "split": 3, "missingness": 4, "downsample": 5, "selection": 6}

METRICS = (
    "accuracy", "tpr_a", "tpr_d", "deo", "auprc", "auroc",
    "identified_target_risk", "risk_y+1_a", "risk_y+1_d", "risk_y-1_a", "risk_y-1_d",
)

DEFAULT_SPLIT = (0.67 * 2 / 3, 0.67 / 3, 0.33)


class ConfigError(ValueError):
    pass


def derive_seed(master_seed: int, replicate: int, stage: str) -> int:
    """Stable 64-bit seed from (master seed, replicate index, stage)."""
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(replicate), STAGES[stage]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Perturbation:
    type: str
    column: str
    fraction: float = 0.0
    level: object = None
    reject_prob: float = 0.0

    def __post_init__(self):
        if self.type not in ("missingness", "downsample"):
            raise ConfigError(f"unknown perturbation type {self.type!r}")
        if self.type == "downsample" and self.level is None:
            raise ConfigError("downsample perturbation needs a level")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    graph: str | None = None
    replicates: int = 1
    master_seed: int = 0
    output: str | None = None
    # synthetic mode
    gamma: float = 10.0
    n: int = 2000
    coefficient_seed: int | None = None
    # tabular mode
    csv: str | None = None
    schema: str | None = None
    split: tuple = DEFAULT_SPLIT
    source_domain: float = 0.0
    target_domain: float = 1.0
    perturbations: tuple = ()
    # shared
    node_columns: dict | None = None
    subset: object = "auto"
    max_subset_size: int | None = None
    constraints: tuple = ("none", "eo_zero")
    reweight: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.mode not in ("synthetic", "tabular"):
            raise ConfigError(f"mode must be synthetic or tabular, got {self.mode!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.mode == "tabular" and not (self.csv and self.schema and self.graph):
            raise ConfigError("tabular mode needs csv, schema and graph")
        if self.mode == "synthetic" and not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        for c in self.constraints:
            if c not in ("none", "eo_zero"):
                raise ConfigError(f"unknown constraint {c!r}")

    def variants(self) -> list[str]:
        out = []
        for c in self.constraints:
            out += [ALL, SUBSET] if c == "none" else [ALL + FAIR, SUBSET + FAIR]
        return out


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    base = Path(path).resolve().parent
    return config_from_dict(raw, base=base, **overrides)


def config_from_dict(raw: dict, base=None, **overrides) -> ExperimentConfig:
    raw = dict(raw)
    flat = {k: raw.pop(k) for k in ("mode", "graph", "replicates", "master_seed", "output",
                                    "node_columns", "subset", "max_subset_size", "reweight") if k in raw}
    if "constraints" in raw:
        flat["constraints"] = tuple(raw.pop("constraints"))
    scm = raw.pop("scm", {}) or {}
    for k in ("gamma", "n", "coefficient_seed"):
        if k in scm:
            flat[k] = scm.pop(k)
    tab = raw.pop("data", {}) or {}
    for k in ("csv", "schema", "source_domain", "target_domain"):
        if k in tab:
            flat[k] = tab.pop(k)
    if "split" in tab:
        flat["split"] = tuple(tab.pop("split"))
    pert = raw.pop("perturbations", []) or []
    flat["perturbations"] = tuple(Perturbation(**p) for p in pert)
    if "train" in raw:
        try:
            flat["train"] = TrainConfig(**(raw.pop("train") or {}))
        except TypeError as exc:
            raise ConfigError(f"bad train section: {exc}") from None
    leftovers = set(raw) | set(scm) | set(tab)
    if leftovers:
        raise ConfigError(f"unknown config keys: {sorted(leftovers)}")
    if base is not None:
        for k in ("graph", "csv", "schema", "output"):
            if flat.get(k) and not os.path.isabs(flat[k]):
                flat[k] = str(Path(base) / flat[k])
    flat.update({k: v for k, v in overrides.items() if v is not None})
    if "mode" not in flat:
        raise ConfigError("config needs a mode")
    try:
        return ExperimentConfig(**flat)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _graph(cfg):
    if cfg.graph:
        return load_graph(cfg.graph)
    return parse_graph(FLU_GRAPH)


def _columns(nodes, node_columns):
    cols = []
    for node in nodes:
        cols.extend((node_columns or {}).get(node, [node]))
    return cols


def _feature_nodes(g, ds, node_columns):
    """Graph nodes (system or protected) that are backed by dataset columns."""
    out = []
    for name, role in g.nodes:
        if role not in ("system", "protected"):
            continue
        cols = (node_columns or {}).get(name, [name])
        if all(c in ds.blocks or c in ds.columns for c in cols):
            out.append(name)
    return out


def _pick_subset(cfg, g, train_ds, val_ds, full_nodes):
    if cfg.subset != "auto":
        subset = tuple(cfg.subset)
        return subset, check_assumption_1(g, subset) and check_assumption_2(g, subset), []
    cands = enumerate_subsets(full_nodes, cfg.max_subset_size)
    ranked = rank_subsets_by_risk(train_ds, val_ds, cands, cfg.train, cfg.node_columns)
    chosen, guaranteed = choose_subset(g, ranked)
    if not guaranteed:
        log.warning("no subset satisfies both assumptions; using lowest-risk subset %s", chosen.subset)
    return chosen.subset, guaranteed, ranked


def _evaluate_variants(cfg, source, target, full_cols, subset_cols):
    rows = {}
    for variant in cfg.variants():
        cols = subset_cols if SUBSET in variant else full_cols
        tc = replace(cfg.train, constraint="eo_zero" if FAIR in variant else "none")
        model = train(source, cols, tc)
        rep = evaluate(model, target)
        weights = density_ratio_weights(source, target, cols) if cfg.reweight else None
        rep.identified_target_risk = estimate_target_risk(source, target, model, weights)
        risks = {}
        for y in (1, -1):
            for d in (1.0, -1.0):
                try:
                    risks[(y, d)] = estimate_group_class_risk(source, model, y, d)
                except ValueError:
                    risks[(y, d)] = float("nan")
        rep.group_class_risks = risks
        row = rep.flat()
        row["constraint_degenerate"] = int(model.constraint_degenerate)
        rows[variant] = row
    return rows


def run_synthetic_replicate(cfg: ExperimentConfig, r: int) -> dict:
    cseed = cfg.coefficient_seed if cfg.coefficient_seed is not None else derive_seed(cfg.master_seed, r, "coefficients")
    coeffs = sample_coefficients(cseed)
    scm = ScmConfig(coeffs, cfg.gamma, cfg.n, derive_seed(cfg.master_seed, r, "scm"))
    source, target = generate_domain(scm, 0), generate_domain(scm, 1)
    g = _graph(cfg)
    full = _feature_nodes(g, source, cfg.node_columns)
    tr = va = None
    if cfg.subset == "auto":
        tr, va = dmod.split(source, (2 / 3, 1 / 3), derive_seed(cfg.master_seed, r, "selection"))
    subset, guaranteed, _ = _pick_subset(cfg, g, tr, va, full)
    rows = _evaluate_variants(cfg, source, target, _columns(full, cfg.node_columns), _columns(subset, cfg.node_columns))
    return {"subset": subset, "guaranteed": guaranteed, "rows": rows}


def surrogate_dataset(master_seed: int, r: int, gamma: float, n: int):
    """Pooled source (C1=0) and target (C1=1) SCM rows drawn with exactly the
    seeds synthetic-mode replicate ``r`` uses, for feeding through tabular mode."""
    coeffs = sample_coefficients(derive_seed(master_seed, r, "coefficients"))
    scm = ScmConfig(coeffs, gamma, n, derive_seed(master_seed, r, "scm"))
    return pooled(generate_domain(scm, 0), generate_domain(scm, 1))


def prepare_tabular(cfg: ExperimentConfig, ds, r: int):
    """Source train/validation and perturbed, imputed target for replicate ``r``."""
    tr, va, tg = dmod.split(ds, cfg.split, derive_seed(cfg.master_seed, r, "split"))
    dom = ds.domain
    if dom is not None:
        tr = tr.take(np.flatnonzero(tr.column(dom) == cfg.source_domain))
        va = va.take(np.flatnonzero(va.column(dom) == cfg.source_domain))
        tg = tg.take(np.flatnonzero(tg.column(dom) == cfg.target_domain))
    # missingness first, then selection bias
    for i, p in enumerate(x for x in cfg.perturbations if x.type == "missingness"):
        tg = dmod.inject_missingness(tg, p.column, p.fraction, derive_seed(cfg.master_seed, r, "missingness") + i)
    for i, p in enumerate(x for x in cfg.perturbations if x.type == "downsample"):
        tg = dmod.downsample_group(tg, p.column, p.level, p.reject_prob, derive_seed(cfg.master_seed, r, "downsample") + i)
    va = dmod.impute_mean(va, tr)
    tg = dmod.impute_mean(tg, tr)
    tr = dmod.impute_mean(tr, tr)
    return tr, va, tg


def run_tabular_replicate(cfg: ExperimentConfig, r: int, ds=None) -> dict:
    if ds is None:
        ds = dmod.load_csv(cfg.csv, dmod.load_schema(cfg.schema))
    g = _graph(cfg)
    tr, va, tg = prepare_tabular(cfg, ds, r)
    full = _feature_nodes(g, ds, cfg.node_columns)
    subset, guaranteed, _ = _pick_subset(cfg, g, tr, va, full)
    rows = _evaluate_variants(cfg, tr, tg, _columns(full, cfg.node_columns), _columns(subset, cfg.node_columns))
    return {"subset": tuple(subset), "guaranteed": guaranteed, "rows": rows}


DEFAULT_PERTURBATIONS = (
    Perturbation("missingness", "X1", 0.3),
    Perturbation("downsample", "D", level=-1, reject_prob=0.8),
)


def cross_mode_runs(replicates: int, graph, subset=("D", "X2"), gamma: float = 10.0, n: int = 2000,
                    master_seed: int = 0, perturbations=DEFAULT_PERTURBATIONS, train_cfg: TrainConfig = TrainConfig()):
    """Per-replicate variant rows from three runs sharing replicate seeds:
    synthetic mode, tabular mode on the written-and-reloaded surrogate CSV
    without perturbations, and the same CSV under ``perturbations``.

    Returns ``{"synthetic"|"tabular"|"perturbed": {variant: [row, ...]}}``.
    """
    import tempfile

    common = dict(graph=str(graph), subset=list(subset), master_seed=master_seed, train=train_cfg)
    syn = ExperimentConfig(mode="synthetic", gamma=gamma, n=n, **common)
    tab = ExperimentConfig(mode="tabular", csv="-", schema="-", **common)
    runs = {"synthetic": syn, "tabular": tab, "perturbed": replace(tab, perturbations=tuple(perturbations))}
    out = {k: {v: [] for v in syn.variants()} for k in runs}
    with tempfile.TemporaryDirectory() as tmp:
        for r in range(replicates):
            csv_path, schema_path = Path(tmp) / f"r{r}.csv", Path(tmp) / f"r{r}.yaml"
            ds = surrogate_dataset(master_seed, r, gamma, n)
            dmod.write_csv(ds, csv_path)
            dmod.dump_schema(ds.schema, schema_path)
            ds = dmod.load_csv(csv_path, dmod.load_schema(schema_path))
            for name, cfg in runs.items():
                res = run_synthetic_replicate(cfg, r) if name == "synthetic" else run_tabular_replicate(cfg, r, ds)
                for v, row in res["rows"].items():
                    out[name][v].append(row)
    return out


@dataclass
class AggregateSummary:
    stats: dict
    n_ok: int
    n_failed: int

    def to_dict(self) -> dict:
        return asdict(self)


def quartiles(values) -> tuple[float, float, float]:
    """(q1, median, q3) by inclusive linear interpolation."""
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return (float("nan"),) * 3
    q = np.percentile(v, [25, 50, 75], method="linear")
    return float(q[0]), float(q[1]), float(q[2])


def aggregate_replicates(records) -> AggregateSummary:
    """Per variant and metric quartiles over successful replicate records.

    ``records`` are dicts with keys ``replicate``, ``variant``, ``status`` and
    metric values.
    """
    records = list(records)
    if not records:
        raise ValueError("no replicate records to aggregate")
    ok = [x for x in records if x.get("status", "ok") == "ok"]
    failed = {x["replicate"] for x in records if x.get("status", "ok") != "ok"}
    stats = {}
    for variant in sorted({x["variant"] for x in ok}):
        rows = [x for x in ok if x["variant"] == variant]
        stats[variant] = {}
        for m in METRICS:
            if any(m in x for x in rows):
                q1, med, q3 = quartiles([x.get(m, float("nan")) for x in rows])
                stats[variant][m] = {"q1": q1, "median": med, "q3": q3}
    return AggregateSummary(stats, len({x["replicate"] for x in ok}), len(failed))


def _records(cfg, r, result=None, error=None):
    if error is not None:
        return [{"replicate": r, "variant": v, "status": "failed", "error": error} for v in cfg.variants()]
    out = []
    for v in cfg.variants():
        row = {"replicate": r, "variant": v, "status": "ok", "subset": " ".join(result["subset"]),
               "guaranteed": int(result["guaranteed"])}
        row.update(result["rows"][v])
        out.append(row)
    return out


def run_replicate(cfg: ExperimentConfig, r: int, ds=None) -> list[dict]:
    """Records for one replicate; errors are captured as failed records."""
    try:
        if cfg.mode == "synthetic":
            result = run_synthetic_replicate(cfg, r)
        else:
            result = run_tabular_replicate(cfg, r, ds)
    except ValueError as exc:
        log.warning("replicate %d failed: %s", r, exc)
        return _records(cfg, r, error=f"{type(exc).__name__}: {exc}")
    return _records(cfg, r, result)


def run_experiment(cfg: ExperimentConfig):
    ds = None
    if cfg.mode == "tabular":
        ds = dmod.load_csv(cfg.csv, dmod.load_schema(cfg.schema))
    records = []
    for r in range(cfg.replicates):
        records.extend(run_replicate(cfg, r, ds))
    return aggregate_replicates(records), records


def run_synthetic_experiment(cfg: ExperimentConfig):
    if cfg.mode != "synthetic":
        raise ConfigError("expected a synthetic config")
    return run_experiment(cfg)


def run_tabular_experiment(cfg: ExperimentConfig):
    if cfg.mode != "tabular":
        raise ConfigError("expected a tabular config")
    return run_experiment(cfg)


CSV_FIELDS = ("replicate", "variant", "status", "subset", "guaranteed", *METRICS, "constraint_degenerate", "error")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_outputs(summary: AggregateSummary, records, out_dir, cfg: ExperimentConfig | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "replicates.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for rec in records:
            w.writerow([_cell(rec.get(k)) for k in CSV_FIELDS])
    doc = summary.to_dict()
    if cfg is not None:
        doc["config"] = {"mode": cfg.mode, "replicates": cfg.replicates, "master_seed": cfg.master_seed}
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
