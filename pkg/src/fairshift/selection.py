"""Exhaustive feature-subset search: rank by source validation risk, then
pick the lowest-risk subset that passes both graphical checks."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from itertools import combinations

from .fair_erm import TrainConfig, train
from .graph import CausalGraph, check_assumption_1, check_assumption_2
from .metrics import risk

MAX_EXHAUSTIVE = 20


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class SubsetReport:
    subset: tuple[str, ...]
    validation_risk: float
    assumption1: bool = False
    assumption2: bool = False
    selected: bool = False


def enumerate_subsets(features, max_size: int | None = None) -> list[tuple[str, ...]]:
    """Non-empty subsets up to ``max_size``, largest first, then lexicographic."""
    features = sorted(set(features))
    if len(features) > MAX_EXHAUSTIVE:
        raise SelectionError(f"{len(features)} features exceed the exhaustive-search limit of {MAX_EXHAUSTIVE}")
    if max_size is None:
        max_size = len(features)
    if not 1 <= max_size <= len(features):
        raise SelectionError("max_size must lie in [1, number of features]")
    out = []
    for size in range(max_size, 0, -1):
        out.extend(combinations(features, size))
    return out


def _columns(subset, node_columns):
    if node_columns is None:
        return list(subset)
    cols = []
    for node in subset:
        cols.extend(node_columns.get(node, [node]))
    return cols


def rank_subsets_by_risk(train_ds, val_ds, subsets, cfg: TrainConfig = TrainConfig(), node_columns=None) -> list[SubsetReport]:
    """Train one unconstrained model per subset and sort by 0-1 validation
    risk; ties go to the smaller subset, then lexicographic order.

    ``node_columns`` maps graph node names to dataset columns when they differ.
    """
    if cfg.constraint != "none":
        cfg = replace(cfg, constraint="none")
    reports = []
    for subset in subsets:
        subset = tuple(sorted(subset))
        model = train(train_ds, _columns(subset, node_columns), cfg)
        reports.append(SubsetReport(subset, risk(model, val_ds)))
    reports.sort(key=lambda r: (r.validation_risk, len(r.subset), r.subset))
    return reports


def annotate(g: CausalGraph, ranked) -> list[SubsetReport]:
    return [
        replace(r, assumption1=check_assumption_1(g, r.subset), assumption2=check_assumption_2(g, r.subset), selected=False)
        for r in ranked
    ]


def select_invariant_subset(g: CausalGraph, ranked) -> SubsetReport | None:
    """First report, in the given order, passing both assumptions."""
    if not ranked:
        raise SelectionError("no candidate subsets")
    for r in annotate(g, ranked):
        if r.assumption1 and r.assumption2:
            return replace(r, selected=True)
    return None


def choose_subset(g: CausalGraph, ranked) -> tuple[SubsetReport, bool]:
    """Selected subset and ``True``, or the lowest-risk subset and ``False``
    (no transfer guarantee) when nothing passes."""
    chosen = select_invariant_subset(g, ranked)
    if chosen is not None:
        return chosen, True
    return ranked[0], False


def write_reports(reports, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subset", "validation_risk", "assumption1", "assumption2", "selected"])
        for r in reports:
            w.writerow([" ".join(r.subset), repr(r.validation_risk), int(r.assumption1), int(r.assumption2), int(r.selected)])
