"""Drift-injection experiments and their detection-rate reports.

Goal 1 (distribution change): for each selected split, weak slices are found
on the baseline half once; the deployment half is resampled with replacement
``num_resamples`` times and every resample is distorted under each
``(setting, r, c)`` permutation. A two-sided drift test runs on each distorted
copy and on the undistorted resample (reported as setting ``"none"`` with
``r = c = 0``).

Goal 2 (error-rate growth): for each split, the deployment half is rebalanced
at every multiplier ``k`` and tested with the one-sided, continuity-corrected
drift test.

Every random draw is seeded by :func:`slicedrift._random.derive_seed` from
the master seed and the labels of the draw, so results do not depend on the
order in which cells are computed.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ._random import derive_seed, make_rng
from .data_model import drop_low_variance, load_dataset, resample_rows, stratified_split
from .distortion import PermutationConfig, RebalanceConfig, permute_distort, rebalance_mcr
from .drift import DISTRIBUTION_CHANGE, MCR_DEGRADATION, detect_drift
from .errors import SliceDriftError
from .slicing import SliceFinderConfig, find_weak_slices

log = logging.getLogger(__name__)

DEFAULT_GRID = (0.1, 0.25, 0.5, 0.75, 1.0)
DEFAULT_ALPHAS = (0.01, 0.05, 0.10)
DEFAULT_MULTIPLIERS = (1.0, 1.25, 1.5, 1.75, 2.0, 3.0, 5.0, 7.5, 10.0)
NO_PERMUTATION = "none"

GOAL1_AXES = ("setting", "c", "r", "alpha")
GOAL2_AXES = ("k", "alpha")


def _finder_config(obj):
    if obj is None or isinstance(obj, SliceFinderConfig):
        return obj or SliceFinderConfig()
    return SliceFinderConfig(**obj)


@dataclass
class Goal1ExperimentConfig:
    data: str | None = None
    schema: str | None = None
    num_splits_total: int = 50
    num_splits_selected: int = 5
    num_resamples: int = 5
    grid_r: tuple[float, ...] = DEFAULT_GRID
    grid_c: tuple[float, ...] = DEFAULT_GRID
    settings: tuple[str, ...] = ("E1", "E2", "E3")
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    master_seed: int = 0
    continuity: bool = True
    force_different: bool = True
    drop_low_variance: int | None = None
    slice_finder: SliceFinderConfig = field(default_factory=SliceFinderConfig)
    workers: int = 1

    def __post_init__(self):
        self.grid_r = tuple(float(v) for v in self.grid_r)
        self.grid_c = tuple(float(v) for v in self.grid_c)
        self.settings = tuple(self.settings)
        self.alphas = tuple(float(a) for a in self.alphas)
        self.slice_finder = _finder_config(self.slice_finder)
        if not 1 <= self.num_splits_selected <= self.num_splits_total:
            raise ValueError("need 1 <= num_splits_selected <= num_splits_total")
        if self.num_resamples < 1:
            raise ValueError("num_resamples must be at least 1")
        if any(not 0.0 < v <= 1.0 for v in self.grid_r + self.grid_c):
            raise ValueError("grid values must lie in (0, 1]")
        unknown = set(self.settings) - {"E1", "E2", "E3"}
        if unknown:
            raise ValueError(f"unknown settings {sorted(unknown)}")
        _check_alphas(self.alphas)


@dataclass
class Goal2ExperimentConfig:
    data: str | None = None
    schema: str | None = None
    num_splits: int = 50
    multipliers: tuple[float, ...] = DEFAULT_MULTIPLIERS
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    master_seed: int = 0
    continuity: bool = True
    drop_low_variance: int | None = None
    slice_finder: SliceFinderConfig = field(default_factory=SliceFinderConfig)
    workers: int = 1

    def __post_init__(self):
        self.multipliers = tuple(float(k) for k in self.multipliers)
        self.alphas = tuple(float(a) for a in self.alphas)
        self.slice_finder = _finder_config(self.slice_finder)
        if self.num_splits < 1:
            raise ValueError("num_splits must be at least 1")
        if any(k <= 0 for k in self.multipliers):
            raise ValueError("multipliers must be positive")
        _check_alphas(self.alphas)


def _check_alphas(alphas):
    if not alphas or any(not 0.0 < a < 1.0 for a in alphas):
        raise ValueError("alphas must be a non-empty list of levels in (0, 1)")


def load_config(path, goal):
    """Read a JSON experiment config; relative data paths resolve against the config file."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    for key in ("data", "schema"):
        if obj.get(key):
            p = Path(obj[key])
            obj[key] = str(p if p.is_absolute() else path.parent / p)
    cls = Goal1ExperimentConfig if goal == "goal1" else Goal2ExperimentConfig
    return cls(**obj)


def config_to_dict(cfg):
    out = asdict(cfg)
    out["slice_finder"] = asdict(cfg.slice_finder)
    return out


@dataclass
class DetectionGrid:
    """Detection counts per cell of an experiment grid.

    ``cells`` maps a tuple of axis labels (in ``axes`` order) to
    ``[detected, comparisons]``.
    """

    axes: tuple[str, ...]
    cells: dict[tuple, list[int]] = field(default_factory=dict)
    skipped: list[dict] = field(default_factory=list)

    def add(self, key, detected):
        cell = self.cells.setdefault(tuple(key), [0, 0])
        cell[0] += int(bool(detected))
        cell[1] += 1

    def merge(self, other):
        for key, (det, tot) in other.cells.items():
            cell = self.cells.setdefault(key, [0, 0])
            cell[0] += det
            cell[1] += tot
        self.skipped.extend(other.skipped)

    def fraction(self, **labels):
        key = tuple(_norm(labels[a]) for a in self.axes)
        det, tot = self.cells[key]
        return det / tot if tot else float("nan")

    def counts(self, **labels):
        return tuple(self.cells[tuple(_norm(labels[a]) for a in self.axes)])

    def rows(self):
        """Long-format rows sorted by axis labels."""
        out = []
        for key in sorted(self.cells, key=_sort_key):
            det, tot = self.cells[key]
            row = dict(zip(self.axes, key))
            row.update(detected=det, comparisons=tot, fraction=det / tot if tot else None)
            out.append(row)
        return out

    def to_dict(self):
        return {"axes": list(self.axes), "rows": self.rows(), "skipped": list(self.skipped)}

    @classmethod
    def from_rows(cls, axes, rows, skipped=()):
        grid = cls(tuple(axes), skipped=list(skipped))
        for row in rows:
            key = tuple(_norm(row[a]) for a in axes)
            grid.cells[key] = [int(row["detected"]), int(row["comparisons"])]
        return grid

    @classmethod
    def from_dict(cls, obj):
        return cls.from_rows(obj["axes"], obj["rows"], obj.get("skipped", ()))

    def __eq__(self, other):
        return (
            isinstance(other, DetectionGrid)
            and self.axes == other.axes
            and self.cells == other.cells
            and self.skipped == other.skipped
        )


def _norm(value):
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    if isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def _sort_key(key):
    return tuple((0, v, "") if isinstance(v, float) else (1, 0.0, str(v)) for v in key)


# -- reports ---------------------------------------------------------------


def grid_to_csv(grid):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(grid.axes) + ["detected", "comparisons", "fraction"])
    for row in grid.rows():
        frac = row["fraction"]
        writer.writerow(
            [row[a] if isinstance(row[a], str) else repr(row[a]) for a in grid.axes]
            + [row["detected"], row["comparisons"], "" if frac is None else repr(frac)]
        )
    return buf.getvalue()


def grid_from_csv(text):
    reader = csv.DictReader(io.StringIO(text))
    axes = tuple(reader.fieldnames[:-3])
    return DetectionGrid.from_rows(axes, list(reader))


def emit_report(grid, path, format=None):
    """Write ``grid`` as JSON or long-format CSV; format defaults from the file suffix."""
    path = Path(path)
    fmt = format or ("csv" if path.suffix.lower() == ".csv" else "json")
    if fmt == "csv":
        text = grid_to_csv(grid)
    elif fmt == "json":
        text = json.dumps(grid.to_dict(), indent=1) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path.write_text(text, encoding="utf-8")
    return path


# -- experiments -----------------------------------------------------------


def _load(cfg, data):
    if data is None:
        if cfg.data is None:
            raise ValueError("no dataset given: set 'data' in the config or pass one in")
        data = load_dataset(cfg.data, cfg.schema)
    if cfg.drop_low_variance:
        data = drop_low_variance(data, cfg.drop_low_variance)
    return data


def split_seed(master_seed, b):
    return derive_seed(master_seed, "split", b)


def selected_splits(cfg):
    rng = make_rng(derive_seed(cfg.master_seed, "select"))
    return sorted(int(b) for b in rng.choice(cfg.num_splits_total, size=cfg.num_splits_selected, replace=False))


def goal1_seeds(cfg):
    """Every seed a Goal 1 run draws, keyed by its labels."""
    out = {}
    m = cfg.master_seed
    for b in range(cfg.num_splits_total):
        out[("split", b)] = split_seed(m, b)
        for j in range(cfg.num_resamples):
            out[("resample", b, j)] = derive_seed(m, "resample", b, j)
            for s in cfg.settings:
                for c in cfg.grid_c:
                    for r in cfg.grid_r:
                        out[("permute", s, b, j, r, c)] = derive_seed(m, "permute", s, b, j, r, c)
    return out


def _goal1_split(args):
    cfg, data, b = args
    grid = DetectionGrid(GOAL1_AXES)
    m = cfg.master_seed
    pair = stratified_split(data, split_seed(m, b), split_index=b)
    try:
        slices = find_weak_slices(pair.baseline, cfg.slice_finder)
        if slices.K == 0:
            raise SliceDriftError("no weak slices found")
    except SliceDriftError as exc:
        grid.skipped.append({"split": b, "reason": str(exc)})
        return grid

    def record(key, d2):
        report = detect_drift(slices, d2, DISTRIBUTION_CHANGE, max(cfg.alphas), cfg.continuity)
        for a in cfg.alphas:
            grid.add(key + (a,), report.detected_at(a))

    for j in range(cfg.num_resamples):
        d2 = resample_rows(pair.deployment, derive_seed(m, "resample", b, j))
        record((NO_PERMUTATION, 0.0, 0.0), d2)
        for s in cfg.settings:
            for c in cfg.grid_c:
                for r in cfg.grid_r:
                    pcfg = PermutationConfig.for_setting(
                        s, r, c, seed=derive_seed(m, "permute", s, b, j, r, c),
                        force_different=cfg.force_different,
                    )
                    try:
                        d2p = permute_distort(d2, pcfg)
                    except SliceDriftError as exc:
                        grid.skipped.append({"split": b, "resample": j, "setting": s, "r": r, "c": c, "reason": str(exc)})
                        continue
                    record((s, c, r), d2p)
    log.info("goal1 split %d done (K=%d)", b, slices.K)
    return grid


def _run_tasks(fn, tasks, workers):
    out = []
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out.extend(pool.map(fn, tasks))
    else:
        out.extend(fn(t) for t in tasks)
    return out


def run_goal1(cfg, data=None):
    """Run the permutation-distortion experiment; returns a grid over (setting, c, r, alpha)."""
    data = _load(cfg, data)
    grid = DetectionGrid(GOAL1_AXES)
    tasks = [(cfg, data, b) for b in selected_splits(cfg)]
    for part in _run_tasks(_goal1_split, tasks, cfg.workers):
        grid.merge(part)
    return grid


def _goal2_split(args):
    cfg, data, b = args
    grid = DetectionGrid(GOAL2_AXES)
    m = cfg.master_seed
    pair = stratified_split(data, split_seed(m, b), split_index=b)
    try:
        slices = find_weak_slices(pair.baseline, cfg.slice_finder)
        if slices.K == 0:
            raise SliceDriftError("no weak slices found")
    except SliceDriftError as exc:
        grid.skipped.append({"split": b, "reason": str(exc)})
        return grid
    for k in cfg.multipliers:
        try:
            d2 = rebalance_mcr(pair.deployment, RebalanceConfig(k, derive_seed(m, "rebalance", b, k)))
        except SliceDriftError as exc:
            grid.skipped.append({"split": b, "k": k, "reason": str(exc)})
            continue
        report = detect_drift(slices, d2, MCR_DEGRADATION, max(cfg.alphas), cfg.continuity)
        for a in cfg.alphas:
            grid.add((k, a), report.detected_at(a))
    log.info("goal2 split %d done (K=%d)", b, slices.K)
    return grid


def run_goal2(cfg, data=None):
    """Run the rebalancing experiment; returns a grid over (k, alpha)."""
    data = _load(cfg, data)
    grid = DetectionGrid(GOAL2_AXES)
    tasks = [(cfg, data, b) for b in range(cfg.num_splits)]
    for part in _run_tasks(_goal2_split, tasks, cfg.workers):
        grid.merge(part)
    return grid
