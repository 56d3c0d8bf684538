"""CSV input/output, train/test fold plans and a synthetic conflict-alert generator."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np
from sklearn.model_selection import StratifiedKFold, StratifiedShuffleSplit

from .core import BDTError, ConfigError, Dataset


class LoadError(BDTError):
    """Base class for CSV loading problems."""


class MissingFileError(LoadError):
    pass


class EmptyFileError(LoadError):
    pass


class RaggedRowError(LoadError):
    pass


class MissingValueError(LoadError):
    pass


class NonNumericValueError(LoadError):
    pass


class NonFiniteValueError(LoadError):
    pass


class UnknownLabelColumnError(LoadError):
    pass


class LabelError(LoadError):
    pass


class StratificationError(BDTError):
    pass


def read_table(path, label_column: str | None = None):
    """Parse a headed CSV into ``(feature_names, X, raw_labels)``.

    ``raw_labels`` is None when ``label_column`` is None.  Row numbers in
    error messages count data rows from 1, column numbers count from 1.
    """
    if not os.path.isfile(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EmptyFileError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if label_column is not None and label_column not in header:
        raise UnknownLabelColumnError(f"{path}: label column {label_column!r} not in header {header}")
    li = header.index(label_column) if label_column is not None else None
    names = [h for i, h in enumerate(header) if i != li]
    X = np.empty((len(body), len(names)))
    labels = []
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise RaggedRowError(f"{path}: row {r} has {len(row)} fields, header has {len(header)}")
        j = 0
        for c, cell in enumerate(row):
            if c == li:
                labels.append(cell.strip())
                continue
            cell = cell.strip()
            if cell == "":
                raise MissingValueError(f"{path}: missing value at row {r}, column {c + 1} ({header[c]})")
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericValueError(
                    f"{path}: non-numeric value {cell!r} at row {r}, column {c + 1} ({header[c]})"
                ) from None
            if not math.isfinite(v):
                raise NonFiniteValueError(f"{path}: non-finite value at row {r}, column {c + 1} ({header[c]})")
            X[r - 1, j] = v
            j += 1
    return names, X, (labels if li is not None else None)


def encode_labels(raw: list[str]) -> tuple[np.ndarray, int, tuple[str, ...] | None]:
    """Integer labels pass through; text labels map to 0.. by lexical order."""
    if any(s == "" for s in raw):
        r = next(i for i, s in enumerate(raw) if s == "") + 1
        raise LabelError(f"missing label at row {r}")
    try:
        ints = [int(s) for s in raw]
    except ValueError:
        names = tuple(sorted(set(raw)))
        if len(names) < 2:
            raise LabelError("label column needs at least two distinct values") from None
        index = {s: i for i, s in enumerate(names)}
        return np.array([index[s] for s in raw], dtype=np.intp), len(names), names
    y = np.array(ints, dtype=np.intp)
    if y.min() < 0:
        raise LabelError("integer labels must be non-negative")
    return y, max(int(y.max()) + 1, 2), None


def load_csv(path, label_column: str) -> Dataset:
    names, X, raw = read_table(path, label_column)
    y, C, class_names = encode_labels(raw)
    try:
        return Dataset(X, y, names, C, label_column, class_names)
    except ValueError as exc:
        raise LoadError(f"{path}: {exc}") from None


def write_csv(data: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(data.feature_names) + [data.label_name])
        for x, y in zip(data.features, data.labels):
            label = data.class_names[y] if data.class_names is not None else int(y)
            w.writerow([repr(float(v)) for v in x] + [label])


# synthetic conflict-alert data -------------------------------------------

STCA_FEATURES = tuple(f"X{i}" for i in range(1, 13))
STCA_DESCRIPTIONS = (
    "dx", "dy", "dz", "3-d distance",
    "vx1", "vy1", "vz1", "vx2", "vy2", "vz2",
    "t1 since last plot", "t2 since last plot",
)
RADAR_PERIOD = 6.0


@dataclass(frozen=True)
class SynthConfig:
    """Settings for :func:`generate_synthetic_stca`.

    Units are metres, metres per second and seconds.  ``noise_std`` is the
    per-axis position jitter and ``velocity_noise_std`` the per-axis jitter on
    each aircraft's velocity.
    With ``look_ahead > 0`` a cycle is labelled an alert when the true
    separation drops below ``alert_distance`` at any time in the next
    ``look_ahead`` seconds of straight-line flight; 0 labels by the current
    separation only.  The two time-since-plot features are uniform on ``[0, RADAR_PERIOD)``
    and carry no label signal.
    """

    pair_count: int = 60
    cycles_per_pair: int = 40
    alert_distance: float = 1852.0
    noise_std: float = 60.0
    velocity_noise_std: float = 2.0
    look_ahead: float = 0.0
    label_flip_rate: float = 0.03
    seed: int = 0

    def __post_init__(self):
        if self.pair_count < 1 or self.cycles_per_pair < 1:
            raise ConfigError("pair_count and cycles_per_pair must be positive")
        if self.pair_count * self.cycles_per_pair < 100:
            raise ConfigError("need at least 100 rows (pair_count * cycles_per_pair)")
        if not 0 <= self.label_flip_rate < 0.5:
            raise ConfigError("label_flip_rate must lie in [0, 0.5)")
        if self.noise_std < 0 or self.velocity_noise_std < 0 or self.alert_distance <= 0:
            raise ConfigError("noise levels must be >= 0 and alert_distance > 0")
        if self.look_ahead < 0:
            raise ConfigError("look_ahead must be >= 0")


def simulate_pairs(cfg: SynthConfig) -> dict[str, np.ndarray]:
    """Constant-velocity encounters sampled once per radar cycle.

    Each pair passes its point of closest approach somewhere inside its
    observation window.  Relative horizontal speed (5..45 m/s), heading,
    horizontal miss distance (0..1.6 alert distances) and vertical offset
    (within 0.4 alert distances) are uniform per pair; own speed is uniform in
    60..130 m/s with climb rates in -5..5 m/s.  Returns the noise-free
    separation vector and velocities alongside the observed features.
    """
    rng = np.random.default_rng(cfg.seed)
    P, c, A = cfg.pair_count, cfg.cycles_per_pair, cfg.alert_distance
    speed = rng.uniform(5.0, 45.0, P)
    heading = rng.uniform(0.0, 2 * np.pi, P)
    v_rel = np.column_stack([speed * np.cos(heading), speed * np.sin(heading), rng.uniform(-2.0, 2.0, P)])
    miss = rng.uniform(0.0, 1.6 * A, P)
    p_ca = np.column_stack([-miss * np.sin(heading), miss * np.cos(heading), rng.uniform(-0.4 * A, 0.4 * A, P)])
    shift = rng.uniform(-c / 4, c / 4, P)
    own = rng.uniform(60.0, 130.0, P)
    own_heading = rng.uniform(0.0, 2 * np.pi, P)
    v1 = np.column_stack([own * np.cos(own_heading), own * np.sin(own_heading), rng.uniform(-5.0, 5.0, P)])
    v2 = v1 - v_rel

    t = RADAR_PERIOD * (np.arange(c)[None, :] - c / 2 + shift[:, None])  # (P, c)
    delta = p_ca[:, None, :] + v_rel[:, None, :] * t[:, :, None]  # (P, c, 3)
    delta = delta.reshape(-1, 3)
    vel1 = np.repeat(v1, c, axis=0)
    vel2 = np.repeat(v2, c, axis=0)
    n = P * c

    sd = cfg.noise_std
    obs_delta = delta + rng.normal(0.0, sd, (n, 3)) if sd > 0 else delta.copy()
    vsd = cfg.velocity_noise_std
    obs_v1 = vel1 + rng.normal(0.0, vsd, (n, 3)) if vsd > 0 else vel1.copy()
    obs_v2 = vel2 + rng.normal(0.0, vsd, (n, 3)) if vsd > 0 else vel2.copy()

    t1 = rng.uniform(0.0, RADAR_PERIOD, n)
    t2 = rng.uniform(0.0, RADAR_PERIOD, n)
    true_dist = np.linalg.norm(delta, axis=1)
    rel = np.repeat(v_rel, c, axis=0)
    # time of closest approach within the look-ahead window
    s = np.clip(-(delta * rel).sum(axis=1) / (rel * rel).sum(axis=1), 0.0, cfg.look_ahead)
    min_dist = np.linalg.norm(delta + rel * s[:, None], axis=1)
    clean = (min_dist < A).astype(np.intp)
    flip = rng.random(n) < cfg.label_flip_rate
    labels = np.where(flip, 1 - clean, clean)
    X = np.column_stack([
        obs_delta,
        np.sqrt((obs_delta ** 2).sum(axis=1)),
        obs_v1,
        obs_v2,
        t1,
        t2,
    ])
    return {
        "features": X,
        "labels": labels,
        "clean_labels": clean,
        "true_distance": true_dist,
        "min_distance": min_dist,
        "pair": np.repeat(np.arange(P), c),
    }


def generate_synthetic_stca(cfg: SynthConfig = SynthConfig()) -> Dataset:
    """Twelve conflict-alert features per radar cycle with an ``alert`` label.

    The label is 1 when the true separation is below ``alert_distance`` (at
    any point of the look-ahead window, see :class:`SynthConfig`), then
    flipped with probability ``label_flip_rate``.  ``X4`` is always the norm
    of the observed ``X1..X3``.  ``X11`` and ``X12`` are independent of
    everything else.
    """
    sim = simulate_pairs(cfg)
    return Dataset(sim["features"], sim["labels"], STCA_FEATURES, 2, "alert")


# fold plans ---------------------------------------------------------------

FOLD_STRATEGIES = ("repeated-halves", "stratified-kfold")


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[tuple[np.ndarray, np.ndarray], ...]
    strategy: str

    def __len__(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


def make_folds(data: Dataset, fold_count: int = 5, strategy: str = "repeated-halves", seed: int = 0) -> FoldPlan:
    """Stratified train/test index pairs.

    ``repeated-halves`` draws ``fold_count`` independent 50/50 splits;
    ``stratified-kfold`` partitions the rows into disjoint test folds.
    """
    if strategy not in FOLD_STRATEGIES:
        raise ConfigError(f"strategy must be one of {FOLD_STRATEGIES}")
    if fold_count < 2:
        raise ConfigError("fold_count must be at least 2")
    if data.n < 2 * fold_count:
        raise ConfigError(f"need at least {2 * fold_count} rows for {fold_count} folds")
    counts = np.bincount(data.labels, minlength=data.class_count)
    present = counts[counts > 0]
    if present.min() < fold_count:
        c = int(np.flatnonzero((counts > 0) & (counts < fold_count))[0])
        raise StratificationError(f"class {c} has {counts[c]} rows, fewer than {fold_count} folds")
    rs = int(seed) % (2 ** 32)
    if strategy == "repeated-halves":
        splitter = StratifiedShuffleSplit(n_splits=fold_count, test_size=0.5, random_state=rs)
    else:
        splitter = StratifiedKFold(n_splits=fold_count, shuffle=True, random_state=rs)
    dummy = np.zeros((data.n, 1))
    folds = tuple(
        (np.sort(tr).astype(np.intp), np.sort(te).astype(np.intp))
        for tr, te in splitter.split(dummy, data.labels)
    )
    return FoldPlan(folds, strategy)
