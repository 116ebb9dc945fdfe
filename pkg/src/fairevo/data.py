"""Tabular datasets, sensitive-group partitions, seeded splits and a synthetic
biased-data generator."""
from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DataError

log = logging.getLogger(__name__)

MISSING = {"", "na", "nan", "null", "none", "?"}


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    sensitive: dict[str, np.ndarray]
    column_names: list[str]

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        n = X.shape[0]
        if n < 2:
            raise DataError(f"need at least 2 samples, got {n}")
        if y.shape != (n,):
            raise DataError(f"labels length {y.shape} does not match {n} rows")
        if not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        if not self.sensitive:
            raise DataError("at least one sensitive column is required")
        for name, col in self.sensitive.items():
            if len(col) != n:
                raise DataError(f"sensitive column {name!r} has {len(col)} rows, expected {n}")
        if len(self.column_names) != X.shape[1]:
            raise DataError("column_names must name every feature column")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y.astype(np.int64))
        object.__setattr__(
            self, "sensitive", {k: np.asarray(v).astype(str) for k, v in self.sensitive.items()}
        )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            {k: v[idx] for k, v in self.sensitive.items()},
            list(self.column_names),
        )


@dataclass(frozen=True)
class GroupPartition:
    """Sample-to-group map plus the privileged/unprivileged split.

    ``group_of[i]`` is a dense id in ``range(len(group_sizes))``;
    ``privileged_group[g]`` says whether group ``g`` is on the privileged side.
    """

    group_of: np.ndarray
    group_sizes: np.ndarray
    privileged_group: np.ndarray
    labels: list[tuple[str, ...]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def n_groups(self) -> int:
        return len(self.group_sizes)

    @property
    def privileged(self) -> np.ndarray:
        """Per-sample mask of the privileged side."""
        return self.privileged_group[self.group_of]

    def subset(self, idx) -> GroupPartition:
        gid = self.group_of[np.asarray(idx)]
        present = np.unique(gid)
        remap = np.full(self.n_groups, -1, dtype=np.int64)
        remap[present] = np.arange(len(present))
        return GroupPartition(
            remap[gid],
            np.bincount(remap[gid], minlength=len(present)),
            self.privileged_group[present],
            [self.labels[g] for g in present] if self.labels else [],
        )


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, ...]
    seed: int = 0
    part_names: tuple[str, ...] = ()

    def __post_init__(self):
        ratios = tuple(float(r) for r in self.ratios)
        if not ratios or any(r <= 0 for r in ratios):
            raise ConfigurationError(f"split ratios must be positive, got {ratios}")
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise ConfigurationError(f"split ratios must sum to 1, got {sum(ratios)!r}")
        names = tuple(self.part_names) or _default_part_names(len(ratios))
        if len(names) != len(ratios):
            raise ConfigurationError("part_names must match ratios")
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "part_names", names)


def _default_part_names(k):
    if k == 3:
        return ("train", "validation", "test")
    if k == 4:
        return ("train", "validation", "ensemble", "test")
    return tuple(f"part{i}" for i in range(k))


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _parse_float(text):
    try:
        return float(text)
    except ValueError:
        return None


def bucket_label(value: float, thresholds: Sequence[float]) -> str:
    """Interval label of ``value`` for sorted ``thresholds`` (left-closed bins)."""
    t = sorted(thresholds)
    k = int(np.searchsorted(t, value, side="right"))
    if k == 0:
        return f"<{t[0]:g}"
    if k == len(t):
        return f">={t[-1]:g}"
    return f"[{t[k - 1]:g},{t[k]:g})"


def load_csv(
    path,
    label_col: str,
    sensitive_cols: Sequence[str],
    bucket_thresholds: Mapping[str, Sequence[float]] | None = None,
    include_sensitive: bool = True,
) -> Dataset:
    """Read a headed, comma-separated UTF-8 file into a :class:`Dataset`.

    Numeric columns become float features (missing cells imputed with the
    column mean); other columns are one-hot encoded. Rows with a missing label
    or sensitive value are dropped. Numeric sensitive columns listed in
    ``bucket_thresholds`` are bucketed for grouping but keep their raw value as
    a feature.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"no such file: {path}")
    bucket_thresholds = dict(bucket_thresholds or {})
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append([c.strip() for c in row])

    for col in [label_col, *sensitive_cols, *bucket_thresholds]:
        if col not in header:
            raise ConfigurationError(f"column {col!r} not found in {path}")
    if not sensitive_cols:
        raise ConfigurationError("at least one sensitive column is required")
    pos = {h: i for i, h in enumerate(header)}

    kept = []
    for row in rows:
        needed = [row[pos[label_col]]] + [row[pos[c]] for c in sensitive_cols]
        if any(v.lower() in MISSING for v in needed):
            continue
        kept.append(row)
    if len(kept) < len(rows):
        log.warning("dropped %d rows with missing label or sensitive value", len(rows) - len(kept))
    if len(kept) < 2:
        raise DataError(f"{path}: fewer than 2 usable rows")

    labels = []
    for row in kept:
        v = _parse_float(row[pos[label_col]])
        if v not in (0.0, 1.0):
            raise DataError(f"label {row[pos[label_col]]!r} is not 0/1")
        labels.append(int(v))

    sensitive = {}
    for col in sensitive_cols:
        raw = [row[pos[col]] for row in kept]
        if col in bucket_thresholds:
            vals = [_parse_float(v) for v in raw]
            if any(v is None for v in vals):
                raise DataError(f"sensitive column {col!r} has non-numeric values but bucket thresholds")
            raw = [bucket_label(v, bucket_thresholds[col]) for v in vals]
        sensitive[col] = np.array(raw)

    blocks, names = [], []
    for col in header:
        if col == label_col:
            continue
        if col in sensitive_cols and not include_sensitive:
            continue
        raw = [row[pos[col]] for row in kept]
        parsed = [None if v.lower() in MISSING else _parse_float(v) for v in raw]
        numeric = all(p is not None or v.lower() in MISSING for p, v in zip(parsed, raw))
        if numeric and col in sensitive_cols and col not in bucket_thresholds:
            # a numeric code used as a category: treat as categorical
            numeric = False
        if numeric:
            vals = np.array([np.nan if p is None else p for p in parsed])
            if np.isnan(vals).all():
                continue
            vals[np.isnan(vals)] = np.nanmean(vals)
            blocks.append(vals[:, None])
            names.append(col)
        else:
            cats = sorted({v for v in raw if v.lower() not in MISSING})
            onehot = np.array([[v == c for c in cats] for v in raw], dtype=np.float64)
            blocks.append(onehot.reshape(len(raw), len(cats)))
            names.extend(f"{col}={c}" for c in cats)

    X = np.hstack(blocks) if blocks else np.zeros((len(kept), 0))
    return Dataset(X, np.array(labels), sensitive, names)


def write_csv(ds: Dataset, path, label_col: str = "label") -> None:
    """Write features, label and sensitive columns; floats use ``repr`` so a
    reload is exact."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*ds.column_names, label_col, *ds.sensitive])
        sens = list(ds.sensitive.values())
        for i in range(ds.n):
            w.writerow([*(repr(float(v)) for v in ds.features[i]), int(ds.labels[i]), *(s[i] for s in sens)])


# ---------------------------------------------------------------------------
# groups and splits
# ---------------------------------------------------------------------------

def make_groups(ds: Dataset, attrs: Sequence[str], privileged_values: Sequence[str]) -> GroupPartition:
    """Cross-product groups over ``attrs``; the privileged side is the joint
    category matching every entry of ``privileged_values``."""
    attrs = list(attrs)
    if not attrs:
        raise ConfigurationError("make_groups needs at least one attribute")
    for a in attrs:
        if a not in ds.sensitive:
            raise ConfigurationError(f"unknown sensitive attribute {a!r}")
    if len(privileged_values) != len(attrs):
        raise ConfigurationError("privileged_values needs one value per attribute")
    privileged_values = tuple(str(v) for v in privileged_values)

    cols = [ds.sensitive[a] for a in attrs]
    levels = [sorted(set(c.tolist())) for c in cols]
    combos = list(itertools.product(*levels))
    index = {c: i for i, c in enumerate(combos)}
    raw_gid = np.array([index[tuple(c[i] for c in cols)] for i in range(ds.n)], dtype=np.int64)
    counts = np.bincount(raw_gid, minlength=len(combos))

    warnings = [f"group {combos[g]} has no members and was dropped" for g in np.flatnonzero(counts == 0)]
    for w in warnings:
        log.warning(w)
    present = np.flatnonzero(counts > 0)
    remap = np.full(len(combos), -1, dtype=np.int64)
    remap[present] = np.arange(len(present))
    labels = [combos[g] for g in present]
    return GroupPartition(
        remap[raw_gid],
        counts[present],
        np.array([lab == privileged_values for lab in labels], dtype=bool),
        labels,
        warnings,
    )


def split_sizes(n: int, ratios: Sequence[float]) -> list[int]:
    sizes = [math.floor(r * n + 1e-9) for r in ratios]
    sizes[0] += n - sum(sizes)
    return sizes


def split_indices(labels: np.ndarray, spec: SplitSpec) -> list[np.ndarray]:
    """Label-stratified, seeded index split with exact floor-rounded sizes."""
    labels = np.asarray(labels)
    n = len(labels)
    sizes = split_sizes(n, spec.ratios)
    if min(sizes) <= 0:
        raise DataError(f"split of {n} samples by {spec.ratios} leaves an empty part: {sizes}")
    rng = np.random.default_rng(spec.seed)
    # interleave the classes by within-class quantile so every contiguous
    # chunk of the ordering has roughly the global label balance
    key = np.empty(n)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        perm = rng.permutation(idx)
        key[perm] = (np.arange(len(perm)) + rng.random(len(perm))) / len(perm)
    order = np.argsort(key, kind="stable")
    bounds = np.cumsum([0, *sizes])
    return [np.sort(order[bounds[i]:bounds[i + 1]]) for i in range(len(sizes))]


def split(ds: Dataset, spec: SplitSpec) -> list[Dataset]:
    return [ds.subset(idx) for idx in split_indices(ds.labels, spec)]


def standardize(reference: Dataset, *others: Dataset) -> list[Dataset]:
    """Z-score every dataset with the mean/std of ``reference``."""
    mu = reference.features.mean(axis=0)
    sd = reference.features.std(axis=0)
    sd[sd == 0] = 1.0
    out = []
    for ds in (reference, *others):
        out.append(Dataset((ds.features - mu) / sd, ds.labels, ds.sensitive, ds.column_names))
    return out


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

def synth_biased(n: int, d: int, bias: float, seed: int) -> Dataset:
    """Binary-group dataset whose positive rate differs by ``bias`` between groups.

    Group ``s`` is a fair coin. Labels are Bernoulli(0.5 +- bias/2) with the
    privileged value ``"1"`` getting the higher rate. Features are a noisy
    linear embedding of the label plus a weaker group direction.
    """
    if n < 20 or d < 2:
        raise ConfigurationError("synth_biased needs n >= 20 and d >= 2")
    if not 0.0 <= bias <= 1.0:
        raise ConfigurationError("bias must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    s = rng.integers(0, 2, size=n)
    rate = np.where(s == 1, 0.5 + bias / 2, 0.5 - bias / 2)
    y = (rng.random(n) < rate).astype(np.int64)
    label_dir = rng.normal(size=d)
    label_dir /= np.linalg.norm(label_dir)
    group_dir = rng.normal(size=d)
    group_dir /= np.linalg.norm(group_dir)
    X = (
        np.outer(2 * y - 1, label_dir) * 1.0
        + np.outer(2 * s - 1, group_dir) * 0.5
        + rng.normal(size=(n, d))
    )
    return Dataset(X, y, {"s": s.astype(str)}, [f"x{i}" for i in range(d)])
