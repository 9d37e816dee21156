"""Feature matrices, train-only normalisation, fusion, correlation-based
selection and LLD-level ranking."""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acoustic, prosody

STD_FLOOR = 1e-12

SOURCE_LLD = {**acoustic.SOURCE_LLD, **prosody.SOURCE_LLD}

# Coarser grouping used for the per-family ranking table.
LLD_FAMILY = {
    **{f"mfcc{i}": "mfcc" for i in range(acoustic.N_MFCC)},
    **{f"logMelFreqBand{i}": "logMelFreqBand" for i in range(acoustic.N_LOGMEL)},
    **{f"lspFreq{i}": "lspFreq" for i in range(acoustic.LPC_ORDER)},
}


class FeatureError(ValueError):
    pass


@dataclass(eq=False)
class FeatureMatrix:
    values: np.ndarray  # (n_rows, n_features)
    names: tuple
    labels: np.ndarray  # 1 = Distress, 0 = Normal
    groups: np.ndarray  # subject id per row
    row_ids: tuple = ()
    feature_sets: tuple = ()  # "acoustic" / "prosodic" per column
    dropped: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            self.values = self.values.reshape(len(self.labels), -1)
        self.names = tuple(self.names)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.groups = np.asarray(self.groups, dtype=object)
        n, d = self.values.shape
        if not self.row_ids:
            self.row_ids = tuple(str(i) for i in range(n))
        self.row_ids = tuple(self.row_ids)
        if not self.feature_sets:
            self.feature_sets = tuple(_guess_set(nm) for nm in self.names)
        self.feature_sets = tuple(self.feature_sets)
        if len(self.names) != d or len(self.feature_sets) != d:
            raise FeatureError("column metadata does not match the value matrix")
        if not (self.labels.size == self.groups.size == len(self.row_ids) == n):
            raise FeatureError("row metadata does not match the value matrix")

    @property
    def shape(self):
        return self.values.shape

    def rows(self, index):
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        return FeatureMatrix(self.values[index], self.names, self.labels[index],
                             self.groups[index], tuple(self.row_ids[i] for i in index),
                             self.feature_sets)

    def columns(self, names):
        pos = {n: i for i, n in enumerate(self.names)}
        try:
            idx = [pos[n] for n in names]
        except KeyError as exc:
            raise FeatureError(f"unknown feature {exc.args[0]!r}") from None
        return FeatureMatrix(self.values[:, idx], tuple(names), self.labels, self.groups,
                             self.row_ids, tuple(self.feature_sets[i] for i in idx))

    def with_values(self, values):
        return FeatureMatrix(values, self.names, self.labels, self.groups, self.row_ids,
                             self.feature_sets)

    def write_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("segment_id",) + self.names)
            for rid, row in zip(self.row_ids, self.values):
                w.writerow([rid] + [repr(float(v)) for v in row])


def _guess_set(name):
    return "prosodic" if name in prosody.SOURCE_LLD else "acoustic"


def read_feature_csv(path):
    """Return ``(row_ids, names, values)`` from a feature dump."""
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        ids, rows = [], []
        for line in r:
            ids.append(line[0])
            rows.append([float(v) for v in line[1:]])
    values = np.array(rows, dtype=np.float64).reshape(len(ids), len(header) - 1)
    return tuple(ids), tuple(header[1:]), values


@dataclass
class Normalizer:
    names: tuple
    mean: np.ndarray
    std: np.ndarray

    def transform(self, m):
        return apply_normalizer(self, m)


def fit_normalizer(train):
    if train.values.shape[0] < 2:
        raise FeatureError("normalisation needs at least two training rows")
    mean = train.values.mean(axis=0)
    std = np.maximum(train.values.std(axis=0), STD_FLOOR)
    return Normalizer(train.names, mean, std)


def apply_normalizer(norm, m):
    if tuple(m.names) != tuple(norm.names):
        raise FeatureError("feature names differ from the fitted normaliser")
    return m.with_values((m.values - norm.mean) / norm.std)


def fuse(acoustic_m, prosodic_m):
    """Concatenate two matrices column-wise; rows must be in identical order."""
    if acoustic_m.row_ids != prosodic_m.row_ids:
        raise FeatureError("row order differs between the matrices being fused")
    if prosodic_m.values.shape[1] == 0:
        return acoustic_m
    if set(acoustic_m.names) & set(prosodic_m.names):
        raise FeatureError("duplicate feature names across fused sets")
    return FeatureMatrix(
        np.hstack([acoustic_m.values, prosodic_m.values]),
        acoustic_m.names + prosodic_m.names,
        acoustic_m.labels, acoustic_m.groups, acoustic_m.row_ids,
        acoustic_m.feature_sets + prosodic_m.feature_sets,
    )


# ---------------------------------------------------------------------------
# selection


@dataclass
class SelectionResult:
    kept: tuple  # names in rank order
    relevance: dict  # every feature -> |r| with the label
    feature_sets: dict  # kept name -> "acoustic"/"prosodic"
    redundancy_cap: float
    filled_by_relevance: int = 0

    def source_lld(self, name):
        return SOURCE_LLD.get(name, name)

    def write_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("rank", "feature_name", "relevance", "source_lld", "set"))
            for i, name in enumerate(self.kept, 1):
                w.writerow((i, name, repr(float(self.relevance[name])),
                            self.source_lld(name), self.feature_sets[name]))


def _standardize(values):
    c = values - values.mean(axis=0)
    sd = np.sqrt(np.mean(c**2, axis=0))
    return c, sd


def relevance_scores(values, labels):
    """Absolute point-biserial correlation of each column with the labels."""
    y = np.asarray(labels, dtype=np.float64)
    yc = y - y.mean()
    ysd = np.sqrt(np.mean(yc**2))
    c, sd = _standardize(values)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (c.T @ yc) / values.shape[0] / (sd * ysd)
    return np.where(sd > STD_FLOOR, np.abs(r), 0.0)


def select_correlation(train, k, redundancy_cap=0.9):
    """Greedy relevance-ranked selection with a pairwise redundancy filter.

    Features are visited by descending relevance (ties by name); a candidate
    is skipped when its absolute correlation with an already kept feature
    exceeds ``redundancy_cap``. If the filter leaves fewer than ``k``
    features, the remaining slots are filled in relevance order.
    """
    n_rows, n_feat = train.values.shape
    if k > n_feat:
        raise FeatureError(f"cannot keep {k} of {n_feat} features")
    if k < 1:
        raise FeatureError("k must be >= 1")
    if np.unique(train.labels).size != 2:
        raise FeatureError("selection needs both classes in the training rows")
    rel = relevance_scores(train.values, train.labels)
    c, sd = _standardize(train.values)
    live = sd > STD_FLOOR
    if not live.any():
        raise FeatureError("every feature is constant on the training rows")
    z = np.zeros_like(c)
    z[:, live] = c[:, live] / sd[live]

    names = train.names
    order = sorted(range(n_feat), key=lambda i: (-round(float(rel[i]), 12), names[i]))
    kept = []
    kept_z = np.empty((n_rows, k))
    for i in order:
        if len(kept) == k:
            break
        if not live[i]:
            continue
        if kept and redundancy_cap < 1.0:
            corr = np.abs(z[:, i] @ kept_z[:, : len(kept)]) / n_rows
            if np.any(corr > redundancy_cap):
                continue
        kept_z[:, len(kept)] = z[:, i]
        kept.append(i)
    filled = 0
    if len(kept) < k:
        taken = set(kept)
        for i in order:
            if len(kept) == k:
                break
            if i not in taken:
                kept.append(i)
                filled += 1
    return SelectionResult(
        kept=tuple(names[i] for i in kept),
        relevance={names[i]: float(rel[i]) for i in range(n_feat)},
        feature_sets={names[i]: train.feature_sets[i] for i in kept},
        redundancy_cap=redundancy_cap,
        filled_by_relevance=filled,
    )


@dataclass
class LldRank:
    rank: int
    lld: str
    kept_count: int
    best_relevance: float


def rank_llds(sel, level="lld"):
    """Map kept features to their source LLD and rank LLDs by their best member.

    ``level="family"`` merges the MFCC, log-mel and LSP coefficients into one
    entry each.
    """
    if level not in ("lld", "family"):
        raise ValueError("level must be 'lld' or 'family'")
    best, count = {}, {}
    for name in sel.kept:
        lld = sel.source_lld(name)
        if level == "family":
            lld = LLD_FAMILY.get(lld, lld)
        r = sel.relevance[name]
        count[lld] = count.get(lld, 0) + 1
        best[lld] = max(best.get(lld, -1.0), r)
    order = sorted(best, key=lambda l: (-round(best[l], 12), l))
    return [LldRank(i, l, count[l], best[l]) for i, l in enumerate(order, 1)]


def write_rank_csv(table, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rank", "lld", "kept_count", "best_relevance"))
        for row in table:
            w.writerow((row.rank, row.lld, row.kept_count, repr(float(row.best_relevance))))
