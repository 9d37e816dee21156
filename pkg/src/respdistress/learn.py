"""Patient-independent fold planning, a linear SVM trained by dual coordinate
descent, classification metrics and the cross-validation loop."""

import hashlib
import io
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .featurepipe import (FeatureMatrix, apply_normalizer, fit_normalizer,
                          select_correlation)

log = logging.getLogger(__name__)

METRICS = ("accuracy", "sensitivity", "specificity", "f1", "auc")


class FoldError(ValueError):
    pass


class MetricError(ValueError):
    pass


class TrainingError(ValueError):
    pass


def derive_seed(seed, stage):
    """Stable 63-bit stage seed from the run seed and a stage name."""
    digest = hashlib.sha256(f"{int(seed)}/{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


# ---------------------------------------------------------------------------
# folds


@dataclass(frozen=True)
class Fold:
    train_subjects: frozenset
    test_subjects: frozenset

    def test_mask(self, groups):
        return np.array([g in self.test_subjects for g in groups])

    def train_mask(self, groups):
        return np.array([g in self.train_subjects for g in groups])


@dataclass
class FoldPlan:
    folds: list
    seed: int
    n_folds: int = 3

    def test_fractions(self, groups):
        groups = list(groups)
        return [float(f.test_mask(groups).mean()) for f in self.folds]

    def check(self):
        for i, f in enumerate(self.folds):
            if f.train_subjects & f.test_subjects:
                raise FoldError(f"fold {i + 1}: subjects in both train and test")
        return self


def _subject_table(groups, labels):
    subj = {}
    for g, y in zip(groups, labels):
        cnt, lab = subj.get(g, (0, y))
        if lab != y:
            raise FoldError(f"subject {g!r} has rows from both classes")
        subj[g] = (cnt + 1, y)
    return subj


def make_folds(groups, labels, n_folds=3, seed=0, max_sweeps=50):
    """Assign whole subjects to ``n_folds`` disjoint test partitions.

    Subjects are shuffled with the seed, placed greedily (largest first) and
    then improved by single moves and pairwise swaps so that every fold's
    test set holds close to ``1 / n_folds`` of the segments of each class.
    """
    if n_folds < 2:
        raise FoldError("n_folds must be >= 2")
    table = _subject_table(list(groups), list(labels))
    classes = sorted({y for _, y in table.values()})
    if len(table) < n_folds:
        raise FoldError(f"{len(table)} subjects cannot fill {n_folds} disjoint test folds")

    rng = np.random.default_rng(derive_seed(seed, "folds"))
    names = sorted(table)
    names = [names[i] for i in rng.permutation(len(names))]
    counts = np.array([table[s][0] for s in names], dtype=np.float64)
    cls = np.array([classes.index(table[s][1]) for s in names])
    n_cls = len(classes)
    cls_total = np.array([counts[cls == c].sum() for c in range(n_cls)])
    cls_size = np.bincount(cls, minlength=n_cls)
    total = counts.sum()

    load = np.zeros(n_folds)
    cload = np.zeros((n_folds, n_cls))
    members = np.zeros((n_folds, n_cls), dtype=int)
    assign = np.full(len(names), -1)

    def cost(ld, cl):
        return (np.sum((ld / total - 1.0 / n_folds) ** 2)
                + np.sum((cl / cls_total - 1.0 / n_folds) ** 2))

    order = sorted(range(len(names)), key=lambda i: -counts[i])  # stable: ties keep shuffle order
    # every fold first receives one subject of each class; classes with fewer
    # subjects than folds continue round-robin so no fold starts empty
    slot = 0
    for c in sorted(range(n_cls), key=lambda c: -cls_size[c]):
        for i in [i for i in order if cls[i] == c][:n_folds]:
            assign[i] = slot % n_folds
            slot += 1
    for i in order:
        if assign[i] >= 0:
            f = assign[i]
        else:
            trial = []
            for f in range(n_folds):
                ld = load.copy()
                cl = cload.copy()
                ld[f] += counts[i]
                cl[f, cls[i]] += counts[i]
                trial.append(cost(ld, cl))
            f = int(np.argmin(trial))
        assign[i] = f
        load[f] += counts[i]
        cload[f, cls[i]] += counts[i]
        members[f, cls[i]] += 1

    best = cost(load, cload)
    for _ in range(max_sweeps):
        improved = False
        for i in range(len(names)):
            a = assign[i]
            if members[a].sum() <= 1 or (members[a, cls[i]] <= 1 and cls_size[cls[i]] >= n_folds):
                continue
            for b in range(n_folds):
                if b == a:
                    continue
                load[a] -= counts[i]; load[b] += counts[i]
                cload[a, cls[i]] -= counts[i]; cload[b, cls[i]] += counts[i]
                c_new = cost(load, cload)
                if c_new < best - 1e-15:
                    best = c_new
                    assign[i] = b
                    members[a, cls[i]] -= 1
                    members[b, cls[i]] += 1
                    improved = True
                    break
                load[a] += counts[i]; load[b] -= counts[i]
                cload[a, cls[i]] += counts[i]; cload[b, cls[i]] -= counts[i]
        for i, j in itertools.combinations(range(len(names)), 2):
            a, b = assign[i], assign[j]
            if a == b or cls[i] != cls[j] or counts[i] == counts[j]:
                continue
            delta = counts[j] - counts[i]
            c = cls[i]
            load[a] += delta; load[b] -= delta
            cload[a, c] += delta; cload[b, c] -= delta
            c_new = cost(load, cload)
            if c_new < best - 1e-15:
                best = c_new
                assign[i], assign[j] = b, a
                improved = True
            else:
                load[a] -= delta; load[b] += delta
                cload[a, c] -= delta; cload[b, c] += delta
        if not improved:
            break

    everyone = frozenset(names)
    folds = []
    for f in range(n_folds):
        test = frozenset(names[i] for i in range(len(names)) if assign[i] == f)
        folds.append(Fold(everyone - test, test))
    return FoldPlan(folds, seed, n_folds).check()


# ---------------------------------------------------------------------------
# linear SVM


@dataclass
class SolverInfo:
    epochs: int
    converged: bool
    dual_objective: list
    alpha: np.ndarray
    train_margins: np.ndarray  # w.x + b for each training row at exit


@dataclass
class LinearModel:
    names: tuple
    weights: np.ndarray
    bias: float
    C: float = 1.0
    seed: int = 0
    info: SolverInfo = field(default=None, repr=False, compare=False)

    def save(self, path):
        Path(path).write_text(self.dumps())

    def dumps(self):
        buf = io.StringIO()
        buf.write("linear-svm\n")
        buf.write(f"n_features,{len(self.names)}\n")
        buf.write(f"C,{self.C!r}\n")
        buf.write(f"seed,{int(self.seed)}\n")
        for n, w in zip(self.names, self.weights):
            buf.write(f"{n},{float(w)!r}\n")
        buf.write(f"bias,{float(self.bias)!r}\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text):
        lines = text.splitlines()
        if not lines or lines[0] != "linear-svm":
            raise ValueError("not a linear-svm model file")

        def field_(line, key):
            k, _, v = line.rpartition(",")
            if k != key:
                raise ValueError(f"expected {key!r} line, got {line!r}")
            return v

        d = int(field_(lines[1], "n_features"))
        C = float(field_(lines[2], "C"))
        seed = int(field_(lines[3], "seed"))
        body = lines[4:4 + d]
        names, weights = [], []
        for line in body:
            k, _, v = line.rpartition(",")
            names.append(k)
            weights.append(float(v))
        bias = float(field_(lines[4 + d], "bias"))
        return cls(tuple(names), np.array(weights), bias, C, seed)

    @classmethod
    def load(cls, path):
        return cls.loads(Path(path).read_text())


def _signed(y):
    y = np.asarray(y)
    return np.where(y > 0, 1.0, -1.0)


def _as_array(X, names=None):
    if isinstance(X, FeatureMatrix):
        return X.values, X.names
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if names is None:
        names = tuple(f"x{i}" for i in range(X.shape[1]))
    return X, tuple(names)


def train_svm(X, y, C=1.0, seed=0, tol=1e-3, max_epochs=1000, names=None):
    """L2-regularised hinge-loss linear SVM via dual coordinate descent.

    The bias is learned as the weight of a constant feature (and therefore
    regularised). ``y`` may be {0, 1} or {-1, +1}; positive means Distress.
    """
    X, names = _as_array(X, names)
    ys = _signed(y)
    if X.shape[0] != ys.size:
        raise TrainingError("X and y lengths differ")
    if np.unique(ys).size < 2:
        raise TrainingError("training data contains a single class")
    if not np.all(np.isfinite(X)):
        raise TrainingError("non-finite training features")
    if C <= 0:
        raise TrainingError("C must be positive")

    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    YX = ys[:, None] * Xa
    qd = np.einsum("ij,ij->i", Xa, Xa)
    alpha = np.zeros(n)
    w = np.zeros(d + 1)
    rng = np.random.default_rng(seed)
    history = []
    converged = False
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        worst = 0.0
        for i in rng.permutation(n):
            row = YX[i]
            g = row @ w - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg != 0.0:
                worst = max(worst, abs(pg))
                new = min(max(a - g / qd[i], 0.0), C)
                if new != a:
                    w += (new - a) * row
                    alpha[i] = new
        history.append(float(alpha.sum() - 0.5 * (w @ w)))
        if worst < tol:
            converged = True
            break
    if not converged:
        log.warning("dual coordinate descent stopped after %d epochs without converging", epoch)
    info = SolverInfo(epoch, converged, history, alpha, Xa @ w)
    return LinearModel(names, w[:-1].copy(), float(w[-1]), float(C), int(seed), info)


def decision_values(model, X):
    if isinstance(X, FeatureMatrix):
        if tuple(X.names) != tuple(model.names):
            raise ValueError("feature names differ from the trained model")
        X = X.values
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.weights.size:
        raise ValueError("feature count differs from the trained model")
    return X @ model.weights + model.bias


def predict(decisions):
    """Distress (1) for strictly positive decisions; ties go to Normal (0)."""
    return (np.asarray(decisions) > 0).astype(np.int64)


# ---------------------------------------------------------------------------
# metrics


@dataclass
class FoldMetrics:
    accuracy: float
    sensitivity: float
    specificity: float
    f1: float
    auc: float
    tp: int = 0
    fn: int = 0
    tn: int = 0
    fp: int = 0

    def as_tuple(self):
        return tuple(getattr(self, m) for m in METRICS)


def auc_score(decisions, labels):
    """Mann-Whitney AUC with ties counted one half."""
    s = np.asarray(decisions, dtype=np.float64)
    pos = np.asarray(labels) > 0
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs both classes")
    ranks = rankdata(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def confusion_metrics(tp, fn, tn, fp):
    if tp + fn == 0 or tn + fp == 0:
        raise MetricError("metrics are undefined with a single class")
    sens = tp / (tp + fn)
    spec = tn / (tn + fp)
    acc = (tp + tn) / (tp + fn + tn + fp)
    prec = tp / (tp + fp) if tp + fp else 0.0
    f1 = 2 * prec * sens / (prec + sens) if prec + sens else 0.0
    return acc, sens, spec, f1


def evaluate(decisions, predictions, labels):
    labels = np.asarray(labels) > 0
    predictions = np.asarray(predictions) > 0
    if not (labels.size == predictions.size == np.size(decisions)):
        raise MetricError("decisions, predictions and labels differ in length")
    tp = int(np.sum(predictions & labels))
    fn = int(np.sum(~predictions & labels))
    tn = int(np.sum(~predictions & ~labels))
    fp = int(np.sum(predictions & ~labels))
    acc, sens, spec, f1 = confusion_metrics(tp, fn, tn, fp)
    return FoldMetrics(acc, sens, spec, f1, auc_score(decisions, labels), tp, fn, tn, fp)


# ---------------------------------------------------------------------------
# reports


@dataclass
class EvalReport:
    feature_set: str
    feature_size: int
    folds: list
    config: dict = field(default_factory=dict)
    std_ddof: int = 0
    notes: dict = field(default_factory=dict)
    outcomes: list = field(default_factory=list, repr=False, compare=False)

    @property
    def models(self):
        return [o.model for o in self.outcomes]

    def values(self, metric):
        return np.array([getattr(f, metric) for f in self.folds])

    def mean(self, metric):
        return float(self.values(metric).mean())

    def std(self, metric):
        v = self.values(metric)
        if v.size <= self.std_ddof:
            return 0.0
        return float(v.std(ddof=self.std_ddof))

    def to_text(self):
        lines = [f"feature_set={self.feature_set}", f"feature_size={self.feature_size}"]
        for k in sorted(self.config):
            lines.append(f"config.{k}={self.config[k]}")
        for k in sorted(self.notes):
            lines.append(f"note.{k}={self.notes[k]}")
        for i, f in enumerate(self.folds, 1):
            for m in METRICS:
                lines.append(f"fold{i}.{m}={getattr(f, m)!r}")
            lines.append(f"fold{i}.confusion=tp:{f.tp} fn:{f.fn} tn:{f.tn} fp:{f.fp}")
        for m in METRICS:
            lines.append(f"mean.{m}={self.mean(m)!r}")
            lines.append(f"std.{m}={self.std(m)!r}")
        return "\n".join(lines) + "\n"

    def to_csv(self):
        rows = ["fold," + ",".join(METRICS)]
        for i, f in enumerate(self.folds, 1):
            rows.append(f"{i}," + ",".join(repr(float(v)) for v in f.as_tuple()))
        rows.append("mean," + ",".join(repr(self.mean(m)) for m in METRICS))
        rows.append("std," + ",".join(repr(self.std(m)) for m in METRICS))
        return "\n".join(rows) + "\n"

    def table_row(self):
        """One summary row: set, size, then each metric as mean±std in percent."""
        cells = [f"{100 * self.mean(m):.1f}±{100 * self.std(m):.2f}" for m in METRICS]
        return [self.feature_set, str(self.feature_size)] + cells

    @staticmethod
    def table_header():
        return ["Feature Set", "Feat. size", "Acc. (%)", "Sen. (%)", "Spec. (%)",
                "F1 Sc. (%)", "AUC (%)"]

    def format_table(self):
        rows = [self.table_header(), self.table_row()]
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows) + "\n"


def write_report(report, out_dir, models=None):
    if models is None:
        models = report.models
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report.to_text())
    (out / "report.csv").write_text(report.to_csv())
    (out / "summary.txt").write_text(report.format_table())
    for i, m in enumerate(models, 1):
        m.save(out / f"model_fold{i}.txt")


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class FoldOutcome:
    metrics: FoldMetrics
    model: LinearModel
    selected: tuple
    normalizer: object


def run_fold(matrix, fold, select_k=0, svm_c=1.0, seed=0, redundancy_cap=0.9, index=0):
    """Fit every statistic on the fold's training rows and score its test rows."""
    train = matrix.rows(fold.train_mask(matrix.groups))
    test = matrix.rows(fold.test_mask(matrix.groups))
    norm = fit_normalizer(train)
    train_n = apply_normalizer(norm, train)
    test_n = apply_normalizer(norm, test)
    selected = train_n.names
    if select_k and select_k < len(train_n.names):
        sel = select_correlation(train_n, select_k, redundancy_cap)
        selected = sel.kept
        train_n = train_n.columns(selected)
        test_n = test_n.columns(selected)
    model = train_svm(train_n, train_n.labels, C=svm_c,
                      seed=derive_seed(seed, f"svm/fold{index + 1}"))
    dv = decision_values(model, test_n)
    metrics = evaluate(dv, predict(dv), test_n.labels)
    return FoldOutcome(metrics, model, tuple(selected), norm)


def cross_validate(matrix, plan, feature_set="acoustic", select_k=0, svm_c=1.0, seed=0,
                   redundancy_cap=0.9, std_ddof=0, config=None):
    plan.check()
    outcomes = []
    for i, fold in enumerate(plan.folds):
        try:
            outcomes.append(run_fold(matrix, fold, select_k, svm_c, seed, redundancy_cap, i))
        except (ValueError, ArithmeticError) as exc:
            try:
                annotated = type(exc)(f"fold {i + 1}: {exc}")
            except TypeError:
                annotated = ValueError(f"fold {i + 1}: {exc}")
            raise annotated from exc
    size = len(outcomes[0].selected)
    cfg = {"seed": seed, "select_k": select_k, "svm_c": svm_c, "n_folds": plan.n_folds,
           "redundancy_cap": redundancy_cap}
    cfg.update(config or {})
    report = EvalReport(feature_set, size, [o.metrics for o in outcomes], cfg, std_ddof,
                        {"rows": matrix.shape[0], "subjects": len(set(matrix.groups)),
                         "test_fractions": ",".join(f"{v:.4f}" for v in
                                                    plan.test_fractions(matrix.groups))},
                        outcomes)
    return report


def run_cv(manifest, config):
    """Extract features for the manifest's patient segments and cross-validate."""
    from .pipeline import extract_matrix

    matrix = extract_matrix(manifest, config)
    return cross_validate_config(matrix, config)


def cross_validate_config(matrix, config):
    plan = make_folds(matrix.groups, matrix.labels, config.n_folds, config.seed)
    return cross_validate(matrix, plan, config.feature_set, config.effective_select_k(),
                          config.svm_c, config.seed, config.redundancy_cap, config.std_ddof,
                          config.echo())
