"""Kernel SVM on precomputed Gram matrices.

The binary solver is SMO with second-order working-set selection: each
step picks the maximal KKT violator ``i`` and the partner ``j`` that
maximises the guaranteed decrease of the dual, solves the two-variable
sub-problem in closed form and clips to the box.  Multiclass problems are
reduced one-vs-one.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-4
_TAU = 1e-12  # curvature floor for indefinite Gram matrices
C_GRID = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0)


class ConvergenceWarning(UserWarning):
    pass


# ------------------------------------------------------------------ SMO core

@njit(cache=True)
def _smo(K, y, C, tol, max_iter):
    n = K.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - e'a with Q_ij = y_i y_j K_ij
    it = 0
    gap = np.inf
    while it < max_iter:
        # i: maximal violator in the "up" set
        gmax = -np.inf
        i = -1
        for t in range(n):
            if y[t] > 0:
                if alpha[t] < C and -grad[t] >= gmax:
                    gmax = -grad[t]
                    i = t
            else:
                if alpha[t] > 0 and grad[t] >= gmax:
                    gmax = grad[t]
                    i = t
        # j: second-order choice in the "low" set
        gmax2 = -np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if y[t] > 0:
                if alpha[t] > 0:
                    diff = gmax + grad[t]
                    if grad[t] >= gmax2:
                        gmax2 = grad[t]
                else:
                    continue
            else:
                if alpha[t] < C:
                    diff = gmax - grad[t]
                    if -grad[t] >= gmax2:
                        gmax2 = -grad[t]
                else:
                    continue
            if diff > 0 and i >= 0:
                quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                if quad <= 0:
                    quad = _TAU
                obj = -diff * diff / quad
                if obj <= best:
                    best = obj
                    j = t
        gap = gmax + gmax2
        if gap < tol or i < 0 or j < 0:
            break
        it += 1

        ai = alpha[i]
        aj = alpha[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = _TAU
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ni = ai + delta
            nj = aj + delta
            if diff > 0:
                if nj < 0:
                    nj = 0.0
                    ni = diff
            else:
                if ni < 0:
                    ni = 0.0
                    nj = -diff
            if diff > 0:
                if ni > C:
                    ni = C
                    nj = C - diff
            else:
                if nj > C:
                    nj = C
                    ni = C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            s = ai + aj
            ni = ai - delta
            nj = aj + delta
            if s > C:
                if ni > C:
                    ni = C
                    nj = s - C
            else:
                if nj < 0:
                    nj = 0.0
                    ni = s
            if s > C:
                if nj > C:
                    nj = C
                    ni = s - C
            else:
                if ni < 0:
                    ni = 0.0
                    nj = s
        di = ni - ai
        dj = nj - aj
        alpha[i] = ni
        alpha[j] = nj
        for t in range(n):
            grad[t] += y[t] * (y[i] * K[t, i] * di + y[j] * K[t, j] * dj)

    # bias: average over free multipliers, else the midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    total = 0.0
    nfree = 0
    for t in range(n):
        yg = y[t] * grad[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            total += yg
    if nfree > 0:
        rho = total / nfree
    else:
        rho = (ub + lb) / 2.0
    obj = 0.0
    for t in range(n):
        obj -= 0.5 * alpha[t] * (grad[t] - 1.0)
    return alpha, -rho, obj, it, gap


def _max_iter(n):
    return max(10_000_000, 100 * n)


# ------------------------------------------------------------------ models

@dataclass
class TrainedModel:
    """Binary SVM: decision ``sum_i coef_i K(x_i, x) + bias`` over support vectors."""

    support: np.ndarray
    coef: np.ndarray  # alpha_i * y_i
    bias: float
    C: float
    n_train: int
    objective: float = math.nan
    iterations: int = 0
    converged: bool = True
    spec: Optional[dict] = None
    alpha: Optional[np.ndarray] = field(default=None, repr=False)

    def decision(self, kernel_rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(kernel_rows, dtype=np.float64))
        if rows.shape[1] != self.n_train:
            raise ValueError(f"kernel row has length {rows.shape[1]}, model was trained on {self.n_train}")
        return rows[:, self.support] @ self.coef + self.bias


def _check_gram(G, n=None):
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("Gram matrix must be square")
    if n is not None and len(G) != n:
        raise ValueError(f"Gram matrix has {len(G)} rows for {n} labels")
    if not np.all(np.isfinite(G)):
        raise ValueError("Gram matrix has non-finite entries")
    return np.ascontiguousarray(G)


def solve_binary(G, y, C: float, tol: float = DEFAULT_TOL, max_iter: Optional[int] = None,
                 spec: Optional[dict] = None) -> TrainedModel:
    """Train a binary SVM on the precomputed Gram ``G`` with labels in {-1, +1}."""
    y = np.asarray(y, dtype=np.float64)
    G = _check_gram(G, len(y))
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("binary labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise ValueError("training labels contain a single class")
    if not C > 0:
        raise ValueError("C must be positive")
    cap = _max_iter(len(y)) if max_iter is None else int(max_iter)
    alpha, bias, obj, it, gap = _smo(G, y, float(C), float(tol), cap)
    converged = bool(gap < tol)
    if not converged:
        warnings.warn(f"SMO stopped after {it} iterations with KKT gap {gap:.3g} > {tol:g}", ConvergenceWarning)
    sv = np.flatnonzero(alpha > 0)
    return TrainedModel(sv, alpha[sv] * y[sv], float(bias), float(C), len(y), float(obj), int(it), converged,
                        spec, alpha)


def predict(model: TrainedModel, kernel_row) -> tuple:
    """Label in {-1, +1} and margin for one kernel row; a zero margin maps to +1."""
    m = float(model.decision(kernel_row)[0])
    return (1 if m >= 0 else -1), m


def dual_objective(G, y, alpha) -> float:
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(alpha) * y
    return float(np.sum(alpha) - 0.5 * v @ np.asarray(G) @ v)


# -------------------------------------------------------------- multiclass

@dataclass
class MulticlassModel:
    classes: np.ndarray
    pairs: list  # (class index a, class index b); +1 means a
    models: list
    n_train: int

    def decision(self, kernel_rows) -> tuple:
        rows = np.atleast_2d(np.asarray(kernel_rows, dtype=np.float64))
        k = len(self.classes)
        votes = np.zeros((len(rows), k), dtype=np.int64)
        msum = np.zeros((len(rows), k))
        for (a, b), (sel, model) in zip(self.pairs, self.models):
            m = model.decision(rows[:, sel])
            win = m >= 0
            votes[win, a] += 1
            votes[~win, b] += 1
            msum[:, a] += m
            msum[:, b] -= m
        return votes, msum

    def predict(self, kernel_rows) -> np.ndarray:
        votes, msum = self.decision(kernel_rows)
        return self.classes[_vote(votes, msum)]

    @property
    def converged(self) -> bool:
        return all(m.converged for _, m in self.models)


def _vote(votes, msum):
    # most votes, then largest margin sum, then smallest class index
    out = np.empty(len(votes), dtype=np.int64)
    for r in range(len(votes)):
        top = votes[r].max()
        cand = np.flatnonzero(votes[r] == top)
        out[r] = cand[np.argmax(msum[r, cand])]
    return out


def train_multiclass(G, labels, C: float, tol: float = DEFAULT_TOL, max_iter: Optional[int] = None) -> MulticlassModel:
    """One-vs-one ensemble; kernel rows passed to ``predict`` span all training samples."""
    labels = np.asarray(labels)
    G = _check_gram(G, len(labels))
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("training labels contain a single class")
    idx = np.searchsorted(classes, labels)
    pairs, models = [], []
    for a, b in itertools.combinations(range(len(classes)), 2):
        sel = np.flatnonzero((idx == a) | (idx == b))
        y = np.where(idx[sel] == a, 1.0, -1.0)
        model = solve_binary(G[np.ix_(sel, sel)], y, C, tol, max_iter)
        pairs.append((a, b))
        models.append((sel, model))
    return MulticlassModel(classes, pairs, models, len(labels))


@njit(cache=True)
def _ovo_fit_predict(Gtr, idx, Gte, k, Cs, tol, max_iter):
    """Predicted class indices, one row per C; also the count of unconverged solves."""
    nte = Gte.shape[0]
    nC = len(Cs)
    votes = np.zeros((nC, nte, k), dtype=np.int64)
    msum = np.zeros((nC, nte, k))
    bad = 0
    for a in range(k):
        for b in range(a + 1, k):
            m = 0
            for t in range(len(idx)):
                if idx[t] == a or idx[t] == b:
                    m += 1
            sel = np.empty(m, dtype=np.int64)
            m = 0
            for t in range(len(idx)):
                if idx[t] == a or idx[t] == b:
                    sel[m] = t
                    m += 1
            K = np.empty((m, m))
            y = np.empty(m)
            for r in range(m):
                y[r] = 1.0 if idx[sel[r]] == a else -1.0
                for c in range(m):
                    K[r, c] = Gtr[sel[r], sel[c]]
            for ci in range(nC):
                alpha, bias, obj, it, gap = _smo(K, y, Cs[ci], tol, max_iter)
                if not gap < tol:
                    bad += 1
                for q in range(nte):
                    s = bias
                    for r in range(m):
                        if alpha[r] > 0:
                            s += alpha[r] * y[r] * Gte[q, sel[r]]
                    if s >= 0:
                        votes[ci, q, a] += 1
                    else:
                        votes[ci, q, b] += 1
                    msum[ci, q, a] += s
                    msum[ci, q, b] -= s
    out = np.empty((nC, nte), dtype=np.int64)
    for ci in range(nC):
        for q in range(nte):
            best = 0
            for c in range(1, k):
                v, vb = votes[ci, q, c], votes[ci, q, best]
                if v > vb or (v == vb and msum[ci, q, c] > msum[ci, q, best]):
                    best = c
            out[ci, q] = best
    return out, bad


# ------------------------------------------------------------------ metrics

def accuracy(pred, truth) -> float:
    pred, truth = np.asarray(pred), np.asarray(truth)
    if len(pred) != len(truth) or len(truth) == 0:
        raise ValueError("need aligned, nonempty predictions")
    return float(np.mean(pred == truth))


def balanced_accuracy(pred, truth, classes: Optional[Sequence] = None) -> float:
    """Mean per-class recall over ``classes`` (default: the classes present in ``truth``)."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    if len(pred) != len(truth) or len(truth) == 0:
        raise ValueError("need aligned, nonempty predictions")
    classes = np.unique(truth) if classes is None else classes
    recalls = []
    for c in classes:
        mask = truth == c
        if not mask.any():
            raise ValueError(f"class {c} has no samples in the ground truth")
        recalls.append(np.mean(pred[mask] == c))
    return float(np.mean(recalls))


def imbalance_ratio(labels) -> float:
    _, counts = np.unique(labels, return_counts=True)
    return float(counts.max() / counts.min())


def resolve_metric(metric: str, labels) -> str:
    if metric == "auto":
        return "balanced" if imbalance_ratio(labels) > 1.5 else "accuracy"
    if metric not in ("accuracy", "balanced"):
        raise ValueError(f"unknown metric {metric!r}")
    return metric


def score(pred, truth, metric: str) -> float:
    return balanced_accuracy(pred, truth) if metric == "balanced" else accuracy(pred, truth)


# ------------------------------------------------------------------ splits

def _round_half_up(x):
    return int(math.floor(x + 0.5))


def stratified_split(labels, test_fraction: float = 0.3, seed: int = 0) -> tuple:
    """Per-class proportional split with a PCG64 generator seeded by ``seed``."""
    if not 0 < test_fraction < 1:
        raise ValueError("test fraction must lie in (0, 1)")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        k = _round_half_up(test_fraction * len(members))
        if len(members) >= 2:
            k = min(max(k, 1), len(members) - 1)
        else:
            k = 0
        test.extend(members[:k].tolist())
        train.extend(members[k:].tolist())
    return np.sort(np.asarray(train, dtype=np.int64)), np.sort(np.asarray(test, dtype=np.int64))


def stratified_folds(labels, k: int, seed: int = 0) -> list:
    """``k`` disjoint validation index arrays (positions into ``labels``)."""
    if k < 2:
        raise ValueError("need at least two folds")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    offset = 0
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        for r, m in enumerate(members):
            folds[(offset + r) % k].append(int(m))
        offset += len(members)
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


# -------------------------------------------------------------- grid search

@dataclass
class CVResult:
    best_params: tuple
    best_C: float
    best_score: float
    scores: dict  # (params, C) -> mean validation score
    skipped_folds: int = 0
    unconverged: int = 0


def _param_key(params) -> tuple:
    if isinstance(params, dict):
        return tuple(sorted(params.items()))
    return tuple(params)


def cv_grid_search(grams, labels, train_idx, C_grid: Sequence = C_GRID, folds: int = 10, seed: int = 0,
                   metric: str = "auto", tol: float = DEFAULT_TOL,
                   on_access: Optional[Callable] = None) -> CVResult:
    """Stratified k-fold grid search over kernel parameters and C.

    ``grams`` is a sequence of ``(params, G)`` where ``G`` is the Gram matrix
    over the whole dataset (or a zero-argument callable producing it);
    ``labels`` spans the whole dataset too.  Only ``train_idx`` rows and
    columns are ever read; ``on_access(rows, cols)`` sees every slice.
    """
    labels = np.asarray(labels)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    grams = list(grams)
    if not grams or len(C_grid) == 0:
        raise ValueError("empty parameter grid")
    ytr = labels[train_idx]
    metric = resolve_metric(metric, ytr)
    classes = np.unique(ytr)
    cls_idx = np.searchsorted(classes, ytr)
    fold_list = stratified_folds(ytr, folds, seed)
    usable = []
    for f in fold_list:
        fit = np.setdiff1d(np.arange(len(ytr)), f)
        if len(f) == 0 or len(np.unique(ytr[fit])) < len(classes):
            warnings.warn("skipping a fold whose training part misses a class")
            continue
        usable.append((fit, f))
    if not usable:
        raise ValueError("every cross-validation fold misses a class")
    Cs = np.asarray(C_grid, dtype=np.float64)
    scores = {}
    unconverged = 0
    for params, G in grams:
        key = _param_key(params)
        G = G() if callable(G) else G
        if on_access is not None:
            on_access(train_idx, train_idx)
        Gtr = _check_gram(np.asanyarray(G)[np.ix_(train_idx, train_idx)])
        per_fold = np.zeros((len(usable), len(Cs)))
        for fi, (fit, val) in enumerate(usable):
            pred, bad = _ovo_fit_predict(np.ascontiguousarray(Gtr[np.ix_(fit, fit)]), cls_idx[fit],
                                         np.ascontiguousarray(Gtr[np.ix_(val, fit)]), len(classes), Cs,
                                         float(tol), _max_iter(len(fit)))
            unconverged += int(bad)
            for ci in range(len(Cs)):
                per_fold[fi, ci] = score(classes[pred[ci]], ytr[val], metric)
        for ci, C in enumerate(Cs):
            scores[(key, float(C))] = float(np.mean(per_fold[:, ci]))
    if unconverged:
        log.warning("%d SMO solves hit the iteration cap during cross-validation", unconverged)
    # best score; ties to the smaller C, then the first parameter tuple
    best = min(scores, key=lambda kc: (-scores[kc], kc[1], kc[0]))
    return CVResult(best[0], best[1], scores[best], scores, len(fold_list) - len(usable), unconverged)


# ------------------------------------------------------------ serialization

def dumps_model(model: TrainedModel) -> str:
    import json

    lines = [f"C {model.C!r}", f"bias {model.bias!r}", f"n_train {model.n_train}",
             f"spec {json.dumps(model.spec)}", "support coef"]
    lines += [f"{int(i)} {float(c)!r}" for i, c in zip(model.support, model.coef)]
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> TrainedModel:
    import json

    lines = text.splitlines()
    head = {}
    k = 0
    for k, line in enumerate(lines):
        if line.strip() == "support coef":
            break
        name, _, value = line.partition(" ")
        head[name] = value
    else:
        raise ValueError("model text lacks the support table")
    sup, coef = [], []
    for no, line in enumerate(lines[k + 1:], start=k + 2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {no}: expected 'index coefficient'")
        sup.append(int(parts[0]))
        coef.append(float(parts[1]))
    return TrainedModel(np.asarray(sup, dtype=np.int64), np.asarray(coef), float(head["bias"]), float(head["C"]),
                        int(head["n_train"]), spec=json.loads(head.get("spec", "null")))


def dumps_multiclass(model: MulticlassModel, ids: Optional[Sequence] = None) -> str:
    """Blocks of binary models; support indices refer to the full training set."""
    lines = [f"classes {' '.join(str(c) for c in model.classes.tolist())}", f"n_train {model.n_train}"]
    if ids is not None:
        lines.append("ids " + " ".join(str(i) for i in ids))
    for (a, b), (sel, m) in zip(model.pairs, model.models):
        glob = TrainedModel(sel[m.support], m.coef, m.bias, m.C, model.n_train, spec=m.spec)
        lines.append(f"pair {a} {b}")
        lines.append(dumps_model(glob).rstrip("\n"))
        lines.append("end")
    return "\n".join(lines) + "\n"


def loads_multiclass(text: str) -> MulticlassModel:
    lines = text.splitlines()
    classes = np.array([int(x) for x in lines[0].split()[1:]])
    n_train = int(lines[1].split()[1])
    pairs, models = [], []
    k = 2
    while k < len(lines):
        if lines[k].startswith("pair "):
            _, a, b = lines[k].split()
            end = lines.index("end", k)
            m = loads_model("\n".join(lines[k + 1:end]))
            pairs.append((int(a), int(b)))
            models.append((np.arange(n_train), m))
            k = end
        k += 1
    return MulticlassModel(classes, pairs, models, n_train)
