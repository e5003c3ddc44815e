"""Evaluation protocol: task construction, CV schemes, AUC, grid search.

The three canonical tasks discriminate PD vs healthy, stroke vs healthy
and stroke vs PD gait. Two evaluation schemes are provided:

* repeated stratified random partitions at a training ratio ("random");
* leave-one-subject-out, where every round holds out all trials of one
  subject and predictions are pooled across rounds before computing AUC.

Hyperparameters come either from explicit values or from a grid search
with stratified 3-fold cross-validation on training data, one shared grid
across tasks; ties prefer the stronger shared-sparsity corner (larger
gamma2, then larger gamma1).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .features import Dataset
from .solver import (
    MmtflModel,
    RegularizerSpec,
    StlModel,
    TaskData,
    fit_mmtfl,
    fit_stl,
    predict,
)

METHODS = ("mmtfl21", "mmtfl12", "mmtfl11", "mmtfl22", "stl_ridge", "stl_lasso")
_MMTFL_PK = {"mmtfl21": (2, 1), "mmtfl12": (1, 2), "mmtfl11": (1, 1), "mmtfl22": (2, 2)}

DEFAULT_GRID = tuple(float(v) for v in np.logspace(-3.0, 3.0, 7))


@dataclass(frozen=True)
class TaskDefinition:
    """One binary task: which group is labeled +1 and which -1."""

    name: str
    positive_group: str
    negative_group: str

    def __post_init__(self):
        if self.positive_group == self.negative_group:
            raise DomainError("positive and negative groups must differ")


CANONICAL_TASKS = (
    TaskDefinition("PD_vs_H", "PD", "H"),
    TaskDefinition("ST_vs_H", "ST", "H"),
    TaskDefinition("ST_vs_PD", "ST", "PD"),
)


@dataclass(frozen=True)
class MethodSpec:
    """A method name plus its hyperparameters."""

    method: str
    gamma1: float = 1.0
    gamma2: float = 1.0
    lam: float = 1.0
    loss_kind: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}, got {self.method!r}")

    @property
    def is_mmtfl(self):
        return self.method in _MMTFL_PK

    @property
    def effective_loss(self):
        if self.loss_kind is not None:
            return self.loss_kind
        return "logistic" if self.is_mmtfl else "least_squares"

    def regularizer_spec(self):
        p, k = _MMTFL_PK[self.method]
        return RegularizerSpec(p=p, k=k, gamma1=self.gamma1, gamma2=self.gamma2)

    def hyperparams(self):
        if self.is_mmtfl:
            return {"gamma1": float(self.gamma1), "gamma2": float(self.gamma2)}
        return {"lam": float(self.lam)}


@dataclass(frozen=True)
class SplitPlan:
    """Which evaluation scheme to run and its parameters."""

    scheme: str
    ratio: float | None = None
    folds: int | None = None
    seed: int = 0

    def __post_init__(self):
        schemes = ("random_partition", "leave_one_subject_out", "k_fold")
        if self.scheme not in schemes:
            raise DomainError(f"scheme must be one of {schemes}")
        if self.scheme == "random_partition":
            if self.ratio is None or not (0.0 < self.ratio < 1.0):
                raise DomainError("random_partition needs a ratio in (0, 1)")
        elif self.ratio is not None:
            raise DomainError(f"{self.scheme} does not take a ratio")
        if self.scheme == "k_fold":
            if self.folds is None or self.folds < 2:
                raise DomainError("k_fold needs folds >= 2")
        elif self.folds is not None:
            raise DomainError(f"{self.scheme} does not take folds")


def make_tasks(dataset, defs=CANONICAL_TASKS):
    """Select each definition's rows from the dataset, labels +1/-1."""
    tasks = []
    groups = np.array(dataset.groups)
    for td in defs:
        for g in (td.positive_group, td.negative_group):
            if g not in groups:
                raise DomainError(f"task {td.name!r}: dataset has no rows of group {g!r}")
        mask = (groups == td.positive_group) | (groups == td.negative_group)
        idx = np.nonzero(mask)[0]
        y = np.where(groups[idx] == td.positive_group, 1.0, -1.0)
        sids = tuple(dataset.subject_ids[i] for i in idx)
        tasks.append(TaskData(name=td.name, X=dataset.X[idx], y=y, subject_ids=sids))
    return tasks


def auc(scores, labels):
    """Probability that a random positive outscores a random negative.

    Ties count one half; equals the trapezoidal area under the ROC curve.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DomainError("scores and labels must be aligned 1-D sequences")
    pos = scores[labels > 0]
    neg = scores[labels < 0]
    if pos.size == 0 or neg.size == 0:
        raise DomainError("AUC needs both classes present")
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (float(wins) + 0.5 * float(ties)) / (pos.size * neg.size)


def confusion(pred, truth):
    """2x2 matrix, rows = true class (positive first), columns = predicted."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise DomainError("pred and truth must be aligned 1-D sequences")
    tp = int(np.sum((truth > 0) & (pred > 0)))
    fn = int(np.sum((truth > 0) & (pred <= 0)))
    fp = int(np.sum((truth <= 0) & (pred > 0)))
    tn = int(np.sum((truth <= 0) & (pred <= 0)))
    return np.array([[tp, fn], [fp, tn]], dtype=np.int64)


def _stratified_train_indices(y, ratio, rng):
    """Per-class shuffled split; train size rounded, both sides non-empty."""
    train, test = [], []
    for cls in (1.0, -1.0):
        idx = np.nonzero(y == cls)[0]
        n_c = idx.size
        n_train = int(math.floor(ratio * n_c + 0.5))
        if n_train < 1:
            raise DomainError(f"ratio {ratio} leaves class {cls:+.0f} without training rows")
        if n_train >= n_c:
            raise DomainError(f"ratio {ratio} leaves class {cls:+.0f} without test rows")
        perm = rng.permutation(n_c)
        train.extend(idx[perm[:n_train]])
        test.extend(idx[perm[n_train:]])
    return np.sort(np.array(train)), np.sort(np.array(test))


def _stratified_folds(y, folds, rng):
    """Round-robin class-stratified fold assignment; returns test-index arrays."""
    assignment = np.empty(y.size, dtype=np.int64)
    for cls in (1.0, -1.0):
        idx = np.nonzero(y == cls)[0]
        if idx.size < folds:
            raise DomainError(f"class {cls:+.0f} has {idx.size} rows, fewer than {folds} folds")
        perm = rng.permutation(idx.size)
        assignment[idx[perm]] = np.arange(idx.size) % folds
    return [np.nonzero(assignment == f)[0] for f in range(folds)]


@dataclass(frozen=True)
class FittedMethod:
    """A trained method: one joint model or one baseline model per task."""

    spec: MethodSpec
    task_names: tuple
    mmtfl: MmtflModel | None = None
    stl: tuple | None = None

    def scores(self, task_name, X_raw):
        if self.mmtfl is not None:
            t = self.mmtfl.task_index(task_name)
            Xs = self.mmtfl.scalers[t].transform(X_raw) if self.mmtfl.scalers else np.asarray(X_raw, dtype=np.float64)
            return predict(self.mmtfl, Xs, task=task_name)[0]
        t = self.task_names.index(task_name)
        model = self.stl[t]
        Xs = model.scaler.transform(X_raw) if model.scaler is not None else np.asarray(X_raw, dtype=np.float64)
        return predict(model, Xs)[0]


def fit_method(spec, tasks, seed=0, feature_names=None):
    """Train one method on the given (training) tasks."""
    names = tuple(t.name for t in tasks)
    if spec.is_mmtfl:
        model = fit_mmtfl(
            tasks,
            spec.regularizer_spec(),
            loss_kind=spec.effective_loss,
            seed=seed,
            feature_names=feature_names,
        )
        return FittedMethod(spec=spec, task_names=names, mmtfl=model)
    regularizer = "ridge" if spec.method == "stl_ridge" else "lasso"
    models = tuple(
        fit_stl(task, spec.lam, regularizer=regularizer, loss_kind=spec.effective_loss, feature_names=feature_names)
        for task in tasks
    )
    return FittedMethod(spec=spec, task_names=names, stl=models)


@dataclass(frozen=True)
class TaskEval:
    name: str
    auc_mean: float
    auc_sd: float
    aucs: tuple


@dataclass(frozen=True)
class EvalReport:
    """AUC summary, confusion matrices and per-subject counts of one run."""

    method: str
    scheme: str
    params: dict
    per_task: tuple
    all_tasks_mean: float
    all_tasks_sd: float
    confusions: dict
    per_subject: dict = field(default_factory=dict)
    importance: dict | None = None
    notices: tuple = ()

    def to_dict(self):
        return {
            "method": self.method,
            "scheme": self.scheme,
            "params": self.params,
            "all_tasks": {"auc_mean": self.all_tasks_mean, "auc_sd": self.all_tasks_sd},
            "per_task": [
                {"name": te.name, "auc_mean": te.auc_mean, "auc_sd": te.auc_sd, "aucs": list(te.aucs)}
                for te in self.per_task
            ],
            "confusions": {k: [[int(x) for x in row] for row in v] for k, v in self.confusions.items()},
            "per_subject": {
                k: [{"group": g, "subject": s, "predicted_positive": pp, "predicted_negative": pn}
                    for (g, s, pp, pn) in rows]
                for k, rows in self.per_subject.items()
            },
            "importance": self.importance,
            "notices": list(self.notices),
        }


def _sd(values):
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        return 0.0
    return float(arr.std(ddof=1))


def random_partition_eval(dataset, defs, method_spec, ratio, repeats=10, seed=0, importance_from_full_fit=True):
    """Repeated stratified random-partition evaluation at one training ratio.

    Each repeat draws an independent class-stratified train subset per
    task, trains the method (jointly for the multi-task variants), and
    scores the held-out remainder. Confusion matrices accumulate over
    repeats. Reported "all tasks" numbers are the unweighted mean of the
    per-task AUCs, averaged over repeats.
    """
    if not (0.0 < ratio < 1.0):
        raise DomainError(f"ratio must be in (0, 1), got {ratio}")
    tasks = make_tasks(dataset, defs)
    rng = np.random.default_rng(seed)
    task_aucs = {t.name: [] for t in tasks}
    all_aucs = []
    conf = {t.name: np.zeros((2, 2), dtype=np.int64) for t in tasks}
    for _ in range(repeats):
        splits = [_stratified_train_indices(task.y, ratio, rng) for task in tasks]
        train_tasks = [
            TaskData(name=task.name, X=task.X[tr], y=task.y[tr],
                     subject_ids=tuple(task.subject_ids[i] for i in tr) if task.subject_ids else None)
            for task, (tr, _) in zip(tasks, splits)
        ]
        fitted = fit_method(method_spec, train_tasks, feature_names=dataset.feature_names)
        rep_aucs = []
        for task, (_, te) in zip(tasks, splits):
            scores = fitted.scores(task.name, task.X[te])
            a = auc(scores, task.y[te])
            task_aucs[task.name].append(a)
            rep_aucs.append(a)
            pred = np.where(scores >= 0, 1.0, -1.0)
            conf[task.name] += confusion(pred, task.y[te])
        all_aucs.append(float(np.mean(rep_aucs)))
    importance = None
    if importance_from_full_fit:
        importance = _importance_dict(fit_method(method_spec, tasks, feature_names=dataset.feature_names))
    per_task = tuple(
        TaskEval(name=t.name, auc_mean=float(np.mean(task_aucs[t.name])), auc_sd=_sd(task_aucs[t.name]),
                 aucs=tuple(task_aucs[t.name]))
        for t in tasks
    )
    return EvalReport(
        method=method_spec.method,
        scheme="random_partition",
        params={"ratio": ratio, "repeats": repeats, "seed": seed, **method_spec.hyperparams(),
                "loss_kind": method_spec.effective_loss},
        per_task=per_task,
        all_tasks_mean=float(np.mean(all_aucs)),
        all_tasks_sd=_sd(all_aucs),
        confusions={k: v.tolist() for k, v in conf.items()},
        importance=importance,
    )


def leave_one_subject_out_eval(dataset, defs, method_spec, importance_from_full_fit=True):
    """Hold out each subject in turn; pool predictions before computing AUC.

    Per task, a subject's trials are scored by the model trained on every
    other subject; the pooled scores give one AUC per task. Per-subject
    predicted-class counts are reported alongside the confusion matrices.
    """
    tasks = make_tasks(dataset, defs)
    for task in tasks:
        if task.subject_ids is None:
            raise DomainError("leave-one-subject-out needs per-row subject ids")
    group_of = {sid: g for sid, g in zip(dataset.subject_ids, dataset.groups)}
    task_groups = {t.name: set() for t in tasks}
    for td, task in zip(defs, tasks):
        task_groups[task.name] = {td.positive_group, td.negative_group}
    for g in sorted({g for gs in task_groups.values() for g in gs}):
        n_subj = len({sid for sid, grp in group_of.items() if grp == g})
        if n_subj < 2:
            raise DomainError(f"group {g!r} has {n_subj} subject(s); leave-one-subject-out needs >= 2")
    subjects = sorted(set(dataset.subject_ids))
    pooled_scores = {t.name: [] for t in tasks}
    pooled_truth = {t.name: [] for t in tasks}
    per_subject = {t.name: [] for t in tasks}
    notices = []
    for sid in subjects:
        involved = [t for t in tasks if group_of[sid] in task_groups[t.name]]
        if not involved:
            notices.append(f"subject {sid} belongs to no task; skipped")
            continue
        train_tasks = []
        for task in tasks:
            keep = np.array([s != sid for s in task.subject_ids])
            train_tasks.append(
                TaskData(name=task.name, X=task.X[keep], y=task.y[keep],
                         subject_ids=tuple(s for s in task.subject_ids if s != sid))
            )
        fitted = fit_method(method_spec, train_tasks, feature_names=dataset.feature_names)
        for task in involved:
            mask = np.array([s == sid for s in task.subject_ids])
            scores = fitted.scores(task.name, task.X[mask])
            pooled_scores[task.name].extend(scores)
            pooled_truth[task.name].extend(task.y[mask])
            pred = np.where(scores >= 0, 1.0, -1.0)
            per_subject[task.name].append(
                (group_of[sid], sid, int(np.sum(pred > 0)), int(np.sum(pred <= 0)))
            )
    per_task = []
    confusions = {}
    for task in tasks:
        scores = np.array(pooled_scores[task.name])
        truth = np.array(pooled_truth[task.name])
        a = auc(scores, truth)
        per_task.append(TaskEval(name=task.name, auc_mean=a, auc_sd=0.0, aucs=(a,)))
        pred = np.where(scores >= 0, 1.0, -1.0)
        confusions[task.name] = confusion(pred, truth).tolist()
    importance = None
    if importance_from_full_fit:
        importance = _importance_dict(fit_method(method_spec, tasks, feature_names=dataset.feature_names))
    aucs = [te.auc_mean for te in per_task]
    return EvalReport(
        method=method_spec.method,
        scheme="leave_one_subject_out",
        params={**method_spec.hyperparams(), "loss_kind": method_spec.effective_loss},
        per_task=tuple(per_task),
        all_tasks_mean=float(np.mean(aucs)),
        all_tasks_sd=_sd(aucs),
        confusions=confusions,
        per_subject=per_subject,
        importance=importance,
        notices=tuple(notices),
    )


def grid_search(dataset, defs, method, grid=DEFAULT_GRID, inner_folds=3, seed=0, loss_kind=None):
    """Pick hyperparameters by stratified k-fold CV over a shared log grid.

    Multi-task methods search the (gamma1, gamma2) product grid, the
    baselines the same grid for lambda. The score of a cell is the mean
    over folds of the mean per-task validation AUC; exact ties prefer
    larger gamma2, then larger gamma1 (larger lambda for baselines).
    Returns (best MethodSpec, table of {cell, score} dicts).
    """
    if len(grid) == 0:
        raise DomainError("grid must be non-empty")
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}")
    tasks = make_tasks(dataset, defs)
    rng = np.random.default_rng(seed)
    folds_per_task = [_stratified_folds(task.y, inner_folds, rng) for task in tasks]
    is_mmtfl = method in _MMTFL_PK
    if is_mmtfl:
        cells = [MethodSpec(method=method, gamma1=g1, gamma2=g2, loss_kind=loss_kind) for g1 in grid for g2 in grid]
    else:
        cells = [MethodSpec(method=method, lam=l, loss_kind=loss_kind) for l in grid]

    def _tiebreak(spec):
        if is_mmtfl:
            return (spec.gamma2, spec.gamma1)
        return (spec.lam,)

    table = []
    failures = []
    best = None
    for spec in cells:
        fold_scores = []
        try:
            for f in range(inner_folds):
                train_tasks = []
                val_sets = []
                for task, folds in zip(tasks, folds_per_task):
                    val_idx = folds[f]
                    tr_mask = np.ones(task.n_rows, dtype=bool)
                    tr_mask[val_idx] = False
                    train_tasks.append(TaskData(name=task.name, X=task.X[tr_mask], y=task.y[tr_mask]))
                    val_sets.append((task.X[val_idx], task.y[val_idx]))
                fitted = fit_method(spec, train_tasks, feature_names=dataset.feature_names)
                task_scores = [
                    auc(fitted.scores(task.name, Xv), yv) for task, (Xv, yv) in zip(tasks, val_sets)
                ]
                fold_scores.append(float(np.mean(task_scores)))
            score = float(np.mean(fold_scores))
        except Exception as exc:  # noqa: BLE001 - a failing cell must not kill the search
            failures.append(f"{spec.hyperparams()}: {exc}")
            table.append({**spec.hyperparams(), "auc": None})
            continue
        table.append({**spec.hyperparams(), "auc": score})
        if best is None or score > best[0] or (score == best[0] and _tiebreak(spec) > _tiebreak(best[1])):
            best = (score, spec)
    if best is None:
        raise DomainError("every grid cell failed to train: " + "; ".join(failures))
    return best[1], table


def importance_report(model):
    """Rank features by the fitted weights, descending.

    Multi-task models report the shared gate c plus |alpha_t| per task;
    baselines report |alpha| for their task. Ties keep feature order.
    """
    if isinstance(model, MmtflModel):
        names = model.feature_names or tuple(f"f{j}" for j in range(model.c.size))
        c_rank = sorted(zip(names, (float(v) for v in model.c)), key=lambda kv: -kv[1])
        alpha_ranks = {}
        for t, task in enumerate(model.task_names):
            vals = np.abs(model.alphas[:, t])
            alpha_ranks[task] = sorted(zip(names, (float(v) for v in vals)), key=lambda kv: -kv[1])
        return {"c": c_rank, "alpha": alpha_ranks}
    if isinstance(model, StlModel):
        names = model.feature_names or tuple(f"f{j}" for j in range(model.alpha.size))
        vals = np.abs(model.alpha)
        return {"c": None, "alpha": {model.task_name: sorted(zip(names, (float(v) for v in vals)), key=lambda kv: -kv[1])}}
    raise DomainError(f"cannot rank features of {type(model).__name__}")


def _importance_dict(fitted):
    if fitted.mmtfl is not None:
        rep = importance_report(fitted.mmtfl)
        return {
            "c": [[n, v] for n, v in rep["c"]],
            "alpha": {task: [[n, v] for n, v in ranks] for task, ranks in rep["alpha"].items()},
        }
    merged = {"c": None, "alpha": {}}
    for model in fitted.stl:
        rep = importance_report(model)
        merged["alpha"].update({task: [[n, v] for n, v in ranks] for task, ranks in rep["alpha"].items()})
    return merged
