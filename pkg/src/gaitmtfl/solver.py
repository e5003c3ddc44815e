"""Multiplicative multi-task feature learning and single-task baselines.

The multi-task model factors each task's weight vector as
``alpha_t = c * beta_t`` (elementwise): ``c >= 0`` is shared across tasks
and gates features globally, ``beta_t`` is task-specific. Training
minimizes

    sum_t loss(X_t (c * beta_t), y_t)
        + gamma1 * sum_t ||beta_t||_p^p  +  gamma2 * ||c||_k^k

with p, k in {1, 2} selecting the sparsity regime of each factor. The
objective is solved by alternating block minimization: each block
subproblem is convex and handled by proximal gradient descent with
backtracking (kernels.prox_solve); power-1 penalties enter through their
prox, power-2 through the gradient, and the c block is clamped at zero.

Single-task baselines minimize loss + lam * ||alpha||_1 (lasso) or
lam * ||alpha||_2^2 (ridge) with the same machinery, least-squares loss
by default.

Labels are +1/-1 and sign(0) = +1 throughout. Feature standardization
(mean/variance from the training rows only) is applied inside the fit
functions by default and stored on the model; ``predict`` itself is the
raw linear score, so callers transform test rows with the stored
standardizer first.
"""

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import DomainError, NumericalError

LOSS_KINDS = ("logistic", "least_squares")
_LOSS_CODE = {"logistic": kernels.LOSS_LOGISTIC, "least_squares": kernels.LOSS_LEAST_SQUARES}

REGULARIZERS = ("lasso", "ridge")


@dataclass(frozen=True)
class TaskData:
    """One classification task: feature rows, +1/-1 labels, optional subject ids."""

    name: str
    X: np.ndarray
    y: np.ndarray
    subject_ids: tuple | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if X.ndim != 2:
            raise DomainError(f"task {self.name!r}: X must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DomainError(f"task {self.name!r}: y must have one label per row")
        if y.size and not np.all(np.isin(y, (-1.0, 1.0))):
            raise DomainError(f"task {self.name!r}: labels must be +1 or -1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.subject_ids is not None:
            sids = tuple(self.subject_ids)
            if len(sids) != X.shape[0]:
                raise DomainError(f"task {self.name!r}: subject_ids must match the row count")
            object.__setattr__(self, "subject_ids", sids)

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    def has_both_classes(self):
        return bool(np.any(self.y > 0) and np.any(self.y < 0))


@dataclass(frozen=True)
class RegularizerSpec:
    """Penalty powers and strengths: p on the task factors, k on the shared factor."""

    p: int
    k: int
    gamma1: float
    gamma2: float

    def __post_init__(self):
        if self.p not in (1, 2) or self.k not in (1, 2):
            raise DomainError(f"p and k must be 1 or 2, got ({self.p}, {self.k})")
        for name, g in (("gamma1", self.gamma1), ("gamma2", self.gamma2)):
            if not (g >= 0 and math.isfinite(g)):
                raise DomainError(f"{name} must be finite and >= 0, got {g}")


@dataclass(frozen=True)
class InnerConfig:
    """Stopping rule of one proximal-gradient block solve."""

    tol: float = 1e-8
    max_iter: int = 500


@dataclass(frozen=True)
class OuterConfig:
    """Stopping rule of the alternating outer loop."""

    tol: float = 1e-6
    max_iter: int = 200


@dataclass(frozen=True)
class Standardizer:
    """Per-column zero-mean unit-variance transform fitted on training rows."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X):
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean=mean, scale=scale)

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.mean.size:
            raise DomainError(f"expected {self.mean.size} columns, got shape {X.shape}")
        return (X - self.mean) / self.scale

    def to_dict(self):
        return {"mean": [float(v) for v in self.mean], "scale": [float(v) for v in self.scale]}

    @classmethod
    def from_dict(cls, d):
        return cls(mean=np.array(d["mean"], dtype=np.float64), scale=np.array(d["scale"], dtype=np.float64))


@dataclass(frozen=True)
class MmtflModel:
    """Fitted multiplicative multi-task model.

    ``alphas[:, t] == c * betas[:, t]`` exactly; ``diagnostics`` records
    (outer iteration, objective) with a non-increasing objective column.
    """

    spec: RegularizerSpec
    loss_kind: str
    c: np.ndarray
    betas: np.ndarray
    alphas: np.ndarray
    task_names: tuple
    feature_names: tuple | None
    scalers: tuple | None
    diagnostics: tuple
    converged: bool

    def task_index(self, task):
        if isinstance(task, str):
            try:
                return self.task_names.index(task)
            except ValueError:
                raise DomainError(f"unknown task {task!r}; have {self.task_names}") from None
        return int(task)


@dataclass(frozen=True)
class StlModel:
    """Fitted single-task baseline."""

    task_name: str
    regularizer: str
    lam: float
    loss_kind: str
    alpha: np.ndarray
    feature_names: tuple | None
    scaler: Standardizer | None
    diagnostics: tuple
    converged: bool


def _check_dims(alpha, X, y):
    if X.ndim != 2 or alpha.ndim != 1 or X.shape[1] != alpha.size or X.shape[0] != y.size:
        raise DomainError(f"dimension mismatch: X {X.shape}, alpha {alpha.shape}, y {y.shape}")


def logistic_loss(alpha, X, y):
    """Overflow-safe logistic loss sum_i log(1 + exp(-y_i x_i.alpha)) and its gradient."""
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    _check_dims(alpha, X, y)
    return kernels.logistic_value_grad(alpha, X, y)


def least_squares_loss(alpha, X, y):
    """Squared-error loss sum_i (y_i - x_i.alpha)^2 and its gradient."""
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    _check_dims(alpha, X, y)
    return kernels.least_squares_value_grad(alpha, X, y)


def _loss_value(alpha, X, y, loss_kind):
    if loss_kind == "logistic":
        return logistic_loss(alpha, X, y)[0]
    return least_squares_loss(alpha, X, y)[0]


def _power_norm(v, power):
    if power == 1:
        return float(np.abs(v).sum())
    return float(v @ v)


def objective(c, betas, tasks, spec, loss_kind):
    """Exact value of the joint objective at (c, betas)."""
    c = np.asarray(c, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    if np.any(c < 0):
        raise DomainError("c must be non-negative elementwise")
    if loss_kind not in LOSS_KINDS:
        raise DomainError(f"loss_kind must be one of {LOSS_KINDS}")
    if betas.shape != (c.size, len(tasks)):
        raise DomainError(f"betas must be (d, T) = ({c.size}, {len(tasks)}), got {betas.shape}")
    total = 0.0
    for t, task in enumerate(tasks):
        total += _loss_value(c * betas[:, t], task.X, task.y, loss_kind)
        total += spec.gamma1 * _power_norm(betas[:, t], spec.p)
    total += spec.gamma2 * _power_norm(c, spec.k)
    return total


@dataclass(frozen=True)
class BlockResult:
    value: np.ndarray
    objective: float
    n_iter: int
    converged: bool


def solve_beta_step(c, task, spec, loss_kind, beta0=None, inner=InnerConfig()):
    """Minimize the task-factor block with the shared factor held fixed.

    Solves min_beta loss(X diag(c) beta, y) + gamma1 ||beta||_p^p by
    proximal gradient. An all-zero c makes every beta loss-equivalent, so
    the penalty minimizer beta = 0 is returned directly.
    """
    c = np.ascontiguousarray(c, dtype=np.float64)
    if np.any(c < 0):
        raise DomainError("c must be non-negative elementwise")
    d = task.n_features
    if c.size != d:
        raise DomainError(f"c has {c.size} entries, task has {d} features")
    if loss_kind not in LOSS_KINDS:
        raise DomainError(f"loss_kind must be one of {LOSS_KINDS}")
    if beta0 is None:
        beta0 = np.zeros(d)
    beta0 = np.ascontiguousarray(beta0, dtype=np.float64)
    if not np.any(c):
        zeros = np.zeros(d)
        return BlockResult(zeros, _loss_value(zeros, task.X, task.y, loss_kind), 0, True)
    Xc = np.ascontiguousarray(task.X * c[None, :])
    w, obj, n_iter, converged = kernels.prox_solve(
        Xc, task.y, beta0, _LOSS_CODE[loss_kind], spec.p, spec.gamma1, False, inner.max_iter, inner.tol
    )
    return BlockResult(w, obj, n_iter, converged)


def solve_c_step(betas, tasks, spec, loss_kind, c0=None, inner=InnerConfig()):
    """Minimize the shared factor with all task factors held fixed.

    Stacks the per-task designs X_t diag(beta_t) and solves
    min_{c>=0} loss(Z c, y) + gamma2 ||c||_k^k by projected proximal
    gradient (the projection is a clamp at zero; for k=1 the penalty is
    linear on the non-negative orthant, so the prox is a shifted clamp).
    All-zero betas reduce the problem to the penalty alone, solved by
    c = 0.
    """
    betas = np.ascontiguousarray(betas, dtype=np.float64)
    d = betas.shape[0]
    if betas.ndim != 2 or betas.shape[1] != len(tasks):
        raise DomainError(f"betas must be (d, T), got {betas.shape}")
    if loss_kind not in LOSS_KINDS:
        raise DomainError(f"loss_kind must be one of {LOSS_KINDS}")
    if c0 is None:
        c0 = np.ones(d)
    c0 = np.maximum(np.ascontiguousarray(c0, dtype=np.float64), 0.0)
    if not np.any(betas):
        zeros = np.zeros(d)
        obj = math.fsum(_loss_value(zeros, task.X, task.y, loss_kind) for task in tasks)
        return BlockResult(zeros, obj, 0, True)
    Z = np.ascontiguousarray(np.vstack([task.X * betas[:, t][None, :] for t, task in enumerate(tasks)]))
    y = np.ascontiguousarray(np.concatenate([task.y for task in tasks]))
    w, obj, n_iter, converged = kernels.prox_solve(
        Z, y, c0, _LOSS_CODE[loss_kind], spec.k, spec.gamma2, True, inner.max_iter, inner.tol
    )
    return BlockResult(w, obj, n_iter, converged)


def _standardize_tasks(tasks, standardize):
    if not standardize:
        return tasks, None
    scalers = []
    out = []
    for task in tasks:
        sc = Standardizer.fit(task.X)
        scalers.append(sc)
        out.append(replace(task, X=sc.transform(task.X)))
    return out, tuple(scalers)


def fit_mmtfl(
    tasks,
    spec,
    loss_kind="logistic",
    seed=0,
    outer=OuterConfig(),
    inner=InnerConfig(),
    standardize=True,
    feature_names=None,
):
    """Alternating block minimization for the multiplicative multi-task model.

    Starts from c = 1, betas = 0 (the first pass is then a set of
    regularized single-task fits), alternates beta steps over all tasks
    with a c step, and stops when the relative objective decrease falls
    below ``outer.tol``. The recorded objective sequence is non-increasing;
    an iteration that fails to decrease it (numerical noise floor) is
    rolled back and treated as converged. Hitting ``outer.max_iter``
    returns the best iterate with ``converged=False``.

    ``seed`` is reserved for API stability: the fit has no stochastic
    steps and is fully deterministic.
    """
    del seed
    if not tasks:
        raise DomainError("need at least one task")
    if loss_kind not in LOSS_KINDS:
        raise DomainError(f"loss_kind must be one of {LOSS_KINDS}")
    d = tasks[0].n_features
    for task in tasks:
        if task.n_features != d:
            raise DomainError("all tasks must share the feature space")
        if not task.has_both_classes():
            raise DomainError(f"task {task.name!r} has a single class; cannot train")
    if feature_names is not None and len(feature_names) != d:
        raise DomainError("feature_names length must match the feature count")
    work_tasks, scalers = _standardize_tasks(tasks, standardize)
    T = len(work_tasks)
    c = np.ones(d)
    betas = np.zeros((d, T))
    obj = objective(c, betas, work_tasks, spec, loss_kind)
    diagnostics = [(0, obj)]
    converged = False
    for it in range(1, outer.max_iter + 1):
        new_betas = betas.copy()
        for t, task in enumerate(work_tasks):
            new_betas[:, t] = solve_beta_step(c, task, spec, loss_kind, beta0=betas[:, t], inner=inner).value
        new_c = solve_c_step(new_betas, work_tasks, spec, loss_kind, c0=c, inner=inner).value
        new_obj = objective(new_c, new_betas, work_tasks, spec, loss_kind)
        if not math.isfinite(new_obj):
            raise NumericalError(f"objective became non-finite at outer iteration {it}")
        if new_obj > obj:
            # block solvers cannot increase the objective beyond rounding noise;
            # keep the previous iterate and stop
            converged = True
            break
        betas = new_betas
        c = new_c
        rel = (obj - new_obj) / max(1.0, abs(obj))
        obj = new_obj
        diagnostics.append((it, obj))
        if rel < outer.tol:
            converged = True
            break
    alphas = c[:, None] * betas
    return MmtflModel(
        spec=spec,
        loss_kind=loss_kind,
        c=c,
        betas=betas,
        alphas=alphas,
        task_names=tuple(t.name for t in tasks),
        feature_names=tuple(feature_names) if feature_names is not None else None,
        scalers=scalers,
        diagnostics=tuple(diagnostics),
        converged=converged,
    )


def fit_stl(
    task,
    lam,
    regularizer="ridge",
    loss_kind="least_squares",
    inner=InnerConfig(tol=1e-12, max_iter=5000),
    standardize=True,
    feature_names=None,
):
    """Single-task baseline: loss + lam * (||a||_1 or ||a||_2^2)."""
    if regularizer not in REGULARIZERS:
        raise DomainError(f"regularizer must be one of {REGULARIZERS}")
    if loss_kind not in LOSS_KINDS:
        raise DomainError(f"loss_kind must be one of {LOSS_KINDS}")
    if not (lam > 0 and math.isfinite(lam)):
        raise DomainError(f"lam must be positive and finite, got {lam}")
    if not task.has_both_classes():
        raise DomainError(f"task {task.name!r} has a single class; cannot train")
    if feature_names is not None and len(feature_names) != task.n_features:
        raise DomainError("feature_names length must match the feature count")
    work = task
    scaler = None
    if standardize:
        scaler = Standardizer.fit(task.X)
        work = replace(task, X=scaler.transform(task.X))
    pen_power = 1 if regularizer == "lasso" else 2
    w0 = np.zeros(work.n_features)
    obj0 = _loss_value(w0, work.X, work.y, loss_kind)
    w, obj, n_iter, converged = kernels.prox_solve(
        np.ascontiguousarray(work.X), work.y, w0, _LOSS_CODE[loss_kind], pen_power, lam, False, inner.max_iter, inner.tol
    )
    if not math.isfinite(obj):
        raise NumericalError("objective became non-finite")
    return StlModel(
        task_name=task.name,
        regularizer=regularizer,
        lam=lam,
        loss_kind=loss_kind,
        alpha=w,
        feature_names=tuple(feature_names) if feature_names is not None else None,
        scaler=scaler,
        diagnostics=((0, obj0), (n_iter, obj)),
        converged=converged,
    )


def predict(model, X, task=None):
    """Linear scores and sign labels, sign(0) = +1.

    ``X`` must already be in the model's (standardized) feature space;
    use the stored scalers to transform raw rows first.
    """
    X = np.asarray(X, dtype=np.float64)
    if isinstance(model, MmtflModel):
        t = model.task_index(task if task is not None else 0)
        alpha = model.alphas[:, t]
    else:
        alpha = model.alpha
    if X.ndim != 2 or X.shape[1] != alpha.size:
        raise DomainError(f"X must be (n, {alpha.size}), got {X.shape}")
    scores = X @ alpha
    labels = np.where(scores >= 0, 1.0, -1.0)
    return scores, labels


def _spec_to_dict(spec):
    return {"p": spec.p, "k": spec.k, "gamma1": float(spec.gamma1), "gamma2": float(spec.gamma2)}


def model_to_dict(model):
    """JSON-ready dict; floats survive a round trip exactly (repr-based)."""
    if isinstance(model, MmtflModel):
        return {
            "kind": "mmtfl",
            "spec": _spec_to_dict(model.spec),
            "loss_kind": model.loss_kind,
            "task_names": list(model.task_names),
            "feature_names": list(model.feature_names) if model.feature_names is not None else None,
            "standardization": [s.to_dict() for s in model.scalers] if model.scalers is not None else None,
            "c": [float(v) for v in model.c],
            "betas": [[float(v) for v in row] for row in model.betas],
            "alphas": [[float(v) for v in row] for row in model.alphas],
            "diagnostics": [[int(i), float(o)] for i, o in model.diagnostics],
            "converged": bool(model.converged),
        }
    return {
        "kind": "stl",
        "task_name": model.task_name,
        "regularizer": model.regularizer,
        "lam": float(model.lam),
        "loss_kind": model.loss_kind,
        "feature_names": list(model.feature_names) if model.feature_names is not None else None,
        "standardization": model.scaler.to_dict() if model.scaler is not None else None,
        "alpha": [float(v) for v in model.alpha],
        "diagnostics": [[int(i), float(o)] for i, o in model.diagnostics],
        "converged": bool(model.converged),
    }


def model_from_dict(d):
    if d["kind"] == "mmtfl":
        spec = RegularizerSpec(p=d["spec"]["p"], k=d["spec"]["k"], gamma1=d["spec"]["gamma1"], gamma2=d["spec"]["gamma2"])
        scalers = d.get("standardization")
        return MmtflModel(
            spec=spec,
            loss_kind=d["loss_kind"],
            c=np.array(d["c"], dtype=np.float64),
            betas=np.array(d["betas"], dtype=np.float64),
            alphas=np.array(d["alphas"], dtype=np.float64),
            task_names=tuple(d["task_names"]),
            feature_names=tuple(d["feature_names"]) if d.get("feature_names") is not None else None,
            scalers=tuple(Standardizer.from_dict(s) for s in scalers) if scalers is not None else None,
            diagnostics=tuple((int(i), float(o)) for i, o in d["diagnostics"]),
            converged=bool(d["converged"]),
        )
    if d["kind"] == "stl":
        sc = d.get("standardization")
        return StlModel(
            task_name=d["task_name"],
            regularizer=d["regularizer"],
            lam=float(d["lam"]),
            loss_kind=d["loss_kind"],
            alpha=np.array(d["alpha"], dtype=np.float64),
            feature_names=tuple(d["feature_names"]) if d.get("feature_names") is not None else None,
            scaler=Standardizer.from_dict(sc) if sc is not None else None,
            diagnostics=tuple((int(i), float(o)) for i, o in d["diagnostics"]),
            converged=bool(d["converged"]),
        )
    raise DomainError(f"unknown model kind {d.get('kind')!r}")


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
