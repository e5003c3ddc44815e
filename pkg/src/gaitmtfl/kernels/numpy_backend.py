"""Pure-numpy implementations of the hot kernels.

Same call signatures and semantics as the numba twins in
``numba_backend``; the active set is picked in ``kernels.__init__``
from the ``GAITMTFL_BACKEND`` environment variable.
"""

import math

import numpy as np

LOSS_LOGISTIC = 0
LOSS_LEAST_SQUARES = 1

LOG2PI = math.log(2.0 * math.pi)

# Armijo sufficient-decrease constant and step-halving factor for the
# proximal solver's backtracking line search.
BT_SIGMA = 1e-4
BT_SHRINK = 0.5
BT_MIN_STEP = 1e-20


def _loss_value(scores, y, loss_kind):
    if loss_kind == LOSS_LOGISTIC:
        return float(np.logaddexp(0.0, -y * scores).sum())
    r = scores - y
    return float(r @ r)


def _loss_score_grad(scores, y, loss_kind):
    if loss_kind == LOSS_LOGISTIC:
        # d/ds log(1+exp(-y s)) = -y * sigmoid(-y s); tanh form avoids overflow
        return -y * 0.5 * (1.0 - np.tanh(0.5 * y * scores))
    return 2.0 * (scores - y)


def logistic_value_grad(w, X, y):
    scores = X @ w
    value = _loss_value(scores, y, LOSS_LOGISTIC)
    grad = X.T @ _loss_score_grad(scores, y, LOSS_LOGISTIC)
    return value, grad


def least_squares_value_grad(w, X, y):
    scores = X @ w
    value = _loss_value(scores, y, LOSS_LEAST_SQUARES)
    grad = X.T @ _loss_score_grad(scores, y, LOSS_LEAST_SQUARES)
    return value, grad


def _penalty(w, pen_power, pen_weight):
    if pen_power == 1:
        return pen_weight * float(np.abs(w).sum())
    return pen_weight * float(w @ w)


def _prox_step(w, g, eta, pen_power, pen_weight, nonneg):
    v = w - eta * g
    if pen_power == 1:
        t = eta * pen_weight
        if nonneg:
            return np.maximum(v - t, 0.0)
        return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
    if nonneg:
        return np.maximum(v, 0.0)
    return v


def prox_solve(X, y, w0, loss_kind, pen_power, pen_weight, nonneg, max_iter, tol):
    """Proximal gradient descent for  loss(Xw, y) + pen_weight * ||w||_p^p.

    Power-2 penalties are treated as part of the smooth objective, power-1
    penalties through their soft-threshold prox. ``nonneg`` clamps iterates
    at zero. Backtracking halves the step from 1.0 until the full objective
    drops by at least BT_SIGMA * ||w_new - w||^2 / eta. Every accepted step
    decreases the objective, so the returned iterate never exceeds the
    starting objective.

    Returns (w, objective, n_iter, converged).
    """
    w = np.array(w0, dtype=np.float64, copy=True)
    scores = X @ w
    fcur = _loss_value(scores, y, loss_kind) + _penalty(w, pen_power, pen_weight)
    n_iter = 0
    converged = False
    for it in range(max_iter):
        n_iter = it + 1
        g = X.T @ _loss_score_grad(scores, y, loss_kind)
        if pen_power == 2:
            g = g + 2.0 * pen_weight * w
        eta = 1.0
        accepted = False
        while eta > BT_MIN_STEP:
            wn = _prox_step(w, g, eta, pen_power, pen_weight, nonneg)
            sn = X @ wn
            fn = _loss_value(sn, y, loss_kind) + _penalty(wn, pen_power, pen_weight)
            dw = wn - w
            if fn <= fcur - BT_SIGMA * float(dw @ dw) / eta:
                accepted = True
                break
            eta *= BT_SHRINK
        if not accepted:
            converged = True
            break
        rel = (fcur - fn) / max(1.0, abs(fcur))
        w = wn
        scores = sn
        fcur = fn
        if rel < tol:
            converged = True
            break
    return w, fcur, n_iter, converged


def _kmeans_pp_refine(X, k, u01, km_iters):
    """k-means++ seeding driven by pre-drawn uniforms, plus Lloyd refinement."""
    n, d = X.shape
    means = np.empty((k, d))
    first = min(int(u01[0] * n), n - 1)
    means[0] = X[first]
    d2 = ((X - means[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        tot = d2.sum()
        if tot <= 0.0:
            idx = min(int(u01[c] * n), n - 1)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), u01[c] * tot))
            idx = min(idx, n - 1)
        means[c] = X[idx]
        d2 = np.minimum(d2, ((X - means[c]) ** 2).sum(axis=1))
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(km_iters):
        dist = ((X[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        new_assign = dist.argmin(axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            mask = assign == c
            if mask.any():
                means[c] = X[mask].mean(axis=0)
            else:
                fb = min(int((0.5 * (c + 1) / k) * n), n - 1)
                means[c] = X[fb]
    return means


def _em_diag(X, means, variances, weights, max_iter, tol, reg):
    """Diagonal-covariance EM, updating parameters in place.

    Returns (loglik, responsibilities).
    """
    n, d = X.shape
    k = means.shape[0]
    loglik = -np.inf
    resp = np.empty((n, k))
    for _ in range(max_iter):
        logw = np.where(weights > 1e-300, np.log(np.maximum(weights, 1e-300)), -690.0)
        logdet = np.log(variances).sum(axis=1)
        dev2 = (X[:, None, :] - means[None, :, :]) ** 2
        maha = (dev2 / variances[None, :, :]).sum(axis=2)
        logp = logw[None, :] - 0.5 * (maha + logdet[None, :] + d * LOG2PI)
        m = logp.max(axis=1)
        e = np.exp(logp - m[:, None])
        s = e.sum(axis=1)
        ll = float((m + np.log(s)).sum())
        resp = e / s[:, None]
        if abs(ll - loglik) < tol * (1.0 + abs(ll)):
            loglik = ll
            break
        loglik = ll
        nk = resp.sum(axis=0)
        weights[:] = nk / n
        nk_s = np.maximum(nk, 1e-12)
        means[:] = (resp.T @ X) / nk_s[:, None]
        for c in range(k):
            dv = X - means[c]
            variances[c] = (resp[:, c] @ (dv * dv)) / nk_s[c] + reg
    return loglik, resp


def gmm_fit_diag(X, k, uniforms, reg, km_iters, short_iters, polish_iters, tol):
    """Best-of-restarts diagonal Gaussian mixture fit.

    ``uniforms`` is (n_restarts, k): pre-drawn U[0,1) numbers driving the
    k-means++ seeding of each restart, so results are deterministic given
    the caller's RNG. Each restart runs a short EM; the best candidate by
    log-likelihood (ties to the earliest restart) is polished to
    convergence.

    Returns (loglik, means, variances, weights, responsibilities).
    """
    n, d = X.shape
    gvar = X.var(axis=0) + reg
    best_ll = -np.inf
    best = None
    for r in range(uniforms.shape[0]):
        means = _kmeans_pp_refine(X, k, uniforms[r], km_iters)
        variances = np.tile(gvar, (k, 1))
        weights = np.full(k, 1.0 / k)
        ll, _ = _em_diag(X, means, variances, weights, short_iters, tol, reg)
        if ll > best_ll:
            best_ll = ll
            best = (means, variances, weights)
    means, variances, weights = best
    loglik, resp = _em_diag(X, means, variances, weights, polish_iters, tol, reg)
    return loglik, means, variances, weights, resp
