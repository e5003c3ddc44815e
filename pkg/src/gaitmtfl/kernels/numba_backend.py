"""Numba-compiled twins of the kernels in ``numpy_backend``.

The GMM routines use fastmath (run-to-run deterministic on one machine,
just reassociated); the proximal solver does not, so its objective values
stay bit-consistent with careful summation order.
"""

import math

import numpy as np
from numba import njit

LOSS_LOGISTIC = 0
LOSS_LEAST_SQUARES = 1

LOG2PI = math.log(2.0 * math.pi)

BT_SIGMA = 1e-4
BT_SHRINK = 0.5
BT_MIN_STEP = 1e-20


@njit(cache=True)
def _loss_value(scores, y, loss_kind):
    n = scores.shape[0]
    total = 0.0
    if loss_kind == LOSS_LOGISTIC:
        for i in range(n):
            m = y[i] * scores[i]
            if m >= 0.0:
                total += math.log1p(math.exp(-m))
            else:
                total += -m + math.log1p(math.exp(m))
    else:
        for i in range(n):
            r = scores[i] - y[i]
            total += r * r
    return total


@njit(cache=True)
def _loss_score_grad(scores, y, loss_kind, out):
    n = scores.shape[0]
    if loss_kind == LOSS_LOGISTIC:
        for i in range(n):
            m = y[i] * scores[i]
            if m > 0.0:
                out[i] = -y[i] * math.exp(-m) / (1.0 + math.exp(-m))
            else:
                out[i] = -y[i] / (1.0 + math.exp(m))
    else:
        for i in range(n):
            out[i] = 2.0 * (scores[i] - y[i])


@njit(cache=True)
def _logistic_value_grad(w, X, y):
    scores = X @ w
    value = _loss_value(scores, y, LOSS_LOGISTIC)
    gs = np.empty(scores.shape[0])
    _loss_score_grad(scores, y, LOSS_LOGISTIC, gs)
    return value, X.T @ gs


@njit(cache=True)
def _least_squares_value_grad(w, X, y):
    scores = X @ w
    value = _loss_value(scores, y, LOSS_LEAST_SQUARES)
    gs = np.empty(scores.shape[0])
    _loss_score_grad(scores, y, LOSS_LEAST_SQUARES, gs)
    return value, X.T @ gs


def logistic_value_grad(w, X, y):
    return _logistic_value_grad(w, X, y)


def least_squares_value_grad(w, X, y):
    return _least_squares_value_grad(w, X, y)


@njit(cache=True)
def _penalty(w, pen_power, pen_weight):
    total = 0.0
    if pen_power == 1:
        for j in range(w.shape[0]):
            total += abs(w[j])
    else:
        for j in range(w.shape[0]):
            total += w[j] * w[j]
    return pen_weight * total


@njit(cache=True)
def prox_solve(X, y, w0, loss_kind, pen_power, pen_weight, nonneg, max_iter, tol):
    n, d = X.shape
    w = w0.copy()
    scores = X @ w
    fcur = _loss_value(scores, y, loss_kind) + _penalty(w, pen_power, pen_weight)
    gs = np.empty(n)
    wn = np.empty(d)
    n_iter = 0
    converged = False
    for it in range(max_iter):
        n_iter = it + 1
        _loss_score_grad(scores, y, loss_kind, gs)
        g = X.T @ gs
        if pen_power == 2:
            for j in range(d):
                g[j] += 2.0 * pen_weight * w[j]
        eta = 1.0
        accepted = False
        fn = fcur
        sn = scores
        while eta > BT_MIN_STEP:
            for j in range(d):
                v = w[j] - eta * g[j]
                if pen_power == 1:
                    t = eta * pen_weight
                    if nonneg:
                        v = v - t
                        if v < 0.0:
                            v = 0.0
                    else:
                        if v > t:
                            v -= t
                        elif v < -t:
                            v += t
                        else:
                            v = 0.0
                elif nonneg and v < 0.0:
                    v = 0.0
                wn[j] = v
            sn = X @ wn
            fn = _loss_value(sn, y, loss_kind) + _penalty(wn, pen_power, pen_weight)
            dd = 0.0
            for j in range(d):
                dv = wn[j] - w[j]
                dd += dv * dv
            if fn <= fcur - BT_SIGMA * dd / eta:
                accepted = True
                break
            eta *= BT_SHRINK
        if not accepted:
            converged = True
            break
        rel = (fcur - fn) / max(1.0, abs(fcur))
        for j in range(d):
            w[j] = wn[j]
        scores = sn
        fcur = fn
        if rel < tol:
            converged = True
            break
    return w, fcur, n_iter, converged


@njit(cache=True, fastmath=True)
def _kmeans_pp_refine(X, k, u01, km_iters):
    n, d = X.shape
    means = np.zeros((k, d))
    first = min(int(u01[0] * n), n - 1)
    for j in range(d):
        means[0, j] = X[first, j]
    d2 = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            dv = X[i, j] - means[0, j]
            s += dv * dv
        d2[i] = s
    for c in range(1, k):
        tot = 0.0
        for i in range(n):
            tot += d2[i]
        if tot <= 0.0:
            idx = min(int(u01[c] * n), n - 1)
        else:
            r = u01[c] * tot
            acc = 0.0
            idx = n - 1
            for i in range(n):
                acc += d2[i]
                if acc >= r:
                    idx = i
                    break
        for j in range(d):
            means[c, j] = X[idx, j]
        for i in range(n):
            s = 0.0
            for j in range(d):
                dv = X[i, j] - means[c, j]
                s += dv * dv
            if s < d2[i]:
                d2[i] = s
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(km_iters):
        changed = 0
        for i in range(n):
            best = 0
            bv = 1e300
            for c in range(k):
                s = 0.0
                for j in range(d):
                    dv = X[i, j] - means[c, j]
                    s += dv * dv
                if s < bv:
                    bv = s
                    best = c
            if assign[i] != best:
                changed += 1
                assign[i] = best
        if changed == 0:
            break
        for c in range(k):
            cnt = 0
            for j in range(d):
                means[c, j] = 0.0
            for i in range(n):
                if assign[i] == c:
                    cnt += 1
                    for j in range(d):
                        means[c, j] += X[i, j]
            if cnt > 0:
                for j in range(d):
                    means[c, j] /= cnt
            else:
                fb = min(int((0.5 * (c + 1) / k) * n), n - 1)
                for j in range(d):
                    means[c, j] = X[fb, j]
    return means


@njit(cache=True, fastmath=True)
def _em_diag(X, means, variances, weights, resp, max_iter, tol, reg):
    n, d = X.shape
    k = means.shape[0]
    loglik = -1e300
    for _ in range(max_iter):
        for c in range(k):
            logdet = 0.0
            for j in range(d):
                logdet += math.log(variances[c, j])
            lw = math.log(weights[c]) if weights[c] > 1e-300 else -690.0
            base = lw - 0.5 * (logdet + d * LOG2PI)
            for i in range(n):
                maha = 0.0
                for j in range(d):
                    dv = X[i, j] - means[c, j]
                    maha += dv * dv / variances[c, j]
                resp[i, c] = base - 0.5 * maha
        ll = 0.0
        for i in range(n):
            m = resp[i, 0]
            for c in range(1, k):
                if resp[i, c] > m:
                    m = resp[i, c]
            s = 0.0
            for c in range(k):
                e = math.exp(resp[i, c] - m)
                resp[i, c] = e
                s += e
            ll += m + math.log(s)
            inv = 1.0 / s
            for c in range(k):
                resp[i, c] *= inv
        if abs(ll - loglik) < tol * (1.0 + abs(ll)):
            loglik = ll
            break
        loglik = ll
        for c in range(k):
            nk = 0.0
            for i in range(n):
                nk += resp[i, c]
            weights[c] = nk / n
            nk_s = nk if nk > 1e-12 else 1e-12
            for j in range(d):
                s = 0.0
                for i in range(n):
                    s += resp[i, c] * X[i, j]
                means[c, j] = s / nk_s
            for j in range(d):
                s = 0.0
                for i in range(n):
                    dv = X[i, j] - means[c, j]
                    s += resp[i, c] * dv * dv
                variances[c, j] = s / nk_s + reg
    return loglik


@njit(cache=True, fastmath=True)
def gmm_fit_diag(X, k, uniforms, reg, km_iters, short_iters, polish_iters, tol):
    n, d = X.shape
    gvar = np.empty(d)
    for j in range(d):
        m = 0.0
        for i in range(n):
            m += X[i, j]
        m /= n
        v = 0.0
        for i in range(n):
            dv = X[i, j] - m
            v += dv * dv
        gvar[j] = v / n + reg
    resp = np.empty((n, k))
    best_ll = -1e300
    best_means = np.zeros((k, d))
    best_vars = np.zeros((k, d))
    best_weights = np.zeros(k)
    for r in range(uniforms.shape[0]):
        means = _kmeans_pp_refine(X, k, uniforms[r], km_iters)
        variances = np.empty((k, d))
        for c in range(k):
            for j in range(d):
                variances[c, j] = gvar[j]
        weights = np.full(k, 1.0 / k)
        ll = _em_diag(X, means, variances, weights, resp, short_iters, tol, reg)
        if ll > best_ll:
            best_ll = ll
            best_means[:] = means
            best_vars[:] = variances
            best_weights[:] = weights
    loglik = _em_diag(X, best_means, best_vars, best_weights, resp, polish_iters, tol, reg)
    return loglik, best_means, best_vars, best_weights, resp


def warmup():
    """Trigger JIT compilation of every kernel on tiny inputs."""
    X = np.array([[0.0, 0.1], [1.0, 0.9], [0.1, 0.2], [0.9, 1.1]])
    y = np.array([-1.0, 1.0, -1.0, 1.0])
    w = np.zeros(2)
    logistic_value_grad(w, X, y)
    least_squares_value_grad(w, X, y)
    for loss_kind in (LOSS_LOGISTIC, LOSS_LEAST_SQUARES):
        for pen_power in (1, 2):
            for nonneg in (True, False):
                prox_solve(X, y, w, loss_kind, pen_power, 0.1, nonneg, 5, 1e-8)
    gmm_fit_diag(X, 2, np.array([[0.3, 0.7]]), 1e-6, 2, 2, 5, 1e-5)
