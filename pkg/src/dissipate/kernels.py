"""Hot numeric loops, each with a numba and a pure-numpy implementation.

The public names at the bottom of the module resolve to the numba versions
unless ``DISSIPATE_DISABLE_NUMBA`` is set (see :mod:`dissipate._accel`).
Both variants are importable under ``*_numba`` / ``*_numpy`` so that tests
and the benchmark can compare them directly.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# hysteresis
# ---------------------------------------------------------------------------

def loop_integral_numpy(disp, force, closed):
    """Trapezoidal integral of force d(disp) along the sample path."""
    d = np.asarray(disp, dtype=np.float64)
    f = np.asarray(force, dtype=np.float64)
    if closed:
        d = np.append(d, d[0])
        f = np.append(f, f[0])
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(d)))


@njit
def loop_integral_numba(disp, force, closed):
    n = disp.shape[0]
    total = 0.0
    for i in range(n - 1):
        total += 0.5 * (force[i] + force[i + 1]) * (disp[i + 1] - disp[i])
    if closed and n > 1:
        total += 0.5 * (force[n - 1] + force[0]) * (disp[0] - disp[n - 1])
    return total


def upward_crossings_numpy(disp, threshold):
    """Indices of upward zero crossings, with hysteresis band ``threshold``.

    A crossing is registered when the signal moves from below ``-threshold``
    to above ``+threshold``; the returned index is whichever of the last
    sample at or below zero and its successor lies closer to zero. Also returns the sign of the first
    excursion that leaves the band (0 if none does).
    """
    d = np.asarray(disp, dtype=np.float64)
    state = 0
    first_sign = 0
    last_nonpos = -1
    out = []
    for i, v in enumerate(d):
        if v <= 0.0:
            last_nonpos = i
        if v > threshold:
            if state == -1:
                j = last_nonpos
                if abs(d[j + 1]) < abs(d[j]):
                    j += 1
                out.append(j)
            if first_sign == 0:
                first_sign = 1
            state = 1
        elif v < -threshold:
            if first_sign == 0:
                first_sign = -1
            state = -1
    return np.array(out, dtype=np.int64), first_sign


@njit
def upward_crossings_numba(disp, threshold):
    n = disp.shape[0]
    out = np.empty(n, dtype=np.int64)
    count = 0
    state = 0
    first_sign = 0
    last_nonpos = -1
    for i in range(n):
        v = disp[i]
        if v <= 0.0:
            last_nonpos = i
        if v > threshold:
            if state == -1:
                j = last_nonpos
                if abs(disp[j + 1]) < abs(disp[j]):
                    j += 1
                out[count] = j
                count += 1
            if first_sign == 0:
                first_sign = 1
            state = 1
        elif v < -threshold:
            if first_sign == 0:
                first_sign = -1
            state = -1
    return out[:count].copy(), first_sign


# ---------------------------------------------------------------------------
# LASSO coordinate descent
# ---------------------------------------------------------------------------

def lasso_cd_numpy(X, y, penalty, beta, tol, max_sweeps):
    """Cyclic coordinate descent for ``sum(r**2) + penalty * sum(|beta|)``.

    ``X`` and ``y`` must already be centered (the intercept is handled by the
    caller). ``beta`` is updated in place. Returns ``(n_sweeps, last_delta,
    objective_trace)`` where the trace holds the objective before the first
    sweep and after every sweep.
    """
    m, n = X.shape
    col_ss = np.einsum("ij,ij->j", X, X)
    r = y - X @ beta
    half = 0.5 * penalty
    trace = [float(r @ r + penalty * np.abs(beta).sum())]
    delta = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        delta = 0.0
        for j in range(n):
            if col_ss[j] == 0.0:
                new = 0.0
            else:
                rho = X[:, j] @ r + col_ss[j] * beta[j]
                new = np.sign(rho) * max(abs(rho) - half, 0.0) / col_ss[j]
            step = new - beta[j]
            if step != 0.0:
                r -= step * X[:, j]
                beta[j] = new
                delta = max(delta, abs(step))
        sweeps += 1
        trace.append(float(r @ r + penalty * np.abs(beta).sum()))
        if delta < tol:
            break
    return sweeps, delta, np.array(trace)


@njit
def _lasso_objective(r, beta, penalty):
    s = 0.0
    for i in range(r.shape[0]):
        s += r[i] * r[i]
    a = 0.0
    for j in range(beta.shape[0]):
        a += abs(beta[j])
    return s + penalty * a


@njit
def lasso_cd_numba(X, y, penalty, beta, tol, max_sweeps):
    m, n = X.shape
    col_ss = np.zeros(n)
    for j in range(n):
        s = 0.0
        for i in range(m):
            s += X[i, j] * X[i, j]
        col_ss[j] = s
    r = y.copy()
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += X[i, j] * beta[j]
        r[i] -= acc
    half = 0.5 * penalty
    trace = np.empty(max_sweeps + 1)
    trace[0] = _lasso_objective(r, beta, penalty)
    delta = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        delta = 0.0
        for j in range(n):
            if col_ss[j] == 0.0:
                new = 0.0
            else:
                rho = col_ss[j] * beta[j]
                for i in range(m):
                    rho += X[i, j] * r[i]
                mag = abs(rho) - half
                if mag > 0.0:
                    new = (mag if rho > 0.0 else -mag) / col_ss[j]
                else:
                    new = 0.0
            step = new - beta[j]
            if step != 0.0:
                for i in range(m):
                    r[i] -= step * X[i, j]
                beta[j] = new
                if abs(step) > delta:
                    delta = abs(step)
        sweeps += 1
        trace[sweeps] = _lasso_objective(r, beta, penalty)
        if delta < tol:
            break
    return sweeps, delta, trace[: sweeps + 1].copy()


# ---------------------------------------------------------------------------
# NCA regression
# ---------------------------------------------------------------------------

def nca_objective_grad_numpy(X, y, w, sigma, reg):
    """Regularized mean leave-one-out absolute error and its gradient in w.

    Distances are ``sum_l w_l**2 * |x_il - x_jl|`` and the kernel is
    ``exp(-d / sigma)``.
    """
    m = X.shape[0]
    absdiff = np.abs(X[:, None, :] - X[None, :, :])
    w2 = w * w
    D = absdiff @ w2
    np.fill_diagonal(D, np.inf)
    D -= D.min(axis=1, keepdims=True)
    P = np.exp(-D / sigma)
    P /= P.sum(axis=1, keepdims=True)
    loss = np.abs(y[:, None] - y[None, :])
    L = np.sum(P * loss, axis=1)
    A = np.einsum("ij,ijr->ir", P, absdiff)
    B = np.einsum("ij,ijr->ir", P * loss, absdiff)
    g = (L[:, None] * A - B).sum(axis=0)
    f = L.sum() / m + reg * np.sum(w2)
    grad = (2.0 * w / sigma) * g / m + 2.0 * reg * w
    return float(f), grad


@njit
def nca_objective_grad_numba(X, y, w, sigma, reg):
    m, n = X.shape
    w2 = w * w
    D = np.empty(m)
    P = np.empty(m)
    g = np.zeros(n)
    A = np.empty(n)
    B = np.empty(n)
    f = 0.0
    for i in range(m):
        dmin = np.inf
        for j in range(m):
            if j == i:
                continue
            s = 0.0
            for r in range(n):
                s += w2[r] * abs(X[i, r] - X[j, r])
            D[j] = s
            if s < dmin:
                dmin = s
        z = 0.0
        for j in range(m):
            if j == i:
                P[j] = 0.0
            else:
                P[j] = np.exp(-(D[j] - dmin) / sigma)
                z += P[j]
        Li = 0.0
        for r in range(n):
            A[r] = 0.0
            B[r] = 0.0
        for j in range(m):
            if j == i:
                continue
            p = P[j] / z
            l = abs(y[i] - y[j])
            Li += p * l
            for r in range(n):
                dr = abs(X[i, r] - X[j, r])
                A[r] += p * dr
                B[r] += p * l * dr
        f += Li
        for r in range(n):
            g[r] += Li * A[r] - B[r]
    f /= m
    reg_term = 0.0
    for r in range(n):
        reg_term += w2[r]
    f += reg * reg_term
    grad = (2.0 * w / sigma) * g / m + 2.0 * reg * w
    return f, grad


def nca_predict_numpy(Xtrain, ytrain, w, sigma, Xnew):
    """Kernel-weighted neighbour average of training targets."""
    D = np.abs(Xnew[:, None, :] - Xtrain[None, :, :]) @ (w * w)
    D -= D.min(axis=1, keepdims=True)
    P = np.exp(-D / sigma)
    P /= P.sum(axis=1, keepdims=True)
    return P @ ytrain


@njit
def nca_predict_numba(Xtrain, ytrain, w, sigma, Xnew):
    m, n = Xtrain.shape
    q = Xnew.shape[0]
    w2 = w * w
    out = np.empty(q)
    D = np.empty(m)
    for k in range(q):
        dmin = np.inf
        for j in range(m):
            s = 0.0
            for r in range(n):
                s += w2[r] * abs(Xnew[k, r] - Xtrain[j, r])
            D[j] = s
            if s < dmin:
                dmin = s
        z = 0.0
        acc = 0.0
        for j in range(m):
            e = np.exp(-(D[j] - dmin) / sigma)
            z += e
            acc += e * ytrain[j]
        out[k] = acc / z
    return out


# ---------------------------------------------------------------------------
# ARD squared-exponential kernel
# ---------------------------------------------------------------------------

def ard_kernel_numpy(X1, X2, length_scales, signal_var):
    """``signal_var * exp(-0.5 * sum_d ((x1_d - x2_d) / l_d)**2)``."""
    A = X1 / length_scales
    B = X2 / length_scales
    sq = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=2)
    return signal_var * np.exp(-0.5 * sq)


@njit
def ard_kernel_numba(X1, X2, length_scales, signal_var):
    m1, n = X1.shape
    m2 = X2.shape[0]
    K = np.empty((m1, m2))
    inv = 1.0 / length_scales
    for i in range(m1):
        for j in range(m2):
            s = 0.0
            for d in range(n):
                t = (X1[i, d] - X2[j, d]) * inv[d]
                s += t * t
            K[i, j] = signal_var * np.exp(-0.5 * s)
    return K


def ard_grad_traces_numpy(X, M, length_scales):
    """``sum_ij M_ij (x_id - x_jd)**2 / l_d**2`` for every dimension d."""
    n = X.shape[1]
    out = np.empty(n)
    for d in range(n):
        diff = X[:, d, None] - X[None, :, d]
        out[d] = np.sum(M * diff * diff) / length_scales[d] ** 2
    return out


@njit
def ard_grad_traces_numba(X, M, length_scales):
    m, n = X.shape
    out = np.zeros(n)
    for i in range(m):
        for j in range(m):
            mij = M[i, j]
            for d in range(n):
                t = X[i, d] - X[j, d]
                out[d] += mij * t * t
    for d in range(n):
        out[d] /= length_scales[d] * length_scales[d]
    return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if USE_NUMBA:
    loop_integral = loop_integral_numba
    upward_crossings = upward_crossings_numba
    lasso_cd = lasso_cd_numba
    nca_objective_grad = nca_objective_grad_numba
    nca_predict = nca_predict_numba
    ard_kernel = ard_kernel_numba
    ard_grad_traces = ard_grad_traces_numba
else:
    loop_integral = loop_integral_numpy
    upward_crossings = upward_crossings_numpy
    lasso_cd = lasso_cd_numpy
    nca_objective_grad = nca_objective_grad_numpy
    nca_predict = nca_predict_numpy
    ard_kernel = ard_kernel_numpy
    ard_grad_traces = ard_grad_traces_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
