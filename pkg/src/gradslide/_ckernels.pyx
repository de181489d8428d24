# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for Euclidean setups with a natively described ``f``.

Each routine mirrors its pure-Python counterpart operation by operation, so the
two backends agree up to summation-order rounding. Status codes: 0 ok,
1 the M search hit its cap, 2 the step cap was hit, 3 ``A`` fell below ``L``.
"""

import numpy as np
from libc.math cimport fabs, sqrt, pow

cdef double TEST_RTOL = 1e-12
cdef double PREDICT_GUARD = 1e-15


cdef inline bint descent_holds(double f_new, double f_old, double lin, double curv,
                               double sq, double slack) nogil:
    cdef double rhs = f_old + lin + 0.5 * curv * sq + slack
    cdef double s = 1.0
    if fabs(f_new) > s:
        s = fabs(f_new)
    if fabs(rhs) > s:
        s = fabs(rhs)
    return f_new <= rhs + TEST_RTOL * s


cdef double f_eval(int kind, double w, double nu, double[::1] fd, double[::1] fc,
                   double[::1] x, double[::1] g, bint grad) nogil:
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double s = 0.0, v, a
    if kind == 0:
        for i in range(n):
            v = x[i] - fc[i]
            s += fd[i] * v * v
            if grad:
                g[i] = fd[i] * v
        return 0.5 * s
    if kind == 1:
        for i in range(n):
            v = x[i]
            s += fabs(v)
            if grad:
                g[i] = w * ((v > 0) - (v < 0))
        return w * s
    for i in range(n):
        v = x[i]
        a = fabs(v)
        s += pow(a, 1.0 + nu)
        if grad:
            g[i] = w * ((v > 0) - (v < 0)) * pow(a, nu)
    return w / (1.0 + nu) * s


cdef void prox(int region, double[::1] lo, double[::1] hi, double[::1] ctr, double rad,
               double[::1] lin, double[::1] a1, double w1, double[::1] a2, double w2,
               double[::1] out) nogil:
    cdef Py_ssize_t i, n = out.shape[0]
    cdef double ws = w1 + w2, r1 = w1 / ws, r2 = w2 / ws, v, r = 0.0
    for i in range(n):
        v = -lin[i] / ws
        if w1 > 0:
            v = v + r1 * a1[i]
        if w2 > 0:
            v = v + r2 * a2[i]
        out[i] = v
    if region == 1:
        for i in range(n):
            if out[i] < lo[i]:
                out[i] = lo[i]
            elif out[i] > hi[i]:
                out[i] = hi[i]
    elif region == 2:
        for i in range(n):
            v = out[i] - ctr[i]
            r += v * v
        r = sqrt(r)
        if r > rad:
            for i in range(n):
                out[i] = ctr[i] + (out[i] - ctr[i]) * (rad / r)


cdef inline double next_coefficient(double lam_prev, double e_next) nogil:
    return 2.0 / (1.0 + sqrt(1.0 + 4.0 * e_next / lam_prev))


cdef inline double termination_root_squared(double alpha) nogil:
    cdef double r = 2.0 * alpha / (alpha + sqrt(alpha * alpha + 4.0))
    return r * r


def adaptive_inner(int kind, double w, double nu, double[::1] fd, double[::1] fc,
                   int region, double[::1] lo, double[::1] hi, double[::1] ctr, double rad,
                   double[::1] x_prev, double[::1] x_tilde_prev, double[::1] gg,
                   double eta, double m0, object budget, int max_doublings, long long max_inner,
                   list p_weights, list budgets):
    cdef Py_ssize_t i, n = x_prev.shape[0]
    cdef double[::1] x = np.array(x_prev, dtype=float)
    cdef double[::1] df = np.empty(n)
    cdef double[::1] df_new = np.empty(n)
    cdef double[::1] lin = np.empty(n)
    cdef double[::1] xn = np.empty(n)
    cdef double[::1] acc = np.zeros(n)
    cdef double[::1] tmp
    cdef double fx, fn, dot, sq, d, m = m0, inv_sum = 0.0
    cdef int j, total = 0
    cdef long long fv = 0, fg = 0, pc = 0, t = 1
    cdef int status = 0
    fx = f_eval(kind, w, nu, fd, fc, x, df, True)
    fv += 1
    fg += 1
    while True:
        for i in range(n):
            lin[i] = gg[i] + df[i]
        j = 0
        while True:
            prox(region, lo, hi, ctr, rad, lin, x_tilde_prev, eta, x, m, xn)
            pc += 1
            fn = f_eval(kind, w, nu, fd, fc, xn, df_new, True)
            fv += 1
            dot = 0.0
            sq = 0.0
            for i in range(n):
                d = xn[i] - x[i]
                dot += df[i] * d
                sq += d * d
            if descent_holds(fn, fx, dot, m, sq, 0.0):
                break
            m *= 2.0
            j += 1
            total += 1
            if total > max_doublings:
                status = 1
                break
        if status:
            break
        budget = (1 << j) * (budget - t + 1) - 1 + t
        for i in range(n):
            acc[i] += xn[i] / m
        inv_sum += 1.0 / m
        if p_weights is not None:
            p_weights.append(m)
            budgets.append(budget)
        tmp = x
        x = xn
        xn = tmp
        tmp = df
        df = df_new
        df_new = tmp
        fx = fn
        if budget <= t:
            break
        if t >= max_inner:
            status = 2
            break
        fg += 1
        t += 1
    out = np.asarray(acc) / inv_sum if inv_sum > 0 else np.asarray(x).copy()
    return (np.asarray(x).copy(), out, m, int(t), total, fv, fg, pc, status)


def ugs_inner(int kind, double w, double nu, double[::1] fd, double[::1] fc,
              int region, double[::1] lo, double[::1] hi, double[::1] ctr, double rad,
              double[::1] x_anchor, double[::1] xt0, double[::1] xbar_prev, double[::1] gg,
              double lip, double gamma, double m_start, double eps, double tol,
              int max_doublings, long long max_inner, list trace):
    cdef Py_ssize_t i, n = x_anchor.shape[0]
    cdef double[::1] x = np.array(x_anchor, dtype=float)
    cdef double[::1] xt = np.array(xt0, dtype=float)
    cdef double[::1] xb0 = np.empty(n)
    cdef double[::1] xu = np.empty(n)
    cdef double[::1] dfu = np.empty(n)
    cdef double[::1] lin = np.empty(n)
    cdef double[::1] xn = np.empty(n)
    cdef double[::1] xtn = np.empty(n)
    cdef double[::1] xbn = np.empty(n)
    cdef double[::1] scratch = np.empty(n)
    cdef double[::1] tmp
    cdef double eta = lip * gamma, m_prev = m_start, a_prev = 0.0, c = 1.0
    cdef double m, alpha, fu, fb, p, dot, sq, d, a, slack
    cdef double m_cap = m_start * pow(2.0, max_doublings)
    cdef long long t = 1, fv = 0, fg = 0, pc = 0, doublings = 0
    cdef int status = 0
    cdef bint done, forced
    cdef list rejected = None
    for i in range(n):
        xb0[i] = (1.0 - gamma) * xbar_prev[i]
    while True:
        m = c * m_prev
        if trace is not None:
            rejected = []
        while True:
            alpha = 1.0 if t == 1 else next_coefficient(a_prev, m)
            for i in range(n):
                xu[i] = xb0[i] + gamma * ((1.0 - alpha) * xt[i] + alpha * x[i])
            fu = f_eval(kind, w, nu, fd, fc, xu, dfu, True)
            fv += 1
            fg += 1
            p = lip * gamma * (1.0 - alpha) / alpha + gamma * m * alpha
            for i in range(n):
                lin[i] = gg[i] + dfu[i]
            prox(region, lo, hi, ctr, rad, lin, x_anchor, eta, x, p, xn)
            pc += 1
            for i in range(n):
                xtn[i] = (1.0 - alpha) * xt[i] + alpha * xn[i]
                xbn[i] = xb0[i] + gamma * xtn[i]
            fb = f_eval(kind, w, nu, fd, fc, xbn, scratch, False)
            fv += 1
            dot = 0.0
            sq = 0.0
            for i in range(n):
                d = xbn[i] - xu[i]
                dot += dfu[i] * d
                sq += d * d
            slack = 0.5 * gamma * alpha * eps
            if descent_holds(fb, fu, dot, m, sq, slack):
                break
            if rejected is not None:
                rejected.append((m, alpha))
            m *= 2.0
            doublings += 1
            if m > m_cap:
                status = 1
                break
        if status:
            break
        tmp = x
        x = xn
        xn = tmp
        tmp = xt
        xt = xtn
        xtn = tmp
        a = m * alpha * alpha
        done = fabs(a - lip) <= tol * lip
        forced = False
        if done:
            c = 1.0
        elif m * termination_root_squared(alpha) <= lip * (1.0 + PREDICT_GUARD):
            if a <= lip:
                status = 3
                break
            d = 1.0 - lip / a
            c = lip / (d * d * m)
            forced = True
        else:
            c = 1.0
        if trace is not None:
            trace.append((int(t), m, alpha, a, c, bool(forced), rejected))
        if done:
            break
        if t >= max_inner:
            status = 2
            break
        m_prev = m
        a_prev = a
        t += 1
    return (np.asarray(x).copy(), np.asarray(xt).copy(), np.asarray(xbn).copy(), m, int(t),
            int(doublings), fv, fg, pc, status)
