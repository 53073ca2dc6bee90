"""Compiled likelihood, Newton and monitoring kernels.

Every likelihood in the package is a special case of one form.  Subject
``j`` contributes

    a0 * N_j + a1 * T_j + sum_{k<N_j} log(1 + k phi) - log N_j!
        + log sum_c w_c exp(A_c),
    A_c = N_j o_c - (N_j + 1/phi) log(1 + phi Lambda_c(S_j)),
    Lambda_c(S) = exp(a0 + o_c) (exp(a1 S) - 1) / a1,

where ``T_j`` is the sum of the subject's event study times and the offset
``o_c = beta * x_c + f_c``.  The unblinded model has one component with
``x`` the group indicator; the blinded mixture has two components with
``x = (1, 0)`` and ``beta`` pinned at the planning alternative; lumping has
one component with ``f = log(w_T exp(beta) + w_C)``.  Pinning ``a1 = 0``
gives the constant-rate negative binomial model.

Parameter vectors are always ``(a0, a1, beta, phi)``; a boolean mask marks
the free coordinates.
"""

import math

import numpy as np
from numba import njit

PHI_MIN = 1e-8
PHI_INIT_LO = 1e-3
PHI_INIT_HI = 50.0

STATUS_OK = 0
STATUS_MAXITER = 1
STATUS_BAD_START = 2
STATUS_LINESEARCH = 3
STATUS_NO_EVENTS = 4

MODE_TREND_LUMP = 0
MODE_TREND_MIX = 1
MODE_CONST_LUMP = 2
MODE_CONST_MIX = 3


@njit(cache=True)
def g012(a1, s):
    """Integrals of u**k * exp(a1 * u) over [0, s] for k = 0, 1, 2."""
    x = a1 * s
    if abs(x) < 0.1:
        term = 1.0
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        n = 0
        while True:
            s0 += term / (n + 1)
            s1 += term / (n + 2)
            s2 += term / (n + 3)
            n += 1
            term *= x / n
            if abs(term) < 1e-18 or n > 40:
                break
        return s * s0, s * s * s1, s * s * s * s2
    em = math.expm1(x)
    e = em + 1.0
    g0 = em / a1
    g1 = (s * e - g0) / a1
    g2 = (s * s * e - 2.0 * g1) / a1
    return g0, g1, g2


@njit(cache=True)
def _log1p_over(y, lp):
    # log1p(y) / y given lp = log1p(y)
    if y < 1e-8:
        return 1.0 - y / 2.0 + y * y / 3.0
    return lp / y


@njit(cache=True)
def _h1(y, lp):
    # (log1p(y) - y / (1 + y)) / y**2 given lp = log1p(y)
    if y < 1e-2:
        out = 0.0
        p = 1.0
        for n in range(2, 16):
            out += (1.0 if n % 2 == 0 else -1.0) * (n - 1.0) / n * p
            p *= y
        return out
    return (lp - y / (1.0 + y)) / (y * y)


@njit(cache=True)
def _h2(y, lp):
    # (-2 log1p(y) + 2 y / (1 + y) + y**2 / (1 + y)**2) / y**3 given lp = log1p(y)
    if y < 1e-2:
        out = 0.0
        p = 1.0
        for n in range(3, 17):
            out += (1.0 if n % 2 == 1 else -1.0) * (3.0 - n - 2.0 / n) * p
            p *= y
        return out
    d = 1.0 + y
    return (-2.0 * lp + 2.0 * y / d + y * y / (d * d)) / (y * y * y)


@njit(cache=True, inline="always")
def _component(e, o, phi, n, x, g0, g1, g2):
    """Value of ``A_c`` with gradient and upper-triangle Hessian as scalars.

    ``o`` is the component offset and ``e = exp(a0 + o)``.  Returned order:
    value, d0..d3, h00, h01, h02, h03, h11, h12, h13, h22, h23, h33.
    """
    lam = e * g0
    lam1 = e * g1
    lam2 = e * g2
    y = phi * lam
    den = 1.0 + y
    iden = 1.0 / den
    q = 1.0 + phi * n
    lp = math.log1p(y)
    value = n * o - n * lp - lam * _log1p_over(y, lp)

    dl2 = x * lam
    qi = q * iden
    d0 = -qi * lam
    d1 = -qi * lam1
    d2 = x * n - qi * dl2
    d3 = -n * lam * iden + lam * lam * _h1(y, lp)

    c1 = -qi
    c2 = qi * phi * iden
    h00 = c1 * lam + c2 * lam * lam
    h01 = c1 * lam1 + c2 * lam * lam1
    h02 = c1 * dl2 + c2 * lam * dl2
    h11 = c1 * lam2 + c2 * lam1 * lam1
    h12 = c1 * x * lam1 + c2 * lam1 * dl2
    h22 = c1 * x * dl2 + c2 * dl2 * dl2
    r = (n - lam) * iden * iden
    h03 = -lam * r
    h13 = -lam1 * r
    h23 = -dl2 * r
    h33 = n * lam * lam * iden * iden + lam * lam * lam * _h2(y, lp)
    return value, d0, d1, d2, d3, h00, h01, h02, h03, h11, h12, h13, h22, h23, h33


@njit(cache=True)
def evaluate(theta, counts, expo, xs, unblinded, comp_x, comp_f, comp_logw,
             sum_n, sum_t, count_tail, lfact, grad, hess):
    """Log-likelihood; gradient and Hessian are written into ``grad``/``hess``.

    ``count_tail[k]`` is the number of subjects with more than ``k`` events.
    At most two components are supported.  Derivatives with respect to
    ``beta`` are only formed when ``unblinded`` is set, since blinded fits
    never move ``beta``.
    """
    a0 = theta[0]
    a1 = theta[1]
    beta = theta[2]
    phi = theta[3]
    value = a0 * sum_n + a1 * sum_t - lfact
    G0 = sum_n
    G1 = sum_t
    G2 = 0.0
    G3 = 0.0
    H00 = H01 = H02 = H03 = H11 = H12 = H13 = H22 = H23 = H33 = 0.0
    for k in range(1, count_tail.shape[0]):
        c = count_tail[k]
        if c == 0.0:
            continue
        kp = 1.0 + k * phi
        value += c * math.log(kp)
        G3 += c * k / kp
        H33 -= c * k * k / (kp * kp)

    ncomp = comp_f.shape[0]
    o_a = beta * comp_x[0] + comp_f[0]
    e_a = math.exp(a0 + o_a)
    x_a = comp_x[0]
    lw_a = comp_logw[0]
    if ncomp > 1:
        o_b = beta * comp_x[1] + comp_f[1]
        e_b = math.exp(a0 + o_b)
        x_b = comp_x[1]
        lw_b = comp_logw[1]
    else:
        o_b = e_b = x_b = lw_b = 0.0
    e_ctl = math.exp(a0)
    e_trt = math.exp(a0 + beta)

    for j in range(counts.shape[0]):
        g0, g1, g2 = g012(a1, expo[j])
        n = counts[j]
        if ncomp == 1:
            if unblinded:
                x = xs[j]
                if x == 0.0:
                    o = 0.0
                    e = e_ctl
                elif x == 1.0:
                    o = beta
                    e = e_trt
                else:
                    o = beta * x
                    e = math.exp(a0 + o)
            else:
                x = x_a
                o = o_a
                e = e_a
            (v, d0, d1, d2, d3, h00, h01, h02, h03, h11, h12, h13, h22, h23,
             h33) = _component(e, o, phi, n, x, g0, g1, g2)
            value += lw_a + v
            G0 += d0
            G1 += d1
            G2 += d2
            G3 += d3
            H00 += h00
            H01 += h01
            H02 += h02
            H03 += h03
            H11 += h11
            H12 += h12
            H13 += h13
            H22 += h22
            H23 += h23
            H33 += h33
        else:
            (va, a_0, a_1, a_2, a_3, ha00, ha01, ha02, ha03, ha11, ha12, ha13, ha22, ha23,
             ha33) = _component(e_a, o_a, phi, n, x_a, g0, g1, g2)
            (vb, b_0, b_1, b_2, b_3, hb00, hb01, hb02, hb03, hb11, hb12, hb13, hb22, hb23,
             hb33) = _component(e_b, o_b, phi, n, x_b, g0, g1, g2)
            va += lw_a
            vb += lw_b
            if va >= vb:
                r = math.exp(vb - va)
                value += va + math.log1p(r)
                pa = 1.0 / (1.0 + r)
            else:
                r = math.exp(va - vb)
                value += vb + math.log1p(r)
                pa = r / (1.0 + r)
            pb = 1.0 - pa
            m0 = pa * a_0 + pb * b_0
            m1 = pa * a_1 + pb * b_1
            m3 = pa * a_3 + pb * b_3
            G0 += m0
            G1 += m1
            G3 += m3
            # mixture Hessian: E[h] + Cov(d) = E[h] + pa pb (da - db)(da - db)'
            pp = pa * pb
            e0 = a_0 - b_0
            e1 = a_1 - b_1
            e3 = a_3 - b_3
            H00 += pa * ha00 + pb * hb00 + pp * e0 * e0
            H01 += pa * ha01 + pb * hb01 + pp * e0 * e1
            H03 += pa * ha03 + pb * hb03 + pp * e0 * e3
            H11 += pa * ha11 + pb * hb11 + pp * e1 * e1
            H13 += pa * ha13 + pb * hb13 + pp * e1 * e3
            H33 += pa * ha33 + pb * hb33 + pp * e3 * e3
            if unblinded:
                m2 = pa * a_2 + pb * b_2
                e2 = a_2 - b_2
                G2 += m2
                H02 += pa * ha02 + pb * hb02 + pp * e0 * e2
                H12 += pa * ha12 + pb * hb12 + pp * e1 * e2
                H22 += pa * ha22 + pb * hb22 + pp * e2 * e2
                H23 += pa * ha23 + pb * hb23 + pp * e2 * e3
    if not unblinded:
        G2 = 0.0
        H02 = H12 = H22 = H23 = 0.0
    grad[0] = G0
    grad[1] = G1
    grad[2] = G2
    grad[3] = G3
    hess[0, 0] = H00
    hess[0, 1] = hess[1, 0] = H01
    hess[0, 2] = hess[2, 0] = H02
    hess[0, 3] = hess[3, 0] = H03
    hess[1, 1] = H11
    hess[1, 2] = hess[2, 1] = H12
    hess[1, 3] = hess[3, 1] = H13
    hess[2, 2] = H22
    hess[2, 3] = hess[3, 2] = H23
    hess[3, 3] = H33
    return value


@njit(cache=True)
def _chol_solve(m, rhs, p, out):
    """Solve ``m[:p,:p] out = rhs`` by Cholesky; False if not positive definite."""
    low = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1):
            s = m[i, j]
            for k in range(j):
                s -= low[i, k] * low[j, k]
            if i == j:
                if not (s > 0.0) or not np.isfinite(s):
                    return False
                low[i, i] = math.sqrt(s)
            else:
                low[i, j] = s / low[j, j]
    z = np.empty(p)
    for i in range(p):
        s = rhs[i]
        for k in range(i):
            s -= low[i, k] * z[k]
        z[i] = s / low[i, i]
    for i in range(p - 1, -1, -1):
        s = z[i]
        for k in range(i + 1, p):
            s -= low[k, i] * out[k]
        out[i] = s / low[i, i]
    return True


@njit(cache=True)
def newton(theta0, free, counts, expo, xs, unblinded, comp_x, comp_f, comp_logw,
           sum_n, sum_t, count_tail, lfact, max_iter, theta, grad, hess):
    """Safeguarded Newton-Raphson ascent over the free coordinates.

    Returns ``(status, iterations, loglik, at_phi_bound)``; the final point,
    gradient and Hessian are left in ``theta``, ``grad`` and ``hess``.
    """
    for a in range(4):
        theta[a] = theta0[a]
    if free[3] and theta[3] < PHI_MIN:
        theta[3] = PHI_MIN
    value = evaluate(theta, counts, expo, xs, unblinded, comp_x, comp_f, comp_logw,
                     sum_n, sum_t, count_tail, lfact, grad, hess)
    if not np.isfinite(value):
        return STATUS_BAD_START, 0, value, False

    idx = np.empty(4, dtype=np.int64)
    idx2 = np.empty(4, dtype=np.int64)
    sub = np.empty((4, 4))
    rhs = np.empty(4)
    step = np.empty(4)
    full = np.empty(4)
    trial = np.empty(4)
    g_new = np.empty(4)
    h_new = np.empty((4, 4))
    at_bound = False

    for it in range(max_iter + 1):
        at_bound = free[3] and theta[3] <= PHI_MIN * (1.0 + 1e-12) and grad[3] < 0.0
        p = 0
        for a in range(4):
            if free[a] and not (a == 3 and at_bound):
                idx[p] = a
                p += 1
        if p == 0:
            return STATUS_OK, it, value, at_bound
        for a in range(p):
            rhs[a] = grad[idx[a]]
            for b in range(p):
                sub[a, b] = -hess[idx[a], idx[b]]
        pure = _chol_solve(sub, rhs, p, step)
        if pure:
            dec = 0.0
            rel = 0.0
            for a in range(p):
                dec += rhs[a] * step[a]
                r = abs(step[a]) / max(1.0, abs(theta[idx[a]]))
                if r > rel:
                    rel = r
            if rel < 1e-9 and math.sqrt(max(dec, 0.0)) < 1e-8:
                return STATUS_OK, it, value, at_bound
        else:
            scale = 0.0
            for a in range(p):
                scale = max(scale, abs(sub[a, a]))
            lam = 1e-8 * max(scale, 1.0)
            ok = False
            for _ in range(40):
                for a in range(p):
                    sub[a, a] = -hess[idx[a], idx[a]] + lam
                if _chol_solve(sub, rhs, p, step):
                    ok = True
                    break
                lam *= 10.0
            if not ok:
                return STATUS_LINESEARCH, it, value, at_bound
        if it == max_iter:
            break
        for a in range(4):
            full[a] = 0.0
        for a in range(p):
            full[idx[a]] = step[a]
        t = 1.0
        jumped = False
        if free[3] and not at_bound and full[3] < -0.5 * theta[3]:
            # The quadratic model pushes phi through zero.  Fix the phi move
            # (first straight to the bound, else to half its value) and take
            # the conditional Newton step for the other coordinates.
            q = 0
            for a in range(p):
                if idx[a] != 3:
                    idx2[q] = idx[a]
                    q += 1
            for cand in range(2):
                delta = PHI_MIN - theta[3] if cand == 0 else -0.5 * theta[3]
                for a in range(q):
                    rhs[a] = grad[idx2[a]] + hess[idx2[a], 3] * delta
                    for b in range(q):
                        sub[a, b] = -hess[idx2[a], idx2[b]]
                for a in range(4):
                    full[a] = 0.0
                full[3] = delta
                if q > 0 and not _chol_solve(sub, rhs, q, step):
                    continue
                for a in range(q):
                    full[idx2[a]] = step[a]
                if cand == 1:
                    break
                for a in range(4):
                    trial[a] = theta[a] + full[a]
                trial[3] = PHI_MIN
                v_new = evaluate(trial, counts, expo, xs, unblinded, comp_x, comp_f, comp_logw,
                                 sum_n, sum_t, count_tail, lfact, g_new, h_new)
                if np.isfinite(v_new) and v_new > value:
                    jumped = True
                    break
        accepted = jumped
        for _ in range(0 if jumped else 31):
            for a in range(4):
                trial[a] = theta[a] + t * full[a]
            if free[3] and trial[3] < PHI_MIN:
                trial[3] = PHI_MIN
            v_new = evaluate(trial, counts, expo, xs, unblinded, comp_x, comp_f, comp_logw,
                             sum_n, sum_t, count_tail, lfact, g_new, h_new)
            if np.isfinite(v_new) and v_new >= value - 1e-12 * max(1.0, abs(value)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return STATUS_LINESEARCH, it, value, at_bound
        for a in range(4):
            theta[a] = trial[a]
            grad[a] = g_new[a]
            for b in range(4):
                hess[a, b] = h_new[a, b]
        value = v_new
    return STATUS_MAXITER, max_iter, value, at_bound


@njit(cache=True)
def fisher_block(a0, a1, beta, phi, expo, xs, wts, out):
    """Expected information for ``(a0, a1, beta)`` summed with weights ``wts``."""
    for a in range(3):
        for b in range(3):
            out[a, b] = 0.0
    for j in range(expo.shape[0]):
        w = wts[j]
        if w == 0.0:
            continue
        x = xs[j]
        g0, g1, g2 = g012(a1, expo[j])
        e = math.exp(a0 + beta * x)
        lam = e * g0
        lam1 = e * g1
        lam2 = e * g2
        den = 1.0 + phi * lam
        out[0, 0] += w * lam / den
        out[0, 1] += w * lam1 / den
        out[0, 2] += w * x * lam / den
        out[1, 1] += w * (lam2 - phi * lam1 * lam1 / den)
        out[1, 2] += w * x * lam1 / den
        out[2, 2] += w * x * x * lam / den
    out[1, 0] = out[0, 1]
    out[2, 0] = out[0, 2]
    out[2, 1] = out[1, 2]


@njit(cache=True)
def blinded_fisher_block(a0, a1, beta, phi, expo, w_t, out):
    """Fisher block with group sums replaced by allocation-weighted blinded sums."""
    for a in range(3):
        for b in range(3):
            out[a, b] = 0.0
    w_c = 1.0 - w_t
    eb = math.exp(beta)
    for j in range(expo.shape[0]):
        g0, g1, g2 = g012(a1, expo[j])
        ec = math.exp(a0)
        for arm in range(2):
            if arm == 0:
                w = w_c
                x = 0.0
                e = ec
            else:
                w = w_t
                x = 1.0
                e = ec * eb
            if w == 0.0:
                continue
            lam = e * g0
            lam1 = e * g1
            lam2 = e * g2
            den = 1.0 + phi * lam
            out[0, 0] += w * lam / den
            out[0, 1] += w * lam1 / den
            out[0, 2] += w * x * lam / den
            out[1, 1] += w * (lam2 - phi * lam1 * lam1 / den)
            out[1, 2] += w * x * lam1 / den
            out[2, 2] += w * x * lam / den
    out[1, 0] = out[0, 1]
    out[2, 0] = out[0, 2]
    out[2, 1] = out[1, 2]


@njit(cache=True)
def beta_information(block, with_trend):
    """``1 / (inverse block)[beta, beta]``; NaN when the block is singular."""
    if with_trend:
        a = block[0, 0]
        b = block[0, 1]
        c = block[1, 1]
        det = a * c - b * b
        if not (a > 0.0) or not (det > 0.0):
            return np.nan
        u = block[0, 2]
        v = block[1, 2]
        quad = (c * u * u - 2.0 * b * u * v + a * v * v) / det
        info = block[2, 2] - quad
    else:
        if not (block[0, 0] > 0.0):
            return np.nan
        info = block[2, 2] - block[0, 2] * block[0, 2] / block[0, 0]
    if not (info > 0.0) or not np.isfinite(info):
        return np.nan
    # relative cancellation guard: info is a difference of positive sums
    if info < 1e-12 * block[2, 2]:
        return np.nan
    return info


@njit(cache=True)
def initial_theta(counts, expo, log_mult, beta, out):
    """Moment-based start: overall rate, zero trend, method-of-moments ``phi``."""
    tot_n = 0.0
    tot_s = 0.0
    for j in range(counts.shape[0]):
        tot_n += counts[j]
        tot_s += expo[j]
    rate = tot_n / tot_s
    num = 0.0
    den = 0.0
    for j in range(counts.shape[0]):
        mu = rate * expo[j]
        num += (counts[j] - mu) ** 2 - mu
        den += mu * mu
    phi = num / den if den > 0.0 else 1.0
    phi = min(max(phi, PHI_INIT_LO), PHI_INIT_HI)
    out[0] = math.log(rate) - log_mult
    out[1] = 0.0
    out[2] = beta
    out[3] = phi


@njit(cache=True)
def _mode_setup(mode, beta_h1, w_t):
    mix = mode == MODE_TREND_MIX or mode == MODE_CONST_MIX
    if mix:
        comp_x = np.array([1.0, 0.0])
        comp_f = np.array([0.0, 0.0])
        comp_logw = np.array([math.log(w_t) if w_t > 0 else -np.inf,
                              math.log(1.0 - w_t) if w_t < 1 else -np.inf])
        log_mult = math.log(w_t * math.exp(beta_h1) + 1.0 - w_t)
    else:
        log_mult = math.log(w_t * math.exp(beta_h1) + 1.0 - w_t)
        comp_x = np.array([0.0])
        comp_f = np.array([log_mult])
        comp_logw = np.array([0.0])
    free = np.array([True, mode == MODE_TREND_LUMP or mode == MODE_TREND_MIX, False, True])
    return comp_x, comp_f, comp_logw, log_mult, free


@njit(cache=True)
def blinded_fit(counts, expo, sum_t, count_tail, mode, beta_h1, w_t, theta0, use_start,
                max_iter, theta):
    """Blinded nuisance fit for one snapshot; returns ``(status, iterations, loglik, bound)``."""
    comp_x, comp_f, comp_logw, log_mult, free = _mode_setup(mode, beta_h1, w_t)
    sum_n = 0.0
    for j in range(counts.shape[0]):
        sum_n += counts[j]
    if sum_n <= 0.0:
        return STATUS_NO_EVENTS, 0, np.nan, False
    start = np.empty(4)
    if use_start:
        for a in range(4):
            start[a] = theta0[a]
    else:
        initial_theta(counts, expo, log_mult, beta_h1, start)
    start[2] = beta_h1
    if not free[1]:
        start[1] = 0.0
        t_used = 0.0
    else:
        t_used = sum_t
    grad = np.empty(4)
    hess = np.empty((4, 4))
    xs = np.empty(0)
    return newton(start, free, counts, expo, xs, False, comp_x, comp_f, comp_logw,
                  sum_n, t_used, count_tail, 0.0, max_iter, theta, grad, hess)


@njit(cache=True)
def monitor_trial(entry, ev_cal, ev_subj, ev_s, cap, grid, mode, beta_h1, w_t, target,
                  max_count, max_iter, traj, fit_status):
    """Run the blinded monitoring loop on one simulated trial.

    ``entry`` must be sorted; ``ev_cal`` (event calendar times) sorted with
    matching subject indices ``ev_subj`` and study times ``ev_s``.  Fills
    ``traj`` with the information estimate per grid point (NaN when the fit
    failed or the point was not reached) and returns ``(stop_index, crossed)``.
    """
    n = entry.shape[0]
    n_ev = ev_cal.shape[0]
    counts = np.zeros(n)
    expo = np.empty(n)
    tail = np.zeros(max_count + 2)
    block = np.empty((3, 3))
    theta = np.empty(4)
    last = np.empty(4)
    have_last = False
    sum_t = 0.0
    ptr = 0
    m = 0
    with_trend = mode == MODE_TREND_LUMP or mode == MODE_TREND_MIX
    for gi in range(grid.shape[0]):
        traj[gi] = np.nan
        fit_status[gi] = -1
    for gi in range(grid.shape[0]):
        t = grid[gi]
        while ptr < n_ev and ev_cal[ptr] <= t:
            j = ev_subj[ptr]
            c = int(counts[j])
            tail[c] += 1.0
            counts[j] = c + 1.0
            sum_t += ev_s[ptr]
            ptr += 1
        while m < n and entry[m] < t:
            m += 1
        for j in range(m):
            expo[j] = min(t - entry[j], cap)
        status, _, _, _ = blinded_fit(counts[:m], expo[:m], sum_t, tail, mode, beta_h1, w_t,
                                      last, have_last, max_iter, theta)
        if status != STATUS_OK and have_last:
            # retry from the moment start before giving up on this grid point
            status, _, _, _ = blinded_fit(counts[:m], expo[:m], sum_t, tail, mode, beta_h1, w_t,
                                          last, False, max_iter, theta)
        fit_status[gi] = status
        if status != STATUS_OK:
            continue
        for a in range(4):
            last[a] = theta[a]
        have_last = True
        blinded_fisher_block(theta[0], theta[1], beta_h1, theta[3], expo[:m], w_t, block)
        info = beta_information(block, with_trend)
        traj[gi] = info
        if info >= target:
            return gi, True
    return grid.shape[0] - 1, False


@njit(cache=True)
def unblinded_fit(counts, expo, xs, sum_t, count_tail, lfact, with_trend, theta0, max_iter,
                  theta, grad, hess):
    """Unblinded fit of the trend (or constant-rate) model."""
    comp_x = np.array([0.0])
    comp_f = np.array([0.0])
    comp_logw = np.array([0.0])
    free = np.array([True, with_trend, True, True])
    sum_n = 0.0
    for j in range(counts.shape[0]):
        sum_n += counts[j]
    if sum_n <= 0.0:
        return STATUS_NO_EVENTS, 0, np.nan, False
    start = np.empty(4)
    for a in range(4):
        start[a] = theta0[a]
    t_used = sum_t
    if not with_trend:
        start[1] = 0.0
        t_used = 0.0
    return newton(start, free, counts, expo, xs, True, comp_x, comp_f, comp_logw,
                  sum_n, t_used, count_tail, lfact, max_iter, theta, grad, hess)
