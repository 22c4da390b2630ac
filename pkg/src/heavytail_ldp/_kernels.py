"""Compiled inner loops.

Laws, minorizations and cycle-start laws reach the kernels as flat arrays
(see ``Model.pack``, ``MinorizationParams.pack`` and ``pack_start``):

law   = (kind, da, db, dc, par)
    kind 0: discrete atoms ``da``/``db`` with cumulative probabilities ``dc``.
    kind 1: ``par = [p0, a_code, a1, a2, a3, b_code, b1, b2, b0_code, b01, b02]``.
minor = (mpar, qa, qw, dpar)
    ``mpar = [mode, d, theta, e0_lo, e0_hi]`` with mode 0 (atom at zero),
    1 (density grid) or -1 (no splitting); ``qa``/``qw`` quadrature of the
    untilted A-marginal (scaled by ``1 - p0``) and
    ``dpar = [a_code, a1, a2, a3, a_norm, b_code, b1, b2, p0, b0_code, b01, b02]``.
start = (spar, sv, sc)
    ``spar = [code, p1, p2]``: 0 uniform, 1 normal, 2 point, 3 discrete
    (values ``sv``, cumulative ``sc``).

Regeneration flags are drawn retrospectively: a transition ``x -> y`` with
``x`` in the small set is flagged with probability
``theta * phi(y) / p(x, y)`` evaluated under the *untilted* kernel, so a
change of measure on the innovations leaves the flag mechanism untouched
and the likelihood ratio is ``exp(alpha * S)``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

SQRT2PI = math.sqrt(2.0 * math.pi)


# ------------------------------------------------------------------ sampling


@njit(cache=True, nogil=True)
def _draw_b(g, code, p1, p2):
    if code == 0:
        return p1 + p2 * g.standard_normal()
    if code == 1:
        return p1 + (p2 - p1) * g.random()
    return p1


@njit(cache=True, nogil=True)
def _draw_a(g, code, p1, p2, p3):
    if code == 0:
        return math.exp(p1 + p2 * g.standard_normal())
    c = p3 + 1.0
    u = g.random()
    if abs(c) < 1e-14:
        return p1 * (p2 / p1) ** u
    lo_c = p1**c if p1 > 0 else 0.0
    return (lo_c + u * (p2**c - lo_c)) ** (1.0 / c)


@njit(cache=True, nogil=True)
def draw_ab(g, kind, da, db, dc, par):
    """One innovation ``(a, b, zero_atom)``."""
    if kind == 0:
        u = g.random()
        k = np.searchsorted(dc, u, side="right")
        if k >= da.shape[0]:
            k = da.shape[0] - 1
        a = da[k]
        return a, db[k], a == 0.0
    if par[0] > 0.0 and g.random() < par[0]:
        return 0.0, _draw_b(g, int(par[8]), par[9], par[10]), True
    a = _draw_a(g, int(par[1]), par[2], par[3], par[4])
    b = _draw_b(g, int(par[5]), par[6], par[7])
    return a, b, False


@njit(cache=True, nogil=True)
def draw_start(g, spar, sv, sc):
    code = int(spar[0])
    if code == 0:
        return spar[1] + (spar[2] - spar[1]) * g.random()
    if code == 1:
        return spar[1] + spar[2] * g.standard_normal()
    if code == 2:
        return spar[1]
    u = g.random()
    k = np.searchsorted(sc, u, side="right")
    if k >= sv.shape[0]:
        k = sv.shape[0] - 1
    return sv[k]


# ------------------------------------------------------------------ densities


@njit(cache=True, nogil=True)
def _pdf_b(z, code, p1, p2):
    if code == 0:
        if p2 <= 0.0:
            return 0.0
        t = (z - p1) / p2
        return math.exp(-0.5 * t * t) / (p2 * SQRT2PI)
    if code == 1:
        if p1 <= z <= p2:
            return 1.0 / (p2 - p1)
        return 0.0
    return 0.0


@njit(cache=True, nogil=True)
def _pdf_a(a, dpar):
    if a <= 0.0:
        return 0.0
    if int(dpar[0]) == 0:
        t = (math.log(a) - dpar[1]) / dpar[2]
        return math.exp(-0.5 * t * t) / (a * dpar[2] * SQRT2PI)
    if a < dpar[1] or a > dpar[2]:
        return 0.0
    return a ** dpar[3] / dpar[4]


@njit(cache=True, nogil=True)
def transition_density(x, y, qa, qw, dpar):
    """Absolutely continuous part of ``P(x, dy)``.

    The A-quadrature weights ``qw`` already carry the factor ``1 - p0``;
    a zero atom with a continuous ``B`` contributes ``p0 * f_B0(y)``.
    """
    bcode = int(dpar[5])
    s = 0.0
    if bcode == 2 or (bcode == 0 and dpar[7] <= 0.0):
        if x != 0.0:
            astar = (y - dpar[6]) / x
            s = (1.0 - dpar[8]) * _pdf_a(astar, dpar) / abs(x)
    else:
        for i in range(qa.shape[0]):
            s += qw[i] * _pdf_b(y - qa[i] * x, bcode, dpar[6], dpar[7])
    if dpar[8] > 0.0:
        s += dpar[8] * _pdf_b(y, int(dpar[9]), dpar[10], dpar[11])
    return s


@njit(cache=True, nogil=True)
def density_grid(xs, ys, qa, qw, dpar):
    out = np.empty((xs.shape[0], ys.shape[0]))
    for i in range(xs.shape[0]):
        for j in range(ys.shape[0]):
            out[i, j] = transition_density(xs[i], ys[j], qa, qw, dpar)
    return out


@njit(cache=True, nogil=True)
def regen_flag(g, x, y, atom, mpar, qa, qw, dpar):
    """Retrospective split mark for the transition ``x -> y``."""
    mode = int(mpar[0])
    if mode == 0:
        return atom
    if mode < 0:
        return False
    if abs(x) > mpar[1] or y < mpar[3] or y > mpar[4]:
        return False
    p = transition_density(x, y, qa, qw, dpar)
    if p <= 0.0:
        return False
    return g.random() * p * (mpar[4] - mpar[3]) < mpar[2]


# ------------------------------------------------------------------ plain paths


@njit(cache=True, nogil=True)
def innovations(g, n, kind, da, db, dc, par):
    a = np.empty(n)
    b = np.empty(n)
    for i in range(n):
        ai, bi, _ = draw_ab(g, kind, da, db, dc, par)
        a[i] = ai
        b[i] = bi
    return a, b


@njit(cache=True, nogil=True)
def run_recursion(x0, a, b):
    x = np.empty(a.shape[0] + 1)
    x[0] = x0
    for i in range(a.shape[0]):
        x[i + 1] = a[i] * x[i] + b[i]
    return x


@njit(cache=True, nogil=True)
def stationary_endpoints(g, m, burn, x0, kind, da, db, dc, par):
    out = np.empty(m)
    for r in range(m):
        x = x0
        for _ in range(burn):
            a, b, _z = draw_ab(g, kind, da, db, dc, par)
            x = a * x + b
        out[r] = x
    return out


@njit(cache=True, nogil=True)
def perpetuity(g, m, tol, max_terms, kind, da, db, dc, par):
    """Samples of ``R = sum_{k>=0} exp(S_k)`` plus an independent fresh ``A``."""
    r_out = np.empty(m)
    a_out = np.empty(m)
    trunc = 0
    for r in range(m):
        prod = 1.0
        tot = 1.0
        k = 0
        while True:
            a, _b, _z = draw_ab(g, kind, da, db, dc, par)
            prod *= a
            tot += prod
            k += 1
            if prod < tol:
                break
            if k >= max_terms:
                trunc += 1
                break
        r_out[r] = tot
        a_fresh, _b, _z = draw_ab(g, kind, da, db, dc, par)
        a_out[r] = a_fresh
    return r_out, a_out, trunc


# ------------------------------------------------------------------ split chain


@njit(cache=True, nogil=True)
def split_chain_forward(g, horizon, x0, kind, da, db, dc, par, mpar, qa, qw, dpar, spar, sv, sc, max_prop):
    """Forward simulation of the augmented chain (coin first, then move).

    Returns states, innovations (nan on phi-draws), marks, status
    (0 ok, 1 rejection stall) and the proposal count of the worst step.
    """
    x = np.empty(horizon + 1)
    av = np.full(horizon, np.nan)
    bv = np.full(horizon, np.nan)
    eta = np.zeros(horizon, dtype=np.int8)
    x[0] = x0
    mode = int(mpar[0])
    theta = mpar[2]
    width = mpar[4] - mpar[3]
    worst = 0
    for n in range(horizon):
        xn = x[n]
        if mode == 0:
            a, b, atom = draw_ab(g, kind, da, db, dc, par)
            av[n] = a
            bv[n] = b
            eta[n] = 1 if atom else 0
            x[n + 1] = a * xn + b
            continue
        coin = g.random() < theta
        eta[n] = 1 if coin else 0
        if mode < 0 or abs(xn) > mpar[1]:
            a, b, _z = draw_ab(g, kind, da, db, dc, par)
            av[n] = a
            bv[n] = b
            x[n + 1] = a * xn + b
            continue
        if coin:
            x[n + 1] = draw_start(g, spar, sv, sc)
            continue
        props = 0
        while True:
            props += 1
            if props > max_prop:
                return x, av, bv, eta, 1, props
            a, b, _z = draw_ab(g, kind, da, db, dc, par)
            y = a * xn + b
            acc = 1.0
            if mpar[3] <= y <= mpar[4]:
                p = transition_density(xn, y, qa, qw, dpar)
                acc = 1.0 - theta / (width * p) if p > 0.0 else 1.0
            if g.random() < acc:
                break
        if props > worst:
            worst = props
        av[n] = a
        bv[n] = b
        x[n + 1] = y
    return x, av, bv, eta, 0, worst


@njit(cache=True, nogil=True)
def split_chain_retro(g, horizon, x0, kind, da, db, dc, par, mpar, qa, qw, dpar):
    """Chain driven by innovations with retrospective split marks."""
    x = np.empty(horizon + 1)
    av = np.empty(horizon)
    bv = np.empty(horizon)
    eta = np.zeros(horizon, dtype=np.int8)
    x[0] = x0
    for n in range(horizon):
        a, b, atom = draw_ab(g, kind, da, db, dc, par)
        y = a * x[n] + b
        if regen_flag(g, x[n], y, atom, mpar, qa, qw, dpar):
            eta[n] = 1
        av[n] = a
        bv[n] = b
        x[n + 1] = y
    return x, av, bv, eta


@njit(cache=True, nogil=True)
def cycles_retro(g, m, stop_mode, max_steps, kind, da, db, dc, par, mpar, qa, qw, dpar, spar, sv, sc):
    """``m`` independent cycles from phi: length, area, absolute area, start, status.

    ``stop_mode`` 0 ends a cycle at a split mark, 1 at the first return to
    ``[-d, d]``.  Status 1 flags a cycle cut at ``max_steps``.
    """
    length = np.empty(m, dtype=np.int64)
    area = np.empty(m)
    aarea = np.empty(m)
    start = np.empty(m)
    status = np.zeros(m, dtype=np.int8)
    d = mpar[1]
    for c in range(m):
        x = draw_start(g, spar, sv, sc)
        start[c] = x
        k = 0
        s = 0.0
        sa = 0.0
        while True:
            s += x
            sa += abs(x)
            k += 1
            a, b, atom = draw_ab(g, kind, da, db, dc, par)
            y = a * x + b
            if stop_mode == 0:
                ended = regen_flag(g, x, y, atom, mpar, qa, qw, dpar)
            else:
                ended = abs(y) <= d
            x = y
            if ended:
                break
            if k >= max_steps:
                status[c] = 1
                break
        length[c] = k
        area[c] = s
        aarea[c] = sa
    return length, area, aarea, start, status


# ------------------------------------------------------------------ tilted functionals


@njit(cache=True, nogil=True)
def tilted_z(g, m, u_esc, ztol, stop_mode, max_steps,
             kind, da, db, dc, par, tkind, tda, tdb, tdc, tpar,
             mpar, qa, qw, dpar, spar, sv, sc):
    """Under the tilted law: limit ``Z`` and survival flags at ``u_esc`` and ``2 u_esc``.

    ``stop_mode`` 0: cycle end (split mark); 1: return to ``[-d, d]``.
    """
    zs = np.empty(m)
    s1 = np.zeros(m, dtype=np.int8)
    s2 = np.zeros(m, dtype=np.int8)
    steps = np.empty(m, dtype=np.int64)
    d = mpar[1]
    for r in range(m):
        x = draw_start(g, spar, sv, sc)
        z = x
        S = 0.0
        alive = True
        esc1 = abs(x) > u_esc
        esc2 = abs(x) > 2.0 * u_esc
        k = 0
        while k < max_steps:
            a, b, atom = draw_ab(g, tkind, tda, tdb, tdc, tpar)
            y = a * x + b
            if alive and not esc2:
                if stop_mode == 0:
                    ended = regen_flag(g, x, y, atom, mpar, qa, qw, dpar)
                else:
                    ended = abs(y) <= d
                if ended:
                    alive = False
                    if not esc1:
                        break
            S += math.log(a)
            z += b * math.exp(-S)
            x = y
            k += 1
            if alive:
                if abs(x) > u_esc:
                    esc1 = True
                if abs(x) > 2.0 * u_esc:
                    esc2 = True
            if (esc2 or not alive) and math.exp(-S) < ztol:
                break
        zs[r] = z
        s1[r] = 1 if esc1 else 0
        s2[r] = 1 if esc2 else 0
        steps[r] = k
    return zs, s1, s2, steps


@njit(cache=True, nogil=True)
def dual_cycle(g, m, v, alpha, tilted, stop_mode, max_steps,
               kind, da, db, dc, par, tkind, tda, tdb, tdc, tpar,
               mpar, qa, qw, dpar, spar, sv, sc):
    """Cycle (or first-return excursion) simulated under the dual measure.

    Innovations follow the tilted law until the first time ``|X| > v``
    (only when ``tilted``), the untilted law afterwards.  Returns area,
    absolute area, log-weight and a flag for ``T(v) < tau``.  The
    log-weight is ``-alpha S_T`` on ``{T < tau}`` and ``-alpha S_tau``
    otherwise (``-inf`` if the stop step used a zero atom).
    """
    area = np.empty(m)
    aarea = np.empty(m)
    logw = np.empty(m)
    reached = np.zeros(m, dtype=np.int8)
    d = mpar[1]
    for r in range(m):
        x = draw_start(g, spar, sv, sc)
        s = 0.0
        sa = 0.0
        S = 0.0
        hit = abs(x) > v
        lw = 0.0
        k = 0
        while k < max_steps:
            s += x
            sa += abs(x)
            if hit or not tilted:
                a, b, atom = draw_ab(g, kind, da, db, dc, par)
            else:
                a, b, atom = draw_ab(g, tkind, tda, tdb, tdc, tpar)
            y = a * x + b
            if not hit:
                S += math.log(a) if a > 0.0 else -math.inf
            if stop_mode == 0:
                ended = regen_flag(g, x, y, atom, mpar, qa, qw, dpar)
            else:
                ended = abs(y) <= d
            k += 1
            if ended:
                break
            x = y
            if not hit and abs(x) > v:
                hit = True
                lw = -alpha * S
        area[r] = s
        aarea[r] = sa
        if hit:
            reached[r] = 1
            logw[r] = lw if tilted else 0.0
        else:
            logw[r] = -alpha * S if tilted else 0.0
    return area, aarea, logw, reached


# ------------------------------------------------------------------ scaled path summaries


@njit(cache=True, nogil=True)
def _esym(vals, nv, J):
    e = np.zeros(J + 1)
    e[0] = 1.0
    for i in range(nv):
        for m in range(min(J, i + 1), 0, -1):
            e[m] += e[m - 1] * vals[i]
    return e


@njit(cache=True, nogil=True)
def _log_binom(M, m):
    return math.lgamma(M + 1.0) - math.lgamma(m + 1.0) - math.lgamma(M - m + 1.0)


@njit(cache=True, nogil=True)
def scaled_paths(g, reps, n, M, wts, v, alpha, x0, x0_fixed, z, sidx,
                 kind, da, db, dc, par, tkind, tda, tdb, tdc, tpar,
                 mpar, qa, qw, dpar, spar, sv, sc):
    """Summaries of ``Xbar_n`` with optional planted dual-measure cycles.

    With ``M = 0`` this is plain Monte Carlo.  Otherwise a subset of
    ``m ~ wts`` cycle indices among the first ``M`` is planted (innovations
    tilted until ``|X| > v``) and the defensive-mixture likelihood ratio is
    returned as a log-weight.

    Output columns: terminal, inf, sup, band deviation from ``z*t``,
    residual-cycle contribution, then one column per slice index.
    """
    J = wts.shape[0] - 1
    ns = sidx.shape[0]
    out = np.empty((reps, 5 + ns))
    logw = np.zeros(reps)
    planted = np.zeros(M + 1, dtype=np.int8)
    Ls = np.zeros(M + 1)
    for r in range(reps):
        # choose planted subset
        for i in range(M + 1):
            planted[i] = 0
            Ls[i] = 0.0
        m = 0
        if M > 0:
            u = g.random()
            acc = 0.0
            for q in range(J + 1):
                acc += wts[q]
                if u < acc:
                    m = q
                    break
            else:
                m = J
            if m > M:
                m = M
            got = 0
            while got < m:
                c = int(g.random() * M)
                if c >= M:
                    c = M - 1
                if planted[c] == 0:
                    planted[c] = 1
                    got += 1
        x = x0 if x0_fixed else draw_start(g, spar, sv, sc)
        t = 0
        psum = 0.0
        lo = 0.0
        hi = 0.0
        dev = 0.0
        cyc_start_sum = 0.0
        si = 0
        cyc = 0
        done = False
        while not done:
            in_mix = cyc < M
            tilt_now = in_mix and planted[cyc] == 1
            S = 0.0
            hit = abs(x) > v
            if hit and in_mix:
                Ls[cyc] = 1.0
            if t < n:
                cyc_start_sum = psum
            while True:
                if t < n:
                    while si < ns and sidx[si] == t:
                        out[r, 5 + si] = psum / n
                        si += 1
                    # Xbar equals psum/n on [t/n, (t+1)/n)
                    dv = max(abs(psum - z * t), abs(psum - z * (t + 1))) / n
                    if dv > dev:
                        dev = dv
                    psum += x
                    if psum / n < lo:
                        lo = psum / n
                    if psum / n > hi:
                        hi = psum / n
                if t >= n - 1 and not in_mix:
                    done = True
                    break
                if tilt_now and not hit:
                    a, b, atom = draw_ab(g, tkind, tda, tdb, tdc, tpar)
                else:
                    a, b, atom = draw_ab(g, kind, da, db, dc, par)
                y = a * x + b
                if in_mix and not hit:
                    S += math.log(a) if a > 0.0 else -math.inf
                ended = regen_flag(g, x, y, atom, mpar, qa, qw, dpar)
                x = y
                t += 1
                if in_mix and not hit and abs(x) > v:
                    hit = True
                    Ls[cyc] = math.exp(alpha * S)
                if ended:
                    break
            if in_mix and not hit:
                # zero after an atom step, where S is -inf
                Ls[cyc] = math.exp(alpha * S)
            cyc += 1
            if cyc >= M and t >= n:
                done = True
        while si < ns:
            out[r, 5 + si] = psum / n
            si += 1
        dv = abs(psum / n - z)
        if dv > dev:
            dev = dv
        out[r, 0] = psum / n
        out[r, 1] = lo
        out[r, 2] = hi
        out[r, 3] = dev
        out[r, 4] = (psum - cyc_start_sum) / n
        if M > 0:
            e = _esym(Ls, M, J)
            den = 0.0
            for q in range(J + 1):
                if q <= M:
                    den += wts[q] * e[q] * math.exp(-_log_binom(M, q))
            logw[r] = -math.log(den)
    return out, logw


# ------------------------------------------------------------------ Frechet DP


@njit(cache=True, nogil=True)
def discrete_frechet_linf(P, Q):
    """Discrete Frechet distance with ground metric max(|dx|, |dt|)."""
    n = P.shape[0]
    m = Q.shape[0]
    prev = np.empty(m)
    cur = np.empty(m)
    for j in range(m):
        dd = max(abs(P[0, 0] - Q[j, 0]), abs(P[0, 1] - Q[j, 1]))
        prev[j] = dd if j == 0 else max(prev[j - 1], dd)
    for i in range(1, n):
        dd = max(abs(P[i, 0] - Q[0, 0]), abs(P[i, 1] - Q[0, 1]))
        cur[0] = max(prev[0], dd)
        for j in range(1, m):
            dd = max(abs(P[i, 0] - Q[j, 0]), abs(P[i, 1] - Q[j, 1]))
            best = prev[j]
            if prev[j - 1] < best:
                best = prev[j - 1]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = max(best, dd)
        for j in range(m):
            prev[j] = cur[j]
    return prev[m - 1]
