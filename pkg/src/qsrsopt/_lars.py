"""Compiled LARS-LASSO kernels working on a (possibly ridge-augmented) Gram matrix.

The augmented elastic-net problem has Gram matrix ``(G + lam2 I) / (1 + lam2)``
and correlations ``Xy / sqrt(1 + lam2)``; both are formed on the fly so the
stacked ``(m + n) x n`` design is never materialized.
"""

import numpy as np
from numba import njit

_TINY = 1e-300


@njit(cache=True, nogil=True)
def _gram(G, lam2, inv, i, j):
    if i == j:
        return (G[i, j] + lam2) * inv
    return G[i, j] * inv


@njit(cache=True, nogil=True)
def _chol_add(L, k, G, lam2, inv, act, j, rank_tol):
    # appends column j to the Cholesky factor of G[act[:k], act[:k]]
    z = np.empty(k)
    for p in range(k):
        s = _gram(G, lam2, inv, act[p], j)
        for q in range(p):
            s -= L[p, q] * z[q]
        z[p] = s / L[p, p]
    gjj = _gram(G, lam2, inv, j, j)
    diag = gjj
    for p in range(k):
        diag -= z[p] * z[p]
    if gjj <= 0.0 or diag <= rank_tol * gjj:
        return False
    for p in range(k):
        L[k, p] = z[p]
    L[k, k] = np.sqrt(diag)
    for p in range(k):
        L[p, k] = 0.0
    return True


@njit(cache=True, nogil=True)
def _chol_rebuild(L, k, G, lam2, inv, act):
    for p in range(k):
        for q in range(p + 1):
            s = _gram(G, lam2, inv, act[p], act[q])
            for r in range(q):
                s -= L[p, r] * L[q, r]
            if p == q:
                L[p, p] = np.sqrt(max(s, _TINY))
            else:
                L[p, q] = s / L[q, q]
        for q in range(p + 1, k):
            L[p, q] = 0.0


@njit(cache=True, nogil=True)
def _chol_solve(L, k, rhs):
    y = np.empty(k)
    for p in range(k):
        s = rhs[p]
        for q in range(p):
            s -= L[p, q] * y[q]
        y[p] = s / L[p, p]
    x = np.empty(k)
    for p in range(k - 1, -1, -1):
        s = y[p]
        for q in range(p + 1, k):
            s -= L[q, p] * x[q]
        x[p] = s / L[p, p]
    return x


@njit(cache=True, nogil=True)
def lars_lasso_gram(G, Xy, lam2, max_l1, max_steps, rank_tol, corr_tol):
    """LARS with the LASSO modification on Gram data.

    Returns ``(betas, l1, cmax, active, n_steps, complete, n_excluded)`` where
    row ``k`` of `betas` / `active` is the k-th breakpoint (row 0 is beta = 0)
    and ``cmax[k]`` is the common absolute correlation (lambda1 / 2) there.
    """
    n = G.shape[0]
    inv = 1.0 / (1.0 + lam2)
    sc = 1.0 / np.sqrt(1.0 + lam2)
    cap = min(max_steps + 1, 2 * n + 2)
    betas = np.zeros((cap, n))
    l1s = np.zeros(cap)
    cmax = np.zeros(cap)
    actm = np.zeros((cap, n), dtype=np.bool_)

    beta = np.zeros(n)
    c = np.empty(n)
    for j in range(n):
        c[j] = Xy[j] * sc
    act = np.empty(n, dtype=np.int64)
    in_act = np.zeros(n, dtype=np.bool_)
    excl = np.zeros(n, dtype=np.bool_)
    L = np.zeros((n, n))
    a = np.empty(n)
    k = 0
    n_excl = 0

    C = 0.0
    j_add = -1
    for j in range(n):
        if abs(c[j]) > C:
            C = abs(c[j])
            j_add = j
    cmax[0] = C
    n_rec = 1
    thr = corr_tol * C
    if C <= _TINY:
        return betas[:1], l1s[:1], cmax[:1], actm[:1], 0, True, 0

    complete = False
    just_dropped = -1
    steps = 0
    while steps < max_steps:
        if j_add >= 0:
            if _chol_add(L, k, G, lam2, inv, act, j_add, rank_tol):
                act[k] = j_add
                in_act[j_add] = True
                k += 1
            else:
                excl[j_add] = True
                n_excl += 1
            j_add = -1
        if k == 0:
            # every candidate so far was collinear; restart from the best remaining
            best = 0.0
            for j in range(n):
                if not excl[j] and abs(c[j]) > best:
                    best = abs(c[j])
                    j_add = j
            if j_add < 0 or best <= thr:
                complete = True
                break
            continue

        s = np.empty(k)
        for p in range(k):
            s[p] = 1.0 if c[act[p]] >= 0.0 else -1.0
        w = _chol_solve(L, k, s)
        sw = 0.0
        for p in range(k):
            sw += s[p] * w[p]
        AA = 1.0 / np.sqrt(max(sw, _TINY))
        d = w * AA
        a[:] = 0.0
        for p in range(k):
            row = G[act[p]]
            dp = d[p] * inv
            for j in range(n):
                a[j] += row[j] * dp
        for p in range(k):
            a[act[p]] += lam2 * inv * d[p]

        gamma = C / AA
        j_next = -1
        for j in range(n):
            if in_act[j] or excl[j]:
                continue
            # a just-dropped atom sits at |c_j| = C; only its same-sign re-entry
            # is degenerate, the opposite-sign crossing is a real event
            skip_pos = j == just_dropped and c[j] >= 0.0
            skip_neg = j == just_dropped and c[j] < 0.0
            den = AA - a[j]
            if den > _TINY and not skip_pos:
                g = (C - c[j]) / den
                if g < 0.0:
                    g = 0.0
                if g < gamma:
                    gamma = g
                    j_next = j
            den = AA + a[j]
            if den > _TINY and not skip_neg:
                g = (C + c[j]) / den
                if g < 0.0:
                    g = 0.0
                if g < gamma:
                    gamma = g
                    j_next = j
        drop = -1
        for p in range(k):
            if d[p] != 0.0:
                g = -beta[act[p]] / d[p]
                if g > 0.0 and g < gamma:
                    gamma = g
                    drop = p
        if drop >= 0:
            j_next = -1

        for p in range(k):
            beta[act[p]] += gamma * d[p]
        for j in range(n):
            c[j] -= gamma * a[j]
        just_dropped = -1
        if drop >= 0:
            jd = act[drop]
            beta[jd] = 0.0
            in_act[jd] = False
            for p in range(drop, k - 1):
                act[p] = act[p + 1]
            k -= 1
            _chol_rebuild(L, k, G, lam2, inv, act)
            just_dropped = jd
        C = 0.0
        for p in range(k):
            C = max(C, abs(c[act[p]]))
        if k == 0:
            C = 0.0
        steps += 1

        if n_rec == betas.shape[0]:
            new_cap = min(2 * n_rec, max_steps + 1)
            betas2 = np.zeros((new_cap, n))
            betas2[:n_rec] = betas
            betas = betas2
            actm2 = np.zeros((new_cap, n), dtype=np.bool_)
            actm2[:n_rec] = actm
            actm = actm2
            l1s2 = np.zeros(new_cap)
            l1s2[:n_rec] = l1s
            l1s = l1s2
            cm2 = np.zeros(new_cap)
            cm2[:n_rec] = cmax
            cmax = cm2
        l1 = 0.0
        for j in range(n):
            l1 += abs(beta[j])
        betas[n_rec] = beta
        l1s[n_rec] = l1
        cmax[n_rec] = C
        for p in range(k):
            actm[n_rec, act[p]] = True
        n_rec += 1

        if j_next < 0 and drop < 0:
            # full step to the active-set least-squares fit; complete only if
            # no inactive atom is left with residual correlation
            worst = 0.0
            for j in range(n):
                if not excl[j] and not in_act[j]:
                    worst = max(worst, abs(c[j]))
            complete = worst <= thr
            break
        if C <= thr:
            complete = True
            break
        j_add = j_next
        if l1 >= max_l1:
            break
    return betas[:n_rec], l1s[:n_rec], cmax[:n_rec], actm[:n_rec], steps, complete, n_excl


@njit(cache=True, nogil=True)
def interpolate_at_l1(betas, l1s, target):
    """Coefficients at L1 norm `target`, linear between breakpoints."""
    n_rec = l1s.shape[0]
    if target >= l1s[n_rec - 1]:
        return betas[n_rec - 1].copy()
    for k in range(n_rec - 1):
        lo = l1s[k]
        hi = l1s[k + 1]
        if target <= hi:
            if hi - lo <= 0.0:
                return betas[k + 1].copy()
            t = (target - lo) / (hi - lo)
            return betas[k] + t * (betas[k + 1] - betas[k])
    return betas[n_rec - 1].copy()


@njit(cache=True, nogil=True)
def fraction_errors(betas, l1s, l1_end, beta_end, fracs, scale, Xh, rh):
    """Mean squared holdout error at each L1 fraction of the path end.

    Coefficients are multiplied by `scale` (the elastic-net rescaling) before
    predicting the centred holdout responses `rh` from normalized rows `Xh`.
    """
    nf = fracs.shape[0]
    mh = Xh.shape[0]
    out = np.empty(nf)
    for i in range(nf):
        if fracs[i] >= 1.0:
            b = beta_end
        else:
            b = interpolate_at_l1(betas, l1s, fracs[i] * l1_end)
        err = 0.0
        for r in range(mh):
            pred = 0.0
            for j in range(b.shape[0]):
                pred += Xh[r, j] * b[j]
            e = rh[r] - scale * pred
            err += e * e
        out[i] = err / max(mh, 1)
    return out
