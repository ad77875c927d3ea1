"""Compiled inner loops of the sampler.

Labels are 0-based here (``0..K-1``); the Python layer converts to and
from the 1-based canonical form.
"""

from math import lgamma, log, log1p, pi

import numpy as np
from numba import njit

LOG_PI = log(pi)


@njit(cache=True)
def logbeta(a, b):
    return lgamma(a) + lgamma(b) - lgamma(a + b)


@njit(cache=True)
def block_term(v, m, b1, b2, lb0):
    # Beta-Bernoulli block factor relative to an empty block
    if m == 0:
        return 0.0
    return logbeta(v + b1, m - v + b2) - lb0


@njit(cache=True)
def block_tables(m_max, b1, b2):
    """lgamma lookups so that block terms of integer counts avoid lgamma calls."""
    g1 = np.empty(m_max + 1)
    g2 = np.empty(m_max + 1)
    g12 = np.empty(m_max + 1)
    for v in range(m_max + 1):
        g1[v] = lgamma(v + b1)
        g2[v] = lgamma(v + b2)
        g12[v] = lgamma(v + b1 + b2)
    return g1, g2, g12


@njit(cache=True)
def tab_term(v, m, g1, g2, g12):
    if m == 0:
        return 0.0
    return g1[v] + g2[m - v] - g12[m] - (g1[0] + g2[0] - g12[0])


@njit(cache=True)
def group_term(n, sum_sq, sq_sum, d, a1, a2, om, c0):
    if n == 0:
        return 0.0
    half = 0.5 * d * n
    return (c0 + lgamma(a1 + half) - half * LOG_PI + 0.5 * d * (log(om) - log(om + n))
            - (half + a1) * log(a2 - sum_sq / (n + om) + sq_sum))


@njit(cache=True)
def canonicalize(z):
    """Relabel a 0-based vector in first-use order in place; returns K."""
    n = z.shape[0]
    mp = np.full(n + 1, -1, dtype=np.int64)
    nxt = 0
    for i in range(n):
        g = z[i]
        if mp[g] < 0:
            mp[g] = nxt
            nxt += 1
        z[i] = mp[g]
    return nxt


@njit(cache=True)
def sample_log_weights(logp, k_max, rng):
    m = logp[0]
    for k in range(1, k_max):
        if logp[k] > m:
            m = logp[k]
    total = 0.0
    for k in range(k_max):
        logp[k] = np.exp(logp[k] - m)
        total += logp[k]
    u = rng.random() * total
    acc = 0.0
    for k in range(k_max):
        acc += logp[k]
        if u < acc:
            return k
    return k_max - 1


@njit(cache=True)
def z_sweep(z, nu, U, c, cohesion, log_w, alpha, a1, a2, om, g1, g2, g12,
            directed, use_nu, use_u, supervised, rng):
    """One systematic scan of single-node allocation updates.

    ``g1, g2, g12`` come from :func:`block_tables` with ``m_max >= N * N``.
    ``z`` is updated in place and left canonical; returns the new K.
    """
    N = z.shape[0]
    d = U.shape[1]
    C = cohesion.shape[0]
    K = 0
    for i in range(N):
        if z[i] + 1 > K:
            K = z[i] + 1
    n = np.zeros(N + 1, dtype=np.int64)
    S = np.zeros((N + 1, d))
    Q = np.zeros(N + 1)
    lev = np.zeros((N + 1, C), dtype=np.int64)
    NU = np.zeros((N + 1, N + 1), dtype=np.int64)
    for i in range(N):
        g = z[i]
        n[g] += 1
        for t in range(d):
            S[g, t] += U[i, t]
            Q[g] += U[i, t] * U[i, t]
        if supervised:
            lev[g, c[i]] += 1
    if use_nu:
        for i in range(N):
            for j in range(N):
                if i != j and nu[i, j] != 0:
                    NU[z[i], z[j]] += 1
    c0 = a1 * log(a2) - lgamma(a1)
    w0 = 0.0
    for t in range(C):
        w0 += cohesion[t]
    r = np.zeros(N + 1, dtype=np.int64)
    cc = np.zeros(N + 1, dtype=np.int64)
    logp = np.zeros(N + 1)

    for i in range(N):
        g0 = z[i]
        for k in range(K + 1):
            r[k] = 0
            cc[k] = 0
        if use_nu:
            for j in range(N):
                if j != i:
                    r[z[j]] += nu[i, j]
                    cc[z[j]] += nu[j, i]
        # take node i out of its group
        n[g0] -= 1
        uu = 0.0
        for t in range(d):
            S[g0, t] -= U[i, t]
            uu += U[i, t] * U[i, t]
        Q[g0] -= uu
        if supervised:
            lev[g0, c[i]] -= 1
        if use_nu:
            for k in range(K):
                NU[g0, k] -= r[k]
                NU[k, g0] -= cc[k]
        z[i] = -1
        if n[g0] == 0:
            last = K - 1
            if g0 != last:
                n[g0] = n[last]
                Q[g0] = Q[last]
                for t in range(d):
                    S[g0, t] = S[last, t]
                for t in range(C):
                    lev[g0, t] = lev[last, t]
                if use_nu:
                    for k in range(K):
                        NU[g0, k] = NU[last, k]
                    for k in range(K):
                        NU[k, g0] = NU[k, last]
                r[g0] = r[last]
                cc[g0] = cc[last]
                for j in range(N):
                    if z[j] == last:
                        z[j] = g0
            n[last] = 0
            Q[last] = 0.0
            for t in range(d):
                S[last, t] = 0.0
            for t in range(C):
                lev[last, t] = 0
            for k in range(K):
                NU[last, k] = 0
                NU[k, last] = 0
            r[last] = 0
            cc[last] = 0
            K -= 1
        r[K] = 0
        cc[K] = 0

        ci = c[i]
        if K == 0:
            k_new = 0
        else:
            for k in range(K + 1):
                if k < K:
                    nk = n[k]
                    lw = log(nk + alpha)
                    if supervised:
                        lw += log(lev[k, ci] + cohesion[ci]) - log(nk + w0)
                else:
                    nk = 0
                    lw = log(alpha) + log_w[N, K + 1] - log_w[N, K]
                    if supervised:
                        lw += log(cohesion[ci]) - log(w0)
                if use_nu:
                    tot = 0.0
                    if k < K:
                        for h in range(K):
                            if h == k:
                                continue
                            nh = n[h]
                            tot += (tab_term(NU[k, h] + r[h], (nk + 1) * nh, g1, g2, g12)
                                    - tab_term(NU[k, h], nk * nh, g1, g2, g12))
                            if directed:
                                tot += (tab_term(NU[h, k] + cc[h], nh * (nk + 1), g1, g2, g12)
                                        - tab_term(NU[h, k], nh * nk, g1, g2, g12))
                        if directed:
                            tot += (tab_term(NU[k, k] + r[k] + cc[k], (nk + 1) * nk, g1, g2, g12)
                                    - tab_term(NU[k, k], nk * (nk - 1), g1, g2, g12))
                        else:
                            vkk = NU[k, k] // 2
                            tot += (tab_term(vkk + r[k], (nk + 1) * nk // 2, g1, g2, g12)
                                    - tab_term(vkk, nk * (nk - 1) // 2, g1, g2, g12))
                    else:
                        for h in range(K):
                            tot += tab_term(r[h], n[h], g1, g2, g12)
                            if directed:
                                tot += tab_term(cc[h], n[h], g1, g2, g12)
                    lw += tot
                if use_u:
                    s2_old = 0.0
                    s2_new = 0.0
                    for t in range(d):
                        s2_old += S[k, t] * S[k, t]
                        s2_new += (S[k, t] + U[i, t]) * (S[k, t] + U[i, t])
                    lw += (group_term(nk + 1, s2_new, Q[k] + uu, d, a1, a2, om, c0)
                           - group_term(nk, s2_old, Q[k], d, a1, a2, om, c0))
                logp[k] = lw
            k_new = sample_log_weights(logp, K + 1, rng)
        if k_new == K:
            K += 1
        z[i] = k_new
        n[k_new] += 1
        for t in range(d):
            S[k_new, t] += U[i, t]
        Q[k_new] += uu
        if supervised:
            lev[k_new, ci] += 1
        if use_nu:
            for h in range(K):
                NU[k_new, h] += r[h]
                NU[h, k_new] += cc[h]
    return canonicalize(z)


@njit(cache=True)
def log_targets(z, K, nu, U, c, cohesion, log_w, alpha, a1, a2, om, b1, b2,
                directed, use_nu, use_u, supervised):
    """log f(nu | z) + log f(U | z) + log f(z | c), the last up to a constant."""
    N = z.shape[0]
    d = U.shape[1]
    C = cohesion.shape[0]
    n = np.zeros(K, dtype=np.int64)
    for i in range(N):
        n[z[i]] += 1
    total = log_w[N, K]
    for g in range(K):
        total += lgamma(alpha + n[g]) - lgamma(alpha)
    if supervised:
        w0 = 0.0
        for t in range(C):
            w0 += cohesion[t]
        lev = np.zeros((K, C), dtype=np.int64)
        for i in range(N):
            lev[z[i], c[i]] += 1
        for g in range(K):
            s = lgamma(w0) - lgamma(n[g] + w0)
            for t in range(C):
                s += lgamma(lev[g, t] + cohesion[t]) - lgamma(cohesion[t])
            total += s
    if use_nu:
        lb0 = logbeta(b1, b2)
        NU = np.zeros((K, K), dtype=np.int64)
        for i in range(N):
            for j in range(N):
                if i != j and nu[i, j] != 0:
                    NU[z[i], z[j]] += 1
        for g in range(K):
            for h in range(K):
                if directed:
                    m = n[g] * n[h] if g != h else n[g] * (n[g] - 1)
                    total += block_term(NU[g, h], m, b1, b2, lb0)
                elif g < h:
                    total += block_term(NU[g, h], n[g] * n[h], b1, b2, lb0)
                elif g == h:
                    total += block_term(NU[g, g] // 2, n[g] * (n[g] - 1) // 2, b1, b2, lb0)
    if use_u:
        c0 = a1 * log(a2) - lgamma(a1)
        S = np.zeros((K, d))
        Q = np.zeros(K)
        for i in range(N):
            for t in range(d):
                S[z[i], t] += U[i, t]
                Q[z[i]] += U[i, t] * U[i, t]
        for g in range(K):
            s2 = 0.0
            for t in range(d):
                s2 += S[g, t] * S[g, t]
            total += group_term(n[g], s2, Q[g], d, a1, a2, om, c0)
    return total


@njit(cache=True)
def log_split_integral(n1, n2, a):
    """log of the Beta(a, a) integral of p^n2 (1-p)^n1 (a Beta-binomial mass)."""
    s = 0.0
    for m in range(n1):
        s += log(a + m)
    for m in range(n2):
        s += log(a + m)
    for m in range(n1 + n2):
        s -= log(2.0 * a + m)
    return s


@njit(cache=True)
def _eject_prob(K, N, p_eject):
    if K == 1:
        return 1.0
    if K >= N:
        return 0.0
    return p_eject


# TAE outcome codes
ABANDONED = 0
EJECT_ACCEPTED = 1
EJECT_REJECTED = 2
ABSORB_ACCEPTED = 3
ABSORB_REJECTED = 4


@njit(cache=True)
def tae_move(z, nu, U, c, cohesion, log_w, a_table, p0_table, alpha, a1, a2, om, b1, b2,
             p_eject, directed, use_nu, use_u, supervised, conditional, rng):
    """One truncated absorb-eject proposal; ``z`` is updated in place.

    Returns ``(K, outcome)``. By default the proposal densities are exactly
    the probabilities of what the move proposes, with abandoned ejections
    acting as rejections, so the move is reversible. With ``conditional`` the
    ejection densities are divided by ``1 - p0`` and the absorb reverse move
    uses a ``K'(K'+1)`` denominator instead.
    """
    N = z.shape[0]
    K = 0
    for i in range(N):
        if z[i] + 1 > K:
            K = z[i] + 1
    pej = _eject_prob(K, N, p_eject)
    zp = z.copy()
    if rng.random() < pej:
        g = rng.integers(0, K)
        ng = 0
        for i in range(N):
            if z[i] == g:
                ng += 1
        a = a_table[ng]
        pe = rng.beta(a, a)
        moved = 0
        for i in range(N):
            if z[i] == g and rng.random() < pe:
                zp[i] = K
                moved += 1
        if moved == 0 or moved == ng:
            return K, ABANDONED
        log_fwd = log(pej) - log(K) + log_split_integral(ng - moved, moved, a)
        pab_rev = 1.0 - _eject_prob(K + 1, N, p_eject)
        log_rev = log(pab_rev) - log((K + 1) * K)
        if conditional:
            log_fwd -= log1p(-p0_table[ng])
        cur = log_targets(z, K, nu, U, c, cohesion, log_w, alpha, a1, a2, om, b1, b2,
                          directed, use_nu, use_u, supervised)
        new = log_targets(zp, K + 1, nu, U, c, cohesion, log_w, alpha, a1, a2, om, b1, b2,
                          directed, use_nu, use_u, supervised)
        log_ratio = new - cur + log_rev - log_fwd
        if log(rng.random()) < log_ratio:
            for i in range(N):
                z[i] = zp[i]
            return canonicalize(z), EJECT_ACCEPTED
        return K, EJECT_REJECTED
    # absorb: unordered pair g < h, h merged into g
    g = rng.integers(0, K)
    h = rng.integers(0, K - 1)
    if h >= g:
        h += 1
    if h < g:
        g, h = h, g
    n_g = 0
    n_h = 0
    for i in range(N):
        if z[i] == g:
            n_g += 1
        elif z[i] == h:
            n_h += 1
        if z[i] == h:
            zp[i] = g
        elif z[i] > h:
            zp[i] = z[i] - 1
    merged = n_g + n_h
    a = a_table[merged]
    Kp = K - 1
    log_fwd = log(1.0 - pej) - log(K * (K - 1))
    log_rev = log_split_integral(n_g, n_h, a) + log(_eject_prob(Kp, N, p_eject))
    if conditional:
        log_rev -= log1p(-p0_table[merged]) + log(Kp * (Kp + 1))
    else:
        log_rev -= log(Kp)
    cur = log_targets(z, K, nu, U, c, cohesion, log_w, alpha, a1, a2, om, b1, b2,
                      directed, use_nu, use_u, supervised)
    new = log_targets(zp, Kp, nu, U, c, cohesion, log_w, alpha, a1, a2, om, b1, b2,
                      directed, use_nu, use_u, supervised)
    log_ratio = new - cur + log_rev - log_fwd
    if log(rng.random()) < log_ratio:
        for i in range(N):
            z[i] = zp[i]
        return canonicalize(z), ABSORB_ACCEPTED
    return K, ABSORB_REJECTED


@njit(cache=True)
def u_sweep(U, X, z, beta, sigma_u, a1, a2, om, directed, rng):
    """Random-walk Metropolis update of every latent position in turn.

    Returns the number of accepted proposals. ``U`` is updated in place.
    """
    N, d = U.shape
    K = 0
    for i in range(N):
        if z[i] + 1 > K:
            K = z[i] + 1
    S = np.zeros((K, d))
    Q = np.zeros(K)
    n = np.zeros(K, dtype=np.int64)
    for i in range(N):
        n[z[i]] += 1
        for t in range(d):
            S[z[i], t] += U[i, t]
            Q[z[i]] += U[i, t] * U[i, t]
    c0 = a1 * log(a2) - lgamma(a1)
    eb = np.exp(beta)
    mult = 2.0 if directed else 1.0
    prop = np.empty(d)
    accepted = 0
    for i in range(N):
        for t in range(d):
            prop[t] = U[i, t] + sigma_u * rng.standard_normal()
        delta = 0.0
        for j in range(N):
            if j == i:
                continue
            d_old = 0.0
            d_new = 0.0
            for t in range(d):
                e = U[i, t] - U[j, t]
                d_old += e * e
                e = prop[t] - U[j, t]
                d_new += e * e
            d_old = np.sqrt(d_old)
            d_new = np.sqrt(d_new)
            w = X[i, j] + X[j, i] if directed else X[i, j]
            delta += w * (d_old - d_new) - mult * eb * (np.exp(-d_new) - np.exp(-d_old))
        g = z[i]
        s2_old = 0.0
        s2_new = 0.0
        q_new = Q[g]
        for t in range(d):
            s2_old += S[g, t] * S[g, t]
            sn = S[g, t] - U[i, t] + prop[t]
            s2_new += sn * sn
            q_new += prop[t] * prop[t] - U[i, t] * U[i, t]
        delta += (group_term(n[g], s2_new, q_new, d, a1, a2, om, c0)
                  - group_term(n[g], s2_old, Q[g], d, a1, a2, om, c0))
        if log(rng.random()) < delta:
            for t in range(d):
                S[g, t] += prop[t] - U[i, t]
                U[i, t] = prop[t]
            Q[g] = q_new
            accepted += 1
    return accepted


@njit(cache=True)
def complete_loglik(X, nu, P, z, beta, D, U, c, cohesion, log_w, alpha, a1, a2, om,
                    directed, use_nu, supervised):
    """Complete log-likelihood of a state with 0-based ``z`` (see the model module)."""
    N = z.shape[0]
    total = 0.0
    for i in range(N):
        j0 = 0 if directed else i + 1
        for j in range(j0, N):
            if i == j:
                continue
            eta = beta - D[i, j]
            x = X[i, j]
            total += x * eta - np.exp(eta) - lgamma(x + 1.0)
            if use_nu:
                p = P[z[i], z[j]]
                if nu[i, j] != 0:
                    total += log(p) if p > 0 else -np.inf
                else:
                    total += log1p(-p) if p < 1 else -np.inf
    K = 0
    for i in range(N):
        if z[i] + 1 > K:
            K = z[i] + 1
    total += log_targets(z, K, nu, U, c, cohesion, log_w, alpha, a1, a2, om, 1.0, 1.0,
                         directed, False, True, supervised)
    return total
