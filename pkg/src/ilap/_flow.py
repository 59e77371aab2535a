"""Jitted kernels for the bipartite min-cost-flow allocation solver."""

import numpy as np
from numba import njit

_INF = np.inf


@njit(cache=True)
def ssp_allocate(theta, demands, capacities, tol):
    """Successive shortest augmenting paths with node potentials.

    Network: source -> user (cap d_u), user -> item (cap 1, cost -theta,
    only where theta > 0), item -> sink (cap c_i). Augments one unit at a
    time while the cheapest path has negative true cost.
    """
    N, M = theta.shape
    X = np.zeros((N, M), dtype=np.int8)
    fu = np.zeros(N, dtype=np.int64)
    fi = np.zeros(M, dtype=np.int64)

    pot_u = np.zeros(N)
    pot_i = np.zeros(M)
    for i in range(M):
        m = 0.0
        for u in range(N):
            if theta[u, i] > 0.0 and -theta[u, i] < m:
                m = -theta[u, i]
        pot_i[i] = m
    pot_t = 0.0
    for i in range(M):
        if pot_i[i] < pot_t:
            pot_t = pot_i[i]

    dist_u = np.empty(N)
    dist_i = np.empty(M)
    done_u = np.empty(N, dtype=np.bool_)
    done_i = np.empty(M, dtype=np.bool_)
    par_u = np.empty(N, dtype=np.int64)  # -1: source, else item index
    par_i = np.empty(M, dtype=np.int64)  # user index

    while True:
        for u in range(N):
            done_u[u] = False
            par_u[u] = -2
            dist_u[u] = -pot_u[u] if fu[u] < demands[u] else _INF
            if fu[u] < demands[u]:
                par_u[u] = -1
        for i in range(M):
            done_i[i] = False
            dist_i[i] = _INF
            par_i[i] = -1
        dist_t = _INF
        par_t = -1

        while True:
            best = _INF
            kind = -1
            idx = -1
            for u in range(N):
                if not done_u[u] and dist_u[u] < best:
                    best = dist_u[u]
                    kind = 0
                    idx = u
            for i in range(M):
                if not done_i[i] and dist_i[i] < best:
                    best = dist_i[i]
                    kind = 1
                    idx = i
            if kind < 0 or dist_t <= best:
                break
            if kind == 0:
                u = idx
                done_u[u] = True
                for i in range(M):
                    if done_i[i] or X[u, i] == 1 or theta[u, i] <= 0.0:
                        continue
                    nd = best - theta[u, i] + pot_u[u] - pot_i[i]
                    if nd < dist_i[i]:
                        dist_i[i] = nd
                        par_i[i] = u
            else:
                i = idx
                done_i[i] = True
                if fi[i] < capacities[i]:
                    nd = best + pot_i[i] - pot_t
                    if nd < dist_t:
                        dist_t = nd
                        par_t = i
                for u in range(N):
                    if done_u[u] or X[u, i] == 0:
                        continue
                    nd = best + theta[u, i] + pot_i[i] - pot_u[u]
                    if nd < dist_u[u]:
                        dist_u[u] = nd
                        par_u[u] = i

        if dist_t == _INF:
            break
        true_cost = dist_t + pot_t
        if true_cost >= -tol:
            break

        # nodes not settled before the sink are at least dist_t away
        for u in range(N):
            pot_u[u] += dist_u[u] if done_u[u] else dist_t
        for i in range(M):
            pot_i[i] += dist_i[i] if done_i[i] else dist_t
        pot_t += dist_t

        i = par_t
        fi[i] += 1
        while True:
            u = par_i[i]
            X[u, i] = 1
            prev = par_u[u]
            if prev == -1:
                fu[u] += 1
                break
            X[u, prev] = 0
            i = prev
    return X


@njit(cache=True)
def minimal_prices(theta, X, demands, capacities):
    """Entrywise-minimal capacity prices supporting the optimal allocation ``X``.

    Optimal prices are the solutions of a system of difference constraints
    (every held item beats every free item and the empty slot, free slots are
    unprofitable, slack items are free). Node 0 is the zero-price anchor; the
    minimal solution is minus the shortest distance from each item to node 0.
    """
    N, M = theta.shape
    W = np.full((M + 1, M + 1), _INF)
    colsum = np.zeros(M, dtype=np.int64)
    for u in range(N):
        for i in range(M):
            colsum[i] += X[u, i]
    for j in range(M):
        W[j + 1, 0] = 0.0
        if colsum[j] < capacities[j]:
            W[0, j + 1] = 0.0
    for u in range(N):
        held = 0
        for i in range(M):
            held += X[u, i]
        saturated = held >= demands[u]
        for i in range(M):
            if X[u, i] == 1:
                if theta[u, i] < W[0, i + 1]:
                    W[0, i + 1] = theta[u, i]
                if saturated:
                    for j in range(M):
                        if X[u, j] == 0:
                            w = theta[u, i] - theta[u, j]
                            if w < W[j + 1, i + 1]:
                                W[j + 1, i + 1] = w
            elif not saturated:
                if -theta[u, i] < W[i + 1, 0]:
                    W[i + 1, 0] = -theta[u, i]

    D = np.full(M + 1, _INF)
    D[0] = 0.0
    for _ in range(M + 1):
        changed = False
        for a in range(1, M + 1):
            for b in range(M + 1):
                if W[a, b] < _INF and D[b] < _INF:
                    cand = W[a, b] + D[b]
                    if cand < D[a]:
                        D[a] = cand
                        changed = True
        if not changed:
            break
    p = np.empty(M)
    for j in range(M):
        p[j] = max(0.0, -D[j + 1])
    return p
