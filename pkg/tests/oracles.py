"""Independent brute-force references used by the test-suite."""

import itertools
import math

import numpy as np


def all_binary_matrices(N, M):
    k = N * M
    codes = np.arange(2**k, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(k)) & 1
    return bits.reshape(-1, N, M)


def brute_force_welfare(theta, demands, capacities):
    """Best welfare over every feasible binary matrix (N*M <= 16)."""
    theta = np.asarray(theta, dtype=float)
    N, M = theta.shape
    Xs = all_binary_matrices(N, M)
    ok = (Xs.sum(axis=2) <= np.asarray(demands)).all(axis=1) & (Xs.sum(axis=1) <= np.asarray(capacities)).all(axis=1)
    vals = (Xs[ok] * theta).sum(axis=(1, 2))
    return float(vals.max())


def brute_force_max_surplus(theta_u, prices, demand, accept_reject=False):
    theta_u = np.asarray(theta_u, dtype=float)
    p = np.asarray(prices, dtype=float)
    gain = theta_u - p
    if accept_reject:
        gain = np.where(theta_u >= p, gain, 0.0)
    best = 0.0
    M = len(theta_u)
    for bits in itertools.product((0, 1), repeat=M):
        x = np.array(bits)
        if x.sum() <= demand:
            best = max(best, float(x @ gain))
    return best


def lp_dual_value(prices, theta, demands, capacities):
    """Dual function evaluated by solving each user's relaxed LP with scipy."""
    from scipy.optimize import linprog

    theta = np.asarray(theta, dtype=float)
    p = np.asarray(prices, dtype=float)
    total = float(p @ np.asarray(capacities))
    for u, d in enumerate(demands):
        c = -(theta[u] - p)
        res = linprog(c, A_ub=np.ones((1, len(p))), b_ub=[d], bounds=[(0, 1)] * len(p), method="highs")
        total += -res.fun
    return total


def lp_welfare(theta, demands, capacities):
    """LP relaxation optimum from scipy's HiGHS, an independent route to the welfare."""
    from scipy.optimize import linprog

    theta = np.asarray(theta, dtype=float)
    N, M = theta.shape
    A = []
    for u in range(N):
        row = np.zeros((N, M))
        row[u] = 1
        A.append(row.ravel())
    for i in range(M):
        col = np.zeros((N, M))
        col[:, i] = 1
        A.append(col.ravel())
    b = np.concatenate([demands, capacities])
    res = linprog(-theta.ravel(), A_ub=np.array(A), b_ub=b, bounds=[(0, 1)] * (N * M), method="highs")
    return -res.fun


def grid_max_over_ellipse(f_hat, W, radius, a, n_angles=20_000, n_radii=40):
    """Dense polar grid over {f : (f - f_hat)^T W (f - f_hat) <= radius}; returns max a.f."""
    L = np.linalg.cholesky(W)
    R = len(f_hat)
    if R == 1:
        z = np.linspace(-1, 1, 2 * n_radii + 1)[:, None]
    else:
        ang = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
        rad = np.linspace(0, 1, n_radii + 1)
        z = (rad[:, None, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)[None]).reshape(-1, 2)
    f = f_hat + math.sqrt(radius) * np.linalg.solve(L.T, z.T).T
    return float((f @ a).max())


def scripted_rho(t, delta, alpha, gamma, N, M, R, eta, G):
    # written out term by term, independently of the package
    a = 8.0 * eta * eta * R * np.log(3.0 * N) - 8.0 * eta * eta * R * np.log(alpha * delta)
    b = 4.0 * gamma * G * G
    inner = np.log(4.0) + np.log(M) + np.log(N) + 2 * np.log(t) - np.log(delta)
    c = 2.0 * alpha * t * M**0.5 * (8.0 + (8.0 * eta * eta * inner) ** 0.5)
    return a + b + c
