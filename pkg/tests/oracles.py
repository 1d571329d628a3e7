"""Independent reference computations used to check the production code paths.

Nothing here imports from ``esnfilter``; each routine takes a different route
to the same quantity (closed forms, explicit loops, integer arithmetic).
"""

import math

import numpy as np

MASK64 = (1 << 64) - 1


def charpoly_coeffs(m):
    """Characteristic polynomial coefficients by Faddeev-LeVerrier, leading 1 first."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(m)
    c = 1.0
    for k in range(1, n + 1):
        M = m @ M + c * np.eye(n)
        c = -np.trace(m @ M) / k
        coeffs.append(c)
    return coeffs


def spectral_radius_charpoly(m):
    return float(np.max(np.abs(np.roots(charpoly_coeffs(m)))))


def det(a):
    """Determinant by Laplace expansion along the first row."""
    n = len(a)
    if n == 1:
        return a[0][0]
    total = 0.0
    for j in range(n):
        minor = [row[:j] + row[j + 1 :] for row in a[1:]]
        total += (-1) ** j * a[0][j] * det(minor)
    return total


def cofactor_inverse(a):
    """Inverse via adjugate / determinant for small matrices (lists of floats)."""
    a = [list(map(float, row)) for row in a]
    n = len(a)
    d = det(a)
    if n == 1:
        return [[1.0 / d]]
    inv = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1 :] for k, row in enumerate(a) if k != i]
            inv[j][i] = (-1) ** (i + j) * det(minor) / d
    return inv


def ridge_bruteforce(X, D, lam):
    """W = D X^T (X X^T + lam I)^-1 with explicit loops and cofactor inversion."""
    X = np.asarray(X, dtype=float)
    D = np.asarray(D, dtype=float)
    n, M = X.shape
    o = D.shape[0]
    G = [[sum(X[i, t] * X[j, t] for t in range(M)) + (lam if i == j else 0.0)
          for j in range(n)] for i in range(n)]
    B = [[sum(D[r, t] * X[j, t] for t in range(M)) for j in range(n)] for r in range(o)]
    Ginv = cofactor_inverse(G)
    return np.array([[sum(B[r][k] * Ginv[k][j] for k in range(n)) for j in range(n)]
                     for r in range(o)])


def poly_of_delays(d, a, b):
    """Noise-free 1-D distortion evaluated sample by sample."""
    out = []
    for t in range(len(d)):
        s = 0.0
        for l, bl in enumerate(b):
            if t - l >= 0:
                s += bl * d[t - l]
        out.append(sum(ak * s ** (k + 1) for k, ak in enumerate(a)))
    return out


def splitmix64_int(seed, i):
    z = (seed + (i + 1) * 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def box_muller_int(seed, count):
    """Normal draws from integer SplitMix64 and scalar math, one at a time."""
    out = []
    for i in range(count):
        pair = i // 2
        h1 = splitmix64_int(seed, 2 * pair)
        h2 = splitmix64_int(seed, 2 * pair + 1)
        u1 = ((h1 >> 11) + 1) / 2.0**53
        u2 = (h2 >> 11) / 2.0**53
        r = math.sqrt(-2.0 * math.log(u1))
        out.append(r * (math.sin if i % 2 else math.cos)(2.0 * math.pi * u2))
    return out


def euler_scalar(x, u, w_self, w_in, gamma, kappa, dt):
    return x + dt * (-gamma * x + kappa * math.tanh(w_self * x + w_in * u))
