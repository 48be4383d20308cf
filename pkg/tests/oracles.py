"""Independent reference computations used to freeze expected values.

Nothing here imports the package's solvers; only plain numpy, scipy and
mpmath are used so that a bug in the library cannot leak into its oracle.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy.optimize import minimize


def bessel_j0_series(x: float, terms: int = 60) -> float:
    acc, term = 0.0, 1.0
    q = (x / 2.0) ** 2
    for k in range(terms):
        acc += term
        term *= -q / ((k + 1) ** 2)
    return acc


def first_bessel_zero() -> float:
    """First positive zero of J0 by bisection on its power series."""
    lo, hi = 2.0, 3.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if bessel_j0_series(lo) * bessel_j0_series(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def square_torsion_center(terms: int = 4001) -> float:
    """Centre value of ``-Delta u = 1`` on the unit square (double sine series)."""
    m = np.arange(1, terms + 1, 2, dtype=float)
    sign = np.where(((m - 1) / 2) % 2 == 0, 1.0, -1.0)
    M, N = np.meshgrid(m, m, indexing="ij")
    S = np.outer(sign, sign)
    return float(np.sum(16.0 * S / (math.pi**4 * M * N * (M * M + N * N))))


def discrete_square_eigenvalue(h: float) -> float:
    """Smallest eigenvalue of the 5-point Dirichlet Laplacian on the unit square."""
    return 8.0 / h**2 * math.sin(math.pi * h / 2) ** 2


def g_series(x: float, y: float, dps: int = 40) -> float:
    """``e^{|xy|} - 1 - |xy|`` at 40 digits."""
    with mpmath.workdps(dps):
        z = abs(mpmath.mpf(x) * mpmath.mpf(y))
        if z >= 1:
            return float(mpmath.exp(z) - 1 - z)
        # explicit series: no cancellation however small z is
        term, acc, k = z * z / 2, mpmath.mpf(0), 2
        while term > acc * mpmath.mpf(10) ** (-dps):
            acc += term
            k += 1
            term = term * z / k
        return float(acc)


def bisect_fiber_root(A: float, mu: float, uu: np.ndarray, weight: float, width: float = 1e-14) -> float:
    """Root of ``mu * w * sum(uu * (exp(t uu) - 1)) = A`` by bisection only."""

    def gamma(t):
        return mu * weight * float(np.sum(uu * np.expm1(t * uu)))

    lo, hi = 0.0, 1.0
    while gamma(hi) < A:
        lo, hi = hi, 2.0 * hi
    while hi - lo > width * hi:
        mid = 0.5 * (lo + hi)
        if gamma(mid) < A:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def brute_force_s4(n: int = 15, starts: int = 20, seed: int = 0) -> float:
    """Best L^4 Sobolev quotient on the ``n x n`` square grid via L-BFGS.

    Assembles its own 5-point matrix so it shares no code with the library.
    """
    h = 1.0 / (n + 1)
    w = h * h
    N = n * n
    L = np.zeros((N, N))
    for i in range(n):
        for j in range(n):
            k = i * n + j
            L[k, k] = 4.0
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                a, b = i + di, j + dj
                if 0 <= a < n and 0 <= b < n:
                    L[k, a * n + b] = -1.0
    L /= h * h

    def quotient(u):
        Lu = L @ u
        a = w * float(u @ Lu)
        n4 = math.sqrt(w * float(np.sum(u**4)))
        grad = 2 * w * Lu / n4 - a * (2 * w * u**3 / n4) / n4**2
        return a / n4, grad

    rng = np.random.default_rng(seed)
    best = math.inf
    for _ in range(starts):
        u0 = rng.random(N) + 0.1
        res = minimize(quotient, u0, jac=True, method="L-BFGS-B", options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": 5000})
        best = min(best, float(res.fun))
    return best


def c_gamma_reference(gamma: float) -> float:
    with mpmath.workdps(30):
        g = mpmath.mpf(gamma)
        fp = 4 * mpmath.pi
        first = mpmath.exp(g / fp) - 1
        second = 16 * mpmath.pi * (fp + g) / (fp - g) ** 2 * mpmath.exp(2 * g / (fp - g))
        return float(fp * max(first, second))


def square_symmetries(a: np.ndarray):
    """The eight images of a square array under the dihedral group."""
    for k in range(4):
        r = np.rot90(a, k)
        yield r
        yield r.T
