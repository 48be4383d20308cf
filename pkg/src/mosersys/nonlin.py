"""The exponential coupling potential, the system energy and pointwise checks.

All pointwise functions accept scalars or arrays and broadcast.  Exponent
arguments above ``OVERFLOW_CAP`` raise :class:`NonlinOverflowError` instead of
being clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonlinOverflowError, ParameterError
from .grid import Grid, h1_inner, integrate

OVERFLOW_CAP = 700.0
SERIES_SWITCH = 1e-3

# 1/k! for k = 0..20, used in the mid-range series of e^z - 1 - z.
_INV_FACT = np.array([1.0 / math.factorial(k) for k in range(21)])


@dataclass(frozen=True)
class ModelParams:
    lam1: float
    lam2: float
    mu1: float
    mu2: float
    beta: float

    def __post_init__(self):
        for name in ("lam1", "lam2", "mu1", "mu2", "beta"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.mu1 <= 0 or self.mu2 <= 0:
            raise ParameterError("mu1 and mu2 must be positive")

    @property
    def sqrt_mu(self) -> float:
        return math.sqrt(self.mu1 * self.mu2)

    def with_beta(self, beta: float) -> "ModelParams":
        return ModelParams(self.lam1, self.lam2, self.mu1, self.mu2, float(beta))

    def validate(self, lambda1: float) -> None:
        """Check ``lam_i > -Lambda_1`` for the domain's first eigenvalue."""
        for name in ("lam1", "lam2"):
            if getattr(self, name) <= -lambda1:
                raise ParameterError(
                    f"{name} = {getattr(self, name)} violates {name} > -Lambda_1 = {-lambda1:.6g}"
                )

    def as_dict(self) -> dict:
        return {
            "lam1": self.lam1,
            "lam2": self.lam2,
            "mu1": self.mu1,
            "mu2": self.mu2,
            "beta": self.beta,
        }


def _cap(z, cap: float = OVERFLOW_CAP) -> None:
    m = np.max(z) if np.size(z) else 0.0
    if m > cap:
        raise NonlinOverflowError(float(m), cap)


def expm1_minus_x(z):
    """``e^z - 1 - z`` for ``z >= 0`` without cancellation.

    Truncated series below ``SERIES_SWITCH``, a 20-term series up to 1 and
    ``expm1(z) - z`` beyond.
    """
    z = np.asarray(z, dtype=float)
    _cap(z)
    out = np.empty_like(z)
    small = z < SERIES_SWITCH
    mid = (~small) & (z < 1.0)
    big = z >= 1.0
    zs = z[small]
    out[small] = zs * zs * (0.5 + zs * (1 / 6 + zs * (1 / 24 + zs * (1 / 120 + zs / 720))))
    zm = z[mid]
    acc = np.full_like(zm, _INV_FACT[20])
    for k in range(19, 1, -1):
        acc = acc * zm + _INV_FACT[k]
    out[mid] = acc * zm * zm
    out[big] = np.expm1(z[big]) - z[big]
    return out if out.ndim else float(out)


def _expm1(z):
    z = np.asarray(z, dtype=float)
    _cap(z)
    out = np.expm1(z)
    return out if out.ndim else float(out)


def g_val(x, y):
    """``G(x, y) = e^{|xy|} - 1 - |xy|``."""
    return expm1_minus_x(np.abs(np.multiply(x, y)))


def h_val(p: ModelParams, x, y):
    return p.mu1 / 2 * g_val(x, x) + p.beta * g_val(x, y) + p.mu2 / 2 * g_val(y, y)


def h_grad(p: ModelParams, x, y):
    """Partial derivatives ``(H_x, H_y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    exy = _expm1(np.abs(x * y))
    hx = p.mu1 * x * _expm1(x * x) + p.beta * np.sign(x) * np.abs(y) * exy
    hy = p.mu2 * y * _expm1(y * y) + p.beta * np.sign(y) * np.abs(x) * exy
    if hx.ndim == 0:
        return float(hx), float(hy)
    return hx, hy


def h_hess(p: ModelParams, x, y):
    """Second derivatives ``(H_xx, H_xy, H_yy)`` on the quadrant ``x, y >= 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("h_hess is defined for x, y >= 0 only")
    xy = x * y
    _cap(np.maximum(x * x, y * y))
    _cap(xy)
    exy = np.exp(xy)
    ex2 = np.exp(x * x)
    ey2 = np.exp(y * y)
    hxx = p.mu1 * np.expm1(x * x) + 2 * p.mu1 * x * x * ex2 + p.beta * y * y * exy
    hyy = p.mu2 * np.expm1(y * y) + 2 * p.mu2 * y * y * ey2 + p.beta * x * x * exy
    hxy = p.beta * np.expm1(xy) + p.beta * xy * exy
    if hxx.ndim == 0:
        return float(hxx), float(hxy), float(hyy)
    return hxx, hxy, hyy


def quadratic_part(grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray) -> float:
    """``int(|grad u|^2 + |grad v|^2 + lam1 u^2 + lam2 v^2)``."""
    return h1_inner(grid, u, u, p.lam1) + h1_inner(grid, v, v, p.lam2)


def energy(grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray) -> float:
    grid.check(u, v)
    return 0.5 * (h1_inner(grid, u, u, p.lam1) + h1_inner(grid, v, v, p.lam2)) - integrate(
        grid, h_val(p, u, v)
    )


def energy_grad(grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray):
    """Strong-form residuals ``(-Delta u + lam1 u - H_u, -Delta v + lam2 v - H_v)``."""
    grid.check(u, v)
    hu, hv = h_grad(p, u, v)
    return grid.matrix @ u + p.lam1 * u - hu, grid.matrix @ v + p.lam2 * v - hv


def scalar_energy(grid: Grid, lam: float, mu: float, u: np.ndarray) -> float:
    """``J(u) = (1/2) int(|grad u|^2 + lam u^2) - (mu/2) int(e^{u^2} - 1 - u^2)``."""
    return 0.5 * h1_inner(grid, u, u, lam) - integrate(grid, mu / 2 * g_val(u, u))


def k_p(grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray, pexp: float) -> float:
    """The remainder ``K_p`` in ``I - <I', (u, v)>/p = (p-2)/(2p) Q + K_p``."""
    if not 2.0 <= pexp <= 4.0:
        raise ValueError("pexp must lie in [2, 4]")
    grid.check(u, v)
    uu, vv, uv = u * u, v * v, np.abs(u * v)
    half = pexp / 2
    integrand = (
        p.mu1 / pexp * (uu * _expm1(uu) - half * expm1_minus_x(uu))
        + 2 * p.beta / pexp * (uv * _expm1(uv) - half * expm1_minus_x(uv))
        + p.mu2 / pexp * (vv * _expm1(vv) - half * expm1_minus_x(vv))
    )
    return integrate(grid, integrand)


def nehari_pairing(grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray) -> float:
    """``<I'(u, v), (u, v)>``."""
    hu, hv = h_grad(p, u, v)
    return quadratic_part(grid, p, u, v) - integrate(grid, u * hu + v * hv)


def _leq(lhs, rhs, rel: float):
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    return lhs <= rhs + rel * np.maximum(np.abs(lhs), np.abs(rhs))


def check_lemma21(x, y, rel: float = 1e-12):
    """Evaluate the three elementary exponential inequalities at ``x, y >= 0``.

    (i)   (e^{xy}-1)^2 <= (e^{x^2}-1)(e^{y^2}-1)
    (ii)  G(x,y)^2 <= G(x,x) G(y,y)
    (iii) 0 <= 2(e^t-1-t) <= t(e^t-1) at t = x and t = y
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("check_lemma21 needs x, y >= 0")
    one = _leq(_expm1(x * y) ** 2, _expm1(x * x) * _expm1(y * y), rel)
    two = _leq(g_val(x, y) ** 2, g_val(x, x) * g_val(y, y), rel)
    three = np.ones(np.broadcast(x, y).shape, dtype=bool)
    for t in (x, y):
        lo = 2 * expm1_minus_x(t)
        three = three & (lo >= 0) & _leq(lo, t * _expm1(t), rel)
    if one.ndim == 0:
        return bool(one), bool(two), bool(three)
    return one, two, three


def check_lemma22(p: ModelParams, x, y, rel: float = 1e-12):
    """``x H_x + y H_y >= 4 H`` (valid for ``beta > 0``)."""
    hx, hy = h_grad(p, x, y)
    lhs = np.multiply(x, hx) + np.multiply(y, hy)
    return _leq(4 * h_val(p, x, y), lhs, rel)


def inequality_suite(p: ModelParams, samples: int, seed: int, upper: float = 6.0) -> dict:
    """Violation counts of the pointwise inequalities at uniform points of ``(0, upper]^2``.

    The coupling inequality ``x H_x + y H_y >= 4 H`` is only claimed for
    ``beta > 0``; it is skipped otherwise.
    """
    rng = np.random.default_rng(seed)
    x = upper * (1.0 - rng.random(samples))
    y = upper * (1.0 - rng.random(samples))
    one, two, three = check_lemma21(x, y)
    out = {
        "samples": int(samples),
        "lemma21_i": int(np.sum(~one)),
        "lemma21_ii": int(np.sum(~two)),
        "lemma21_iii": int(np.sum(~three)),
    }
    if p.beta > 0:
        out["lemma22"] = int(np.sum(~check_lemma22(p, x, y)))
    return out
