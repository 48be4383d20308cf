"""Vector ground states of the coupled system in three coupling regimes.

* small ``beta > 0``: minimise ``I`` over the two-constraint set
  ``M_beta = {G1 = G2 = 0}``, reached along ``(u, v) -> (sqrt(t) u, sqrt(s) v)``;
* large ``beta > 0``: minimise ``I`` over the diagonal Nehari set ``N_beta``,
  reached along ``(u, v) -> sqrt(t) (u, v)``;
* small ``beta < 0``: minimise the positive-part energy over ``M_beta`` inside
  an H^1 ball around the pair of scalar ground states.

Pairs are stored as one concatenated vector ``x = [u, v]`` inside the
descent loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from ._descent import descend
from .errors import (
    ConvergenceError,
    NonlinOverflowError,
    ParameterError,
    ProjectionError,
    RegimeError,
    SemitrivialCollapseError,
)
from .grid import Grid, grad_norm, h1_inner, integrate, l2_norm, principal_eigenpair, shifted_solve
from .nonlin import (
    OVERFLOW_CAP,
    ModelParams,
    _expm1,
    energy,
    energy_grad,
    g_val,
    h_grad,
    h_hess,
    k_p,
    nehari_pairing,
    quadratic_part,
)
from .options import SolverOptions
from .scalar import GroundState, increasing_root, smooth_perturbation

REGIMES = ("small-positive", "large-positive", "negative")

_T_MIN, _T_MAX = 1e-8, 1e8


@dataclass(frozen=True)
class FiberCoords:
    t: float
    s: float

    def __post_init__(self):
        if not (self.t > 0 and self.s > 0):
            raise ValueError("fiber coordinates must be positive")


@dataclass
class SystemSolution:
    u: np.ndarray
    v: np.ndarray
    params: ModelParams
    regime: str
    level: float
    constraint_residuals: tuple
    pde_residuals: tuple
    det_j: float | None
    iterations: int
    gradient_norm: float
    certificates: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.certificates.values())

    def summary(self) -> dict:
        return {
            "regime": self.regime,
            "params": self.params.as_dict(),
            "level": self.level,
            "constraint_residuals": list(self.constraint_residuals),
            "pde_residuals": list(self.pde_residuals),
            "det_j": self.det_j,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "certificates": dict(self.certificates),
            "diagnostics": dict(self.diagnostics),
        }


# ---------------------------------------------------------------------------
# constraint functionals and the matrix J


def constraints_g(grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """``(G1, G2)`` with ``G1 = int |grad u|^2 + lam1 u^2 - u H_u``."""
    grid.check(u, v)
    hu, hv = h_grad(p, u, v)
    g1 = h1_inner(grid, u, u, p.lam1) - integrate(grid, u * hu)
    g2 = h1_inner(grid, v, v, p.lam2) - integrate(grid, v * hv)
    return g1, g2


def matrix_j(grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """The symmetric matrix ``[[a, c], [c, b]]`` of the constraint derivatives.

    On ``M_beta`` it is minus the matrix ``<G_i', (u,0)>, <G_i', (0,v)>``.
    """
    grid.check(u, v)
    if np.any(u < 0) or np.any(v < 0):
        raise ValueError("matrix_j needs u, v >= 0")
    uu, vv, w = u * u, v * v, u * v
    _cap_all(uu, vv, w)
    ew = np.exp(w)
    cross = w * w * ew
    lin = w * np.expm1(w)
    a = integrate(grid, 2 * p.mu1 * uu * uu * np.exp(uu) + p.beta * (cross - lin))
    b = integrate(grid, 2 * p.mu2 * vv * vv * np.exp(vv) + p.beta * (cross - lin))
    c = p.beta * integrate(grid, cross + lin)
    return np.array([[a, c], [c, b]])


def det_lower_bound(grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray) -> float:
    """``4 (mu1 mu2 - beta^2) int u^4 e^{u^2} int v^4 e^{v^2}``."""
    uu, vv = u * u, v * v
    _cap_all(uu, vv)
    return (
        4.0
        * (p.mu1 * p.mu2 - p.beta**2)
        * integrate(grid, uu * uu * np.exp(uu))
        * integrate(grid, vv * vv * np.exp(vv))
    )


def check_identity(grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray, pexp: float):
    """Both sides of ``I = (p-2)/(2p) Q + K_p + <I', (u,v)>/p``.

    Returns ``(lhs, rhs, K_p)``.
    """
    lhs = energy(grid, p, u, v)
    Q = quadratic_part(grid, p, u, v)
    K = k_p(grid, p, u, v, pexp)
    rhs = (pexp - 2) / (2 * pexp) * Q + K + nehari_pairing(grid, p, u, v) / pexp
    return lhs, rhs, K


def _cap_all(*zs) -> None:
    for z in zs:
        m = float(np.max(z)) if np.size(z) else 0.0
        if m > OVERFLOW_CAP:
            raise NonlinOverflowError(m, OVERFLOW_CAP)


# ---------------------------------------------------------------------------
# projection onto M_beta


class _Fiber2:
    """``G_i(sqrt(t) u, sqrt(s) v) / (t or s)`` in log coordinates."""

    def __init__(self, grid, p, u, v):
        self.p = p
        self.wt = grid.weight
        self.uu = u * u
        self.vv = v * v
        self.w = np.abs(u * v)
        self.A1 = h1_inner(grid, u, u, p.lam1)
        self.A2 = h1_inner(grid, v, v, p.lam2)
        self.umax = float(self.uu.max())
        self.vmax = float(self.vv.max())
        self.wmax = float(self.w.max())
        # largest admissible log-scalings before the exponent cap
        self.tau_max = min(math.log(_T_MAX), math.log(OVERFLOW_CAP / self.umax))
        self.sig_max = min(math.log(_T_MAX), math.log(OVERFLOW_CAP / self.vmax))

    def admissible(self, tau, sig) -> bool:
        return (
            tau <= self.tau_max
            and sig <= self.sig_max
            and math.exp(0.5 * (tau + sig)) * self.wmax <= OVERFLOW_CAP
            and tau >= math.log(_T_MIN)
            and sig >= math.log(_T_MIN)
        )

    def residual(self, tau, sig, jac=False):
        p, wt = self.p, self.wt
        t, s = math.exp(tau), math.exp(sig)
        e1 = np.expm1(t * self.uu)
        e2 = np.expm1(s * self.vv)
        P1 = p.mu1 * wt * float(np.sum(self.uu * e1))
        P2 = p.mu2 * wt * float(np.sum(self.vv * e2))
        z = math.sqrt(t * s) * self.w
        ez = np.expm1(z)
        S0 = wt * float(np.sum(self.w * ez))
        r1, r2 = math.sqrt(s / t), math.sqrt(t / s)
        F = np.array(
            [(self.A1 - P1 - p.beta * r1 * S0) / self.A1, (self.A2 - P2 - p.beta * r2 * S0) / self.A2]
        )
        if not jac:
            return F
        dP1 = t * p.mu1 * wt * float(np.sum(self.uu * self.uu * (e1 + 1)))
        dP2 = s * p.mu2 * wt * float(np.sum(self.vv * self.vv * (e2 + 1)))
        S1 = wt * float(np.sum(self.w * z * (ez + 1)))
        hb = 0.5 * p.beta
        J = np.array(
            [
                [-(dP1 + hb * r1 * (S1 - S0)) / self.A1, -hb * r1 * (S1 + S0) / self.A1],
                [-hb * r2 * (S1 + S0) / self.A2, -(dP2 + hb * r2 * (S1 - S0)) / self.A2],
            ]
        )
        return F, J


def _newton2(fib: _Fiber2, tau, sig, rtol, max_iter=60):
    F, J = fib.residual(tau, sig, jac=True)
    for _ in range(max_iter):
        if np.max(np.abs(F)) <= rtol:
            return tau, sig, True
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return tau, sig, False
        scale = min(1.0, 2.0 / max(np.max(np.abs(step)), 1e-300))
        step = scale * step
        merit = float(np.sum(F * F))
        lam = 1.0
        while lam > 1e-8:
            tn, sn = tau + lam * step[0], sig + lam * step[1]
            if fib.admissible(tn, sn):
                Fn, Jn = fib.residual(tn, sn, jac=True)
                if float(np.sum(Fn * Fn)) < (1 - 1e-4 * lam) * merit or np.max(np.abs(Fn)) <= rtol:
                    break
            lam *= 0.5
        else:
            return tau, sig, False
        tau, sig, F, J = tn, sn, Fn, Jn
    return tau, sig, bool(np.max(np.abs(F)) <= rtol)


def _alternating(fib: _Fiber2, tau, sig, rounds=50):
    """Alternate scalar root solves for ``t`` (fixed ``s``) and ``s`` (fixed ``t``)."""
    lo = math.log(_T_MIN)
    for _ in range(rounds):
        hi = min(fib.tau_max, 2 * math.log(OVERFLOW_CAP / fib.wmax) - sig)
        f = lambda x: fib.residual(x, sig)[0]
        if not (f(lo) > 0 > f(hi)):
            return tau, sig, False
        tau = brentq(f, lo, hi, xtol=1e-14)
        hi = min(fib.sig_max, 2 * math.log(OVERFLOW_CAP / fib.wmax) - tau)
        g = lambda x: fib.residual(tau, x)[1]
        if not (g(lo) > 0 > g(hi)):
            return tau, sig, False
        sig = brentq(g, lo, hi, xtol=1e-14)
        if np.max(np.abs(fib.residual(tau, sig))) <= 1e-6:
            return tau, sig, True
    return tau, sig, False


def project_m_beta(
    grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray, rtol: float = 1e-12
) -> FiberCoords:
    """Coordinates ``(t, s)`` with ``(sqrt(t) u, sqrt(s) v)`` in ``M_beta``.

    Damped Newton in ``(log t, log s)`` from ``(1, 1)``; if it fails, up to
    50 rounds of alternating scalar root solves followed by Newton again.
    """
    grid.check(u, v)
    if not (np.any(u) and np.any(v)):
        raise ProjectionError("projection onto M_beta needs both components nonzero")
    fib = _Fiber2(grid, p, u, v)
    if not (fib.A1 > 0 and fib.A2 > 0):
        raise ProjectionError("quadratic parts must be positive; check lam_i > -Lambda_1")
    if not fib.admissible(0.0, 0.0):
        raise ProjectionError("starting pair is beyond the exponent cap")
    tau, sig, ok = _newton2(fib, 0.0, 0.0, rtol)
    if not ok:
        tau, sig, ok = _alternating(fib, 0.0, 0.0)
        if ok:
            tau, sig, ok = _newton2(fib, tau, sig, rtol)
    if not ok:
        raise ProjectionError(
            "projection onto M_beta failed",
            residual=float(np.max(np.abs(fib.residual(tau, sig)))),
            diagnostics={"t": math.exp(tau), "s": math.exp(sig)},
        )
    return FiberCoords(math.exp(tau), math.exp(sig))


# ---------------------------------------------------------------------------
# diagonal fiber


def fiber_root_diag(
    grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray, rtol: float = 1e-12
) -> float:
    """The maximiser ``t*`` of ``f(t) = I(sqrt(t) u, sqrt(t) v)`` for ``beta > 0``.

    ``f'(t) = (Q - R(t)) / 2`` with ``R`` increasing and convex, so ``t*`` is
    the unique root of ``R(t) = Q``.
    """
    grid.check(u, v)
    if p.beta <= 0:
        raise ParameterError("fiber_root_diag needs beta > 0")
    Q = quadratic_part(grid, p, u, v)
    if not Q > 0:
        raise ParameterError("quadratic part must be positive")
    uu, vv, w = u * u, v * v, np.abs(u * v)
    top = max(float(uu.max()), float(vv.max()), float(w.max()))
    if top == 0.0:
        raise ParameterError("fiber root of the zero pair")
    wt = grid.weight

    def R(t):
        e1, e2, ew = np.expm1(t * uu), np.expm1(t * vv), np.expm1(t * w)
        val = float(np.sum(p.mu1 * uu * e1 + p.mu2 * vv * e2 + 2 * p.beta * w * ew)) * wt
        der = float(np.sum(p.mu1 * uu * uu * (e1 + 1) + p.mu2 * vv * vv * (e2 + 1)
                           + 2 * p.beta * w * w * (ew + 1))) * wt
        return val, der

    return increasing_root(R, Q, OVERFLOW_CAP / top, rtol)


# ---------------------------------------------------------------------------
# positive-part energy


def energy_tilde(grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray) -> float:
    """Energy with ``H`` evaluated at the positive parts ``u+, v+``."""
    grid.check(u, v)
    up, vp = np.maximum(u, 0.0), np.maximum(v, 0.0)
    Ht = p.mu1 / 2 * g_val(up, up) + p.beta * g_val(up, vp) + p.mu2 / 2 * g_val(vp, vp)
    return 0.5 * (h1_inner(grid, u, u, p.lam1) + h1_inner(grid, v, v, p.lam2)) - integrate(grid, Ht)


def grad_tilde(grid: Grid, p: ModelParams, u: np.ndarray, v: np.ndarray):
    """Strong-form gradient of :func:`energy_tilde`."""
    grid.check(u, v)
    up, vp = np.maximum(u, 0.0), np.maximum(v, 0.0)
    exy = _expm1(up * vp)
    fu = p.mu1 * up * _expm1(up * up) + p.beta * vp * exy
    fv = p.mu2 * vp * _expm1(vp * vp) + p.beta * up * exy
    return grid.matrix @ u + p.lam1 * u - fu, grid.matrix @ v + p.lam2 * v - fv


def d_tilde(
    grid: Grid,
    p: ModelParams,
    u1: np.ndarray,
    u2: np.ndarray,
    t0: float = 0.5,
    n_grid: int = 64,
) -> dict:
    """``max J(s u1, t u2)`` over ``s, t in [t0, s0]``.

    ``s0`` is the first of ``1.5, 3, 6, ...`` with ``J(s0 u1, s0 u2) < 0`` and
    both scalar fibers decreasing at ``s0``.  The maximum over an
    ``n_grid x n_grid`` lattice is polished by a bounded quasi-Newton search.
    """
    A1 = h1_inner(grid, u1, u1, p.lam1)
    A2 = h1_inner(grid, u2, u2, p.lam2)

    def fiber_slope(a, mu, u, c):
        return c * c * (a - mu * integrate(grid, u * u * _expm1(c * c * u * u)))

    if not (fiber_slope(A1, p.mu1, u1, t0) > 0 and fiber_slope(A2, p.mu2, u2, t0) > 0):
        raise ParameterError(f"t0 = {t0} is not below the scalar fiber maxima")
    s0 = 1.5
    while True:
        try:
            ok = (
                energy_tilde(grid, p, s0 * u1, s0 * u2) < 0
                and fiber_slope(A1, p.mu1, u1, s0) < 0
                and fiber_slope(A2, p.mu2, u2, s0) < 0
            )
        except NonlinOverflowError as exc:
            raise ParameterError("no admissible s0 below the exponent cap") from exc
        if ok:
            break
        s0 *= 2.0

    def J(st):
        return energy_tilde(grid, p, st[0] * u1, st[1] * u2)

    axis = np.linspace(t0, s0, n_grid)
    vals = np.array([[J((s, t)) for t in axis] for s in axis])
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    best = float(vals[i, j])
    point = (float(axis[i]), float(axis[j]))
    res = minimize(lambda st: -J(st), np.array(point), method="L-BFGS-B", bounds=[(t0, s0)] * 2)
    if -res.fun > best:
        best, point = float(-res.fun), (float(res.x[0]), float(res.x[1]))
    return {"value": best, "argmax": point, "t0": t0, "s0": s0, "lattice_max": float(vals[i, j])}


# ---------------------------------------------------------------------------
# descent machinery


class _Pair:
    """Shared H^1 calculus for a concatenated pair ``x = [u, v]``."""

    def __init__(self, grid: Grid, p: ModelParams):
        self.grid, self.p = grid, p
        self.N = grid.size
        self.w = grid.weight
        self.L = grid.matrix

    def split(self, x):
        return x[: self.N], x[self.N :]

    def join(self, u, v):
        return np.concatenate([u, v])

    def metric(self, a, b):
        a1, a2 = self.split(a)
        b1, b2 = self.split(b)
        p = self.p
        return float(
            (np.sum(a1 * (self.L @ b1 + p.lam1 * b1)) + np.sum(a2 * (self.L @ b2 + p.lam2 * b2))) * self.w
        )

    def riesz(self, fu, fv):
        """``(A1^{-1} fu, A2^{-1} fv)`` with ``A_i = -Delta_h + lam_i``."""
        return shifted_solve(self.grid, fu, self.p.lam1), shifted_solve(self.grid, fv, self.p.lam2)

    def gradient(self, x):
        u, v = self.split(x)
        hu, hv = h_grad(self.p, u, v)
        ru, rv = self.riesz(hu, hv)
        return self.join(u - ru, v - rv)

    def constrained_gradient(self, x):
        """H^1 gradient of ``I`` minus the multiplier combination of ``G1', G2'``.

        Multipliers solve ``[[a, c], [c, b]] alpha = -(G1, G2)``, obtained by
        testing ``I' - alpha . G'`` against ``(u, 0)`` and ``(0, v)``.
        """
        grid, p = self.grid, self.p
        u, v = self.split(x)
        hu, hv = h_grad(p, u, v)
        ru, rv = self.riesz(hu, hv)
        g = self.join(u - ru, v - rv)
        G = np.array(constraints_g(grid, p, u, v))
        M = matrix_j(grid, p, u, v)
        alpha = np.linalg.solve(M, -G)
        if not np.any(alpha):
            return g
        hxx, hxy, hyy = h_hess(p, u, v)
        a_u, a_v = self.riesz(u * hxx, u * hxy)
        b_u, b_v = self.riesz(v * hxy, v * hyy)
        r1 = self.join(2 * u - ru - a_u, -a_v)
        r2 = self.join(-b_u, 2 * v - rv - b_v)
        return g - alpha[0] * r1 - alpha[1] * r2


def _collapse_guard(pair: _Pair, x0, threshold, extra=None):
    u0, v0 = pair.split(x0)
    m0 = (l2_norm(pair.grid, u0), l2_norm(pair.grid, v0))

    def guard(x, it):
        u, v = pair.split(x)
        if l2_norm(pair.grid, u) < threshold * m0[0] or l2_norm(pair.grid, v) < threshold * m0[1]:
            raise SemitrivialCollapseError(
                "one component collapsed towards zero", diagnostics={"iteration": it}
            )
        if extra is not None:
            extra(x, it)

    return guard


def _perturbed_pairs(grid, u1, u2, opts: SolverOptions):
    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.restarts - 1):
        a = np.abs(u1 + opts.perturbation * u1.max() * smooth_perturbation(grid, rng))
        b = np.abs(u2 + opts.perturbation * u2.max() * smooth_perturbation(grid, rng))
        yield a, b


def _best_of(runs):
    best = None
    for res in runs:
        if res.converged and (best is None or res.energy < best.energy - 1e-12 * abs(best.energy)):
            best = res
    return best


def _run_starts(starts, run_one):
    """Run the descent from each start; collect levels and failures."""
    results, levels, failures = [], [], []
    for x0 in starts:
        try:
            res = run_one(x0)
        except (SemitrivialCollapseError, ProjectionError, RegimeError, NonlinOverflowError) as exc:
            failures.append(type(exc).__name__)
            levels.append(float("nan"))
            continue
        results.append(res)
        levels.append(res.energy if res.converged else float("nan"))
        failures.append(None if res.converged else "not converged")
    return results, levels, failures


def _check_seeds(grid: Grid, p: ModelParams, seeds):
    gs1, gs2 = seeds
    if not (isinstance(gs1, GroundState) and isinstance(gs2, GroundState)):
        raise TypeError("seeds must be two GroundState objects")
    grid.check(gs1.u, gs2.u)
    if not (
        math.isclose(gs1.lam, p.lam1) and math.isclose(gs1.mu, p.mu1)
        and math.isclose(gs2.lam, p.lam2) and math.isclose(gs2.mu, p.mu2)
    ):
        raise ParameterError("seed ground states do not match (lam_i, mu_i)")
    return gs1, gs2


def _common_certificates(grid, p, u, v, opts, gs1, gs2):
    ru, rv = energy_grad(grid, p, u, v)
    pde = (l2_norm(grid, ru), l2_norm(grid, rv))
    certs = {
        "nontrivial": bool(l2_norm(grid, u) > 1e-3 and l2_norm(grid, v) > 1e-3),
        "nonnegative": bool(u.min() >= 0 and v.min() >= 0),
        "interior_positive": bool(u.min() > 0 and v.min() > 0),
        "pde_residual": bool(max(pde) <= opts.pde_tol),
    }
    dist = math.sqrt(h1_inner(grid, u - gs1.u, u - gs1.u) + h1_inner(grid, v - gs2.u, v - gs2.u))
    return pde, certs, dist


def _identity_certs(grid, p, u, v):
    out, worst = {}, 0.0
    for pexp in (2, 3, 4):
        lhs, rhs, K = check_identity(grid, p, u, v, pexp)
        err = abs(lhs - rhs) / max(abs(lhs), 1e-300)
        worst = max(worst, err)
        out[f"identity_p{pexp}"] = bool(err <= 1e-10)
        if p.beta > 0:
            out[f"k_p{pexp}_nonnegative"] = bool(K >= 0)
    return out, worst


# ---------------------------------------------------------------------------
# small beta > 0


def product_fiber_start(grid: Grid, p: ModelParams, u1: np.ndarray, u2: np.ndarray):
    """The maximiser of ``f(t, s) = I(sqrt(t) u1, sqrt(s) u2)``, which lies on ``M_beta``."""
    fc = project_m_beta(grid, p, u1, u2)
    u, v = math.sqrt(fc.t) * u1, math.sqrt(fc.s) * u2
    return u, v, fc


def solve_small_beta(
    grid: Grid, p: ModelParams, seeds, opts: SolverOptions | None = None
) -> SystemSolution:
    """Projected descent of ``I`` on ``M_beta`` for ``0 < beta < min(sqrt(mu1 mu2), beta1, beta2)``."""
    opts = opts or SolverOptions()
    gs1, gs2 = _check_seeds(grid, p, seeds)
    lambda1, _ = principal_eigenpair(grid)
    p.validate(lambda1)
    b1 = p.mu1 * gs1.moment / integrate(grid, gs1.u**2 * gs2.u**2)
    b2 = p.mu2 * gs2.moment / integrate(grid, gs1.u**2 * gs2.u**2)
    upper = min(p.sqrt_mu, b1, b2)
    if not 0 < p.beta < upper:
        raise ParameterError(f"beta = {p.beta} outside (0, {upper:.6g}) for the small-beta regime")

    pair = _Pair(grid, p)
    e_sum = gs1.energy + gs2.energy
    det_slack = [math.inf]

    def energy_x(x):
        return energy(grid, p, *pair.split(x))

    def project(x):
        u, v = pair.split(np.abs(x))
        fc = project_m_beta(grid, p, u, v)
        return pair.join(math.sqrt(fc.t) * u, math.sqrt(fc.s) * v)

    def det_watch(x, it):
        u, v = pair.split(x)
        M = matrix_j(grid, p, u, v)
        bound = det_lower_bound(grid, p, u, v)
        det_slack[0] = min(det_slack[0], (np.linalg.det(M) - bound) / abs(M[0, 0] * M[1, 1]))

    u0, v0, fc0 = product_fiber_start(grid, p, gs1.u, gs2.u)
    init_level = energy(grid, p, u0, v0)
    starts = [pair.join(u0, v0)]
    for a, b in _perturbed_pairs(grid, gs1.u, gs2.u, opts):
        try:
            starts.append(project(pair.join(a, b)))
        except ProjectionError:
            continue

    def run_one(x0):
        det_watch(x0, 0)
        guard = _collapse_guard(pair, x0, opts.collapse_threshold, det_watch)
        return descend(
            energy_x, pair.constrained_gradient, project, pair.metric, x0, opts.tol, opts.max_iter, guard
        )

    results, levels, failures = _run_starts(starts, run_one)
    best = _best_of(results)
    if best is None:
        _raise_none(results, failures, "small-beta")
    u, v = pair.split(best.x)
    G = constraints_g(grid, p, u, v)
    A = (h1_inner(grid, u, u, p.lam1), h1_inner(grid, v, v, p.lam2))
    M = matrix_j(grid, p, u, v)
    det = float(np.linalg.det(M))
    bound = det_lower_bound(grid, p, u, v)
    scale = abs(M[0, 0] * M[1, 1])
    det_watch(best.x, -1)
    pde, certs, dist = _common_certificates(grid, p, u, v, opts, gs1, gs2)
    ident, ident_err = _identity_certs(grid, p, u, v)
    certs.update(
        {
            "constraints": bool(abs(G[0]) + abs(G[1]) <= 1e-8 * (A[0] + A[1])),
            "level_below_sum": bool(best.energy < e_sum - 1e-10),
            "level_below_start": bool(best.energy <= init_level + 1e-12 * abs(init_level)),
            "det_j_bound": bool(det >= bound - 1e-10 * scale),
            "det_j_bound_all_iterates": bool(det_slack[0] >= -1e-10),
        }
    )
    certs.update(ident)
    return SystemSolution(
        u=u,
        v=v,
        params=p,
        regime="small-positive",
        level=best.energy,
        constraint_residuals=(abs(G[0]) / A[0], abs(G[1]) / A[1]),
        pde_residuals=pde,
        det_j=det,
        iterations=best.iterations,
        gradient_norm=best.gradient_norm,
        certificates=certs,
        diagnostics={
            "e1_plus_e2": e_sum,
            "start_level": init_level,
            "start_coords": [fc0.t, fc0.s],
            "det_lower_bound": bound,
            "beta_upper": upper,
            "beta_upper_caveat": "theorem additionally needs beta < beta** (not computable)",
            "identity_max_rel_error": ident_err,
            "h1_distance_to_seeds": dist,
            "restart_levels": levels,
            "restart_failures": failures,
        },
    )


def _raise_none(results, failures, regime):
    last = results[-1] if results else None
    if results:
        raise ConvergenceError(
            f"{regime} descent did not converge from any start",
            residual=last.gradient_norm,
            diagnostics={"failures": failures, "energy": last.energy},
        )
    if any(f == "RegimeError" for f in failures):
        raise RegimeError(f"{regime} descent left its admissible region from every start",
                          diagnostics={"failures": failures})
    if any(f == "SemitrivialCollapseError" for f in failures):
        raise SemitrivialCollapseError(f"{regime} descent collapsed to a semitrivial pair",
                                       diagnostics={"failures": failures})
    raise ConvergenceError(f"{regime} descent failed from every start", diagnostics={"failures": failures})


# ---------------------------------------------------------------------------
# large beta > 0


def solve_large_beta(
    grid: Grid,
    p: ModelParams,
    opts: SolverOptions | None = None,
    seeds=None,
    beta_bar0: float | None = None,
    beta56: tuple[float, float] | None = None,
) -> SystemSolution:
    """Minimise ``I`` over ``N_beta`` via descent on ray-normalised pairs.

    Starts from the projected pair of scalar ground states and from the
    diagonal seed ``(u1, u1)``.  ``beta_bar0`` and ``beta56 = (beta5,
    beta6)`` switch on the certificates that hold for ``beta >= beta_bar0``;
    they are computed from the seeds when omitted.
    """
    from .constants import beta_thresholds
    from .scalar import solve_scalar_ground_state

    opts = opts or SolverOptions()
    if p.beta <= 0:
        raise ParameterError("the large-beta regime needs beta > 0")
    lambda1, _ = principal_eigenpair(grid)
    p.validate(lambda1)
    if seeds is None:
        seeds = (
            solve_scalar_ground_state(grid, p.lam1, p.mu1, opts),
            solve_scalar_ground_state(grid, p.lam2, p.mu2, opts),
        )
    gs1, gs2 = _check_seeds(grid, p, seeds)
    if beta_bar0 is None or beta56 is None:
        th = beta_thresholds(grid, gs1, gs2, p)
        beta_bar0, beta56 = th["beta_bar0"], (th["beta5"], th["beta6"])

    pair = _Pair(grid, p)

    def energy_x(x):
        return energy(grid, p, *pair.split(x))

    def project(x):
        x = np.abs(x)
        u, v = pair.split(x)
        return math.sqrt(fiber_root_diag(grid, p, u, v)) * x

    diag_seed = project(pair.join(gs1.u, gs1.u))
    diag_level = energy_x(diag_seed)
    starts = [project(pair.join(gs1.u, gs2.u)), diag_seed]

    def run_one(x0):
        guard = _collapse_guard(pair, x0, opts.collapse_threshold)
        return descend(energy_x, pair.gradient, project, pair.metric, x0, opts.tol, opts.max_iter, guard)

    results, levels, failures = _run_starts(starts, run_one)
    best = _best_of(results)
    if best is None:
        _raise_none(results, failures, "large-beta")
    u, v = pair.split(best.x)
    d = best.energy
    Q = quadratic_part(grid, p, u, v)
    nehari = nehari_pairing(grid, p, u, v)
    e_min = min(gs1.energy, gs2.energy)
    strong = p.beta >= beta_bar0
    coercive = min(1.0, (p.lam1 + lambda1) / lambda1, (p.lam2 + lambda1) / lambda1)
    norm2 = h1_inner(grid, u, u) + h1_inner(grid, v, v)
    bound_bd = 4 * max(gs1.energy * beta56[0], gs2.energy * beta56[1])
    pde, certs, dist = _common_certificates(grid, p, u, v, opts, gs1, gs2)
    ident, ident_err = _identity_certs(grid, p, u, v)
    certs.update(
        {
            "nehari": bool(abs(nehari) <= 1e-8 * Q),
            "level_below_min": bool(d < e_min - 1e-10 if strong else d <= e_min + 1e-12 * e_min),
            "level_below_diag_seed": bool(d <= diag_level + 1e-12 * abs(diag_level)),
            "norm_bound": bool(norm2 <= 4 * d / coercive * (1 + 1e-10)),
        }
    )
    if strong:
        certs["beta_level_bound"] = bool(p.beta * d <= bound_bd * 1.02)
    certs.update(ident)
    return SystemSolution(
        u=u,
        v=v,
        params=p,
        regime="large-positive",
        level=d,
        constraint_residuals=(abs(nehari) / Q, 0.0),
        pde_residuals=pde,
        det_j=None,
        iterations=best.iterations,
        gradient_norm=best.gradient_norm,
        certificates=certs,
        diagnostics={
            "min_e1_e2": e_min,
            "diag_seed_level": diag_level,
            "beta_bar0": beta_bar0,
            "beta_level_product": p.beta * d,
            "beta_level_bound": bound_bd,
            "norm_squared": norm2,
            "norm_bound": 4 * d / coercive,
            "grad_norm_u": grad_norm(grid, u),
            "grad_norm_v": grad_norm(grid, v),
            "identity_max_rel_error": ident_err,
            "restart_levels": levels,
            "restart_failures": failures,
        },
    )


# ---------------------------------------------------------------------------
# small beta < 0


def solve_negative_beta(
    grid: Grid, p: ModelParams, seeds, opts: SolverOptions | None = None
) -> SystemSolution:
    """Descent of the positive-part energy on ``M_beta`` near the scalar pair.

    The iterate must stay in the H^1 ball of radius ``delta`` (default
    ``min(|grad u1|, |grad u2|) / 2``) around ``(u1, u2)``; leaving it raises
    :class:`RegimeError`.
    """
    opts = opts or SolverOptions()
    gs1, gs2 = _check_seeds(grid, p, seeds)
    lambda1, _ = principal_eigenpair(grid)
    p.validate(lambda1)
    cap = opts.beta_negative_cap * p.sqrt_mu
    if not -cap <= p.beta < 0:
        raise ParameterError(f"beta = {p.beta} outside [-{cap:.6g}, 0) for the negative regime")
    delta = opts.delta if opts.delta is not None else 0.5 * min(gs1.rho_proxy, gs2.rho_proxy)
    pair = _Pair(grid, p)
    ref = pair.join(gs1.u, gs2.u)

    def dist(x):
        du, dv = pair.split(x - ref)
        return math.sqrt(max(h1_inner(grid, du, du) + h1_inner(grid, dv, dv), 0.0))

    def ball(x, it):
        if dist(x) > delta:
            raise RegimeError(
                "iterate left the trust ball around the scalar ground states",
                residual=dist(x),
                diagnostics={"delta": delta, "iteration": it},
            )

    def energy_x(x):
        return energy_tilde(grid, p, *pair.split(x))

    def project(x):
        u, v = pair.split(np.abs(x))
        fc = project_m_beta(grid, p, u, v)
        return pair.join(math.sqrt(fc.t) * u, math.sqrt(fc.s) * v)

    x0 = project(ref)
    ball(x0, 0)
    guard = _collapse_guard(pair, x0, opts.collapse_threshold, ball)
    res = descend(energy_x, pair.constrained_gradient, project, pair.metric, x0, opts.tol, opts.max_iter, guard)
    if not res.converged:
        raise ConvergenceError(
            "negative-beta descent did not converge",
            residual=res.gradient_norm,
            diagnostics={"energy": res.energy, "iterations": res.iterations},
        )
    u, v = pair.split(res.x)
    G = constraints_g(grid, p, u, v)
    A = (h1_inner(grid, u, u, p.lam1), h1_inner(grid, v, v, p.lam2))
    dt = d_tilde(grid, p, gs1.u, gs2.u)
    e_sum = gs1.energy + gs2.energy
    ru, rv = grad_tilde(grid, p, u, v)
    pde, certs, distance = _common_certificates(grid, p, u, v, opts, gs1, gs2)
    ident, ident_err = _identity_certs(grid, p, u, v)
    certs.update(
        {
            "pde_residual": bool(max(l2_norm(grid, ru), l2_norm(grid, rv)) <= opts.pde_tol),
            "constraints": bool(abs(G[0]) + abs(G[1]) <= 1e-8 * (A[0] + A[1])),
            "inside_ball": bool(distance <= delta),
            "level_below_d_tilde": bool(res.energy <= dt["value"] + 1e-12 * abs(dt["value"])),
        }
    )
    certs.update(ident)
    return SystemSolution(
        u=u,
        v=v,
        params=p,
        regime="negative",
        level=res.energy,
        constraint_residuals=(abs(G[0]) / A[0], abs(G[1]) / A[1]),
        pde_residuals=pde,
        det_j=float(np.linalg.det(matrix_j(grid, p, u, v))),
        iterations=res.iterations,
        gradient_norm=res.gradient_norm,
        certificates=certs,
        diagnostics={
            "e1_plus_e2": e_sum,
            "d_tilde": dt["value"],
            "d_tilde_argmax": list(dt["argmax"]),
            "d_tilde_box": [dt["t0"], dt["s0"]],
            "d_tilde_gap": dt["value"] - e_sum,
            "delta": delta,
            "h1_distance_to_seeds": distance,
            "start_level": energy_x(x0),
            "identity_max_rel_error": ident_err,
        },
    )
