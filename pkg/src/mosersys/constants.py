"""Threshold constants, the Moser-type constant C(gamma) and the d_{4pi} chain.

Every quantity here is either a closed formula or an integral of computed
ground states.  Whenever a formula needs ``d_{4pi}`` (which has no known
closed value) the caller states which value was used and whether it is an
upper or a lower estimate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateOverlapError, ParameterError
from .grid import Grid, best_sobolev_s4, grad_norm, integrate, principal_eigenpair
from .nonlin import ModelParams, _expm1
from .options import SolverOptions
from .scalar import GroundState, solve_scalar_ground_state

FOUR_PI = 4.0 * math.pi

# Concentration levels of the Moser sequence: L = 2^0, ..., 2^10.
MOSER_LEVELS = tuple(2.0**k for k in range(11))

# Value a divergent trial sequence must exceed, in units of |Omega|.
MOSER_WITNESS_CAP = 1e6


def c_gamma(gamma: float) -> float:
    """``4 pi max{e^{g/4pi} - 1, 16 pi (4pi + g)/(4pi - g)^2 e^{2g/(4pi - g)}}``."""
    gamma = float(gamma)
    if not 0.0 < gamma < FOUR_PI:
        raise ParameterError(f"C(gamma) needs 0 < gamma < 4 pi, got {gamma!r}")
    return max(c_gamma_branches(gamma))


def c_gamma_branches(gamma: float) -> tuple[float, float]:
    """The two arguments of the max in :func:`c_gamma`, each times ``4 pi``.

    The second one exceeds the double range just below ``4 pi``; it is then
    returned as ``inf``.
    """
    first = math.expm1(gamma / FOUR_PI)
    gap = FOUR_PI - gamma
    try:
        second = 16 * math.pi * (FOUR_PI + gamma) / gap**2 * math.exp(2 * gamma / gap)
    except OverflowError:
        second = math.inf
    return FOUR_PI * first, FOUR_PI * second


def c_gamma_table(gammas=None) -> list[tuple[float, float]]:
    if gammas is None:
        gammas = [k * math.pi / 4 for k in range(1, 16)]
    return [(float(g), c_gamma(g)) for g in gammas]


def check_lemma28(grid: Grid, u: np.ndarray, gamma: float, rel: float = 1e-10):
    """``int u^2 (e^{gamma u^2} - 1) <= C(gamma) |u|_4^4`` for ``|grad u|_2 <= 1``.

    Returns ``(lhs, rhs, holds)``.
    """
    grid.check(u)
    if grad_norm(grid, u) > 1.0 + 1e-12:
        raise ParameterError("check_lemma28 needs |grad u|_2 <= 1; rescale the field first")
    uu = u * u
    lhs = integrate(grid, uu * _expm1(gamma * uu))
    rhs = c_gamma(gamma) * integrate(grid, uu * uu)
    return lhs, rhs, bool(lhs <= rhs * (1 + rel))


def _lift(lam: float, lambda1: float) -> float:
    """``(lam + Lambda_1) / Lambda_1``."""
    return (lam + lambda1) / lambda1


def beta_thresholds(
    grid: Grid,
    gs1: GroundState,
    gs2: GroundState,
    p: ModelParams,
    s4: float | None = None,
    lambda1: float | None = None,
) -> dict:
    """The six coupling thresholds and ``beta_bar0`` from two scalar ground states."""
    grid.check(gs1.u, gs2.u)
    if lambda1 is None:
        lambda1, _ = principal_eigenpair(grid)
    if s4 is None:
        s4, _ = best_sobolev_s4(grid)
    u1, u2 = gs1.u, gs2.u
    overlap = integrate(grid, u1 * u1 * u2 * u2)
    if not overlap > 0:
        raise DegenerateOverlapError("int u1^2 u2^2 vanishes; the ground states do not overlap")
    m1 = p.mu1 * integrate(grid, u1 * u1 * _expm1(u1 * u1))
    m2 = p.mu2 * integrate(grid, u2 * u2 * _expm1(u2 * u2))
    e1, e2 = gs1.energy, gs2.energy
    # same product order as the overlap so that u1 = u2 gives beta1 = beta5 exactly
    b5 = m1 / integrate(grid, u1 * u1 * u1 * u1)
    b6 = m2 / integrate(grid, u2 * u2 * u2 * u2)
    out = {
        "beta1": m1 / overlap,
        "beta2": m2 / overlap,
        "beta3": s4 * min(0.5, _lift(p.lam1, lambda1) / 2) * math.sqrt(p.mu2 / (e1 + e2)),
        "beta4": s4 * min(0.5, _lift(p.lam2, lambda1) / 2) * math.sqrt(p.mu1 / (e1 + e2)),
        "beta5": b5,
        "beta6": b6,
    }
    m = min(e1, e2)
    out["beta_bar0"] = 4 * max(b5 * (e1 / m), b6 * (e2 / m))
    out["beta_star"] = min(out["beta1"], out["beta2"], out["beta3"], out["beta4"])
    out["small_beta_upper"] = min(p.sqrt_mu, out["beta_star"])
    return out


def beta_star_terms(p: ModelParams, lambda1: float, d4pi: float) -> list[float]:
    """The seven terms whose minimum bounds ``min(beta1, ..., beta4)`` from below."""
    if not (d4pi > 0 and lambda1 > 0):
        raise ParameterError("d4pi and Lambda_1 must be positive")
    if p.lam1 <= -lambda1 or p.lam2 <= -lambda1:
        raise ParameterError("need lam_i > -Lambda_1")
    l1, l2 = _lift(p.lam1, lambda1), _lift(p.lam2, lambda1)
    m = p.mu1 * p.mu2
    k = FOUR_PI - 1
    tail = math.exp(-1 / 3) / 48
    return [
        math.sqrt(m / 32),
        math.sqrt(m / 32 * l1),
        tail * math.sqrt(lambda1 * p.mu2 / (math.pi * d4pi) * k) * min(1.0, l1),
        math.sqrt(m / 32 * l2),
        tail * math.sqrt(lambda1 * p.mu1 / (math.pi * d4pi) * k) * min(1.0, l2),
        math.sqrt(k * lambda1 * p.mu2 / (32 * math.pi * d4pi)) * min(1.0, l1),
        math.sqrt(k * lambda1 * p.mu1 / (32 * math.pi * d4pi)) * min(1.0, l2),
    ]


def beta_star_lower_bound(p: ModelParams, lambda1: float, d4pi: float) -> float:
    """The seven-term minimum at the supplied ``d4pi``.

    It bounds ``beta*`` from below only when ``d4pi`` is an upper estimate
    of the true constant; with a lower estimate it is merely the formula
    value.
    """
    return min(beta_star_terms(p, lambda1, d4pi))


def energy_band_bound(lam: float, mu: float, lambda1: float, s4: float) -> float:
    """A priori lower bound for the scalar ground-state level."""
    lift = _lift(lam, lambda1)
    return min(
        math.pi / 4,
        math.pi / 4 * lift,
        math.exp(-2 / 3) / (36 * mu) * (min(0.5, lift / 2) * s4) ** 2,
    )


def d4pi_from_sobolev(lambda1: float, s4: float) -> float:
    """``(4 pi - 1) Lambda_1 / (2 S_4^2)``, a lower bound for ``d_{4pi}``."""
    return (FOUR_PI - 1) * lambda1 / (2 * s4 * s4)


# ---------------------------------------------------------------------------
# radial trial profiles


def _panels(length: float, n_nodes: int, panel: float = 1.0):
    """Composite Gauss-Legendre nodes and weights on ``[0, length]``."""
    k = max(1, math.ceil(length / panel))
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.linspace(0.0, length, k + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _trial_value(R: float, L: float, nodes: np.ndarray, weights: np.ndarray) -> float:
    """``int (e^{4 pi u^2} - 1)`` for ``u = a min(1, log(R/rho)/L)_+``.

    ``a`` is fixed by ``|grad u|^2 + |u|^2 = 1``.  The annulus is integrated in
    ``x = log(R/rho)`` with the supplied quadrature rule on ``[0, L]``.
    """
    r2 = R * R * math.exp(-2 * L)
    tail = 0.25 - math.exp(-2 * L) * (2 * L * L + 2 * L + 1) / 4
    a2 = 1.0 / (2 * math.pi / L + math.pi * r2 + 2 * math.pi * R * R / (L * L) * tail)
    expo = FOUR_PI * a2 * (nodes / L) ** 2
    if FOUR_PI * a2 > 700:
        return math.inf
    annulus = 2 * math.pi * R * R * float(np.sum(weights * np.expm1(expo) * np.exp(-2 * nodes)))
    return math.pi * r2 * math.expm1(FOUR_PI * a2) + annulus


def d4pi_trial_lower_bound(profile_grid_n: int = 512, family_level: int = 5) -> float:
    """Largest ``int (e^{4 pi u^2} - 1)`` over a family of feasible radial bumps.

    The family is ``u = a min(1, log(R/rho)/L)_+`` with support radius ``R``
    and log-width ``L`` on log-spaced lattices of ``2^family_level + 1``
    points over fixed ranges, so lattices of consecutive levels are nested
    and the result is non-decreasing in ``family_level``.  Each trial is
    feasible by construction; ``profile_grid_n`` Gauss-Legendre nodes per
    unit of ``L`` integrate the annulus.
    """
    if profile_grid_n < 256:
        raise ParameterError("profile_grid_n must be at least 256")
    if family_level < 0:
        raise ParameterError("family_level must be non-negative")
    m = 2**family_level + 1
    radii = np.logspace(-1.0, 3.0, m)
    widths = np.logspace(-1.5, 1.0, m)
    best = 0.0
    for L in widths:
        nodes, weights = _panels(float(L), profile_grid_n)
        for R in radii:
            val = _trial_value(float(R), float(L), nodes, weights)
            if math.isfinite(val):
                best = max(best, val)
    return best


def _moser_radial(alpha: float, L: float) -> float:
    """``int_{B_1} e^{alpha m_L^2}`` for the unit-gradient Moser function ``m_L``.

    ``m_L = sqrt(L / 2pi)`` on ``|x| < e^{-L}`` and
    ``log(1/|x|) / sqrt(2 pi L)`` on the annulus.
    """
    inner_log = math.log(math.pi) + (alpha / (2 * math.pi) - 2) * L
    nodes, weights = _panels(L, 32)
    f = alpha * nodes**2 / (2 * math.pi * L) - 2 * nodes
    top = float(f.max())
    ann_log = math.log(2 * math.pi) + top + math.log(float(np.sum(weights * np.exp(f - top))))
    hi = max(inner_log, ann_log)
    total_log = hi + math.log(math.exp(inner_log - hi) + math.exp(ann_log - hi))
    return math.exp(total_log) if total_log < 709 else math.inf


def _inscribed(grid: Grid):
    if grid.shape == "unit-square":
        return (0.5, 0.5), 0.5
    return (0.0, 0.0), 1.0


def moser_trials(grid: Grid, alpha: float, trials: int = len(MOSER_LEVELS)) -> dict:
    """Evaluate ``int_Omega e^{alpha u^2}`` along the Moser sequence.

    The sequence lives on the largest inscribed disk; outside it ``u = 0``.
    Radial values are exact up to quadrature.  Grid values (``u`` sampled
    and rescaled to unit discrete gradient norm) are kept only while the
    plateau radius spans at least two mesh widths.
    """
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    if not 1 <= trials <= len(MOSER_LEVELS):
        raise ParameterError(f"trials must lie in [1, {len(MOSER_LEVELS)}]")
    (cx, cy), R = _inscribed(grid)
    outside = grid.area - math.pi * R * R
    rho = np.hypot(grid.x - cx, grid.y - cy) / R
    radial, sampled = [], []
    for L in MOSER_LEVELS[:trials]:
        radial.append(outside + R * R * _moser_radial(alpha, L))
        if R * math.exp(-L) >= 2 * grid.h:
            with np.errstate(divide="ignore"):
                m = np.where(rho < math.exp(-L), L, -np.log(np.maximum(rho, 1e-300)))
            m = np.where(rho < 1.0, m, 0.0) / math.sqrt(2 * math.pi * L)
            m = m / grad_norm(grid, m)
            z = alpha * m * m
            sampled.append(integrate(grid, np.exp(z)) if z.max() < 700 else math.inf)
    return {"levels": list(MOSER_LEVELS[:trials]), "radial": radial, "grid": sampled}


def moser_sup_check(grid: Grid, alpha: float, trials: int = len(MOSER_LEVELS)) -> tuple[float, bool]:
    """Moser-sequence estimate of ``c(alpha) |Omega|``.

    For ``alpha <= 4 pi`` returns the largest trial value and whether every
    trial was finite.  For ``alpha > 4 pi`` returns the largest trial value
    and whether it exceeded ``1e6 |Omega|`` (divergence witness; the
    grid-sampled values cannot reach the witness level because the plateau
    radius hits the mesh width first, so the radial values decide).
    """
    res = moser_trials(grid, alpha, trials)
    values = res["radial"] + res["grid"]
    sup = max(values)
    if alpha <= FOUR_PI:
        return sup, all(math.isfinite(v) for v in values)
    return sup, bool(max(res["radial"]) > MOSER_WITNESS_CAP * grid.area)


# ---------------------------------------------------------------------------
# the full ledger


@dataclass
class ThresholdReport:
    lambda1_domain: float
    s4: float
    e1: float
    e2: float
    beta1: float
    beta2: float
    beta3: float
    beta4: float
    beta5: float
    beta6: float
    beta_bar0: float
    beta_star_lb: float
    d4pi_config: float | None
    d4pi_trial_lb: float
    d4pi_sobolev_lb: float
    d4pi_used: float
    d4pi_used_source: str
    c_gamma_table: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    @property
    def conforming(self) -> bool:
        return all(self.checks.values())

    def as_dict(self) -> dict:
        out = asdict(self)
        out["c_gamma_table"] = [list(row) for row in self.c_gamma_table]
        out["beta_star_lb_certified"] = self.d4pi_used_source == "config"
        out["conforming"] = self.conforming
        return out


def threshold_report(
    grid: Grid,
    p: ModelParams,
    opts: SolverOptions | None = None,
    d4pi: float | None = None,
    profile_grid_n: int = 512,
    seeds=None,
) -> ThresholdReport:
    """Compute the whole threshold ledger on ``grid``.

    ``d4pi`` is an optional configured upper estimate of ``d_{4pi}``.  Without
    it the larger of the two computed lower estimates is used and the
    ``beta*`` value is only a formula value.
    """
    opts = opts or SolverOptions()
    lambda1, _ = principal_eigenpair(grid)
    p.validate(lambda1)
    s4, _ = best_sobolev_s4(grid)
    if seeds is None:
        seeds = (
            solve_scalar_ground_state(grid, p.lam1, p.mu1, opts),
            solve_scalar_ground_state(grid, p.lam2, p.mu2, opts),
        )
    gs1, gs2 = seeds
    th = beta_thresholds(grid, gs1, gs2, p, s4=s4, lambda1=lambda1)
    trial_lb = d4pi_trial_lower_bound(profile_grid_n)
    sob_lb = d4pi_from_sobolev(lambda1, s4)
    if d4pi is not None:
        if not d4pi > 0:
            raise ParameterError("configured d4pi must be positive")
        used, source = float(d4pi), "config"
    else:
        used, source = max(trial_lb, sob_lb), "computed-lower-bound"
    bstar = beta_star_lower_bound(p, lambda1, used)
    e1, e2 = gs1.energy, gs2.energy
    checks = {
        "betas_positive_finite": all(
            math.isfinite(th[k]) and th[k] > 0 for k in ("beta1", "beta2", "beta3", "beta4", "beta5", "beta6", "beta_bar0")
        ),
        "e1_in_band": 0 < e1 < 2 * math.pi,
        "e2_in_band": 0 < e2 < 2 * math.pi,
        "e1_lower_bound": e1 >= energy_band_bound(p.lam1, p.mu1, lambda1, s4) * 0.98,
        "e2_lower_bound": e2 >= energy_band_bound(p.lam2, p.mu2, lambda1, s4) * 0.98,
        "beta1_overlap_bound": th["beta1"] > math.sqrt(p.mu1 * p.mu2 * e1 / (4 * e2)),
        "beta2_overlap_bound": th["beta2"] > math.sqrt(p.mu1 * p.mu2 * e2 / (4 * e1)),
        "d4pi_positive": trial_lb > 0,
    }
    if source == "config":
        checks["beta_star_below_betas"] = th["beta_star"] > bstar
    return ThresholdReport(
        lambda1_domain=lambda1,
        s4=s4,
        e1=e1,
        e2=e2,
        beta1=th["beta1"],
        beta2=th["beta2"],
        beta3=th["beta3"],
        beta4=th["beta4"],
        beta5=th["beta5"],
        beta6=th["beta6"],
        beta_bar0=th["beta_bar0"],
        beta_star_lb=bstar,
        d4pi_config=d4pi,
        d4pi_trial_lb=trial_lb,
        d4pi_sobolev_lb=sob_lb,
        d4pi_used=used,
        d4pi_used_source=source,
        c_gamma_table=c_gamma_table(),
        checks={k: bool(v) for k, v in checks.items()},
    )


def random_unit_fields(grid: Grid, count: int, seed: int) -> list[np.ndarray]:
    """Smooth random fields with ``|grad u|_2 = 1``, alternating sign patterns."""
    from .grid import shifted_solve

    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        u = shifted_solve(grid, rng.standard_normal(grid.size))
        if k % 2:
            u = np.abs(u)
        out.append(u / grad_norm(grid, u))
    return out


def lemma28_suite(
    grid: Grid, count: int = 50, gammas=(1.0, math.pi, 2 * math.pi, 3.5 * math.pi), seed: int = 42
) -> dict:
    """Check ``int u^2 (e^{gamma u^2} - 1) <= C(gamma) |u|_4^4`` on random unit fields."""
    fields = random_unit_fields(grid, count, seed)
    violations, worst = 0, 0.0
    for u in fields:
        for g in gammas:
            lhs, rhs, ok = check_lemma28(grid, u, g)
            violations += not ok
            worst = max(worst, lhs / rhs if rhs > 0 else 0.0)
    return {"fields": count, "gammas": list(gammas), "violations": violations, "max_ratio": worst}
