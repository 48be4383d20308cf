"""Preconditioned descent on a Nehari-type set.

Every ground-state solver in the package is an instance of the same loop:
take the H^1 (Riesz) gradient ``g``, step ``x - alpha g``, map the trial point
back to the constraint set, and backtrack on the energy.

The trial step is the Barzilai-Borwein length ``<s,s>/<s,y>`` measured in the
same metric (``s`` and ``y`` are the last changes of ``x`` and ``g``), clamped
to ``[1e-3, 1e3]``.  Plain unit steps stall on the soft modes of ground
states, which contract at a rate close to one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonlinOverflowError, ProjectionError


@dataclass
class DescentResult:
    x: np.ndarray
    energy: float
    iterations: int
    gradient_norm: float
    converged: bool


def descend(
    energy: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    project: Callable[[np.ndarray], np.ndarray],
    metric: Callable[[np.ndarray, np.ndarray], float],
    x0: np.ndarray,
    tol: float,
    max_iter: int,
    callback: Callable[[np.ndarray, int], None] | None = None,
    armijo: float = 1e-4,
    min_step: float = 1e-10,
    max_step: float = 1e3,
    history: list | None = None,
) -> DescentResult:
    """Run the projected descent from ``x0`` (already on the constraint set).

    Stops when ``|g|_A / |x|_A <= tol``.  Energy comparisons allow a rounding
    slack of ``1e-14 |E|`` so the loop keeps moving once the decrease falls
    below machine resolution.
    """
    x = x0
    E = energy(x)
    alpha = 1.0
    gn = np.inf
    x_prev = g_prev = None
    for it in range(max_iter + 1):
        g = gradient(x)
        gg = metric(g, g)
        gn = float(np.sqrt(max(gg, 0.0) / metric(x, x)))
        if gn <= tol:
            return DescentResult(x, E, it, gn, True)
        if it == max_iter:
            break
        alpha = 1.0
        if g_prev is not None:
            s_k = x - x_prev
            sy = metric(s_k, g - g_prev)
            if sy > 0:
                alpha = min(max_step, max(1e-3, metric(s_k, s_k) / sy))
        slack = 1e-14 * max(abs(E), 1.0)
        while True:
            try:
                trial = project(x - alpha * g)
                E_trial = energy(trial)
                ok = np.isfinite(E_trial) and E_trial <= E - armijo * alpha * gg + slack
            except (NonlinOverflowError, ProjectionError, FloatingPointError):
                ok = False
            if ok:
                break
            alpha *= 0.5
            if alpha < min_step:
                return DescentResult(x, E, it, gn, False)
        x_prev, g_prev = x, g
        x, E = trial, E_trial
        if history is not None:
            history.append((it, alpha, gn, E))
        if callback is not None:
            callback(x, it + 1)
    return DescentResult(x, E, max_iter, gn, False)
