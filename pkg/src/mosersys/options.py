from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class SolverOptions:
    """Knobs shared by the scalar and system solvers.

    ``tol`` bounds the relative H^1 norm of the preconditioned gradient;
    ``pde_tol`` bounds the discrete L2 norm of the strong-form residual.
    """

    tol: float = 1e-10
    max_iter: int = 3000
    restarts: int = 5
    seed: int = 42
    perturbation: float = 0.25
    pde_tol: float = 1e-6
    beta_negative_cap: float = 0.2
    delta: float | None = None
    collapse_threshold: float = 1e-8

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1 or self.restarts < 1:
            raise ValueError("max_iter and restarts must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)
