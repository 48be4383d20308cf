"""Configuration-driven runner: ``mosersys run --config run.ini [--out DIR] [--verbose]``.

The INI file has the sections ``[domain]``, ``[params]``, ``[run]``,
``[solver]``, ``[constants]`` and ``[inequalities]``; see ``README.md``.
Exit status: 0 all certificates pass, 2 invalid configuration or
parameters, 3 a solver gave up, 4 a certificate failed.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import io
from .constants import (
    beta_thresholds,
    lemma28_suite,
    moser_sup_check,
    threshold_report,
)
from .errors import MoserSysError, NonlinOverflowError, ParameterError, SolverError
from .grid import BOUNDARIES, SHAPES, build_domain, grad_norm, principal_eigenpair
from .nonlin import ModelParams, inequality_suite
from .options import SolverOptions
from .scalar import solve_scalar_ground_state
from .system import solve_large_beta, solve_negative_beta, solve_small_beta

log = logging.getLogger("mosersys")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CERT = 0, 2, 3, 4

REGIMES = ("scalar", "small-beta", "large-beta", "negative-beta", "constants", "inequalities", "sweep")
SWEEP_REGIMES = ("small-beta", "large-beta", "negative-beta")
BETA_UNITS = ("absolute", "beta_bar0", "small_beta_max", "sqrt_mu")

SWEEP_COLUMNS = [
    "beta",
    "level",
    "grad_norm_u",
    "grad_norm_v",
    "cert_level_ordering",
    "cert_det_j",
    "iters",
    "cert_all",
    "constraint_residual",
    "pde_residual",
    "h1_distance_to_seeds",
]


class ConfigError(MoserSysError, ValueError):
    pass


@dataclass
class RunConfig:
    shape: str = "unit-square"
    n: int = 63
    boundary: str | None = None
    lam1: float = 0.0
    lam2: float = 0.0
    mu1: float = 1.0
    mu2: float = 1.0
    beta: float = 0.0
    regime: str = "scalar"
    sweep_regime: str = "large-beta"
    beta_list: list = field(default_factory=list)
    beta_units: str = "absolute"
    workers: int = 1
    solver: SolverOptions = field(default_factory=SolverOptions)
    out_dir: str = "mosersys-out"
    d4pi: float | None = None
    profile_grid_n: int = 512
    samples: int = 100_000
    fields: int = 50

    def validate(self) -> None:
        if self.shape not in SHAPES:
            raise ConfigError(f"shape must be one of {SHAPES}")
        if self.boundary is not None and self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}")
        if self.n < 3:
            raise ConfigError("n must be >= 3")
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}")
        if self.sweep_regime not in SWEEP_REGIMES:
            raise ConfigError(f"sweep_regime must be one of {SWEEP_REGIMES}")
        if self.beta_units not in BETA_UNITS:
            raise ConfigError(f"beta_units must be one of {BETA_UNITS}")
        if self.regime == "sweep" and not self.beta_list:
            raise ConfigError("a sweep needs a non-empty beta_list")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.d4pi is not None and not self.d4pi > 0:
            raise ConfigError("d4pi must be positive")
        if self.samples < 1 or self.fields < 1:
            raise ConfigError("samples and fields must be positive")
        if self.profile_grid_n < 256:
            raise ConfigError("profile_grid_n must be >= 256")

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.lam1, self.lam2, self.mu1, self.mu2, self.beta)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["solver"] = self.solver.as_dict()
        return out


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def load_config(path) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        if not cp.read(path):
            raise ConfigError(f"cannot read config file {path}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    known = {
        "domain": {"shape", "n", "boundary"},
        "params": {"lam1", "lam2", "mu1", "mu2", "beta"},
        "run": {"regime", "sweep_regime", "beta_list", "beta_units", "workers", "out_dir"},
        "solver": set(SolverOptions.__dataclass_fields__),
        "constants": {"d4pi", "profile_grid_n"},
        "inequalities": {"samples", "fields"},
    }
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(cp[sec]) - known[sec]
        if extra:
            raise ConfigError(f"unknown keys in [{sec}]: {sorted(extra)}")
    try:
        d = cp["domain"] if cp.has_section("domain") else {}
        pr = cp["params"] if cp.has_section("params") else {}
        r = cp["run"] if cp.has_section("run") else {}
        c = cp["constants"] if cp.has_section("constants") else {}
        q = cp["inequalities"] if cp.has_section("inequalities") else {}
        solver = {}
        if cp.has_section("solver"):
            for key, val in cp["solver"].items():
                if key in ("max_iter", "restarts", "seed"):
                    solver[key] = int(val)
                elif key == "delta":
                    solver[key] = None if val.strip().lower() in ("", "none") else float(val)
                else:
                    solver[key] = float(val)
        cfg = RunConfig(
            shape=d.get("shape", "unit-square"),
            n=int(d.get("n", 63)),
            boundary=d.get("boundary") or None,
            lam1=float(pr.get("lam1", 0.0)),
            lam2=float(pr.get("lam2", 0.0)),
            mu1=float(pr.get("mu1", 1.0)),
            mu2=float(pr.get("mu2", 1.0)),
            beta=float(pr.get("beta", 0.0)),
            regime=r.get("regime", "scalar"),
            sweep_regime=r.get("sweep_regime", "large-beta"),
            beta_list=_floats(r.get("beta_list", "")),
            beta_units=r.get("beta_units", "absolute"),
            workers=int(r.get("workers", 1)),
            out_dir=r.get("out_dir", "mosersys-out"),
            solver=SolverOptions(**solver),
            d4pi=float(c["d4pi"]) if c.get("d4pi") else None,
            profile_grid_n=int(c.get("profile_grid_n", 512)),
            samples=int(q.get("samples", 100_000)),
            fields=int(q.get("fields", 50)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------


class _Run:
    """Collects written files and certificates for the manifest."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.files: list[Path] = []
        self.certs: dict[str, bool] = {}
        self.report: dict = {}

    def field(self, name, grid, u):
        self.files += io.write_field(self.out / f"{name}.csv", grid, u)

    def rows(self, name, header, rows):
        self.files.append(io.write_rows(self.out / name, header, rows))

    def certify(self, prefix, certs: dict):
        for k, v in certs.items():
            self.certs[f"{prefix}{k}"] = bool(v)


def _seeds(grid, p: ModelParams, opts):
    gs1 = solve_scalar_ground_state(grid, p.lam1, p.mu1, opts)
    if (p.lam2, p.mu2) == (p.lam1, p.mu1):
        return gs1, gs1
    return gs1, solve_scalar_ground_state(grid, p.lam2, p.mu2, opts)


def _unit(cfg: RunConfig, th: dict | None, p: ModelParams) -> float:
    if cfg.beta_units == "absolute":
        return 1.0
    if cfg.beta_units == "sqrt_mu":
        return p.sqrt_mu
    if th is None:
        raise ConfigError(f"beta_units = {cfg.beta_units} needs the threshold ledger")
    if cfg.beta_units == "beta_bar0":
        return th["beta_bar0"]
    return min(p.sqrt_mu, th["beta1"], th["beta2"])


def _solve(regime, grid, p, seeds, opts, th):
    if regime == "small-beta":
        return solve_small_beta(grid, p, seeds, opts)
    if regime == "large-beta":
        return solve_large_beta(grid, p, opts, seeds, th["beta_bar0"], (th["beta5"], th["beta6"]))
    return solve_negative_beta(grid, p, seeds, opts)


_ORDERING = {
    "small-positive": "level_below_sum",
    "large-positive": "level_below_min",
    "negative": "level_below_d_tilde",
}


def _sweep_row(grid, sol) -> dict:
    d = sol.diagnostics
    return {
        "level": sol.level,
        "grad_norm_u": grad_norm(grid, sol.u),
        "grad_norm_v": grad_norm(grid, sol.v),
        "cert_level_ordering": sol.certificates[_ORDERING[sol.regime]],
        "cert_det_j": sol.certificates.get("det_j_bound"),
        "iters": sol.iterations,
        "cert_all": sol.ok,
        "constraint_residual": max(sol.constraint_residuals),
        "pde_residual": max(sol.pde_residuals),
        "h1_distance_to_seeds": d.get("h1_distance_to_seeds"),
        "d_tilde_gap": d.get("d_tilde_gap"),
        "certificates": sol.certificates,
        "summary": sol.summary(),
    }


def _sweep_task(args):
    regime, grid, p, seeds, opts, th = args
    try:
        return {"beta": p.beta, **_sweep_row(grid, _solve(regime, grid, p, seeds, opts, th))}
    except (SolverError, NonlinOverflowError) as exc:
        return {"beta": p.beta, "error": f"{type(exc).__name__}: {exc}", "kind": "solver"}
    except ParameterError as exc:
        return {"beta": p.beta, "error": f"{type(exc).__name__}: {exc}", "kind": "config"}


def _trend_certificates(regime: str, rows: list[dict]) -> dict:
    ok = [r for r in rows if "error" not in r]
    if len(ok) < 2:
        return {}
    by_abs = sorted(ok, key=lambda r: abs(r["beta"]))
    certs = {}
    if regime == "large-beta":
        lv = [r["level"] for r in by_abs]
        certs["level_non_increasing"] = all(b <= a * (1 + 1e-12) for a, b in zip(lv, lv[1:]))
        gn = [r["grad_norm_u"] + r["grad_norm_v"] for r in by_abs]
        certs["grad_norms_decreasing"] = all(b < a for a, b in zip(gn, gn[1:]))
    else:
        dist = [r["h1_distance_to_seeds"] for r in by_abs]
        certs["distance_decreasing_towards_zero"] = all(a < b for a, b in zip(dist, dist[1:]))
    if regime == "negative-beta":
        slopes = [r["d_tilde_gap"] / abs(r["beta"]) for r in by_abs]
        certs["d_tilde_slope_stable"] = max(slopes) <= 1.2 * min(slopes) and min(slopes) > 0
    return certs


def _do_sweep(run: _Run, grid, p, seeds, opts, th):
    cfg = run.cfg
    unit = _unit(cfg, th, p)
    tasks = [(cfg.sweep_regime, grid, p.with_beta(b * unit), seeds, opts, th) for b in cfg.beta_list]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]
    table = []
    for r in rows:
        if "error" in r:
            table.append([r["beta"]] + [None] * (len(SWEEP_COLUMNS) - 1))
            run.certs[f"beta={io.fmt(r['beta'])}:solved"] = False
            continue
        table.append([r["beta"]] + [r[c] for c in SWEEP_COLUMNS[1:]])
        run.certify(f"beta={io.fmt(r['beta'])}:", r["certificates"])
    run.rows("sweep.csv", SWEEP_COLUMNS, table)
    run.certify("trend:", _trend_certificates(cfg.sweep_regime, rows))
    run.report["sweep"] = [
        {k: v for k, v in r.items() if k not in ("certificates",)} for r in rows
    ]
    kinds = {r.get("kind") for r in rows}
    if "config" in kinds:
        return EXIT_CONFIG
    if "solver" in kinds:
        return EXIT_SOLVER
    return EXIT_OK


def _execute(run: _Run) -> int:
    cfg = run.cfg
    opts = cfg.solver
    grid = build_domain(cfg.shape, cfg.n, cfg.boundary)
    lambda1, _ = principal_eigenpair(grid)
    p = cfg.params
    p.validate(lambda1)
    run.report["grid"] = io.grid_meta(grid)
    run.report["lambda1"] = lambda1
    log.info("grid %s n=%d, Lambda_1 = %.10g", grid.shape, grid.n, lambda1)

    if cfg.regime == "inequalities":
        pos = p if p.beta > 0 else p.with_beta(1.0)
        suite = inequality_suite(pos, cfg.samples, opts.seed)
        l28 = lemma28_suite(grid, cfg.fields, seed=opts.seed)
        moser = {}
        for a in (2.0, 4.0, 4.5):
            est, flag = moser_sup_check(grid, a * math.pi)
            moser[f"alpha={a}pi"] = {"estimate": est, "flag": flag}
        run.report.update({"pointwise": suite, "lemma28": l28, "moser": moser, "lemma22_beta": pos.beta})
        run.certify("", {k: suite[k] == 0 for k in suite if k != "samples"})
        run.certify("", {"lemma28": l28["violations"] == 0})
        run.certify("moser:", {k: v["flag"] for k, v in moser.items()})
        run.rows(
            "inequalities.csv",
            ["check", "samples", "violations"],
            [[k, suite["samples"], suite[k]] for k in suite if k != "samples"]
            + [["lemma28", l28["fields"] * len(l28["gammas"]), l28["violations"]]],
        )
        return EXIT_OK

    seeds = _seeds(grid, p, opts)
    gs1, gs2 = seeds
    run.report["seeds"] = [gs1.summary(), gs2.summary()]
    run.certify("seed1:", gs1.certificates)
    run.certify("seed2:", gs2.certificates)
    log.info("scalar levels E1 = %.12g, E2 = %.12g", gs1.energy, gs2.energy)

    if cfg.regime == "scalar":
        run.field("u1", grid, gs1.u)
        if gs2 is not gs1:
            run.field("u2", grid, gs2.u)
        return EXIT_OK

    if cfg.regime == "constants":
        rep = threshold_report(grid, p, opts, cfg.d4pi, cfg.profile_grid_n, seeds)
        run.report["thresholds"] = rep.as_dict()
        run.certify("", rep.checks)
        if (p.lam1, p.mu1) == (p.lam2, p.mu2):
            run.certify("", {
                "symmetric_beta1_equals_beta5": rep.beta1 == rep.beta5,
                "symmetric_beta2_equals_beta6": rep.beta2 == rep.beta6,
                "symmetric_beta_bar0_equals_4beta5": rep.beta_bar0 == 4 * rep.beta5,
            })
        run.files.append(io.write_c_gamma(run.out / "c_gamma.csv", rep.c_gamma_table))
        return EXIT_OK

    needs_th = cfg.beta_units in ("beta_bar0", "small_beta_max") or "large-beta" in (
        cfg.regime,
        cfg.sweep_regime if cfg.regime == "sweep" else None,
    )
    th = beta_thresholds(grid, gs1, gs2, p) if needs_th else None
    if th is not None:
        run.report["thresholds"] = th

    if cfg.regime == "sweep":
        return _do_sweep(run, grid, p, seeds, opts, th)

    q = p.with_beta(p.beta * _unit(cfg, th, p))
    sol = _solve(cfg.regime, grid, q, seeds, opts, th)
    log.info("%s level %.12g after %d iterations", sol.regime, sol.level, sol.iterations)
    run.report["solution"] = sol.summary()
    run.certify("", sol.certificates)
    run.field("u", grid, sol.u)
    run.field("v", grid, sol.v)
    return EXIT_OK


def run(cfg: RunConfig, verbose: bool = False) -> int:
    """Execute one configured run and write its artefacts and manifest."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    r = _Run(cfg, out)
    error = None
    try:
        code = _execute(r)
    except (ConfigError, ParameterError) as exc:
        code, error = EXIT_CONFIG, f"{type(exc).__name__}: {exc}"
    except (SolverError, NonlinOverflowError) as exc:
        code, error = EXIT_SOLVER, f"{type(exc).__name__}: {exc}"
    if code == EXIT_OK and not all(r.certs.values()):
        code = EXIT_CERT
    if error:
        log.error(error)
    r.report["certificates"] = r.certs
    r.files.insert(0, io.write_json(out / "report.json", r.report))
    manifest = {
        "regime": cfg.regime,
        "exit_code": code,
        "error": error,
        "config": cfg.as_dict(),
        "certificates": r.certs,
        "failed_certificates": sorted(k for k, v in r.certs.items() if not v),
        "files": [
            {"path": f.name, "sha256": io.sha256(f), "bytes": f.stat().st_size} for f in r.files
        ],
    }
    io.write_json(out / "manifest.json", manifest)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mosersys", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("run", help="run one configured experiment")
    pr.add_argument("--config", required=True, help="INI configuration file")
    pr.add_argument("--out", help="output directory (overrides [run] out_dir)")
    pr.add_argument("--verbose", action="store_true", help="log progress to stderr")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, ParameterError) as exc:
        print(f"mosersys: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    return run(cfg, verbose=args.verbose)


if __name__ == "__main__":
    sys.exit(main())
