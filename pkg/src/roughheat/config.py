"""Experiment configuration: an INI file with sections grid, noise, norms,
solver and experiment."""

from __future__ import annotations

import configparser
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .grid import GridSpec
from .noise import CovarianceSpec
from .norms import NormConfig, default_ladder
from .solver import LinearSolveConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec = field(default_factory=lambda: GridSpec(64, 64))
    noise: CovarianceSpec = field(default_factory=lambda: CovarianceSpec.white_in_time(cutoff=15))
    norms: NormConfig = field(default_factory=NormConfig)
    solver: LinearSolveConfig = field(default_factory=LinearSolveConfig)
    seeds: tuple = (0,)
    eps_ladder: tuple = tuple(2.0**-j for j in range(4, 10))
    mollifier: str = "psi"
    boundary_amplitude: float = 1e-2
    refine: tuple = (128, 256)
    # mollification scale for solves; the eps ladder is far too coarse to resolve the forcing
    eps_solve: float = 2.0**-24

    def echo(self) -> dict:
        d = {
            "grid": asdict(self.grid),
            "noise": asdict(self.noise),
            "norms": {**asdict(self.norms), "dyadic_T": len(self.norms.dyadic_T) - 1},
            "solver": asdict(self.solver),
            "seeds": list(self.seeds),
            "eps_ladder": list(self.eps_ladder),
            "mollifier": self.mollifier,
            "boundary_amplitude": self.boundary_amplitude,
            "refine": list(self.refine),
            "eps_solve": self.eps_solve,
        }
        return d

    def with_seeds(self, seeds) -> "RunConfig":
        return replace(self, seeds=tuple(int(s) for s in seeds))


def _floats(text: str) -> tuple:
    return tuple(float(eval_pow(t)) for t in text.replace(",", " ").split())


def eval_pow(token: str) -> float:
    """Parse ``0.5``, ``1e-3`` or ``2^-9``."""
    token = token.strip()
    if "^" in token:
        b, e = token.split("^", 1)
        return float(b) ** float(e)
    return float(token)


def config_from_echo(d: dict) -> RunConfig:
    """Rebuild a RunConfig from :meth:`RunConfig.echo` output."""
    try:
        n = dict(d["norms"])
        n["dyadic_T"] = default_ladder(int(n["dyadic_T"]))
        return RunConfig(
            grid=GridSpec(**d["grid"]),
            noise=CovarianceSpec(**d["noise"]),
            norms=NormConfig(**n),
            solver=LinearSolveConfig(**d["solver"]),
            seeds=tuple(int(x) for x in d["seeds"]),
            eps_ladder=tuple(float(x) for x in d["eps_ladder"]),
            mollifier=d["mollifier"],
            boundary_amplitude=float(d["boundary_amplitude"]),
            refine=tuple(int(x) for x in d["refine"]),
            eps_solve=float(d["eps_solve"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config echo: {exc}") from exc


def load_config(path: str | Path | None) -> RunConfig:
    """Read an INI config (missing keys keep their defaults) or a run
    manifest JSON, whose ``config`` entry is replayed exactly."""
    cfg = RunConfig()
    if path is None:
        return cfg
    if str(path).endswith(".json"):
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
        return config_from_echo(d.get("config", d))
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    unknown = set(cp.sections()) - {"grid", "noise", "norms", "solver", "experiment"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    try:
        g = cp["grid"] if cp.has_section("grid") else {}
        grid = GridSpec(int(g.get("n1", cfg.grid.n1)), int(g.get("n2", cfg.grid.n2)))

        n = cp["noise"] if cp.has_section("noise") else {}
        ap = float(n.get("alpha_prime", cfg.noise.alpha_prime))
        amp = float(n.get("amplitude", cfg.noise.amplitude))
        cut = int(n.get("cutoff", min(cfg.noise.cutoff, grid.n1 // 4 - 1)))
        if "lambda1" in n or "lambda2" in n:
            l2 = float(n.get("lambda2", 0.0))
            l1 = float(n.get("lambda1", 2 * ap - 1 - l2))
            noise = CovarianceSpec(l1, l2, ap, amp, cut)
        else:
            noise = CovarianceSpec.white_in_time(ap, amp, cut)

        m = cp["norms"] if cp.has_section("norms") else {}
        J = int(m.get("J", len(cfg.norms.dyadic_T) - 1))
        norms = NormConfig(alpha=float(m.get("alpha", cfg.norms.alpha)), dyadic_T=default_ladder(J),
                           pair_budget=int(m.get("pair_budget", cfg.norms.pair_budget)),
                           seed=int(m.get("seed", cfg.norms.seed)), method=m.get("method", "auto"))

        s = cp["solver"] if cp.has_section("solver") else {}
        tau = s.get("tau")
        solver = LinearSolveConfig(
            tau=eval_pow(tau) if tau not in (None, "", "grid") else None,
            picard_tol=float(s.get("picard_tol", cfg.solver.picard_tol)),
            picard_max=int(s.get("picard_max", cfg.solver.picard_max)),
            frozen_a0=s.get("frozen_a0", cfg.solver.frozen_a0),
            lam=float(s.get("lambda", cfg.solver.lam)),
            a_cap=float(s.get("a_cap", cfg.solver.a_cap)),
            outer_tol=float(s.get("outer_tol", cfg.solver.outer_tol)),
            outer_max=int(s.get("outer_max", cfg.solver.outer_max)),
        )

        e = cp["experiment"] if cp.has_section("experiment") else {}
        seeds = tuple(int(x) for x in e.get("seeds", "0").replace(",", " ").split())
        eps = _floats(e["eps_ladder"]) if "eps_ladder" in e else cfg.eps_ladder
        refine = tuple(int(x) for x in e.get("refine", "128 256").replace(",", " ").split())
        eps_solve = eval_pow(e["eps_solve"]) if "eps_solve" in e else cfg.eps_solve
        return RunConfig(grid, noise, norms, solver, seeds, eps, e.get("mollifier", "psi"),
                         float(e.get("boundary_amplitude", cfg.boundary_amplitude)), refine, eps_solve)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
