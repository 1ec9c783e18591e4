"""Command line runner: ``hlpush simulate | tabulate | crosscheck | she | validate``.

Parameters come from an optional JSON file (``--config``) and flags; flags
win. Every output file starts with ``#`` lines holding the resolved config
and the version string, so a run can be replayed from its output alone.
Output files land in ``$HLPUSH_OUTPUT_DIR`` (default: the working directory)
unless ``--out`` names a path.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__

OUTPUT_ENV = "HLPUSH_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def dumps(obj) -> str:
    # repr of a Python float already round-trips; 17 digits is the documented width
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def version_string() -> str:
    """``<version>+g<sha>[.dirty]`` when run from a git checkout, else the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# -- configuration ----------------------------------------------------------------

@dataclass
class ExperimentConfig:
    command: str
    b: float = 0.5
    rho: float = 1.0
    nu: float = 4.0
    t: float = 100.0
    L: int | None = None
    eps: float = 1e-2
    replicas: int = 100
    seed: int = 0
    out: str | None = None
    jobs: int | None = None
    regime: str | None = None
    distribution: str = "gue"
    grid: list | None = None
    lo: float = -5.0
    hi: float = 3.0
    step: float = 0.1
    kind: str | None = None
    x: int = 5
    zeta: float = -8.0
    moment: int = 1
    init: list | None = None
    final: list | None = None
    window: int = 50
    y_max: int | None = None
    only: list | None = None
    scale: float = 1.0
    tolerances: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"invalid value for '{name}': {msg}")

        need(0.0 < self.b < 1.0, "b", "must lie in (0, 1)")
        need(0.0 < self.rho <= 1.0, "rho", "must lie in (0, 1]")
        need(self.nu > 0.0, "nu", "must be > 0")
        need(self.t >= 0.0 and math.isfinite(self.t), "t", "must be finite and >= 0")
        need(self.replicas >= 0, "replicas", "must be >= 0")
        need(self.seed >= 0, "seed", "must be >= 0")
        need(0.0 < self.eps < 1.0, "eps", "must lie in (0, 1)")
        need(self.jobs is None or self.jobs >= 1, "jobs", "must be >= 1")
        need(self.L is None or self.L >= 1, "L", "must be >= 1")
        need(self.x >= 0, "x", "must be >= 0")
        need(1 <= self.moment <= 3, "moment", "must be 1, 2 or 3")
        need(self.window >= 1, "window", "must be >= 1")
        need(self.scale > 0.0, "scale", "must be > 0")
        need(self.regime in (None, "auto"), "regime", "only 'auto' is accepted")
        need(self.distribution in ("gue", "goe2", "gauss"), "distribution", "choose gue, goe2 or gauss")
        if self.command == "tabulate":
            if self.grid is not None:
                g = [float(v) for v in self.grid]
                need(len(g) > 0 and all(b > a for a, b in zip(g, g[1:])), "grid", "must be non-empty and sorted")
            else:
                need(self.step > 0 and self.hi >= self.lo, "step", "need step > 0 and hi >= lo")
        if self.command == "crosscheck":
            need(self.kind in ("qlaplace", "moment", "transition", "she-mean"), "kind",
                 "choose qlaplace, moment, transition or she-mean")
            if self.kind == "qlaplace":
                need(self.zeta < 0, "zeta", "must be negative")
            if self.kind == "transition":
                need(self.init is not None and self.final is not None, "init", "transition needs init and final")
                need(1 <= len(self.init) <= 3 and len(self.init) == len(self.final), "final",
                     "need 1 to 3 particles and matching lengths")
            if self.kind == "she-mean":
                need(self.replicas >= 2, "replicas", "she-mean needs at least 2")
        if self.command == "validate" and self.only is not None:
            need(all(1 <= int(k) <= 11 for k in self.only), "only", "criteria are numbered 1 to 11")
        return self

    def resolved(self) -> dict:
        return asdict(self)


_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - _FIELD_NAMES
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        data.update(loaded)
    for name in _FIELD_NAMES:
        v = getattr(args, name, None)
        if v is not None:
            data[name] = v
    data["command"] = args.command
    try:
        cfg = ExperimentConfig(**data)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    return cfg.validate()


def output_path(cfg: ExperimentConfig, default_name: str) -> Path:
    if cfg.out:
        return Path(cfg.out)
    return Path(os.environ.get(OUTPUT_ENV, ".")) / default_name


def _header(fh, cfg: ExperimentConfig) -> None:
    fh.write(f"# version: {version_string()}\n")
    fh.write(f"# config: {json.dumps(_jsonable(cfg.resolved()), sort_keys=True)}\n")


def _write_json(path: Path, cfg: ExperimentConfig, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"version": version_string(), "config": cfg.resolved(), **payload}
    path.write_text(dumps(doc) + "\n")


# -- simulate ------------------------------------------------------------------------

def _simulate_chunk(args):
    from .particle_system import StepBernoulli, simulate_heights

    seeds, b, rho, nu, t, L = args
    x = int(math.floor(nu * t))
    rows = []
    for s in seeds:
        rng = np.random.default_rng(s)
        ic = StepBernoulli(rho, max(L if L is not None else x, 1))
        out, cfg = simulate_heights(b, ic, [t], [x], rng)
        rows.append((int(s), t, int(out[0, 0]), bool(cfg.boundary_touched)))
    return rows


def _parallel(fn, chunks, jobs):
    if jobs == 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, chunks))


def cmd_simulate(cfg: ExperimentConfig) -> int:
    """Replica ``r`` uses the generator seeded by ``seed + r``, whatever the job count."""
    from .observables import classify_regime

    if cfg.regime == "auto":
        c = classify_regime(cfg.nu, cfg.b, cfg.rho)
        print(dumps({"regime": c.to_dict()}))
    jobs = cfg.jobs or os.cpu_count() or 1
    seeds = [cfg.seed + r for r in range(cfg.replicas)]
    size = max(1, math.ceil(len(seeds) / (4 * jobs))) if seeds else 1
    chunks = [(seeds[i:i + size], cfg.b, cfg.rho, cfg.nu, cfg.t, cfg.L) for i in range(0, len(seeds), size)]
    rows = [r for part in _parallel(_simulate_chunk, chunks, jobs) for r in part]
    path = output_path(cfg, "simulate.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        _header(fh, cfg)
        w = csv.writer(fh)
        w.writerow(["seed", "t", "N", "boundary_touched"])
        for s, t, n, touched in rows:
            w.writerow([s, fmt(float(t)), n, int(touched)])
    ns = np.array([r[2] for r in rows], dtype=float)
    summary = {
        "replicas": len(rows),
        "mean": float(ns.mean()) if ns.size else None,
        "variance": float(ns.var(ddof=1)) if ns.size > 1 else None,
        "boundary_touched": int(sum(r[3] for r in rows)),
        "output": str(path),
    }
    _write_json(path.with_suffix(".summary.json"), cfg, {"summary": summary})
    print(dumps({"summary": summary}))
    return 0


# -- tabulate --------------------------------------------------------------------

def cmd_tabulate(cfg: ExperimentConfig) -> int:
    from .fredholm.distributions import tabulate

    if cfg.grid is not None:
        grid = np.array([float(v) for v in cfg.grid])
    else:
        n = int(round((cfg.hi - cfg.lo) / cfg.step)) + 1
        grid = cfg.lo + cfg.step * np.arange(n)
    table = tabulate(cfg.distribution, grid)
    certified = bool(np.all(table.certified) and np.all(np.isfinite(table.F)))
    monotone = table.monotone
    path = output_path(cfg, f"tabulate_{cfg.distribution}.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        _header(fh, cfg)
        w = csv.writer(fh)
        w.writerow(["s", "F", "certified"])
        for s, f, ok in zip(table.s, table.F, table.certified):
            w.writerow([fmt(float(s)), fmt(float(f)), int(ok)])
    print(dumps({"distribution": cfg.distribution, "rows": int(grid.size), "all_certified": certified,
                 "monotone": monotone, "output": str(path)}))
    return 0 if certified and monotone else 1


# -- crosscheck ------------------------------------------------------------------

def _mc_compare(samples: np.ndarray, exact: float) -> dict:
    se = float(samples.std(ddof=1) / math.sqrt(samples.size))
    z = (float(samples.mean()) - exact) / se if se > 0 else (0.0 if samples.mean() == exact else math.inf)
    return {"exact": exact, "mc_mean": float(samples.mean()), "stderr": se, "z": z, "passed": abs(z) <= 3.0}


def cmd_crosscheck(cfg: ExperimentConfig) -> int:
    from . import exact_formulas as ef
    from . import particle_system as ps
    from .fredholm import finite_time as ft
    from .fredholm.qspecial import q_pochhammer

    tol = dict(cfg.tolerances)
    kind = cfg.kind
    if kind in ("qlaplace", "moment"):
        L = cfg.moment
        if kind == "qlaplace":
            exact = complex(ft.q_laplace_finite_t(cfg.x, cfg.t, cfg.b, cfg.rho, cfg.zeta)).real
        else:
            exact = ft.moment_qL(cfg.x, cfg.t, cfg.b, cfg.rho, L)
        if cfg.t == 0:
            if kind == "qlaplace":
                ref = ft.q_laplace_closed_form_t0(cfg.x, cfg.b, cfg.rho, cfg.zeta).real
            else:
                ref = (1.0 - cfg.rho + cfg.rho * cfg.b**L) ** (cfg.x + 1)
            gate = tol.get("exact", 1e-6)
            report = {"mode": "exact", "exact": exact, "closed_form": ref, "error": abs(exact - ref),
                      "tolerance": gate, "passed": abs(exact - ref) <= gate}
        else:
            if cfg.replicas < 2:
                raise ConfigError("invalid value for 'replicas': Monte Carlo needs at least 2")
            h = ps.sample_heights_batch(cfg.b, cfg.rho, cfg.x, cfg.t, cfg.replicas, np.random.default_rng(cfg.seed))
            bn = cfg.b ** h.astype(float)
            samples = bn**L if kind == "moment" else 1.0 / q_pochhammer(cfg.zeta * bn, cfg.b).real
            report = {"mode": "monte_carlo", "replicas": cfg.replicas, **_mc_compare(samples, exact)}
    elif kind == "transition":
        init, final = tuple(int(v) for v in cfg.init), tuple(int(v) for v in cfg.final)
        val = ef.transition_pmf_contour(init, final, cfg.t, cfg.b)
        if len(init) == 1:
            ref = float(ef.single_particle_pmf(cfg.t, final[0] - init[0], cfg.b))
            oracle, gate = "compound_poisson", tol.get("exact", 1e-8)
        else:
            bound = max(40, final[-1] + 10)
            while True:
                try:
                    me = ef.master_equation_pmf(init, cfg.t, bound, cfg.b)
                    break
                except ef.LeakError as e:
                    bound = e.suggested_bound
            ref, oracle, gate = me[final], "master_equation", tol.get("exact", 1e-6)
        report = {"mode": "exact", "oracle": oracle, "contour": val, "reference": ref,
                  "error": abs(val - ref), "tolerance": gate, "passed": abs(val - ref) <= gate}
    else:
        from .she_weak_scaling import WeakScaling, she_mean_residual

        res = she_mean_residual(WeakScaling(cfg.eps), cfg.t, cfg.replicas, np.random.default_rng(cfg.seed),
                                window=cfg.window)
        report = {"mode": "monte_carlo", **res}
    path = output_path(cfg, f"crosscheck_{kind}.json")
    _write_json(path, cfg, {"report": report})
    brief = {k: v for k, v in report.items() if not isinstance(v, list)}
    print(dumps({"kind": kind, **brief, "output": str(path)}))
    return 0 if report["passed"] else 1


# -- she ---------------------------------------------------------------------------

def cmd_she(cfg: ExperimentConfig) -> int:
    from . import particle_system as ps
    from .she_weak_scaling import WeakScaling, gartner_transform, normalization_constants

    sc = WeakScaling(cfg.eps)
    y_max = cfg.y_max
    if y_max is None:
        y_max = int(sc.kernel_mean(cfg.t) + 8.0 * math.sqrt(sc.kernel_variance(cfg.t)) + 50)
    rng = np.random.default_rng(cfg.seed)
    config = ps.Configuration(np.arange(y_max + 1, dtype=np.int64))
    ps.run_until(config, cfg.t, sc.b, rng, x_max=y_max)
    fld = gartner_transform(config, sc, y_max)
    path = output_path(cfg, "she_field.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        _header(fh, cfg)
        fh.write(f"# scaling: {json.dumps(_jsonable(sc.to_dict()), sort_keys=True)}\n")
        w = csv.writer(fh)
        w.writerow(["x", "y", "Z"])
        s = sc.shift(cfg.t)
        for xv, v in zip(fld.points, fld.values):
            w.writerow([int(xv), int(xv) + s, fmt(float(v))])
    print(dumps({"scaling": sc.to_dict(), "normalization": normalization_constants(sc),
                 "sites": int(fld.values.size), "boundary_touched": config.boundary_touched,
                 "output": str(path)}))
    return 0


# -- validate ----------------------------------------------------------------------

def cmd_validate(cfg: ExperimentConfig) -> int:
    from .acceptance import format_line, run_all

    numbers = [int(k) for k in cfg.only] if cfg.only else None
    results = run_all(numbers, scale=cfg.scale, callback=lambda r: print(format_line(r), flush=True))
    path = output_path(cfg, "validate.json")
    _write_json(path, cfg, {"results": [r.to_dict() for r in results]})
    passed = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed; report in {path}")
    return 0 if passed else 1


COMMANDS = {"simulate": cmd_simulate, "tabulate": cmd_tabulate, "crosscheck": cmd_crosscheck,
            "she": cmd_she, "validate": cmd_validate}


def _int_list(s: str) -> list[int]:
    return [int(v) for v in s.split(",") if v.strip()]


def _float_list(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hlpush", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {version_string()}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with default field values")
        sp.add_argument("--out", help="output path (default: $%s or the working directory)" % OUTPUT_ENV)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
        return sp

    s = common(sub.add_parser("simulate", help="Monte Carlo heights N_{nu t}(t) under step Bernoulli data"))
    s.add_argument("--b", type=float)
    s.add_argument("--rho", type=float)
    s.add_argument("--nu", type=float)
    s.add_argument("--t", type=float)
    s.add_argument("--L", type=int, help="initial data fills [0, L] (default: floor(nu t))")
    s.add_argument("--replicas", type=int)
    s.add_argument("--regime", choices=["auto"], help="print the regime verdict for (b, nu, rho)")

    s = common(sub.add_parser("tabulate", help="tabulate a limiting distribution"))
    s.add_argument("distribution", nargs="?", choices=["gue", "goe2", "gauss"])
    s.add_argument("--grid", type=_float_list, help="comma-separated sorted s values")
    s.add_argument("--lo", type=float)
    s.add_argument("--hi", type=float)
    s.add_argument("--step", type=float)

    s = common(sub.add_parser("crosscheck", help="exact formula against Monte Carlo or another oracle"))
    s.add_argument("kind", choices=["qlaplace", "moment", "transition", "she-mean"])
    s.add_argument("--b", type=float)
    s.add_argument("--rho", type=float)
    s.add_argument("--t", type=float)
    s.add_argument("--x", type=int)
    s.add_argument("--zeta", type=float)
    s.add_argument("--moment", type=int, help="moment order L")
    s.add_argument("--init", type=_int_list)
    s.add_argument("--final", type=_int_list)
    s.add_argument("--eps", type=float)
    s.add_argument("--window", type=int)
    s.add_argument("--replicas", type=int)

    s = common(sub.add_parser("she", help="one Gartner-transformed field under weak noise scaling"))
    s.add_argument("--eps", type=float)
    s.add_argument("--t", type=float)
    s.add_argument("--y-max", dest="y_max", type=int)

    s = common(sub.add_parser("validate", help="run the acceptance criteria"))
    s.add_argument("--only", type=_int_list, help="comma-separated criterion numbers")
    s.add_argument("--scale", type=float, help="replica multiplier for smoke runs")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
    except ConfigError as e:
        parser.error(str(e))
    return COMMANDS[cfg.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
