"""
Command line entry point of robeam.

    robeam solve-power --method bti --config power_vs_rate --seed 7 --out run/
    robeam sweep --vary R=1:6:0.5 --methods bti,sproc,ldi,nonrobust
    robeam feasibility --config feasibility --instances 100 --methods all
    robeam srm --config srm_vs_power --vary Pt=10:30:5dB --methods bti,sproc,ldi,mrt --validate 10000

Trailing `key=value` arguments are hydra overrides of the composed config,
e.g. `scenario.n_tx=4 solver.max_iter=100 experiment.workers=4`.
Every command writes `<out>/<command>.csv` and `<out>/manifest.yaml`.
"""
__all__ = ["run", "main", "parse_vary"]

import argparse
import dataclasses
import itertools
import logging
import math
import re
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from fastcore.all import L, ifnone, parallel
from hydra.errors import HydraException
from omegaconf import OmegaConf
from omegaconf.errors import OmegaConfBaseException

from . import __version__
from .config import ConfigError, load_config, num_workers, parse_power
from .design import MethodTag
from .montecarlo import feasibility_rate, validate_design
from .scenario import ScenarioConfig, sample_channels
from .solver import SolverSettings
from .srm import srm_solve
from .task import solve_power_min
from .utils.logger import log_main_process, setup_logger
from .utils.display import plot_sweep
from .utils.structures import COMMAND_REGISTRY

_logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_FAILURES = 0, 2, 3

_COMMANDS = {"solve-power": "solve_power", "solve-srm": "solve_srm", "srm": "solve_srm",
             "feasibility": "feasibility", "sweep": "sweep", "validate": "validate"}

# sweep names -> scenario keys
_VARY_KEYS = {
    "R": ("rate_target",),
    "eta": ("eh_targets",),
    "Pt": ("power_budget",),
    "p": ("p_secrecy",),
    "q": ("q_eh",),
    "rho": ("p_secrecy", "q_eh"),
    "L": ("n_eve",),
    "K": ("n_er",),
    "NT": ("n_tx",),
    "Ne": ("eve_antennas",),
    "eps_sq": ("error_scale.eps_sq",),
}
_VARY_ALIASES = {"rate": "R", "rate_target": "R", "P_T": "Pt", "power_budget": "Pt", "eh_targets": "eta",
                 "n_eve": "L", "n_er": "K", "n_tx": "NT", "N_T": "NT", "eve_antennas": "Ne", "eps": "eps_sq"}
_INT_KEYS = ("L", "K", "NT", "Ne")
# grids used by a bare `--vary NAME`
_DEFAULT_GRIDS = {
    "R": "1:5:1",
    "eta": "-10:10:5dB",
    "Pt": "10:30:5dB",
    "rho": "0.05,0.1",
    "L": "1:5:1",
}
_NUMBER_RE = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(dBm|dB|mW|W)?\s*$")
_FAILURES = ("MaxIter", "Numerical")
# stream id of the Monte-Carlo validation, next to the instance seed
_VALIDATE_STREAM = 7


def _grid_numbers(text: str, name: str) -> Tuple[List[float], Optional[str]]:
    "`start:stop:step` (inclusive) or `a,b,c`, an optional unit suffix on any entry"
    parts = text.split(":") if ":" in text else text.split(",")
    numbers, units = [], set()
    for part in parts:
        match = _NUMBER_RE.match(part)
        if match is None:
            raise ConfigError(f"--vary {name}: cannot parse {part!r}")
        numbers.append(float(match.group(1)))
        if match.group(2):
            units.add(match.group(2))
    if len(units) > 1:
        raise ConfigError(f"--vary {name}: mixed units {sorted(units)}")
    unit = units.pop() if units else None
    if ":" not in text:
        return numbers, unit
    if len(numbers) != 3:
        raise ConfigError(f"--vary {name}: expected start:stop:step, got {text!r}")
    start, stop, step = numbers
    if step == 0 or (stop - start) * step < 0:
        raise ConfigError(f"--vary {name}: step {step:g} does not lead from {start:g} to {stop:g}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(n)], unit


def parse_vary(spec: str) -> Tuple[str, Tuple[str, ...], List[Dict[str, Any]]]:
    """
    Parses a sweep `name=start:stop:step`, `name=a,b,c` or a bare `name`
    (default grid). Values may carry a `dB`/`dBm`/`W`/`mW` suffix and are
    converted to linear units.

    Returns `(name, scenario_keys, points)` where each point holds the csv
    labels of one grid value: the linear value under `name` and, for dB
    grids, the number under `<name>_<unit>`.
    """
    name, _, text = spec.partition("=")
    name = _VARY_ALIASES.get(name.strip(), name.strip())
    if name not in _VARY_KEYS:
        raise ConfigError(f"--vary: unknown parameter {name!r}, expected one of {sorted(_VARY_KEYS)}")
    text = text.strip() or _DEFAULT_GRIDS.get(name)
    if text is None:
        raise ConfigError(f"--vary {name}: a grid is required, e.g. {name}=1:5:1")

    numbers, unit = _grid_numbers(text, name)
    points = []
    for x in numbers:
        value = x if unit is None else parse_power(f"{x:g}{unit}", name)
        if name in _INT_KEYS:
            if value != int(value):
                raise ConfigError(f"--vary {name}: expected integers, got {value:g}")
            value = int(value)
        point = {name: value}
        if unit in ("dB", "dBm"):
            point[f"{name}_{unit}"] = x
        points.append(point)
    return name, _VARY_KEYS[name], points


@dataclass
class _Job:
    "What a pool worker needs to process one instance"
    command: str
    methods: List[MethodTag]
    settings: SolverSettings
    validate: int
    tol_rate: float
    log_dir: Optional[str] = None

    def settings_for(self, method: MethodTag, seed: int, point: int) -> SolverSettings:
        if self.log_dir is None:
            return self.settings
        path = Path(self.log_dir) / f"{method}_p{point}_s{seed}.csv"
        return dataclasses.replace(self.settings, log_path=str(path))


@dataclass
class RunContext:
    "Everything a command handler needs, resolved from the command line and the config"
    command: str
    argv: List[str]
    config: Any
    scenario: ScenarioConfig
    settings: SolverSettings
    methods: List[MethodTag]
    seed: int
    instances: int
    out: Path
    grid: List[Tuple[Dict[str, Any], ScenarioConfig]]
    validate: int
    max_failures: Optional[int]
    workers: int
    tol_rate: float
    log_iterations: bool = False
    plot: bool = False
    x_axis: Optional[str] = None

    def job(self, validate: Optional[int] = None) -> _Job:
        log_dir = None
        if self.log_iterations:
            log_dir = self.out / "iterations"
            log_dir.mkdir(parents=True, exist_ok=True)
            log_dir = str(log_dir)
        return _Job(self.command, self.methods, self.settings, ifnone(validate, self.validate), self.tol_rate, log_dir)

    def tasks(self) -> List[Tuple[int, Dict[str, Any], ScenarioConfig, int]]:
        "`(point, labels, scenario, seed)` for every grid point and instance"
        return [
            (p, labels, scen, self.seed + i)
            for p, (labels, scen) in enumerate(self.grid)
            for i in range(self.instances)
        ]


def _parse_methods(values) -> List[MethodTag]:
    names = []
    for v in L(values):
        names += [s for s in str(v).split(",") if s.strip()]
    if any(n.strip().lower() == "all" for n in names):
        return [MethodTag.BTI, MethodTag.SPROCEDURE, MethodTag.LDI, MethodTag.NONROBUST]
    methods = [MethodTag.parse(n) for n in names]
    if not methods:
        raise ConfigError("no method selected")
    return list(dict.fromkeys(methods))


def _common_eta(scen: ScenarioConfig) -> float:
    return max(scen.eh_targets, default=0.0)


def _version() -> str:
    "`__version__`, with the git commit when run from a checkout"
    try:
        sha = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        sha = ""
    return f"{__version__}+g{sha}" if sha else __version__


def _outage_columns(design, cs, scen, seed, trials) -> Dict[str, Any]:
    if not trials or not design.feasible:
        return {}
    report = validate_design(
        design, cs, scen, trials, rng=np.random.default_rng([seed, _VALIDATE_STREAM]), n_workers=0
    )
    return dict(report.to_record(), within=report.within(scen.p_secrecy, scen.q_eh))


def _power_rows(task, job: _Job) -> List[Dict[str, Any]]:
    "Power minimization of every method on one instance"
    point, labels, scen, seed = task
    cs = sample_channels(scen, np.random.default_rng(seed))
    rows = []
    for method in job.methods:
        design = solve_power_min(cs, scen, method, job.settings_for(method, seed, point))
        ok = design.feasible
        row = dict(
            labels,
            seed=seed,
            method=str(method),
            R=scen.rate_target,
            eta=_common_eta(scen),
            p=scen.p_secrecy,
            q=scen.q_eh,
            status=design.status,
            power=design.power if ok else math.nan,
            rank_ratio=design.rank_ratio if ok else math.nan,
            iters=design.iterations,
            wall_ms=1e3 * design.wall_time,
        )
        row.update(_outage_columns(design, cs, scen, seed, job.validate))
        rows.append(row)
    return rows


def _srm_rows(task, job: _Job) -> List[Dict[str, Any]]:
    "Secrecy-rate maximization of every method on one instance"
    point, labels, scen, seed = task
    cs = sample_channels(scen, np.random.default_rng(seed))
    rows = []
    for method in job.methods:
        res = srm_solve(cs, scen, method, job.settings_for(method, seed, point), job.tol_rate)
        design = res.design
        row = dict(
            labels,
            seed=seed,
            method=str(method),
            Pt=scen.power_budget,
            L=scen.n_eve,
            eta=_common_eta(scen),
            p=scen.p_secrecy,
            q=scen.q_eh,
            R_star=res.rate,
            R_lo=res.bracket[0],
            R_hi=res.bracket[1],
            status=design.status,
            power=design.power if design.feasible else math.nan,
            rank_ratio=design.rank_ratio if design.feasible else math.nan,
            evaluations=len(res.evaluations),
            failures=res.failures,
            wall_ms=1e3 * res.wall_time,
        )
        if res.rate > 0:
            at_rate = dataclasses.replace(scen, rate_target=res.rate)
            row.update(_outage_columns(design, cs, at_rate, seed, job.validate))
        rows.append(row)
    return rows


def _run_pool(fn, ctx: RunContext, job: _Job) -> pd.DataFrame:
    tasks = ctx.tasks()
    log_main_process(
        _logger,
        logging.INFO,
        f"{ctx.command}: {len(ctx.grid)} grid point(s) x {ctx.instances} instance(s), "
        f"methods {', '.join(map(str, ctx.methods))}, {ctx.workers} worker(s)",
    )
    results = parallel(fn, tasks, job=job, n_workers=ctx.workers, progress=False)
    return pd.DataFrame([row for rows in results for row in rows])


def _count_failures(df: pd.DataFrame) -> int:
    n = int(df["status"].isin(_FAILURES).sum()) if "status" in df else 0
    if "failures" in df:
        n += int(df["failures"].sum())
    return n


def _finish(ctx: RunContext, df: pd.DataFrame, value: Optional[str] = None) -> int:
    path = ctx.out / f"{ctx.command}.csv"
    df.to_csv(path, index=False, float_format="%.10g", encoding="utf-8")
    log_main_process(_logger, logging.INFO, f"wrote {len(df)} row(s) to {path}")
    if value is not None and value in df and len(df):
        summary = df.groupby("method", sort=False)[value].mean()
        for method, mean in summary.items():
            log_main_process(_logger, logging.INFO, f"  {method:>10s}: mean {value} {mean:.6g}")

    if ctx.plot and ctx.x_axis is not None and value in df and df[value].notna().any():
        plot_sweep(df, ctx.x_axis, value, out=ctx.out / f"{ctx.command}.png")

    failures = _count_failures(df)
    if failures:
        _logger.warning(f"{failures} solve(s) ended with MaxIter or Numerical")
    if ctx.max_failures is not None and failures > ctx.max_failures:
        _logger.error(f"failure budget exceeded: {failures} > {ctx.max_failures}")
        return EXIT_FAILURES
    return EXIT_OK


@COMMAND_REGISTRY.register()
def solve_power(ctx: RunContext) -> int:
    "Power minimization per instance and method"
    return _finish(ctx, _run_pool(_power_rows, ctx, ctx.job()), "power")


@COMMAND_REGISTRY.register()
def sweep(ctx: RunContext) -> int:
    "Power minimization along the `--vary` grid"
    if len(ctx.grid) < 2 and not any(ctx.grid[0][0]):
        raise ConfigError("sweep needs a --vary grid")
    return _finish(ctx, _run_pool(_power_rows, ctx, ctx.job()), "power")


@COMMAND_REGISTRY.register()
def solve_srm(ctx: RunContext) -> int:
    "Secrecy-rate maximization per instance and method"
    return _finish(ctx, _run_pool(_srm_rows, ctx, ctx.job()), "R_star")


@COMMAND_REGISTRY.register()
def validate(ctx: RunContext) -> int:
    "Power minimization followed by Monte-Carlo outage validation of every design"
    trials = ctx.validate or 10000
    return _finish(ctx, _run_pool(_power_rows, ctx, ctx.job(validate=trials)), "secrecy_outage")


@COMMAND_REGISTRY.register()
def feasibility(ctx: RunContext) -> int:
    """
    Feasibility rate per method and grid point. All methods see the same
    instances, drawn from `experiment.seed`.
    """
    rows = []
    for labels, scen in ctx.grid:
        for method in ctx.methods:
            rate = feasibility_rate(
                scen,
                method,
                ctx.instances,
                rng=np.random.default_rng(ctx.seed),
                settings=ctx.settings,
                n_workers=ctx.workers,
            )
            rows.append(dict(labels, method=str(method), instances=ctx.instances, feasibility_rate=rate))
            log_main_process(_logger, logging.INFO, f"{labels or ''} {method}: feasibility rate {rate:.3f}")
    return _finish(ctx, pd.DataFrame(rows))


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        default=None,
        help="preset name (feasibility, power_vs_rate, power_vs_eh, srm_vs_power, srm_vs_eves, small, "
        "literal_pathloss) or yaml file",
    )
    common.add_argument("--method", "--methods", dest="methods", action="append", default=None,
                        help="comma separated methods (bti, sproc, ldi, nonrobust, mrt) or `all`")
    common.add_argument("--seed", type=int, default=None, help="base seed, instance i uses seed + i")
    common.add_argument("--instances", type=int, default=None, help="number of random instances")
    common.add_argument("--out", default="robeam_out", help="output directory")
    common.add_argument("--vary", action="append", default=[], metavar="NAME=START:STOP:STEP",
                        help="sweep a parameter (R, eta, Pt, p, q, rho, L, K, NT, Ne, eps_sq); repeatable")
    common.add_argument("--validate", type=int, default=None, metavar="N", help="Monte-Carlo trials per design")
    common.add_argument("--max-failures", type=int, default=None,
                        help="exit with code 3 when more solves end MaxIter/Numerical")
    common.add_argument("--workers", type=int, default=None, help="work pool size")
    common.add_argument("--log-iterations", action="store_true", help="write solver iteration tables")
    common.add_argument(
        "--plot", action="store_true", help="save a png of the main column against the first --vary axis"
    )
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("overrides", nargs="*", help="hydra overrides, e.g. scenario.n_tx=4")

    parser = argparse.ArgumentParser(prog="robeam", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"robeam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve-power", parents=[common], help="power minimization per instance")
    sub.add_parser("solve-srm", aliases=["srm"], parents=[common], help="secrecy-rate maximization per instance")
    sub.add_parser("feasibility", parents=[common], help="feasibility rate of each method")
    sub.add_parser("sweep", parents=[common], help="power minimization along a --vary grid")
    sub.add_parser("validate", parents=[common], help="Monte-Carlo outage of the power-min designs")
    return parser


def _prepare(args, argv: Sequence[str]) -> RunContext:
    cfg = load_config(args.config, args.overrides)
    OmegaConf.set_struct(cfg, False)
    exp = cfg.experiment
    command = _COMMANDS[args.command]

    scenario = ScenarioConfig.from_config_dict(cfg.scenario)
    settings = SolverSettings.from_config_dict(cfg.solver)
    methods = _parse_methods(ifnone(args.methods, list(exp.methods)))
    seed = int(ifnone(args.seed, exp.seed))
    instances = int(ifnone(args.instances, exp.instances))
    if instances < 1:
        raise ConfigError(f"instances must be >= 1, got {instances}")

    axes = [parse_vary(spec) for spec in args.vary]
    grid = []
    for combo in itertools.product(*[points for _, _, points in axes]):
        labels, changes = {}, {}
        for (name, keys, _), point in zip(axes, combo):
            labels.update(point)
            changes.update({key: point[name] for key in keys})
        scen = scenario.with_updates(**changes) if changes else scenario
        if command != "solve_srm" and not scen.rate_target > 0:
            raise ConfigError(f"power minimization needs rate_target > 0 (grid point {labels})")
        grid.append((labels, scen))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    validate_trials = int(ifnone(args.validate, exp.validate_trials) or 0)
    if validate_trials < 0:
        raise ConfigError(f"--validate must be >= 0, got {validate_trials}")

    ctx = RunContext(
        command=command,
        argv=list(argv),
        config=cfg,
        scenario=scenario,
        settings=settings,
        methods=methods,
        seed=seed,
        instances=instances,
        out=out,
        grid=grid,
        validate=validate_trials,
        max_failures=ifnone(args.max_failures, exp.get("max_failures")),
        workers=num_workers(ifnone(args.workers, exp.get("workers"))),
        tol_rate=float(exp.get("tol_rate", 1e-3)),
        log_iterations=args.log_iterations,
        plot=args.plot,
        x_axis=axes[0][0] if axes else None,
    )
    _write_manifest(ctx)
    return ctx


def _write_manifest(ctx: RunContext):
    "Full linear-unit config, seed and version: rerunning with `--config manifest.yaml` reproduces the csv"
    cfg = OmegaConf.to_container(ctx.config, resolve=True)
    cfg["scenario"] = OmegaConf.to_container(ctx.scenario.to_config_dict())
    cfg["solver"] = OmegaConf.to_container(ctx.settings.to_config_dict())
    cfg["experiment"].update(seed=ctx.seed, instances=ctx.instances, methods=[str(m) for m in ctx.methods])
    cfg["run"] = dict(command=ctx.command, argv=ctx.argv, version=_version())
    OmegaConf.save(OmegaConf.create(cfg), ctx.out / "manifest.yaml")


def run(argv: Optional[Sequence[str]] = None) -> int:
    "Runs the command line `argv` and returns the exit code"
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code is None else int(e.code)

    setup_logger(output=str(args.out), level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        ctx = _prepare(args, argv)
        return COMMAND_REGISTRY.get(ctx.command)(ctx)
    except (ConfigError, OmegaConfBaseException, HydraException) as e:
        _logger.error(f"configuration error: {e}")
        return EXIT_CONFIG
    except ValueError as e:
        _logger.error(f"invalid input: {e}")
        return EXIT_CONFIG


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
