"""Command-line entry point: confidence bands and sets from CSV data, coverage studies.

    python cli.py density-band --input d.csv --output band.json
    python cli.py simulate-coverage --scenario density_1d --n 2000 --nominal 0.80:0.99:0.01 --output cov.json
"""
import argparse
import sys
import time
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

import config
import helpers
from classes.Bandwidth import Bandwidth, BandwidthMethod
from classes.Bootstrap import BandKind, Bootstrap, BootstrapConfig, ConfidenceBand, Metric
from classes.Errors import DebiasError, MalformedDataError, UsageError
from classes.EvalGrid import EvalGrid
from classes.Kernel import KernelKind, KernelSpec
from classes.Sample import PairedSample, Sample
from classes.Simulation import BANDWIDTH_RULES, DENSITY_KINDS, Scenario, ScenarioKind, Simulation

log = config.log

DENSITY_SELECTORS = ("rot", "lscv")
REGRESSION_SELECTORS = ("cv",)


@dataclass(frozen=True)
class RunConfig:
    command: str
    output: str
    input: Optional[str] = None
    alpha: float = config.DEFAULT_ALPHA
    tau: float = config.DEFAULT_TAU
    boot: int = config.DEFAULT_BOOTSTRAP_REPLICATES
    seed: int = config.DEFAULT_SEED
    threads: int = 1
    bandwidth: Union[str, float] = "rot"
    grid_size: Optional[int] = None
    band_kind: str = BandKind.fixed.value
    estimator: str = "debiased"
    kernel: str = KernelKind.gaussian.value
    output_format: str = "json"
    level: Optional[float] = None
    r0: Optional[float] = None
    cv_folds: int = config.DEFAULT_CV_FOLDS
    cv_repeats: int = config.DEFAULT_CV_REPEATS
    inversion: bool = True
    scenario: Optional[str] = None
    n: Optional[int] = None
    trials: int = config.DEFAULT_TRIALS
    nominal: Tuple[float, ...] = (0.95,)

    @property
    def debiased(self) -> bool:
        return self.estimator == "debiased"

    def echo(self) -> dict:
        """Everything needed to reproduce the run; paths and threads are left out"""
        echoed = asdict(self)
        for key in ("output", "threads"):
            echoed.pop(key)
        return echoed


def _ranged(kind: Callable, name: str, low=None, high=None, open_low=False, open_high=False):
    """argparse type converting with `kind` and enforcing the range"""

    def convert(text: str):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a {kind.__name__}, got {text!r}")
        if kind is float and not np.isfinite(value):
            raise argparse.ArgumentTypeError(f"{name} must be finite, got {text!r}")
        too_low = low is not None and (value <= low if open_low else value < low)
        too_high = high is not None and (value >= high if open_high else value > high)
        if too_low or too_high:
            left = "(" if open_low else "["
            right = ")" if open_high else "]"
            raise argparse.ArgumentTypeError(
                f"{name} must lie in {left}{low if low is not None else '-inf'},"
                f" {high if high is not None else 'inf'}{right}, got {text}"
            )
        return value

    return convert


def _bandwidth_spec(text: str) -> Union[str, float]:
    """A selector name or a fixed positive bandwidth"""
    if text in DENSITY_SELECTORS + REGRESSION_SELECTORS or text in BANDWIDTH_RULES:
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown bandwidth {text!r}")
    if not np.isfinite(value) or value <= 0:
        raise argparse.ArgumentTypeError(f"a fixed bandwidth must be positive, got {text}")
    return value


def _nominal_levels(text: str) -> Tuple[float, ...]:
    """`a:b:step` sweep (inclusive), a comma list, or a single level"""
    try:
        if ":" in text:
            start, stop, step = (float(part) for part in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            levels = tuple(round(start + i * step, 12) for i in range(count))
        else:
            levels = tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot read nominal levels from {text!r}")
    if any(not 0 < level < 1 for level in levels):
        raise argparse.ArgumentTypeError("nominal levels must lie in (0, 1)")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise argparse.ArgumentTypeError("nominal levels must be strictly increasing")
    return levels


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--output", required=True, help="Result JSON path")
    parser.add_argument("--format", dest="output_format", choices=("json", "csv"), default="json",
                        help="csv also writes a flat table next to the JSON")
    parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    parser.add_argument("--threads", type=_ranged(int, "--threads", low=1),
                        default=config.get_thread_count())
    parser.add_argument("--alpha", type=_ranged(float, "--alpha", 0, 1, True, True),
                        default=config.DEFAULT_ALPHA)
    parser.add_argument("--boot", type=_ranged(int, "--boot", low=1),
                        default=config.DEFAULT_BOOTSTRAP_REPLICATES)


def _add_estimation(parser: argparse.ArgumentParser):
    parser.add_argument("--tau", type=_ranged(float, "--tau", low=0, open_low=True),
                        default=config.DEFAULT_TAU)
    parser.add_argument("--bandwidth", type=_bandwidth_spec, default=None,
                        help="rot | lscv | cv | fixed positive value")
    parser.add_argument("--grid-size", type=_ranged(int, "--grid-size", low=2), default=None)
    parser.add_argument("--estimator", choices=("debiased", "plain"), default="debiased")
    parser.add_argument("--kernel", choices=[kind.value for kind in KernelKind],
                        default=KernelKind.gaussian.value)
    parser.add_argument("--cv-folds", type=_ranged(int, "--cv-folds", low=2),
                        default=config.DEFAULT_CV_FOLDS)
    parser.add_argument("--cv-repeats", type=_ranged(int, "--cv-repeats", low=1),
                        default=config.DEFAULT_CV_REPEATS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="debias", description="Debiased kernel estimators with bootstrap confidence bands and sets"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    density = commands.add_parser("density-band", help="Density confidence band")
    density.add_argument("--input", required=True)
    density.add_argument("--band-kind", choices=[kind.value for kind in BandKind],
                         default=BandKind.fixed.value)
    _add_common(density)
    _add_estimation(density)

    regression = commands.add_parser("regression-band", help="Regression confidence band")
    regression.add_argument("--input", required=True)
    _add_common(regression)
    _add_estimation(regression)

    levelset = commands.add_parser("levelset-set", help="Density level-set confidence set")
    levelset.add_argument("--input", required=True)
    levelset.add_argument("--level", required=True,
                          type=_ranged(float, "--level", low=0, open_low=True))
    _add_common(levelset)
    _add_estimation(levelset)

    invreg = commands.add_parser("invreg-set", help="Inverse-regression confidence sets")
    invreg.add_argument("--input", required=True)
    invreg.add_argument("--r0", required=True, type=_ranged(float, "--r0"))
    invreg.add_argument("--no-inversion", dest="inversion", action="store_false",
                        help="Skip the band-inversion set")
    _add_common(invreg)
    _add_estimation(invreg)

    simulate = commands.add_parser("simulate-coverage", help="Monte-Carlo coverage study")
    simulate.add_argument("--scenario", required=True, choices=[kind.value for kind in ScenarioKind])
    simulate.add_argument("--n", required=True, type=_ranged(int, "--n", low=20))
    simulate.add_argument("--trials", type=_ranged(int, "--trials", low=1),
                          default=config.DEFAULT_TRIALS)
    simulate.add_argument("--nominal", type=_nominal_levels, default=(0.95,),
                          help="a:b:step, a comma list or one level")
    simulate.add_argument("--band-kind", choices=[kind.value for kind in BandKind],
                          default=BandKind.fixed.value)
    simulate.add_argument("--level", type=_ranged(float, "--level", low=0, open_low=True),
                          default=0.25)
    simulate.add_argument("--r0", type=_ranged(float, "--r0"), default=0.5)
    simulate.add_argument("--no-inversion", dest="inversion", action="store_false")
    _add_common(simulate)
    _add_estimation(simulate)

    illustrate = commands.add_parser("illustrate", help="Data for a plain vs debiased band picture")
    illustrate.add_argument("--scenario", required=True,
                            choices=[ScenarioKind.density_1d.value, ScenarioKind.regression_sine.value])
    illustrate.add_argument("--n", required=True, type=_ranged(int, "--n", low=20))
    _add_common(illustrate)

    return parser


def _default_bandwidth(args: argparse.Namespace) -> str:
    if args.command in ("density-band", "levelset-set"):
        return "rot"
    if args.command in ("simulate-coverage", "illustrate"):
        return "rot" if ScenarioKind(args.scenario) in DENSITY_KINDS else "cv"
    return "cv"


def _check_bandwidth(args: argparse.Namespace):
    spec = args.bandwidth
    if not isinstance(spec, str):
        return
    if args.command in ("simulate-coverage", "illustrate"):
        allowed = [
            rule for rule, (selector, _) in BANDWIDTH_RULES.items()
            if (selector == "rot") == (ScenarioKind(args.scenario) in DENSITY_KINDS)
        ]
    elif args.command in ("density-band", "levelset-set"):
        allowed = list(DENSITY_SELECTORS)
    else:
        allowed = list(REGRESSION_SELECTORS)
    if spec not in allowed:
        raise UsageError(
            f"argument --bandwidth: {spec!r} is not valid for {args.command}"
            f" (choose from {', '.join(allowed)} or a positive number)"
        )


def parse_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Validated run configuration; usage errors exit with code 2"""
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "bandwidth", None) is None:
        args.bandwidth = _default_bandwidth(args)
    try:
        _check_bandwidth(args)
        if args.command == "simulate-coverage" and args.band_kind == BandKind.variable.value \
                and args.scenario != ScenarioKind.density_1d.value:
            raise UsageError("argument --band-kind: variable bands exist for density_1d only")
    except UsageError as error:
        parser.error(str(error))

    fields = {key: value for key, value in vars(args).items() if key in RunConfig.__dataclass_fields__}
    return RunConfig(**fields)


def _resolve_bandwidth(cfg: RunConfig, data: Union[Sample, PairedSample]) -> dict:
    """{"h": ..., "method": ...} for the configured rule"""
    if not isinstance(cfg.bandwidth, str):
        return {"h": float(cfg.bandwidth), "method": BandwidthMethod.fixed.value}
    kernel = KernelSpec(cfg.kernel, data.d if isinstance(data, Sample) else 1)
    if cfg.bandwidth == "rot":
        choice = Bandwidth.rule_of_thumb(data)
    elif cfg.bandwidth == "lscv":
        choice = Bandwidth.lscv_bandwidth(data, kernel=kernel)
    else:
        choice = Bandwidth.kfold_cv_bandwidth(
            data, cfg.cv_folds, cfg.cv_repeats, seed=cfg.seed, kernel=kernel
        )
    log.info(f"Selected bandwidth h={choice.h:.6g} ({choice.method.value})")
    return {"h": choice.h, "method": choice.method.value}


def _read(cfg: RunConfig, kind):
    data = helpers.read_csv(cfg.input)
    if not isinstance(data, kind):
        wanted = "x,y" if kind is PairedSample else "x or x1,x2"
        raise MalformedDataError(f"{cfg.command} needs columns {wanted}", [1])
    return data


def _grid_payload(grid: EvalGrid):
    return grid.axes[0] if grid.dimension == 1 else grid.points


def _band_payload(band: ConfidenceBand) -> dict:
    return {
        "grid": _grid_payload(band.grid),
        "center": band.center.ravel(),
        "lower": band.lower.ravel(),
        "upper": band.upper.ravel(),
        "t_hat": band.t_hat,
        "band_kind": band.kind,
    }


def _band_table(band: ConfidenceBand) -> pd.DataFrame:
    points = band.grid.points
    columns = {"x": points[:, 0]} if band.grid.dimension == 1 else {"x1": points[:, 0], "x2": points[:, 1]}
    columns.update(
        center=band.center.ravel(), lower=band.lower.ravel(), upper=band.upper.ravel()
    )
    return pd.DataFrame(columns)


def run_density_band(cfg: RunConfig):
    sample = _read(cfg, Sample)
    bandwidth = _resolve_bandwidth(cfg, sample)
    grid = EvalGrid.default_for(sample.points, bandwidth["h"], cfg.grid_size)
    metric = Metric.weighted_sup if cfg.band_kind == BandKind.variable.value else Metric.sup
    band = Bootstrap.density_confidence_band(
        sample, bandwidth["h"], cfg.tau, KernelSpec(cfg.kernel, sample.d), grid,
        BootstrapConfig(cfg.boot, cfg.alpha, cfg.seed, metric), cfg.debiased, cfg.threads,
    )
    return bandwidth, _band_payload(band), band.quantile.dropped, _band_table(band)


def run_regression_band(cfg: RunConfig):
    ps = _read(cfg, PairedSample)
    bandwidth = _resolve_bandwidth(cfg, ps)
    grid = EvalGrid.from_range(ps.x.min(), ps.x.max(), cfg.grid_size)
    band = Bootstrap.regression_confidence_band(
        ps, bandwidth["h"], cfg.tau, KernelSpec(cfg.kernel), grid,
        BootstrapConfig(cfg.boot, cfg.alpha, cfg.seed), cfg.debiased, cfg.threads,
    )
    return bandwidth, _band_payload(band), band.quantile.dropped, _band_table(band)


def run_levelset_set(cfg: RunConfig):
    sample = _read(cfg, Sample)
    bandwidth = _resolve_bandwidth(cfg, sample)
    grid = EvalGrid.default_for(sample.points, bandwidth["h"], cfg.grid_size)
    region = Bootstrap.levelset_confidence_set(
        sample, cfg.level, bandwidth["h"], cfg.tau, KernelSpec(cfg.kernel, sample.d), grid,
        BootstrapConfig(cfg.boot, cfg.alpha, cfg.seed, Metric.hausdorff), cfg.debiased, cfg.threads,
    )
    payload = {"points": region.center.points, "radius": region.radius}
    names = ["x"] if sample.d == 1 else ["x1", "x2"]
    table = pd.DataFrame(region.center.points, columns=names).assign(radius=region.radius)
    return bandwidth, payload, region.quantile.dropped, table


def run_invreg_set(cfg: RunConfig):
    ps = _read(cfg, PairedSample)
    bandwidth = _resolve_bandwidth(cfg, ps)
    grid = EvalGrid.from_range(ps.x.min(), ps.x.max(), cfg.grid_size)
    kernel = KernelSpec(cfg.kernel)
    region = Bootstrap.invreg_confidence_set(
        ps, cfg.r0, bandwidth["h"], cfg.tau, kernel, grid,
        BootstrapConfig(cfg.boot, cfg.alpha, cfg.seed, Metric.hausdorff), cfg.debiased, cfg.threads,
    )
    root = Bootstrap.center_root(region)
    interval = Bootstrap.invreg_normal_ci(root, region.replicate_sets, cfg.alpha)
    payload = {
        "points": region.center.points[:, 0],
        "radius": region.radius,
        "normal_ci": {
            "center": interval.center,
            "lower": interval.lower,
            "upper": interval.upper,
            "sigma": interval.sigma,
            "nonsingleton_fraction": interval.nonsingleton_fraction,
        },
    }
    dropped = region.quantile.dropped
    if cfg.inversion:
        band = Bootstrap.regression_confidence_band(
            ps, bandwidth["h"], cfg.tau, kernel, grid,
            BootstrapConfig(cfg.boot, cfg.alpha, cfg.seed), cfg.debiased, cfg.threads,
        )
        payload["inversion"] = {
            "grid": grid.axes[0],
            "mask": Bootstrap.invreg_inversion_set(band, cfg.r0),
            "t_hat": band.t_hat,
        }
        dropped += band.quantile.dropped
    table = pd.DataFrame({"x": region.center.points[:, 0], "radius": region.radius})
    return bandwidth, payload, dropped, table


def run_simulate_coverage(cfg: RunConfig):
    scenario = Scenario(
        kind=cfg.scenario,
        n=cfg.n,
        bandwidth_rule=cfg.bandwidth,
        tau=cfg.tau,
        B=cfg.boot,
        trials=cfg.trials,
        nominal_levels=cfg.nominal,
        seed=cfg.seed,
        estimator=cfg.estimator,
        band_kind=cfg.band_kind,
        grid_size=cfg.grid_size,
        cv_folds=cfg.cv_folds,
        cv_repeats=cfg.cv_repeats,
        level=cfg.level,
        r0=cfg.r0,
        invreg_inversion=cfg.inversion,
    )
    report = Simulation.run_coverage_study(scenario, cfg.threads)
    rows = [
        {
            "method": row.method,
            "nominal": row.nominal,
            "hits": row.hits,
            "trials": row.trials,
            "coverage": row.coverage,
            "se": row.standard_error,
        }
        for row in report.rows
    ]
    payload = {
        "rows": rows,
        "completed_trials": report.completed_trials,
        "failed_trials": report.failed_trials,
        "dropped_replicates_max": report.dropped_replicates_max,
    }
    bandwidth = {"h_mean": report.mean_bandwidth, "method": str(cfg.bandwidth)}
    return bandwidth, payload, report.dropped_replicates_total, pd.DataFrame(rows)


def run_illustrate(cfg: RunConfig):
    picture = Simulation.illustrate(cfg.scenario, cfg.n, cfg.seed, cfg.boot, cfg.alpha, cfg.threads)
    grid = picture["grid"].axes[0]
    payload = {"grid": grid, "truth": picture["truth"]}
    table = pd.DataFrame({"x": grid, "truth": picture["truth"]})
    dropped = 0
    for name, band in picture["bands"].items():
        payload[name] = _band_payload(band)
        table[f"{name}_center"] = band.center
        table[f"{name}_lower"] = band.lower
        table[f"{name}_upper"] = band.upper
        dropped += band.quantile.dropped
    return {"h": picture["h"], "method": "rot" if cfg.scenario == "density_1d" else "kfold_cv"}, \
        payload, dropped, table


COMMANDS: Dict[str, Callable] = {
    "density-band": run_density_band,
    "regression-band": run_regression_band,
    "levelset-set": run_levelset_set,
    "invreg-set": run_invreg_set,
    "simulate-coverage": run_simulate_coverage,
    "illustrate": run_illustrate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    cfg = parse_args(argv)
    log.info(f"Running {cfg.command} on {cfg.threads} worker(s)")
    started = time.perf_counter()
    try:
        bandwidth, payload, dropped, table = COMMANDS[cfg.command](cfg)
        resolved = {**cfg.echo(), "bandwidth_selected": bandwidth}
        timing = {"seconds": time.perf_counter() - started, "threads": cfg.threads}
        doc = helpers.build_result_document(cfg.command, resolved, payload, dropped, timing)
        helpers.write_result(doc, cfg.output, table if cfg.output_format == "csv" else None)
    except DebiasError as error:
        log.error(f"{type(error).__name__}: {error}")
        return error.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
