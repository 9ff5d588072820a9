"""Simulation designs with analytic truths, and the Monte-Carlo coverage harness.

Each trial m draws its data from the stream (seed, m) and runs one bootstrap;
the coverage at every nominal level is read from that same set of replicate
statistics, so coverage is nondecreasing in the nominal level.
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.stats import norm

import config
from classes.Bandwidth import Bandwidth
from classes.Bootstrap import (
    BandKind,
    Bootstrap,
    BootstrapConfig,
    ConfidenceBand,
    Metric,
    RegionSet,
)
from classes.Errors import DebiasError, InvalidParameterError, ReplicateBudgetError
from classes.EvalGrid import EvalGrid
from classes.Kernel import KernelSpec
from classes.LevelSet import LevelSet, PointSet
from classes.RandomStreams import RandomStreams
from classes.ReplicatePool import ReplicatePool
from classes.Sample import PairedSample, Sample

log = config.log

MIXTURE_1D_WEIGHTS = (0.6, 0.4)
MIXTURE_1D_MEANS = (0.0, 4.0)
MIXTURE_2D_MEANS = np.array([[0.0, 0.0], [1.0, 0.0], [1.5, 0.5]])
MIXTURE_2D_SD = 0.3
SINE_NOISE_SD = 0.1
INVREG_NOISE_SD = 0.2
INVREG_ROOT = float(np.log(2.0))
TRUTH_REFINEMENT = 4
FAILED_TRIAL_BUDGET = 0.10


class ScenarioKind(str, Enum):
    density_1d = "density_1d"
    levelset_2d = "levelset_2d"
    regression_sine = "regression_sine"
    invreg_exp = "invreg_exp"


class Estimator(str, Enum):
    debiased = "debiased"
    plain = "plain"


# rule name -> (selector, multiplier)
BANDWIDTH_RULES = {
    "rot": ("rot", 1.0),
    "rot_x2": ("rot", 2.0),
    "rot_half": ("rot", 0.5),
    "cv": ("cv", 1.0),
    "cv_x2": ("cv", 2.0),
    "cv_half": ("cv", 0.5),
}

# evaluation box per design
DESIGN_BOUNDS = {
    ScenarioKind.density_1d: ((-3.0,), (7.0,)),
    ScenarioKind.levelset_2d: ((-1.0, -1.0), (2.5, 1.5)),
    ScenarioKind.regression_sine: ((0.0,), (1.0,)),
    ScenarioKind.invreg_exp: ((0.0,), (1.0,)),
}

DENSITY_KINDS = (ScenarioKind.density_1d, ScenarioKind.levelset_2d)


@dataclass(frozen=True)
class Scenario:
    kind: ScenarioKind
    n: int
    bandwidth_rule: Union[str, float] = "rot"
    tau: float = config.DEFAULT_TAU
    B: int = config.DEFAULT_BOOTSTRAP_REPLICATES
    trials: int = config.DEFAULT_TRIALS
    nominal_levels: Tuple[float, ...] = (0.95,)
    seed: int = config.DEFAULT_SEED
    estimator: Estimator = Estimator.debiased
    band_kind: BandKind = BandKind.fixed
    grid_size: Optional[int] = None
    cv_folds: int = config.DEFAULT_CV_FOLDS
    cv_repeats: int = config.DEFAULT_CV_REPEATS
    level: float = 0.25
    r0: float = 0.5
    invreg_inversion: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        object.__setattr__(self, "band_kind", BandKind(self.band_kind))
        levels = tuple(float(level) for level in self.nominal_levels)
        object.__setattr__(self, "nominal_levels", levels)

        if self.n < 20:
            raise InvalidParameterError(f"n must be at least 20, got {self.n}")
        if self.trials < 1 or self.B < 1:
            raise InvalidParameterError("trials and B must be at least 1")
        if not levels or any(not 0 < level < 1 for level in levels):
            raise InvalidParameterError("Nominal levels must lie in (0, 1)")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise InvalidParameterError("Nominal levels must be strictly increasing")
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")

        if isinstance(self.bandwidth_rule, str):
            if self.bandwidth_rule not in BANDWIDTH_RULES:
                raise InvalidParameterError(f"Unknown bandwidth rule {self.bandwidth_rule!r}")
            selector = BANDWIDTH_RULES[self.bandwidth_rule][0]
            wants_rot = self.kind in DENSITY_KINDS
            if (selector == "rot") != wants_rot:
                raise InvalidParameterError(
                    f"Rule {self.bandwidth_rule!r} does not apply to {self.kind.value}"
                )
        elif not self.bandwidth_rule > 0:
            raise InvalidParameterError("A fixed bandwidth must be positive")

        if self.band_kind is BandKind.variable and self.kind is not ScenarioKind.density_1d:
            raise InvalidParameterError("Variable-width bands exist for density_1d only")

    @property
    def dimension(self) -> int:
        return 2 if self.kind is ScenarioKind.levelset_2d else 1

    def grid(self) -> EvalGrid:
        lower, upper = DESIGN_BOUNDS[self.kind]
        return EvalGrid.from_range(lower, upper, self.grid_size)


@dataclass(frozen=True)
class CoverageRow:
    method: str
    nominal: float
    hits: int
    trials: int

    @property
    def coverage(self) -> float:
        return self.hits / self.trials

    @property
    def standard_error(self) -> float:
        c = self.coverage
        return float(np.sqrt(c * (1.0 - c) / self.trials))


@dataclass(frozen=True)
class CoverageReport:
    scenario: Scenario
    rows: List[CoverageRow]
    completed_trials: int
    failed_trials: int
    dropped_replicates_total: int
    dropped_replicates_max: int
    mean_bandwidth: float

    def coverage(self, method: str) -> List[float]:
        return [row.coverage for row in self.rows if row.method == method]


@dataclass
class TrialOutcome:
    hits: Dict[str, List[bool]] = field(default_factory=dict)
    dropped: int = 0
    h: float = float("nan")
    error: Optional[str] = None


class Simulation:
    @staticmethod
    def gen_density_1d(n: int, rng: np.random.Generator, return_labels: bool = False):
        """n draws from 0.6 N(0, 1) + 0.4 N(4, 1)"""
        labels = (rng.random(n) >= MIXTURE_1D_WEIGHTS[0]).astype(int)
        points = np.asarray(MIXTURE_1D_MEANS)[labels] + rng.standard_normal(n)
        sample = Sample(points)
        return (sample, labels) if return_labels else sample

    @staticmethod
    def true_density_1d(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(
            w * norm.pdf(x, loc=mu) for w, mu in zip(MIXTURE_1D_WEIGHTS, MIXTURE_1D_MEANS)
        )

    @staticmethod
    def gen_levelset_2d(n: int, rng: np.random.Generator) -> Sample:
        """Equal-weight mixture of three N(mu_k, 0.3^2 I_2) components"""
        labels = rng.integers(0, MIXTURE_2D_MEANS.shape[0], size=n)
        points = MIXTURE_2D_MEANS[labels] + MIXTURE_2D_SD * rng.standard_normal((n, 2))
        return Sample(points)

    @staticmethod
    def true_density_2d(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        variance = MIXTURE_2D_SD**2
        total = np.zeros(np.broadcast(x, y).shape)
        for mx, my in MIXTURE_2D_MEANS:
            squared = (x - mx) ** 2 + (y - my) ** 2
            total = total + np.exp(-squared / (2 * variance)) / (2 * np.pi * variance)
        return total / MIXTURE_2D_MEANS.shape[0]

    @staticmethod
    def gen_regression_sine(n: int, rng: np.random.Generator) -> PairedSample:
        """X ~ Unif[0, 1], Y = sin(pi X) + N(0, 0.1^2)"""
        x = rng.random(n)
        return PairedSample(x, Simulation.true_regression_sine(x) + SINE_NOISE_SD * rng.standard_normal(n))

    @staticmethod
    def true_regression_sine(x: np.ndarray) -> np.ndarray:
        return np.sin(np.pi * np.asarray(x, dtype=float))

    @staticmethod
    def gen_invreg_exp(n: int, rng: np.random.Generator) -> PairedSample:
        """X ~ Unif[0, 1], Y = 1 - exp(-X) + N(0, 0.2^2); r(x) = 0.5 at x = log 2"""
        x = rng.random(n)
        return PairedSample(x, Simulation.true_regression_invreg(x) + INVREG_NOISE_SD * rng.standard_normal(n))

    @staticmethod
    def true_regression_invreg(x: np.ndarray) -> np.ndarray:
        return 1.0 - np.exp(-np.asarray(x, dtype=float))

    @staticmethod
    def generate(kind: ScenarioKind, n: int, rng: np.random.Generator):
        generators = {
            ScenarioKind.density_1d: Simulation.gen_density_1d,
            ScenarioKind.levelset_2d: Simulation.gen_levelset_2d,
            ScenarioKind.regression_sine: Simulation.gen_regression_sine,
            ScenarioKind.invreg_exp: Simulation.gen_invreg_exp,
        }
        return generators[ScenarioKind(kind)](n, rng)

    @staticmethod
    def truth_function(kind: ScenarioKind) -> Callable[[np.ndarray], np.ndarray]:
        """Truth as a function of an (m, d) array of points"""
        kind = ScenarioKind(kind)
        if kind is ScenarioKind.density_1d:
            return lambda points: Simulation.true_density_1d(points[:, 0])
        if kind is ScenarioKind.levelset_2d:
            return lambda points: Simulation.true_density_2d(points[:, 0], points[:, 1])
        if kind is ScenarioKind.regression_sine:
            return lambda points: Simulation.true_regression_sine(points[:, 0])
        return lambda points: Simulation.true_regression_invreg(points[:, 0])

    @staticmethod
    def true_set(scenario: Scenario) -> PointSet:
        """Analytic level set or root set, discretized 4x finer than the estimation grid"""
        if scenario.kind is ScenarioKind.invreg_exp:
            return PointSet(np.array([[INVREG_ROOT]]))
        if scenario.kind is not ScenarioKind.levelset_2d:
            raise InvalidParameterError(f"{scenario.kind.value} has no reference set")
        fine = scenario.grid().refine(TRUTH_REFINEMENT)
        truth = Simulation.truth_function(scenario.kind)(fine.points)
        return LevelSet.extract_level_set_2d(truth, fine, scenario.level)

    @staticmethod
    def check_band_covers(
        band: ConfidenceBand,
        truth: Callable[[np.ndarray], np.ndarray],
        grid: Optional[EvalGrid] = None,
    ) -> bool:
        """lower <= truth <= upper at every grid point where the band is defined"""
        grid = grid or band.grid
        values = np.asarray(truth(grid.points), dtype=float).reshape(band.center.shape)
        defined = np.isfinite(band.lower) & np.isfinite(band.upper)
        inside = (band.lower <= values) & (values <= band.upper)
        return bool(np.all(inside[defined]))

    @staticmethod
    def check_set_covers(region: RegionSet, true_set: PointSet) -> bool:
        return LevelSet.dilation_covers(region.center, region.radius, true_set)

    @staticmethod
    def select_bandwidth(scenario: Scenario, data, trial: int) -> float:
        if not isinstance(scenario.bandwidth_rule, str):
            return float(scenario.bandwidth_rule)
        selector, factor = BANDWIDTH_RULES[scenario.bandwidth_rule]
        if selector == "rot":
            return Bandwidth.rule_of_thumb(data).h * factor
        seed = RandomStreams.derive_seed(scenario.seed, RandomStreams.CROSS_VALIDATION, trial)
        choice = Bandwidth.kfold_cv_bandwidth(
            data, scenario.cv_folds, scenario.cv_repeats, seed=seed
        )
        return choice.h * factor

    @staticmethod
    def run_trial(
        scenario: Scenario, grid: EvalGrid, true_set: Optional[PointSet], trial: int
    ) -> TrialOutcome:
        """One Monte-Carlo trial; estimation failures are reported, not raised"""
        outcome = TrialOutcome()
        try:
            _run_trial(scenario, grid, true_set, trial, outcome)
        except DebiasError as error:
            outcome.error = str(error)
            log.debug(f"Trial {trial} failed: {error}")
        return outcome

    @staticmethod
    def run_coverage_study(scenario: Scenario, workers: Optional[int] = None) -> CoverageReport:
        """Empirical coverage of the bands or sets over scenario.trials trials

        Raises:
            ReplicateBudgetError: When more than 10% of the trials fail
        """
        grid = scenario.grid()
        true_set = None
        if scenario.kind in (ScenarioKind.levelset_2d, ScenarioKind.invreg_exp):
            true_set = Simulation.true_set(scenario)

        log.info(
            f"Coverage study {scenario.kind.value}: n={scenario.n}, B={scenario.B},"
            f" trials={scenario.trials}, estimator={scenario.estimator.value}"
        )
        target = partial(Simulation.run_trial, scenario, grid, true_set)
        outcomes = ReplicatePool(workers).map(target, range(scenario.trials))

        completed = [outcome for outcome in outcomes if outcome.error is None]
        failed = len(outcomes) - len(completed)
        if failed:
            log.warning(f"{failed} of {len(outcomes)} trials failed")
        if not completed or failed > FAILED_TRIAL_BUDGET * len(outcomes):
            raise ReplicateBudgetError(
                f"{failed} of {len(outcomes)} trials failed (budget {FAILED_TRIAL_BUDGET:.0%})"
            )

        rows = []
        for method in completed[0].hits:
            for index, nominal in enumerate(scenario.nominal_levels):
                hits = sum(bool(outcome.hits[method][index]) for outcome in completed)
                rows.append(CoverageRow(method, nominal, hits, len(completed)))

        dropped = [outcome.dropped for outcome in completed]
        return CoverageReport(
            scenario=scenario,
            rows=rows,
            completed_trials=len(completed),
            failed_trials=failed,
            dropped_replicates_total=int(sum(dropped)),
            dropped_replicates_max=int(max(dropped)),
            mean_bandwidth=float(np.mean([outcome.h for outcome in completed])),
        )

    @staticmethod
    def illustrate(
        kind: ScenarioKind,
        n: int,
        seed: int = config.DEFAULT_SEED,
        B: int = config.DEFAULT_BOOTSTRAP_REPLICATES,
        alpha: float = config.DEFAULT_ALPHA,
        workers: Optional[int] = 1,
    ) -> Dict[str, object]:
        """Data behind a single-instance picture: truth, plain band and debiased band"""
        kind = ScenarioKind(kind)
        if kind not in (ScenarioKind.density_1d, ScenarioKind.regression_sine):
            raise InvalidParameterError("Illustrations exist for density_1d and regression_sine")
        rule = "rot" if kind is ScenarioKind.density_1d else "cv"
        scenario = Scenario(kind=kind, n=n, bandwidth_rule=rule, B=B, trials=1, seed=seed)
        grid = scenario.grid()
        data = Simulation.generate(kind, n, RandomStreams.stream(seed, RandomStreams.DATA, 0))
        h = Simulation.select_bandwidth(scenario, data, 0)
        cfg = BootstrapConfig(B=B, alpha=alpha, seed=seed)
        kernel = KernelSpec()

        bands = {}
        for name, debiased in (("plain", False), ("debiased", True)):
            if kind is ScenarioKind.density_1d:
                bands[name] = Bootstrap.density_confidence_band(
                    data, h, scenario.tau, kernel, grid, cfg, debiased, workers
                )
            else:
                bands[name] = Bootstrap.regression_confidence_band(
                    data, h, scenario.tau, kernel, grid, cfg, debiased, workers
                )
        return {
            "h": h,
            "grid": grid,
            "truth": Simulation.truth_function(kind)(grid.points),
            "bands": bands,
        }


def _level_alphas(scenario: Scenario) -> List[float]:
    return [1.0 - nominal for nominal in scenario.nominal_levels]


def _run_trial(
    scenario: Scenario,
    grid: EvalGrid,
    true_set: Optional[PointSet],
    trial: int,
    outcome: TrialOutcome,
):
    rng = RandomStreams.stream(scenario.seed, RandomStreams.DATA, trial)
    data = Simulation.generate(scenario.kind, scenario.n, rng)
    h = Simulation.select_bandwidth(scenario, data, trial)
    outcome.h = h

    kernel = KernelSpec(dimension=scenario.dimension)
    debiased = scenario.estimator is Estimator.debiased
    seed = RandomStreams.derive_seed(scenario.seed, RandomStreams.TRIAL, trial)
    alphas = _level_alphas(scenario)
    truth = Simulation.truth_function(scenario.kind)

    def config_for(metric: Metric) -> BootstrapConfig:
        return BootstrapConfig(B=scenario.B, alpha=alphas[0], seed=seed, metric=metric)

    if scenario.kind is ScenarioKind.density_1d:
        metric = Metric.weighted_sup if scenario.band_kind is BandKind.variable else Metric.sup
        band = Bootstrap.density_confidence_band(
            data, h, scenario.tau, kernel, grid, config_for(metric), debiased
        )
        outcome.dropped = band.quantile.dropped
        outcome.hits["band"] = [
            Simulation.check_band_covers(band.at_level(a), truth) for a in alphas
        ]

    elif scenario.kind is ScenarioKind.regression_sine:
        band = Bootstrap.regression_confidence_band(
            data, h, scenario.tau, kernel, grid, config_for(Metric.sup), debiased
        )
        outcome.dropped = band.quantile.dropped
        outcome.hits["band"] = [
            Simulation.check_band_covers(band.at_level(a), truth) for a in alphas
        ]

    elif scenario.kind is ScenarioKind.levelset_2d:
        region = Bootstrap.levelset_confidence_set(
            data, scenario.level, h, scenario.tau, kernel, grid,
            config_for(Metric.hausdorff), debiased,
        )
        outcome.dropped = region.quantile.dropped
        outcome.hits["set"] = [
            Simulation.check_set_covers(region.at_level(a), true_set) for a in alphas
        ]

    else:
        region = Bootstrap.invreg_confidence_set(
            data, scenario.r0, h, scenario.tau, kernel, grid,
            config_for(Metric.hausdorff), debiased,
        )
        outcome.dropped = region.quantile.dropped
        outcome.hits["set"] = [
            Simulation.check_set_covers(region.at_level(a), true_set) for a in alphas
        ]

        center_root = Bootstrap.center_root(region)
        intervals = [
            Bootstrap.invreg_normal_ci(center_root, region.replicate_sets, a) for a in alphas
        ]
        outcome.hits["normal_ci"] = [i.lower <= INVREG_ROOT <= i.upper for i in intervals]

        if scenario.invreg_inversion:
            band = Bootstrap.regression_confidence_band(
                data, h, scenario.tau, kernel, grid, config_for(Metric.sup), debiased
            )
            fitted_at_root = np.interp(INVREG_ROOT, grid.axes[0], band.center)
            outcome.hits["inversion"] = [
                bool(abs(fitted_at_root - scenario.r0) < band.at_level(a).t_hat)
                for a in alphas
            ]

