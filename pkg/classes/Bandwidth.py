"""Bandwidth selectors: Silverman's rule of thumb, least-squares CV for densities and
repeated k-fold CV of the local linear smoother for regression."""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

import config
from classes.DensityEstimator import DensityEstimator
from classes.Errors import InvalidParameterError
from classes.EvalGrid import EvalGrid
from classes.Kernel import KernelSpec
from classes.LocalPolynomial import LocalPolynomial
from classes.RandomStreams import RandomStreams
from classes.Sample import PairedSample, Sample

TIE_TOLERANCE = 1e-12
CANDIDATE_COUNT = 20

log = config.log


class BandwidthMethod(str, Enum):
    rot = "rot"
    lscv = "lscv"
    kfold_cv = "kfold_cv"
    fixed = "fixed"


@dataclass(frozen=True)
class BandwidthChoice:
    h: float
    method: BandwidthMethod
    diagnostics: List[Tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "method", BandwidthMethod(self.method))
        if not np.isfinite(self.h) or self.h <= 0:
            raise InvalidParameterError(f"Bandwidth must be positive, got {self.h}")

    def scaled(self, factor: float) -> "BandwidthChoice":
        return BandwidthChoice(self.h * factor, self.method, list(self.diagnostics))


def _dispersion(values: np.ndarray) -> float:
    """min(sd, IQR / 1.34), falling back to sd when the IQR vanishes"""
    sd = np.std(values, ddof=1)
    q75, q25 = np.percentile(values, [75, 25])
    iqr = (q75 - q25) / 1.34
    return min(sd, iqr) if iqr > 0 else sd


def _select(candidates: Sequence[float], scores: Sequence[float], method) -> BandwidthChoice:
    """Argmin of the scores; ties within 1e-12 go to the smallest h"""
    candidates = np.asarray(candidates, dtype=float)
    scores = np.asarray(scores, dtype=float)
    finite = np.isfinite(scores)
    if not np.any(finite):
        raise InvalidParameterError(f"No candidate bandwidth has a finite {method.value} score")

    best = np.min(scores[finite])
    tied = finite & (scores <= best + TIE_TOLERANCE)
    h = float(np.min(candidates[tied]))
    diagnostics = [(float(c), float(s)) for c, s in zip(candidates, scores)]
    return BandwidthChoice(h=h, method=method, diagnostics=diagnostics)


def _check_candidates(candidates: Sequence[float]) -> np.ndarray:
    candidates = np.asarray(candidates, dtype=float).ravel()
    if candidates.size == 0 or np.any(~np.isfinite(candidates)) or np.any(candidates <= 0):
        raise InvalidParameterError("Candidate bandwidths must be positive and finite")
    return candidates


class Bandwidth:
    @staticmethod
    def rule_of_thumb(sample: Sample) -> BandwidthChoice:
        """Silverman's rule for d = 1, the normal-scale rule for d = 2

        Raises:
            InvalidParameterError: When the sample has no dispersion
        """
        n, d = sample.n, sample.d
        if d == 1:
            scale = _dispersion(sample.points[:, 0])
            h = 0.9 * scale * n ** (-0.2)
        else:
            sds = np.std(sample.points, axis=0, ddof=1)
            scale = float(np.exp(np.mean(np.log(sds)))) if np.all(sds > 0) else 0.0
            h = scale * (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4))

        if not np.isfinite(h) or h <= 0:
            raise InvalidParameterError("Sample has zero dispersion, no rule-of-thumb bandwidth")
        return BandwidthChoice(h=float(h), method=BandwidthMethod.rot)

    @staticmethod
    def default_lscv_candidates(sample: Sample) -> np.ndarray:
        """20 log-spaced values in [0.05, 1] times the data dispersion"""
        if sample.d == 1:
            scale = _dispersion(sample.points[:, 0])
        else:
            scale = float(np.exp(np.mean(np.log(np.std(sample.points, axis=0, ddof=1)))))
        return np.geomspace(0.05, 1.0, CANDIDATE_COUNT) * scale

    @staticmethod
    def lscv_score(sample: Sample, h: float, kernel: KernelSpec) -> float:
        """int p_h^2 - (2 / n) sum_i p_{h,-i}(X_i), the integral by trapezoid rule"""
        grid = EvalGrid.default_for(sample.points, h)
        estimate = DensityEstimator.kde_eval(sample, h, kernel, grid)
        squared = grid.integrate(estimate.values**2)
        return squared - 2.0 * float(np.mean(DensityEstimator.leave_one_out(sample, h, kernel)))

    @staticmethod
    def lscv_bandwidth(
        sample: Sample,
        candidates: Optional[Sequence[float]] = None,
        kernel: Optional[KernelSpec] = None,
    ) -> BandwidthChoice:
        """Least-squares cross-validated bandwidth among the candidates"""
        kernel = kernel or KernelSpec(dimension=sample.d)
        if candidates is None:
            candidates = Bandwidth.default_lscv_candidates(sample)
        candidates = _check_candidates(candidates)
        scores = [Bandwidth.lscv_score(sample, h, kernel) for h in candidates]
        choice = _select(candidates, scores, BandwidthMethod.lscv)
        log.debug(f"LSCV selected h={choice.h:.6g}")
        return choice

    @staticmethod
    def default_cv_candidates(ps: PairedSample) -> np.ndarray:
        """20 log-spaced values in [0.25, 4] times range / 10 * n^(-1/5)"""
        base = np.ptp(ps.x) / 10.0 * ps.n ** (-0.2)
        return np.geomspace(0.25, 4.0, CANDIDATE_COUNT) * base

    @staticmethod
    def kfold_cv_bandwidth(
        ps: PairedSample,
        folds: int = config.DEFAULT_CV_FOLDS,
        repeats: int = config.DEFAULT_CV_REPEATS,
        candidates: Optional[Sequence[float]] = None,
        seed: int = config.DEFAULT_SEED,
        kernel: Optional[KernelSpec] = None,
    ) -> BandwidthChoice:
        """Repeated k-fold CV of the local linear smoother.

        Rows are first put in a canonical order (sorted by x, then y) and then
        shuffled with the stream for (seed, repeat), so the choice does not
        depend on the input row order. Held-out points with a degenerate fit
        are skipped; a candidate with no usable prediction scores +inf.
        """
        if folds < 2:
            raise InvalidParameterError(f"folds must be at least 2, got {folds}")
        if repeats < 1:
            raise InvalidParameterError(f"repeats must be at least 1, got {repeats}")
        if ps.n < 2 * folds:
            raise InvalidParameterError(f"Need at least {2 * folds} rows for {folds}-fold CV")
        kernel = kernel or KernelSpec()
        if candidates is None:
            candidates = Bandwidth.default_cv_candidates(ps)
        candidates = _check_candidates(candidates)

        order = np.lexsort((ps.y, ps.x))
        x, y = ps.x[order], ps.y[order]
        assignments = []
        for repeat in range(repeats):
            rng = RandomStreams.stream(seed, RandomStreams.CROSS_VALIDATION, repeat)
            fold_of = np.empty(ps.n, dtype=int)
            fold_of[rng.permutation(ps.n)] = np.arange(ps.n) % folds
            assignments.append(fold_of)

        scores = []
        for h in candidates:
            squared_errors = []
            for fold_of in assignments:
                for fold in range(folds):
                    held_out = fold_of == fold
                    try:
                        train = PairedSample(x[~held_out], y[~held_out])
                    except InvalidParameterError:
                        continue
                    predicted = LocalPolynomial.predict(train, x[held_out], h, kernel)
                    usable = np.isfinite(predicted)
                    squared_errors.append((predicted[usable] - y[held_out][usable]) ** 2)
            errors = np.concatenate(squared_errors) if squared_errors else np.empty(0)
            scores.append(float(np.mean(errors)) if errors.size else np.inf)

        choice = _select(candidates, scores, BandwidthMethod.kfold_cv)
        log.debug(f"{folds}-fold CV ({repeats} repeats) selected h={choice.h:.6g}")
        return choice
