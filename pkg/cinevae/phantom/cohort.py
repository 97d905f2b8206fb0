"""Phantom subjects, labeled cohorts and the unlabeled pretraining pool.

The primary label of a subject is a noisy threshold on
``hidden_factor + a * sf_amplitude``. The threshold and the SF weight ``a``
are solved once per CohortSpec so that P(responder), P(SF | responder) and
P(SF | non-responder) match the requested mixture in expectation.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Mapping, Optional, Union

import numpy as np
from pydantic import ValidationError
from scipy import integrate, optimize, stats

from ..config import CohortSpec
from ..errors import DegenerateInputError, RejectedInputError
from ..models.phantom import GenerativeFactors, LabeledSubject, SegSequence, uniform_phases
from ..utils.logging import get_logger
from .geometry import geometry_from_factors, render_sequence

logger = get_logger("cinevae.phantom")

REFERENCE_GRID = 80
NOISE_STREAM = 1
MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class FactorRanges:
    """Sampling ranges in pixels of an 80x80 grid (scaled to other grid sizes)."""
    radius: tuple[float, float]
    center: tuple[float, float]
    center_jitter: float
    contraction: tuple[float, float]
    sf_amplitude: tuple[float, float]


COHORT_RANGES = FactorRanges(
    radius=(10.0, 12.0),
    center=(46.0, 40.0),
    center_jitter=2.0,
    contraction=(0.6, 1.0),
    sf_amplitude=(2.5, 4.0),
)

POOL_RANGES = FactorRanges(
    radius=(8.0, 13.0),
    center=(46.0, 40.0),
    center_jitter=4.0,
    contraction=(0.3, 1.0),
    sf_amplitude=(1.0, 4.0),
)
POOL_SF_PROBABILITY = 0.5


def _p_above(threshold: float, noise_scale: float) -> float:
    """P(U + noise_scale * eps > threshold) for U ~ U(0, 1), eps ~ N(0, 1)."""
    if noise_scale == 0:
        return float(np.clip(1.0 - threshold, 0.0, 1.0))

    def g(x: float) -> float:
        return x * stats.norm.cdf(x) + stats.norm.pdf(x)

    n = noise_scale
    return float(n * (g((1.0 - threshold) / n) - g(-threshold / n)))


@dataclass(frozen=True)
class ResponseModel:
    """y = 1[hidden_factor + sf_weight * sf_amplitude + noise_scale * eps > threshold]."""
    sf_weight: float
    threshold: float
    noise_scale: float

    def score(self, factors: GenerativeFactors, seed: int) -> float:
        eps = np.random.default_rng([seed, NOISE_STREAM]).standard_normal()
        return (
            factors.hidden_factor
            + self.sf_weight * factors.sf_amplitude
            + self.noise_scale * float(eps)
        )

    def label(self, factors: GenerativeFactors, seed: int) -> int:
        return int(self.score(factors, seed) > self.threshold)


def sf_probability(spec: CohortSpec) -> float:
    return (
        spec.p_responder * spec.p_sf_given_responder
        + (1.0 - spec.p_responder) * spec.p_sf_given_nonresponder
    )


@lru_cache(maxsize=32)
def _calibrate(
    p_responder: float,
    p_sf_r: float,
    p_sf_nr: float,
    noise_scale: float,
    sf_low: float,
    sf_high: float,
) -> ResponseModel:
    p_sf = p_responder * p_sf_r + (1.0 - p_responder) * p_sf_nr
    eps = 1e-9
    n = noise_scale
    t_lo, t_hi = -12.0 * n - 1e-3, 1.0 + 12.0 * n + 1e-3

    def solve_threshold(target: float) -> float:
        target = float(np.clip(target, eps, 1.0 - eps))
        if n == 0:
            return 1.0 - target
        return float(optimize.brentq(lambda t: _p_above(t, n) - target, t_lo, t_hi, xtol=1e-12))

    if p_sf <= 0.0 or p_sf >= 1.0:
        # One SF class only: SF carries no information about the response.
        return ResponseModel(sf_weight=0.0, threshold=solve_threshold(p_responder), noise_scale=n)

    q_no_sf = p_responder * (1.0 - p_sf_r) / (1.0 - p_sf)
    q_sf = float(np.clip(p_responder * p_sf_r / p_sf, eps, 1.0 - eps))
    threshold = solve_threshold(q_no_sf)
    width = sf_high - sf_low

    def p_sf_response(a: float) -> float:
        value, _ = integrate.quad(lambda amp: _p_above(threshold - a * amp, n), sf_low, sf_high)
        return value / width

    reach = (abs(threshold) + 2.0 + 24.0 * n) / sf_low
    sf_weight = optimize.brentq(lambda a: p_sf_response(a) - q_sf, -reach, reach, xtol=1e-12)
    return ResponseModel(sf_weight=float(sf_weight), threshold=threshold, noise_scale=n)


def calibrate_response(spec: CohortSpec, ranges: FactorRanges = COHORT_RANGES) -> ResponseModel:
    """Solve the threshold and SF weight matching the requested class mixture."""
    return _calibrate(
        spec.p_responder,
        spec.p_sf_given_responder,
        spec.p_sf_given_nonresponder,
        spec.noise_scale,
        ranges.sf_amplitude[0],
        ranges.sf_amplitude[1],
    )


def subject_seeds(seed: int, n: int, attempt: int = 0) -> list[int]:
    """Per-subject 64-bit seeds spawned from (master seed, attempt)."""
    children = np.random.SeedSequence([seed, attempt]).spawn(n)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def draw_factors(
    seed: int,
    p_sf: float,
    ranges: FactorRanges,
    height: int = REFERENCE_GRID,
    width: int = REFERENCE_GRID,
) -> GenerativeFactors:
    """Draw one subject's factors from its own seed."""
    rng = np.random.default_rng(seed)
    scale = min(height, width) / REFERENCE_GRID
    has_sf = rng.random() < p_sf
    sf_amplitude = rng.uniform(*ranges.sf_amplitude) * scale
    jitter = rng.uniform(-ranges.center_jitter, ranges.center_jitter, size=2) * scale
    return GenerativeFactors(
        contraction_amplitude=float(rng.uniform(*ranges.contraction)),
        sf_amplitude=float(sf_amplitude) if has_sf else 0.0,
        hidden_factor=float(rng.uniform(0.0, 1.0)),
        base_radius=float(rng.uniform(*ranges.radius) * scale),
        center_x=float(ranges.center[0] * width / REFERENCE_GRID + jitter[0]),
        center_y=float(ranges.center[1] * height / REFERENCE_GRID + jitter[1]),
    )


@dataclass(frozen=True)
class CohortDraw:
    """Factors, seed and labels of one cohort subject, before rendering."""
    factors: GenerativeFactors
    seed: int
    y: int

    @property
    def y_sf(self) -> int:
        return int(self.factors.sf_amplitude > 0)


def _coerce_spec(spec: Union[CohortSpec, Mapping[str, Any]]) -> CohortSpec:
    if isinstance(spec, CohortSpec):
        return spec
    try:
        return CohortSpec.model_validate(dict(spec))
    except ValidationError as e:
        raise RejectedInputError(f"invalid cohort spec: {e.errors()[0]['msg']}") from e


def sample_cohort(
    spec: Union[CohortSpec, Mapping[str, Any]],
    seed: int,
    height: int = REFERENCE_GRID,
    width: int = REFERENCE_GRID,
) -> list[CohortDraw]:
    """
    Draw factors and labels for a whole cohort without rendering.

    A draw that lands on a single primary class is repeated with the next
    attempt index, so the result still depends on the seed only.

    Raises:
        RejectedInputError: spec does not validate
        DegenerateInputError: no two-class cohort within MAX_ATTEMPTS attempts
    """
    spec = _coerce_spec(spec)
    response = calibrate_response(spec)
    p_sf = sf_probability(spec)
    for attempt in range(MAX_ATTEMPTS):
        draws = []
        for subject_seed in subject_seeds(seed, spec.n_subjects, attempt):
            factors = draw_factors(subject_seed, p_sf, COHORT_RANGES, height, width)
            draws.append(CohortDraw(factors, subject_seed, response.label(factors, subject_seed)))
        labels = {d.y for d in draws}
        if labels == {0, 1}:
            return draws
        logger.debug(f"Cohort attempt {attempt} drew a single class; redrawing")
    raise DegenerateInputError(
        f"no cohort with both primary classes after {MAX_ATTEMPTS} attempts"
    )


def generate_subject(
    factors: GenerativeFactors,
    T: int,
    seed: int,
    response: Optional[ResponseModel] = None,
    slices: int = 3,
    height: int = REFERENCE_GRID,
    width: int = REFERENCE_GRID,
) -> LabeledSubject:
    """
    Render one labeled subject.

    Args:
        factors: Planted generative factors
        T: Frames per cardiac cycle (>= 2)
        seed: Subject seed (drives the response noise)
        response: Calibrated response model (default CohortSpec when None)
        slices, height, width: Output grid

    Returns:
        LabeledSubject with y from the response model and y_k = [y_sf]
    """
    if T < 2:
        raise RejectedInputError(f"T must be >= 2, got {T}")
    response = response or calibrate_response(CohortSpec())
    geom = geometry_from_factors(factors, slices, height, width)
    phases = uniform_phases(T)
    sequence = SegSequence(render_sequence(geom, phases), phases)
    y_sf = int(factors.sf_amplitude > 0)
    return LabeledSubject(
        sequence=sequence,
        y=response.label(factors, seed),
        y_k=[y_sf],
        factors=factors,
        seed=seed,
    )


def generate_cohort(
    spec: Union[CohortSpec, Mapping[str, Any]],
    T: int,
    seed: int,
    slices: int = 3,
    height: int = REFERENCE_GRID,
    width: int = REFERENCE_GRID,
) -> list[LabeledSubject]:
    """Render a labeled cohort; subject seeds are spawned from the master seed."""
    spec = _coerce_spec(spec)
    response = calibrate_response(spec)
    draws = sample_cohort(spec, seed, height, width)
    subjects = [
        generate_subject(d.factors, T, d.seed, response, slices, height, width) for d in draws
    ]
    responders = sum(s.y for s in subjects if s.y is not None)
    sf_count = sum(s.y_sf for s in subjects)
    logger.info(
        f"Generated cohort: {len(subjects)} subjects, {responders} responders, {sf_count} with SF"
    )
    return subjects


def generate_pretrain_subjects(
    n: int,
    T: int,
    seed: int,
    slices: int = 3,
    height: int = REFERENCE_GRID,
    width: int = REFERENCE_GRID,
) -> list[LabeledSubject]:
    """Unlabeled pool subjects (y is None, no concept labels) with their factors and seeds."""
    if n < 1:
        raise RejectedInputError(f"pool size must be >= 1, got {n}")
    if T < 2:
        raise RejectedInputError(f"T must be >= 2, got {T}")
    phases = uniform_phases(T)
    subjects = []
    for subject_seed in subject_seeds(seed, n):
        factors = draw_factors(subject_seed, POOL_SF_PROBABILITY, POOL_RANGES, height, width)
        geom = geometry_from_factors(factors, slices, height, width)
        subjects.append(
            LabeledSubject(
                sequence=SegSequence(render_sequence(geom, phases), phases),
                y=None,
                y_k=[],
                factors=factors,
                seed=subject_seed,
            )
        )
    logger.info(f"Generated pretraining pool: {n} subjects")
    return subjects


def generate_pretrain_pool(n: int, T: int, seed: int) -> list[SegSequence]:
    """Unlabeled sequences with broader geometric variation than the cohort."""
    return [s.sequence for s in generate_pretrain_subjects(n, T, seed)]
