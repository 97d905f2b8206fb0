"""Parametric short-axis phantom geometry and frame rasterisation.

Each slice shows the LV as a myocardial annulus (class 2) around the blood
pool (class 1) and the RV blood pool (class 3) as a crescent hugging the
septal (low-column) side of the LV. Radii follow a smooth systolic profile;
septal flash pushes the septal wall towards the LV centre in early systole;
the hidden response factor delays the contraction of the lateral wall.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import RejectedInputError
from ..models.phantom import BACKGROUND, LV_BLOOD, LV_MYO, RV_BLOOD, GenerativeFactors, SegFrame

ES_PHASE = 0.35
SF_ONSET = 0.02
SF_END = 0.2
SF_RAMP = 0.04            # cosine taper at each end of the septal flash plateau
MAX_SHRINK = 0.4          # endocardial ES radius = ED radius * (1 - MAX_SHRINK * amplitude)
WALL_RATIO = 1.45         # epicardial / endocardial radius at ED
EPI_FOLLOW = 0.1          # fraction of endocardial motion followed by the epicardium
SLICE_TAPER = 0.08        # radius reduction per slice towards the apex
MAX_LATERAL_DELAY = 0.25  # lateral time-to-peak delay at hidden_factor = 1
RV_OFFSET = 0.9           # RV centre offset from LV centre, in epicardial radii
RV_AXES = (1.0, 1.5)      # RV semi-axes (columns, rows), in epicardial radii
RV_SHRINK = 0.2


def contraction_profile(phase: np.ndarray | float) -> np.ndarray:
    """Piecewise cosine: 0 at phase 0, 1 at ES (0.35), back to 0 at phase 1."""
    p = np.asarray(phase, dtype=np.float64)
    rising = 0.5 * (1.0 - np.cos(np.pi * p / ES_PHASE))
    falling = 0.5 * (1.0 + np.cos(np.pi * (p - ES_PHASE) / (1.0 - ES_PHASE)))
    return np.where(p <= ES_PHASE, rising, falling)


def delayed_phase(phase: np.ndarray | float, delay: float) -> np.ndarray:
    """Piecewise-linear warp moving the ES peak from 0.35 to 0.35 + delay; fixes 0 and 1."""
    p = np.asarray(phase, dtype=np.float64)
    peak = ES_PHASE + delay
    early = p * ES_PHASE / peak
    late = ES_PHASE + (p - peak) * (1.0 - ES_PHASE) / (1.0 - peak)
    return np.where(p <= peak, early, late)


def septal_flash_bump(phase: np.ndarray | float) -> np.ndarray:
    """
    Tapered cosine supported on [0.02, 0.2].

    Rises over the first SF_RAMP of the support, holds 1 and falls over the
    last SF_RAMP, so the septum stays displaced through most of early systole.
    """
    p = np.asarray(phase, dtype=np.float64)
    rise = np.clip((p - SF_ONSET) / SF_RAMP, 0.0, 1.0)
    fall = np.clip((SF_END - p) / SF_RAMP, 0.0, 1.0)
    bump = 0.5 * (1.0 - np.cos(np.pi * np.minimum(rise, fall)))
    return np.where((p >= SF_ONSET) & (p <= SF_END), bump, 0.0)


@dataclass(frozen=True)
class SliceGeometry:
    """End-diastolic geometry of one slice (pixel units, x = column, y = row)."""
    center_x: float
    center_y: float
    endo_radius: float
    epi_radius: float

    @property
    def rv_center_x(self) -> float:
        return self.center_x - RV_OFFSET * self.epi_radius

    @property
    def rv_axes(self) -> tuple[float, float]:
        return RV_AXES[0] * self.epi_radius, RV_AXES[1] * self.epi_radius

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(x_min, x_max, y_min, y_max) over all phases (ED is the largest extent)."""
        ax, ay = self.rv_axes
        x_min = min(self.center_x - self.epi_radius, self.rv_center_x - ax)
        x_max = max(self.center_x + self.epi_radius, self.rv_center_x + ax)
        y_min = self.center_y - max(self.epi_radius, ay)
        y_max = self.center_y + max(self.epi_radius, ay)
        return x_min, x_max, y_min, y_max


@dataclass(frozen=True)
class PhantomGeometry:
    """Everything render_frame needs for one subject."""
    slices: tuple[SliceGeometry, ...]
    height: int
    width: int
    contraction_amplitude: float
    sf_amplitude: float
    lateral_delay: float

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.slices), self.height, self.width

    def check_bounds(self) -> None:
        for index, geom in enumerate(self.slices):
            x_min, x_max, y_min, y_max = geom.bounding_box()
            if x_min < 0 or y_min < 0 or x_max > self.width - 1 or y_max > self.height - 1:
                raise RejectedInputError(
                    f"slice {index} geometry out of bounds: x in [{x_min:.1f}, {x_max:.1f}], "
                    f"y in [{y_min:.1f}, {y_max:.1f}] for a {self.height}x{self.width} grid"
                )


def geometry_from_factors(
    factors: GenerativeFactors, slices: int = 3, height: int = 80, width: int = 80
) -> PhantomGeometry:
    """Derive per-slice geometry from the generative factors and validate it fits the grid."""
    if not 0.0 <= factors.contraction_amplitude <= 1.0:
        raise RejectedInputError("contraction_amplitude must lie in [0, 1]")
    if not 0.0 <= factors.hidden_factor <= 1.0:
        raise RejectedInputError("hidden_factor must lie in [0, 1]")
    if factors.sf_amplitude < 0:
        raise RejectedInputError("sf_amplitude must be >= 0")
    if factors.base_radius <= 0:
        raise RejectedInputError("base_radius must be positive")

    slice_geoms = []
    for s in range(slices):
        endo = factors.base_radius * (1.0 - SLICE_TAPER * s)
        if endo <= 0:
            raise RejectedInputError(f"slice {s} radius is not positive")
        slice_geoms.append(
            SliceGeometry(
                center_x=factors.center_x,
                center_y=factors.center_y,
                endo_radius=endo,
                epi_radius=endo * WALL_RATIO,
            )
        )
    geom = PhantomGeometry(
        slices=tuple(slice_geoms),
        height=height,
        width=width,
        contraction_amplitude=factors.contraction_amplitude,
        sf_amplitude=factors.sf_amplitude,
        lateral_delay=MAX_LATERAL_DELAY * factors.hidden_factor,
    )
    geom.check_bounds()
    return geom


def _pixel_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.mgrid[0:height, 0:width]
    return rows.astype(np.float64), cols.astype(np.float64)


def _render_slice(
    geom: SliceGeometry,
    phantom: PhantomGeometry,
    phase: float,
    rows: np.ndarray,
    cols: np.ndarray,
) -> np.ndarray:
    dx = cols - geom.center_x
    dy = rows - geom.center_y
    band = 0.5 * geom.epi_radius

    # Septal flash: horizontal shift of the septal half, flat over the central rows.
    shift = phantom.sf_amplitude * float(septal_flash_bump(phase))
    if shift > 0:
        w_x = np.clip(-dx / band, 0.0, 1.0)
        w_y = np.clip((geom.epi_radius - np.abs(dy)) / band, 0.0, 1.0)
        dx = dx - shift * w_x * w_y

    rho = np.hypot(dx, dy)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_theta = np.where(rho > 0, dx / rho, 0.0)
    lateral = np.clip(cos_theta, 0.0, 1.0) ** 2

    on_time = float(contraction_profile(phase))
    late = float(contraction_profile(delayed_phase(phase, phantom.lateral_delay)))
    contraction = (1.0 - lateral) * on_time + lateral * late

    stroke = MAX_SHRINK * phantom.contraction_amplitude * geom.endo_radius
    endo = geom.endo_radius - stroke * contraction
    epi = geom.epi_radius - EPI_FOLLOW * stroke * contraction

    ax, ay = geom.rv_axes
    rv_scale = 1.0 - RV_SHRINK * phantom.contraction_amplitude * on_time
    rv = ((cols - geom.rv_center_x) / (ax * rv_scale)) ** 2 + (dy / (ay * rv_scale)) ** 2 < 1.0

    labels = np.full(rows.shape, BACKGROUND, dtype=np.uint8)
    lv_wall = rho < epi
    labels[rv & ~lv_wall] = RV_BLOOD
    labels[lv_wall] = LV_MYO
    labels[rho < endo] = LV_BLOOD
    return labels


def render_frame(geom: PhantomGeometry, phase: float) -> SegFrame:
    """
    Rasterise all slices of one frame.

    Args:
        geom: Subject geometry (see geometry_from_factors)
        phase: Cardiac phase in [0, 1)

    Returns:
        (S, H, W) uint8 label map
    """
    if not 0.0 <= phase < 1.0:
        raise RejectedInputError(f"phase must lie in [0, 1), got {phase}")
    rows, cols = _pixel_grid(geom.height, geom.width)
    return np.stack([_render_slice(s, geom, phase, rows, cols) for s in geom.slices])


def render_sequence(geom: PhantomGeometry, phases: np.ndarray) -> np.ndarray:
    """(T, S, H, W) labels for the given phases."""
    rows, cols = _pixel_grid(geom.height, geom.width)
    return np.stack(
        [np.stack([_render_slice(s, geom, float(p), rows, cols) for s in geom.slices]) for p in phases]
    )
