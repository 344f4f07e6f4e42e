"""Analysis/synthesis window tables and their overlap-add gain maps.

Both window kinds are defined on pixel-center normalized coordinates
u = (2h + 1 - N) / N in (-1, 1), which makes even-sized tables exactly
symmetric.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, CoverageError
from .image import ImagePlanar

DEFAULT_GAUSSIAN_ALPHA = 0.3


class WindowKind(enum.Enum):
    RAISED_COSINE = "raised-cosine"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class WindowSpec:
    kind: WindowKind
    size: int
    alpha: float = DEFAULT_GAUSSIAN_ALPHA  # Gaussian STD in normalized coords

    def __post_init__(self):
        if self.size < 4:
            raise ConfigError(f"window size must be >= 4, got {self.size}")
        if self.alpha <= 0:
            raise ConfigError(f"window alpha must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class WindowTable:
    size: int
    values: np.ndarray  # (N, N) float64 in (0, 1]
    norm_sq: float = field(default=0.0)  # sum of squared values

    def __post_init__(self):
        object.__setattr__(self, "norm_sq", float(np.sum(self.values.astype(np.float64) ** 2)))


def _centered_coords(n: int) -> np.ndarray:
    return (2.0 * np.arange(n) + 1.0 - n) / n


def make_window(spec: WindowSpec) -> WindowTable:
    """Build the window table for a spec.

    Raised cosine: w = cos(pi*u/2) * cos(pi*v/2).
    Gaussian:      w = exp(-(u^2 + v^2) / (2*alpha^2)).
    """
    u = _centered_coords(spec.size)
    if spec.kind is WindowKind.RAISED_COSINE:
        axis = np.cos(np.pi * u / 2.0)
        values = np.outer(axis, axis)
    else:
        uu, vv = np.meshgrid(u, u, indexing="ij")
        values = np.exp(-(uu * uu + vv * vv) / (2.0 * spec.alpha * spec.alpha))
    return WindowTable(size=spec.size, values=values)


def gain_map(window: WindowTable, plan, image_extent: tuple[int, int]) -> ImagePlanar:
    """Overlap-add of w*w over every block of the plan, cropped to the image.

    Raises CoverageError if any original pixel ends up with zero weight,
    which signals a broken BlockPlan.
    """
    height, width = image_extent
    n = window.size
    w_sq = window.values.astype(np.float64) ** 2
    acc = np.zeros((plan.padded_height, plan.padded_width), dtype=np.float64)
    for r in plan.origin_rows:
        for c in plan.origin_cols:
            acc[r : r + n, c : c + n] += w_sq
    crop = acc[plan.pad : plan.pad + height, plan.pad : plan.pad + width]
    if np.any(crop <= 0.0):
        raise CoverageError(
            f"block plan leaves {int(np.sum(crop <= 0.0))} pixel(s) uncovered"
        )
    # kept at float64: the 2:1 half-cosine unit-gain property is checked at 1e-9
    return ImagePlanar(np.ascontiguousarray(crop[None]))
