"""Shape attributes of a glyph: stroke length and thickness, slant, width, height.

Length and thickness come from the high-resolution pipeline products (binary
image, distance transform, skeleton); slant and the bounding parallelogram
are computed on the original-resolution gray image.  All reported lengths
are in original-resolution pixel units, slant is in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import raster
from .errors import DegenerateRow, EmptySkeleton, MeasurementError, ZeroMass

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class MorphometryRecord:
    """The five measured attributes of one glyph (px, px, rad, px, px)."""

    length: float
    thickness: float
    slant: float
    width: float
    height: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.length, self.thickness, self.slant, self.width, self.height)


ATTRIBUTE_NAMES = ("length", "thickness", "slant", "width", "height")


@dataclass(frozen=True)
class PipelineProducts:
    """High-resolution intermediates shared by measurement and perturbations."""

    factor: int
    binary: np.ndarray
    distance: np.ndarray
    skeleton: raster.Skeleton

    @property
    def thickness_highres(self) -> float:
        """Stroke thickness in high-resolution pixels (twice the mean ridge EDT)."""
        if len(self.skeleton) == 0:
            raise EmptySkeleton("no skeleton pixels")
        return 2.0 * float(self.skeleton.values.mean())


def run_pipeline(image: np.ndarray, factor: int = 4) -> PipelineProducts:
    """Upscale, binarise, distance-transform and skeletonise a glyph image."""
    upscaled = raster.upscale(image, factor)
    binary = raster.binarize(upscaled)
    distance = raster.edt(binary)
    skeleton = raster.skeletonize(binary, distance)
    return PipelineProducts(factor=int(factor), binary=binary, distance=distance, skeleton=skeleton)


def stroke_length(products: PipelineProducts) -> float:
    """Total skeleton length: one unit per orthogonal neighbour pair, sqrt(2)
    per diagonal pair, each unordered pair counted once, divided by the
    upscale factor."""
    skel = products.skeleton
    if len(skel) == 0:
        raise EmptySkeleton("no skeleton pixels")
    m = skel.mask()
    orth = np.count_nonzero(m[:, :-1] & m[:, 1:]) + np.count_nonzero(m[:-1, :] & m[1:, :])
    diag = np.count_nonzero(m[:-1, :-1] & m[1:, 1:]) + np.count_nonzero(m[:-1, 1:] & m[1:, :-1])
    return (orth + SQRT2 * diag) / products.factor


def stroke_thickness(products: PipelineProducts) -> float:
    """Twice the mean distance-transform value over skeleton pixels, divided
    by the upscale factor."""
    return products.thickness_highres / products.factor


def slant(image: np.ndarray) -> float:
    """Horizontal shear angle from intensity-weighted second-order moments.

    Positive values lean forward (top of the glyph shifted right).  Raises
    ZeroMass on blank images and DegenerateRow when all mass sits on one row.
    """
    img = np.asarray(image, dtype=np.float64)
    total = img.sum()
    if total <= 0:
        raise ZeroMass("image has no intensity mass")
    h, w = img.shape
    cols = np.arange(w, dtype=np.float64)
    rows = np.arange(h, dtype=np.float64)
    col_mass = img.sum(axis=0)
    row_mass = img.sum(axis=1)
    i_bar = (col_mass * cols).sum() / total
    j_bar = (row_mass * rows).sum() / total
    s22 = (row_mass * (rows - j_bar) ** 2).sum()
    if s22 == 0:
        raise DegenerateRow("all intensity mass lies on a single row")
    s12 = (((cols - i_bar)[None, :] * (rows - j_bar)[:, None]) * img).sum()
    return math.atan2(-s12, s22)


def _interval_bounds(bin_mass: np.ndarray, tail: float) -> tuple[float, float]:
    """Equal-tailed interval endpoints on a piecewise-linear CDF.

    Bin k spreads its mass uniformly over [k, k+1); endpoints interpolate
    inside the bin where the CDF crosses tail / (1 - tail) of the total.
    """
    cdf = np.concatenate([[0.0], np.cumsum(bin_mass)])
    total = cdf[-1]  # cumsum's own endpoint, so the targets are always reachable

    def _position(target: float, strict: bool) -> float:
        if strict:
            k = int(np.argmax(cdf[1:] > target))
        else:
            k = int(np.argmax(cdf[1:] >= target))
        return k + (target - cdf[k]) / bin_mass[k]

    lo = _position(tail * total, strict=True)
    hi = _position((1.0 - tail) * total, strict=False)
    return lo, hi


def bounding_parallelogram(
    image: np.ndarray, angle: float, mass: float = 0.98
) -> tuple[float, float]:
    """Width and height of the tightest horizontal-top, slant-sided region
    holding the given fraction of image mass.

    Height comes from the vertical marginal CDF; width sweeps a boundary
    slanted by ``angle`` so that the result is not confounded with slant.
    Per-pixel mass is accumulated into unit-width bins and the equal-tailed
    interval endpoints are interpolated inside the crossing bins.
    """
    if not 0.0 < mass <= 1.0:
        raise ValueError(f"mass fraction must be in (0, 1], got {mass}")
    img = np.asarray(image, dtype=np.float64)
    total = img.sum()
    if total <= 0:
        raise ZeroMass("image has no intensity mass")
    tail = (1.0 - mass) / 2.0
    h, w = img.shape

    row_mass = img.sum(axis=1)
    lo, hi = _interval_bounds(row_mass, tail)
    height = hi - lo

    # sheared abscissa: column index pushed back along the slant direction
    rows = np.arange(h, dtype=np.float64)
    j_bar = (row_mass * rows).sum() / total
    shear = math.tan(angle)
    u = np.arange(w, dtype=np.float64)[None, :] + (rows[:, None] - j_bar) * shear
    k = np.rint(u).astype(np.int64)
    k -= k.min()
    sheared_mass = np.bincount(k.ravel(), weights=img.ravel())
    lo, hi = _interval_bounds(sheared_mass, tail)
    width = hi - lo
    return float(width), float(height)


def measure(
    image: np.ndarray, factor: int = 4, products: PipelineProducts | None = None
) -> MorphometryRecord:
    """Measure all five attributes of a glyph image.

    Failures are re-raised as MeasurementError tagged with the attribute
    that could not be computed.  ``products`` may be passed in when the
    caller already ran the pipeline.
    """
    if products is None:
        try:
            products = run_pipeline(image, factor)
        except Exception as exc:
            raise MeasurementError("length", exc) from exc
    try:
        length = stroke_length(products)
        thickness = stroke_thickness(products)
    except Exception as exc:
        raise MeasurementError("length", exc) from exc
    try:
        angle = slant(image)
    except Exception as exc:
        raise MeasurementError("slant", exc) from exc
    try:
        width, height = bounding_parallelogram(image, angle)
    except Exception as exc:
        raise MeasurementError("width", exc) from exc
    return MorphometryRecord(
        length=length, thickness=thickness, slant=angle, width=width, height=height
    )
