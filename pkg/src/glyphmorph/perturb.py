"""Parametrised glyph perturbations applied at high resolution.

Thinning and thickening are global morphological changes scaled to the
glyph's own stroke thickness; swelling and fractures are local edits placed
at random skeleton sites.  Every stochastic choice is driven by an explicit
seed so that batches regenerate identically regardless of worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import raster
from .errors import EmptyResult, GlyphmorphError, NoCandidateSites
from .measure import PipelineProducts

KINDS = ("identity", "thin", "thicken", "swell", "fracture")


@dataclass(frozen=True)
class PerturbSpec:
    """One perturbation request; only the fields for ``kind`` are relevant.

    ``strength`` is the thickness fraction removed/added by thin/thicken;
    swelling uses ``gamma`` (> 1) and places a warp of radius
    ``radius_coef * sqrt(thickness)`` low-res px; fractures draw ``count``
    background strokes of ``brush`` px diameter, at least ``min_dist`` px
    from tips and forks, oriented inside a ``window`` px box and extended by
    ``extension`` px on both ends.  Distances are low-resolution pixels.
    """

    kind: str
    strength: float | None = None
    gamma: float = 7.0
    radius_coef: float = 1.5
    count: int = 3
    brush: float = 1.5
    min_dist: float = 2.0
    window: float = 5.0
    extension: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.strength is None and self.kind in ("thin", "thicken"):
            object.__setattr__(self, "strength", 0.7 if self.kind == "thin" else 1.0)
        if self.kind in ("thin", "thicken") and not self.strength > 0:
            raise ValueError("strength must be positive")
        if self.kind == "swell" and not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if self.kind == "swell" and not self.radius_coef > 0:
            raise ValueError("radius_coef must be positive")
        if self.kind == "fracture":
            if self.count < 0:
                raise ValueError("count must be nonnegative")
            if not self.brush > 0 or not self.window > 0:
                raise ValueError("brush and window must be positive")
            if self.min_dist < 0 or self.extension < 0:
                raise ValueError("min_dist and extension must be nonnegative")

    def parameters(self) -> dict:
        if self.kind in ("thin", "thicken"):
            return {"strength": self.strength}
        if self.kind == "swell":
            return {"gamma": self.gamma, "radius_coef": self.radius_coef}
        if self.kind == "fracture":
            return {
                "count": self.count,
                "brush": self.brush,
                "min_dist": self.min_dist,
                "window": self.window,
                "extension": self.extension,
            }
        return {}


# Menu names accepted by the batch front-end.
BUILTIN_SPECS = {
    "plain": PerturbSpec("identity"),
    "thin": PerturbSpec("thin"),
    "thick": PerturbSpec("thicken"),
    "swel": PerturbSpec("swell"),
    "frac": PerturbSpec("fracture"),
}


@dataclass(frozen=True)
class FractureSite:
    """One applied fracture: centre (high-res), direction and half-length."""

    row: int
    col: int
    angle: float
    half_length: float


@dataclass
class PerturbOutcome:
    """Ground-truth audit record of one applied perturbation."""

    kind: str
    seed: int | None = None
    center: tuple[int, int] | None = None
    radius: float | None = None
    sites: list[FractureSite] = field(default_factory=list)
    error: str | None = None


def thin(products: PipelineProducts, strength: float = 0.7) -> np.ndarray:
    """Erode with a disc sized to remove ~strength of the stroke thickness."""
    radius = strength * products.thickness_highres / 2.0
    out = raster.erode_disc(products.binary, radius)
    if not out.any():
        raise EmptyResult(f"erosion radius {radius:.2f} px erased the glyph")
    return out


def thicken(products: PipelineProducts, strength: float = 1.0) -> np.ndarray:
    """Dilate with a disc sized to add ~strength of the stroke thickness."""
    radius = strength * products.thickness_highres / 2.0
    return raster.dilate_disc(products.binary, radius)


def swell(
    products: PipelineProducts,
    gamma: float = 7.0,
    radius_coef: float = 1.5,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, PerturbOutcome]:
    """Warp a disc around a random skeleton pixel with a radial power transform.

    Pixels at distance d < R from the centre sample the source at
    centre + offset * (d/R)**(gamma-1); pixels at distance >= R are
    bit-identical to the input.  Returns the warped high-resolution gray
    image and the outcome holding the drawn centre and radius.
    """
    rng = np.random.default_rng() if rng is None else rng
    skel = products.skeleton
    f = products.factor
    radius = radius_coef * math.sqrt(products.thickness_highres / f) * f
    cr, cc = (int(v) for v in skel.coords[rng.integers(len(skel))])

    src = np.asarray(products.binary, dtype=np.float64) * 255.0
    out = src.copy()
    h, w = src.shape
    r_lo = max(0, int(math.floor(cr - radius)))
    r_hi = min(h, int(math.ceil(cr + radius)) + 1)
    c_lo = max(0, int(math.floor(cc - radius)))
    c_hi = min(w, int(math.ceil(cc + radius)) + 1)
    dr = np.arange(r_lo, r_hi, dtype=np.float64)[:, None] - cr
    dc = np.arange(c_lo, c_hi, dtype=np.float64)[None, :] - cc
    dist = np.hypot(dr, dc)
    inside = dist < radius
    scale = np.power(dist / radius, gamma - 1.0, where=inside, out=np.zeros_like(dist))
    src_r = cr + dr * scale
    src_c = cc + dc * scale
    warped = raster.bicubic_sample(src, src_r[inside], src_c[inside])
    block = out[r_lo:r_hi, c_lo:c_hi]
    block[inside] = warped
    outcome = PerturbOutcome(kind="swell", center=(cr, cc), radius=radius)
    return out, outcome


def _erase_capsule(mask: np.ndarray, p0: np.ndarray, p1: np.ndarray, radius: float) -> None:
    """Paint background over all pixels within ``radius`` of segment p0-p1."""
    h, w = mask.shape
    r_lo = max(0, int(math.floor(min(p0[0], p1[0]) - radius)))
    r_hi = min(h, int(math.ceil(max(p0[0], p1[0]) + radius)) + 1)
    c_lo = max(0, int(math.floor(min(p0[1], p1[1]) - radius)))
    c_hi = min(w, int(math.ceil(max(p0[1], p1[1]) + radius)) + 1)
    if r_lo >= r_hi or c_lo >= c_hi:
        return
    rr = np.arange(r_lo, r_hi, dtype=np.float64)[:, None]
    cc = np.arange(c_lo, c_hi, dtype=np.float64)[None, :]
    seg = p1 - p0
    norm2 = float(seg @ seg)
    if norm2 == 0.0:
        d2 = (rr - p0[0]) ** 2 + (cc - p0[1]) ** 2
    else:
        t = np.clip(((rr - p0[0]) * seg[0] + (cc - p0[1]) * seg[1]) / norm2, 0.0, 1.0)
        d2 = (rr - (p0[0] + t * seg[0])) ** 2 + (cc - (p0[1] + t * seg[1])) ** 2
    block = mask[r_lo:r_hi, c_lo:c_hi]
    block[d2 <= radius * radius] = False


def fracture(
    products: PipelineProducts,
    count: int = 3,
    brush: float = 1.5,
    min_dist: float = 2.0,
    window: float = 5.0,
    extension: float = 0.5,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, PerturbOutcome]:
    """Erase short strokes transversal to the pen stroke at random sites.

    Candidate sites are skeleton pixels farther than ``min_dist`` px from
    every tip and fork; the local stroke direction is the principal axis of
    the skeleton pixels inside a ``window`` px box, and the fracture runs
    along its normal with half-length EDT + ``extension`` px, drawn as
    background with a round brush.  Parameters are low-resolution px and are
    scaled by the pipeline factor internally.
    """
    rng = np.random.default_rng() if rng is None else rng
    skel = products.skeleton
    f = products.factor
    outcome = PerturbOutcome(kind="fracture")
    mask = np.asarray(products.binary, dtype=bool).copy()
    if count == 0:
        return mask, outcome

    coords = skel.coords.astype(np.float64)
    special = np.vstack([skel.tips(), skel.forks()]).astype(np.float64)
    if special.shape[0]:
        diff = coords[:, None, :] - special[None, :, :]
        nearest = np.sqrt((diff**2).sum(axis=2)).min(axis=1)
        candidates = skel.coords[nearest > min_dist * f]
    else:
        candidates = skel.coords
    if candidates.shape[0] == 0:
        raise NoCandidateSites("every skeleton pixel is near a tip or fork")

    picks = rng.choice(candidates.shape[0], size=min(count, candidates.shape[0]), replace=False)
    half_window = window * f / 2.0
    for idx in np.sort(picks):
        site = candidates[idx].astype(np.float64)
        near = coords[
            (np.abs(coords[:, 0] - site[0]) <= half_window)
            & (np.abs(coords[:, 1] - site[1]) <= half_window)
        ]
        centered = near - near.mean(axis=0)
        cov = centered.T @ centered
        eigvals, eigvecs = np.linalg.eigh(cov)
        direction = eigvecs[:, int(np.argmax(eigvals))]
        normal = np.array([-direction[1], direction[0]])
        half_len = float(products.distance[int(site[0]), int(site[1])]) + extension * f
        _erase_capsule(mask, site - normal * half_len, site + normal * half_len, brush * f / 2.0)
        outcome.sites.append(
            FractureSite(
                row=int(site[0]),
                col=int(site[1]),
                angle=math.atan2(normal[0], normal[1]),
                half_length=half_len,
            )
        )
    return mask, outcome


def perturb_image(
    image: np.ndarray, spec: PerturbSpec, factor: int = 4, seed: int = 0
) -> tuple[np.ndarray, PerturbOutcome]:
    """Run the full pipeline on one glyph and apply a perturbation.

    The image is upscaled, binarised and (for non-identity specs) distance-
    transformed and skeletonised; the perturbed high-resolution image is
    downscaled back to an 8-bit image of the original size.  Pipeline errors
    (blank image etc.) propagate; a perturbation that cannot be applied
    falls back to the identity with the failure recorded in the outcome.
    """
    upscaled = raster.upscale(image, factor)
    binary = raster.binarize(upscaled)
    outcome = PerturbOutcome(kind=spec.kind, seed=seed)
    if spec.kind == "identity":
        return raster.downscale(binary, factor), outcome

    distance = raster.edt(binary)
    skeleton = raster.skeletonize(binary, distance)
    products = PipelineProducts(
        factor=int(factor), binary=binary, distance=distance, skeleton=skeleton
    )
    rng = np.random.default_rng(seed)
    high = binary
    try:
        if spec.kind == "thin":
            high = thin(products, spec.strength)
        elif spec.kind == "thicken":
            high = thicken(products, spec.strength)
        elif spec.kind == "swell":
            high, applied = swell(products, spec.gamma, spec.radius_coef, rng)
            outcome.center = applied.center
            outcome.radius = applied.radius
        elif spec.kind == "fracture":
            high, applied = fracture(
                products,
                spec.count,
                spec.brush,
                spec.min_dist,
                spec.window,
                spec.extension,
                rng,
            )
            outcome.sites = applied.sites
    except (EmptyResult, NoCandidateSites) as exc:
        high = binary
        outcome.error = f"{type(exc).__name__}: {exc}"
    return raster.downscale(high, factor), outcome


def _image_words(master_seed: int, index: int) -> tuple[int, int]:
    """Stable per-image randomness: two 64-bit words mixed from (seed, index)."""
    state = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def apply_menu(
    image: np.ndarray,
    menu: list[PerturbSpec],
    master_seed: int,
    index: int,
    factor: int = 4,
) -> tuple[np.ndarray, int, PerturbOutcome]:
    """Perturb one indexed image with a uniformly drawn menu entry.

    The menu choice and the perturbation seed both derive only from
    (master_seed, index), so results are independent of batch order and
    worker scheduling.  Per-image failures are recorded in the outcome and
    the original image is passed through unchanged.
    """
    menu_word, seed = _image_words(master_seed, index)
    choice = menu_word % len(menu)
    spec = menu[choice]
    try:
        out, outcome = perturb_image(image, spec, factor, seed)
    except GlyphmorphError as exc:
        out = np.asarray(image, dtype=np.uint8).copy()
        outcome = PerturbOutcome(kind=spec.kind, seed=seed, error=f"{type(exc).__name__}: {exc}")
    return out, choice, outcome


def build_mixed_dataset(
    dataset,
    labels,
    menu: list[PerturbSpec],
    master_seed: int,
    factor: int = 4,
):
    """Perturb a whole dataset, assigning menu entries uniformly at random.

    Returns (perturbed ImageDataset, passthrough labels, per-image menu
    indices, per-image outcomes), all aligned with the input order.
    """
    from .idx import ImageDataset

    if not menu:
        raise ValueError("menu must not be empty")
    images = []
    choices = np.zeros(len(dataset), dtype=np.uint8)
    outcomes = []
    for i in range(len(dataset)):
        out, choice, outcome = apply_menu(dataset[i], menu, master_seed, i, factor)
        images.append(out)
        choices[i] = choice
        outcomes.append(outcome)
    stacked = (
        np.stack(images) if images else np.zeros((0,) + dataset.images.shape[1:], dtype=np.uint8)
    )
    return ImageDataset(stacked), labels, choices, outcomes
