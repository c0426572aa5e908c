"""Pixel-level kernels shared by every downstream stage.

All operations are pure functions over numpy arrays: gray images are 2-D
float (or uint8) arrays in [0, 255], binary images are 2-D bool arrays with
True = ink.  Nothing here touches disk.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import (
    EmptyForeground,
    FlatImage,
    NoBackground,
    NonDivisibleDimensions,
)

# Keys cubic-convolution parameter; -0.5 is the common default.
_KEYS_A = -0.5


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(np.ceil(4.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def smooth(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur; kernel cut at 4*sigma, edges replicated."""
    img = np.asarray(image, dtype=np.float64)
    if sigma <= 0:
        return img.copy()
    k = _gaussian_kernel(sigma)
    out = ndimage.correlate1d(img, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def _keys_weights(t: np.ndarray) -> np.ndarray:
    """Keys cubic weights for the four taps at offsets -1, 0, 1, 2.

    ``t`` is the fractional position in [0, 1); returns shape (4,) + t.shape.
    The four weights sum to one for any t.
    """
    a = _KEYS_A
    t = np.asarray(t, dtype=np.float64)
    u = 1.0 + t
    w_m1 = a * (u * u * u - 5.0 * u * u + 8.0 * u - 4.0)
    w_0 = (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
    v = 1.0 - t
    w_1 = (a + 2.0) * v**3 - (a + 3.0) * v**2 + 1.0
    u = 2.0 - t
    w_2 = a * (u * u * u - 5.0 * u * u + 8.0 * u - 4.0)
    return np.stack([w_m1, w_0, w_1, w_2])


def bicubic_sample(image: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample an image at float coordinates with Keys bicubic interpolation.

    Out-of-grid taps replicate the border value; sampling at integer
    coordinates reproduces pixel values exactly.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    wr = _keys_weights(rows - r0)
    wc = _keys_weights(cols - c0)
    out = np.zeros(np.broadcast(rows, cols).shape, dtype=np.float64)
    for a in range(4):
        ri = np.clip(r0 + (a - 1), 0, h - 1)
        acc = np.zeros_like(out)
        for b in range(4):
            ci = np.clip(c0 + (b - 1), 0, w - 1)
            acc += wc[b] * img[ri, ci]
        out += wr[a] * acc
    return out


@lru_cache(maxsize=64)
def _resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Dense 1-D bicubic resampling operator (n_out x n_in), centers aligned."""
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    base = np.floor(src).astype(np.int64)
    weights = _keys_weights(src - base)
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    for tap in range(4):
        idx = np.clip(base + (tap - 1), 0, n_in - 1)
        np.add.at(mat, (np.arange(n_out), idx), weights[tap])
    return mat


def _resize_bicubic(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    mr = _resample_matrix(img.shape[0], out_h)
    mc = _resample_matrix(img.shape[1], out_w)
    return mr @ np.asarray(img, dtype=np.float64) @ mc.T


def upscale(image: np.ndarray, factor: int) -> np.ndarray:
    """Enlarge by an integer factor: bicubic resize, then Gaussian blur.

    The blur bandwidth is sigma = 2*factor/6 at the enlarged resolution,
    mirroring pyramid-style rescaling; factor 1 returns the image unchanged.
    """
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("expected a nonempty 2-D image")
    if factor == 1:
        return img.copy()
    out = _resize_bicubic(img, img.shape[0] * factor, img.shape[1] * factor)
    return smooth(out, 2.0 * factor / 6.0)


def downscale(image: np.ndarray, factor: int) -> np.ndarray:
    """Shrink by an integer factor: Gaussian blur, bicubic resize, 8-bit clamp.

    Binary input is lifted to {0, 255} first.  Dimensions must divide by the
    factor.  Returns a uint8 image.
    """
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    img = np.asarray(image)
    if img.dtype == bool:
        img = img.astype(np.float64) * 255.0
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if h % factor or w % factor:
        raise NonDivisibleDimensions(f"{h}x{w} does not divide by {factor}")
    if factor > 1:
        img = smooth(img, 2.0 * factor / 6.0)
        img = _resize_bicubic(img, h // factor, w // factor)
    return np.clip(np.rint(img), 0.0, 255.0).astype(np.uint8)


def binarize(image: np.ndarray) -> np.ndarray:
    """Threshold at half the image's own intensity range (>= is ink)."""
    img = np.asarray(image, dtype=np.float64)
    if img.size == 0:
        raise ValueError("expected a nonempty image")
    lo = img.min()
    hi = img.max()
    if lo == hi:
        raise FlatImage(f"constant image (value {lo}) has no intensity range")
    return img >= lo + (hi - lo) / 2.0


_FAR = 1.0e12  # beyond any achievable squared pixel distance


@njit(cache=True)
def _edt_squared(mask):
    h, w = mask.shape
    # per-row column distance to the nearest background pixel in that row
    rowd = np.empty((h, w), dtype=np.float64)
    for i in range(h):
        d = _FAR
        for j in range(w):
            if mask[i, j] == 0:
                d = 0.0
            elif d < _FAR:
                d += 1.0
            rowd[i, j] = d
        d = _FAR
        for j in range(w - 1, -1, -1):
            if mask[i, j] == 0:
                d = 0.0
            elif d < _FAR:
                d += 1.0
            if d < rowd[i, j]:
                rowd[i, j] = d

    # per-column lower envelope of the parabolas f(i') + (i - i')^2
    out = np.empty((h, w), dtype=np.float64)
    f = np.empty(h, dtype=np.float64)
    v = np.empty(h, dtype=np.int64)
    z = np.empty(h + 1, dtype=np.float64)
    for j in range(w):
        for i in range(h):
            r = rowd[i, j]
            f[i] = r * r if r < _FAR else _FAR
        q0 = 0
        while q0 < h and f[q0] >= _FAR:
            q0 += 1
        if q0 == h:
            for i in range(h):
                out[i, j] = _FAR
            continue
        k = 0
        v[0] = q0
        z[0] = -_FAR
        z[1] = _FAR
        for q in range(q0 + 1, h):
            if f[q] >= _FAR:
                continue
            while True:
                vk = v[k]
                s = (f[q] + q * q - f[vk] - vk * vk) / (2.0 * (q - vk))
                if s <= z[k]:
                    k -= 1
                else:
                    break
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = _FAR
        k = 0
        for i in range(h):
            while z[k + 1] < i:
                k += 1
            di = i - v[k]
            out[i, j] = di * di + f[v[k]]
    return out


def edt(binary: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance transform.

    Each foreground pixel gets the distance from its center to the nearest
    background pixel center; background pixels get 0.  Computed with a
    per-row scan followed by a per-column parabola lower-envelope pass, so
    the squared distances are exact integers.
    """
    mask = np.asarray(binary, dtype=bool)
    if mask.all():
        raise NoBackground("image has no background pixel")
    return np.sqrt(_edt_squared(mask.astype(np.uint8)))


# --- skeletonization ---

_NEIGH = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def _cluster_count(cells, diagonal: bool) -> list:
    """Connected components among 3x3 ring cells (8- or 4-adjacency)."""
    cells = list(cells)
    seen = set()
    comps = []
    for start in cells:
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        stack = [start]
        while stack:
            r, c = stack.pop()
            for q in cells:
                if q in seen:
                    continue
                dr = abs(q[0] - r)
                dc = abs(q[1] - c)
                near = max(dr, dc) == 1 if diagonal else dr + dc == 1
                if near:
                    seen.add(q)
                    comp.append(q)
                    stack.append(q)
        comps.append(comp)
    return comps


def _build_removable_lut() -> np.ndarray:
    """Removability of a pixel given its 8-neighbour configuration.

    A pixel may be deleted when it is a simple point for (8, 4) connectivity
    (one foreground 8-component in the ring, one background 4-component
    touching an edge neighbour) and it is not an endpoint (it keeps at least
    two foreground neighbours).  Deleting only such pixels preserves both
    foreground and background topology.
    """
    lut = np.zeros(256, dtype=np.uint8)
    for code in range(256):
        fg = [_NEIGH[b] for b in range(8) if code >> b & 1]
        if len(fg) < 2:
            continue
        if len(_cluster_count(fg, diagonal=True)) != 1:
            continue
        bg = [o for o in _NEIGH if o not in fg]
        touching = [
            comp
            for comp in _cluster_count(bg, diagonal=False)
            if any(abs(r) + abs(c) == 1 for r, c in comp)
        ]
        if len(touching) != 1:
            continue
        lut[code] = 1
    return lut


_REMOVABLE = _build_removable_lut()


@njit(cache=True)
def _thin_mask(mask, rows, cols, lut):
    # rows/cols are padded coordinates sorted by ascending ridge value, so
    # locally maximal pixels are considered last and survive.  Each sweep
    # runs four directional subpasses over a snapshot of that direction's
    # frontier: peeling at most one layer per direction keeps straight
    # double ridges (constant distance value) from unzipping end-to-end,
    # while the live simplicity check keeps every deletion topology-safe.
    n = rows.size
    cand = np.empty(n, dtype=np.int64)
    changed = True
    while changed:
        changed = False
        for d in range(4):
            if d == 0:
                dr, dc = -1, 0
            elif d == 1:
                dr, dc = 1, 0
            elif d == 2:
                dr, dc = 0, -1
            else:
                dr, dc = 0, 1
            m = 0
            for t in range(n):
                r = rows[t]
                c = cols[t]
                if mask[r, c] == 1 and mask[r + dr, c + dc] == 0:
                    cand[m] = t
                    m += 1
            for k in range(m):
                t = cand[k]
                r = rows[t]
                c = cols[t]
                if mask[r, c] == 0:
                    continue
                code = (
                    mask[r - 1, c - 1]
                    + (mask[r - 1, c] << 1)
                    + (mask[r - 1, c + 1] << 2)
                    + (mask[r, c - 1] << 3)
                    + (mask[r, c + 1] << 4)
                    + (mask[r + 1, c - 1] << 5)
                    + (mask[r + 1, c] << 6)
                    + (mask[r + 1, c + 1] << 7)
                )
                if lut[code]:
                    mask[r, c] = 0
                    changed = True


@dataclass(frozen=True)
class Skeleton:
    """Medial-axis pixels of a binary image, annotated with distance values.

    ``coords`` is an (N, 2) array of (row, col) pairs in row-major order,
    ``values`` the distance-transform value at each pixel and ``degrees`` the
    number of skeleton pixels among each pixel's 8 neighbours.
    """

    shape: tuple[int, int]
    coords: np.ndarray
    values: np.ndarray
    degrees: np.ndarray

    def __len__(self) -> int:
        return self.coords.shape[0]

    def mask(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        out[self.coords[:, 0], self.coords[:, 1]] = True
        return out

    def tips(self) -> np.ndarray:
        return self.coords[self.degrees == 1]

    def forks(self) -> np.ndarray:
        return self.coords[self.degrees >= 3]


_DEGREE_KERNEL = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]], dtype=np.int64)


def skeletonize(binary: np.ndarray, distmap: np.ndarray) -> Skeleton:
    """Reduce a binary image to its medial axis by guided thinning.

    Foreground pixels are deleted in ascending distance-transform order,
    skipping deletions that would change the topology or erase stroke tips,
    so ridge pixels of the distance map survive and the skeleton keeps one
    8-connected component per foreground component.
    """
    mask = np.asarray(binary, dtype=bool)
    dist = np.asarray(distmap, dtype=np.float64)
    if mask.shape != dist.shape:
        raise ValueError("binary image and distance map differ in shape")
    rr, cc = np.nonzero(mask)
    if rr.size == 0:
        raise EmptyForeground("cannot skeletonize an empty foreground")
    order = np.lexsort((cc, rr, dist[rr, cc]))
    padded = np.zeros((mask.shape[0] + 2, mask.shape[1] + 2), dtype=np.uint8)
    padded[1:-1, 1:-1] = mask
    _thin_mask(padded, rr[order] + 1, cc[order] + 1, _REMOVABLE)
    skel = padded[1:-1, 1:-1].astype(bool)
    srr, scc = np.nonzero(skel)
    degrees = ndimage.convolve(skel.astype(np.int64), _DEGREE_KERNEL, mode="constant")
    return Skeleton(
        shape=mask.shape,
        coords=np.column_stack([srr, scc]),
        values=dist[srr, scc],
        degrees=degrees[srr, scc],
    )


# --- disc morphology ---


@lru_cache(maxsize=32)
def _disc_footprint(radius: float):
    r = int(np.floor(radius))
    span = np.arange(-r, r + 1)
    return (span[:, None] ** 2 + span[None, :] ** 2) <= radius * radius


def dilate_disc(binary: np.ndarray, radius: float) -> np.ndarray:
    """Minkowski dilation with the lattice disc di^2 + dj^2 <= r^2.

    Cells beyond the image border count as background; radius < 1 is the
    identity (the disc holds only the origin).
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    mask = np.asarray(binary, dtype=bool)
    if radius < 1:
        return mask.copy()
    fp = _disc_footprint(float(radius))
    return ndimage.maximum_filter(mask, footprint=fp, mode="constant", cval=False)


def erode_disc(binary: np.ndarray, radius: float) -> np.ndarray:
    """Minkowski erosion with the same disc; exact dual of dilate_disc.

    Cells beyond the border count as foreground here, which makes
    ``erode(x, r) == ~dilate(~x, r)`` an exact identity.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    mask = np.asarray(binary, dtype=bool)
    if radius < 1:
        return mask.copy()
    fp = _disc_footprint(float(radius))
    return ndimage.minimum_filter(mask, footprint=fp, mode="constant", cval=True)


def warp_backward(image: np.ndarray, mapping) -> np.ndarray:
    """Resample an image through an output->source coordinate mapping.

    ``mapping(rows, cols)`` receives float arrays of output coordinates and
    returns the source coordinates to sample (bicubic); source coordinates
    outside the grid clamp to the border.  The identity mapping reproduces
    the input exactly.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    rows, cols = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    src_r, src_c = mapping(rows, cols)
    src_r = np.clip(src_r, 0.0, h - 1.0)
    src_c = np.clip(src_c, 0.0, w - 1.0)
    return bicubic_sample(img, src_r, src_c)
