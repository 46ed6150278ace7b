"""Domain types shared by every pipeline stage, plus the elementary statistics
(Pearson correlation, Fisher Z, z-scoring) used throughout.

Conventions fixed here once for the whole toolkit:

* z-scoring divides by the population standard deviation (``ddof=0``), so
  standardizing a fixed pixel set is exactly idempotent;
* degenerate variance raises :class:`~fbn.validation.DegenerateInputError`
  instead of returning NaN;
* every statistic is computed in float64.

All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import (
    DegenerateInputError,
    as_float_array,
    check_positive,
    check_series_pair,
)

DEFAULT_FPS = 16.8
DEFAULT_PIXEL_PITCH_MM = 0.078


@dataclass
class DataMatrix:
    """A frames-by-pixels data matrix, the universal pipeline currency.

    Rows are frames (T >= 2), columns are brain pixels (N >= 1) in the
    raster order of the mask the matrix was built from.
    """

    values: np.ndarray
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        self.values = as_float_array(self.values, "DataMatrix values", ndim=2)
        t, n = self.values.shape
        if t < 2:
            raise ValueError(f"DataMatrix needs at least 2 frames, got {t}")
        if n < 1:
            raise ValueError("DataMatrix needs at least 1 pixel column")
        self.fps = check_positive(self.fps, "fps")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_pixels(self) -> int:
        return self.values.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.fps


@dataclass
class BrainMask:
    """Binary raster mask; its True pixels define DataMatrix column order."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {bits.shape}")
        if bits.shape[0] < 1 or bits.shape[1] < 1:
            raise ValueError("mask must be at least 1x1")
        self.bits = bits.astype(bool)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def n_pixels(self) -> int:
        return int(self.bits.sum())

    @property
    def pixel_order(self) -> np.ndarray:
        """Flat (row-major) indices of the in-mask pixels."""
        return np.flatnonzero(self.bits.ravel())

    def pixel_coords(self) -> np.ndarray:
        """(N, 2) array of (row, col) coordinates in column order."""
        rows, cols = np.nonzero(self.bits)
        return np.column_stack([rows, cols])

    def flatten_image(self, image: np.ndarray) -> np.ndarray:
        """Extract the in-mask pixels of an H x W image as an N-vector."""
        image = np.asarray(image)
        if image.shape != self.bits.shape:
            raise ValueError(
                f"image shape {image.shape} does not match mask {self.bits.shape}"
            )
        return image[self.bits]

    def unflatten(self, weights: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Place an N-vector back onto the H x W grid (fill outside mask)."""
        weights = np.asarray(weights)
        if weights.shape != (self.n_pixels,):
            raise ValueError(
                f"expected {self.n_pixels} weights, got shape {weights.shape}"
            )
        image = np.full(self.bits.shape, fill, dtype=np.float64)
        image[self.bits] = weights
        return image


@dataclass
class AtlasFrame:
    """Pixel geometry: mm pitch, bregma/lambda landmarks, session-to-atlas affine."""

    bregma_px: tuple[float, float]
    lambda_px: tuple[float, float]
    pixel_pitch_mm: float = DEFAULT_PIXEL_PITCH_MM
    affine: np.ndarray = field(default_factory=lambda: np.eye(2, 3))

    def __post_init__(self):
        self.pixel_pitch_mm = check_positive(self.pixel_pitch_mm, "pixel_pitch_mm")
        self.bregma_px = (float(self.bregma_px[0]), float(self.bregma_px[1]))
        self.lambda_px = (float(self.lambda_px[0]), float(self.lambda_px[1]))
        if self.bregma_px == self.lambda_px:
            raise ValueError("bregma and lambda must be distinct points")
        self.affine = as_float_array(self.affine, "affine")
        if self.affine.shape != (2, 3):
            raise ValueError(f"affine must be 2x3, got {self.affine.shape}")
        if abs(np.linalg.det(self.affine[:, :2])) < 1e-12:
            raise ValueError("affine linear part is singular")


@dataclass
class SpatialMap:
    """One network's z-scored weight map over the brain pixels."""

    weights: np.ndarray
    label: str | None = None
    mask_ref: str | None = None

    def __post_init__(self):
        self.weights = as_float_array(self.weights, "SpatialMap weights", ndim=1)

    @property
    def n_pixels(self) -> int:
        return self.weights.size

    def is_zscored(self, tol: float = 1e-9) -> bool:
        w = self.weights
        return abs(float(w.mean())) < tol and abs(float(w.std()) - 1.0) < tol


@dataclass
class LatentEmbedding:
    """T x C matrix of latent time courses (encoder bottleneck or ICA mixing)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = as_float_array(self.values, "LatentEmbedding values", ndim=2)
        if self.values.shape[1] < 1:
            raise ValueError("LatentEmbedding needs at least one component")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_components(self) -> int:
        return self.values.shape[1]


@dataclass
class FcMatrix:
    """k x k symmetric functional-connectivity matrix with region labels."""

    values: np.ndarray
    labels: list[str]

    def __post_init__(self):
        self.values = as_float_array(self.values, "FcMatrix values", ndim=2)
        k = self.values.shape[0]
        if self.values.shape != (k, k):
            raise ValueError(f"FcMatrix must be square, got {self.values.shape}")
        self.labels = [str(x) for x in self.labels]
        if len(self.labels) != k:
            raise ValueError(f"expected {k} labels, got {len(self.labels)}")
        if np.max(np.abs(self.values - self.values.T), initial=0.0) > 1e-12:
            raise ValueError("FcMatrix is not symmetric within 1e-12")
        if np.any(np.abs(self.values) > 1.0 + 1e-12):
            raise ValueError("FcMatrix entries must lie in [-1, 1]")

    @property
    def k(self) -> int:
        return self.values.shape[0]

    def off_diagonal(self) -> np.ndarray:
        iu = np.triu_indices(self.k, k=1)
        return self.values[iu]


def pearson(a, b) -> float:
    """Sample Pearson correlation of two equal-length series.

    Raises
    ------
    DegenerateInputError
        If either series has zero variance (NaN is never returned).
    """
    a, b = check_series_pair(a, b)
    ac = a - a.mean()
    bc = b - b.mean()
    va = float(ac @ ac)
    vb = float(bc @ bc)
    if va == 0.0 or vb == 0.0:
        raise DegenerateInputError("pearson requires nonzero variance in both series")
    r = float(ac @ bc) / np.sqrt(va * vb)
    # rounding may push |r| infinitesimally past 1 for perfectly collinear input
    return float(min(1.0, max(-1.0, r)))


def fisher_z(r: float) -> float:
    """Fisher Z transform atanh(r); requires |r| < 1."""
    r = float(r)
    if not np.isfinite(r) or abs(r) >= 1.0:
        raise DegenerateInputError(f"fisher_z requires |r| < 1, got {r}")
    return float(np.arctanh(r))


def fisher_z_inv(z: float) -> float:
    """Inverse Fisher Z transform tanh(z)."""
    z = float(z)
    if not np.isfinite(z):
        raise ValueError(f"fisher_z_inv requires finite input, got {z}")
    return float(np.tanh(z))


def zscore(w) -> np.ndarray:
    """Standardize a vector to mean 0 and population sd 1."""
    w = as_float_array(w, "weights", ndim=1)
    sd = float(w.std())
    if sd == 0.0:
        raise DegenerateInputError("cannot z-score a constant vector")
    return (w - w.mean()) / sd


def zscore_map(w, label: str | None = None, mask_ref: str | None = None) -> SpatialMap:
    """Standardize an N-vector of weights into a z-scored SpatialMap."""
    return SpatialMap(weights=zscore(w), label=label, mask_ref=mask_ref)


def group_average_fc(mats: list[FcMatrix]) -> FcMatrix:
    """Fisher-Z average a list of FC matrices sharing shape and labels.

    Off-diagonals are averaged as tanh(mean(atanh(r))); the diagonal is
    forced to exactly 1.
    """
    if not mats:
        raise ValueError("group_average_fc needs at least one matrix")
    labels = mats[0].labels
    k = mats[0].k
    for m in mats[1:]:
        if m.labels != labels:
            raise ValueError(f"FC label mismatch: {m.labels} vs {labels}")
    acc = np.zeros((k, k))
    for m in mats:
        off = ~np.eye(k, dtype=bool)
        if np.any(np.abs(m.values[off]) >= 1.0):
            raise DegenerateInputError("off-diagonal |r| >= 1 cannot be Fisher-averaged")
        acc += np.arctanh(np.where(off, m.values, 0.0))
    avg = np.tanh(acc / len(mats))
    avg = (avg + avg.T) / 2.0
    np.fill_diagonal(avg, 1.0)
    return FcMatrix(values=avg, labels=list(labels))
