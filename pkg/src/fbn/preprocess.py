"""Processing chain from per-channel frame stacks (or raw matrices) to
analysis-ready T x N matrices: ratiometric correction, temporal detrending,
masked Gaussian smoothing, global signal regression, similarity-transform
atlas registration, epoch segmentation, and hemisphere restriction.

Boundary handling for smoothing: kernel taps falling outside the brain mask
are dropped and each output pixel's remaining weights are renormalized to
sum to one, so constant images pass through exactly and no dark halo forms
at the brain edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal, sparse

from .core import AtlasFrame, BrainMask, DataMatrix, DEFAULT_FPS
from .validation import DegenerateInputError, as_float_array

GAUSSIAN_SIZE = 5
DEFAULT_GAUSSIAN_SIGMA = 1.2


@dataclass
class FrameStack:
    """A stack of T raw frames for one illumination channel."""

    frames: np.ndarray  # (T, H, W)
    channel: str = "emission"
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        self.frames = as_float_array(self.frames, "frames")
        if self.frames.ndim != 3:
            raise ValueError(f"frames must be (T, H, W), got {self.frames.shape}")


@dataclass
class Baseline:
    """Per-pixel temporal means of the emission and reference channels."""

    i0_em: np.ndarray
    i0_ref: np.ndarray


def compute_baseline(em: FrameStack, ref: FrameStack, mask: BrainMask) -> Baseline:
    i0_em = em.frames.mean(axis=0)[mask.bits]
    i0_ref = ref.frames.mean(axis=0)[mask.bits]
    if np.any(i0_em <= 0) or np.any(i0_ref <= 0):
        raise DegenerateInputError("baseline intensities must be strictly positive in-mask")
    return Baseline(i0_em=i0_em, i0_ref=i0_ref)


def ratiometric_correct(em: FrameStack, ref: FrameStack, mask: BrainMask) -> DataMatrix:
    """Correct emission by the reference channel: y(t) = em/ref * ref0/em0.

    Baselines are the per-pixel temporal means over the session, so the
    output trace of every pixel has mean near 1 and the correction is
    invariant to per-channel global gain.
    """
    if em.frames.shape != ref.frames.shape:
        raise ValueError(
            f"channel shapes differ: {em.frames.shape} vs {ref.frames.shape}"
        )
    if em.frames.shape[1:] != mask.bits.shape:
        raise ValueError("frame shape does not match mask")
    em_px = em.frames[:, mask.bits]
    ref_px = ref.frames[:, mask.bits]
    if np.any(em_px <= 0) or np.any(ref_px <= 0):
        raise DegenerateInputError("ratiometric correction needs positive in-mask intensities")
    base = compute_baseline(em, ref, mask)
    y = (em_px / ref_px) * (base.i0_ref / base.i0_em)
    return DataMatrix(values=y, fps=em.fps)


def detrend(m: DataMatrix) -> DataMatrix:
    """Remove each pixel's least-squares linear trend over time."""
    if m.n_frames < 3:
        raise ValueError(f"detrend needs at least 3 frames, got {m.n_frames}")
    x = m.values
    t = np.arange(m.n_frames, dtype=np.float64)
    tc = t - t.mean()
    slope = (tc @ x) / (tc @ tc)
    resid = x - x.mean(axis=0) - np.outer(tc, slope)
    return DataMatrix(values=resid, fps=m.fps)


def gaussian_kernel(sigma: float = DEFAULT_GAUSSIAN_SIGMA,
                    size: int = GAUSSIAN_SIZE) -> np.ndarray:
    """Normalized size x size Gaussian kernel."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    half = (size - 1) / 2.0
    ax = np.arange(size) - half
    k = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma**2))
    return k / k.sum()


def _masked_smoothing_operator(mask: BrainMask, kernel: np.ndarray) -> sparse.csr_matrix:
    """Sparse N x N operator: masked convolution with per-pixel renormalized
    weights (every row sums to exactly 1)."""
    h, w = mask.bits.shape
    half = kernel.shape[0] // 2
    flat_index = np.full((h, w), -1, dtype=np.int64)
    coords = mask.pixel_coords()
    flat_index[mask.bits] = np.arange(coords.shape[0])
    rows, cols, vals = [], [], []
    for p, (r, c) in enumerate(coords):
        acc_idx, acc_w = [], []
        for dr in range(-half, half + 1):
            rr = r + dr
            if rr < 0 or rr >= h:
                continue
            for dc in range(-half, half + 1):
                cc = c + dc
                if cc < 0 or cc >= w:
                    continue
                q = flat_index[rr, cc]
                if q >= 0:
                    acc_idx.append(q)
                    acc_w.append(kernel[dr + half, dc + half])
        wsum = float(np.sum(acc_w))
        for q, kv in zip(acc_idx, acc_w):
            rows.append(p)
            cols.append(q)
            vals.append(kv / wsum)
    n = coords.shape[0]
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def gaussian_smooth(m: DataMatrix, mask: BrainMask,
                    sigma: float = DEFAULT_GAUSSIAN_SIGMA) -> DataMatrix:
    """Smooth every frame with a 5x5 Gaussian restricted to the mask."""
    if m.n_pixels != mask.n_pixels:
        raise ValueError(
            f"matrix has {m.n_pixels} pixels but mask has {mask.n_pixels}"
        )
    op = _masked_smoothing_operator(mask, gaussian_kernel(sigma))
    return DataMatrix(values=(op @ m.values.T).T, fps=m.fps)


def global_signal_regress(m: DataMatrix) -> DataMatrix:
    """Regress the in-mask mean trace (plus an intercept) out of every pixel.

    Residuals are zero-mean and orthogonal to the global trace; applying
    the operation twice changes nothing.
    """
    x = m.values
    g = x.mean(axis=1)
    gc = g - g.mean()
    denom = float(gc @ gc)
    if denom == 0.0:
        raise DegenerateInputError("global trace is constant; nothing to regress out")
    xc = x - x.mean(axis=0)
    beta = (gc @ xc) / denom
    return DataMatrix(values=xc - np.outer(gc, beta), fps=m.fps)


@dataclass
class AffineTransform:
    """2x3 matrix mapping (row, col) session coordinates to atlas coordinates."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = as_float_array(self.matrix, "affine matrix")
        if self.matrix.shape != (2, 3):
            raise ValueError(f"affine matrix must be 2x3, got {self.matrix.shape}")
        if abs(np.linalg.det(self.matrix[:, :2])) < 1e-12:
            raise ValueError("affine transform is not invertible")

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return points @ self.matrix[:, :2].T + self.matrix[:, 2]

    def inverse(self) -> "AffineTransform":
        lin = np.linalg.inv(self.matrix[:, :2])
        return AffineTransform(
            matrix=np.hstack([lin, -(lin @ self.matrix[:, 2])[:, None]])
        )


def estimate_affine(bregma_src, lambda_src, bregma_dst, lambda_dst) -> AffineTransform:
    """Unique rotation + uniform scale + translation mapping the two source
    landmarks exactly onto the two destination landmarks.

    Two point pairs determine exactly 4 degrees of freedom, so the general
    6-DOF affine is deliberately constrained to a similarity transform.
    """
    bs = complex(*map(float, bregma_src))
    ls = complex(*map(float, lambda_src))
    bd = complex(*map(float, bregma_dst))
    ld = complex(*map(float, lambda_dst))
    if bs == ls:
        raise ValueError("source landmarks are coincident")
    a = (ld - bd) / (ls - bs)
    b = bd - a * bs
    matrix = np.array([
        [a.real, -a.imag, b.real],
        [a.imag, a.real, b.imag],
    ])
    return AffineTransform(matrix=matrix)


def apply_affine(m: DataMatrix, transform: AffineTransform, src_mask: BrainMask,
                 target_mask: BrainMask) -> tuple[DataMatrix, np.ndarray]:
    """Resample a session into the target grid by inverse-mapped bilinear
    interpolation.

    Returns (resampled matrix over target_mask pixels, flags) where flags
    marks target pixels whose sample point fell outside the source image
    (those values are zero).
    """
    if m.n_pixels != src_mask.n_pixels:
        raise ValueError("matrix does not match the source mask")
    inv = transform.inverse()
    tgt = target_mask.pixel_coords().astype(np.float64)
    src_pts = inv.apply(tgt)
    h, w = src_mask.bits.shape
    rr, cc = src_pts[:, 0], src_pts[:, 1]
    outside = (rr < 0) | (rr > h - 1) | (cc < 0) | (cc > w - 1)
    rrc = np.clip(rr, 0, h - 1)
    ccc = np.clip(cc, 0, w - 1)
    r0 = np.clip(np.floor(rrc).astype(np.int64), 0, h - 2) if h > 1 else np.zeros(len(rrc), np.int64)
    c0 = np.clip(np.floor(ccc).astype(np.int64), 0, w - 2) if w > 1 else np.zeros(len(ccc), np.int64)
    fr = rrc - r0
    fc = ccc - c0
    w00 = (1 - fr) * (1 - fc)
    w01 = (1 - fr) * fc
    w10 = fr * (1 - fc)
    w11 = fr * fc
    out = np.empty((m.n_frames, tgt.shape[0]))
    img = np.zeros((h, w))
    for t in range(m.n_frames):
        img[src_mask.bits] = m.values[t]
        out[t] = (w00 * img[r0, c0] + w01 * img[r0, c0 + 1]
                  + w10 * img[r0 + 1, c0] + w11 * img[r0 + 1, c0 + 1])
    out[:, outside] = 0.0
    return DataMatrix(values=out, fps=m.fps), outside


def segment_epochs(m: DataMatrix, epoch_s: float) -> list[DataMatrix]:
    """Split into consecutive non-overlapping epochs of floor(epoch_s * fps)
    frames; the trailing remainder is dropped."""
    frames = int(np.floor(epoch_s * m.fps))
    if frames < 2:
        raise ValueError(f"epoch of {epoch_s}s is under 2 frames at fps={m.fps}")
    if frames > m.n_frames:
        raise ValueError(
            f"epoch of {frames} frames exceeds the session length {m.n_frames}"
        )
    n_chunks = m.n_frames // frames
    return [
        DataMatrix(values=m.values[i * frames:(i + 1) * frames].copy(), fps=m.fps)
        for i in range(n_chunks)
    ]


def restrict_hemisphere(m: DataMatrix, mask: BrainMask, frame: AtlasFrame,
                        side: str) -> tuple[DataMatrix, BrainMask]:
    """Keep only pixels strictly left/right of the vertical line through bregma."""
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if m.n_pixels != mask.n_pixels:
        raise ValueError("matrix does not match the mask")
    midline_col = frame.bregma_px[1]
    coords = mask.pixel_coords()
    keep = coords[:, 1] < midline_col if side == "left" else coords[:, 1] > midline_col
    if not np.any(keep):
        raise ValueError(f"no pixels on the {side} hemisphere")
    new_bits = np.zeros_like(mask.bits)
    kept = coords[keep]
    new_bits[kept[:, 0], kept[:, 1]] = True
    return (DataMatrix(values=m.values[:, keep], fps=m.fps),
            BrainMask(bits=new_bits))


def bandpass_filter(m: DataMatrix, low_hz: float, high_hz: float,
                    order: int = 2) -> DataMatrix:
    """Optional zero-phase Butterworth bandpass (off by default in configs)."""
    nyq = m.fps / 2.0
    if not (0.0 < low_hz < high_hz < nyq):
        raise ValueError(
            f"band ({low_hz}, {high_hz}) Hz invalid for Nyquist {nyq:.3f} Hz"
        )
    sos = signal.butter(order, [low_hz, high_hz], btype="bandpass",
                        fs=m.fps, output="sos")
    return DataMatrix(values=signal.sosfiltfilt(sos, m.values, axis=0), fps=m.fps)
