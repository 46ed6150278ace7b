"""Seeded generator of multi-subject synthetic WFCI-like datasets with known
ground-truth sources, used as the oracle for end-to-end tests.

Each session matrix is built as

    X = sum_g trace_g (x) source_g  +  global_amp * (global_trace (x) 1)  +  noise

where the sources are bilateral Gaussian blob pairs mirrored across the
vertical midline (z-scored over the mask) and the traces are unit-variance
AR(1) processes with Laplace innovations, so the sources are identifiable
by tanh-contrast ICA. Per-subject blob centers are displaced by a fixed
random jitter to create ground-truth subject variation.

Everything is a pure function of the spec: identical seeds give
byte-identical matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import AtlasFrame, BrainMask, DataMatrix, SpatialMap, zscore
from .validation import DegenerateInputError

AR_COEFF = 0.9
GLOBAL_AR_COEFF = 0.95
_BURN_IN = 128


@dataclass
class SynthSpec:
    """Parameters of one synthetic cohort."""

    height: int = 64
    width: int = 64
    n_sources: int = 8
    subjects: int = 6
    sessions_per_subject: int = 3
    n_frames: int = 1024
    fps: float = 16.8
    noise_sd: float = 0.2          # relative to the noise-free signal RMS
    global_amp: float = 0.5
    subject_jitter: float = 1.5    # px, per-axis center displacement bound
    blob_sigma: float = 4.0        # px, Gaussian blob width
    seed: int = 0

    def __post_init__(self):
        for name in ("height", "width", "n_sources", "subjects",
                     "sessions_per_subject", "n_frames"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_frames < 2:
            raise ValueError("n_frames must be >= 2")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.fps <= 0 or self.blob_sigma <= 0:
            raise ValueError("fps and blob_sigma must be > 0")


@dataclass
class GroundTruth:
    """Canonical (pre-jitter) sources plus the per-session time courses."""

    sources: list[SpatialMap]
    traces: dict[tuple[str, str], np.ndarray]        # (subject, session) -> T x G
    global_trace: dict[tuple[str, str], np.ndarray]  # (subject, session) -> T


@dataclass
class SynthDataset:
    sessions: dict[tuple[str, str], DataMatrix]
    mask: BrainMask
    truth: GroundTruth
    frame: AtlasFrame
    subject_offsets: dict[str, tuple[float, float]] = field(default_factory=dict)


def elliptical_mask(height: int, width: int) -> BrainMask:
    """Mirror-symmetric elliptical mask inscribed with a 1-px margin."""
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    ry, rx = cy - 0.5, cx - 0.5
    rr, cc = np.mgrid[0:height, 0:width]
    bits = ((rr - cy) / ry) ** 2 + ((cc - cx) / rx) ** 2 <= 1.0
    return BrainMask(bits=bits)


def default_frame(spec: SynthSpec) -> AtlasFrame:
    """Atlas geometry of the synthetic grid: bregma/lambda on the midline."""
    cx = (spec.width - 1) / 2.0
    return AtlasFrame(
        bregma_px=(0.2 * (spec.height - 1), cx),
        lambda_px=(0.8 * (spec.height - 1), cx),
    )


def blob_centers(spec: SynthSpec) -> list[tuple[float, float]]:
    """Left-hemisphere blob centers; the mirrored twin is implied."""
    h, w, g = spec.height, spec.width, spec.n_sources
    rows = np.linspace(0.22 * (h - 1), 0.78 * (h - 1), g) if g > 1 \
        else np.array([0.5 * (h - 1)])
    cols = np.where(np.arange(g) % 2 == 0, 0.22 * (w - 1), 0.36 * (w - 1))
    return [(float(r), float(c)) for r, c in zip(rows, cols)]


def _check_bounds(spec: SynthSpec, centers) -> None:
    margin = 2.0 * spec.blob_sigma + spec.subject_jitter
    for r, c in centers:
        mirrored = spec.width - 1 - c
        for cc in (c, mirrored):
            if not (margin <= r <= spec.height - 1 - margin
                    and margin <= cc <= spec.width - 1 - margin):
                raise ValueError(
                    f"blob at ({r:.1f}, {cc:.1f}) with radius {margin:.1f} px "
                    f"exceeds the {spec.height}x{spec.width} image bounds"
                )


def _bilateral_blob(spec: SynthSpec, mask: BrainMask, center,
                    offset=(0.0, 0.0)) -> np.ndarray:
    r0, c0 = center[0] + offset[0], center[1] + offset[1]
    c1 = spec.width - 1 - (center[1] - offset[1])  # mirror moves with the brain
    coords = mask.pixel_coords().astype(np.float64)
    s2 = 2.0 * spec.blob_sigma**2
    d_left = (coords[:, 0] - r0) ** 2 + (coords[:, 1] - c0) ** 2
    d_right = (coords[:, 0] - r0) ** 2 + (coords[:, 1] - c1) ** 2
    return np.exp(-d_left / s2) + np.exp(-d_right / s2)


def _ar1_series(rng: np.random.Generator, n: int, coeff: float,
                laplace: bool) -> np.ndarray:
    if laplace:
        innov = rng.laplace(0.0, 1.0, size=n + _BURN_IN)
    else:
        innov = rng.standard_normal(n + _BURN_IN)
    x = np.empty(n + _BURN_IN)
    x[0] = innov[0]
    for t in range(1, n + _BURN_IN):
        x[t] = coeff * x[t - 1] + innov[t]
    x = x[_BURN_IN:]
    return (x - x.mean()) / x.std()


def source_labels(n_sources: int) -> list[str]:
    return [f"net{g + 1:02d}" for g in range(n_sources)]


def generate(spec: SynthSpec) -> SynthDataset:
    """Generate the cohort: session matrices, mask, and ground truth."""
    mask = elliptical_mask(spec.height, spec.width)
    centers = blob_centers(spec)
    _check_bounds(spec, centers)

    labels = source_labels(spec.n_sources)
    sources = [
        SpatialMap(weights=zscore(_bilateral_blob(spec, mask, ctr)),
                   label=lab, mask_ref="synth")
        for ctr, lab in zip(centers, labels)
    ]

    subject_offsets: dict[str, tuple[float, float]] = {}
    sessions: dict[tuple[str, str], DataMatrix] = {}
    traces: dict[tuple[str, str], np.ndarray] = {}
    globals_: dict[tuple[str, str], np.ndarray] = {}

    ones = np.ones(mask.n_pixels)
    for si in range(spec.subjects):
        subject = f"s{si + 1:02d}"
        rng_subj = np.random.default_rng(
            np.random.SeedSequence([int(spec.seed), 1, si]))
        offset = rng_subj.uniform(-spec.subject_jitter, spec.subject_jitter, size=2)
        subject_offsets[subject] = (float(offset[0]), float(offset[1]))
        subj_sources = np.stack([
            zscore(_bilateral_blob(spec, mask, ctr, offset)) for ctr in centers
        ])
        for ri in range(spec.sessions_per_subject):
            session = f"r{ri + 1:02d}"
            rng = np.random.default_rng(
                np.random.SeedSequence([int(spec.seed), 2, si, ri]))
            tr = np.column_stack([
                _ar1_series(rng, spec.n_frames, AR_COEFF, laplace=True)
                for _ in range(spec.n_sources)
            ])
            g = _ar1_series(rng, spec.n_frames, GLOBAL_AR_COEFF, laplace=False)
            signal = tr @ subj_sources
            if spec.global_amp != 0.0:
                signal = signal + spec.global_amp * np.outer(g, ones)
            if spec.noise_sd > 0.0:
                rms = np.sqrt(np.mean(signal**2))
                signal = signal + spec.noise_sd * rms * rng.standard_normal(signal.shape)
            key = (subject, session)
            sessions[key] = DataMatrix(values=signal, fps=spec.fps)
            traces[key] = tr
            globals_[key] = g

    truth = GroundTruth(sources=sources, traces=traces, global_trace=globals_)
    return SynthDataset(sessions=sessions, mask=mask, truth=truth,
                        frame=default_frame(spec), subject_offsets=subject_offsets)


def default_roles(sessions_per_subject: int) -> list[str]:
    """Per-subject role assignment: last session test, second-last val."""
    roles = ["train"] * sessions_per_subject
    if sessions_per_subject >= 2:
        roles[-1] = "test"
    if sessions_per_subject >= 3:
        roles[-2] = "val"
    return roles


def _safe_abs_corr(a: np.ndarray, b: np.ndarray) -> float:
    ac = a - a.mean()
    bc = b - b.mean()
    va, vb = float(ac @ ac), float(bc @ bc)
    if va == 0.0 or vb == 0.0:
        return 0.0  # junk constant component matches nothing
    return abs(float(ac @ bc) / np.sqrt(va * vb))


def ground_truth_match(estimated: list[SpatialMap],
                       truth) -> tuple[list[tuple[int, int, float]], float]:
    """Greedy one-to-one assignment of estimated maps to ground-truth sources,
    maximizing |pearson| (sign-agnostic: ICA sign is arbitrary).

    Returns (pairs, mean |r|) where pairs are (estimated_idx, source_idx, |r|).
    """
    if not estimated:
        raise ValueError("ground_truth_match needs at least one estimated map")
    sources = truth.sources if isinstance(truth, GroundTruth) else list(truth)
    est = np.stack([m.weights for m in estimated])
    src = np.stack([s.weights for s in sources])
    corr = np.empty((est.shape[0], src.shape[0]))
    for i in range(est.shape[0]):
        for j in range(src.shape[0]):
            corr[i, j] = _safe_abs_corr(est[i], src[j])

    pairs: list[tuple[int, int, float]] = []
    free_est = set(range(est.shape[0]))
    free_src = set(range(src.shape[0]))
    while free_est and free_src:
        best = max(((corr[i, j], i, j) for i in free_est for j in free_src))
        r, i, j = best
        pairs.append((i, j, float(r)))
        free_est.remove(i)
        free_src.remove(j)
    mean_abs = float(np.mean([p[2] for p in pairs]))
    return pairs, mean_abs
