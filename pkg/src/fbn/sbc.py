"""Seed-based correlation: seed traces, correlation maps (Fisher-Z then
z-scored), FC matrices, and group-average template construction.

A seed is a disc in atlas millimetres; a pixel belongs to the seed when its
center lies within diameter/2 of the seed center. Coordinates are (row, col)
millimetre offsets relative to bregma.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    AtlasFrame,
    BrainMask,
    DataMatrix,
    FcMatrix,
    SpatialMap,
    fisher_z,
    pearson,
    zscore,
)
from .validation import DegenerateInputError

log = logging.getLogger("fbn.sbc")

DEFAULT_SEED_DIAMETER_MM = 0.5


@dataclass
class SeedSpec:
    """A named seed disc at an atlas coordinate relative to bregma."""

    name: str
    center_mm: tuple[float, float]  # (row, col) mm offsets from bregma
    diameter_mm: float = DEFAULT_SEED_DIAMETER_MM

    def __post_init__(self):
        if self.diameter_mm <= 0:
            raise ValueError("diameter_mm must be > 0")
        self.center_mm = (float(self.center_mm[0]), float(self.center_mm[1]))


@dataclass
class TemplateSet:
    """Group-average spatial map per network label."""

    maps: dict[str, SpatialMap]
    provenance: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        for label, sm in self.maps.items():
            if sm.label is not None and sm.label != label:
                raise ValueError(f"template key {label!r} disagrees with map label {sm.label!r}")

    @property
    def labels(self) -> list[str]:
        return list(self.maps.keys())


def check_unique_names(seeds: list[SeedSpec]) -> None:
    names = [s.name for s in seeds]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate seed names in {names}")


def seed_pixels(mask: BrainMask, frame: AtlasFrame, seed: SeedSpec) -> np.ndarray:
    """Column indices of in-mask pixels whose centers fall inside the seed disc."""
    coords = mask.pixel_coords().astype(np.float64)
    offsets_mm = (coords - np.array(frame.bregma_px)) * frame.pixel_pitch_mm
    d2 = np.sum((offsets_mm - np.array(seed.center_mm)) ** 2, axis=1)
    radius = seed.diameter_mm / 2.0
    members = np.flatnonzero(d2 <= radius**2)
    if members.size == 0:
        raise ValueError(f"seed {seed.name!r} covers no in-mask pixel")
    return members


def seed_trace(m: DataMatrix, mask: BrainMask, frame: AtlasFrame,
               seed: SeedSpec) -> np.ndarray:
    """Mean time trace over the seed's member pixels."""
    if m.n_pixels != mask.n_pixels:
        raise ValueError("matrix does not match the mask")
    members = seed_pixels(mask, frame, seed)
    return m.values[:, members].mean(axis=1)


def _correlation_map(x: np.ndarray, trace: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel Pearson r against a trace; returns (r, zero-variance indices)."""
    tc = trace - trace.mean()
    tv = float(tc @ tc)
    if tv == 0.0:
        raise DegenerateInputError("seed trace has zero variance")
    xc = x - x.mean(axis=0)
    var = np.einsum("ij,ij->j", xc, xc)
    bad = np.flatnonzero(var == 0.0)
    good = var > 0.0
    r = np.zeros(x.shape[1])
    r[good] = (tc @ xc[:, good]) / np.sqrt(var[good] * tv)
    np.clip(r, -1.0, 1.0, out=r)
    return r, bad


def seed_map(m: DataMatrix, trace: np.ndarray, label: str | None = None,
             mask_ref: str | None = None) -> SpatialMap:
    """Correlation map of every pixel against the seed trace, Fisher
    Z-transformed and standardized to zero mean / unit variance.

    Zero-variance pixels (possible at mask edges after registration) are
    excluded from the standardization statistics, set to 0 in the map, and
    reported by index through the module logger.
    """
    trace = np.asarray(trace, dtype=np.float64)
    if trace.shape != (m.n_frames,):
        raise ValueError(f"trace length {trace.shape} does not match T={m.n_frames}")
    r, bad = _correlation_map(m.values, trace)
    if bad.size:
        log.warning("seed_map: %d zero-variance pixels set to 0 (indices %s%s)",
                    bad.size, ", ".join(map(str, bad[:10])),
                    ", ..." if bad.size > 10 else "")
    good = np.ones(r.size, dtype=bool)
    good[bad] = False
    if np.any(np.abs(r[good]) >= 1.0):
        raise DegenerateInputError(
            "a pixel is perfectly correlated with the seed trace; Fisher Z undefined"
        )
    z = np.arctanh(r[good])
    weights = np.zeros(r.size)
    weights[good] = zscore(z)
    return SpatialMap(weights=weights, label=label, mask_ref=mask_ref)


def fc_matrix(m: DataMatrix, seeds: list[SeedSpec], mask: BrainMask,
              frame: AtlasFrame) -> FcMatrix:
    """Pairwise Pearson correlation of the seed traces; diagonal forced to 1."""
    if len(seeds) < 2:
        raise ValueError("fc_matrix needs at least 2 seeds")
    check_unique_names(seeds)
    traces = [seed_trace(m, mask, frame, s) for s in seeds]
    k = len(seeds)
    values = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            r = pearson(traces[i], traces[j])
            values[i, j] = values[j, i] = r
    return FcMatrix(values=values, labels=[s.name for s in seeds])


def build_templates(sessions: dict[tuple[str, str], DataMatrix],
                    mask: BrainMask, frame: AtlasFrame,
                    seeds: list[SeedSpec]) -> TemplateSet:
    """Group-average seed maps: average sessions within subject, then average
    subjects, then re-z-score. Permutation-invariant over subjects/sessions."""
    if not sessions:
        raise ValueError("build_templates needs at least one session")
    check_unique_names(seeds)
    by_subject: dict[str, list[tuple[str, str]]] = {}
    for key in sessions:
        by_subject.setdefault(key[0], []).append(key)

    maps: dict[str, SpatialMap] = {}
    for seed in seeds:
        subject_means = []
        for subject in sorted(by_subject):
            session_maps = []
            for key in sorted(by_subject[subject]):
                m = sessions[key]
                trace = seed_trace(m, mask, frame, seed)
                session_maps.append(seed_map(m, trace, label=seed.name).weights)
            subject_means.append(np.mean(session_maps, axis=0))
        grand = np.mean(subject_means, axis=0)
        maps[seed.name] = SpatialMap(weights=zscore(grand), label=seed.name)
    return TemplateSet(maps=maps, provenance=sorted(sessions.keys()))


def default_seed_table() -> list[SeedSpec]:
    """Placeholder bilateral seed coordinates (mm relative to bregma).

    These are reasonable dorsal-cortex locations but are NOT measured atlas
    coordinates; studies must override them in the run config.
    """
    base = {
        "motor": (-0.5, 1.3),
        "somatosensory": (0.6, 2.4),
        "retrosplenial": (2.6, 0.6),
        "visual": (3.4, 2.2),
        "auditory": (2.4, 3.6),
    }
    seeds = []
    for name, (row_mm, col_mm) in base.items():
        seeds.append(SeedSpec(name=f"{name}_l", center_mm=(row_mm, -col_mm)))
        seeds.append(SeedSpec(name=f"{name}_r", center_mm=(row_mm, col_mm)))
    return seeds
