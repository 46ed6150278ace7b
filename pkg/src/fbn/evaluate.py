"""Evaluation battery: Dice overlap against reference intensity maps,
exact t-SNE with per-point perplexity calibration, silhouette scoring,
inter/intra-subject reproducibility, paired t-tests (incomplete-beta
p-values, no stats dependency), epoch-length stability curves, and
standard-deviation maps.

Binary maps are plain boolean N-vectors over a BrainMask's pixel order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import DataMatrix, SpatialMap, pearson
from .decompose import template_match
from .preprocess import segment_epochs
from .sbc import TemplateSet
from .validation import DegenerateInputError

log = logging.getLogger("fbn.evaluate")

_ATANH_CLIP = 1.0 - 1e-15


def threshold_reference(apc: np.ndarray) -> np.ndarray:
    """Binarize a nonnegative reference intensity map at 50% of its maximum
    (boundary inclusive)."""
    apc = np.asarray(apc, dtype=np.float64)
    if apc.ndim != 1:
        raise ValueError(f"reference map must be 1-D, got shape {apc.shape}")
    if np.any(apc < 0):
        raise ValueError("reference map must be nonnegative")
    peak = float(apc.max(initial=0.0))
    if peak <= 0:
        raise DegenerateInputError("reference map is all zero")
    return apc >= 0.5 * peak


def threshold_fbn(sm: SpatialMap, median_mode: str = "midpoint") -> np.ndarray:
    """Binarize a z-scored map at the median of its positive values
    (boundary inclusive), so the top half of the positive pixels survive.

    ``median_mode`` selects the even-count convention: "midpoint" (default),
    "lower", or "upper".
    """
    w = sm.weights
    pos = w[w > 0]
    if pos.size == 0:
        raise DegenerateInputError("map has no positive z-scores to threshold")
    srt = np.sort(pos)
    n = srt.size
    if n % 2 == 1 or median_mode == "lower":
        med = srt[(n - 1) // 2]
    elif median_mode == "upper":
        med = srt[n // 2]
    elif median_mode == "midpoint":
        med = 0.5 * (srt[n // 2 - 1] + srt[n // 2])
    else:
        raise ValueError(f"unknown median_mode {median_mode!r}")
    return w >= med


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """Dice overlap 2|a&b| / (|a| + |b|) of two boolean maps."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"binary maps differ in shape: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        raise DegenerateInputError("both maps are empty")
    return 2.0 * int((a & b).sum()) / total


@dataclass
class EmbeddedPoints:
    """2-D embedding with optional per-point subject/network labels."""

    coords: np.ndarray
    subject_labels: list[str] | None = None
    network_labels: list[str] | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 2 or self.coords.shape[1] != 2:
            raise ValueError(f"coords must be (M, 2), got {self.coords.shape}")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("coords contain non-finite values")


def _squared_distances(x: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _conditional_probs(d2: np.ndarray, perplexity: float,
                       tol: float = 1e-5, max_steps: int = 200) -> np.ndarray:
    """Per-row Gaussian kernels with bandwidth tuned by binary search until
    each row's perplexity matches the target within ``tol``."""
    m = d2.shape[0]
    p = np.zeros((m, m))
    for i in range(m):
        idx = np.arange(m) != i
        di = d2[i, idx]
        beta, lo, hi = 1.0, 0.0, np.inf
        row = None
        for _ in range(max_steps):
            row = np.exp(-di * beta)
            s = row.sum()
            if s <= 0:
                hi = beta
                beta = beta / 2.0
                continue
            row = row / s
            ent = -np.sum(row * np.log(np.maximum(row, 1e-300)))
            perp = math.exp(ent)
            if abs(perp - perplexity) <= tol:
                break
            if perp > perplexity:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
        p[i, idx] = row
    return p


def tsne(points: np.ndarray, perplexity: float = 30.0, iters: int = 1000,
         seed: int = 0, learning_rate: float = 200.0,
         subject_labels=None, network_labels=None) -> EmbeddedPoints:
    """Exact O(M^2) t-SNE into 2-D.

    Early exaggeration x12 for the first 250 iterations, momentum 0.5
    switching to 0.8 at iteration 250. Duplicate points are separated by a
    seeded 1e-10 jitter (logged). Deterministic given the seed.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"points must be (M, D), got shape {x.shape}")
    m = x.shape[0]
    if m < 4:
        raise ValueError(f"t-SNE needs at least 4 points, got {m}")
    if not perplexity < m:
        raise ValueError(f"perplexity {perplexity} must be < number of points {m}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x75E]))
    d2 = _squared_distances(x)
    off = ~np.eye(m, dtype=bool)
    if np.any(d2[off] == 0.0):
        log.warning("tsne: duplicate points detected; applying 1e-10 jitter")
        x = x + rng.normal(0.0, 1e-10, size=x.shape)
        d2 = _squared_distances(x)
    cond = _conditional_probs(d2, perplexity)
    p = (cond + cond.T) / (2.0 * m)
    p = np.maximum(p, 1e-12)

    y = rng.normal(0.0, 1e-4, size=(m, 2))
    update = np.zeros_like(y)
    exaggeration = 12.0
    p_run = p * exaggeration
    for it in range(iters):
        if it == 250:
            p_run = p
        momentum = 0.5 if it < 250 else 0.8
        num = 1.0 / (1.0 + _squared_distances(y))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)
        pq = (p_run - q) * num
        grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)
        update = momentum * update - learning_rate * grad
        y = y + update
        y = y - y.mean(axis=0)
    return EmbeddedPoints(coords=y,
                          subject_labels=list(subject_labels) if subject_labels else None,
                          network_labels=list(network_labels) if network_labels else None)


def silhouette(points, labels) -> tuple[float, np.ndarray]:
    """Mean and per-point silhouette s = (b - a) / max(a, b) with Euclidean
    distances; singleton-cluster points score 0 by convention."""
    coords = points.coords if isinstance(points, EmbeddedPoints) else np.asarray(points, dtype=np.float64)
    labels = np.asarray(list(labels))
    if coords.shape[0] != labels.shape[0]:
        raise ValueError("labels do not match the number of points")
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least 2 distinct labels")
    d = np.sqrt(_squared_distances(coords))
    scores = np.zeros(coords.shape[0])
    for i in range(coords.shape[0]):
        same = (labels == labels[i])
        n_same = int(same.sum())
        if n_same == 1:
            scores[i] = 0.0
            continue
        a = d[i, same].sum() / (n_same - 1)
        b = min(float(d[i, labels == lab].mean()) for lab in uniq if lab != labels[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean()), scores


def _fisher_mean(rs) -> float:
    z = np.arctanh(np.clip(np.asarray(rs, dtype=np.float64),
                           -_ATANH_CLIP, _ATANH_CLIP))
    return float(np.tanh(z.mean()))


def reproducibility(maps: dict[tuple[str, str, str], SpatialMap]
                    ) -> tuple[dict[str, float], dict[str, float]]:
    """Intra-subject reliability and inter-subject reproducibility per label.

    intra: mean (over subjects) of the pairwise correlations between a
    subject's session maps. inter: pairwise correlations between the
    subject-averaged maps. Fisher-Z averaging throughout.
    """
    subjects = sorted({k[0] for k in maps})
    labels = sorted({k[2] for k in maps})
    sessions_of = {s: sorted({k[1] for k in maps if k[0] == s}) for s in subjects}
    if len(subjects) < 2:
        raise ValueError("inter-subject reproducibility needs >= 2 subjects")
    if any(len(v) < 2 for v in sessions_of.values()):
        raise ValueError("intra-subject reliability needs >= 2 sessions per subject")
    for s in subjects:
        for r in sessions_of[s]:
            for lab in labels:
                if (s, r, lab) not in maps:
                    raise ValueError(f"missing map for subject {s}, session {r}, label {lab}")

    intra: dict[str, float] = {}
    inter: dict[str, float] = {}
    for lab in labels:
        subj_z = []
        subj_mean_maps = []
        for s in subjects:
            ws = [maps[(s, r, lab)].weights for r in sessions_of[s]]
            rs = [pearson(ws[i], ws[j])
                  for i in range(len(ws)) for j in range(i + 1, len(ws))]
            z = np.arctanh(np.clip(rs, -_ATANH_CLIP, _ATANH_CLIP))
            subj_z.append(z.mean())
            subj_mean_maps.append(np.mean(ws, axis=0))
        intra[lab] = float(np.tanh(np.mean(subj_z)))
        rs = [pearson(subj_mean_maps[i], subj_mean_maps[j])
              for i in range(len(subjects)) for j in range(i + 1, len(subjects))]
        inter[lab] = _fisher_mean(rs)
    return intra, inter


def _betacf(a: float, b: float, x: float, tol: float = 1e-12,
            max_iter: int = 500) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) evaluated by continued fraction to ~1e-12."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def paired_ttest(a, b) -> tuple[float, int, float]:
    """Two-sided paired t-test. Returns (t, df, p).

    Identical inputs (all differences zero) return t = 0, p = 1; a nonzero
    constant difference has no variance to test against and raises instead
    of reporting an infinite t.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired_ttest needs two equal-length 1-D arrays")
    n = a.size
    if n < 2:
        raise ValueError(f"paired_ttest needs n >= 2, got {n}")
    d = a - b
    sd = float(d.std(ddof=1))
    mean = float(d.mean())
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, df, 1.0
        raise DegenerateInputError(
            "differences are a nonzero constant; t statistic is unbounded"
        )
    t = mean * math.sqrt(n) / sd
    p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return float(t), df, float(p)


@dataclass
class EpochStabilityPoint:
    length_s: float
    mean_r: float
    n_epochs: int
    n_labels: int
    n_failures: int


def epoch_stability_curve(session: DataMatrix, method, lengths,
                          reference: TemplateSet, absolute: bool = False,
                          max_epochs: int | None = None) -> list[EpochStabilityPoint]:
    """Spatial similarity of maps from short epochs against reference maps.

    ``method`` maps a DataMatrix to a list of SpatialMap. Maps already
    labeled with reference labels pair directly (the SBC case); unlabeled
    maps are template-matched first. Per-epoch failures are recorded in the
    result rather than raised.
    """
    points = []
    ref_labels = set(reference.labels)
    for length in lengths:
        epochs = segment_epochs(session, length)
        if max_epochs is not None:
            epochs = epochs[:max_epochs]
        rs: list[float] = []
        n_labels = 0
        failures = 0
        for ep in epochs:
            try:
                maps = method(ep)
                labeled = all(sm.label in ref_labels for sm in maps)
                if labeled:
                    scored = {sm.label: pearson(sm.weights,
                                                reference.maps[sm.label].weights)
                              for sm in maps}
                else:
                    assignment = template_match(maps, reference, absolute=absolute,
                                                floor=-np.inf)
                    scored = {}
                    for e in assignment.entries:
                        score = abs(e.r) if absolute else e.r
                        prev = scored.get(e.label)
                        if prev is None or score > (abs(prev) if absolute else prev):
                            scored[e.label] = e.r
                vals = [abs(v) if absolute else v for v in scored.values()]
                rs.append(float(np.mean(vals)))
                n_labels = max(n_labels, len(scored))
            except Exception as exc:  # failure is data, not a crash
                failures += 1
                log.warning("epoch_stability_curve: length %.3gs failed: %s",
                            length, exc)
        mean_r = float(np.mean(rs)) if rs else float("nan")
        points.append(EpochStabilityPoint(length_s=float(length), mean_r=mean_r,
                                          n_epochs=len(epochs), n_labels=n_labels,
                                          n_failures=failures))
    return points


def std_maps(maps: dict[str, dict[str, SpatialMap]]
             ) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel variation maps for one network.

    inter: sample std across the subject-averaged maps. intra: sample std
    across sessions within each subject, averaged over subjects.
    """
    subjects = sorted(maps)
    if len(subjects) < 2:
        raise ValueError("std_maps needs >= 2 subjects")
    subj_means = []
    intra_stack = []
    for s in subjects:
        sess = sorted(maps[s])
        if len(sess) < 2:
            raise ValueError(f"subject {s} needs >= 2 sessions")
        ws = np.stack([maps[s][r].weights for r in sess])
        subj_means.append(ws.mean(axis=0))
        intra_stack.append(ws.std(axis=0, ddof=1))
    inter = np.std(np.stack(subj_means), axis=0, ddof=1)
    intra = np.mean(np.stack(intra_stack), axis=0)
    return inter, intra
