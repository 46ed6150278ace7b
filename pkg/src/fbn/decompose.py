"""Estimating spatial maps from latent time courses by ordinary least
squares, naming them by template matching, and computing functional network
connectivity between the matched time courses.

Matching uses the signed correlation maximum by default (an ``absolute``
switch exists for ICA's arbitrary component signs), with the unmatched floor
r < 0.1 marking junk components that a large latent order tends to produce.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .core import DataMatrix, FcMatrix, LatentEmbedding, SpatialMap, pearson, zscore
from .sbc import TemplateSet

UNMATCHED_FLOOR = 0.1
TIE_TOL = 1e-12
_RANK_RTOL = 1e-8


def _as_array(x, name) -> np.ndarray:
    arr = x.values if hasattr(x, "values") else np.asarray(x)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def _name_collinear_pair(y: np.ndarray) -> tuple[int, int] | None:
    yc = y - y.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", yc, yc))
    ok = norms > 0
    for i in range(y.shape[1]):
        for j in range(i + 1, y.shape[1]):
            if not (ok[i] and ok[j]):
                continue
            r = abs(float(yc[:, i] @ yc[:, j]) / (norms[i] * norms[j]))
            if r > 1.0 - 1e-10:
                return i, j
    return None


def ols_solve(x, y, ridge: bool = False) -> np.ndarray:
    """Least-squares solution W of X ~ Y W via QR factorization.

    Raises on a rank-deficient Y, naming the collinear column pair when one
    exists; with ``ridge=True`` a Tikhonov fallback (lambda = 1e-8 * trace)
    is used instead of raising.
    """
    x = _as_array(x, "X")
    y = _as_array(y, "Y")
    t, c = y.shape
    if x.shape[0] != t:
        raise ValueError(f"X has {x.shape[0]} rows but Y has {t}")
    if t < c:
        raise ValueError(f"need T >= C, got T={t}, C={c}")
    q, r = np.linalg.qr(y, mode="reduced")
    svals = np.linalg.svd(r, compute_uv=False)
    if svals[-1] < _RANK_RTOL * svals[0]:
        if ridge:
            gram = y.T @ y
            lam = 1e-8 * np.trace(gram)
            return np.linalg.solve(gram + lam * np.eye(c), y.T @ x)
        pair = _name_collinear_pair(y)
        detail = (f" (columns {pair[0]} and {pair[1]} have |correlation| > 1 - 1e-10)"
                  if pair else "")
        raise ValueError(f"Y is numerically rank-deficient{detail}")
    return solve_triangular(r, q.T @ x)


def ols_regress(x, y, mask_ref: str | None = None,
                ridge: bool = False) -> list[SpatialMap]:
    """Spatial maps from the latent embedding: rows of the OLS solution of
    X ~ Y W, each standardized into z-scores."""
    w = ols_solve(x, y, ridge=ridge)
    return [SpatialMap(weights=zscore(row), mask_ref=mask_ref) for row in w]


@dataclass
class MapMatch:
    map_index: int
    label: str
    r: float
    unmatched: bool = False
    tied: bool = False


@dataclass
class NetworkAssignment:
    """Template-matching outcome for a list of estimated maps."""

    entries: list[MapMatch]
    absolute: bool = False

    def matched(self) -> list[MapMatch]:
        return [e for e in self.entries if not e.unmatched]

    def labels(self) -> list[str]:
        """Distinct matched labels in first-appearance order."""
        seen: list[str] = []
        for e in self.matched():
            if e.label not in seen:
                seen.append(e.label)
        return seen


def template_match(maps: list[SpatialMap], templates: TemplateSet,
                   absolute: bool = False,
                   floor: float = UNMATCHED_FLOOR) -> NetworkAssignment:
    """Assign each map the label of the template with maximal spatial
    correlation (signed by default; many maps may share a label).

    Ties within 1e-12 go to the lexicographically smallest label and are
    flagged. Matches with a score below ``floor`` are flagged unmatched.
    """
    if not maps:
        raise ValueError("template_match needs at least one map")
    labels = sorted(templates.labels)
    if not labels:
        raise ValueError("template set is empty")
    for sm in maps:
        tpl0 = templates.maps[labels[0]]
        if sm.n_pixels != tpl0.n_pixels:
            raise ValueError(
                f"map has {sm.n_pixels} pixels but templates have {tpl0.n_pixels}"
            )
        if sm.mask_ref is not None and tpl0.mask_ref is not None \
                and sm.mask_ref != tpl0.mask_ref:
            raise ValueError(
                f"mask mismatch: map on {sm.mask_ref!r}, templates on {tpl0.mask_ref!r}"
            )
    entries = []
    for idx, sm in enumerate(maps):
        scores = {}
        for label in labels:
            r = pearson(sm.weights, templates.maps[label].weights)
            scores[label] = abs(r) if absolute else r
        best = max(scores.values())
        candidates = [lab for lab in labels if best - scores[lab] <= TIE_TOL]
        label = min(candidates)  # labels are sorted, min is lexicographic
        entries.append(MapMatch(
            map_index=idx, label=label,
            r=float(pearson(sm.weights, templates.maps[label].weights)),
            unmatched=bool(scores[label] < floor),
            tied=len(candidates) > 1,
        ))
    return NetworkAssignment(entries=entries, absolute=absolute)


def fnc_matrix(y: LatentEmbedding, assignment: NetworkAssignment) -> FcMatrix:
    """Pairwise Pearson correlation between the time courses of the matched
    networks. When several maps share a label, the best-scoring one carries
    the label's time course."""
    best: dict[str, MapMatch] = {}
    for e in assignment.matched():
        score = abs(e.r) if assignment.absolute else e.r
        cur = best.get(e.label)
        cur_score = (abs(cur.r) if assignment.absolute else cur.r) if cur else -np.inf
        if score > cur_score:
            best[e.label] = e
    labels = assignment.labels()
    if len(labels) < 2:
        raise ValueError(f"fnc_matrix needs >= 2 matched networks, got {len(labels)}")
    k = len(labels)
    values = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            r = pearson(y.values[:, best[labels[i]].map_index],
                        y.values[:, best[labels[j]].map_index])
            values[i, j] = values[j, i] = r
    return FcMatrix(values=values, labels=labels)


@dataclass
class PipelineResult:
    maps: list[SpatialMap]
    assignment: NetworkAssignment
    fnc: FcMatrix
    embedding: LatentEmbedding = field(repr=False, default=None)


def lstm_aer_pipeline(session: DataMatrix, model, templates: TemplateSet,
                      absolute: bool = False,
                      floor: float = UNMATCHED_FLOOR) -> PipelineResult:
    """encode -> OLS regression -> template matching -> FNC, composed.

    The session is rescaled into the model's tanh-friendly interval before
    encoding (the same per-session affine used at training time); the
    regression runs on the original data units.
    """
    from .lstm import encode, session_scale_params

    x = session.values
    a, b = session_scale_params(x, *model.rescale)
    y = encode(a * x + b, model)
    maps = ols_regress(x, y.values)
    assignment = template_match(maps, templates, absolute=absolute, floor=floor)
    fnc = fnc_matrix(y, assignment)
    return PipelineResult(maps=maps, assignment=assignment, fnc=fnc, embedding=y)
