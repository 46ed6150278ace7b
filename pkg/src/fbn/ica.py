"""Spatial FastICA: PCA whitening and the symmetric fixed-point iteration
with tanh (logcosh) contrast, producing z-scored component maps.

The data matrix X (T frames x N pixels) is modeled as X = A S with S the
C spatially independent sources (rows over pixels) and A the T x C mixing
matrix of component time courses. Pixels are the ICA samples: each row of
X is centered to zero mean over pixels, the top-C singular subspace gives
the whitening projection, and the fixed point runs in the whitened C x N
space with symmetric (parallel) decorrelation, so no estimation-order error
accumulates across components.

Deterministic given (data, C, seed): the initial unmixing matrix is seeded
standard normal, then orthonormalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .core import DataMatrix, LatentEmbedding, SpatialMap, zscore

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 200
RANK_RTOL = 1e-10


@dataclass
class WhitenModel:
    """Centering vector and whitening projection.

    ``mean`` holds the per-frame means over pixels (length T) that were
    subtracted to row-center the data; ``projection`` is the C x T matrix K
    with K Cov K^T = I over the pixel samples.
    """

    mean: np.ndarray
    projection: np.ndarray
    explained_variance: np.ndarray


@dataclass
class IcaResult:
    sources: list[SpatialMap]          # C z-scored spatial maps
    mixing: LatentEmbedding            # T x C component time courses
    unmixing: np.ndarray               # C x C in whitened space, orthonormal rows
    n_iter: int
    converged: bool


def _centered(m) -> tuple[np.ndarray, np.ndarray]:
    x = m.values if isinstance(m, DataMatrix) else np.asarray(m, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {x.shape}")
    mean = x.mean(axis=1)
    return x - mean[:, None], mean


def whiten(m, n_components: int) -> tuple[WhitenModel, np.ndarray]:
    """Row-center and project onto the top-C singular subspace.

    Returns (model, Z) where Z is C x N with Z Z^T / N = I.
    """
    xc, mean = _centered(m)
    t, n = xc.shape
    c = int(n_components)
    if c < 1 or c > min(t, n):
        raise ValueError(f"n_components={c} must be in [1, min(T, N)={min(t, n)}]")
    u, s, vt = np.linalg.svd(xc, full_matrices=False)
    if s[c - 1] < RANK_RTOL * s[0]:
        raise ValueError(
            f"requested {c} components but numerical rank is "
            f"{int(np.sum(s >= RANK_RTOL * s[0]))}"
        )
    k = (u[:, :c] / s[:c]).T  # C x T
    z = (k @ xc) * np.sqrt(n)
    model = WhitenModel(mean=mean, projection=k,
                        explained_variance=(s[:c] ** 2) / n)
    return model, z


def _sym_decorrelate(w: np.ndarray) -> np.ndarray:
    """W <- (W W^T)^(-1/2) W via eigendecomposition."""
    evals, evecs = np.linalg.eigh(w @ w.T)
    if np.min(evals) <= 0:
        raise ValueError("unmixing matrix became singular during decorrelation")
    inv_sqrt = (evecs * (1.0 / np.sqrt(evals))) @ evecs.T
    return inv_sqrt @ w


def fastica(m, n_components: int = 16, tol: float = DEFAULT_TOL,
            max_iter: int = DEFAULT_MAX_ITER, seed: int = 0) -> IcaResult:
    """Run spatial FastICA on a data matrix.

    Convergence: max over components of |1 - |<w_new, w_old>|| < tol.
    Non-convergence is not an exception; the result carries converged=False.
    """
    whiten_model, z = whiten(m, n_components)
    c, n = z.shape
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x1CA]))
    w = _sym_decorrelate(rng.standard_normal((c, c)))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        wz = w @ z                     # C x N component estimates
        g = np.tanh(wz)
        g_prime = np.mean(1.0 - g * g, axis=1)
        w_new = (g @ z.T) / n - g_prime[:, None] * w
        w_new = _sym_decorrelate(w_new)
        delta = float(np.max(np.abs(1.0 - np.abs(np.sum(w_new * w, axis=1)))))
        w = w_new
        if delta < tol:
            converged = True
            break

    s_raw = w @ z
    sources = [SpatialMap(weights=zscore(row)) for row in s_raw]
    xc, _ = _centered(m)
    s_mat = np.stack([sm.weights for sm in sources])
    mixing = LatentEmbedding(values=xc @ np.linalg.pinv(s_mat))
    return IcaResult(sources=sources, mixing=mixing, unmixing=w,
                     n_iter=it, converged=converged)


def ica_timecourses(result: IcaResult, m=None) -> LatentEmbedding:
    """Component time courses A, the least-squares solution of X = A S.

    With no data argument this returns the mixing computed at fit time;
    passing ``m`` recomputes A for that matrix against the fitted sources.
    """
    if m is None:
        return result.mixing
    xc, _ = _centered(m)
    s_mat = np.stack([sm.weights for sm in result.sources])
    return LatentEmbedding(values=xc @ np.linalg.pinv(s_mat))


class FastIca(BaseEstimator):
    """sklearn-style estimator for the spatial FastICA above.

    Attributes after fit: ``components_`` (C x N z-scored maps), ``maps_``
    (the same as SpatialMap objects), ``mixing_`` (T x C), ``unmixing_``,
    ``whiten_``, ``n_iter_``, ``converged_``.
    """

    def __init__(self, n_components=16, tol=DEFAULT_TOL,
                 max_iter=DEFAULT_MAX_ITER, random_state=0):
        self.n_components = n_components
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        result = fastica(X, n_components=self.n_components, tol=self.tol,
                         max_iter=self.max_iter, seed=self.random_state)
        self.maps_ = result.sources
        self.components_ = np.stack([sm.weights for sm in result.sources])
        self.mixing_ = result.mixing.values
        self.unmixing_ = result.unmixing
        self.n_iter_ = result.n_iter
        self.converged_ = result.converged
        self.result_ = result
        return self

    def transform(self, X) -> np.ndarray:
        """Time courses of the fitted sources in a (possibly new) matrix."""
        xc, _ = _centered(X)
        return xc @ np.linalg.pinv(self.components_)

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X).mixing_
