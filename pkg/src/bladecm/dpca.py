"""Dynamic PCA reconstruction models, one per operating region, with SPE monitoring."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .data import (
    NormalizerState,
    RegionBoundaries,
    RegionLabel,
    SignalMatrix,
    embed_rows,
    fit_normalizer,
    region_segments,
    segment_regions,
)
from .errors import (
    AllZeroSpectrum,
    ChannelMismatch,
    DimensionMismatch,
    InsufficientData,
    MissingModel,
    NoConvergence,
    NotSymmetric,
)
from .stats import ResidualTrace, lowpass, quantile_threshold

DEFAULT_WINDOW = 100
DEFAULT_CV = 0.9
DEFAULT_PF = 0.01
DEFAULT_LPF_ALPHA = 0.98
_CHUNK = 2048


def symmetric_eigendecomposition(S, tol: float = 1e-10):
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix.

    Each eigenvector is signed so that its largest-magnitude entry is positive.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise NotSymmetric("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if S.size and np.max(np.abs(S - S.T)) > tol * scale:
        raise NotSymmetric("matrix is not symmetric")
    try:
        w, V = np.linalg.eigh(0.5 * (S + S.T))
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from None
    w, V = w[::-1], V[:, ::-1]
    pivot = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[pivot, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return w.copy(), V * signs


def select_components(eigenvalues, cv_target: float) -> int:
    """Smallest l whose leading eigenvalues carry at least ``cv_target`` of the total."""
    lam = np.asarray(eigenvalues, dtype=float)
    if not 0 < cv_target <= 1:
        raise ValueError(f"cv_target must lie in (0, 1], got {cv_target}")
    total = lam.sum()
    if lam.size == 0 or total <= 0:
        raise AllZeroSpectrum("eigenvalue spectrum sums to zero")
    cv = np.cumsum(lam) / total
    # cumulative sums can fall a rounding error short of an exact target
    return int(np.argmax(cv >= cv_target - 1e-12)) + 1


@dataclass(frozen=True)
class DpcaModel:
    region: RegionLabel
    normalizer: NormalizerState
    window: int
    loadings: np.ndarray
    eigenvalues: np.ndarray
    spe_threshold: float
    lpf_alpha: float = DEFAULT_LPF_ALPHA
    glr: Optional[object] = None

    def __post_init__(self):
        P = np.asarray(self.loadings, dtype=float)
        dim = len(self.normalizer.channels) * self.window
        if P.ndim != 2 or P.shape[0] != dim or not 1 <= P.shape[1] <= dim:
            raise DimensionMismatch(f"loadings of shape {P.shape} do not fit dimension {dim}")
        if not self.spe_threshold > 0:
            raise ValueError("spe_threshold must be positive")
        object.__setattr__(self, "region", RegionLabel(self.region))
        object.__setattr__(self, "loadings", P)
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=float))

    @property
    def n_components(self) -> int:
        return self.loadings.shape[1]

    @property
    def dim(self) -> int:
        return self.loadings.shape[0]


def spe(model: DpcaModel, window_row) -> float:
    """Squared norm of the part of one embedded row off the principal subspace."""
    x = np.asarray(window_row, dtype=float)
    if x.shape != (model.dim,):
        raise DimensionMismatch(f"expected a row of length {model.dim}, got {x.shape}")
    e = x - model.loadings @ (model.loadings.T @ x)
    return float(e @ e)


def spe_rows(loadings: np.ndarray, rows: np.ndarray) -> np.ndarray:
    e = rows - (rows @ loadings) @ loadings.T
    return np.einsum("ij,ij->i", e, e)


def _segment_spe(loadings, z: np.ndarray, window: int) -> np.ndarray:
    """SPE for every full window of a normalized contiguous segment, chunked for memory."""
    n = z.shape[0] - window + 1
    out = np.empty(n)
    for a in range(0, n, _CHUNK):
        b = min(n, a + _CHUNK)
        out[a:b] = spe_rows(loadings, embed_rows(z[a:b + window - 1], window))
    return out


def _as_segments(train) -> list[SignalMatrix]:
    return [train] if isinstance(train, SignalMatrix) else list(train)


def fit_dpca(
    train: SignalMatrix | Sequence[SignalMatrix],
    region: RegionLabel,
    window: int = DEFAULT_WINDOW,
    cv_target: float = DEFAULT_CV,
    pf: float = DEFAULT_PF,
    lpf_alpha: float = DEFAULT_LPF_ALPHA,
    normalizer: Optional[NormalizerState] = None,
) -> DpcaModel:
    """Fit a dPCA model on healthy data from one region.

    ``train`` may be a list of contiguous segments; embedding windows never
    straddle two segments, and the filter restarts on each segment.
    """
    segments = [s for s in _as_segments(train) if s.n >= window]
    if not segments:
        raise InsufficientData(f"no segment is at least {window} samples long")
    norm = normalizer if normalizer is not None else fit_normalizer(segments)
    m = len(norm.channels)
    dim = m * window
    n_rows = sum(s.n - window + 1 for s in segments)
    if n_rows < dim + 1 or sum(s.n for s in segments) < window + dim:
        raise InsufficientData(f"{n_rows} embedded rows are too few for dimension {dim}")

    zs = [(s.samples - norm.mean) / norm.std for s in segments]
    S = np.zeros((dim, dim))
    for z in zs:
        n = z.shape[0] - window + 1
        for a in range(0, n, _CHUNK):
            X = embed_rows(z[a:min(n, a + _CHUNK) + window - 1], window)
            S += X.T @ X
    S /= n_rows - 1
    S = 0.5 * (S + S.T)
    lam, V = symmetric_eigendecomposition(S)
    lam = np.clip(lam, 0.0, None)
    l = select_components(lam, cv_target)
    P = V[:, :l].copy()

    filtered = np.concatenate([lowpass(_segment_spe(P, z, window), lpf_alpha) for z in zs])
    threshold = quantile_threshold(filtered, pf)
    return DpcaModel(RegionLabel(region), norm, window, P, lam, threshold, lpf_alpha)


def training_spe(model: DpcaModel, train) -> np.ndarray:
    """Filtered SPE of each training segment, concatenated (the threshold population)."""
    out = []
    for s in _as_segments(train):
        if s.n >= model.window:
            z = (s.samples - model.normalizer.mean) / model.normalizer.std
            out.append(lowpass(_segment_spe(model.loadings, z, model.window), model.lpf_alpha))
    return np.concatenate(out) if out else np.zeros(0)


def dpca_monitor(
    models: Mapping[RegionLabel, DpcaModel],
    run: SignalMatrix,
    bounds: RegionBoundaries | None = None,
    regions: Optional[np.ndarray] = None,
) -> ResidualTrace:
    """Route each sample to its region's model and compute the SPE trace.

    Region I samples carry SPE 0 and never alarm. A region run only starts
    emitting once a full window of it has been seen; the low-pass filter
    restarts at every region change.
    """
    labels = segment_regions(run, bounds) if regions is None else np.asarray(regions)
    n = run.n
    raw = np.full(n, np.nan)
    filt = np.full(n, np.nan)
    thr = np.full(n, np.inf)
    for region in RegionLabel:
        spans = region_segments(labels, int(region))
        if not spans:
            continue
        if region == RegionLabel.I:
            for a, b in spans:
                raw[a:b] = 0.0
                filt[a:b] = 0.0
            continue
        model = models.get(region)
        if model is None:
            raise MissingModel(region)
        if model.normalizer.channels != run.channels:
            raise ChannelMismatch("run channels differ from the model's")
        w = model.window
        for a, b in spans:
            thr[a:b] = model.spe_threshold
            if b - a < w:
                continue
            z = (run.samples[a:b] - model.normalizer.mean) / model.normalizer.std
            s = _segment_spe(model.loadings, z, w)
            raw[a + w - 1:b] = s
            filt[a + w - 1:b] = lowpass(s, model.lpf_alpha)
    flags = np.zeros(n, dtype=bool)
    ok = np.isfinite(filt)
    flags[ok] = filt[ok] > thr[ok]
    return ResidualTrace(raw, filt, thr, flags, labels)
