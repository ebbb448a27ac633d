"""Grid comparison, residual uniformity, Soret fits and convergence orders."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .fields import FieldGrid


@dataclass(frozen=True)
class ComparisonReport:
    """Norms of ``a - b`` after both grids are rescaled to mean 1.

    ``l1``, ``rms`` and ``linf`` are the mean absolute, root-mean-square and
    largest cellwise differences.  ``l2`` is relative:
    ``||a - b|| / ((||a|| + ||b||) / 2)``, which keeps it symmetric.
    """

    l1: float
    l2: float
    linf: float
    rms: float
    bias: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **extra) -> str:
        return json.dumps({**self.to_dict(), **extra}, sort_keys=True)


def _grid_values(g) -> np.ndarray:
    return g.values if isinstance(g, FieldGrid) else np.asarray(g, dtype=float)


def _mean_one(v: np.ndarray) -> np.ndarray:
    m = v.mean()
    if not m > 0:
        raise NumericalError(f"cannot mean-normalise a grid with mean {m}")
    return v / m


def compare_grids(a, b) -> ComparisonReport:
    """Compare two grids of identical shape on a mean-1 footing."""
    va, vb = _grid_values(a), _grid_values(b)
    if va.shape != vb.shape:
        raise ConfigError(f"grid shapes differ: {va.shape} vs {vb.shape}")
    if isinstance(a, FieldGrid) and isinstance(b, FieldGrid) and a.domain.extent != b.domain.extent:
        raise ConfigError(f"domain extents differ: {a.domain.extent} vs {b.domain.extent}")
    na, nb_ = _mean_one(va), _mean_one(vb)
    d = na - nb_
    ref = 0.5 * (np.linalg.norm(na) + np.linalg.norm(nb_))
    return ComparisonReport(
        l1=float(np.mean(np.abs(d))),
        l2=float(np.linalg.norm(d) / ref),
        linf=float(np.max(np.abs(d))),
        rms=float(np.sqrt(np.mean(d * d))),
        bias=float(np.mean(d)),
    )


def difference(a, b) -> FieldGrid:
    """Cellwise ``a - b`` of the mean-1 normalised grids."""
    if not isinstance(a, FieldGrid):
        raise ConfigError("difference needs FieldGrid inputs")
    va, vb = _grid_values(a), _grid_values(b)
    if va.shape != vb.shape:
        raise ConfigError(f"grid shapes differ: {va.shape} vs {vb.shape}")
    return FieldGrid(a.domain, _mean_one(va) - _mean_one(vb))


@dataclass(frozen=True)
class UniformityReport:
    quadrant_rms: np.ndarray    # (2, 2) for 2D grids, (2,) for 1D halves
    ratio: float

    def to_dict(self) -> dict:
        return {"quadrant_rms": self.quadrant_rms.ravel().tolist(), "uniformity_ratio": self.ratio}


def noise_uniformity(diff) -> UniformityReport:
    """RMS of the centred residual in each quadrant, and max/min across quadrants.

    The residual's own mean is removed first, so a constant residual has
    zero RMS everywhere and ratio 1.
    """
    v = _grid_values(diff)
    if min(v.shape) < 2:
        raise ConfigError(f"need at least 2 bins per axis, got {v.shape}")
    v = v - v.mean()
    if v.ndim == 1:
        halves = np.array_split(v, 2)
        rms = np.array([np.sqrt(np.mean(h * h)) for h in halves])
    else:
        rms = np.empty((2, 2))
        for i, rows in enumerate(np.array_split(np.arange(v.shape[0]), 2)):
            for j, cols in enumerate(np.array_split(np.arange(v.shape[1]), 2)):
                q = v[np.ix_(rows, cols)]
                rms[i, j] = np.sqrt(np.mean(q * q))
    hi, lo = rms.max(), rms.min()
    if hi == 0:
        ratio = 1.0
    elif lo == 0:
        ratio = float("inf")
    else:
        ratio = float(hi / lo)
    return UniformityReport(rms, ratio)


@dataclass(frozen=True)
class SoretFit:
    index: np.ndarray     # interior points with a usable temperature difference
    local: np.ndarray     # S_T estimate at those points
    exponent: float       # slope of ln u against ln T

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "index": self.index.tolist(),
                "S_T_local": self.local.tolist()}


def fit_soret(u, T) -> SoretFit:
    """Local Soret coefficients ``-(d ln u/dx)/(dT/dx)`` and the power-law exponent.

    Central differences on interior points only; the periodic seam is never
    crossed.  Points where the temperature difference vanishes are dropped,
    and a flat ``T`` raises since nothing can be fitted.
    """
    u = np.ravel(_grid_values(u)).astype(float)
    T = np.ravel(_grid_values(T)).astype(float)
    if u.shape != T.shape:
        raise ConfigError("u and T must have the same length")
    if u.size < 3:
        raise ConfigError("need at least three points")
    if np.any(u <= 0) or np.any(T <= 0):
        raise ConfigError("u and T must be positive")
    lu, lT = np.log(u), np.log(T)
    dlu = lu[2:] - lu[:-2]
    dT = T[2:] - T[:-2]
    keep = dT != 0
    idx = np.arange(1, u.size - 1)[keep]
    if idx.size == 0:
        raise NumericalError("temperature is flat everywhere; no Soret coefficient to fit")
    local = -dlu[keep] / dT[keep]
    if np.ptp(lT) == 0:
        raise NumericalError("temperature is constant; exponent undefined")
    exponent = float(np.polyfit(lT, lu, 1)[0])
    return SoretFit(idx, local, exponent)


def convergence_rate(errors) -> float:
    """Least-squares slope of log(error) against log(h) for ``[(h, error), ...]``."""
    pts = np.asarray(list(errors), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ConfigError("need at least two (h, error) pairs")
    h, e = pts[:, 0], pts[:, 1]
    if np.any(e <= 0) or np.any(h <= 0):
        raise ConfigError("spacings and errors must be positive")
    if np.ptp(h) == 0:
        raise ConfigError("need at least two distinct spacings")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])
