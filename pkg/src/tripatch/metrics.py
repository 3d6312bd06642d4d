"""Depth accuracy metrics and parameter accounting."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError
from .jsonio import dumps

FIELDS = ("rel", "rms", "log10", "delta1", "delta2", "delta3", "n_valid", "n_params")


@dataclass(frozen=True)
class MetricsReport:
    rel: float
    rms: float
    log10: float
    delta1: float
    delta2: float
    delta3: float
    n_valid: int
    n_params: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def row(self) -> str:
        """One table row: ``rel rms log10 d1 d2 d3``."""
        return " | ".join(f"{getattr(self, k):.3f}" for k in FIELDS[:6])


def _as_array(x) -> np.ndarray:
    return np.asarray(x.data if hasattr(x, "data") else x, dtype=float)


def evaluate(pred, gt) -> MetricsReport:
    """Standard depth metrics over pixels where both maps carry depth.

    A pixel counts when ``gt > 0`` and ``pred`` is finite and nonzero (zero
    marks missing depth). Negative predictions, possible only for raw
    arrays, are kept in ``rel`` and ``rms``, fail every threshold and are
    left out of ``log10``; a warning reports how many there were. Threshold
    accuracies use a strict ``<``.
    """
    p = _as_array(pred)
    g = _as_array(gt)
    if p.shape != g.shape:
        raise InputError(f"prediction shape {p.shape} does not match ground truth {g.shape}")
    mask = np.isfinite(g) & (g > 0) & np.isfinite(p) & (p != 0)
    n = int(mask.sum())
    if n == 0:
        raise InputError("prediction and ground truth share no valid pixel")
    p = p[mask]
    g = g[mask]
    pos = p > 0
    n_bad = n - int(pos.sum())
    if n_bad:
        warnings.warn(f"{n_bad} nonpositive predicted depths at valid ground-truth pixels", RuntimeWarning, stacklevel=2)
    err = p - g
    rel = float(np.sum(np.abs(err) / g)) / n
    rms = float(np.sqrt(np.sum(err * err) / n))
    lp = int(pos.sum())
    log10 = float(np.sum(np.abs(np.log10(p[pos]) - np.log10(g[pos])))) / lp if lp else 0.0
    ratio = np.full(n, np.inf)
    ratio[pos] = np.maximum(p[pos] / g[pos], g[pos] / p[pos])
    deltas = [float(np.count_nonzero(ratio < 1.25**k)) / n for k in (1, 2, 3)]
    return MetricsReport(rel, rms, log10, *deltas, n_valid=n)


def param_count(kind: str, size: int) -> int:
    """Parameters of a depth representation: 3 per pixel or 3 per face."""
    if size < 0:
        raise InputError(f"size must be non-negative, got {size}")
    if kind not in ("pointcloud", "patchcloud"):
        raise InputError(f"kind must be 'pointcloud' or 'patchcloud', got {kind!r}")
    return 3 * int(size)
