"""Master equation vs. trajectory-ensemble comparison statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Grid points with fewer surviving trajectories carry no usable standard error.
MIN_SURVIVORS = 30
#: Absolute slack for floating-point round-off where the MC spread is exactly zero (t = 0).
ROUNDOFF = 1e-12


@dataclass(frozen=True)
class Agreement:
    n_points: int
    n_resolved: int
    frac_within_all: float
    frac_within: float
    max_abs_dev: float
    rms_dev: float
    max_abs_z: float
    mean_signed_dev: float

    def summary(self, nsigma: float = 3.0) -> str:
        return (
            f"max|dev|={self.max_abs_dev:.4g} rms={self.rms_dev:.4g} max|z|={self.max_abs_z:.3g} "
            f"within {nsigma:g} sigma: {100 * self.frac_within:.2f}% of {self.n_resolved} resolved points "
            f"({100 * self.frac_within_all:.2f}% of all {self.n_points}) mean signed dev={self.mean_signed_dev:+.4g}"
        )


def resolved_points(alive: np.ndarray, min_survivors: int = MIN_SURVIVORS) -> np.ndarray:
    return np.asarray(alive) >= min_survivors


def z_scores(predicted, observed, stderr) -> np.ndarray:
    dev = np.asarray(predicted) - np.asarray(observed)
    se = np.asarray(stderr, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, dev / se, np.where(np.abs(dev) <= ROUNDOFF, 0.0, np.inf))
    return z


def band_agreement(predicted, observed, stderr, alive, *, nsigma: float = 3.0, min_survivors: int = MIN_SURVIVORS) -> Agreement:
    """How often the prediction lies inside the MC +/- nsigma standard-error band."""
    dev = np.asarray(predicted, dtype=float) - np.asarray(observed, dtype=float)
    se = np.asarray(stderr, dtype=float)
    within = np.abs(dev) <= nsigma * np.nan_to_num(se, nan=0.0) + ROUNDOFF
    finite = np.isfinite(dev)
    within &= finite
    ok = resolved_points(alive, min_survivors) & finite
    z = z_scores(predicted, observed, stderr)
    return Agreement(
        n_points=len(dev),
        n_resolved=int(ok.sum()),
        frac_within_all=float(within.mean()),
        frac_within=float(within[ok].mean()) if ok.any() else float("nan"),
        max_abs_dev=float(np.max(np.abs(dev[ok]))) if ok.any() else float("nan"),
        rms_dev=float(np.sqrt(np.mean(dev[ok] ** 2))) if ok.any() else float("nan"),
        max_abs_z=float(np.max(np.abs(z[ok]))) if ok.any() else float("nan"),
        mean_signed_dev=float(np.mean(dev[ok])) if ok.any() else float("nan"),
    )


def local_extrema(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of interior local minima and maxima of a sampled curve."""
    d = np.sign(np.diff(y))
    # carry the last non-zero slope across flat stretches
    for i in range(1, len(d)):
        if d[i] == 0:
            d[i] = d[i - 1]
    turn = np.diff(d)
    minima = np.flatnonzero(turn > 0) + 1
    maxima = np.flatnonzero(turn < 0) + 1
    return minima, maxima


def extremum_regions(pcoh: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split the grid into points nearer a p_coh minimum and points nearer a maximum."""
    minima, maxima = local_extrema(np.asarray(pcoh, dtype=float))
    n = len(pcoh)
    idx = np.arange(n)
    if len(minima) == 0 or len(maxima) == 0:
        return np.zeros(n, bool), np.zeros(n, bool)
    dmin = np.min(np.abs(idx[:, None] - minima[None, :]), axis=1)
    dmax = np.min(np.abs(idx[:, None] - maxima[None, :]), axis=1)
    return dmin < dmax, dmax < dmin


@dataclass(frozen=True)
class SignedDeviation:
    overall: float
    near_minima: float
    near_maxima: float

    @property
    def positive_and_localized(self) -> bool:
        return self.overall > 0 and self.near_minima > self.near_maxima


def signed_deviation_by_pcoh(predicted, observed, pcoh, alive, min_survivors: int = MIN_SURVIVORS) -> SignedDeviation:
    dev = np.asarray(predicted, dtype=float) - np.asarray(observed, dtype=float)
    ok = resolved_points(alive, min_survivors) & np.isfinite(dev)
    near_min, near_max = extremum_regions(pcoh)
    return SignedDeviation(
        overall=float(np.mean(dev[ok])),
        near_minima=float(np.mean(dev[ok & near_min])) if (ok & near_min).any() else float("nan"),
        near_maxima=float(np.mean(dev[ok & near_max])) if (ok & near_max).any() else float("nan"),
    )
