"""Grids, curve containers, CSV ingestion, and pre-smoothing of noisy panels.

A panel holds ``p`` series observed over ``J`` time units, each unit sampled
at ``Z`` grid points in [0, 1].  Everything downstream (spectral estimation,
filters, scores) works on the centered, pre-smoothed curves produced here.
All inner products and norms in the package are trapezoidal quadrature on
the shared :class:`TimeGrid`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CSVParseError,
    InsufficientDataError,
    InvalidInputError,
    MissingDataError,
)

DEFAULT_ALPHA_GRID = np.logspace(-6.0, 4.0, 25)


@dataclass
class TimeGrid:
    """Within-unit sampling grid on [0, 1] with trapezoidal quadrature weights."""

    points: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 1 or self.points.size < 2:
            raise InvalidInputError("grid needs at least two points")
        if np.any(np.diff(self.points) <= 0):
            raise InvalidInputError("grid points must be strictly increasing")
        if self.points[0] < -1e-12 or self.points[-1] > 1 + 1e-12:
            raise InvalidInputError("grid points must lie in [0, 1]")
        if self.weights is None:
            d = np.diff(self.points)
            w = np.empty_like(self.points)
            w[0] = d[0] / 2
            w[-1] = d[-1] / 2
            w[1:-1] = (d[:-1] + d[1:]) / 2
            self.weights = w
        else:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != self.points.shape:
                raise InvalidInputError("weights must match points in length")
            if np.any(self.weights < 0):
                raise InvalidInputError("quadrature weights must be nonnegative")

    @classmethod
    def regular(cls, n_points: int) -> "TimeGrid":
        """Equally spaced grid spanning [0, 1]."""
        return cls(np.linspace(0.0, 1.0, int(n_points)))

    @property
    def n_points(self) -> int:
        return self.points.size

    def __eq__(self, other):
        return (
            isinstance(other, TimeGrid)
            and self.points.shape == other.points.shape
            and np.allclose(self.points, other.points)
        )


@dataclass
class FreqGrid:
    """Whittle frequency grid theta_j = 2*pi*j/J for j = 1..J."""

    n_units: int

    def __post_init__(self):
        if self.n_units < 1:
            raise InvalidInputError("frequency grid needs J >= 1")

    @property
    def frequencies(self) -> np.ndarray:
        J = self.n_units
        return 2.0 * np.pi * np.arange(1, J + 1) / J

    def half_indices(self) -> np.ndarray:
        """0-based positions of theta <= pi, plus theta = 2*pi.

        Frequency-domain objects are conjugate-symmetric about pi, so this
        index set carries all information; see :meth:`reflect_index`.
        """
        J = self.n_units
        low = np.arange(0, J // 2)  # paper j = 1..floor(J/2): theta <= pi
        return np.concatenate([low, [J - 1]])

    def multiplicities(self) -> np.ndarray:
        """How many full-grid frequencies each half-grid entry represents."""
        J = self.n_units
        idx = self.half_indices()
        m = np.full(idx.size, 2)
        theta = self.frequencies[idx]
        m[np.isclose(theta, np.pi)] = 1
        m[np.isclose(theta, 2 * np.pi)] = 1
        return m

    def reflect_index(self, j: int) -> int:
        """Partner position with theta' = 2*pi - theta (self for theta = 2*pi)."""
        J = self.n_units
        if j == J - 1:
            return j
        return J - 2 - j


@dataclass
class MFTSObservations:
    """Raw noisy panel ``values[i, j, z]`` on a shared time grid."""

    values: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3:
            raise InvalidInputError("panel must be a p x J x Z array")
        if self.values.shape[2] != self.grid.n_points:
            raise InvalidInputError("panel Z axis does not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("panel contains non-finite values")

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def J(self) -> int:
        return self.values.shape[1]

    @property
    def Z(self) -> int:
        return self.values.shape[2]


@dataclass
class SmoothedMFTS:
    """Pre-smoothed panel with estimated means, noise variances and centered curves."""

    curves: np.ndarray        # p x J x Z smoothed observations
    means: np.ndarray         # p x Z
    noise_var: np.ndarray     # p, positive
    centered: np.ndarray      # p x J x Z, curves - means
    grid: TimeGrid
    df_fallback: bool = False  # True if the df-corrected variance was unusable

    @property
    def p(self) -> int:
        return self.curves.shape[0]

    @property
    def J(self) -> int:
        return self.curves.shape[1]


class WhittakerSmoother:
    """Second-difference penalized least squares on a fixed grid.

    Minimizes sum_z (y_z - x_z)^2 + alpha * sum (second difference of x)^2.
    The penalty eigenbasis is factored once, so smoothing any number of
    curves (and scanning the whole alpha grid) costs one matrix product.
    """

    def __init__(self, n_points: int, alpha_grid: np.ndarray = None):
        if n_points < 5:
            raise InsufficientDataError("pre-smoothing needs at least 5 grid points")
        Z = int(n_points)
        D = np.zeros((Z - 2, Z))
        for r in range(Z - 2):
            D[r, r:r + 3] = (1.0, -2.0, 1.0)
        # eigh of D'D: d >= 0, first two ~0 (constants and lines are unpenalized)
        self.penalty_eigvals, self.basis = np.linalg.eigh(D.T @ D)
        self.penalty_eigvals = np.clip(self.penalty_eigvals, 0.0, None)
        self.alpha_grid = DEFAULT_ALPHA_GRID if alpha_grid is None else np.asarray(alpha_grid)
        self.n_points = Z

    def smooth_fixed(self, y: np.ndarray, alpha: float) -> np.ndarray:
        """Smooth one curve with a fixed penalty (linear in y)."""
        shrink = 1.0 / (1.0 + alpha * self.penalty_eigvals)
        return self.basis @ (shrink * (self.basis.T @ y))

    def effective_df(self, alpha: float) -> float:
        return float(np.sum(1.0 / (1.0 + alpha * self.penalty_eigvals)))

    def smooth_gcv(self, curves: np.ndarray):
        """GCV-smooth each row of ``curves`` (n_curves x Z).

        Returns (smoothed, residual_ss, effective_df, alpha) with one entry
        per curve; the penalty is selected per curve on the alpha grid.
        """
        y = np.atleast_2d(np.asarray(curves, dtype=float))
        if y.shape[1] != self.n_points:
            raise InvalidInputError("curve length does not match the smoother grid")
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("curves contain non-finite values")
        Z = self.n_points
        coef = y @ self.basis                                   # n x Z
        shrink = 1.0 / (1.0 + np.outer(self.alpha_grid, self.penalty_eigvals))  # a x Z
        rss = (coef ** 2) @ ((1.0 - shrink) ** 2).T             # n x a
        df = shrink.sum(axis=1)                                 # a
        denom = np.maximum(Z - df, 1e-12) ** 2
        gcv = Z * rss / denom
        pick = np.argmin(gcv, axis=1)                           # n
        alpha = self.alpha_grid[pick]
        smoothed = (coef * shrink[pick, :]) @ self.basis.T
        residual_ss = rss[np.arange(y.shape[0]), pick]
        return smoothed, residual_ss, df[pick], alpha


def presmooth_curve(y: np.ndarray, grid: TimeGrid):
    """Smooth a single observed curve, selecting the penalty by GCV.

    Returns (smoothed, residual_ss, effective_df).
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size != grid.n_points:
        raise InvalidInputError("curve length does not match the grid")
    if y.size < 5:
        raise InsufficientDataError("pre-smoothing needs at least 5 grid points")
    smoother = WhittakerSmoother(grid.n_points)
    smoothed, rss, df, _ = smoother.smooth_gcv(y[None, :])
    return smoothed[0], float(rss[0]), float(df[0])


def presmooth_panel(obs: MFTSObservations) -> SmoothedMFTS:
    """Pre-smooth every curve of a panel and center it.

    Noise variances are df-corrected residual mean squares pooled over time
    units; if smoothing consumes all degrees of freedom the uncorrected mean
    square is used instead and flagged.
    """
    if obs.J < 2:
        raise InsufficientDataError("panel needs at least J = 2 time units")
    p, J, Z = obs.values.shape
    smoother = WhittakerSmoother(Z)
    flat = obs.values.reshape(p * J, Z)
    smoothed, rss, df, _ = smoother.smooth_gcv(flat)
    curves = smoothed.reshape(p, J, Z)
    rss = rss.reshape(p, J)
    df = df.reshape(p, J)

    means = curves.mean(axis=1)
    denom = J * Z - df.sum(axis=1)
    fallback = bool(np.any(denom <= 1e-9))
    if fallback:
        noise_var = rss.sum(axis=1) / (J * Z)
    else:
        noise_var = rss.sum(axis=1) / denom
    noise_var = np.maximum(noise_var, 1e-12)
    centered = curves - means[:, None, :]
    return SmoothedMFTS(curves, means, noise_var, centered, obs.grid, fallback)


def inner_product(f: np.ndarray, g: np.ndarray, grid: TimeGrid):
    """Trapezoidal L2 inner product sum_z w_z * conj(f_z) * g_z."""
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != g.shape or f.shape != grid.points.shape:
        raise InvalidInputError("inner_product operands must match the grid length")
    value = np.sum(grid.weights * np.conj(f) * g)
    if not np.iscomplexobj(f) and not np.iscomplexobj(g):
        return float(value.real)
    return complex(value)


CSV_COLUMNS = ("series_id", "time_unit", "grid_index", "value")


def save_csv(obs: MFTSObservations, path) -> None:
    """Write a panel in long format: series_id, time_unit, grid_index, value."""
    p, J, Z = obs.values.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for i in range(p):
            for j in range(J):
                for z in range(Z):
                    writer.writerow((i + 1, j + 1, z + 1, repr(float(obs.values[i, j, z]))))


def load_csv(path) -> MFTSObservations:
    """Read a long-format panel; the grid is equally spaced on [0, 1].

    Indices are 1-based in the file.  Every (series, unit, grid) cell must be
    present exactly once; ragged panels are rejected.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CSVParseError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if header != list(CSV_COLUMNS):
            raise CSVParseError(
                f"{path}: line 1: expected header {','.join(CSV_COLUMNS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise CSVParseError(f"{path}: line {lineno}: expected 4 fields")
            try:
                i = int(row[0])
                j = int(row[1])
                z = int(row[2])
            except ValueError:
                raise CSVParseError(
                    f"{path}: line {lineno}: non-integer index field"
                ) from None
            try:
                v = float(row[3])
            except ValueError:
                raise CSVParseError(
                    f"{path}: line {lineno}: non-numeric value field {row[3]!r}"
                ) from None
            if i < 1 or j < 1 or z < 1:
                raise CSVParseError(f"{path}: line {lineno}: indices are 1-based")
            rows.append((i, j, z, v, lineno))

    if not rows:
        raise CSVParseError(f"{path}: no data rows")
    p = max(r[0] for r in rows)
    J = max(r[1] for r in rows)
    Z = max(r[2] for r in rows)
    values = np.full((p, J, Z), np.nan)
    for i, j, z, v, lineno in rows:
        if not np.isnan(values[i - 1, j - 1, z - 1]):
            raise CSVParseError(
                f"{path}: line {lineno}: duplicate cell (series {i}, unit {j}, point {z})"
            )
        values[i - 1, j - 1, z - 1] = v
    missing = np.argwhere(np.isnan(values))
    if missing.size:
        i, j, z = missing[0] + 1
        raise MissingDataError(
            f"{path}: missing cell (series {i}, unit {j}, point {z}); "
            "dense observation is required"
        )
    return MFTSObservations(values, TimeGrid.regular(Z))
