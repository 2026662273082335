"""State encoders for tabular and linear value functions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class FeatureMap:
    """Base encoder. Subclasses implement :meth:`encode`."""

    dimension: int
    kind: str = "abstract"

    def encode(self, state) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, state) -> np.ndarray:
        return self.encode(state)

    def matrix(self, states) -> np.ndarray:
        return np.stack([self.encode(s) for s in states])


@dataclass(frozen=True)
class TabularFeatures(FeatureMap):
    kind: str = "tabular"

    def encode(self, state) -> np.ndarray:
        s = int(state)
        if not 0 <= s < self.dimension:
            raise IndexError(f"state {s} out of range for {self.dimension} states")
        phi = np.zeros(self.dimension)
        phi[s] = 1.0
        return phi


@dataclass(frozen=True)
class RowColFeatures(FeatureMap):
    """One-hot row followed by one-hot column. States are ``(row, col)`` or a flat index."""

    n_rows: int = 5
    n_cols: int = 5
    kind: str = "rowcol"

    def coords(self, state) -> tuple[int, int]:
        if np.ndim(state) == 0:
            s = int(state)
            if not 0 <= s < self.n_rows * self.n_cols:
                raise IndexError(f"state {s} is outside the grid")
            return divmod(s, self.n_cols)
        r, c = (int(v) for v in state)
        if not (0 <= r < self.n_rows and 0 <= c < self.n_cols):
            raise IndexError(f"cell {(r, c)} is outside the grid")
        return r, c

    def encode(self, state) -> np.ndarray:
        r, c = self.coords(state)
        phi = np.zeros(self.dimension)
        phi[r] = 1.0
        phi[self.n_rows + c] = 1.0
        return phi


@dataclass(frozen=True)
class RbfFeatures(FeatureMap):
    """Thresholded Gaussian bumps on an ``order x order`` lattice over the unit square."""

    order: int = 26
    variance: float = 0.0
    threshold: float = 0.5
    kind: str = "rbf"
    centers: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        grid = np.linspace(0.0, 1.0, self.order)
        cx, cy = np.meshgrid(grid, grid, indexing="ij")
        centers = np.column_stack([cx.ravel(), cy.ravel()])
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)

    def activations(self, state) -> np.ndarray:
        x = np.asarray(state, dtype=float)
        if x.shape != (2,) or np.any(x < 0) or np.any(x > 1):
            raise ValueError(f"state {state!r} is not a point of the unit square")
        sq = ((self.centers - x) ** 2).sum(axis=1)
        return np.exp(-sq / (2.0 * self.variance))

    def encode(self, state) -> np.ndarray:
        return (self.activations(state) > self.threshold).astype(float)


def tabular_features(n_states: int) -> TabularFeatures:
    if n_states < 1:
        raise ConfigError("n_states must be >= 1")
    return TabularFeatures(dimension=int(n_states))


def rowcol_features(n_rows: int = 5, n_cols: int = 5) -> RowColFeatures:
    if n_rows < 1 or n_cols < 1:
        raise ConfigError("grid dimensions must be positive")
    return RowColFeatures(dimension=n_rows + n_cols, n_rows=n_rows, n_cols=n_cols)


def rbf_features(order: int = 26, variance: float | None = None, threshold: float = 0.5) -> RbfFeatures:
    if order < 2:
        raise ConfigError("order must be >= 2")
    if variance is None:
        variance = (0.75 / (order - 1)) ** 2
    if variance <= 0:
        raise ConfigError("variance must be positive")
    return RbfFeatures(dimension=order * order, order=order, variance=float(variance), threshold=threshold)
