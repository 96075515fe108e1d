"""Hyperparameter boxes and their uniform discretization.

A :class:`HyperSpace` is a product of closed intervals, one per tuned
hyperparameter. :func:`build_grid` turns it into a :class:`Grid` holding
``d`` evenly spaced values per dimension; configurations on the grid are
addressed by integer multi-indices ``A`` with ``0 <= A[i] < d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._validation import check_index, check_positive_int

SCALES = ("linear", "log10")


@dataclass(frozen=True)
class Dimension:
    """One hyperparameter interval ``[lo, hi]``.

    With ``scale="log10"`` the grid is uniform in the exponent, which is the
    natural choice for learning rates spanning several decades.
    """

    name: str
    lo: float
    hi: float
    scale: str = "linear"

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("dimension name must be a non-empty string")
        if self.scale not in SCALES:
            raise ValueError(f"dimension {self.name!r}: scale must be one of {SCALES}, got {self.scale!r}")
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"dimension {self.name!r}: bounds must be finite")
        if not lo < hi:
            raise ValueError(f"dimension {self.name!r}: need lo < hi, got [{lo}, {hi}]")
        if self.scale == "log10" and lo <= 0:
            raise ValueError(f"dimension {self.name!r}: log10 scale needs lo > 0, got {lo}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def to_coord(self, value):
        return np.log10(value) if self.scale == "log10" else np.asarray(value, dtype=float)

    def to_dict(self) -> dict:
        return {"name": self.name, "lo": self.lo, "hi": self.hi, "scale": self.scale}


@dataclass(frozen=True)
class HyperSpace:
    """Continuous box of ``h`` named hyperparameters."""

    dims: tuple[Dimension, ...]

    def __post_init__(self):
        dims = tuple(self.dims)
        if not dims:
            raise ValueError("a hyperparameter space needs at least one dimension")
        for dim in dims:
            if not isinstance(dim, Dimension):
                raise TypeError(f"expected Dimension, got {type(dim).__name__}")
        names = [d.name for d in dims]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"duplicate dimension names: {dupes}")
        object.__setattr__(self, "dims", dims)

    @property
    def h(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims)

    @classmethod
    def from_dicts(cls, specs: Sequence[Mapping]) -> "HyperSpace":
        dims = []
        for k, spec in enumerate(specs):
            if not isinstance(spec, Mapping):
                raise ValueError(f"space entry {k} must be an object")
            unknown = set(spec) - {"name", "lo", "hi", "scale"}
            if unknown:
                raise ValueError(f"space entry {k}: unknown fields {sorted(unknown)}")
            try:
                dims.append(Dimension(spec["name"], spec["lo"], spec["hi"], spec.get("scale", "linear")))
            except KeyError as exc:
                raise ValueError(f"space entry {k}: missing field {exc.args[0]!r}") from None
        return cls(tuple(dims))

    def to_dicts(self) -> list[dict]:
        return [d.to_dict() for d in self.dims]


@dataclass(frozen=True)
class Grid:
    """Discretization of a :class:`HyperSpace` (uniform when made by :func:`build_grid`).

    Attributes
    ----------
    space : HyperSpace
    d : int
        Points per dimension.
    coords : tuple of ndarray
        Grid points in the discretization coordinate (raw value for linear
        dimensions, base-10 exponent for log10 dimensions).
    values : tuple of ndarray
        Grid points as hyperparameter values, ascending.
    spacing : tuple of float
        Distance between consecutive points in the discretization coordinate.
    """

    space: HyperSpace
    d: int
    coords: tuple = field(repr=False)
    values: tuple = field(repr=False)
    spacing: tuple

    @property
    def h(self) -> int:
        return self.space.h

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.values)

    @classmethod
    def from_values(cls, space: HyperSpace, values) -> "Grid":
        """Grid with explicit ascending points per dimension (lookup only).

        The controller always works on :func:`build_grid` output; this is for
        addressing hand-specified point sets.
        """
        if len(values) != space.h:
            raise ValueError(f"need {space.h} value lists, got {len(values)}")
        coords, vals, spacing = [], [], []
        for dim, v in zip(space.dims, values):
            v = np.array(v, dtype=float)
            if v.ndim != 1 or len(v) < 2 or not np.all(np.diff(v) > 0):
                raise ValueError(f"dimension {dim.name!r}: need >= 2 strictly ascending points")
            c = dim.to_coord(v)
            v.flags.writeable = False
            coords.append(c)
            vals.append(v)
            spacing.append(float(np.min(np.diff(c))))
        return cls(space, max(len(v) for v in vals), tuple(coords), tuple(vals), tuple(spacing))


def build_grid(space: HyperSpace, d: int) -> Grid:
    """Discretize every dimension of ``space`` into ``d`` evenly spaced points.

    Examples
    --------
    >>> grid = build_grid(HyperSpace((Dimension("x", 0.0, 1.0),)), 5)
    >>> grid.values[0].tolist()
    [0.0, 0.25, 0.5, 0.75, 1.0]
    """
    d = check_positive_int(d, "d", minimum=2)
    coords, values, spacing = [], [], []
    for dim in space.dims:
        if dim.scale == "log10":
            a, b = math.log10(dim.lo), math.log10(dim.hi)
            c = np.linspace(a, b, d)
            v = 10.0 ** c
        else:
            a, b = dim.lo, dim.hi
            c = np.linspace(a, b, d)
            v = c.copy()
        # endpoints must equal the box bounds exactly
        v[0], v[-1] = dim.lo, dim.hi
        c.flags.writeable = False
        v.flags.writeable = False
        coords.append(c)
        values.append(v)
        spacing.append((b - a) / (d - 1))
    return Grid(space, d, tuple(coords), tuple(values), tuple(spacing))


def index_to_config(grid: Grid, index) -> dict[str, float]:
    """Map a multi-index to ``{name: value}``."""
    index = check_index(index, grid.shape)
    return {dim.name: float(grid.values[i][a]) for i, (dim, a) in enumerate(zip(grid.space.dims, index))}


def config_to_index(grid: Grid, config: Mapping[str, float], rtol: float = 1e-9) -> tuple[int, ...]:
    """Inverse of :func:`index_to_config` for values lying on the grid.

    Raises ``ValueError`` if a value is not a grid point (relative to the
    dimension's spacing) or a dimension is missing.
    """
    missing = [n for n in grid.space.names if n not in config]
    if missing:
        raise ValueError(f"configuration is missing dimensions {missing}")
    index = []
    for i, dim in enumerate(grid.space.dims):
        value = float(config[dim.name])
        if dim.scale == "log10" and value <= 0:
            raise ValueError(f"{dim.name}={value} is not on the log10 grid")
        c = float(dim.to_coord(value))
        a = int(np.argmin(np.abs(grid.coords[i] - c)))
        if abs(grid.coords[i][a] - c) > rtol * grid.spacing[i] * len(grid.coords[i]):
            raise ValueError(f"{dim.name}={value} is not a grid point")
        index.append(a)
    return tuple(index)


def flat_index(index, shape: tuple[int, ...]) -> int:
    """Row-major position of a multi-index among the ``d**h`` configurations."""
    return int(np.ravel_multi_index(tuple(index), shape))
