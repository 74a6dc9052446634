"""Ground-truth scalar fields, lawnmower sampling and grid CSV files.

Grid cells are addressed as ``(col, row)`` with row 0 at minimum y. Values
are stored row-major. Models only see normalized coordinates in ``[0, 1]^2``
where cell ``i`` along an axis with ``n`` cells maps to ``i / (n - 1)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import Dataset, Hyperparameters


class GridParseError(ValueError):
    """A grid CSV file could not be parsed."""


@dataclass(frozen=True)
class FieldGrid:
    width: int
    height: int
    resolution: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        if values.size != self.width * self.height:
            raise ValueError(
                f"{values.size} values for a {self.width}x{self.height} grid"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.width * self.height

    def as_array(self) -> np.ndarray:
        """Values as a ``(height, width)`` array, row 0 at minimum y."""
        return self.values.reshape(self.height, self.width)

    def normalize(self, cells) -> np.ndarray:
        """Map ``(col, row)`` cell indices to normalized coordinates."""
        cells = np.asarray(cells, dtype=float)
        scale = np.array([max(self.width - 1, 1), max(self.height - 1, 1)], dtype=float)
        return cells / scale

    def native_to_normalized(self, points) -> np.ndarray:
        """Map native coordinates (cell centers at ``(i + 0.5) * resolution``)."""
        cells = np.asarray(points, dtype=float) / self.resolution - 0.5
        return self.normalize(cells)

    def cells(self) -> np.ndarray:
        """All ``(col, row)`` indices in row-major order."""
        rows, cols = np.divmod(np.arange(self.size), self.width)
        return np.column_stack([cols, rows])

    def coordinates(self) -> np.ndarray:
        """Normalized coordinates of every cell, row-major."""
        return self.normalize(self.cells())

    def value_at(self, location) -> float:
        col, row = (int(v) for v in location)
        if not (0 <= col < self.width and 0 <= row < self.height):
            raise IndexError(f"cell {(col, row)} outside {self.width}x{self.height} grid")
        return float(self.values[row * self.width + col])


def _psd_root(K: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(K)
    return U * np.sqrt(np.clip(w, 0.0, None))


def sample_gp_field(width: int, height: int, hp: Hyperparameters, seed: int,
                    resolution: float = 1.0) -> FieldGrid:
    """Draw a zero-mean SE-ARD GP sample over the grid's cell centers.

    The SE kernel on a Cartesian grid is the Kronecker product of two 1-D
    covariance matrices, so only a ``width`` and a ``height`` sized matrix
    need to be factorized.
    """
    if width < 2 or height < 2:
        raise ValueError("grid must be at least 2x2")
    if hp.dim != 2:
        raise ValueError("field sampling needs a 2-D kernel")
    lx, ly = hp.lengthscales
    xs = np.arange(width) / (width - 1)
    ys = np.arange(height) / (height - 1)
    Kx = np.exp(-0.5 * ((xs[:, None] - xs[None, :]) / lx) ** 2)
    Ky = hp.signal_variance * np.exp(-0.5 * ((ys[:, None] - ys[None, :]) / ly) ** 2)
    rng = np.random.default_rng(seed)
    E = rng.standard_normal((height, width))
    F = _psd_root(Ky) @ E @ _psd_root(Kx).T
    return FieldGrid(width, height, resolution, F.ravel())


@dataclass(frozen=True)
class SamplingPlan:
    """Ordered lawnmower waypoints split into fixed-size batches."""

    waypoints: np.ndarray
    batch_size: int
    noise_variance: float = 0.01

    def __post_init__(self):
        wp = np.array(self.waypoints, dtype=int).reshape(-1, 2)
        if self.batch_size < 1 or len(wp) % self.batch_size:
            raise ValueError(f"{len(wp)} waypoints do not split into batches of {self.batch_size}")
        wp.setflags(write=False)
        object.__setattr__(self, "waypoints", wp)

    @property
    def batch_count(self) -> int:
        return len(self.waypoints) // self.batch_size

    def batch(self, index: int) -> np.ndarray:
        start = index * self.batch_size
        return self.waypoints[start:start + self.batch_size]

    def batches(self):
        return [self.batch(i) for i in range(self.batch_count)]


def lawnmower_plan(grid: FieldGrid, transect_count: int = 44, batch_size: int = 44,
                   samples_per_transect: int = 98, noise_variance: float = 0.01) -> SamplingPlan:
    """Boustrophedon path of vertical transects.

    Transects sit on evenly spaced columns. Each one visits
    ``samples_per_transect`` consecutive rows centred in the grid, and the
    direction alternates from one transect to the next.
    """
    if not 1 <= transect_count <= grid.width:
        raise ValueError(f"{transect_count} transects do not fit in width {grid.width}")
    if not 1 <= samples_per_transect <= grid.height:
        raise ValueError(f"{samples_per_transect} samples do not fit in height {grid.height}")
    total = transect_count * samples_per_transect
    if batch_size < 1 or total % batch_size:
        raise ValueError(f"{total} samples do not split into batches of {batch_size}")
    cols = np.round(np.linspace(0, grid.width - 1, transect_count)).astype(int)
    first = (grid.height - samples_per_transect) // 2
    rows = np.arange(first, first + samples_per_transect)
    path = []
    for k, col in enumerate(cols):
        ordered = rows if k % 2 == 0 else rows[::-1]
        path.extend((int(col), int(r)) for r in ordered)
    return SamplingPlan(np.array(path), batch_size, noise_variance)


def observe(field: FieldGrid, location, noise_variance: float, rng: np.random.Generator) -> float:
    """Field value at a cell plus Gaussian noise."""
    value = field.value_at(location)
    if noise_variance < 0:
        raise ValueError("noise variance must be non-negative")
    if noise_variance == 0:
        return value
    return value + math.sqrt(noise_variance) * float(rng.standard_normal())


def observe_batches(field: FieldGrid, plan: SamplingPlan, rng: np.random.Generator) -> list[Dataset]:
    """Noisy observations along the plan, one :class:`Dataset` per batch."""
    out = []
    for cells in plan.batches():
        y = np.array([observe(field, c, plan.noise_variance, rng) for c in cells])
        out.append(Dataset(field.normalize(cells), y))
    return out


def load_grid_csv(path) -> FieldGrid:
    """Read a grid from ``width,height,resolution`` followed by ``height`` value rows."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise GridParseError(f"{path}: {exc}") from exc
    if not rows or len(rows[0]) != 3:
        raise GridParseError(f"{path}: line 1: expected header 'width,height,resolution'")
    try:
        width, height = int(rows[0][0]), int(rows[0][1])
        resolution = float(rows[0][2])
    except ValueError as exc:
        raise GridParseError(f"{path}: line 1: malformed header: {exc}") from exc
    if width < 1 or height < 1 or not (math.isfinite(resolution) and resolution > 0):
        raise GridParseError(f"{path}: line 1: invalid grid dimensions")
    body = [r for r in rows[1:] if r != []]
    if len(body) != height:
        raise GridParseError(f"{path}: expected {height} value rows, found {len(body)}")
    values = np.empty((height, width))
    for r, row in enumerate(body):
        if len(row) != width:
            raise GridParseError(
                f"{path}: line {r + 2}: expected {width} values, found {len(row)}"
            )
        for c, token in enumerate(row):
            try:
                v = float(token)
            except ValueError:
                raise GridParseError(
                    f"{path}: line {r + 2}, column {c + 1}: non-numeric value {token!r}"
                ) from None
            if not math.isfinite(v):
                raise GridParseError(
                    f"{path}: line {r + 2}, column {c + 1}: non-finite value {token!r}"
                )
            values[r, c] = v
    return FieldGrid(width, height, resolution, values.ravel())


def write_grid_csv(field: FieldGrid, path) -> None:
    """Write ``field`` in the format read by :func:`load_grid_csv`."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([field.width, field.height, repr(float(field.resolution))])
        for row in field.as_array():
            writer.writerow([repr(float(v)) for v in row])
