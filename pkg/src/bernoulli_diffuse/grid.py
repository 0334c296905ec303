"""Scalar fields on rectangular lattices and the two five-point Laplacians."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ContractError, ValidationError


class BC(enum.Enum):
    DIRICHLET_ZERO = "dirichlet"
    PERIODIC = "periodic"


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Row-major field, ``data[j * nx + i]`` holds the value at column i, row j.

    In Dirichlet mode only interior values are stored; the ghost layer is zero.
    ``data`` is made read-only on construction so grids behave as values.
    """

    nx: int
    ny: int
    h: float
    data: np.ndarray = field(repr=False)
    bc: BC = BC.DIRICHLET_ZERO

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 1 or self.ny < 1:
            raise ValidationError(f"grid sizes must be positive integers, got {self.nx}x{self.ny}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValidationError(f"lattice spacing must be positive, got {self.h}")
        data = np.array(self.data, dtype=np.float64).reshape(-1)
        if data.size != self.nx * self.ny:
            raise ValidationError(
                f"data has {data.size} entries, expected nx*ny = {self.nx * self.ny}")
        data.flags.writeable = False
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "bc", BC(self.bc))

    @classmethod
    def from_array(cls, values, h=1.0, bc=BC.DIRICHLET_ZERO):
        """Build from a 2-D array shaped (ny, nx)."""
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError(f"expected a 2-D array, got shape {values.shape}")
        ny, nx = values.shape
        return cls(nx, ny, h, values, bc)

    @property
    def array(self):
        """Read-only (ny, nx) view of the data."""
        return self.data.reshape(self.ny, self.nx)

    @property
    def shape(self):
        return (self.ny, self.nx)

    def with_data(self, values):
        """Same lattice and boundary mode, new values."""
        return Grid2D(self.nx, self.ny, self.h, np.asarray(values, dtype=np.float64), self.bc)

    def same_lattice(self, other):
        return (self.nx, self.ny, self.h, self.bc) == (other.nx, other.ny, other.h, other.bc)

    def __array__(self, dtype=None, copy=None):
        a = self.array
        return a.astype(dtype) if dtype is not None else a


@dataclass(frozen=True)
class Domain:
    """Interior lattice of a rectangle with zero Dirichlet data."""

    nx: int
    ny: int
    h: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 1 or self.ny < 1:
            raise ValidationError(f"grid sizes must be positive integers, got {self.nx}x{self.ny}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValidationError(f"lattice spacing must be positive, got {self.h}")

    @classmethod
    def unit_square(cls, n):
        return cls(n, n, 1.0 / (n + 1))

    @property
    def lengths(self):
        return ((self.nx + 1) * self.h, (self.ny + 1) * self.h)

    def grid(self, values):
        return Grid2D(self.nx, self.ny, self.h, values, BC.DIRICHLET_ZERO)

    def zeros(self):
        return self.grid(np.zeros(self.nx * self.ny))

    def full(self, value):
        return self.grid(np.full(self.nx * self.ny, float(value)))

    def coordinates(self):
        """(X, Y) arrays of node coordinates, both shaped (ny, nx)."""
        x = self.h * np.arange(1, self.nx + 1)
        y = self.h * np.arange(1, self.ny + 1)
        return np.meshgrid(x, y)

    @classmethod
    def of(cls, g: Grid2D):
        if g.bc is not BC.DIRICHLET_ZERO:
            raise ContractError("expected a zero-Dirichlet grid")
        return cls(g.nx, g.ny, g.h)


def laplacian_dirichlet(g: Grid2D) -> Grid2D:
    if g.bc is not BC.DIRICHLET_ZERO:
        raise ContractError(f"laplacian_dirichlet needs a Dirichlet grid, got {g.bc.value}")
    return g.with_data(kernels.lap_dirichlet(g.array, g.h * g.h))


def laplacian_periodic(g: Grid2D) -> Grid2D:
    if g.bc is not BC.PERIODIC:
        raise ContractError(f"laplacian_periodic needs a periodic grid, got {g.bc.value}")
    if g.h != 1.0:
        raise ContractError(f"periodic (pixel) grids use h = 1, got h = {g.h}")
    return g.with_data(kernels.lap_periodic(g.array, 1.0))


def laplacian(g: Grid2D) -> Grid2D:
    """Five-point Laplacian matching the grid's boundary mode."""
    if g.bc is BC.PERIODIC:
        return laplacian_periodic(g)
    return laplacian_dirichlet(g)


def norm_inf(g: Grid2D) -> float:
    return float(np.max(np.abs(g.data))) if g.data.size else 0.0


def norm_l2(g: Grid2D) -> float:
    return float(np.sqrt(g.h * g.h * np.dot(g.data, g.data)))


def clip01(g: Grid2D) -> Grid2D:
    return g.with_data(np.clip(g.data, 0.0, 1.0))


# ------------------------------------------------------------------ CSV ----

_HEADER = re.compile(
    r"#\s*nx=(?P<nx>\d+)\s+ny=(?P<ny>\d+)\s+h=(?P<h>\S+)\s+bc=(?P<bc>dirichlet|periodic)")


def write_csv(g: Grid2D, path):
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# nx={g.nx} ny={g.ny} h={g.h!r} bc={g.bc.value}\n")
        for row in g.array:
            fh.write(",".join(f"{x:.17g}" for x in row))
            fh.write("\n")
    return path


def read_csv(path) -> Grid2D:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        m = _HEADER.match(header)
        if m is None:
            raise ValidationError(f"{path}: missing or malformed grid header: {header!r}")
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    nx, ny = int(m["nx"]), int(m["ny"])
    if values.shape != (ny, nx):
        raise ValidationError(f"{path}: header says {ny}x{nx}, body is {values.shape[0]}x{values.shape[1]}")
    return Grid2D(nx, ny, float(m["h"]), values, BC(m["bc"]))
