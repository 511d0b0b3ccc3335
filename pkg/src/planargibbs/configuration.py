"""Marked particle configurations in the plane under the sup norm.

A particle has a planar position and an angular spin in [0, 2*pi).  All
square regions -- centered windows [-t, t)^2 and lattice unit cells
r + [-1/2, 1/2)^2 -- use half-open membership componentwise, so cells tile
the plane exactly and window counts never double-count boundary points.

Configurations are finite, simple (pairwise distinct positions) and keep a
stable particle order; the row index of a particle is its id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Union

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Reduce an angle (scalar or array) to [0, 2*pi)."""
    return np.mod(a, TWO_PI)


class Point(NamedTuple):
    x: float
    y: float

    def norm(self) -> float:
        """Sup norm max(|x|, |y|)."""
        return max(abs(self.x), abs(self.y))


class MarkedParticle(NamedTuple):
    position: Point
    spin: float


class CellIndex(NamedTuple):
    """Integer label r of the unit cell r + [-1/2, 1/2)^2."""

    i: int
    j: int


@dataclass(frozen=True)
class Window:
    """Centered square window [-t, t)^2 with half width t > 0."""

    half_width: float

    def __post_init__(self):
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValueError(f"window half width must be positive, got {self.half_width}")

    @property
    def area(self) -> float:
        return (2.0 * self.half_width) ** 2

    def contains(self, x: float, y: float) -> bool:
        t = self.half_width
        return -t <= x < t and -t <= y < t

    def contains_many(self, positions: np.ndarray) -> np.ndarray:
        """Boolean mask over an (N, 2) position array."""
        t = self.half_width
        p = np.asarray(positions, dtype=float).reshape(-1, 2)
        return (p[:, 0] >= -t) & (p[:, 0] < t) & (p[:, 1] >= -t) & (p[:, 1] < t)


Region = Union[Window, CellIndex]


def cell_index(p: Point) -> CellIndex:
    """Label of the unit cell containing p.

    The returned r satisfies p - r in [-1/2, 1/2)^2 componentwise; upper
    boundary points belong to the neighboring cell.
    """
    if not (math.isfinite(p[0]) and math.isfinite(p[1])):
        raise ValueError(f"non-finite point {p}")
    return CellIndex(int(math.floor(p[0] + 0.5)), int(math.floor(p[1] + 0.5)))


def cell_indices(positions: np.ndarray) -> np.ndarray:
    """Vectorized cell labels, shape (N, 2) int."""
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    return np.floor(p + 0.5).astype(np.int64)


class Configuration:
    """Finite simple configuration of marked particles.

    Backed by immutable arrays: ``positions`` of shape (N, 2) and ``spins``
    of shape (N,) with spins wrapped to [0, 2*pi).  The particle id is the
    row index.
    """

    __slots__ = ("positions", "spins")

    def __init__(self, positions, spins):
        pos = np.array(positions, dtype=float).reshape(-1, 2)
        spn = wrap_angle(np.array(spins, dtype=float).reshape(-1))
        if pos.shape[0] != spn.shape[0]:
            raise ValueError("positions and spins must have equal length")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if pos.shape[0] > 1:
            uniq = np.unique(pos, axis=0)
            if uniq.shape[0] != pos.shape[0]:
                raise ValueError("configuration is not simple: duplicate positions")
        pos.setflags(write=False)
        spn.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "spins", spn)

    def __setattr__(self, name, value):
        raise AttributeError("Configuration is immutable")

    @classmethod
    def empty(cls) -> "Configuration":
        return cls(np.empty((0, 2)), np.empty((0,)))

    @classmethod
    def from_particles(cls, particles) -> "Configuration":
        parts = list(particles)
        pos = [(p.position[0], p.position[1]) for p in parts]
        spn = [p.spin for p in parts]
        return cls(np.array(pos, dtype=float).reshape(-1, 2), spn)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __iter__(self) -> Iterator[MarkedParticle]:
        for i in range(len(self)):
            yield self.particle(i)

    def particle(self, i: int) -> MarkedParticle:
        x, y = self.positions[i]
        return MarkedParticle(Point(float(x), float(y)), float(self.spins[i]))

    def norms(self) -> np.ndarray:
        """Sup norms of all positions."""
        if len(self) == 0:
            return np.empty((0,))
        return np.max(np.abs(self.positions), axis=1)

    def rotate(self, angle: float) -> "Configuration":
        """Rotate every spin by a fixed angle; positions unchanged."""
        return Configuration(self.positions, wrap_angle(self.spins + angle))

    def union(self, other: "Configuration") -> "Configuration":
        return Configuration(
            np.vstack([self.positions, other.positions]),
            np.concatenate([self.spins, other.spins]),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return (
            self.positions.shape == other.positions.shape
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.spins, other.spins)
        )

    def same_particles(self, other: "Configuration") -> bool:
        """Equality as particle sets, ignoring order."""
        if len(self) != len(other):
            return False
        a = np.lexsort((self.spins, self.positions[:, 1], self.positions[:, 0]))
        b = np.lexsort((other.spins, other.positions[:, 1], other.positions[:, 0]))
        return np.array_equal(self.positions[a], other.positions[b]) and np.array_equal(
            self.spins[a], other.spins[b]
        )

    def __repr__(self) -> str:
        return f"Configuration(n={len(self)})"


def _membership_mask(cfg: Configuration, region: Region) -> np.ndarray:
    if len(cfg) == 0:
        return np.zeros(0, dtype=bool)
    if isinstance(region, Window):
        return region.contains_many(cfg.positions)
    if isinstance(region, CellIndex):
        lo = np.array([region.i - 0.5, region.j - 0.5])
        hi = lo + 1.0
        p = cfg.positions
        return np.all((p >= lo) & (p < hi), axis=1)
    raise TypeError(f"unsupported region type {type(region)!r}")


def count_in(cfg: Configuration, region: Region) -> int:
    """Number of particles whose position lies in the region."""
    return int(np.count_nonzero(_membership_mask(cfg, region)))


def restrict(cfg: Configuration, region: Region) -> Configuration:
    """Sub-configuration of the particles inside the region, spins kept."""
    mask = _membership_mask(cfg, region)
    return Configuration(cfg.positions[mask], cfg.spins[mask])


def restrict_complement(cfg: Configuration, region: Region) -> Configuration:
    mask = _membership_mask(cfg, region)
    return Configuration(cfg.positions[~mask], cfg.spins[~mask])


def quadratic_density(cfg: Configuration, n: int) -> float:
    """Mean squared cell occupancy over the (2n+1)^2 cells centered at the origin.

    Sums N_c^2 over cells with integer labels in {-n, ..., n}^2 and divides
    by the covered area (2n+1)^2.  Particles outside those cells do not
    contribute.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if len(cfg) == 0:
        return 0.0
    labels = cell_indices(cfg.positions)
    inside = np.all(np.abs(labels) <= n, axis=1)
    labels = labels[inside]
    if labels.shape[0] == 0:
        return 0.0
    _, counts = np.unique(labels, axis=0, return_counts=True)
    return float(np.sum(counts.astype(float) ** 2) / (2 * n + 1) ** 2)


def covering_radius(cfg: Configuration) -> int:
    """Smallest n such that every particle lies in a cell of {-n..n}^2."""
    if len(cfg) == 0:
        return 0
    return int(np.max(np.abs(cell_indices(cfg.positions))))


def write_csv(cfg: Configuration, path) -> None:
    """Write ``id,x,y,spin`` rows (spin in radians), ordered by id."""
    with open(path, "w") as fh:
        fh.write("id,x,y,spin\n")
        for i in range(len(cfg)):
            x, y = cfg.positions[i]
            fh.write(f"{i},{float(x)!r},{float(y)!r},{float(cfg.spins[i])!r}\n")


def read_csv(path) -> Configuration:
    """Read a configuration written by :func:`write_csv`."""
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "id,x,y,spin":
            raise ValueError(f"unexpected header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            ident, x, y, spin = line.split(",")
            rows.append((int(ident), float(x), float(y), float(spin)))
    rows.sort(key=lambda r: r[0])
    if not rows:
        return Configuration.empty()
    arr = np.array([(r[1], r[2]) for r in rows])
    return Configuration(arr, [r[3] for r in rows])
