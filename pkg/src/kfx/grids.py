"""Rectangular (x, p) grids of nonnegative density values, with CSV/PGM I/O.

Shared between the classical histogram and the quantum phase-space
distribution so the two can be compared cell by cell.  ``values`` has shape
``(m_p, m_x)``: row index runs over p (row 0 at p_min), column index over x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PhaseGrid:
    x_min: float
    x_max: float
    p_min: float
    p_max: float
    m_x: int
    m_p: int
    values: np.ndarray = field(repr=False)
    overflow_mass: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.m_p, self.m_x):
            raise ValueError(
                f"values shape {self.values.shape} != (m_p, m_x) = {(self.m_p, self.m_x)}"
            )
        if self.x_max <= self.x_min or self.p_max <= self.p_min:
            raise ValueError("grid extent must be positive")

    @property
    def cell_area(self):
        return ((self.x_max - self.x_min) / self.m_x) * ((self.p_max - self.p_min) / self.m_p)

    def x_centers(self):
        dx = (self.x_max - self.x_min) / self.m_x
        return self.x_min + dx * (np.arange(self.m_x) + 0.5)

    def p_centers(self):
        dp = (self.p_max - self.p_min) / self.m_p
        return self.p_min + dp * (np.arange(self.m_p) + 0.5)

    def mass(self):
        """In-extent mass: sum of cell values times cell area."""
        return float(self.values.sum() * self.cell_area)

    def same_geometry(self, other: "PhaseGrid") -> bool:
        return (
            self.m_x == other.m_x
            and self.m_p == other.m_p
            and self.x_min == other.x_min
            and self.x_max == other.x_max
            and self.p_min == other.p_min
            and self.p_max == other.p_max
        )


def square_grid_spec(extent_L: float, m: int):
    """Symmetric square extent [-L, L] x [-L, L] with m cells per axis."""
    return dict(x_min=-extent_L, x_max=extent_L, p_min=-extent_L, p_max=extent_L, m_x=m, m_p=m)


def write_grid_csv(grid: PhaseGrid, path):
    """CSV layout: one header comment with the geometry, then m_p value rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "# %r %r %r %r %d %d %r\n"
            % (grid.x_min, grid.x_max, grid.p_min, grid.p_max, grid.m_x, grid.m_p, grid.overflow_mass)
        )
        for row in grid.values:
            fh.write(",".join("%.17g" % v for v in row))
            fh.write("\n")


def read_grid_csv(path) -> PhaseGrid:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing grid header line")
        parts = header[1:].split()
        if len(parts) != 7:
            raise ValueError(f"{path}: malformed grid header")
        x_min, x_max, p_min, p_max = (float(s) for s in parts[:4])
        m_x, m_p = int(parts[4]), int(parts[5])
        overflow = float(parts[6])
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    return PhaseGrid(x_min, x_max, p_min, p_max, m_x, m_p, values, overflow)


def write_grid_pgm(grid: PhaseGrid, path, levels: int = 255):
    """Plain-text portable graymap; peak cell value recorded in the header comment."""
    peak = float(grid.values.max())
    scale = levels / peak if peak > 0 else 0.0
    img = np.rint(grid.values[::-1, :] * scale).astype(int)  # top row = largest p
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("P2\n")
        fh.write("# peak value %r mapped to %d\n" % (peak, levels))
        fh.write("%d %d\n%d\n" % (grid.m_x, grid.m_p, levels))
        for row in img:
            fh.write(" ".join(str(v) for v in row))
            fh.write("\n")
