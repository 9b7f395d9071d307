"""Banded, symmetry-aware storage of two-time correlators."""

from __future__ import annotations

import enum

import numpy as np


class Symmetry(enum.Enum):
    SYMMETRIC = 1
    ANTISYMMETRIC = -1


SYMMETRIC = Symmetry.SYMMETRIC
ANTISYMMETRIC = Symmetry.ANTISYMMETRIC


class TwoTimeGrid:
    """Two-time function on a uniform grid, stored as rows of lags.

    Row ``n`` holds values(n, m) for lags n - m in [0, depth].  Only the
    ``rows`` most recent rows are kept, in a circular buffer.  Reads of (m, n)
    with m < n are filled from (n, m) by symmetry.

    Parameters
    ----------
    depth : int
        Largest stored lag.
    symmetry : Symmetry
        SYMMETRIC (G^S) or ANTISYMMETRIC (G^A).
    dt : float
        Time step.
    rows : int
        Number of rows retained.
    imaginary : bool
        Store only imaginary parts of a purely imaginary function.  Reads
        return complex numbers with an exactly zero real part.
    """

    def __init__(self, depth: int, symmetry: Symmetry, dt: float, rows: int,
                 imaginary: bool = False):
        if depth < 1 or rows < 1:
            raise ValueError("depth and rows must be positive")
        self.depth = int(depth)
        self.symmetry = symmetry
        self.dt = float(dt)
        self.rows = int(rows)
        self.imaginary = bool(imaginary)
        self.values = np.zeros((self.rows, self.depth + 1))
        self.last_row = -1

    @property
    def sign(self) -> int:
        return self.symmetry.value

    def _check_row(self, n: int):
        if n > self.last_row or n < 0 or n <= self.last_row - self.rows:
            raise IndexError(f"row {n} not retained (last row {self.last_row}, keeping {self.rows})")

    def row(self, n: int) -> np.ndarray:
        """View of the stored (real) row n indexed by lag."""
        self._check_row(n)
        return self.values[n % self.rows]

    def new_row(self, n: int) -> np.ndarray:
        """Zeroed storage for row n, which must follow the last row."""
        if n != self.last_row + 1:
            raise IndexError(f"rows must be appended in order (expected {self.last_row + 1})")
        r = self.values[n % self.rows]
        r[:] = 0
        self.last_row = n
        return r

    def __getitem__(self, key):
        n, m = key
        if n < m:
            return self.sign * self[m, n]
        lag = n - m
        if lag > self.depth:
            raise IndexError(f"lag {lag} outside memory band {self.depth}")
        v = self.row(n)[lag]
        return complex(0.0, v) if self.imaginary else float(v)

    def __setitem__(self, key, value):
        n, m = key
        if n < m:
            raise IndexError("write the lower triangle (n >= m) only")
        if n == m and self.symmetry is ANTISYMMETRIC and value != 0:
            raise ValueError("antisymmetric grids have zero diagonal")
        if self.imaginary:
            if complex(value).real != 0:
                raise ValueError("value must be purely imaginary")
            value = complex(value).imag
        elif complex(value).imag != 0:
            raise ValueError("value must be real")
        self.row(n)[n - m] = float(complex(value).real) if not self.imaginary else value

    def line(self, m: int, n_values) -> np.ndarray:
        """Values (n, m) for the given n >= m, as complex or real array."""
        out = np.array([self[n, m] for n in n_values])
        return out

    def retained_rows(self) -> range:
        return range(max(0, self.last_row - self.rows + 1), self.last_row + 1)

    def time(self, n: int, t0: float = 0.0) -> float:
        return t0 + n * self.dt
