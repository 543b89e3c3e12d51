"""Minimum-cost association between predicted and reference directions.

Builds the M x N angular-distance matrix, solves the rectangular
assignment problem with a Hungarian kernel, and applies inclusive
threshold masks. Rectangular inputs are padded to a square matrix with a
sentinel cost strictly greater than 180 * max(M, N); sentinel pairs are
dropped from the result, so exactly min(M, N) predictions end up
associated with references.

Ties between equal-cost matchings are broken deterministically: among
cost-equal optima the pairing whose sorted (pred_index, ref_index) list
is lexicographically smallest is returned (exact whenever the tied costs
are exactly representable, which covers grid-valued fixtures; the result
is a pure function of the input either way).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .geometry import Direction, _angle_between_units

# Thresholds are inclusive; distances travel through arccos and carry
# ~1e-14 relative rounding, so a mathematically-on-the-boundary distance
# (e.g. exactly 10 deg against theta = 10) must not be rejected for
# floating-point noise. 1e-9 deg is far below any meaningful resolution.
THRESHOLD_EPS = 1e-9


def within_threshold(distance: float, theta: float) -> bool:
    """Inclusive threshold comparison with the rounding guard."""
    return distance <= theta + THRESHOLD_EPS


class DistanceMatrix:
    """M x N matrix of angular distances in degrees, entry (i, j) being
    the distance from prediction i to reference j. `cols` only needs to
    be passed for degenerate matrices with zero rows."""

    __slots__ = ("values", "rows", "cols")

    def __init__(self, values, cols: int | None = None):
        self.values = tuple(tuple(row) for row in values)
        self.rows = len(self.values)
        self.cols = len(self.values[0]) if self.values else int(cols or 0)
        for row in self.values:
            if len(row) != self.cols:
                raise ValueError("ragged distance matrix")
            for v in row:
                if not (math.isfinite(v) and 0.0 <= v <= 180.0):
                    raise ValueError(f"distance entry {v} outside [0, 180]")

    def __eq__(self, other):
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return self.values == other.values and self.cols == other.cols

    def __hash__(self):
        return hash((self.values, self.cols))

    def __repr__(self):
        return f"DistanceMatrix({self.rows}x{self.cols})"


@dataclass(frozen=True)
class Assignment:
    """Binary matching between predictions and references.

    `pairs` holds (pred_index, ref_index) tuples sorted by prediction
    index; each index appears at most once and len(pairs) = min(M, N).
    """

    pairs: tuple

    @property
    def k(self) -> int:
        return len(self.pairs)

    def cost(self, d: DistanceMatrix) -> float:
        return sum(d.values[i][j] for i, j in self.pairs)


@dataclass(frozen=True)
class ThresholdMask:
    """Boolean M x N mask, entry (i, j) true iff the distance is <= theta."""

    theta: float
    passes: tuple

    def count_passing(self, assignment: Assignment) -> int:
        """Number of assigned pairs within the threshold (K_theta)."""
        return sum(1 for i, j in assignment.pairs if self.passes[i][j])


def build_distance_matrix(preds: Sequence[Direction], refs: Sequence[Direction]) -> DistanceMatrix:
    """Angular distances between every prediction/reference combination.

    Either side may be empty, yielding a degenerate 0-row or 0-column
    matrix.
    """
    values = tuple(
        tuple(_angle_between_units(p.unit, r.unit) for r in refs) for p in preds
    )
    return DistanceMatrix(values, cols=len(refs))


def threshold_mask(d: DistanceMatrix, theta: float) -> ThresholdMask:
    """Inclusive threshold mask over a distance matrix."""
    if theta < 0:
        raise ValueError(f"threshold must be non-negative, got {theta}")
    passes = tuple(tuple(within_threshold(v, theta) for v in row) for row in d.values)
    return ThresholdMask(theta=theta, passes=passes)


def hungarian(d: DistanceMatrix) -> Assignment:
    """Minimum-total-cost matching of size min(M, N).

    Small shapes are special-cased (a single row or column reduces to an
    argmin, 2 x 2 to a comparison of the two permutations); everything
    else goes through the square Hungarian kernel.
    """
    m, n = d.rows, d.cols
    if m == 0 or n == 0:
        return Assignment(pairs=())
    v = d.values
    if m == 1:
        row = v[0]
        j = min(range(n), key=lambda jj: (row[jj], jj))
        return Assignment(pairs=((0, j),))
    if n == 1:
        i = min(range(m), key=lambda ii: (v[ii][0], ii))
        return Assignment(pairs=((i, 0),))
    if m == 2 and n == 2:
        if v[0][0] + v[1][1] <= v[0][1] + v[1][0]:
            return Assignment(pairs=((0, 0), (1, 1)))
        return Assignment(pairs=((0, 1), (1, 0)))
    return Assignment(pairs=_solve_padded(v, m, n))


def _solve_padded(v, m: int, n: int) -> tuple:
    size = max(m, n)
    sentinel = 180.0 * size + 1.0
    cost = [[v[i][j] if i < m and j < n else sentinel for j in range(size)] for i in range(size)]
    # Exact integer tie-break component: presence of cell (i, j) earns a
    # bonus that dominates every later cell combined, which makes the
    # combined optimum the lexicographically-smallest pairing.
    top = size * size - 1
    bonus = [[-(1 << (top - (i * size + j))) for j in range(size)] for i in range(size)]
    col_of_row = _square_kernel(cost, bonus, size)
    pairs = sorted(
        (i, col_of_row[i]) for i in range(size) if i < m and col_of_row[i] < n
    )
    return tuple(pairs)


def _square_kernel(cost, bonus, size: int):
    """O(n^3) potentials-and-augmenting-path assignment on a square matrix.

    Costs are (float, int) pairs ordered lexicographically; the integer
    part only separates exact float ties. Arrays are 1-indexed with
    column 0 as the virtual start of each augmenting path.
    """
    inf = math.inf
    uf = [0.0] * (size + 1)
    ui = [0] * (size + 1)
    vf = [0.0] * (size + 1)
    vi = [0] * (size + 1)
    match_row = [0] * (size + 1)  # match_row[j] = row matched to column j
    way = [0] * (size + 1)
    for i in range(1, size + 1):
        match_row[0] = i
        j0 = 0
        min_f = [inf] * (size + 1)
        min_i = [0] * (size + 1)
        used = [False] * (size + 1)
        while True:
            used[j0] = True
            i0 = match_row[j0]
            row_f = cost[i0 - 1]
            row_b = bonus[i0 - 1]
            cur_uf = uf[i0]
            cur_ui = ui[i0]
            delta_f = inf
            delta_i = 0
            j1 = -1
            for j in range(1, size + 1):
                if used[j]:
                    continue
                cf = row_f[j - 1] - cur_uf - vf[j]
                ci = row_b[j - 1] - cur_ui - vi[j]
                if cf < min_f[j] or (cf == min_f[j] and ci < min_i[j]):
                    min_f[j] = cf
                    min_i[j] = ci
                    way[j] = j0
                if min_f[j] < delta_f or (min_f[j] == delta_f and min_i[j] < delta_i):
                    delta_f = min_f[j]
                    delta_i = min_i[j]
                    j1 = j
            for j in range(size + 1):
                if used[j]:
                    uf[match_row[j]] += delta_f
                    ui[match_row[j]] += delta_i
                    vf[j] -= delta_f
                    vi[j] -= delta_i
                else:
                    min_f[j] -= delta_f
                    min_i[j] -= delta_i
            j0 = j1
            if match_row[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match_row[j0] = match_row[j1]
            j0 = j1
    col_of_row = [0] * size
    for j in range(1, size + 1):
        col_of_row[match_row[j] - 1] = j - 1
    return col_of_row
