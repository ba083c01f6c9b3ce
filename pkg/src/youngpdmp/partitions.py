"""Finite Young diagram combinatorics.

Diagrams are stored as tuples of weakly decreasing row lengths; cells are
1-based ``(i, j)`` pairs (row, column).  Cell-set views are computed on
demand.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import factorial, prod
from typing import Iterator, NamedTuple, Sequence

ENUMERATION_BOUND = 12


class Cell(NamedTuple):
    i: int
    j: int

    @property
    def content(self) -> int:
        return self.j - self.i


@dataclass(frozen=True, order=True)
class YoungDiagram:
    rows: tuple[int, ...] = ()

    def __post_init__(self):
        rows = tuple(int(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        for k, length in enumerate(rows):
            if length <= 0:
                raise ValueError(f"row lengths must be positive, got {rows}")
            if k and length > rows[k - 1]:
                raise ValueError(f"row lengths must be weakly decreasing, got {rows}")

    @classmethod
    def from_cells(cls, cells) -> "YoungDiagram":
        cells = set(cells)
        if not cells:
            return cls()
        n_rows = max(c.i for c in cells)
        rows = [sum(1 for c in cells if c.i == i) for i in range(1, n_rows + 1)]
        diagram = cls(tuple(r for r in rows if r))
        if set(diagram.cells()) != cells:
            raise ValueError("cell set is not a Young diagram")
        return diagram

    @classmethod
    def from_json(cls, text: str) -> "YoungDiagram":
        return cls(tuple(json.loads(text)))

    def to_json(self) -> str:
        return json.dumps(list(self.rows), separators=(",", ":"))

    def __len__(self) -> int:
        return sum(self.rows)

    @property
    def size(self) -> int:
        return sum(self.rows)

    def __contains__(self, cell) -> bool:
        i, j = cell
        return 1 <= i <= len(self.rows) and 1 <= j <= self.rows[i - 1]

    def __repr__(self) -> str:
        return f"YoungDiagram({list(self.rows)})"

    def cells(self) -> Iterator[Cell]:
        for i, length in enumerate(self.rows, start=1):
            for j in range(1, length + 1):
                yield Cell(i, j)

    def conjugate(self) -> "YoungDiagram":
        if not self.rows:
            return self
        return YoungDiagram(tuple(sum(1 for r in self.rows if r >= j)
                                  for j in range(1, self.rows[0] + 1)))

    def add(self, cell) -> "YoungDiagram":
        i, j = cell
        rows = list(self.rows)
        if i == len(rows) + 1 and j == 1:
            rows.append(1)
        elif i <= len(rows) and rows[i - 1] == j - 1 and (i == 1 or rows[i - 2] >= j):
            rows[i - 1] = j
        else:
            raise ValueError(f"{tuple(cell)} is not an addable corner of {self!r}")
        return YoungDiagram(tuple(rows))

    def remove(self, cell) -> "YoungDiagram":
        i, j = cell
        rows = list(self.rows)
        if not (i <= len(rows) and rows[i - 1] == j and (i == len(rows) or rows[i] < j)):
            raise ValueError(f"{tuple(cell)} is not a removable corner of {self!r}")
        rows[i - 1] -= 1
        if rows[i - 1] == 0:
            rows.pop()
        return YoungDiagram(tuple(rows))


EMPTY = YoungDiagram()


def as_diagram(value) -> YoungDiagram:
    if isinstance(value, YoungDiagram):
        return value
    return YoungDiagram(tuple(value))


def addable_corners(shape) -> list[Cell]:
    """Cells outside ``shape`` whose addition gives a diagram, top row first."""
    rows = as_diagram(shape).rows
    corners = []
    for i, length in enumerate(rows, start=1):
        if i == 1 or rows[i - 2] > length:
            corners.append(Cell(i, length + 1))
    corners.append(Cell(len(rows) + 1, 1))
    return corners


def removable_corners(shape) -> list[Cell]:
    """Cells of ``shape`` whose removal leaves a diagram, top row first."""
    rows = as_diagram(shape).rows
    return [Cell(i, length) for i, length in enumerate(rows, start=1)
            if i == len(rows) or rows[i] < length]


def hook_lengths(shape) -> list[int]:
    diagram = as_diagram(shape)
    cols = diagram.conjugate().rows
    return [(diagram.rows[i - 1] - j) + (cols[j - 1] - i) + 1 for i, j in diagram.cells()]


def dim(shape) -> int:
    """Number of standard tableaux of ``shape`` (hook length formula)."""
    diagram = as_diagram(shape)
    n = diagram.size
    hooks = prod(hook_lengths(diagram))
    value, rem = divmod(factorial(n), hooks)
    if rem:
        raise ArithmeticError(f"hook product does not divide {n}! for {diagram!r}")
    return value


def partitions_of(n: int) -> list[YoungDiagram]:
    """All diagrams of size ``n`` in increasing lexicographic order of rows."""
    out: list[tuple[int, ...]] = []

    def rec(remaining, max_part, prefix):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for part in range(min(remaining, max_part), 0, -1):
            prefix.append(part)
            rec(remaining - part, part, prefix)
            prefix.pop()

    rec(n, n, [])
    return [YoungDiagram(rows) for rows in sorted(out)]


def diagrams_up_to(max_size: int) -> list[YoungDiagram]:
    """Diagrams ordered by (size, lexicographic rows)."""
    return [lam for n in range(max_size + 1) for lam in partitions_of(n)]


@dataclass(frozen=True)
class StandardTableau:
    """A standard filling, stored row by row (``entries[i-1][j-1]``)."""

    entries: tuple[tuple[int, ...], ...]

    @property
    def shape(self) -> YoungDiagram:
        return YoungDiagram(tuple(len(row) for row in self.entries))

    def __getitem__(self, cell) -> int:
        i, j = cell
        return self.entries[i - 1][j - 1]

    def cell_of(self) -> dict[int, Cell]:
        return {v: Cell(i, j) for i, row in enumerate(self.entries, start=1)
                for j, v in enumerate(row, start=1)}

    def is_standard(self) -> bool:
        n = sum(len(row) for row in self.entries)
        values = sorted(v for row in self.entries for v in row)
        if values != list(range(1, n + 1)):
            return False
        for i, row in enumerate(self.entries):
            for j, v in enumerate(row):
                if j and row[j - 1] >= v:
                    return False
                if i and self.entries[i - 1][j] >= v:
                    return False
        return True

    @classmethod
    def from_cell_order(cls, shape, order: Sequence[Cell]) -> "StandardTableau":
        """Entry k goes to ``order[k-1]``."""
        diagram = as_diagram(shape)
        grid = [[0] * length for length in diagram.rows]
        for k, (i, j) in enumerate(order, start=1):
            grid[i - 1][j - 1] = k
        return cls(tuple(tuple(row) for row in grid))


def enumerate_tableaux(shape, bound: int = ENUMERATION_BOUND) -> list[StandardTableau]:
    """All standard tableaux of ``shape``, built by adding the largest entry last."""
    diagram = as_diagram(shape)
    if diagram.size > bound:
        raise ValueError(f"|shape| = {diagram.size} exceeds enumeration bound {bound}")
    results = []

    def rec(current: YoungDiagram, order: list[Cell]):
        if current == diagram:
            results.append(StandardTableau.from_cell_order(diagram, order))
            return
        for cell in addable_corners(current):
            if cell in diagram:
                order.append(cell)
                rec(current.add(cell), order)
                order.pop()

    rec(EMPTY, [])
    return results


def hook_walk_corner(shape, rng) -> Cell:
    """Removable corner drawn with probability dim(shape - corner) / dim(shape).

    Greene-Nijenhuis-Wilf walk: start at a uniform cell and jump to a uniform
    cell of the current hook until a corner is reached.
    """
    diagram = as_diagram(shape)
    n = diagram.size
    if n == 0:
        raise ValueError("the empty diagram has no corners")
    rows = diagram.rows
    cols = diagram.conjugate().rows
    k = int(rng.integers(n))
    i = 1
    while k >= rows[i - 1]:
        k -= rows[i - 1]
        i += 1
    j = k + 1
    while True:
        arm = rows[i - 1] - j
        leg = cols[j - 1] - i
        if arm + leg == 0:
            return Cell(i, j)
        step = int(rng.integers(arm + leg))
        if step < arm:
            j += step + 1
        else:
            i += step - arm + 1


def random_tableau(shape, rng) -> StandardTableau:
    """Uniform standard tableau via repeated hook walks (largest entry first)."""
    diagram = as_diagram(shape)
    order = []
    current = diagram
    while current.size:
        corner = hook_walk_corner(current, rng)
        order.append(corner)
        current = current.remove(corner)
    order.reverse()
    return StandardTableau.from_cell_order(diagram, order)
