"""Generalized standard tableaux bounded by a level r (height functions).

A state stores the finite heights row by row; every cell outside the
support has height exactly ``r``.  A value equal to ``r`` is never stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Mapping

from .partitions import Cell, StandardTableau, YoungDiagram, addable_corners


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class HeightState:
    r: float
    rows: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(tuple(row) for row in self.rows if len(row)))

    @classmethod
    def empty(cls, r) -> "HeightState":
        return cls(r, ())

    @classmethod
    def from_cells(cls, r, heights: Mapping) -> "HeightState":
        heights = {Cell(*c): v for c, v in heights.items()}
        shape = YoungDiagram.from_cells(heights)
        rows = tuple(tuple(heights[Cell(i, j)] for j in range(1, length + 1))
                     for i, length in enumerate(shape.rows, start=1))
        return cls(r, rows)

    def items(self) -> Iterator[tuple[Cell, float]]:
        for i, row in enumerate(self.rows, start=1):
            for j, v in enumerate(row, start=1):
                yield Cell(i, j), v

    def as_dict(self) -> dict[Cell, float]:
        return dict(self.items())

    def __len__(self) -> int:
        return sum(len(row) for row in self.rows)

    def validate(self) -> "HeightState":
        if not self.r > 0:
            raise InvalidStateError(f"level must be positive, got {self.r}")
        seen = set()
        for i, row in enumerate(self.rows):
            if i and len(row) > len(self.rows[i - 1]):
                raise InvalidStateError(f"support is not a Young diagram: rows {self.shape_rows()}")
            for j, v in enumerate(row):
                if not 0 < v < self.r:
                    raise InvalidStateError(f"height {v} at {(i + 1, j + 1)} outside (0, {self.r})")
                if j and not row[j - 1] < v:
                    raise InvalidStateError(f"row order violated at {(i + 1, j + 1)}")
                if i and not self.rows[i - 1][j] < v:
                    raise InvalidStateError(f"column order violated at {(i + 1, j + 1)}")
                if v in seen:
                    raise InvalidStateError(f"repeated height {v}")
                seen.add(v)
        return self

    def shape_rows(self) -> tuple[int, ...]:
        return tuple(len(row) for row in self.rows)

    def shape(self) -> YoungDiagram:
        return YoungDiagram(self.shape_rows())

    def height(self, cell) -> float:
        i, j = cell
        if i <= len(self.rows) and j <= len(self.rows[i - 1]):
            return self.rows[i - 1][j - 1]
        return self.r

    def h_down(self, cell) -> float:
        """Lower end of the jump window: max of upper and left neighbours, 0 at (1, 1)."""
        i, j = cell
        if i == 1 and j == 1:
            return 0.0
        if i == 1:
            return self.height((1, j - 1))
        if j == 1:
            return self.height((i - 1, 1))
        return max(self.height((i - 1, j)), self.height((i, j - 1)))

    def active_cells(self) -> list[Cell]:
        """Support plus addable corners: the cells whose jump window is nonempty."""
        return [c for c, _ in self.items()] + addable_corners(self.shape())

    def truncate(self, r_new) -> "HeightState":
        if not 0 < r_new <= self.r:
            raise ValueError(f"truncation level must lie in (0, {self.r}], got {r_new}")
        rows = []
        for row in self.rows:
            kept = tuple(v for v in row if v < r_new)
            if not kept:
                break
            rows.append(kept)
        return HeightState(r_new, tuple(rows))

    def to_ranked_tableau(self) -> tuple[YoungDiagram, StandardTableau, list[float]]:
        """Shape, the tableau of height ranks, and the sorted heights."""
        ranked = sorted(self.items(), key=lambda item: item[1])
        order = [cell for cell, _ in ranked]
        shape = self.shape()
        return shape, StandardTableau.from_cell_order(shape, order), [v for _, v in ranked]

    def to_dict(self) -> dict:
        return {"r": self.r, "cells": [{"i": c.i, "j": c.j, "h": v} for c, v in self.items()]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "HeightState":
        heights = {(c["i"], c["j"]): float(c["h"]) for c in data["cells"]}
        return cls.from_cells(float(data["r"]), heights).validate()

    @classmethod
    def from_json(cls, text: str) -> "HeightState":
        return cls.from_dict(json.loads(text))


def height(state: HeightState, cell) -> float:
    return state.height(cell)


def h_down(state: HeightState, cell) -> float:
    return state.h_down(cell)


def shape(state: HeightState) -> YoungDiagram:
    return state.shape()


def truncate(state: HeightState, r_new) -> HeightState:
    return state.truncate(r_new)


def to_ranked_tableau(state: HeightState):
    return state.to_ranked_tableau()


def active_cells(state: HeightState) -> list[Cell]:
    return state.active_cells()
