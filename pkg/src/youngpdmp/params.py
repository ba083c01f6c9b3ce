"""Admissible parameters (z, z') and the jump-rate function.

Only the real invariants ``s = z + z'`` and ``p = z z'`` are kept, so the
rate of a cell with content ``c`` is the real quadratic ``p + s*c + c*c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

Number = Union[float, Fraction]

CONJUGATE_PAIR = "conjugate_pair"
REAL_INTERVAL = "real_interval"


class ParameterError(ValueError):
    """Raised for (z, z', r) outside the admissible domain.

    ``witness`` is an integer k with (z+k)(z'+k) <= 0 when one exists.
    """

    def __init__(self, message, witness: Optional[int] = None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class Parameters:
    s: Number
    p: Number
    kind: str
    r: Number
    m: Optional[int] = None

    @property
    def exact(self) -> bool:
        return isinstance(self.p, Fraction)

    def q(self, content: int) -> Number:
        return self.p + self.s * content + content * content

    def with_r(self, r: Number) -> "Parameters":
        if r <= 0:
            raise ParameterError(f"r must be positive, got {r}")
        return Parameters(self.s, self.p, self.kind, r, self.m)

    def describe(self) -> dict:
        out = {"s": float(self.s), "p": float(self.p), "kind": self.kind, "r": float(self.r)}
        if self.m is not None:
            out["m"] = self.m
        return out


def _real_interval(a, b) -> int:
    lo, hi = min(a, b), max(a, b)
    m = math.floor(lo)
    if lo == m or hi >= m + 1:
        # an integer n in [lo, hi] makes (z - n)(z' - n) <= 0
        n = math.ceil(lo)
        raise ParameterError(
            f"z={a}, z'={b} are not inside a common open interval (m, m+1); "
            f"k={-n} gives (z+k)(z'+k) = {(a - n) * (b - n)} <= 0",
            witness=-n,
        )
    return m


def validate(z_re, z_im, zp_re, zp_im, r, exact: bool = False) -> Parameters:
    """Check the admissibility condition and return the real invariants.

    With ``exact=True`` every input is converted to a Fraction (strings such
    as ``"1/2"`` are accepted) and all downstream arithmetic stays rational.
    """
    conv = Fraction if exact else float
    z_re, z_im, zp_re, zp_im, r = (conv(v) for v in (z_re, z_im, zp_re, zp_im, r))
    if not r > 0:
        raise ParameterError(f"r must be positive, got {r}")
    if z_im == 0 and zp_im == 0:
        m = _real_interval(z_re, zp_re)
        return Parameters(z_re + zp_re, z_re * zp_re, REAL_INTERVAL, r, m)
    if z_im == 0 or zp_im == 0:
        raise ParameterError("one of z, z' is real and the other is not")
    if zp_re != z_re or zp_im != -z_im:
        raise ParameterError(f"z' must be the complex conjugate of z (got {z_re}{z_im:+}i and "
                             f"{zp_re}{zp_im:+}i); (z+k)(z'+k) is then not real")
    return Parameters(2 * z_re, z_re * z_re + z_im * z_im, CONJUGATE_PAIR, r)


def from_complex(z: complex, zp: complex, r, exact: bool = False) -> Parameters:
    z, zp = complex(z), complex(zp)
    return validate(z.real, z.imag, zp.real, zp.imag, r, exact=exact)


def parse_complex(text: str) -> complex:
    """Parse ``"1+2i"``, ``"0.5"`` or ``"-3j"`` style strings."""
    cleaned = text.strip().replace(" ", "").replace("i", "j")
    return complex(cleaned)


def q_rate(params: Parameters, cell) -> Number:
    """Rate (z+c)(z'+c) of a cell, c = j - i its content."""
    return params.q(cell[1] - cell[0])


DEFAULT = validate(0.5, 0.0, 0.5, 0.0, 1.0)
