"""Catalog of reserved sets RJ(s): polynomials f with f(p) in J(s|p) for all large p."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from sympy import primerange

from .mhs import Composition

PARAMETER_BOUND = 5


@dataclass(frozen=True)
class ReservedPolynomial:
    """A polynomial in x with rational coefficients, lowest degree first."""

    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        c = [Fraction(a) for a in self.coeffs]
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def of(cls, *coeffs) -> "ReservedPolynomial":
        return cls(tuple(Fraction(a) for a in coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x: int) -> Fraction:
        acc = Fraction(0)
        for a in reversed(self.coeffs):
            acc = acc * x + a
        return acc

    def at_prime(self, p: int) -> int:
        v = self(p)
        if v.denominator != 1 or v < 0:
            raise ValueError(f"{self} is not a non-negative integer at {p}")
        return int(v)

    def sort_key(self):
        # order by growth at large x
        return (self.degree, tuple(reversed(self.coeffs)))

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        den = math.lcm(*(a.denominator for a in self.coeffs))
        body = _format_integer_poly([int(a * den) for a in self.coeffs])
        if den == 1:
            return body
        return f"({body})/{den}"


def _format_integer_poly(coeffs: list[int]) -> str:
    terms = []
    for d in range(len(coeffs) - 1, -1, -1):
        c = coeffs[d]
        if c == 0:
            continue
        mono = "" if d == 0 else ("x" if d == 1 else f"x^{d}")
        mag = abs(c)
        text = f"{mag}{mono}" if (mag != 1 or not mono) else mono
        sign = "-" if c < 0 else "+"
        terms.append((sign, text))
    first_sign, first = terms[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, text in terms[1:]:
        out += sign + text
    return out


P = ReservedPolynomial.of
ZERO = P()
X_MINUS_1 = P(-1, 1)
X = P(0, 1)
TWO_X_MINUS_1 = P(-1, 2)


@dataclass(frozen=True)
class ReservedSet:
    composition: Composition
    case: int
    polynomials: tuple[ReservedPolynomial, ...]
    segment_bound: Optional[int] = None
    extrapolated: bool = False
    parameters: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        polys = tuple(sorted(set(self.polynomials), key=ReservedPolynomial.sort_key))
        if ZERO not in polys:
            raise ValueError("a reserved set always contains 0")
        object.__setattr__(self, "polynomials", polys)

    def values(self, p: int) -> list[int]:
        """RJ(s;p), sorted."""
        return sorted({f.at_prime(p) for f in self.polynomials})

    def segment(self, p: int, t: int) -> list[int]:
        """RJ_t(s;p): the values not exceeding p^t - 1."""
        return [v for v in self.values(p) if v <= p**t - 1]

    def to_strings(self) -> list[str]:
        return [str(f) for f in self.polynomials]

    def validate(self, limit: int = 200) -> None:
        """Integer-valued and strictly increasing at every prime |s|+3 <= p < limit."""
        for p in primerange(self.composition.weight + 3, max(limit, self.composition.weight + 4)):
            vals = [f.at_prime(p) for f in self.polynomials]
            if len(set(vals)) != len(vals):
                raise ValueError(f"reserved polynomials collide at p={p}: {vals}")


def _all_ones(parts) -> bool:
    return all(a == 1 for a in parts)


def _homogeneous(parts) -> bool:
    return len(set(parts)) == 1


def _ones_two_ones(parts) -> Optional[tuple[int, ...]]:
    """Run lengths (a0, a1, ...) when parts = 1^a0, 2, 1^a1, 2, ..., all other parts 1."""
    if any(a not in (1, 2) for a in parts) or 2 not in parts:
        return None
    runs = [0]
    for a in parts:
        if a == 2:
            runs.append(0)
        else:
            runs[-1] += 1
    return tuple(runs)


Rule = Callable[[tuple[int, ...]], Optional[dict]]


def _case1(s):
    return {} if s == (1,) else None


def _case2(s):
    if len(s) > 1 and len(s) % 2 == 1 and _all_ones(s):
        return {"l": len(s)}
    return None


def _case3(s):
    if _homogeneous(s) and s[0] >= 3 and s[0] % 2 == 1:
        return {"s": s[0], "l": len(s)}
    return None


def _case4(s):
    if _homogeneous(s) and s[0] % 2 == 0:
        return {"s": s[0], "l": len(s)}
    return None


def _case5(s):
    if len(s) == 2 and s[1] == 1 and s[0] >= 3 and s[0] % 2 == 1:
        return {"s": s[0]}
    return None


def _case6(s):
    if len(s) == 2 and sum(s) % 2 == 1:
        return {"s": s[0], "t": s[1]}
    return None


def _case7(s):
    if len(s) == 2 and s[0] != s[1] and sum(s) % 2 == 0 and s[1] != 1:
        return {"s": s[0], "t": s[1]}
    return None


def _case8(s):
    if len(s) == 4 and s[0] == s[2] and s[1] == s[3]:
        a, b = s[0], s[1]
        if a != b and (a + b) % 2 == 0 and b != 1:
            return {"s": a, "t": b}
    return None


def _case9(s):
    if len(s) == 3:
        r, m, t = s
        if sum(s) >= 5 and sum(s) % 2 == 1 and min(s) >= 2 and r != t:
            return {"r": r, "s": m, "t": t}
    return None


def _case10(s):
    if len(s) == 3 and s[0] == s[2] and s[1] % 2 == 1:
        return {"r": s[0], "s": s[1]}
    return None


def _case11(s):
    if len(s) == 3:
        if (sum(s) >= 6 and sum(s) % 2 == 0 and s not in ((4, 3, 5), (5, 3, 4))
                and min(s) >= 2 and not _homogeneous(s)):
            return {"r": s[0], "s": s[1], "t": s[2]}
    return None


def _case12(s):
    if s in ((2, 1, 1), (1, 1, 2), (4, 3, 5), (5, 3, 4)):
        return {}
    return None


def _case13(s):
    runs = _ones_two_ones(s)
    if runs is not None and len(runs) == 2 and sum(runs) % 2 == 0:
        return {"s": runs[0], "t": runs[1]}
    return None


def _case14(s):
    runs = _ones_two_ones(s)
    if runs is not None and len(runs) == 3 and runs[0] == runs[1] == runs[2] >= 1:
        return {"s": runs[0]}
    return None


def _case15(s):
    runs = _ones_two_ones(s)
    if runs is not None and len(runs) == 3:
        a = runs[0]
        if a >= 2 and a % 2 == 0 and runs == (a, a - 1, a + 1):
            return {"s": a}
    return None


def _case16(s):
    runs = _ones_two_ones(s)
    if runs is not None and len(runs) == 3:
        a = runs[2]
        if a >= 2 and a % 2 == 0 and runs == (a + 1, a - 1, a):
            return {"s": a}
    return None


def _case17(s):
    if len(s) % 2 == 0 and _all_ones(s):
        return {"l": len(s)}
    return None


def _case18(s):
    return {} if s == (1, 2, 1) else None


def _polys_case4(params):
    l = params["l"]
    return [ZERO, X_MINUS_1] + [P(Fraction(2 * i - 1, 2), Fraction(1, 2)) for i in range(l)]


# (case, rule, polynomials or builder, segment bound); checked in this order so the
# specific patterns (1,2,1) and {s}^l win over the generic 1^a,2,1^b family
CATALOG: list[tuple[int, Rule, object, Optional[int]]] = [
    (1, _case1, [ZERO, X_MINUS_1, P(0, -1, 1), P(-1, 0, 1)], None),
    (18, _case18, [ZERO, X_MINUS_1, TWO_X_MINUS_1], 10),
    (17, _case17, [ZERO, X_MINUS_1, X, TWO_X_MINUS_1], None),
    (2, _case2, [ZERO, X_MINUS_1], 10),
    (4, _case4, _polys_case4, 8),
    (3, _case3, [ZERO, X_MINUS_1], 10),
    (5, _case5, [ZERO, X_MINUS_1, X], None),
    (6, _case6, [ZERO], None),
    (7, _case7, [ZERO, X_MINUS_1], None),
    (8, _case8, [ZERO, X_MINUS_1], None),
    (12, _case12, [ZERO, X_MINUS_1], None),
    (9, _case9, [ZERO], None),
    (10, _case10, [ZERO, X_MINUS_1], None),
    (11, _case11, [ZERO], None),
    (13, _case13, [ZERO, X_MINUS_1], 10),
    (14, _case14, [ZERO, X_MINUS_1], 10),
    (15, _case15, [ZERO, X_MINUS_1], 10),
    (16, _case16, [ZERO, X_MINUS_1], 10),
]

_SEGMENT_OVERRIDES = {(2, 1, 1): 10}


class NoReservedSet(LookupError):
    pass


def matching_cases(s) -> list[int]:
    parts = Composition.of(s).parts
    return [case for case, rule, _, _ in CATALOG if rule(parts) is not None]


def reserved_set(s, validate: bool = True) -> ReservedSet:
    comp = Composition.of(s)
    parts = comp.parts
    for case, rule, polys, bound in CATALOG:
        params = rule(parts)
        if params is None:
            continue
        if callable(polys):
            polys = polys(params)
        bound = _SEGMENT_OVERRIDES.get(parts, bound)
        sizes = list(params.values()) + list(parts) + [comp.length]
        extrapolated = any(v > PARAMETER_BOUND for v in sizes)
        rs = ReservedSet(comp, case, tuple(polys), bound, extrapolated, params)
        if validate:
            rs.validate(limit=120)
        return rs
    raise NoReservedSet(f"no known reserved set for ({comp})")
