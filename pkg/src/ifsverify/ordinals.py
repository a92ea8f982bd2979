"""Ordinals below w^w (plus w^w itself) in Cantor normal form, Cantor-Bendixson
derivatives of ordinal spaces [0, beta], and embeddings into [0, 1].

An ordinal is a tuple of (exponent, coefficient) pairs with strictly
decreasing exponents; ``omega_omega`` marks w^w. Strings use ``w`` for omega:
``w^3*2 + w + 5``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import total_ordering

import numpy as np

from .geometry import PointCloud

MAX_EMBED_POINTS = 1_000_000


class OrdinalError(ValueError):
    pass


@total_ordering
@dataclass(frozen=True)
class CnfOrdinal:
    terms: tuple[tuple[int, int], ...] = ()
    omega_omega: bool = False

    def __post_init__(self) -> None:
        terms = tuple((int(e), int(c)) for e, c in self.terms)
        if self.omega_omega and terms:
            raise OrdinalError("ordinals above w^w are not supported")
        for e, c in terms:
            if e < 0 or c <= 0:
                raise OrdinalError(f"bad CNF term w^{e}*{c}")
        if any(terms[i][0] <= terms[i + 1][0] for i in range(len(terms) - 1)):
            raise OrdinalError("CNF exponents must strictly decrease")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def finite(cls, n: int) -> CnfOrdinal:
        if n < 0:
            raise OrdinalError("negative ordinal")
        return cls(((0, n),) if n else ())

    @classmethod
    def power(cls, n: int, coef: int = 1) -> CnfOrdinal:
        return cls(((n, coef),))

    @property
    def is_zero(self) -> bool:
        return not self.terms and not self.omega_omega

    @property
    def is_finite(self) -> bool:
        return not self.omega_omega and (not self.terms or self.terms[0][0] == 0)

    @property
    def is_limit(self) -> bool:
        if self.omega_omega:
            return True
        return bool(self.terms) and self.terms[-1][0] > 0

    @property
    def degree(self) -> int:
        """Leading exponent; undefined for w^w."""
        if self.omega_omega:
            raise OrdinalError("w^w has no finite degree")
        return self.terms[0][0] if self.terms else 0

    @property
    def natural(self) -> int:
        """Value of a finite ordinal."""
        if not self.is_finite:
            raise OrdinalError(f"{self} is not finite")
        return self.terms[0][1] if self.terms else 0

    def divisible_by_power(self, k: int) -> bool:
        """w^k divides self (0 is divisible by everything)."""
        return self.omega_omega or all(e >= k for e, _ in self.terms)

    def truncate(self, k: int) -> CnfOrdinal:
        """Largest multiple of w^k that is <= self."""
        if self.omega_omega:
            return self
        return CnfOrdinal(tuple(t for t in self.terms if t[0] >= k))

    def __add__(self, other: CnfOrdinal) -> CnfOrdinal:
        if other.is_zero:
            return self
        if self.omega_omega:
            raise OrdinalError("ordinals above w^w are not supported")
        if other.omega_omega:
            return other
        lead, coef = other.terms[0]
        head = [t for t in self.terms if t[0] > lead]
        same = [c for e, c in self.terms if e == lead]
        if same:
            coef += same[0]
        return CnfOrdinal(tuple(head) + ((lead, coef),) + other.terms[1:])

    def __lt__(self, other: CnfOrdinal) -> bool:
        return cnf_compare(self, other) < 0

    def __str__(self) -> str:
        if self.omega_omega:
            return "w^w"
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.terms:
            if e == 0:
                parts.append(str(c))
                continue
            base = "w" if e == 1 else f"w^{e}"
            parts.append(base if c == 1 else f"{base}*{c}")
        return " + ".join(parts)


ZERO = CnfOrdinal()
OMEGA = CnfOrdinal.power(1)
OMEGA_OMEGA = CnfOrdinal(omega_omega=True)


def cnf_compare(a: CnfOrdinal, b: CnfOrdinal) -> int:
    """-1, 0 or 1 as a <, =, > b."""
    if a.omega_omega or b.omega_omega:
        return int(a.omega_omega) - int(b.omega_omega)
    for (ea, ca), (eb, cb) in zip(a.terms, b.terms):
        if ea != eb:
            return 1 if ea > eb else -1
        if ca != cb:
            return 1 if ca > cb else -1
    return (len(a.terms) > len(b.terms)) - (len(a.terms) < len(b.terms))


_TERM = re.compile(r"^(?:(?P<n>\d+)|(?:w|ω)(?:\^(?P<e>\d+|w|ω))?(?:\*(?P<c>\d+))?)$")


def parse_cnf(text: str) -> CnfOrdinal:
    """Parse ``w^a*c + ... + c0``; terms are summed with ordinal addition."""
    chunks = [p.replace(" ", "") for p in text.split("+")]
    if not text.strip() or any(not p for p in chunks):
        raise OrdinalError(f"cannot parse ordinal {text!r}")
    total = ZERO
    for p in chunks:
        m = _TERM.match(p)
        if m is None:
            raise OrdinalError(f"cannot parse ordinal term {p!r}")
        if m.group("n") is not None:
            term = CnfOrdinal.finite(int(m.group("n")))
        elif m.group("e") in ("w", "ω"):
            if m.group("c") is not None:
                raise OrdinalError("ordinals above w^w are not supported")
            term = OMEGA_OMEGA
        else:
            e = int(m.group("e") or 1)
            c = int(m.group("c") or 1)
            if c == 0:
                term = ZERO
            else:
                term = CnfOrdinal.power(e, c)
        total = total + term
    return total


# --------------------------------------------------------------------------
# ordinal spaces


@dataclass(frozen=True)
class OrdinalSpace:
    """{gamma <= beta : gamma >= w^k and w^k divides gamma}; level 0 is all of [0, beta]."""

    beta: CnfOrdinal
    level: int = 0

    def __post_init__(self) -> None:
        if self.level < 0:
            raise OrdinalError("level must be >= 0")

    @property
    def is_empty(self) -> bool:
        return self.level > 0 and self.beta < CnfOrdinal.power(self.level)

    @property
    def is_discrete(self) -> bool:
        return cb_derivative(self).is_empty

    def contains(self, gamma: CnfOrdinal) -> bool:
        if gamma > self.beta:
            return False
        if self.level == 0:
            return True
        return gamma >= CnfOrdinal.power(self.level) and gamma.divisible_by_power(self.level)


def cb_derivative(X: OrdinalSpace) -> OrdinalSpace:
    """Accumulation points of X. In the order topology a point of X is a limit
    of X exactly when it is a positive multiple of w^(k+1)."""
    return OrdinalSpace(X.beta.truncate(X.level + 1), X.level + 1)


def height(beta: CnfOrdinal) -> CnfOrdinal:
    """Least alpha with the alpha-th derivative of [0, beta] discrete."""
    if beta.omega_omega:
        return OMEGA
    return CnfOrdinal.finite(beta.degree)


def height_by_iteration(beta: CnfOrdinal, cap: int = 64) -> int:
    """Count derivatives of [0, beta] until discrete (finite heights only)."""
    X = OrdinalSpace(beta)
    for k in range(cap + 1):
        if X.is_discrete:
            return k
        X = cb_derivative(X)
    raise OrdinalError(f"height exceeds {cap}")


OBSTRUCTED = "obstructed_limit_height"
UNOBSTRUCTED = "unobstructed"


def classify_topological_fractal(beta: CnfOrdinal) -> str:
    if beta.is_zero:
        raise OrdinalError("need beta >= 1")
    return OBSTRUCTED if height(beta).is_limit else UNOBSTRUCTED


# --------------------------------------------------------------------------
# embeddings into [0, 1]
#
# Larger ordinals sit further left, so every block sequence converges to its
# supremum at the left end of its interval.


def _embed_power(n: int, lo: float, w: float, depth: int, out: list) -> None:
    """[0, w^n] into [lo, lo + w], w^n at lo."""
    if n == 0:
        out.append((lo + w, ZERO))
        out.append((lo, CnfOrdinal.finite(1)))
        return
    if n == 1:
        for k in range(depth):
            out.append((lo + w / (k + 1), CnfOrdinal.finite(k)))
        out.append((lo, OMEGA))
        return
    for j in range(depth):
        span = w / ((j + 1) * (j + 2))
        start = lo + w / (j + 2) + span / 4.0
        sub: list = []
        _embed_power(n - 1, start, span / 2.0, depth, sub)
        if j == 0:
            out.extend(sub)
        else:
            shift = CnfOrdinal.power(n - 1, j) + CnfOrdinal.finite(1)
            out.extend((x, shift + g) for x, g in sub)
    out.append((lo, CnfOrdinal.power(n)))


def _power_size(n: int, depth: int) -> int:
    if n == 0:
        return 2
    if n == 1:
        return depth + 1
    return depth * _power_size(n - 1, depth) + 1


@dataclass(frozen=True)
class Block:
    index: int
    height: int
    lo: float
    hi: float


def omega_omega_blocks(depth: int) -> tuple[Block, ...]:
    """Block n is a copy of [0, w^n] inside [1/(n+1), 1/n]."""
    out = []
    for n in range(1, depth + 1):
        a, b = 1.0 / (n + 1), 1.0 / n
        span = b - a
        out.append(Block(n, n, a + span / 4.0, b - span / 4.0))
    return tuple(out)


def _segments(beta: CnfOrdinal) -> list[int]:
    """Split [0, beta] into [0, w^a1] followed by copies of (p, p + w^a]."""
    segs = []
    for e, c in beta.terms:
        segs += [e] * c
    return segs


def embed_ordinals(beta: CnfOrdinal, depth: int) -> list[tuple[float, CnfOrdinal]]:
    """Coordinates and ordinals of the truncated embedding, in ordinal order."""
    if depth < 1:
        raise OrdinalError("depth must be >= 1")
    out: list[tuple[float, CnfOrdinal]] = []
    if beta.omega_omega:
        size = 1 + _power_size(1, depth) + sum(_power_size(n, depth) - 1 for n in range(2, depth + 1))
        if size > MAX_EMBED_POINTS:
            raise OrdinalError(f"embedding would have {size} points")
        for blk in omega_omega_blocks(depth):
            sub: list = []
            _embed_power(blk.index, blk.lo, blk.hi - blk.lo, depth, sub)
            if blk.index == 1:
                out.extend(sub)
            else:
                shift = CnfOrdinal.power(blk.index - 1) + CnfOrdinal.finite(1)
                out.extend((x, shift + g) for x, g in sub)
        out.append((0.0, OMEGA_OMEGA))
    elif beta.is_zero:
        out.append((0.0, ZERO))
    else:
        segs = _segments(beta)
        size = sum(_power_size(e, depth) for e in segs)
        if size > MAX_EMBED_POINTS:
            raise OrdinalError(f"embedding would have {size} points")
        M = len(segs)
        prev = ZERO
        for i, e in enumerate(segs):
            cell = 1.0 / M
            lo = 1.0 - (i + 1) * cell
            sub = []
            if M == 1:
                _embed_power(e, 0.0, 1.0, depth, sub)
            else:
                _embed_power(e, lo + cell / 4.0, cell / 2.0, depth, sub)
            top = prev + CnfOrdinal.power(e)
            if i == 0:
                out.extend(sub)
            elif e == 0:
                out.append((sub[-1][0], top))
            else:
                out.extend((x, prev + CnfOrdinal.finite(1) + g) for x, g in sub)
            prev = top
    xs = np.array([x for x, _ in out])
    if np.any(np.diff(xs) >= 0.0):
        raise OrdinalError("embedding collapses in double precision; lower the depth")
    return out


def embed_in_unit_interval(beta: CnfOrdinal, depth: int) -> PointCloud:
    """Points (x, 0) labelled with their ordinal; order-reversing in x."""
    pairs = embed_ordinals(beta, depth)
    xs = np.array([x for x, _ in pairs])
    pts = np.column_stack([xs, np.zeros_like(xs)])
    gaps = -np.diff(xs)
    res = float(gaps.min()) if len(gaps) else 1e-3
    return PointCloud(pts, tuple(str(g) for _, g in pairs), res)
