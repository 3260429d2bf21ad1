"""Sparse real polynomials in phase-space variables.

A polynomial on ``N`` modes lives in the ``2N`` variables
``(q_0, ..., q_{N-1}, p_0, ..., p_{N-1})``.  Terms are stored in a dict
keyed by the exponent tuple, which makes the canonical form (merged
duplicates, negligible terms dropped, sorted keys) cheap to maintain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

from .errors import PolynomialBlowupError

Exponents = Tuple[int, ...]

DEFAULT_TERM_BUDGET = 100_000
# relative to the largest |coeff|; realizes exact cancellation of transient terms
DROP_RTOL = 1e-15


@dataclass(frozen=True)
class Monomial:
    coeff: float
    q_exponents: Tuple[int, ...]
    p_exponents: Tuple[int, ...]

    @property
    def p_degree(self) -> int:
        return sum(self.p_exponents)

    def __str__(self) -> str:
        return _format_term(self.coeff, self.q_exponents + self.p_exponents, len(self.q_exponents))


class Polynomial:
    """Real polynomial in ``(q, p)`` over ``modes`` modes, kept canonical."""

    __slots__ = ("modes", "_terms", "term_budget")

    def __init__(self, modes: int, terms: Mapping[Exponents, float] | None = None,
                 term_budget: int = DEFAULT_TERM_BUDGET):
        if modes < 1:
            raise ValueError("modes must be >= 1")
        self.modes = int(modes)
        self.term_budget = int(term_budget)
        self._terms: Dict[Exponents, float] = {}
        if terms:
            for key, c in terms.items():
                key = tuple(int(e) for e in key)
                if len(key) != 2 * self.modes:
                    raise ValueError(f"exponent tuple {key} has wrong length for {modes} modes")
                if any(e < 0 for e in key):
                    raise ValueError(f"negative exponent in {key}")
                self._terms[key] = self._terms.get(key, 0.0) + float(c)
        self._canonicalize()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def constant(cls, modes: int, value: float, **kw) -> "Polynomial":
        return cls(modes, {(0,) * (2 * modes): value}, **kw)

    @classmethod
    def q(cls, modes: int, k: int, **kw) -> "Polynomial":
        key = [0] * (2 * modes)
        key[k] = 1
        return cls(modes, {tuple(key): 1.0}, **kw)

    @classmethod
    def p(cls, modes: int, k: int, **kw) -> "Polynomial":
        key = [0] * (2 * modes)
        key[modes + k] = 1
        return cls(modes, {tuple(key): 1.0}, **kw)

    @classmethod
    def from_monomials(cls, monomials: Iterable[Monomial], modes: int | None = None,
                       **kw) -> "Polynomial":
        monomials = list(monomials)
        if modes is None:
            if not monomials:
                raise ValueError("cannot infer mode count from an empty monomial list")
            modes = len(monomials[0].q_exponents)
        terms: Dict[Exponents, float] = {}
        for m in monomials:
            if len(m.q_exponents) != modes or len(m.p_exponents) != modes:
                raise ValueError("monomial exponent arrays must have length equal to modes")
            key = tuple(m.q_exponents) + tuple(m.p_exponents)
            terms[key] = terms.get(key, 0.0) + m.coeff
        return cls(modes, terms, **kw)

    # -- canonical form -------------------------------------------------------

    def _canonicalize(self) -> None:
        if not self._terms:
            return
        cmax = max(abs(c) for c in self._terms.values())
        cut = DROP_RTOL * cmax
        self._terms = {k: c for k, c in sorted(self._terms.items())
                       if c != 0.0 and abs(c) > cut}
        if len(self._terms) > self.term_budget:
            raise PolynomialBlowupError(
                f"polynomial has {len(self._terms)} terms, budget is {self.term_budget}")

    @property
    def terms(self) -> Dict[Exponents, float]:
        return dict(self._terms)

    def monomials(self) -> list[Monomial]:
        n = self.modes
        return [Monomial(c, k[:n], k[n:]) for k, c in self._terms.items()]

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        return max((sum(k) for k in self._terms), default=0)

    def p_degree(self) -> int:
        n = self.modes
        return max((sum(k[n:]) for k in self._terms), default=0)

    def q_degree(self) -> int:
        n = self.modes
        return max((sum(k[:n]) for k in self._terms), default=0)

    def max_exponents(self) -> Exponents:
        if not self._terms:
            return (0,) * (2 * self.modes)
        return tuple(int(x) for x in np.max(np.array(list(self._terms)), axis=0))

    # -- arithmetic -----------------------------------------------------------

    def _new(self, terms) -> "Polynomial":
        return Polynomial(self.modes, terms, term_budget=self.term_budget)

    def _check_compat(self, other: "Polynomial") -> None:
        if other.modes != self.modes:
            raise ValueError(f"mode mismatch: {self.modes} vs {other.modes}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.modes, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_compat(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0.0) + c
        return self._new(out)

    __radd__ = __add__

    def __neg__(self):
        return self._new({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self._new({k: c * other for k, c in self._terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_compat(other)
        if len(self._terms) * len(other._terms) > 50 * self.term_budget:
            raise PolynomialBlowupError(
                f"product of {len(self._terms)} x {len(other._terms)} terms exceeds budget")
        out: Dict[Exponents, float] = {}
        for ka, ca in self._terms.items():
            for kb, cb in other._terms.items():
                key = tuple(a + b for a, b in zip(ka, kb))
                out[key] = out.get(key, 0.0) + ca * cb
            if len(out) > self.term_budget:
                raise PolynomialBlowupError(
                    f"intermediate product exceeds term budget {self.term_budget}")
        return self._new(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers are supported")
        result = Polynomial.constant(self.modes, 1.0, term_budget=self.term_budget)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.modes == other.modes and self._terms == other._terms

    def __hash__(self):
        return hash((self.modes, tuple(self._terms.items())))

    def allclose(self, other: "Polynomial", rtol=1e-12, atol=1e-12) -> bool:
        self._check_compat(other)
        keys = set(self._terms) | set(other._terms)
        return all(np.isclose(self._terms.get(k, 0.0), other._terms.get(k, 0.0),
                              rtol=rtol, atol=atol) for k in keys)

    # -- calculus & substitution ---------------------------------------------

    def derivative(self, var: int) -> "Polynomial":
        """Partial derivative with respect to flat variable index ``var``."""
        out: Dict[Exponents, float] = {}
        for k, c in self._terms.items():
            e = k[var]
            if e == 0:
                continue
            nk = list(k)
            nk[var] = e - 1
            out[tuple(nk)] = out.get(tuple(nk), 0.0) + c * e
        return self._new(out)

    def substitute(self, images: Sequence["Polynomial"]) -> "Polynomial":
        """Compose: replace variable ``v`` by ``images[v]`` (all on a common mode count)."""
        if len(images) != 2 * self.modes:
            raise ValueError("need one image polynomial per variable")
        target = images[0].modes
        budget = self.term_budget
        one = Polynomial.constant(target, 1.0, term_budget=budget)
        cache: Dict[Tuple[int, int], Polynomial] = {}

        def power(v: int, e: int) -> Polynomial:
            if e == 0:
                return one
            if (v, e) not in cache:
                cache[(v, e)] = images[v] if e == 1 else power(v, e - 1) * images[v]
            return cache[(v, e)]

        acc: Dict[Exponents, float] = {}
        for k, c in self._terms.items():
            term = one * c
            for v, e in enumerate(k):
                if e:
                    term = term * power(v, e)
            for tk, tc in term._terms.items():
                acc[tk] = acc.get(tk, 0.0) + tc
            if len(acc) > budget:
                raise PolynomialBlowupError(f"substitution exceeds term budget {budget}")
        return Polynomial(target, acc, term_budget=budget)

    # -- evaluation -----------------------------------------------------------

    def evaluate(self, q, p) -> np.ndarray:
        """Evaluate at points ``q, p`` of shape ``(..., N)``."""
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        x = np.concatenate([q, p], axis=-1)
        if x.shape[-1] != 2 * self.modes:
            raise ValueError(f"points have {x.shape[-1] // 2} modes, polynomial has {self.modes}")
        out = np.zeros(x.shape[:-1])
        if not self._terms:
            return out
        # overflow yields inf, which callers detect and report
        with np.errstate(over="ignore", invalid="ignore"):
            maxe = self.max_exponents()
            powers = []
            for v, m in enumerate(maxe):
                tbl = [None] * (m + 1)
                if m >= 1:
                    tbl[1] = x[..., v]
                    for e in range(2, m + 1):
                        tbl[e] = tbl[e - 1] * x[..., v]
                powers.append(tbl)
            for k, c in self._terms.items():
                t = np.full(x.shape[:-1], c)
                for v, e in enumerate(k):
                    if e:
                        t = t * powers[v][e]
                out = out + t
        return out

    # -- display --------------------------------------------------------------

    def __repr__(self) -> str:
        return f"Polynomial(modes={self.modes}, {self})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        return " + ".join(_format_term(c, k, self.modes) for k, c in self._terms.items())


def _format_term(c: float, key: Exponents, modes: int) -> str:
    parts = [f"{c:g}"]
    for v, e in enumerate(key):
        if not e:
            continue
        name = f"q{v}" if v < modes else f"p{v - modes}"
        parts.append(name if e == 1 else f"{name}^{e}")
    return "*".join(parts)
