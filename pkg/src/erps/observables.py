"""Polynomial observables: Heisenberg pullback, admissibility, quantization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .circuits import Circuit, SymbolicMap, compose_symbolic
from .errors import InadmissibleObservableError
from .polynomial import DEFAULT_TERM_BUDGET, Monomial, Polynomial

PolynomialObservable = Polynomial

MAX_P_DEGREE = 2


def observable_from_terms(terms: Sequence[dict], modes: Optional[int] = None,
                          term_budget: int = DEFAULT_TERM_BUDGET) -> Polynomial:
    """Parse ``[{"c": 1.0, "q": [..], "p": [..]}, ...]`` into a polynomial."""
    monos = []
    for t in terms:
        q = tuple(int(e) for e in t["q"])
        p = tuple(int(e) for e in t["p"])
        if len(q) != len(p):
            raise ValueError("q and p exponent arrays must have equal length")
        monos.append(Monomial(float(t["c"]), q, p))
    if modes is None and not monos:
        raise ValueError("observable needs at least one term")
    return Polynomial.from_monomials(monos, modes, term_budget=term_budget)


def observable_to_terms(obs: Polynomial) -> List[dict]:
    return [{"c": m.coeff, "q": list(m.q_exponents), "p": list(m.p_exponents)}
            for m in obs.monomials()]


def pullback(obs: Polynomial, sym: SymbolicMap | Circuit) -> Polynomial:
    """``O(f(q, p), g(q, p))`` expanded to canonical form."""
    if isinstance(sym, Circuit):
        sym = compose_symbolic(sym, obs.term_budget)
    if sym.modes != obs.modes:
        raise ValueError("observable and map act on different mode counts")
    return obs.substitute(sym.images())


def check_admissible(obs: Polynomial):
    """Return ``(ok, offending)``: every monomial must have total p-degree <= 2."""
    offending = [m for m in obs.monomials() if m.p_degree > MAX_P_DEGREE]
    return not offending, offending


def require_admissible(obs: Polynomial) -> None:
    ok, bad = check_admissible(obs)
    if not ok:
        names = ", ".join(str(m) for m in bad[:10])
        more = f" (+{len(bad) - 10} more)" if len(bad) > 10 else ""
        raise InadmissibleObservableError(
            f"pulled-back observable has terms of momentum degree > {MAX_P_DEGREE}: {names}{more}",
            bad)


def evaluate(obs: Polynomial, point) -> np.ndarray:
    return obs.evaluate(point.q, point.p)


@dataclass(frozen=True)
class QuantizedTerm:
    """``coeff * F(q)`` with momentum operators placed according to the ordering rule.

    * no ``p``: ``F(q)``
    * one ``p_m``: ``1/2 (F p_m + p_m F)``  (``p_left = m``, ``symmetrize_pair``)
    * ``p_m p_m``: ``p_m F p_m``
    * ``p_m p_n``, ``m != n``: ``1/2 (p_m F p_n + p_n F p_m)``
    """

    coeff: float
    q_exponents: tuple
    p_left: Optional[int] = None
    p_right: Optional[int] = None
    symmetrize_pair: bool = False

    def __str__(self):
        F = "*".join(f"q{k}^{e}" if e > 1 else f"q{k}" for k, e in enumerate(self.q_exponents) if e) or "1"
        if self.p_left is None:
            body = F
        elif self.p_right is None:
            body = f"1/2({F} p{self.p_left} + p{self.p_left} {F})"
        elif self.p_left == self.p_right:
            body = f"p{self.p_left} {F} p{self.p_left}"
        else:
            m, n = self.p_left, self.p_right
            body = f"1/2(p{m} {F} p{n} + p{n} {F} p{m})"
        return f"{self.coeff:g}*{body}"


@dataclass(frozen=True)
class QuantizedOperatorSpec:
    modes: int
    terms: tuple

    def __str__(self):
        return " + ".join(str(t) for t in self.terms) or "0"


def quantize(obs: Polynomial) -> QuantizedOperatorSpec:
    require_admissible(obs)
    terms = []
    for m in obs.monomials():
        pmodes = [k for k, e in enumerate(m.p_exponents) for _ in range(e)]
        if not pmodes:
            terms.append(QuantizedTerm(m.coeff, m.q_exponents))
        elif len(pmodes) == 1:
            terms.append(QuantizedTerm(m.coeff, m.q_exponents, pmodes[0], None, True))
        else:
            a, b = pmodes
            terms.append(QuantizedTerm(m.coeff, m.q_exponents, a, b, a != b))
    return QuantizedOperatorSpec(obs.modes, tuple(terms))
