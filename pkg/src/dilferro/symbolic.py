"""Symbolic derivation of the multi-overlap identity families.

Two independent routes produce linear constraints on quenched overlap
averages, expanded exactly in theta = tanh(beta) with rational coefficients:

* ``streaming_derivative``: the t-derivative of a monomial average under the
  cavity-field perturbation of the Poisson-diluted model.  The order-k term
  appends one first-power overlap factor q_A over A = (chosen old replicas)
  union (fresh replicas), with coefficient (-1)^u C(s+u-1, u) from the
  geometric expansion of the normalizing denominator.
* ``self_averaging_fG``: the generator obtained from self-averaging of the
  internal energy density in the Bernoulli-diluted model (the same expansion
  with connectivity alpha applies to the Poisson model).  Appended factors
  enter squared (two independent uniform sites), the two expectations carry
  denominator powers s and s+1, and every surviving term factors exactly as
  coefficient * theta^k * (1 - theta^2); the engine verifies that
  factorization instead of assuming it.

``gauge_complete`` upgrades the streaming output to stochastically stable
monomials (the odd appended factor is squared by the gauge spin trick), and
``compare_methods`` checks that both routes yield the same normalized
identities order by order.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations

from .errors import ParameterError, StructureError
from .monomials import (
    ONE,
    OverlapFactor,
    OverlapMonomial,
    canonicalize,
    is_stochastically_stable,
    max_replica,
    multiply,
    render,
    replica_parity_counts,
    sort_key,
)

__all__ = [
    "AlphaSymbol",
    "Prefactor",
    "Coefficient",
    "MonomialCombination",
    "IdentityExpression",
    "MethodComparison",
    "streaming_derivative",
    "gauge_complete",
    "self_averaging_fG",
    "extract_identities",
    "compare_methods",
    "prefactor_numeric",
    "evaluate_combination",
    "combination_text",
    "identity_text",
]


class AlphaSymbol(str, Enum):
    ALPHA_PRIME = "alpha_prime"  # M*alpha/N^2 (Bernoulli), -> alpha/2
    TWO_ALPHA_TILDE = "two_alpha_tilde"  # 2*N*alpha/(N+1) (Poisson cavity), -> 2*alpha
    ALPHA = "alpha"  # plain alpha (Poisson via self-averaging)


@dataclass(frozen=True)
class Prefactor:
    symbol: AlphaSymbol
    one_minus_theta_sq: bool = False

    @property
    def intrinsic(self) -> Fraction:
        """Rational factor folded into the symbol (the 2 of 2*alpha~)."""
        return Fraction(2) if self.symbol is AlphaSymbol.TWO_ALPHA_TILDE else Fraction(1)

    def base_text(self) -> str:
        base = {
            AlphaSymbol.ALPHA_PRIME: "alpha'",
            AlphaSymbol.TWO_ALPHA_TILDE: "alpha~",
            AlphaSymbol.ALPHA: "alpha",
        }[self.symbol]
        return base + ("*(1-theta^2)" if self.one_minus_theta_sq else "")

    def text(self) -> str:
        pre = "" if self.intrinsic == 1 else f"{self.intrinsic}*"
        return pre + self.base_text()


@dataclass(frozen=True)
class Coefficient:
    rational: Fraction
    theta_power: int
    prefactor: Prefactor


class MonomialCombination:
    """Formal linear combination of canonical monomials with theta-polynomial
    coefficients."""

    def __init__(self):
        self.terms: dict[OverlapMonomial, tuple[Coefficient, ...]] = {}

    def add(self, mono: OverlapMonomial, coeff: Coefficient) -> None:
        if coeff.rational == 0:
            return
        existing = list(self.terms.get(mono, ()))
        for i, c in enumerate(existing):
            if c.theta_power == coeff.theta_power and c.prefactor == coeff.prefactor:
                total = c.rational + coeff.rational
                if total == 0:
                    existing.pop(i)
                else:
                    existing[i] = Coefficient(total, c.theta_power, c.prefactor)
                break
        else:
            existing.append(coeff)
        existing.sort(key=lambda c: (c.theta_power, c.prefactor.one_minus_theta_sq))
        if existing:
            self.terms[mono] = tuple(existing)
        else:
            self.terms.pop(mono, None)

    def monomials(self) -> list[OverlapMonomial]:
        return sorted(self.terms, key=sort_key)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        return isinstance(other, MonomialCombination) and self.terms == other.terms

    def coefficient(self, mono: OverlapMonomial, theta_power: int) -> Fraction:
        return sum(
            (c.rational for c in self.terms.get(mono, ()) if c.theta_power == theta_power),
            Fraction(0),
        )

    def to_json(self) -> list[dict]:
        out = []
        for mono in self.monomials():
            for c in self.terms[mono]:
                out.append(
                    {
                        "monomial": render(mono),
                        "coefficient": str(c.rational),
                        "theta_power": c.theta_power,
                        "alpha_symbol": c.prefactor.symbol.value,
                        "one_minus_theta_sq": c.prefactor.one_minus_theta_sq,
                    }
                )
        return out


@dataclass(frozen=True)
class IdentityExpression:
    """One normalized linear constraint: sum of coeff * <monomial> = 0."""

    order: int
    terms: tuple[tuple[OverlapMonomial, Fraction], ...]

    def as_dict(self) -> dict[OverlapMonomial, Fraction]:
        return dict(self.terms)


# -- streaming route (Poisson cavity) ------------------------------------------------


def _fresh(s: int, count: int) -> tuple[int, ...]:
    return tuple(range(s + 1, s + 1 + count))


def streaming_derivative(F: OverlapMonomial, s: int, order: int) -> MonomialCombination:
    """d/dt of the t-averaged monomial F over s replicas, to theta^order.

    At order k = j + u the appended factor is q over (A, |A| = j) union
    (u fresh replicas), first power, with coefficient
    (-1)^u * binom(s+u-1, u); the k = 0 term cancels against the counterterm.
    All terms carry the prefactor 2*alpha_tilde.
    """
    if not F.canonical:
        raise ParameterError("F must be canonical")
    if s < max(1, max_replica(F)):
        raise ParameterError("s must cover every replica label of F")
    if order < 1:
        raise ParameterError("expansion order must be >= 1")
    out = MonomialCombination()
    pref = Prefactor(AlphaSymbol.TWO_ALPHA_TILDE)
    for k in range(1, order + 1):
        for j in range(0, min(s, k) + 1):
            u = k - j
            coeff = Fraction((-1) ** u * math.comb(s + u - 1, u))
            for subset in combinations(range(1, s + 1), j):
                reps = tuple(sorted(subset)) + _fresh(s, u)
                mono = canonicalize(
                    OverlapMonomial(F.factors + (OverlapFactor(reps, 1),))
                )
                out.add(mono, Coefficient(coeff, k, pref))
    return out


def gauge_complete(c: MonomialCombination) -> MonomialCombination:
    """Square the odd appended factor of every term (gauge spin trick).

    Each monomial must be stochastically stable except for a single factor of
    odd exponent whose replica set is exactly the odd-replica set; multiplying
    by that overlap once restores stability.
    """
    out = MonomialCombination()
    for mono, coeffs in c.terms.items():
        odd = tuple(sorted(r for r, cnt in replica_parity_counts(mono).items() if cnt % 2))
        if odd:
            if not any(
                f.replicas == odd and f.exponent % 2 == 1 for f in mono.factors
            ):
                raise StructureError(
                    f"odd part of {render(mono)} is not a single appended factor"
                )
            mono = multiply(mono, OverlapMonomial((OverlapFactor(odd, 1),)))
        if not is_stochastically_stable(mono):
            raise StructureError(f"gauge completion left {render(mono)} unstable")
        for coeff in coeffs:
            out.add(mono, coeff)
    return out


# -- self-averaging route (Bernoulli / Poisson first method) --------------------------


def _squared_factor_monomial(G: OverlapMonomial, reps: tuple[int, ...]) -> OverlapMonomial:
    if not reps:
        return canonicalize(G)
    return canonicalize(OverlapMonomial(G.factors + (OverlapFactor(reps, 2),)))


def self_averaging_fG(
    G: OverlapMonomial,
    s: int,
    order: int,
    dilution: str = "bernoulli",
) -> MonomialCombination:
    """Generator f_G of linear constraints from internal-energy self-averaging.

    Expands E[Omega(h_l G)] (denominator power s) and E[Omega(h_l) Omega(G)]
    (extra factor omega + theta, denominator power s+1), sums over l, and
    returns f_G = -Delta_G.  Every appended overlap enters squared.  The raw
    theta series of each monomial supports exactly two orders (k, k+2) with
    opposite coefficients; the engine checks that and emits the single
    (1 - theta^2)-flagged coefficient at the base order.
    """
    if not G.canonical:
        raise ParameterError("G must be canonical")
    if s < max(1, max_replica(G)):
        raise ParameterError("s must cover every replica label of G")
    if order < 0:
        raise ParameterError("expansion order must be >= 0")
    symbol = (
        AlphaSymbol.ALPHA_PRIME if dilution == "bernoulli" else AlphaSymbol.ALPHA
    )
    k_raw = order + 2
    raw: dict[OverlapMonomial, defaultdict[int, Fraction]] = defaultdict(
        lambda: defaultdict(Fraction)
    )

    # E[Omega(h_l G)]: appended pair shares a replica multiset {l} + A + fresh(u)
    for l in range(1, s + 1):
        for u in range(0, k_raw + 1):
            denom = Fraction((-1) ** u * math.comb(s + u - 1, u))
            for j in range(0, min(s, k_raw - u) + 1):
                for subset in combinations(range(1, s + 1), j):
                    counts = defaultdict(int)
                    counts[l] += 1
                    for r in subset:
                        counts[r] += 1
                    reduced = tuple(sorted(r for r, cnt in counts.items() if cnt % 2))
                    reps = reduced + _fresh(s, u)
                    mono = _squared_factor_monomial(G, reps)
                    raw[mono][j + u] += denom

    # minus s * E[Omega(h_l) Omega(G)]: factor (omega + theta), denominator s+1
    for u in range(0, k_raw + 1):
        denom = Fraction((-1) ** u * math.comb(s + u, u))
        for j in range(0, min(s, k_raw) + 1):
            for subset in combinations(range(1, s + 1), j):
                base = tuple(sorted(subset))
                if j + u <= k_raw:  # omega branch: one extra fresh replica
                    reps = base + _fresh(s, u + 1)
                    mono = _squared_factor_monomial(G, reps)
                    raw[mono][j + u] -= s * denom
                if j + u + 1 <= k_raw:  # theta branch: scalar theta
                    reps = base + _fresh(s, u)
                    mono = _squared_factor_monomial(G, reps)
                    raw[mono][j + u + 1] -= s * denom

    out = MonomialCombination()
    for mono, poly in raw.items():
        support = sorted(k for k, v in poly.items() if v != 0)
        if not support:
            continue
        if len(support) == 2 and support[1] == support[0] + 2 and poly[support[1]] == -poly[support[0]]:
            base = support[0]
        elif len(support) == 1 and support[0] > order:
            continue  # partner truncated away; beyond the requested order
        else:
            raise StructureError(
                f"series for {render(mono)} does not factor as theta^k*(1-theta^2): "
                f"{dict(poly)}"
            )
        if base <= order:
            out.add(
                mono,
                Coefficient(poly[base], base, Prefactor(symbol, one_minus_theta_sq=True)),
            )
    return out


# -- identity extraction and method comparison ----------------------------------------


def extract_identities(c: MonomialCombination) -> list[IdentityExpression]:
    """Per-theta-order linear forms, alpha/theta prefactors stripped.

    A (1 - theta^2) flag groups with its base order.  Each form is scaled so
    the lexicographically first monomial has coefficient 1.
    """
    groups: dict[int, dict[OverlapMonomial, Fraction]] = defaultdict(
        lambda: defaultdict(Fraction)
    )
    for mono, coeffs in c.terms.items():
        for coeff in coeffs:
            groups[coeff.theta_power][mono] += coeff.rational
    out = []
    for order in sorted(groups):
        terms = {m: v for m, v in groups[order].items() if v != 0}
        if not terms:
            continue
        leader = min(terms, key=sort_key)
        scale = terms[leader]
        normalized = tuple(
            sorted(((m, v / scale) for m, v in terms.items()), key=lambda kv: sort_key(kv[0]))
        )
        out.append(IdentityExpression(order=order, terms=normalized))
    return out


@dataclass(frozen=True)
class OrderComparison:
    streaming_order: int
    fg_order: int
    equal: bool
    proportional: bool
    ratio: Fraction | None  # streaming/fg coefficient ratio, alpha symbols aside


@dataclass
class MethodComparison:
    g: OverlapMonomial
    s: int
    order: int
    orders: list[OrderComparison] = field(default_factory=list)
    streaming_identities: list[IdentityExpression] = field(default_factory=list)
    fg_identities: list[IdentityExpression] = field(default_factory=list)

    @property
    def all_equal(self) -> bool:
        return all(o.equal for o in self.orders)


def compare_methods(G: OverlapMonomial, s: int, order: int) -> MethodComparison:
    """Machine-check that both derivations give the same identity families.

    The streaming route produces identities at theta^1..theta^K; the
    self-averaging generator produces the same list shifted one order down
    (its theta^0 class pairs with the streaming theta^1 class).  Besides the
    normalized comparison, the un-normalized coefficient vectors are checked
    for per-order proportionality and the rational ratio is reported (the
    alpha prefactors, 2*alpha_tilde versus alpha' or alpha, stay symbolic).
    """
    stream = gauge_complete(streaming_derivative(G, s, order))
    fg = self_averaging_fG(G, s, order)
    ids_stream = {ie.order: ie for ie in extract_identities(stream)}
    ids_fg = {ie.order: ie for ie in extract_identities(fg)}
    result = MethodComparison(
        g=G,
        s=s,
        order=order,
        streaming_identities=[ids_stream[k] for k in sorted(ids_stream)],
        fg_identities=[ids_fg[k] for k in sorted(ids_fg)],
    )
    for k in range(1, order + 1):
        a = ids_stream.get(k)
        b = ids_fg.get(k - 1)
        if a is None and b is None:
            continue
        if a is None or b is None:
            result.orders.append(OrderComparison(k, k - 1, False, False, None))
            continue
        equal = a.terms == b.terms
        ratio: Fraction | None = None
        proportional = False
        if equal:
            leader = a.terms[0][0]
            num = stream.coefficient(leader, k)
            den = fg.coefficient(leader, k - 1)
            if den != 0:
                ratio = num / den
                proportional = all(
                    stream.coefficient(mo, k) == ratio * fg.coefficient(mo, k - 1)
                    for mo, _ in a.terms
                )
        result.orders.append(OrderComparison(k, k - 1, equal, proportional, ratio))
    return result


# -- numeric evaluation ---------------------------------------------------------------


def prefactor_numeric(pref: Prefactor, alpha: float, n_sites: int, theta: float) -> float:
    if pref.symbol is AlphaSymbol.ALPHA_PRIME:
        m_pairs = n_sites * (n_sites - 1) // 2
        value = m_pairs * alpha / n_sites**2
    elif pref.symbol is AlphaSymbol.TWO_ALPHA_TILDE:
        value = 2.0 * n_sites * alpha / (n_sites + 1)
    else:
        value = alpha
    if pref.one_minus_theta_sq:
        value *= 1.0 - theta * theta
    return value


def evaluate_combination(
    c: MonomialCombination,
    monomial_values: dict[OverlapMonomial, float],
    alpha: float,
    n_sites: int,
    beta: float,
) -> float:
    """Numeric value of the combination given quenched monomial averages."""
    theta = math.tanh(beta)
    total = 0.0
    for mono, coeffs in c.terms.items():
        mval = monomial_values[mono]
        for coeff in coeffs:
            total += (
                float(coeff.rational)
                * theta**coeff.theta_power
                * prefactor_numeric(coeff.prefactor, alpha, n_sites, theta)
                * mval
            )
    return total


# -- rendering ------------------------------------------------------------------------


def _format_group(terms: list[tuple[OverlapMonomial, Fraction]]) -> tuple[Fraction, str]:
    """Pull out the common rational content; return (content, bracket text)."""
    from math import gcd

    nums = [abs(v.numerator) for _, v in terms]
    dens = [v.denominator for _, v in terms]
    g = 0
    for x in nums:
        g = gcd(g, x)
    lcm = 1
    for d in dens:
        lcm = lcm * d // gcd(lcm, d)
    content = Fraction(g if g else 1, lcm)
    if terms and terms[0][1] < 0:
        content = -content
    parts = []
    for i, (mono, v) in enumerate(terms):
        r = v / content
        mag = abs(r)
        coeff_txt = "" if mag == 1 else f"{mag}*"
        sign = "-" if r < 0 else "+"
        if i == 0:
            parts.append(("-" if r < 0 else "") + f"{coeff_txt}<{render(mono)}>")
        else:
            parts.append(f"{sign} {coeff_txt}<{render(mono)}>")
    return content, " ".join(parts)


def combination_text(c: MonomialCombination) -> str:
    """Human-readable grouped form, one line per (prefactor, theta power)."""
    if c.is_zero():
        return "0"
    groups: dict[tuple[int, Prefactor], list[tuple[OverlapMonomial, Fraction]]] = defaultdict(list)
    for mono in c.monomials():
        for coeff in c.terms[mono]:
            groups[(coeff.theta_power, coeff.prefactor)].append((mono, coeff.rational))
    lines = []
    for (power, pref), terms in sorted(groups.items(), key=lambda kv: kv[0][0]):
        terms.sort(key=lambda kv: sort_key(kv[0]))
        content, body = _format_group(terms)
        content *= pref.intrinsic
        theta_txt = "" if power == 0 else ("*theta" if power == 1 else f"*theta^{power}")
        content_txt = "" if content == 1 else ("-" if content == -1 else f"{content}*")
        lines.append(f"{content_txt}{pref.base_text()}{theta_txt} * ( {body} )")
    return "\n".join(lines)


def identity_text(ie: IdentityExpression) -> str:
    _, body = _format_group(list(ie.terms))
    return f"{body} = 0"
