"""Algebra of multi-overlap monomials.

A multi-overlap over a set of replicas S is q_S = (1/N) sum_i prod_{a in S}
sigma_i^(a); the magnetization is the singleton case m_a = q_{a}.  A monomial
is a product of powers of such factors, e.g. ``m1^2 q12^2``.  Monomials are
immutable values compared and hashed on their canonical form:

* within a factor, repeated replica indices cancel in pairs (sigma^2 = 1);
* factors with identical replica sets merge by adding exponents;
* replica labels are renamed to 1..r, choosing the lexicographically least
  representative over all permutations of the used labels;
* factors are ordered by (set size, set contents, exponent).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from itertools import permutations
from typing import Iterable, Sequence

__all__ = [
    "OverlapFactor",
    "OverlapMonomial",
    "ONE",
    "canonicalize",
    "is_stochastically_stable",
    "multiply",
    "site_degree",
    "max_replica",
    "monomial",
    "m",
    "q",
    "parse_monomial",
    "sort_key",
]


@dataclass(frozen=True)
class OverlapFactor:
    """One factor q_S^p with S a sorted tuple of distinct replica labels."""

    replicas: tuple[int, ...]
    exponent: int

    def __post_init__(self):
        if self.exponent < 1:
            raise ValueError("factor exponent must be >= 1")
        if not self.replicas:
            raise ValueError("factor replica set must be non-empty")
        if list(self.replicas) != sorted(set(self.replicas)):
            raise ValueError("factor replicas must be sorted and distinct")
        if any(r < 1 for r in self.replicas):
            raise ValueError("replica labels are positive integers")

    def key(self) -> tuple:
        return (len(self.replicas), self.replicas, self.exponent)


@dataclass(frozen=True)
class OverlapMonomial:
    """Product of overlap factors; ``canonical`` marks normalized instances."""

    factors: tuple[OverlapFactor, ...] = ()
    canonical: bool = False

    def __str__(self) -> str:
        return render(self)

    def __repr__(self) -> str:
        return f"OverlapMonomial({render(self)!r})"


ONE = OverlapMonomial((), canonical=True)


def monomial(*factors: tuple[Sequence[int], int]) -> OverlapMonomial:
    """Build a canonical monomial from (replica multiset, exponent) pairs."""
    raw = []
    for reps, exp in factors:
        reduced = _parity_reduce(reps)
        if reduced:
            raw.append(OverlapFactor(reduced, exp))
    return canonicalize(OverlapMonomial(tuple(raw)))


def m(label: int, exponent: int = 1) -> OverlapMonomial:
    return monomial(((label,), exponent))


def q(*labels: int, exponent: int = 1) -> OverlapMonomial:
    return monomial((labels, exponent))


def _parity_reduce(labels: Iterable[int]) -> tuple[int, ...]:
    counts = Counter(labels)
    return tuple(sorted(r for r, c in counts.items() if c % 2 == 1))


def _merge(factors: Iterable[OverlapFactor]) -> list[OverlapFactor]:
    acc: dict[tuple[int, ...], int] = {}
    for f in factors:
        acc[f.replicas] = acc.get(f.replicas, 0) + f.exponent
    return [OverlapFactor(reps, exp) for reps, exp in acc.items()]


MAX_CANONICAL_LABELS = 8  # minimal-representative search is factorial in labels


def canonicalize(mono: OverlapMonomial) -> OverlapMonomial:
    """Normal form: parity-reduce, merge, and minimize over relabelings.

    The minimal representative is found by brute force over permutations of
    the used labels (identity work never involves more than six replicas).
    Beyond MAX_CANONICAL_LABELS only the structurally trivial cases (a single
    factor, or factors with pairwise disjoint supports) are accepted.
    """
    if mono.canonical:
        return mono
    reduced = []
    for f in mono.factors:
        reps = _parity_reduce(f.replicas)
        if reps:
            reduced.append(OverlapFactor(reps, f.exponent))
    merged = _merge(reduced)
    if not merged:
        return ONE
    used = sorted({r for f in merged for r in f.replicas})
    if len(used) > MAX_CANONICAL_LABELS:
        disjoint = sum(len(f.replicas) for f in merged) == len(used)
        if not disjoint:
            raise ValueError(
                f"canonicalization supports at most {MAX_CANONICAL_LABELS} replica "
                "labels for entangled factors"
            )
        # disjoint supports: order factor shapes, then hand out labels in order
        shaped = sorted(merged, key=lambda f: (len(f.replicas), f.exponent))
        factors = []
        next_label = 1
        for f in shaped:
            reps = tuple(range(next_label, next_label + len(f.replicas)))
            next_label += len(f.replicas)
            factors.append(OverlapFactor(reps, f.exponent))
        return OverlapMonomial(tuple(sorted(factors, key=OverlapFactor.key)), canonical=True)
    best: tuple | None = None
    best_factors: tuple[OverlapFactor, ...] = ()
    for perm in permutations(range(1, len(used) + 1)):
        relabel = dict(zip(used, perm))
        cand = sorted(
            (
                OverlapFactor(tuple(sorted(relabel[r] for r in f.replicas)), f.exponent)
                for f in merged
            ),
            key=OverlapFactor.key,
        )
        cand_key = tuple(f.key() for f in cand)
        if best is None or cand_key < best:
            best = cand_key
            best_factors = tuple(cand)
    return OverlapMonomial(best_factors, canonical=True)


def is_stochastically_stable(mono: OverlapMonomial) -> bool:
    """True iff every replica label occurs an even total number of times."""
    counts: Counter[int] = Counter()
    for f in mono.factors:
        for r in f.replicas:
            counts[r] += f.exponent
    return all(c % 2 == 0 for c in counts.values())


def multiply(a: OverlapMonomial, b: OverlapMonomial) -> OverlapMonomial:
    """Product of two monomials over a shared labeling, in canonical form."""
    return canonicalize(OverlapMonomial(a.factors + b.factors))


def site_degree(mono: OverlapMonomial) -> int:
    """Number of site indices in the expanded product (one per factor power)."""
    return sum(f.exponent for f in mono.factors)


def max_replica(mono: OverlapMonomial) -> int:
    return max((r for f in mono.factors for r in f.replicas), default=0)


def sort_key(mono: OverlapMonomial) -> tuple:
    """Deterministic ordering of monomials (used for normalized identities)."""
    return (len(mono.factors), tuple(f.key() for f in mono.factors))


def replica_parity_counts(mono: OverlapMonomial) -> dict[int, int]:
    counts: Counter[int] = Counter()
    for f in mono.factors:
        for r in f.replicas:
            counts[r] += f.exponent
    return dict(counts)


# -- text form -----------------------------------------------------------------
#
# Matches the usual notation: "m1^2 q12^2", "q123^2", "q{3,10,12}".  Braces are
# used (and accepted) whenever a q-factor carries a label above 9, so the
# round-trip is lossless.

_FACTOR_RE = re.compile(r"([mq])(\{[0-9, ]+\}|[0-9]+)(?:\^([0-9]+))?$")


def render(mono: OverlapMonomial) -> str:
    if not mono.factors:
        return "1"
    parts = []
    for f in mono.factors:
        if len(f.replicas) == 1:
            name = f"m{f.replicas[0]}"
        elif max(f.replicas) <= 9:
            name = "q" + "".join(str(r) for r in f.replicas)
        else:
            name = "q{" + ",".join(str(r) for r in f.replicas) + "}"
        parts.append(name if f.exponent == 1 else f"{name}^{f.exponent}")
    return " ".join(parts)


def parse_monomial(text: str) -> OverlapMonomial:
    """Parse the rendered form back into a canonical monomial."""
    text = text.strip()
    if text in ("1", ""):
        return ONE
    factors = []
    for token in text.split():
        match = _FACTOR_RE.match(token)
        if not match:
            raise ValueError(f"cannot parse monomial factor {token!r}")
        kind, body, exp = match.groups()
        exponent = int(exp) if exp else 1
        if body.startswith("{"):
            labels = tuple(int(x) for x in body[1:-1].split(","))
        elif kind == "m":
            labels = (int(body),)
        else:
            labels = tuple(int(ch) for ch in body)
        if kind == "m" and len(labels) != 1:
            raise ValueError(f"m-factor takes one replica label: {token!r}")
        factors.append((labels, exponent))
    return monomial(*factors)
