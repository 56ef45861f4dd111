"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's enumeration machinery
(Gray code, Walsh-Hadamard, mask contraction): energies come from an explicit
sign matrix, and replicated expectations from the full weighted sum over all
2^(s*N) replica configurations.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np
import pytest

from dilferro.dilution import DilutionKind, DilutionModel, QuenchedGraph, sample_graph
from dilferro.monomials import OverlapMonomial
from dilferro.rng import RandomStream


def sign_matrix(n: int) -> np.ndarray:
    """(2^n, n) matrix of spins, sigma_i = +1 where bit i is set."""
    cfg = np.arange(1 << n)
    return (2 * ((cfg[:, None] >> np.arange(n)) & 1) - 1).astype(np.float64)


def oracle_energies(graph: QuenchedGraph) -> np.ndarray:
    """e(sigma) = sum_nu sigma_i sigma_j by direct per-edge summation."""
    sig = sign_matrix(graph.n_sites)
    e = np.zeros(1 << graph.n_sites)
    for i, j in graph.edges:
        e += sig[:, int(i)] * sig[:, int(j)]
    return e


def oracle_weights(graph: QuenchedGraph, beta: float) -> np.ndarray:
    e = oracle_energies(graph)
    w = np.exp(beta * (e - e.max()))
    return w / w.sum()


def oracle_monomial(graph: QuenchedGraph, beta: float, mono: OverlapMonomial) -> float:
    """Replicated expectation by full enumeration over 2^(s*N) weighted
    configurations.

    The sum is expressed as one tensor contraction over every replica's
    configuration axis (einsum evaluates exactly the full finite sum; only
    the association order differs from a literal nested loop).
    """
    n = graph.n_sites
    w = oracle_weights(graph, beta)
    sig = sign_matrix(n)
    s = max((r for f in mono.factors for r in f.replicas), default=1)
    letters = "abcdefgh"
    operands = [w] * s
    subscripts = list(letters[:s])
    for f in mono.factors:
        axes = [r - 1 for r in f.replicas]
        t = sig
        for _ in range(len(axes) - 1):
            t = t[..., None, :] * sig
        t = t.mean(axis=-1)
        for _ in range(f.exponent):
            operands.append(t)
            subscripts.append("".join(letters[a] for a in axes))
    return float(np.einsum(",".join(subscripts) + "->", *operands, optimize=True))


def oracle_monomial_loops(graph: QuenchedGraph, beta: float, mono: OverlapMonomial) -> float:
    """Literal nested-loop enumeration (tiny systems only: s*N <= 12)."""
    n = graph.n_sites
    w = oracle_weights(graph, beta)
    sig = sign_matrix(n)
    s = max((r for f in mono.factors for r in f.replicas), default=1)
    assert s * n <= 12
    total = 0.0
    for configs in product(range(1 << n), repeat=s):
        weight = math.prod(w[c] for c in configs)
        value = 1.0
        for f in mono.factors:
            q = sum(
                math.prod(sig[configs[r - 1], i] for r in f.replicas) for i in range(n)
            ) / n
            value *= q**f.exponent
        total += weight * value
    return total


@pytest.fixture
def poisson_model():
    return DilutionModel(DilutionKind.POISSON, 1.0)


@pytest.fixture
def bernoulli_model():
    return DilutionModel(DilutionKind.BERNOULLI, 1.0)


@pytest.fixture
def small_graph(poisson_model):
    return sample_graph(poisson_model, 5, RandomStream(2024, 0))


def make_graph(kind: str, alpha: float, n: int, seed: int) -> QuenchedGraph:
    model = DilutionModel(DilutionKind(kind), alpha)
    return sample_graph(model, n, RandomStream(seed, 0), seed=seed)
