"""Quenched random graphs for the diluted mean-field ferromagnet.

The Hamiltonian is H(sigma) = -sum_{nu=1..x} sigma_{i_nu} sigma_{j_nu} with
i_nu, j_nu i.i.d. uniform site labels (ordered pairs, self-pairs allowed, with
replacement).  The edge count x is Binomial(M, alpha/N) with M = N(N-1)/2
under Bernoulli dilution, and Poisson(alpha*N) under Poisson dilution.

Sampling is exact: the binomial count is the sum of M Bernoulli trials, the
Poisson count comes from inversion of the cumulative pmf in double precision.
Everything is a pure function of the supplied :class:`RandomStream`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import ParameterError
from .rng import RandomStream

MAX_BERNOULLI_SITES = 256  # keeps M = N(N-1)/2 trials cheap and exact
MAX_POISSON_MEAN = 1.0e4

__all__ = [
    "DilutionKind",
    "DilutionModel",
    "QuenchedGraph",
    "sample_edge_count",
    "sample_edge_counts",
    "sample_graph",
    "sample_cavity_graph",
    "check_distribution_identity",
    "poisson_draw",
    "graph_to_json",
    "graph_from_json",
    "adjacency_csr",
]


class DilutionKind(str, Enum):
    BERNOULLI = "bernoulli"
    POISSON = "poisson"


@dataclass(frozen=True)
class DilutionModel:
    """Dilution law plus connectivity parameter alpha (> 0)."""

    kind: DilutionKind
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "kind", DilutionKind(self.kind))
        if not (self.alpha >= 0) or math.isinf(self.alpha):
            raise ParameterError("alpha must be a finite non-negative real")

    def validate_for(self, n_sites: int) -> None:
        if n_sites < 1:
            raise ParameterError("n_sites must be >= 1")
        if self.kind is DilutionKind.BERNOULLI:
            if self.alpha > n_sites:
                raise ParameterError(
                    f"Bernoulli dilution needs alpha <= N (alpha={self.alpha}, N={n_sites})"
                )
            if n_sites > MAX_BERNOULLI_SITES:
                raise ParameterError(
                    f"Bernoulli sampling supports N <= {MAX_BERNOULLI_SITES}"
                )
        else:
            if self.alpha * n_sites > MAX_POISSON_MEAN:
                raise ParameterError(
                    f"Poisson sampling supports alpha*N <= {MAX_POISSON_MEAN:g}"
                )

    def mean_edges(self, n_sites: int) -> float:
        if self.kind is DilutionKind.BERNOULLI:
            m_pairs = n_sites * (n_sites - 1) // 2
            return m_pairs * self.alpha / n_sites
        return self.alpha * n_sites


@dataclass
class QuenchedGraph:
    """One disorder realization: ordered uniform site pairs plus provenance."""

    n_sites: int
    edges: np.ndarray  # (E, 2) int32, ordered as sampled
    model: DilutionModel
    seed: int

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int32).reshape(-1, 2)
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= self.n_sites):
            raise ParameterError("edge endpoints must lie in [0, n_sites)")

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def ei(self) -> np.ndarray:
        return self.edges[:, 0]

    @property
    def ej(self) -> np.ndarray:
        return self.edges[:, 1]


# -- exact count sampling --------------------------------------------------------


@lru_cache(maxsize=64)
def _poisson_cdf(lam: float) -> np.ndarray:
    """Cumulative pmf table for Poisson(lam), long enough for double precision.

    For lam <= 700 the pmf recurrence runs in linear space from k = 0; beyond
    that exp(-lam) underflows, so the recurrence runs on log pmf and terms
    below the double-precision floor contribute exactly zero to the cdf,
    which is the correct inversion behaviour for 53-bit uniforms.
    """
    if lam < 0:
        raise ParameterError("Poisson mean must be >= 0")
    kmax = int(lam + 12.0 * math.sqrt(lam) + 30.0)
    cdf = np.empty(kmax + 1, dtype=np.float64)
    if lam <= 700.0:
        pmf = math.exp(-lam)
        total = pmf
        cdf[0] = total
        for k in range(1, kmax + 1):
            pmf *= lam / k
            total += pmf
            cdf[k] = total
    else:
        log_lam = math.log(lam)
        logpmf = -lam
        total = 0.0
        for k in range(kmax + 1):
            if k > 0:
                logpmf += log_lam - math.log(k)
            total += math.exp(logpmf)
            cdf[k] = total
    return cdf


def poisson_draw(lam: float, rng: RandomStream) -> int:
    """Exact Poisson variate by cdf inversion; lam = 0 returns 0 (no draw)."""
    if lam > MAX_POISSON_MEAN:
        raise ParameterError(f"Poisson mean capped at {MAX_POISSON_MEAN:g}")
    if lam == 0.0:
        return 0
    cdf = _poisson_cdf(float(lam))
    u = rng.uniform()
    return int(np.searchsorted(cdf, u, side="right"))


def sample_edge_count(model: DilutionModel, n_sites: int, rng: RandomStream) -> int:
    """Draw the quenched edge count for one graph."""
    model.validate_for(n_sites)
    if model.kind is DilutionKind.BERNOULLI:
        m_pairs = n_sites * (n_sites - 1) // 2
        if m_pairs == 0:
            return 0
        p = model.alpha / n_sites
        us = rng.uniforms(m_pairs)
        return int((us < p).sum())
    return poisson_draw(model.alpha * n_sites, rng)


def sample_edge_counts(
    model: DilutionModel, n_sites: int, n_samples: int, rng: RandomStream
) -> np.ndarray:
    """Vectorized edge counts; consumes the stream exactly like repeated
    single draws."""
    model.validate_for(n_sites)
    if model.kind is DilutionKind.BERNOULLI:
        m_pairs = n_sites * (n_sites - 1) // 2
        if m_pairs == 0:
            return np.zeros(n_samples, dtype=np.int64)
        p = model.alpha / n_sites
        us = rng.uniforms(n_samples * m_pairs).reshape(n_samples, m_pairs)
        return (us < p).sum(axis=1).astype(np.int64)
    lam = model.alpha * n_sites
    if lam == 0.0:
        return np.zeros(n_samples, dtype=np.int64)
    cdf = _poisson_cdf(float(lam))
    us = rng.uniforms(n_samples)
    return np.searchsorted(cdf, us, side="right").astype(np.int64)


def sample_graph(model: DilutionModel, n_sites: int, rng: RandomStream, seed: int = 0) -> QuenchedGraph:
    """Draw the edge count, then that many i.i.d. uniform ordered pairs."""
    count = sample_edge_count(model, n_sites, rng)
    edges = np.empty((count, 2), dtype=np.int32)
    for t in range(count):
        edges[t, 0] = rng.randbelow(n_sites)
        edges[t, 1] = rng.randbelow(n_sites)
    return QuenchedGraph(n_sites=n_sites, edges=edges, model=model, seed=seed)


def sample_cavity_graph(
    alpha: float, n_sites: int, t: float, rng: RandomStream
) -> tuple[QuenchedGraph, list[int]]:
    """Poisson body at shifted connectivity plus t-scaled cavity field sites.

    The body graph carries Poisson(alpha_tilde * N) edges with
    alpha_tilde = N * alpha / (N + 1); each of the Poisson(2 * alpha_tilde * t)
    cavity sites contributes +beta*sigma_i to the exponent.
    """
    if not (0.0 <= t <= 1.0):
        raise ParameterError("interpolation parameter t must lie in [0, 1]")
    if alpha <= 0:
        raise ParameterError("alpha must be positive")
    alpha_tilde = n_sites * alpha / (n_sites + 1)
    body_model = DilutionModel(DilutionKind.POISSON, alpha_tilde)
    body = sample_graph(body_model, n_sites, rng)
    n_cavity = poisson_draw(2.0 * alpha_tilde * t, rng)
    cavity_sites = [rng.randbelow(n_sites) for _ in range(n_cavity)]
    return body, cavity_sites


def check_distribution_identity(
    model: DilutionModel,
    n_sites: int,
    g,
    n_samples: int,
    rng: RandomStream,
) -> dict:
    """Monte Carlo check of E[k g(k)] = c E[g(k'+1)].

    The shift constant c is M*alpha/N (Bernoulli) or alpha*N (Poisson).  The
    Poisson law is closed under the size-bias shift, so k' has the original
    distribution and both sides share one sample.  For the binomial count the
    exact identity puts k' on the M-1 remaining couples (one couple is pinned
    by the k-factor), so the right side is sampled from Binomial(M-1, alpha/N);
    using M would miss by O(M (alpha/N)^2), far outside Monte Carlo error.
    """
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    ks = sample_edge_counts(model, n_sites, n_samples, rng)
    if model.kind is DilutionKind.BERNOULLI:
        m_pairs = n_sites * (n_sites - 1) // 2
        factor = m_pairs * model.alpha / n_sites
        p = model.alpha / n_sites
        if m_pairs > 1:
            us = rng.uniforms(n_samples * (m_pairs - 1)).reshape(n_samples, m_pairs - 1)
            ks_shift = (us < p).sum(axis=1).astype(np.int64)
        else:
            ks_shift = np.zeros(n_samples, dtype=np.int64)
    else:
        factor = model.alpha * n_sites
        ks_shift = ks
    lhs_vals = np.array([k * g(int(k)) for k in ks], dtype=np.float64)
    rhs_vals = factor * np.array([g(int(k) + 1) for k in ks_shift], dtype=np.float64)

    def _mean_se(v):
        mean = float(v.mean())
        se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else float("nan")
        return mean, se

    lhs, lhs_se = _mean_se(lhs_vals)
    rhs, rhs_se = _mean_se(rhs_vals)
    return {
        "lhs": lhs,
        "lhs_stderr": lhs_se,
        "rhs": rhs,
        "rhs_stderr": rhs_se,
        "shift_factor": factor,
        "n_samples": n_samples,
    }


# -- serialization ----------------------------------------------------------------


def graph_to_json(graph: QuenchedGraph) -> str:
    payload = {
        "n": graph.n_sites,
        "model": graph.model.kind.value,
        "alpha": graph.model.alpha,
        "seed": graph.seed,
        "edges": [[int(i), int(j)] for i, j in graph.edges],
    }
    return json.dumps(payload)


def graph_from_json(text: str) -> QuenchedGraph:
    payload = json.loads(text)
    model = DilutionModel(DilutionKind(payload["model"]), payload["alpha"])
    edges = np.asarray(payload["edges"], dtype=np.int32).reshape(-1, 2)
    return QuenchedGraph(payload["n"], edges, model, payload["seed"])


# -- adjacency --------------------------------------------------------------------


def adjacency_csr(graph: QuenchedGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSR neighbor lists with multiplicities, self-pairs excluded.

    Self-pairs add a configuration-independent constant to H and therefore a
    zero local field, so they never enter the dynamics.
    """
    n = graph.n_sites
    edges = graph.edges
    if edges.size:
        nonself = edges[:, 0] != edges[:, 1]
        a = np.concatenate([edges[nonself, 0], edges[nonself, 1]]).astype(np.int64)
        b = np.concatenate([edges[nonself, 1], edges[nonself, 0]]).astype(np.int64)
    else:
        a = np.empty(0, dtype=np.int64)
        b = np.empty(0, dtype=np.int64)
    key = a * n + b
    uniq, counts = np.unique(key, return_counts=True)
    src = (uniq // n).astype(np.int32)
    nbr = (uniq % n).astype(np.int32)
    offsets = np.zeros(n + 1, dtype=np.int32)
    np.add.at(offsets, src + 1, 1)
    offsets = np.cumsum(offsets, dtype=np.int32)
    return offsets.astype(np.int32), nbr, counts.astype(np.int32)
