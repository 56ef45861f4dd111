"""Multi-replica Markov-chain Monte Carlo for sizes beyond enumeration.

Dynamics: heat-bath (Glauber) single-site updates at uniformly random sites,
which satisfies detailed balance exactly.  s independent chains share one
quenched graph; overlap monomials are evaluated on instantaneous tuples of
configurations and time-averaged, with batch-means standard errors.  The
disorder average is taken across graphs with per-sample derived streams, and
its spread dominates the reported error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dilution import DilutionModel, QuenchedGraph, adjacency_csr, sample_graph
from .errors import ParameterError
from .monomials import OverlapMonomial, max_replica
from .parallel import pmap
from .rng import RandomStream

__all__ = [
    "McParams",
    "ReplicaChains",
    "make_chains",
    "glauber_sweep",
    "run_chain",
    "monomial_series",
    "estimate_monomials",
    "quenched_estimate",
]


@dataclass(frozen=True)
class McParams:
    n_replicas: int = 2
    burn_in_sweeps: int = 1000
    measure_sweeps: int = 10000
    thin: int = 10

    def __post_init__(self):
        for name in ("n_replicas", "burn_in_sweeps", "measure_sweeps", "thin"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be a positive integer")

    @property
    def n_measurements(self) -> int:
        return self.measure_sweeps // self.thin


@dataclass
class ReplicaChains:
    graph: QuenchedGraph
    beta: float
    configs: np.ndarray  # (s, N) int8 in {-1, +1}
    adjacency: list = field(default_factory=list)  # per-site [(nbr, mult), ...], self-pairs included

    def __post_init__(self):
        self.configs = np.asarray(self.configs, dtype=np.int8)
        if self.configs.ndim != 2 or self.configs.shape[1] != self.graph.n_sites:
            raise ParameterError("configs must have shape (n_replicas, n_sites)")


def _full_adjacency(graph: QuenchedGraph) -> list:
    adj: list[dict[int, int]] = [dict() for _ in range(graph.n_sites)]
    for i, j in graph.edges:
        i, j = int(i), int(j)
        adj[i][j] = adj[i].get(j, 0) + 1
        if i != j:
            adj[j][i] = adj[j].get(i, 0) + 1
    return [sorted(d.items()) for d in adj]


def make_chains(graph: QuenchedGraph, beta: float, n_replicas: int, rng: RandomStream) -> ReplicaChains:
    """Fresh chains with i.i.d. symmetric random spins."""
    us = rng.uniforms(n_replicas * graph.n_sites)
    configs = np.where(us < 0.5, 1, -1).astype(np.int8).reshape(n_replicas, graph.n_sites)
    return ReplicaChains(graph=graph, beta=beta, configs=configs, adjacency=_full_adjacency(graph))


def _heat_bath_table(graph: QuenchedGraph, beta: float) -> tuple[np.ndarray, int, tuple]:
    """P(sigma_i = +1 | field f) for every reachable integer field."""
    offsets, nbrs, wts = adjacency_csr(graph)
    per_site = np.diff(offsets)
    fmax = 0
    if nbrs.size:
        sums = np.zeros(graph.n_sites, dtype=np.int64)
        np.add.at(sums, np.repeat(np.arange(graph.n_sites), per_site), wts)
        fmax = int(sums.max())
    fmax = max(fmax, 1)
    f = np.arange(-fmax, fmax + 1, dtype=np.float64)
    table = 1.0 / (1.0 + np.exp(-2.0 * beta * f))
    return table, fmax, (offsets, nbrs, wts)


def glauber_sweep(chains: ReplicaChains, rng: RandomStream, n_sweeps: int = 1) -> ReplicaChains:
    """Advance every replica by ``n_sweeps`` sweeps (N site updates each)."""
    table, fmax, (offsets, nbrs, wts) = _heat_bath_table(chains.graph, chains.beta)
    state = rng.state_array()
    empty = np.empty((0, chains.configs.shape[0], chains.graph.n_sites), dtype=np.int8)
    kernels.glauber_run(
        chains.configs, offsets, nbrs, wts, table, fmax, n_sweeps, 0, 1, state, empty
    )
    rng.set_state_array(state)
    return chains


def run_chain(
    graph: QuenchedGraph, beta: float, params: McParams, rng: RandomStream
) -> np.ndarray:
    """Burn in, then record (n_measurements, s, N) snapshots every ``thin`` sweeps."""
    chains = make_chains(graph, beta, params.n_replicas, rng)
    table, fmax, (offsets, nbrs, wts) = _heat_bath_table(graph, beta)
    out = np.empty((params.n_measurements, params.n_replicas, graph.n_sites), dtype=np.int8)
    state = rng.state_array()
    kernels.glauber_run(
        chains.configs,
        offsets,
        nbrs,
        wts,
        table,
        fmax,
        params.burn_in_sweeps,
        params.n_measurements,
        params.thin,
        state,
        out,
    )
    rng.set_state_array(state)
    return out


def monomial_series(snapshots: np.ndarray, mono: OverlapMonomial) -> np.ndarray:
    """Instantaneous monomial values along the measurement series."""
    n_meas = snapshots.shape[0]
    out = np.ones(n_meas, dtype=np.float64)
    for f in mono.factors:
        rows = [r - 1 for r in f.replicas]
        prod = snapshots[:, rows, :].prod(axis=1)  # products of +-1 stay +-1
        out *= prod.mean(axis=1) ** f.exponent
    return out


def _batch_stderr(series: np.ndarray) -> float:
    n_meas = series.shape[0]
    if n_meas < 4:
        return float("nan")
    n_batches = min(32, n_meas // 2)
    usable = (n_meas // n_batches) * n_batches
    means = series[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def estimate_monomials(
    graph: QuenchedGraph,
    beta: float,
    monos: list[OverlapMonomial],
    params: McParams,
    rng: RandomStream,
) -> list[dict]:
    """Time averages of each monomial with batch-means standard errors."""
    needed = max((max_replica(mo) for mo in monos), default=0)
    if params.n_replicas < needed:
        raise ParameterError(
            f"{needed} replicas required by the requested monomials, got {params.n_replicas}"
        )
    snapshots = run_chain(graph, beta, params, rng)
    results = []
    for mono in monos:
        series = monomial_series(snapshots, mono)
        results.append({"estimate": float(series.mean()), "stderr": _batch_stderr(series)})
    return results


def _quenched_sample(args) -> list[float]:
    model, n_sites, beta, monos, params, master_seed, index = args
    graph = sample_graph(model, n_sites, RandomStream(master_seed, 2 * index), seed=master_seed)
    ests = estimate_monomials(graph, beta, monos, params, RandomStream(master_seed, 2 * index + 1))
    return [e["estimate"] for e in ests]


def quenched_estimate(
    model: DilutionModel,
    n_sites: int,
    beta: float,
    monos: list[OverlapMonomial],
    params: McParams,
    n_disorder: int,
    master_seed: int,
    n_jobs: int = 1,
) -> list[dict]:
    """Disorder average of the monomial estimates over independent graphs.

    Per-sample streams are (master_seed, 2i) for the graph and
    (master_seed, 2i+1) for the chains; the reported stderr is the spread
    across disorder samples, which dominates the error budget.
    """
    if n_disorder < 1:
        raise ParameterError("n_disorder must be >= 1")
    rows = pmap(
        _quenched_sample,
        [(model, n_sites, beta, monos, params, master_seed, i) for i in range(n_disorder)],
        n_jobs=n_jobs,
    )
    table = np.asarray(rows, dtype=np.float64)
    out = []
    for k in range(len(monos)):
        col = table[:, k]
        stderr = (
            float(col.std(ddof=1) / math.sqrt(n_disorder)) if n_disorder > 1 else float("nan")
        )
        out.append({"mean": float(col.mean()), "stderr": stderr, "n_disorder": n_disorder})
    return out
