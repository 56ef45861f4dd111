"""Exact Gibbs engine by enumeration over all 2^N spin configurations.

The workhorse is the integer exponent table e(sigma) = sum_nu sigma_i sigma_j
(so that exp(-beta*H) = exp(beta*e)), produced by a Gray-code sweep in the
compiled kernel.  Two derived structures make everything else cheap:

* the energy histogram, which yields log Z and thermal moments of H at any
  beta without revisiting configurations;
* the Walsh-Hadamard transform of the Boltzmann weights, which yields the
  thermal correlation omega(sigma_A) for every site subset A at once.

Replicated expectations of overlap monomials reduce to tensor contractions of
those correlations over site indices (sigma^2 = 1 parity handled by XOR of
bit masks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .dilution import QuenchedGraph, poisson_draw, sample_cavity_graph
from .errors import CapacityError, ParameterError
from .monomials import OverlapMonomial, site_degree
from .rng import RandomStream

MAX_ENUM_SITES = 24
MAX_INTERP_SITES = 23  # one site is implicitly reserved for the added spin
MAX_MONOMIAL_DEGREE = 6
MAX_MASK_BITS = 8

__all__ = [
    "ThermalState",
    "CorrelationCache",
    "log_partition",
    "correlations",
    "omega_table",
    "omega_tables",
    "monomial_expectation",
    "monomial_expectations",
    "internal_energy_stats",
    "internal_energy_stats_grid",
    "log_partition_interpolated",
    "thermal_state",
    "energy_histogram",
]


def _check_enum(n_sites: int, cap: int = MAX_ENUM_SITES) -> None:
    if n_sites > cap:
        raise CapacityError(f"exact enumeration supports N <= {cap}, got {n_sites}")
    if n_sites < 1:
        raise ParameterError("n_sites must be >= 1")


def _check_beta(beta: float) -> None:
    if not (beta >= 0.0) or math.isinf(beta):
        raise ParameterError("beta must be a finite non-negative real")


@dataclass(frozen=True)
class ThermalState:
    """Quenched graph at inverse temperature beta, with derived constants."""

    graph: QuenchedGraph
    beta: float
    theta: float
    log_z: float


@dataclass
class CorrelationCache:
    """Thermal correlations omega(sigma_A) keyed by site-subset bitmask."""

    n_sites: int
    entries: dict[int, float]

    def __getitem__(self, mask: int) -> float:
        return self.entries[mask]


def energy_histogram(
    graph: QuenchedGraph, fields: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Density of states over the integer exponent e: (values, counts)."""
    _check_enum(graph.n_sites)
    e = kernels.config_energies(graph.n_sites, graph.ei, graph.ej, fields)
    emin = int(e.min())
    counts = np.bincount(e - emin)
    values = emin + np.arange(counts.shape[0], dtype=np.int64)
    keep = counts > 0
    return values[keep], counts[keep].astype(np.float64)


def _log_weights(values: np.ndarray, counts: np.ndarray, beta: float) -> np.ndarray:
    return beta * values + np.log(counts)


def log_partition(graph: QuenchedGraph, beta: float) -> float:
    """ln Z with max-shifted summation (beta*|edges| can exceed 700)."""
    _check_beta(beta)
    values, counts = energy_histogram(graph)
    logw = _log_weights(values, counts, beta)
    shift = logw.max()
    return float(shift + np.log(np.exp(logw - shift).sum()))


def thermal_state(graph: QuenchedGraph, beta: float) -> ThermalState:
    log_z = log_partition(graph, beta)
    n_ln2 = graph.n_sites * math.log(2.0)
    span = beta * graph.n_edges
    if not (n_ln2 - span - 1e-9 <= log_z <= n_ln2 + span + 1e-9):
        raise AssertionError("log Z outside the |H| <= |edges| envelope")
    return ThermalState(graph=graph, beta=beta, theta=math.tanh(beta), log_z=log_z)


# -- correlations ------------------------------------------------------------------


@lru_cache(maxsize=8)
def _parity_signs(n: int) -> np.ndarray:
    """(-1)**popcount(mask) for every mask below 2**n."""
    masks = np.arange(1 << n, dtype=np.uint64)
    return 1.0 - 2.0 * (np.bitwise_count(masks).astype(np.float64) % 2.0)


def _boltzmann_weights(graph: QuenchedGraph, betas, fields=None) -> np.ndarray:
    """Shifted weights exp(beta*(e - e_max)) as a (2^N, n_beta) array."""
    e = kernels.config_energies(graph.n_sites, graph.ei, graph.ej, fields)
    betas = np.atleast_1d(np.asarray(betas, dtype=np.float64))
    return np.exp(np.multiply.outer(e - e.max(), betas))


def omega_tables(graph: QuenchedGraph, betas, fields=None) -> np.ndarray:
    """omega(sigma_A) for every mask A and every beta: shape (2^N, n_beta)."""
    _check_enum(graph.n_sites)
    for b in np.atleast_1d(betas):
        _check_beta(float(b))
    w = np.ascontiguousarray(_boltzmann_weights(graph, betas, fields))
    kernels.wht_inplace(w)
    table = w / w[0]
    table *= _parity_signs(graph.n_sites)[:, None]
    np.clip(table, -1.0, 1.0, out=table)
    return table


def omega_table(graph: QuenchedGraph, beta: float, fields=None) -> np.ndarray:
    return omega_tables(graph, [beta], fields)[:, 0]


def correlations(graph: QuenchedGraph, beta: float, masks) -> CorrelationCache:
    """omega(sigma_A) for the requested masks, by direct accumulation."""
    _check_enum(graph.n_sites)
    _check_beta(beta)
    masks = [int(v) for v in masks]
    for mask in masks:
        if mask >> graph.n_sites:
            raise ParameterError("mask addresses sites beyond n_sites")
        if bin(mask).count("1") > MAX_MASK_BITS:
            raise ParameterError(f"masks are limited to {MAX_MASK_BITS} set bits")
    w = _boltzmann_weights(graph, beta)[:, 0]
    z = w.sum()
    cfg = np.arange(1 << graph.n_sites, dtype=np.int64)
    entries: dict[int, float] = {}
    for mask in masks:
        if mask == 0:
            entries[0] = 1.0
            continue
        sign = np.ones_like(w)
        for bit in range(graph.n_sites):
            if (mask >> bit) & 1:
                sign *= 2.0 * ((cfg >> bit) & 1) - 1.0
        entries[mask] = float(np.clip((w * sign).sum() / z, -1.0, 1.0))
    return CorrelationCache(n_sites=graph.n_sites, entries=entries)


# -- replicated monomial expectations ----------------------------------------------


@lru_cache(maxsize=256)
def _xor_mask_tensor(n: int, k: int) -> np.ndarray:
    """XOR of k single-site masks, shape (n,)*k; repeated sites cancel."""
    bits = np.int64(1) << np.arange(n, dtype=np.int64)
    t = bits
    for _ in range(k - 1):
        t = np.bitwise_xor.outer(t, bits)
    return t


def _contract(omega: np.ndarray, n: int, mono: OverlapMonomial) -> float:
    slots: list[tuple[int, ...]] = []
    for f in mono.factors:
        slots.extend([f.replicas] * f.exponent)
    d = len(slots)
    if d == 0:
        return 1.0
    letters = "abcdefgh"
    replicas = sorted({r for reps in slots for r in reps})
    operands = []
    subscripts = []
    for r in replicas:
        axes = [k for k, reps in enumerate(slots) if r in reps]
        operands.append(omega[_xor_mask_tensor(n, len(axes))])
        subscripts.append("".join(letters[k] for k in axes))
    value = np.einsum(",".join(subscripts) + "->", *operands, optimize=True)
    return float(value) / n**d


def monomial_expectation(
    graph: QuenchedGraph, beta: float, mono: OverlapMonomial, omega: np.ndarray | None = None
) -> float:
    """Replicated expectation Omega(mono) for independent replicas on one graph."""
    _check_enum(graph.n_sites)
    if not mono.canonical:
        raise ParameterError("monomial must be canonical")
    if site_degree(mono) > MAX_MONOMIAL_DEGREE:
        raise CapacityError(f"monomial site degree capped at {MAX_MONOMIAL_DEGREE}")
    if omega is None:
        omega = omega_table(graph, beta)
    return _contract(omega, graph.n_sites, mono)


def monomial_expectations(
    graph: QuenchedGraph, beta: float, monos, omega: np.ndarray | None = None
) -> dict[OverlapMonomial, float]:
    """Evaluate several monomials off one correlation sweep."""
    if omega is None:
        omega = omega_table(graph, beta)
    return {mono: monomial_expectation(graph, beta, mono, omega) for mono in monos}


def monomial_expectations_grid(
    graph: QuenchedGraph, betas, monos
) -> dict[OverlapMonomial, np.ndarray]:
    """Monomial expectations over a whole beta grid in one contraction each.

    The grid axis rides along the einsum, so the per-beta Python overhead is
    paid once per monomial instead of once per (monomial, beta).
    """
    _check_enum(graph.n_sites)
    n = graph.n_sites
    tables = omega_tables(graph, betas)  # (2^N, n_beta)
    n_beta = tables.shape[1]
    letters = "abcdefgh"
    out: dict[OverlapMonomial, np.ndarray] = {}
    for mono in monos:
        if not mono.canonical:
            raise ParameterError("monomial must be canonical")
        if site_degree(mono) > MAX_MONOMIAL_DEGREE:
            raise CapacityError(f"monomial site degree capped at {MAX_MONOMIAL_DEGREE}")
        slots: list[tuple[int, ...]] = []
        for f in mono.factors:
            slots.extend([f.replicas] * f.exponent)
        if not slots:
            out[mono] = np.ones(n_beta)
            continue
        operands = []
        subscripts = []
        for r in sorted({x for reps in slots for x in reps}):
            axes = [k for k, reps in enumerate(slots) if r in reps]
            operands.append(tables[_xor_mask_tensor(n, len(axes))])
            subscripts.append("".join(letters[k] for k in axes) + "z")
        value = np.einsum(",".join(subscripts) + "->z", *operands, optimize=True)
        out[mono] = value / n ** len(slots)
    return out


# -- internal energy ---------------------------------------------------------------


def _moments_from_histogram(values, counts, beta):
    logw = _log_weights(values, counts, beta)
    shift = logw.max()
    p = np.exp(logw - shift)
    p /= p.sum()
    mean_e = float(p @ values)
    var_e = float(p @ (values.astype(np.float64) - mean_e) ** 2)
    return mean_e, var_e


def internal_energy_stats(graph: QuenchedGraph, beta: float) -> dict[str, float]:
    """omega(h) and its thermal variance, h = H/N (H = -e)."""
    _check_beta(beta)
    values, counts = energy_histogram(graph)
    mean_e, var_e = _moments_from_histogram(values, counts, beta)
    n = graph.n_sites
    return {"mean_h": -mean_e / n, "thermal_variance_h": var_e / n**2}


def internal_energy_stats_grid(graph: QuenchedGraph, betas) -> dict[str, np.ndarray]:
    """Same as :func:`internal_energy_stats` on a whole beta grid in one sweep."""
    values, counts = energy_histogram(graph)
    betas = np.asarray(betas, dtype=np.float64)
    mean_h = np.empty_like(betas)
    var_h = np.empty_like(betas)
    n = graph.n_sites
    for i, b in enumerate(betas):
        _check_beta(float(b))
        mean_e, var_e = _moments_from_histogram(values, counts, float(b))
        mean_h[i] = -mean_e / n
        var_h[i] = var_e / n**2
    return {"mean_h": mean_h, "thermal_variance_h": var_h}


# -- interpolated cavity system ----------------------------------------------------


def log_partition_interpolated(
    n_sites: int, alpha: float, beta: float, t: float, rng: RandomStream
) -> float:
    """ln Z of the t-interpolated cavity system at shifted connectivity.

    Draws a Poisson body graph, Poisson(2*alpha_tilde*t) cavity field sites,
    and the Poisson(t*alpha/(N+1)) count of pairs both landing on the added
    spin; the latter contribute the constant beta each to ln Z, which makes
    the t = 1 system match the (N+1)-site partition function exactly in
    distribution (up to the free ln 2 of the decoupled gauge spin).
    """
    _check_enum(n_sites, MAX_INTERP_SITES)
    _check_beta(beta)
    body, cavity_sites = sample_cavity_graph(alpha, n_sites, t, rng)
    n_const = poisson_draw(t * alpha / (n_sites + 1), rng)
    fields = np.bincount(np.asarray(cavity_sites, dtype=np.int64), minlength=n_sites)
    values, counts = energy_histogram(body, fields.astype(np.int64))
    logw = _log_weights(values, counts, beta)
    shift = logw.max()
    return float(shift + np.log(np.exp(logw - shift).sum()) + beta * n_const)
