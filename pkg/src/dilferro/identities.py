"""Numerical evaluation of the finite-size overlap identities and bounds.

The six residuals are the quenched averages of the normalized identity
expressions produced by the symbolic generators:

    I1 = <m1^4> - <m1^2 m2^2>
    I2 = <m1^2 q12^2> - <m1^2 q23^2>
    I3 = <m1^2 q123^2> - <m1^2 q234^2>
    I4 = <m1^2 q12^2> - <m3^2 q12^2>      (canonically identical to I2)
    I5 = <q12^4> - 4 <q12^2 q23^2> + 3 <q12^2 q34^2>
    I6 = <q12^2 q123^2> - 3 <q12^2 q134^2> + 2 <q12^2 q345^2>

with <.> the disorder average of the replicated Gibbs expectation.  All of
them vanish in the infinite-size limit; at finite size the module reports
their values with across-disorder standard errors, plus the generator profile
f_G and its beta-integral, the internal-energy variance bound, the cavity
gauge identity, and the matched-density free-energy comparison between the
two dilutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import gibbs_exact, gibbs_mc, symbolic
from .dilution import DilutionKind, DilutionModel, sample_graph
from .errors import ParameterError
from .monomials import OverlapMonomial, parse_monomial, render
from .parallel import pmap
from .rng import RandomStream, derive_seed

__all__ = [
    "Estimate",
    "IdentityReport",
    "IDENTITY_NAMES",
    "identity_definitions",
    "identity_monomials",
    "residuals",
    "f_G_profile",
    "variance_bound_check",
    "cavity_gauge_check",
    "free_energy_compare",
]

IDENTITY_NAMES = ("I1", "I2", "I3", "I4", "I5", "I6")


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "stderr": None if math.isnan(self.stderr) else self.stderr,
        }


@dataclass
class IdentityReport:
    model: DilutionModel
    n_sites: int
    beta: float
    engine: str
    n_disorder: int
    seed: int
    residuals: dict[str, Estimate] = field(default_factory=dict)
    monomials: dict[str, Estimate] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "model": self.model.kind.value,
            "alpha": self.model.alpha,
            "n_sites": self.n_sites,
            "beta": self.beta,
            "engine": self.engine,
            "n_disorder": self.n_disorder,
            "seed": self.seed,
            "residuals": {k: v.to_json() for k, v in self.residuals.items()},
            "monomials": {k: v.to_json() for k, v in self.monomials.items()},
        }


@lru_cache(maxsize=1)
def identity_definitions() -> dict[str, tuple[tuple[OverlapMonomial, Fraction], ...]]:
    """The six normalized identity expressions, derived once symbolically."""
    m2 = parse_monomial("m1^2")
    q2 = parse_monomial("q12^2")
    ids_m = symbolic.extract_identities(symbolic.self_averaging_fG(m2, 1, 2))
    ids_q = symbolic.extract_identities(symbolic.self_averaging_fG(q2, 2, 2))
    assert [ie.order for ie in ids_m] == [0, 1, 2]
    assert [ie.order for ie in ids_q] == [0, 1, 2]
    return {
        "I1": ids_m[0].terms,
        "I2": ids_m[1].terms,
        "I3": ids_m[2].terms,
        "I4": ids_q[0].terms,
        "I5": ids_q[1].terms,
        "I6": ids_q[2].terms,
    }


@lru_cache(maxsize=1)
def identity_monomials() -> tuple[OverlapMonomial, ...]:
    """Distinct monomials needed by I1..I6 plus the bases m1^2 and q12^2."""
    monos: dict[OverlapMonomial, None] = {}
    for name in ("m1^2", "q12^2"):
        monos[parse_monomial(name)] = None
    for terms in identity_definitions().values():
        for mono, _ in terms:
            monos[mono] = None
    return tuple(monos)


def _mean_se(column: np.ndarray) -> Estimate:
    n = column.shape[0]
    se = float(column.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return Estimate(float(column.mean()), se)


# -- per-sample workers (top level for pickling) ---------------------------------


def _exact_sample(args) -> list[float]:
    model, n_sites, beta, monos, master_seed, index = args
    graph = sample_graph(model, n_sites, RandomStream(master_seed, 2 * index), seed=master_seed)
    omega = gibbs_exact.omega_table(graph, beta)
    return [gibbs_exact.monomial_expectation(graph, beta, mo, omega) for mo in monos]


def _mc_sample(args) -> list[float]:
    model, n_sites, beta, monos, params, master_seed, index = args
    graph = sample_graph(model, n_sites, RandomStream(master_seed, 2 * index), seed=master_seed)
    ests = gibbs_mc.estimate_monomials(
        graph, beta, list(monos), params, RandomStream(master_seed, 2 * index + 1)
    )
    return [e["estimate"] for e in ests]


def _exact_grid_sample(args) -> np.ndarray:
    model, n_sites, betas, monos, master_seed, index = args
    graph = sample_graph(model, n_sites, RandomStream(master_seed, 2 * index), seed=master_seed)
    grids = gibbs_exact.monomial_expectations_grid(graph, betas, monos)
    out = np.empty((len(betas), len(monos)))
    for mi, mo in enumerate(monos):
        out[:, mi] = grids[mo]
    return out


def _varh_grid_sample(args) -> np.ndarray:
    model, n_sites, betas, master_seed, index = args
    graph = sample_graph(model, n_sites, RandomStream(master_seed, 2 * index), seed=master_seed)
    return gibbs_exact.internal_energy_stats_grid(graph, betas)["thermal_variance_h"]


def _gauge_sample(args) -> tuple[float, float]:
    alpha, n_sites, beta, master_seed, index = args
    lhs = gibbs_exact.log_partition_interpolated(
        n_sites, alpha, beta, 1.0, RandomStream(master_seed, 2 * index)
    )
    model = DilutionModel(DilutionKind.POISSON, alpha)
    graph = sample_graph(model, n_sites + 1, RandomStream(master_seed, 2 * index + 1), seed=master_seed)
    rhs = gibbs_exact.log_partition(graph, beta)
    return lhs, rhs


def _count_pmfs(n_sites: int, edge_density: float) -> tuple[np.ndarray, np.ndarray]:
    """Edge-count pmfs of both dilutions at matched mean c*N, common support."""
    m_pairs = n_sites * (n_sites - 1) // 2
    alpha_b = edge_density * n_sites**2 / m_pairs
    p = alpha_b / n_sites
    lam = edge_density * n_sites
    kmax = int(lam + 14.0 * math.sqrt(max(lam, 1.0)) + 40.0)
    while True:
        ks = np.arange(kmax + 1)
        pmf_b = np.array(
            [
                math.comb(m_pairs, k) * p**k * (1.0 - p) ** (m_pairs - k) if k <= m_pairs else 0.0
                for k in ks
            ]
        )
        pmf_p = np.empty(kmax + 1)
        pmf_p[0] = math.exp(-lam)
        for k in range(1, kmax + 1):
            pmf_p[k] = pmf_p[k - 1] * lam / k
        if (1.0 - pmf_b.sum() < 1e-12 and 1.0 - pmf_p.sum() < 1e-12) or kmax > 10 * (lam + 10):
            return pmf_b, pmf_p
        kmax *= 2


def _fe_coupled_sample(args) -> tuple[float, float]:
    """One shared uniform-pair stream; ln Z(k) mixed over both count pmfs.

    Averaging ln Z of the k-edge prefix against the exact Binomial and
    Poisson pmfs gives unbiased estimates of both quenched free energies from
    identical pair randomness, so the difference estimator is nearly
    noise-free (Rao-Blackwellization over the edge count).
    """
    n_sites, pmf_b, pmf_p, beta, master_seed, index = args
    rng = RandomStream(master_seed, index)
    size = 1 << n_sites
    cfg = np.arange(size)
    sig = (2 * ((cfg[:, None] >> np.arange(n_sites)) & 1) - 1).astype(np.int8)
    e_plus, e_minus = math.exp(beta), math.exp(-beta)
    kmax = len(pmf_b) - 1
    ln_z = np.empty(kmax + 1)
    ln_z[0] = n_sites * math.log(2.0)
    w = np.ones(size)
    scale = 0.0
    for k in range(1, kmax + 1):
        i = rng.randbelow(n_sites)
        j = rng.randbelow(n_sites)
        w = w * np.where(sig[:, i] == sig[:, j], e_plus, e_minus)
        total = float(w.sum())
        if total > 1e250 or total < 1e-250:
            w /= total
            scale += math.log(total)
            total = 1.0
        ln_z[k] = math.log(total) + scale
    return float(pmf_b @ ln_z) / n_sites, float(pmf_p @ ln_z) / n_sites


# -- operations -------------------------------------------------------------------


def residuals(
    model: DilutionModel,
    n_sites: int,
    beta: float,
    engine: str = "exact",
    n_disorder: int = 100,
    seed: int = 0,
    mc_params: gibbs_mc.McParams | None = None,
    n_jobs: int = 1,
) -> IdentityReport:
    """Quenched estimates of I1..I6 and their constituent monomials."""
    if engine not in ("exact", "mc"):
        raise ParameterError("engine must be 'exact' or 'mc'")
    if n_disorder < 1:
        raise ParameterError("n_disorder must be >= 1")
    monos = identity_monomials()
    if engine == "exact":
        rows = pmap(
            _exact_sample,
            [(model, n_sites, beta, monos, seed, i) for i in range(n_disorder)],
            n_jobs=n_jobs,
        )
    else:
        params = mc_params or gibbs_mc.McParams(n_replicas=5)
        rows = pmap(
            _mc_sample,
            [(model, n_sites, beta, monos, params, seed, i) for i in range(n_disorder)],
            n_jobs=n_jobs,
        )
    table = np.asarray(rows, dtype=np.float64)
    col = {mo: table[:, k] for k, mo in enumerate(monos)}
    report = IdentityReport(
        model=model,
        n_sites=n_sites,
        beta=beta,
        engine=engine,
        n_disorder=n_disorder,
        seed=seed,
    )
    for mo in monos:
        report.monomials[render(mo)] = _mean_se(col[mo])
    for name, terms in identity_definitions().items():
        series = np.zeros(n_disorder)
        for mo, coeff in terms:
            series = series + float(coeff) * col[mo]
        report.residuals[name] = _mean_se(series)
    return report


@dataclass
class FGProfile:
    model: DilutionModel
    n_sites: int
    g: str
    beta_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    integral: float
    integral_stderr: float
    n_disorder: int
    seed: int

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "model": self.model.kind.value,
            "alpha": self.model.alpha,
            "n_sites": self.n_sites,
            "g": self.g,
            "beta_grid": [float(b) for b in self.beta_grid],
            "values": [float(v) for v in self.values],
            "stderr": [float(v) for v in self.stderr],
            "integral": self.integral,
            "integral_stderr": self.integral_stderr,
            "n_disorder": self.n_disorder,
            "seed": self.seed,
        }


def _fg_combination(g: str, model: DilutionModel) -> symbolic.MonomialCombination:
    if g in ("m2", "m^2", "m1^2"):
        return symbolic.self_averaging_fG(parse_monomial("m1^2"), 1, 2, dilution=model.kind.value)
    if g in ("q12^2", "q2", "q^2"):
        return symbolic.self_averaging_fG(parse_monomial("q12^2"), 2, 2, dilution=model.kind.value)
    raise ParameterError("G must be one of m2, q12^2")


def f_G_profile(
    model: DilutionModel,
    n_sites: int,
    g: str,
    beta_grid,
    engine: str = "exact",
    n_disorder: int = 100,
    seed: int = 0,
    mc_params: gibbs_mc.McParams | None = None,
    n_jobs: int = 1,
) -> FGProfile:
    """Truncated generator f_G on a beta grid plus its |.|-integral.

    The prefactor is M*alpha/N^2 for Bernoulli dilution and alpha for Poisson.
    The grid must be strictly increasing and stay below the theta -> 1
    breakdown (beta well away from the zero-temperature end).
    """
    betas = np.asarray(beta_grid, dtype=np.float64)
    if betas.ndim != 1 or betas.shape[0] < 2 or np.any(np.diff(betas) <= 0):
        raise ParameterError("beta_grid must be strictly increasing with >= 2 points")
    comb = _fg_combination(g, model)
    monos = tuple(comb.monomials())
    if engine == "exact":
        rows = pmap(
            _exact_grid_sample,
            [(model, n_sites, tuple(betas), monos, seed, i) for i in range(n_disorder)],
            n_jobs=n_jobs,
        )
        cube = np.stack(rows)  # (n_disorder, n_beta, n_mono)
    elif engine == "mc":
        params = mc_params or gibbs_mc.McParams(n_replicas=5)
        cube = np.empty((n_disorder, betas.shape[0], len(monos)))
        for bi, beta in enumerate(betas):
            rows = pmap(
                _mc_sample,
                [
                    (model, n_sites, float(beta), monos, params, derive_seed(seed, bi), i)
                    for i in range(n_disorder)
                ],
                n_jobs=n_jobs,
            )
            cube[:, bi, :] = np.asarray(rows)
    else:
        raise ParameterError("engine must be 'exact' or 'mc'")
    per_sample = np.empty((n_disorder, betas.shape[0]))
    for i in range(n_disorder):
        for bi, beta in enumerate(betas):
            values = {mo: cube[i, bi, k] for k, mo in enumerate(monos)}
            per_sample[i, bi] = symbolic.evaluate_combination(
                comb, values, model.alpha, n_sites, float(beta)
            )
    mean = per_sample.mean(axis=0)
    stderr = (
        per_sample.std(axis=0, ddof=1) / math.sqrt(n_disorder)
        if n_disorder > 1
        else np.full_like(mean, np.nan)
    )
    integral = float(np.trapezoid(np.abs(mean), betas))
    integral_stderr = float(np.trapezoid(stderr, betas)) if n_disorder > 1 else float("nan")
    return FGProfile(
        model=model,
        n_sites=n_sites,
        g=g,
        beta_grid=betas,
        values=mean,
        stderr=stderr,
        integral=integral,
        integral_stderr=integral_stderr,
        n_disorder=n_disorder,
        seed=seed,
    )


def _bound_prefactor(model: DilutionModel, n_sites: int) -> float:
    if model.kind is DilutionKind.BERNOULLI:
        m_pairs = n_sites * (n_sites - 1) // 2
        return m_pairs * model.alpha / n_sites**2
    return model.alpha


def variance_bound_check(
    model: DilutionModel,
    n_sites: int,
    beta_range: tuple[float, float],
    n_grid: int = 64,
    n_disorder: int = 500,
    seed: int = 0,
    n_jobs: int = 1,
) -> dict:
    """Trapezoid integral of E[omega(h^2) - omega(h)^2] against its 3*alpha'/N cap."""
    beta1, beta2 = beta_range
    if not (0 <= beta1 < beta2):
        raise ParameterError("beta_range must satisfy 0 <= beta1 < beta2")
    betas = np.linspace(beta1, beta2, n_grid)
    rows = pmap(
        _varh_grid_sample,
        [(model, n_sites, tuple(betas), seed, i) for i in range(n_disorder)],
        n_jobs=n_jobs,
    )
    table = np.stack(rows)  # (n_disorder, n_grid)
    integrals = np.trapezoid(table, betas, axis=1)
    integral = float(integrals.mean())
    stderr = (
        float(integrals.std(ddof=1) / math.sqrt(n_disorder)) if n_disorder > 1 else float("nan")
    )
    bound = 3.0 * _bound_prefactor(model, n_sites) / n_sites
    return {
        "integral": integral,
        "stderr": stderr,
        "bound": bound,
        "ratio": integral / bound,
        "n_disorder": n_disorder,
    }


def cavity_gauge_check(
    alpha: float,
    n_sites: int,
    beta: float,
    n_disorder: int = 10000,
    seed: int = 0,
    n_jobs: int = 1,
) -> dict:
    """Means of ln Z_{N,t=1}(alpha_tilde) + ln 2 versus ln Z_{N+1}(alpha).

    Equality holds in distribution (the added spin decouples by the gauge
    symmetry and contributes a free ln 2), so the means must agree within
    sampling error.
    """
    rows = pmap(
        _gauge_sample,
        [(alpha, n_sites, beta, seed, i) for i in range(n_disorder)],
        n_jobs=n_jobs,
    )
    table = np.asarray(rows)
    lhs, rhs = table[:, 0], table[:, 1]
    se = math.sqrt(lhs.var(ddof=1) / n_disorder + rhs.var(ddof=1) / n_disorder)
    return {
        "mean_lhs": float(lhs.mean()),
        "mean_rhs": float(rhs.mean()),
        "diff": float(lhs.mean() + math.log(2.0) - rhs.mean()),
        "stderr": se,
        "n_disorder": n_disorder,
    }


def free_energy_compare(
    edge_density: float,
    n_sites_list,
    beta: float,
    n_disorder: int = 2000,
    seed: int = 0,
    n_jobs: int = 1,
) -> list[dict]:
    """Bernoulli vs Poisson free-energy density at matched mean edge count.

    The connectivities alpha_B = c*N^2/M and alpha_P = c both give c*N
    expected edges, so A_N = E[ln Z]/N is compared like for like.  Each
    disorder sample feeds one shared uniform-pair stream to both dilutions
    and mixes ln Z(k) over the two exact edge-count pmfs, which keeps both
    estimates unbiased while cancelling most pair-level noise from the
    reported difference.
    """
    if edge_density < 0:
        raise ParameterError("edge_density must be >= 0")
    if n_disorder < 2:
        raise ParameterError("n_disorder must be >= 2")
    out = []
    for n_sites in n_sites_list:
        if n_sites < 2:
            raise ParameterError("free-energy comparison needs N >= 2")
        if n_sites > gibbs_exact.MAX_ENUM_SITES:
            raise ParameterError(f"exact engine supports N <= {gibbs_exact.MAX_ENUM_SITES}")
        m_pairs = n_sites * (n_sites - 1) // 2
        alpha_b = edge_density * n_sites**2 / m_pairs
        DilutionModel(DilutionKind.BERNOULLI, alpha_b).validate_for(n_sites)
        pmf_b, pmf_p = _count_pmfs(n_sites, edge_density)
        sub = derive_seed(seed, n_sites)
        rows = pmap(
            _fe_coupled_sample,
            [(n_sites, pmf_b, pmf_p, beta, sub, i) for i in range(n_disorder)],
            n_jobs=n_jobs,
        )
        table = np.asarray(rows)
        diffs = table[:, 0] - table[:, 1]
        out.append(
            {
                "n_sites": n_sites,
                "alpha_bernoulli": alpha_b,
                "alpha_poisson": edge_density,
                "A_bernoulli": _mean_se(table[:, 0]),
                "A_poisson": _mean_se(table[:, 1]),
                "diff": float(diffs.mean()),
                "stderr": float(diffs.std(ddof=1) / math.sqrt(n_disorder)),
                "n_disorder": n_disorder,
            }
        )
    return out
