"""Desk-scale invariant suite behind ``dilferro selftest``.

Each check is a pure function returning (ok, detail).  The suite covers the
RNG contract, the sampling moments, the exact engine against closed forms and
a direct multi-replica brute force, Monte Carlo against the exact engine,
detailed balance, the symbolic goldens, and the cavity gauge identity.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import gibbs_exact as ge
from . import gibbs_mc as mc
from . import identities as idm
from . import kernels, symbolic
from .dilution import (
    DilutionKind,
    DilutionModel,
    QuenchedGraph,
    check_distribution_identity,
    sample_graph,
)
from .monomials import OverlapMonomial, parse_monomial
from .rng import RandomStream, splitmix64


def oracle_monomial(graph: QuenchedGraph, beta: float, mono: OverlapMonomial) -> float:
    """Direct replicated expectation by summation over 2^(s*N) weighted
    configurations (reassociated per replica); independent of the
    WHT/contraction path in gibbs_exact."""
    n = graph.n_sites
    size = 1 << n
    cfg = np.arange(size)
    sig = (2 * ((cfg[:, None] >> np.arange(n)) & 1) - 1).astype(np.float64)
    energy = np.zeros(size)
    for i, j in graph.edges:
        energy += sig[:, int(i)] * sig[:, int(j)]
    w = np.exp(beta * (energy - energy.max()))
    w /= w.sum()
    s = max((r for f in mono.factors for r in f.replicas), default=1)
    letters = "abcdefgh"
    operands = [w] * s
    subs = list(letters[:s])
    for f in mono.factors:
        axes = [r - 1 for r in f.replicas]
        t = sig
        for _ in range(len(axes) - 1):
            t = t[..., None, :] * sig
        t = t.mean(axis=-1)  # q_S over the replica axes of S
        for _ in range(f.exponent):
            operands.append(t)
            subs.append("".join(letters[a] for a in axes))
    return float(np.einsum(",".join(subs) + "->", *operands, optimize=True))


def _check_rng() -> tuple[bool, str]:
    z, _ = splitmix64(1234567)
    if z != 6457827717110365317:
        return False, f"splitmix64 reference mismatch: {z}"
    r1 = RandomStream(42, 3)
    seq = [r1.next_u64() for _ in range(64)]
    r2 = RandomStream(42, 3)
    batch = list(r2.u64s(64))
    if seq != [int(v) for v in batch]:
        return False, "scalar and batched draws disagree"
    return True, "splitmix64 reference and batch parity"


def _check_edge_counts() -> tuple[bool, str]:
    rng = RandomStream(5, 0)
    rep = check_distribution_identity(
        DilutionModel(DilutionKind.BERNOULLI, 2.0), 4, lambda k: 1.0, 20000, rng
    )
    zb = abs(rep["lhs"] - rep["rhs"]) / max(rep["lhs_stderr"], 1e-12)
    rep2 = check_distribution_identity(
        DilutionModel(DilutionKind.POISSON, 1.0), 8, lambda k: float(k), 20000, rng
    )
    z2 = abs(rep2["lhs"] - rep2["rhs"]) / math.hypot(rep2["lhs_stderr"], rep2["rhs_stderr"])
    ok = zb < 4 and z2 < 4
    return ok, f"shift identities z = {zb:.2f}, {z2:.2f}"


def _check_beta0_values() -> tuple[bool, str]:
    for n in (4, 8):
        graph = sample_graph(DilutionModel(DilutionKind.POISSON, 1.0), n, RandomStream(1, n))
        omega = ge.omega_table(graph, 0.0)
        m2 = ge.monomial_expectation(graph, 0.0, parse_monomial("m1^2"), omega)
        q4 = ge.monomial_expectation(graph, 0.0, parse_monomial("q12^4"), omega)
        expect_q4 = (3 * n * n - 2 * n) / n**4
        if abs(m2 - 1.0 / n) > 1e-12 or abs(q4 - expect_q4) > 1e-12:
            return False, f"beta=0 values off at N={n}"
    return True, "beta=0 closed forms at N=4,8"


def _check_two_spin() -> tuple[bool, str]:
    g = QuenchedGraph(2, np.array([[0, 1]]), DilutionModel(DilutionKind.POISSON, 1.0), 0)
    lz = ge.log_partition(g, 0.5)
    om = ge.correlations(g, 0.5, [0b11])[0b11]
    ok = abs(lz - math.log(4 * math.cosh(0.5))) < 1e-12 and abs(om - math.tanh(0.5)) < 1e-12
    return ok, "two-spin closed forms"


def _check_replica_oracle() -> tuple[bool, str]:
    graph = sample_graph(DilutionModel(DilutionKind.POISSON, 1.5), 4, RandomStream(9, 0))
    worst = 0.0
    for text in ("q12^2", "m1^2 q12^2", "q12^2 q13^2"):
        mono = parse_monomial(text)
        a = ge.monomial_expectation(graph, 0.6, mono)
        b = oracle_monomial(graph, 0.6, mono)
        worst = max(worst, abs(a - b))
    return worst < 1e-10, f"max |engine - brute force| = {worst:.2e}"


def _check_varh_derivative() -> tuple[bool, str]:
    graph = sample_graph(DilutionModel(DilutionKind.BERNOULLI, 1.0), 8, RandomStream(21, 0))
    beta, db = 0.7, 1e-4
    stats = ge.internal_energy_stats(graph, beta)
    hp = ge.internal_energy_stats(graph, beta + db)["mean_h"]
    hm = ge.internal_energy_stats(graph, beta - db)["mean_h"]
    lhs = graph.n_sites * stats["thermal_variance_h"]
    rhs = -(hp - hm) / (2 * db)
    return abs(lhs - rhs) < 1e-6, f"N*var(h) vs -d<h>/dbeta: diff {abs(lhs-rhs):.2e}"


def _check_detailed_balance() -> tuple[bool, str]:
    graph = sample_graph(DilutionModel(DilutionKind.POISSON, 2.0), 3, RandomStream(33, 0))
    beta = 0.8
    e = kernels.config_energies(graph.n_sites, graph.ei, graph.ej)
    from .dilution import adjacency_csr

    offsets, nbrs, wts = adjacency_csr(graph)
    worst = 0.0
    for cfg in range(8):
        for site in range(3):
            other = cfg ^ (1 << site)
            f = 0
            for idx in range(offsets[site], offsets[site + 1]):
                f += int(wts[idx]) * (2 * ((cfg >> int(nbrs[idx])) & 1) - 1)
            p_plus = 1.0 / (1.0 + math.exp(-2.0 * beta * f))
            p_to_other = p_plus if (other >> site) & 1 else 1.0 - p_plus
            p_back = p_plus if (cfg >> site) & 1 else 1.0 - p_plus
            lhs = math.exp(beta * float(e[cfg])) * p_to_other
            rhs = math.exp(beta * float(e[other])) * p_back
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    return worst < 1e-12, f"heat-bath flip balance, worst rel err {worst:.2e}"


def _check_mc_vs_exact() -> tuple[bool, str]:
    graph = sample_graph(DilutionModel(DilutionKind.POISSON, 1.0), 8, RandomStream(17, 0))
    mono = parse_monomial("q12^2")
    params = mc.McParams(n_replicas=2, burn_in_sweeps=500, measure_sweeps=8000, thin=5)
    est = mc.estimate_monomials(graph, 0.5, [mono], params, RandomStream(17, 1))[0]
    exact = ge.monomial_expectation(graph, 0.5, mono)
    z = abs(est["estimate"] - exact) / est["stderr"]
    return z < 4.0, f"q12^2 MC vs exact: z = {z:.2f}"


def _check_symbolic() -> tuple[bool, str]:
    defs = idm.identity_definitions()
    i5 = {str(mo): c for mo, c in defs["I5"]}
    expect = {"q12^4": Fraction(1), "q12^2 q13^2": Fraction(-4), "q12^2 q34^2": Fraction(3)}
    if i5 != expect:
        return False, f"I5 terms unexpected: {i5}"
    for g_text, s in (("m1^2", 1), ("q12^2", 2)):
        cmpres = symbolic.compare_methods(parse_monomial(g_text), s, 3)
        if not cmpres.all_equal:
            return False, f"methods disagree for {g_text}"
    return True, "identity goldens and method agreement"


def _check_gauge() -> tuple[bool, str]:
    res = idm.cavity_gauge_check(1.0, 6, 0.5, n_disorder=2000, seed=4, n_jobs=1)
    z = abs(res["diff"]) / res["stderr"]
    return z < 6.0, f"gauge identity z = {z:.2f}"


def _check_stability_predicate() -> tuple[bool, str]:
    from .monomials import is_stochastically_stable

    cases = [("m1^2", True), ("q12", False), ("q12 q23 q13", True)]
    for text, expect in cases:
        if is_stochastically_stable(parse_monomial(text)) is not expect:
            return False, f"stability wrong for {text}"
    return True, "stochastic stability predicate"


def _check_determinism() -> tuple[bool, str]:
    model = DilutionModel(DilutionKind.POISSON, 1.0)
    a = idm.residuals(model, 6, 0.4, engine="exact", n_disorder=8, seed=12)
    b = idm.residuals(model, 6, 0.4, engine="exact", n_disorder=8, seed=12)
    return a.to_json() == b.to_json(), "identical reruns, identical reports"


CHECKS = [
    ("rng", _check_rng),
    ("edge-count-identities", _check_edge_counts),
    ("beta0-closed-forms", _check_beta0_values),
    ("two-spin", _check_two_spin),
    ("replica-brute-force", _check_replica_oracle),
    ("varh-derivative", _check_varh_derivative),
    ("detailed-balance", _check_detailed_balance),
    ("mc-vs-exact", _check_mc_vs_exact),
    ("symbolic-goldens", _check_symbolic),
    ("stability-predicate", _check_stability_predicate),
    ("gauge-identity", _check_gauge),
    ("determinism", _check_determinism),
]


def run_selftest(verbose: bool = True) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"exception: {exc!r}"
        all_ok &= ok
        if verbose:
            print(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}")
    return all_ok
