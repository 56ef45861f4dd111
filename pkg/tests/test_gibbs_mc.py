"""Monte Carlo engine: balance, closed forms, exact-engine oracle, determinism."""

import math

import numpy as np
import pytest

from dilferro import gibbs_exact as ge
from dilferro import gibbs_mc as mc
from dilferro.dilution import DilutionKind, DilutionModel, QuenchedGraph
from dilferro.errors import ParameterError
from dilferro.monomials import parse_monomial
from dilferro.rng import RandomStream

from conftest import make_graph

POISSON = DilutionModel(DilutionKind.POISSON, 1.0)


def test_beta_zero_magnetization_vanishes():
    g = make_graph("poisson", 1.0, 8, 1)
    params = mc.McParams(n_replicas=1, burn_in_sweeps=200, measure_sweeps=20000, thin=2)
    snapshots = mc.run_chain(g, 0.0, params, RandomStream(5, 0))
    m_series = snapshots.mean(axis=(1, 2))
    se = m_series.std(ddof=1) / math.sqrt(len(m_series))
    assert abs(m_series.mean()) <= 4 * se


def test_two_spin_pair_correlation():
    g = QuenchedGraph(2, np.array([[0, 1]]), POISSON, 0)
    params = mc.McParams(n_replicas=1, burn_in_sweeps=500, measure_sweeps=40000, thin=4)
    snapshots = mc.run_chain(g, 1.0, params, RandomStream(6, 0))
    series = (snapshots[:, 0, 0] * snapshots[:, 0, 1]).astype(np.float64)
    se = series.std(ddof=1) / math.sqrt(len(series) / 8)  # crude correlation margin
    assert series.mean() == pytest.approx(math.tanh(1.0), abs=3 * se + 1e-3)


def test_pair_correlations_match_exact_engine():
    g = make_graph("poisson", 1.0, 10, 3)
    params = mc.McParams(n_replicas=1, burn_in_sweeps=1000, measure_sweeps=20000, thin=5)
    snapshots = mc.run_chain(g, 0.5, params, RandomStream(7, 1))
    table = ge.omega_table(g, 0.5)
    for i in range(10):
        for j in range(i + 1, 10):
            series = (snapshots[:, 0, i] * snapshots[:, 0, j]).astype(np.float64)
            batches = series[: 4000 * (len(series) // 4000)].reshape(32, -1).mean(axis=1)
            se = batches.std(ddof=1) / math.sqrt(len(batches))
            exact = float(table[(1 << i) | (1 << j)])
            assert abs(series.mean() - exact) <= 4 * se + 1e-3


def test_estimate_monomials_against_exact():
    g = make_graph("poisson", 1.0, 10, 9)
    monos = [parse_monomial(t) for t in ("m1^2", "q12^2", "m1^2 q12^2", "q12^4")]
    params = mc.McParams(n_replicas=2, burn_in_sweeps=1000, measure_sweeps=20000, thin=10)
    ests = mc.estimate_monomials(g, 0.5, monos, params, RandomStream(8, 1))
    omega = ge.omega_table(g, 0.5)
    for mono, est in zip(monos, ests):
        exact = ge.monomial_expectation(g, 0.5, mono, omega)
        assert abs(est["estimate"] - exact) <= 4 * est["stderr"]


def test_unit_monomial_is_exact_one():
    g = make_graph("poisson", 1.0, 6, 2)
    params = mc.McParams(n_replicas=1, burn_in_sweeps=10, measure_sweeps=100, thin=5)
    est = mc.estimate_monomials(g, 0.4, [parse_monomial("1")], params, RandomStream(1, 1))[0]
    assert est["estimate"] == 1.0
    assert est["stderr"] == 0.0


def test_replica_count_validated():
    g = make_graph("poisson", 1.0, 6, 2)
    params = mc.McParams(n_replicas=2, burn_in_sweeps=10, measure_sweeps=50, thin=5)
    with pytest.raises(ParameterError):
        mc.estimate_monomials(g, 0.4, [parse_monomial("q12^2 q345^2")], params, RandomStream(0, 0))


def test_bit_identical_measurement_streams():
    g = make_graph("poisson", 1.0, 8, 4)
    params = mc.McParams(n_replicas=3, burn_in_sweeps=100, measure_sweeps=500, thin=5)
    s1 = mc.run_chain(g, 0.6, params, RandomStream(77, 2))
    s2 = mc.run_chain(g, 0.6, params, RandomStream(77, 2))
    np.testing.assert_array_equal(s1, s2)


def test_global_flip_symmetry_of_even_monomials():
    g = make_graph("poisson", 1.0, 8, 11)
    mono = parse_monomial("q12^2")
    params = mc.McParams(n_replicas=2, burn_in_sweeps=500, measure_sweeps=20000, thin=5)
    chains_a = mc.make_chains(g, 0.5, 2, RandomStream(13, 0))
    chains_b = mc.ReplicaChains(g, 0.5, -chains_a.configs.copy(), chains_a.adjacency)
    results = []
    for stream_id, chains in ((1, chains_a), (2, chains_b)):
        table, fmax, (off, nbr, wt) = mc._heat_bath_table(g, 0.5)
        out = np.empty((params.n_measurements, 2, 8), dtype=np.int8)
        state = RandomStream(13, stream_id).state_array()
        from dilferro import kernels

        kernels.glauber_run(
            chains.configs, off, nbr, wt, table, fmax,
            params.burn_in_sweeps, params.n_measurements, params.thin, state, out,
        )
        series = mc.monomial_series(out, mono)
        results.append((series.mean(), series.std(ddof=1) / math.sqrt(len(series) / 8)))
    (m1, s1), (m2, s2) = results
    assert abs(m1 - m2) <= 4 * math.hypot(s1, s2)


def test_detailed_balance_on_random_three_site_graphs():
    # w(sigma) T(sigma -> sigma') == w(sigma') T(sigma' -> sigma) exactly
    for seed in range(5):
        g = make_graph("poisson", 2.0, 3, 40 + seed)
        beta = 0.9
        table, fmax, (off, nbr, wt) = mc._heat_bath_table(g, beta)
        from dilferro import kernels

        e = kernels.config_energies(g.n_sites, g.ei, g.ej)
        for cfg in range(8):
            for site in range(3):
                other = cfg ^ (1 << site)
                f = sum(
                    int(wt[k]) * (2 * ((cfg >> int(nbr[k])) & 1) - 1)
                    for k in range(off[site], off[site + 1])
                )
                p_plus = float(table[f + fmax])
                p_fwd = p_plus if (other >> site) & 1 else 1.0 - p_plus
                p_bwd = p_plus if (cfg >> site) & 1 else 1.0 - p_plus
                lhs = math.exp(beta * float(e[cfg])) * p_fwd
                rhs = math.exp(beta * float(e[other])) * p_bwd
                assert lhs == pytest.approx(rhs, rel=1e-12)


def test_coverage_of_exact_values_over_seeds():
    # MC should land within 4 stderr of the exact value in >= 95% of runs
    g = make_graph("poisson", 1.0, 6, 55)
    mono = parse_monomial("q12^2")
    exact = ge.monomial_expectation(g, 0.5, mono)
    params = mc.McParams(n_replicas=2, burn_in_sweeps=300, measure_sweeps=4000, thin=5)
    hits = 0
    for seed in range(100):
        est = mc.estimate_monomials(g, 0.5, [mono], params, RandomStream(900 + seed, 0))[0]
        if abs(est["estimate"] - exact) <= 4 * est["stderr"]:
            hits += 1
    assert hits >= 95


def test_quenched_estimate_beta_zero():
    res = mc.quenched_estimate(
        POISSON, 10, 0.0, [parse_monomial("q12^2")],
        mc.McParams(n_replicas=2, burn_in_sweeps=100, measure_sweeps=2000, thin=5),
        n_disorder=20, master_seed=3,
    )[0]
    assert abs(res["mean"] - 0.1) <= 3 * res["stderr"]


def test_quenched_single_sample_flags_stderr():
    res = mc.quenched_estimate(
        POISSON, 6, 0.3, [parse_monomial("m1^2")],
        mc.McParams(n_replicas=1, burn_in_sweeps=50, measure_sweeps=500, thin=5),
        n_disorder=1, master_seed=3,
    )[0]
    assert math.isnan(res["stderr"])
    assert res["n_disorder"] == 1


def test_product_factorization_trend():
    # <q12^2 q34^2> equals <q12^2>^2 on each graph up to O(1/N) corrections;
    # check MC tracks the exact engine for the product monomial
    g = make_graph("poisson", 1.0, 8, 66)
    mono = parse_monomial("q12^2 q34^2")
    params = mc.McParams(n_replicas=4, burn_in_sweeps=1000, measure_sweeps=20000, thin=10)
    est = mc.estimate_monomials(g, 0.5, [mono], params, RandomStream(21, 1))[0]
    exact = ge.monomial_expectation(g, 0.5, mono)
    assert abs(est["estimate"] - exact) <= 4 * est["stderr"]


def test_glauber_sweep_public_wrapper_advances_state():
    g = make_graph("poisson", 1.0, 6, 8)
    chains = mc.make_chains(g, 0.5, 2, RandomStream(30, 0))
    before = chains.configs.copy()
    rng = RandomStream(30, 1)
    mc.glauber_sweep(chains, rng, n_sweeps=3)
    assert chains.configs.shape == before.shape
    # the stream must have been consumed
    assert rng.next_u64() != RandomStream(30, 1).next_u64()
