"""Symbolic engine: golden expansions, method agreement, numeric cross-check."""

import math
from fractions import Fraction

import numpy as np
import pytest

from dilferro import gibbs_exact as ge
from dilferro import symbolic as sy
from dilferro.dilution import sample_cavity_graph
from dilferro.errors import ParameterError, StructureError
from dilferro.monomials import ONE, is_stochastically_stable, parse_monomial
from dilferro.rng import RandomStream

M2 = parse_monomial("m1^2")
Q2 = parse_monomial("q12^2")


def terms_at(comb: sy.MonomialCombination, power: int) -> dict[str, Fraction]:
    out = {}
    for mono, coeffs in comb.terms.items():
        total = sum((c.rational for c in coeffs if c.theta_power == power), Fraction(0))
        if total:
            out[str(mono)] = total
    return out


class TestStreamingGoldens:
    def test_m2_first_power_lines(self):
        comb = sy.streaming_derivative(M2, 1, 3)
        assert terms_at(comb, 1) == {"m1^3": 1, "m1 m2^2": -1}
        assert terms_at(comb, 2) == {"m1^2 q12": -1, "m1^2 q23": 1}
        assert terms_at(comb, 3) == {"m1^2 q123": 1, "m1^2 q234": -1}
        for coeffs in comb.terms.values():
            assert all(c.prefactor.symbol is sy.AlphaSymbol.TWO_ALPHA_TILDE for c in coeffs)

    def test_q2_first_power_lines(self):
        comb = sy.streaming_derivative(Q2, 2, 3)
        assert terms_at(comb, 1) == {"m1 q12^2": 2, "m3 q12^2": -2}
        assert terms_at(comb, 2) == {"q12^3": 1, "q12^2 q13": -4, "q12^2 q34": 3}
        # the theta^3 coefficients follow from the expansion rule: the
        # all-fresh term carries -binom(s+2, 3) = -4 and the mixed term +6
        assert terms_at(comb, 3) == {
            "q12^2 q123": -2,
            "q12^2 q134": 6,
            "q12^2 q345": -4,
        }

    def test_pure_denominator_coefficient_rule(self):
        # appending only fresh replicas costs (-1)^u binom(s+u-1, u)
        for s in (2, 3):
            g = parse_monomial("q12^2") if s == 2 else parse_monomial("q12^2 m3^2")
            comb = sy.streaming_derivative(g, s, 3)
            for u, expect in ((1, -s), (2, s * (s + 1) // 2), (3, -s * (s + 1) * (s + 2) // 6)):
                fresh = tuple(range(s + 1, s + 1 + u))
                from dilferro.monomials import OverlapFactor, OverlapMonomial, canonicalize

                mono = canonicalize(OverlapMonomial(g.factors + (OverlapFactor(fresh, 1),)))
                assert comb.coefficient(mono, u) == Fraction(expect)

    def test_unit_input_collapses(self):
        assert sy.streaming_derivative(ONE, 1, 4).is_zero()
        assert sy.streaming_derivative(ONE, 3, 4).is_zero()

    def test_preconditions(self):
        with pytest.raises(ParameterError):
            sy.streaming_derivative(Q2, 1, 2)  # s below max label
        with pytest.raises(ParameterError):
            sy.streaming_derivative(M2, 1, 0)


class TestGaugeComplete:
    def test_m2_squared_lines(self):
        comb = sy.gauge_complete(sy.streaming_derivative(M2, 1, 3))
        assert terms_at(comb, 1) == {"m1^4": 1, "m1^2 m2^2": -1}
        assert terms_at(comb, 2) == {"m1^2 q12^2": -1, "m1^2 q23^2": 1}
        assert terms_at(comb, 3) == {"m1^2 q123^2": 1, "m1^2 q234^2": -1}

    def test_q2_squared_lines(self):
        comb = sy.gauge_complete(sy.streaming_derivative(Q2, 2, 3))
        assert terms_at(comb, 1) == {"m1^2 q12^2": 2, "m1^2 q23^2": -2}
        assert terms_at(comb, 2) == {"q12^4": 1, "q12^2 q13^2": -4, "q12^2 q34^2": 3}
        assert terms_at(comb, 3) == {
            "q12^2 q123^2": -2,
            "q12^2 q134^2": 6,
            "q12^2 q345^2": -4,
        }

    def test_outputs_stochastically_stable(self):
        for g, s in ((M2, 1), (Q2, 2), (parse_monomial("m1^2 q23^2"), 3)):
            comb = sy.gauge_complete(sy.streaming_derivative(g, s, 3))
            assert all(is_stochastically_stable(mono) for mono in comb.terms)

    def test_constant_terms_pass_through(self):
        comb = sy.MonomialCombination()
        comb.add(M2, sy.Coefficient(Fraction(1), 0, sy.Prefactor(sy.AlphaSymbol.ALPHA)))
        out = sy.gauge_complete(comb)
        assert out.terms == comb.terms

    def test_structural_error_for_split_odd_part(self):
        comb = sy.MonomialCombination()
        bad = parse_monomial("q12 q34")  # odd set {1,2,3,4} is not a factor
        comb.add(bad, sy.Coefficient(Fraction(1), 1, sy.Prefactor(sy.AlphaSymbol.ALPHA)))
        with pytest.raises(StructureError):
            sy.gauge_complete(comb)


class TestSelfAveragingGenerator:
    def test_m2_display(self):
        comb = sy.self_averaging_fG(M2, 1, 2)
        assert terms_at(comb, 0) == {"m1^4": 1, "m1^2 m2^2": -1}
        assert terms_at(comb, 1) == {"m1^2 q12^2": -2, "m1^2 q23^2": 2}
        assert terms_at(comb, 2) == {"m1^2 q123^2": 3, "m1^2 q234^2": -3}
        for coeffs in comb.terms.values():
            for c in coeffs:
                assert c.prefactor.symbol is sy.AlphaSymbol.ALPHA_PRIME
                assert c.prefactor.one_minus_theta_sq

    def test_q2_display(self):
        comb = sy.self_averaging_fG(Q2, 2, 2)
        assert terms_at(comb, 0) == {"m1^2 q12^2": 2, "m1^2 q23^2": -2}
        assert terms_at(comb, 1) == {"q12^4": 2, "q12^2 q13^2": -8, "q12^2 q34^2": 6}
        assert terms_at(comb, 2) == {
            "q12^2 q123^2": -6,
            "q12^2 q134^2": 18,
            "q12^2 q345^2": -12,
        }

    def test_generator_structure_at_higher_s(self):
        # leading class for general s: sum_l <G m_l^2> - s <G m_{s+1}^2>
        comb = sy.self_averaging_fG(M2, 3, 0)
        assert terms_at(comb, 0) == {
            "m1^4": 1,
            "m1^2 m2^2": 2 - 3,  # l in {2,3} merge, minus s copies of the fresh label
        }

    def test_poisson_variant_prefactor(self):
        comb = sy.self_averaging_fG(M2, 1, 1, dilution="poisson")
        for coeffs in comb.terms.values():
            for c in coeffs:
                assert c.prefactor.symbol is sy.AlphaSymbol.ALPHA

    def test_unit_input_vanishes(self):
        assert sy.self_averaging_fG(ONE, 1, 3).is_zero()
        assert sy.self_averaging_fG(ONE, 2, 3).is_zero()

    def test_outputs_stochastically_stable(self):
        for g, s in ((M2, 1), (Q2, 2)):
            comb = sy.self_averaging_fG(g, s, 3)
            assert all(is_stochastically_stable(mono) for mono in comb.terms)


class TestExtractIdentities:
    def test_first_family(self):
        ids = sy.extract_identities(sy.self_averaging_fG(M2, 1, 2))
        assert [ie.order for ie in ids] == [0, 1, 2]
        assert {str(m): c for m, c in ids[0].terms} == {"m1^4": 1, "m1^2 m2^2": -1}
        assert {str(m): c for m, c in ids[1].terms} == {"m1^2 q12^2": 1, "m1^2 q23^2": -1}
        assert {str(m): c for m, c in ids[2].terms} == {"m1^2 q123^2": 1, "m1^2 q234^2": -1}

    def test_second_family(self):
        ids = sy.extract_identities(sy.self_averaging_fG(Q2, 2, 2))
        assert {str(m): c for m, c in ids[0].terms} == {"m1^2 q12^2": 1, "m1^2 q23^2": -1}
        assert {str(m): c for m, c in ids[1].terms} == {
            "q12^4": 1,
            "q12^2 q13^2": -4,
            "q12^2 q34^2": 3,
        }
        assert {str(m): c for m, c in ids[2].terms} == {
            "q12^2 q123^2": 1,
            "q12^2 q134^2": -3,
            "q12^2 q345^2": 2,
        }

    def test_empty_combination(self):
        assert sy.extract_identities(sy.MonomialCombination()) == []

    def test_invariant_under_relabeled_input(self):
        g_a = parse_monomial("q12^2")
        g_b = parse_monomial("q23^2")  # canonicalizes to the same monomial
        assert g_a == g_b
        ids_a = sy.extract_identities(sy.self_averaging_fG(g_a, 2, 2))
        ids_b = sy.extract_identities(sy.self_averaging_fG(g_b, 2, 2))
        assert ids_a == ids_b

    def test_same_identities_for_larger_s(self):
        ids_s1 = sy.extract_identities(sy.self_averaging_fG(M2, 1, 1))
        ids_s3 = sy.extract_identities(sy.self_averaging_fG(M2, 3, 1))
        assert ids_s1 == ids_s3


class TestCompareMethods:
    @pytest.mark.parametrize("g,s", [(M2, 1), (Q2, 2)])
    def test_agreement(self, g, s):
        res = sy.compare_methods(g, s, 3)
        assert res.all_equal
        assert len(res.orders) == 3
        for o in res.orders:
            assert o.equal and o.proportional
            assert o.ratio is not None and o.ratio > 0

    def test_unit_trial_function(self):
        res = sy.compare_methods(ONE, 1, 3)
        assert res.orders == []
        assert res.all_equal
        assert res.streaming_identities == [] and res.fg_identities == []


class TestNumericEvaluation:
    def test_prefactor_values(self):
        pf_prime = sy.Prefactor(sy.AlphaSymbol.ALPHA_PRIME)
        assert sy.prefactor_numeric(pf_prime, 1.0, 8, 0.3) == pytest.approx(28 / 64)
        pf_tilde = sy.Prefactor(sy.AlphaSymbol.TWO_ALPHA_TILDE)
        assert sy.prefactor_numeric(pf_tilde, 1.0, 8, 0.3) == pytest.approx(16 / 9)
        pf_flag = sy.Prefactor(sy.AlphaSymbol.ALPHA, one_minus_theta_sq=True)
        assert sy.prefactor_numeric(pf_flag, 2.0, 8, 0.5) == pytest.approx(2.0 * 0.75)

    def test_bernoulli_prefactor_large_n_limit(self):
        pf = sy.Prefactor(sy.AlphaSymbol.ALPHA_PRIME)
        assert sy.prefactor_numeric(pf, 1.0, 10_000, 0.0) == pytest.approx(0.5, abs=1e-4)


def _streaming_tail_envelope(F, s, order, theta, alpha_tilde) -> float:
    """Upper bound for the truncated part of the streaming series."""
    tail = 0.0
    hi = sy.streaming_derivative(F, s, order + 12)
    by_power: dict[int, float] = {}
    for coeffs in hi.terms.values():
        for c in coeffs:
            by_power[c.theta_power] = by_power.get(c.theta_power, 0.0) + abs(float(c.rational))
    for k, weight in by_power.items():
        if k > order:
            tail += 2.0 * alpha_tilde * weight * theta**k
    return tail


@pytest.mark.parametrize("f_text,s", [("m1^2", 1), ("q12^2", 2)])
def test_streaming_matches_exact_t_derivative(f_text, s):
    """The expansion reproduces the exact t-derivative of the interpolated
    average within Monte Carlo error plus the theta^(K+1) envelope.

    The exact derivative uses the Poisson-mean identity: d/dt of an average
    over a Poisson(2*alpha_tilde*t) number of cavity sites equals
    2*alpha_tilde times the increment from one extra uniform site.
    """
    F = parse_monomial(f_text)
    alpha, n, t = 1.2, 8, 0.6
    theta = 0.3
    beta = math.atanh(theta)
    order = 3
    alpha_tilde = n * alpha / (n + 1)
    comb = sy.streaming_derivative(F, s, order)
    monos = comb.monomials()
    n_draws = 600
    diffs = np.empty(n_draws)
    for i in range(n_draws):
        rng = RandomStream(4321 + s, i)
        body, cav = sample_cavity_graph(alpha, n, t, rng)
        fields = np.bincount(np.asarray(cav, dtype=np.int64), minlength=n)
        omega = ge.omega_table(body, beta, fields)
        f_val = ge.monomial_expectation(body, beta, F, omega)
        bumped = 0.0
        for i0 in range(n):
            f2 = fields.copy()
            f2[i0] += 1
            om2 = ge.omega_table(body, beta, f2)
            bumped += ge.monomial_expectation(body, beta, F, om2)
        lhs = 2.0 * alpha_tilde * (bumped / n - f_val)
        vals = {mo: ge.monomial_expectation(body, beta, mo, omega) for mo in monos}
        rhs = sy.evaluate_combination(comb, vals, alpha, n, beta)
        diffs[i] = lhs - rhs
    se = diffs.std(ddof=1) / math.sqrt(n_draws)
    envelope = _streaming_tail_envelope(F, s, order, theta, alpha_tilde)
    assert abs(diffs.mean()) <= 4 * se + envelope
