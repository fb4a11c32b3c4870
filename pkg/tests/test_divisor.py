import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klab.divisor import (CuspFormCoeffs, ExponentConfig, bound_exponents,
                          centering_residual_exact, combined_bounds,
                          d2_table, delta_star_search, delta_to_eta,
                          discrepancy, discrepancy_all, exponent_case_analysis,
                          hecke_violations, ktilde, ktilde_all,
                          lambda_star_one, lambda_star_one_table,
                          sigma11_mod, tau_star_one, tau_table)
from klab.errors import BadResidue, HypothesisViolated, OutOfRange
from klab.fields import make_prime_field
from klab.kloosterman import kloosterman_table
from klab.sum_product import SumProductContext


@pytest.fixture(scope="module")
def coeffs():
    return tau_table(3000)


def test_tau_small_values(coeffs):
    assert coeffs.tau[1] == 1
    assert coeffs.tau[2] == -24
    assert coeffs.tau[3] == 252
    assert coeffs.tau[4] == -1472
    assert coeffs.tau[5] == 4830
    assert coeffs.tau[6] == -6048
    assert coeffs.tau[6] == coeffs.tau[2] * coeffs.tau[3]


def test_tau_hecke_relations(coeffs):
    assert hecke_violations(coeffs) == 0


def test_tau_congruence_691(coeffs):
    sig = sigma11_mod(coeffs.n_max)
    for n in range(1, coeffs.n_max + 1):
        assert (coeffs.tau[n] - int(sig[n])) % 691 == 0


def test_lambda_bounded_by_d2(coeffs):
    d2 = d2_table(coeffs.n_max)
    assert (np.abs(coeffs.lam[1:]) <= d2[1:] + 1e-9).all()


def test_lambda_star_one_values(coeffs):
    assert lambda_star_one(coeffs, 1) == 1.0
    lam = coeffs.lam
    assert abs(lambda_star_one(coeffs, 7) - (1 + lam[7])) < 1e-15
    assert abs(lambda_star_one(coeffs, 4) - (1 + lam[2] + lam[4])) < 1e-15
    table = lambda_star_one_table(coeffs, 50)
    for n in (1, 4, 7, 12, 50):
        assert abs(table[n] - lambda_star_one(coeffs, n)) < 1e-12


def test_tau_star_one_exact(coeffs):
    assert tau_star_one(coeffs, 6) == 1 - 24 + 252 - 6048
    with pytest.raises(OutOfRange):
        tau_star_one(coeffs, coeffs.n_max + 1)


def test_discrepancy_centering_float(coeffs):
    x, q = 2000, 53
    reports = discrepancy_all(coeffs, x, q)
    assert len(reports) == q - 1
    assert abs(sum(r.E for r in reports)) < 1e-7


def test_discrepancy_centering_exact(coeffs):
    assert centering_residual_exact(coeffs, 500, 11) == 0
    assert centering_residual_exact(coeffs, 1000, 53) == 0


def test_discrepancy_empty_progression(coeffs):
    # x < q and a > x: the raw count is 0 and E = -average
    x, q = 20, 53
    rep = discrepancy(coeffs, x, q, 37)
    assert rep.raw == 0
    assert abs(rep.E + rep.main) < 1e-12


def test_discrepancy_bad_residue(coeffs):
    with pytest.raises(BadResidue):
        discrepancy(coeffs, 100, 11, 22)


# ------------------------------------------------------------------- ktilde

@pytest.fixture(scope="module")
def ctx3_53():
    return SumProductContext(kloosterman_table(3, make_prime_field(53)))


def test_ktilde_zero_function(ctx3_53):
    K = np.zeros(53)
    assert ktilde(K, 5, ctx3_53) == 0


def test_ktilde_delta_identity(ctx3_53):
    q = 53
    for a in (1, 2, 17):
        K = np.zeros(q)
        K[a] = 1.0
        for m in (0, 1, 5, 30):
            got = ktilde(K, m, ctx3_53)
            want = ctx3_53.twisted[a * m % q] / math.sqrt(q)
            assert abs(got - want) < 1e-12
        allm = ktilde_all(K, ctx3_53)
        want_all = ctx3_53.twisted[(a * np.arange(q)) % q] / math.sqrt(q)
        assert np.abs(allm - want_all).max() < 1e-12


def test_ktilde_linearity(ctx3_53):
    rng = np.random.default_rng(0)
    K1, K2 = rng.normal(size=53), rng.normal(size=53)
    lhs = ktilde(K1 + 2.0 * K2, 7, ctx3_53)
    rhs = ktilde(K1, 7, ctx3_53) + 2.0 * ktilde(K2, 7, ctx3_53)
    assert abs(lhs - rhs) < 1e-10


# ----------------------------------------------------------- bound brackets

def test_combined_bounds_special_saving():
    q = 10**4
    M = N = math.sqrt(q)
    out = combined_bounds(M, N, q)
    assert abs(out["special"] - M * N * q ** (-1 / 24)) < 1e-6


def test_combined_bounds_substitutions():
    q = 401
    out = combined_bounds(M=4.0, N=float(q), q=q)  # N = q: special flagged
    assert abs(out["pv"] - 4 * q * (1 / q + q ** -0.5)) < 1e-9
    assert out["special_failed"] == ["N < q"] and math.isnan(out["special"])
    out2 = combined_bounds(M=float(q), N=float(q) / 2, q=q)
    assert abs(out2["linear"] - q * (q ** -0.125 + q ** 0.375 / math.sqrt(q))) < 1e-9


def test_combined_bounds_hypothesis_violation():
    out = combined_bounds(M=100.0, N=2.0, q=11)
    assert set(out["special_failed"]) == {"M <= N^2", "MN <= q^{3/2}"}
    with pytest.raises(HypothesisViolated):
        combined_bounds(M=100.0, N=2.0, q=11, strict=True)


# ------------------------------------------------------------- exponent LP

def test_bound_exponents_spec_point():
    vals = bound_exponents(0.75, 0.75, 0.0)
    assert abs(vals[4] - 1.3125) < 1e-12  # 1.5 + 0.25 - 0.125 - 0.3125


def test_bound_exponents_pv_linear_form():
    # nu' <= 3/2 always holds on the feasible band, so the completion bound
    # reduces to mu' + 1/2
    f1 = bound_exponents(0.4, 0.7)[0]
    assert abs(f1 - 0.9) < 1e-12


def test_bound_exponents_special_inapplicable():
    vals = bound_exponents(0.9, 0.4)  # mu' > 2 nu'
    assert vals[4] == math.inf


@settings(max_examples=80, deadline=None)
@given(st.floats(0, 1.2), st.floats(0, 1.0))
def test_bound_exponents_replacements_hold(mu_p, nu_p):
    # on the band, each simplified form either coincides with the full bound
    # or the full bound's other branch is already below 1
    delta = 0.05
    if not 1 <= mu_p + nu_p <= 1 + delta:
        return
    f1, f2, *_ = bound_exponents(mu_p, nu_p, delta)
    assert abs(f1 - (mu_p + 0.5)) < 1e-12  # nu' <= 3/2 on the band
    f2bis = (mu_p + nu_p) / 2 + nu_p / 2 + 0.375
    assert abs(f2 - f2bis) < 1e-12 or f2 <= 1 + delta - 0.125 + 1e-12
    assert mu_p + nu_p - 1 <= 1 + delta - 0.125 + 1e-12


def test_case_analysis_pass_and_fail():
    ok = exponent_case_analysis(ExponentConfig(delta=0.03, kappa=1e-3))
    assert ok.passed and not ok.witnesses
    bad = exponent_case_analysis(ExponentConfig(delta=0.05, kappa=1e-3))
    assert not bad.passed and bad.witnesses
    mu_p, nu_p, _ = bad.witnesses[0]
    # the witness sits where the special/general brackets cross, near
    # mu' = 5(1+delta)/9 on the top boundary
    assert abs(mu_p + nu_p - 1.05) < 5e-3


def test_delta_eta_conversion():
    assert abs(delta_to_eta(1 / 26) - 1 / 102) < 1e-15
    cfg = ExponentConfig(eta=1 / 102)
    assert abs(cfg.resolved_delta() - 1 / 26) < 1e-12
    with pytest.raises(ValueError):
        ExponentConfig(delta=0.05, eta=0.001)


def test_delta_star_search():
    res = delta_star_search()
    assert abs(res["delta_star"] - 1 / 26) < 1e-3
    assert abs(res["eta_star"] - 1 / 102) < 1e-3


def test_slack_sensitivity_monotone():
    base = delta_star_search()["delta_star"]
    loose = delta_star_search(slack=1e-2)["delta_star"]
    assert loose < base
