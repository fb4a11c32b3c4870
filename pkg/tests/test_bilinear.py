import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klab.bilinear import (BilinearInstance, SweepSpec, bilinear_form,
                           kloosterman_matrix, nontrivial_threshold,
                           operator_norm, operator_norm_dense, pv_bound,
                           plan_parameters_typeI, plan_parameters_typeII,
                           saving_sweep, shift_identity_check,
                           thm_typeI_bound, thm_typeII_bound, trivial_bound,
                           typeI_saving_exponent, typeII_bracket_exponent,
                           typeII_saving_exponent)
from klab.errors import ConstraintViolated, HypothesisViolated
from klab.fields import make_prime_field
from klab.kloosterman import kloosterman_table
from klab.sum_product import SumProductContext


@pytest.fixture(scope="module")
def ctx101():
    return SumProductContext(kloosterman_table(2, make_prime_field(101)))


def test_bilinear_single_term(ctx101):
    M, N, offset = 4, 6, 10
    alpha = np.zeros(M, dtype=np.complex128)
    beta = np.zeros(N, dtype=np.complex128)
    alpha[2] = 1.0  # m0 = 3
    beta[1] = 1.0   # n0 = offset + 1 = 11
    inst = BilinearInstance(M=M, N=N, offset=offset, alpha=alpha, beta=beta)
    got = bilinear_form(ctx101, inst)
    assert abs(got - complex(ctx101.twisted[3 * 11 % 101])) < 1e-14


def test_bilinear_zero_coefficients(ctx101):
    inst = BilinearInstance(M=3, N=3, offset=1,
                            alpha=np.zeros(3, dtype=complex),
                            beta=np.zeros(3, dtype=complex))
    assert bilinear_form(ctx101, inst) == 0


def test_bilinear_transposed_loop_oracle(ctx101):
    rng = np.random.default_rng(1)
    M = N = 10
    alpha = np.exp(2j * math.pi * rng.random(M))
    beta = np.exp(2j * math.pi * rng.random(N))
    inst = BilinearInstance(M=M, N=N, offset=5, alpha=alpha, beta=beta)
    got = bilinear_form(ctx101, inst)
    acc = 0j
    for j, n in enumerate(range(5, 5 + N)):  # n-major order
        for i, m in enumerate(range(1, M + 1)):
            acc += alpha[i] * beta[j] * complex(ctx101.twisted[m * n % 101])
    assert abs(got - acc) < 1e-10


def test_trivial_bound_unit_modulus():
    inst = BilinearInstance(M=10, N=10, offset=1,
                            alpha=np.ones(10, dtype=complex),
                            beta=np.ones(10, dtype=complex))
    assert abs(trivial_bound(inst) - 100.0) < 1e-12
    zero = BilinearInstance(M=4, N=4, offset=1,
                            alpha=np.ones(4, dtype=complex),
                            beta=np.zeros(4, dtype=complex))
    assert trivial_bound(zero) == 0


def test_measured_below_trivial_times_k(ctx101):
    rng = np.random.default_rng(3)
    for _ in range(10):
        M, N = int(rng.integers(2, 12)), int(rng.integers(2, 12))
        alpha = np.exp(2j * math.pi * rng.random(M))
        beta = np.exp(2j * math.pi * rng.random(N))
        inst = BilinearInstance(M=M, N=N, offset=1, alpha=alpha, beta=beta)
        assert abs(bilinear_form(ctx101, inst)) <= trivial_bound(inst) * ctx101.k + 1e-9


def test_pv_bound_arithmetic():
    inst = BilinearInstance(M=100, N=100, offset=1,
                            alpha=np.ones(100, dtype=complex),
                            beta=np.ones(100, dtype=complex))
    got = pv_bound(inst, 10**4)
    bracket = 0.1 + 0.1 + 0.1 * 10 * math.log(10**4)
    assert abs(got - 10 * 10 * 100 * bracket) < 1e-9


def test_typeII_hypothesis_violation():
    with pytest.raises(HypothesisViolated) as exc:
        thm_typeII_bound(1, 1, 10**4, 1.0, 1.0)  # MN <= q^{1/4}
    assert any("q^{1/4} < MN" in c for c in exc.value.failed)


def test_typeI_hypothesis_violation():
    with pytest.raises(HypothesisViolated) as exc:
        thm_typeI_bound(10, 2 * 10**4, 10**4, 10.0, math.sqrt(10))  # N >= q
    assert any("N < q" in c for c in exc.value.failed)


def test_saving_exponents_at_sqrt_q():
    assert abs(typeII_saving_exponent(0.5, 0.5) - 1 / 64) < 1e-12
    assert abs(typeI_saving_exponent(0.5, 0.5) - 1 / 24) < 1e-12


def test_nontrivial_thresholds():
    assert abs(nontrivial_threshold("general") - 11 / 24) < 1e-6
    assert abs(nontrivial_threshold("special") - 3 / 7) < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 0.62), st.floats(0.3, 0.62), st.floats(0.001, 0.05))
def test_typeII_bracket_monotone_in_N(eM, eN, step):
    # larger N (fixed M, q) never increases the bracket exponent
    assert typeII_bracket_exponent(eM, eN + step) <= typeII_bracket_exponent(eM, eN) + 1e-12


def test_plan_typeI_exact_cubes():
    plan = plan_parameters_typeI(8, 64, 10**4)
    assert (plan.A, plan.B) == (8, 8)


def test_plan_typeII_rounding():
    plan = plan_parameters_typeII(100, 100, 10**4)
    assert (plan.A, plan.B) == (3, 32)
    assert abs(plan.A * plan.B - 100) <= 8  # AB = N up to rounding
    assert set(plan.constraints) == {"2B<q", "AB<=N", "AM<q"}


def test_shift_identity_degenerate(ctx101):
    rng = np.random.default_rng(0)
    alpha = np.exp(2j * math.pi * rng.random(3))
    dev = shift_identity_check(ctx101, alpha, offset=30, N=10, A=1, B=1)
    assert dev < 1e-12


def test_shift_identity_q101(ctx101):
    rng = np.random.default_rng(1)
    alpha = np.exp(2j * math.pi * rng.random(5))
    dev = shift_identity_check(ctx101, alpha, offset=40, N=20, A=2, B=3)
    assert dev < 1e-9


def test_shift_identity_constraint_violation(ctx101):
    alpha = np.ones(5, dtype=complex)
    with pytest.raises(ConstraintViolated):
        shift_identity_check(ctx101, alpha, offset=1, N=20, A=2, B=51)  # 2B >= q


def test_operator_norm_1x1(ctx101):
    val = operator_norm(ctx101, 1, 1, offset=7)
    assert abs(val - abs(complex(ctx101.twisted[7]))) < 1e-9


def test_operator_norm_matches_dense(ctx101):
    sig = operator_norm(ctx101, 8, 8, offset=3)
    dense = operator_norm_dense(ctx101, 8, 8, offset=3)
    assert abs(sig - dense) / dense < 1e-8


def test_operator_norm_dominates_samples(ctx101):
    sig = operator_norm(ctx101, 6, 6, offset=2)
    rng = np.random.default_rng(7)
    for _ in range(20):
        alpha = rng.normal(size=6) + 1j * rng.normal(size=6)
        beta = rng.normal(size=6) + 1j * rng.normal(size=6)
        inst = BilinearInstance(M=6, N=6, offset=2, alpha=alpha, beta=beta)
        ratio = abs(bilinear_form(ctx101, inst)) / (inst.l2_alpha * inst.l2_beta)
        assert ratio <= sig + 1e-9


def test_saving_sweep_rows(ctx101):
    spec = SweepSpec(sizes=((8, 10), (10, 10)), seed=2)
    rows = saving_sweep(ctx101, spec)
    assert len(rows) == 6
    ones = [r for r in rows if r.ensemble == "ones"]
    for r in ones:
        A = kloosterman_matrix(ctx101, r.M, r.N, r.offset)
        assert abs(r.measured - abs(A.sum())) < 1e-9
    for r in rows:
        assert r.measured <= r.trivial * ctx101.k + 1e-9
        if r.measured > 0:
            assert abs(r.gamma - math.log(r.trivial / r.measured, 101)) < 1e-12
    again = saving_sweep(ctx101, spec)
    assert [r.measured for r in again] == [r.measured for r in rows]
