"""Bilinear forms sum_{m,n} alpha_m beta_n Kl_k(c m n) and their bound brackets.

The measured quantities are exact double sums against a Kloosterman table.
The bound calculators evaluate the trivial, completion-method, general and
special brackets with all implied constants set to 1 and q^eps dropped; they
also validate each bound's range hypotheses and report which fail.

Saving exponents and non-triviality thresholds are computed at the exponent
level (the q-exponent of the dominant bracket term): at desk-scale q the
subdominant terms of a numeric bracket are nowhere near negligible, so the
numeric bracket crossings would sit far from the asymptotic thresholds the
brackets are designed around.  Numeric bracket values are still what goes
into reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (ConstraintViolated, HypothesisViolated, NoConvergence,
                     RangeTooLarge)

MATRIX_CAP = 1 << 23


@dataclass(frozen=True)
class BilinearInstance:
    """Coefficients for one measured bilinear form."""

    M: int
    N: int
    offset: int  # the n-interval is {offset, ..., offset + N - 1} in [1, q-1]
    alpha: np.ndarray
    beta: np.ndarray
    c: int = 1

    def __post_init__(self):
        if len(self.alpha) != self.M or len(self.beta) != self.N:
            raise ValueError("coefficient lengths must match M and N")

    @property
    def l1_alpha(self):
        return float(np.abs(self.alpha).sum())

    @property
    def l2_alpha(self):
        return float(np.sqrt((np.abs(self.alpha) ** 2).sum()))

    @property
    def l2_beta(self):
        return float(np.sqrt((np.abs(self.beta) ** 2).sum()))

    def check_interval(self, q: int):
        if not (1 <= self.offset and self.offset + self.N - 1 <= q - 1):
            raise ValueError(f"interval [{self.offset}, {self.offset + self.N - 1}] "
                             f"does not fit in [1, {q - 1}]")


@dataclass(frozen=True)
class ParameterPlan:
    """Auxiliary (A, B) averaging lengths with their side-condition flags."""

    A: int
    B: int
    constraints: dict  # {"2B<q": bool, "AB<=N": bool, "AM<q": bool}

    @property
    def ok(self):
        return all(self.constraints.values())


@dataclass(frozen=True)
class BoundReport:
    """Measured |B| against the bound brackets, with the saving exponent."""

    q: int
    k: int
    c: int
    M: int
    N: int
    offset: int
    ensemble: str
    seed: int
    measured: float
    trivial: float
    pv: float
    thm11: float  # nan when hypotheses fail
    thm12: float  # nan when hypotheses fail
    gamma: float  # log_q(trivial / measured)
    flags: tuple = ()
    plan: ParameterPlan | None = None


def kloosterman_matrix(ctx, M: int, N: int, offset: int = 1) -> np.ndarray:
    """The M x N matrix [Kl_k(c m n)] with m in [1, M], n in the interval."""
    q = ctx.field.q
    if ctx.field.degree != 1:
        raise ValueError("bilinear forms are over the prime field")
    if M * N > MATRIX_CAP:
        raise RangeTooLarge(f"MN = {M * N} exceeds matrix cap")
    m = np.arange(1, M + 1, dtype=np.int64)[:, None]
    n = np.arange(offset, offset + N, dtype=np.int64)[None, :]
    return ctx.twisted[m * n % q]


def bilinear_form(ctx, inst: BilinearInstance) -> complex:
    inst.check_interval(ctx.field.q)
    A = kloosterman_matrix(ctx, inst.M, inst.N, inst.offset)
    return complex(inst.alpha @ A @ inst.beta)


# ----------------------------------------------------------------------
# bound brackets (constants 1, q^eps dropped)
# ----------------------------------------------------------------------

def trivial_bound(inst: BilinearInstance) -> float:
    return inst.l2_alpha * inst.l2_beta * math.sqrt(inst.M * inst.N)


def pv_bound(inst: BilinearInstance, q: int) -> float:
    """Completion-method bracket: l2 norms times
    (q^{-1/4} + M^{-1/2} + N^{-1/2} q^{1/4} log q)."""
    M, N = inst.M, inst.N
    bracket = q ** -0.25 + M ** -0.5 + N ** -0.5 * q ** 0.25 * math.log(q)
    return inst.l2_alpha * inst.l2_beta * math.sqrt(M * N) * bracket


def typeII_hypotheses(M: float, N: float, q: int) -> list:
    failed = []
    if not 1 <= M <= N * q ** 0.25:
        failed.append("1 <= M <= N q^{1/4}")
    if not q ** 0.25 < M * N < q ** 1.25:
        failed.append("q^{1/4} < MN < q^{5/4}")
    return failed


def thm_typeII_bound(M: int, N: int, q: int, l2_alpha: float, l2_beta: float) -> float:
    """General-coefficients bracket
    l2 l2 (MN)^{1/2} (M^{-1/2} + (MN)^{-3/16} q^{11/64})."""
    failed = typeII_hypotheses(M, N, q)
    if failed:
        raise HypothesisViolated("general bound out of range: " + "; ".join(failed),
                                 failed)
    bracket = M ** -0.5 + (M * N) ** (-3 / 16) * q ** (11 / 64)
    return l2_alpha * l2_beta * math.sqrt(M * N) * bracket


def typeI_hypotheses(M: float, N: float, q: int) -> list:
    failed = []
    if not 1 <= M <= N * N:
        failed.append("1 <= M <= N^2")
    if not N < q:
        failed.append("N < q")
    if not M * N < q ** 1.5:
        failed.append("MN < q^{3/2}")
    return failed


def thm_typeI_bound(M: int, N: int, q: int, l1_alpha: float, l2_alpha: float) -> float:
    """Smooth-interval bracket
    l1^{1/2} l2^{1/2} M^{1/4} N (M^2 N^5 / q^3)^{-1/12}."""
    failed = typeI_hypotheses(M, N, q)
    if failed:
        raise HypothesisViolated("special bound out of range: " + "; ".join(failed),
                                 failed)
    return (math.sqrt(l1_alpha * l2_alpha) * M ** 0.25 * N
            * (M * M * N ** 5 / q ** 3) ** (-1 / 12))


# exponent-level forms: M = q^{eM}, N = q^{eN} ---------------------------

def typeII_bracket_exponent(eM: float, eN: float) -> float:
    """q-exponent of the dominant general-bracket term."""
    return max(-eM / 2, -3 * (eM + eN) / 16 + 11 / 64)


def typeI_bracket_exponent(eM: float, eN: float) -> float:
    """q-exponent of (M^2 N^5 / q^3)^{-1/12}."""
    return -(2 * eM + 5 * eN - 3) / 12


def typeII_saving_exponent(eM: float, eN: float) -> float:
    return -typeII_bracket_exponent(eM, eN)


def typeI_saving_exponent(eM: float, eN: float) -> float:
    return -typeI_bracket_exponent(eM, eN)


def nontrivial_threshold(kind: str, lo: float = 0.0, hi: float = 1.0,
                         tol: float = 1e-9) -> float:
    """Exponent e where the M = N = q^e saving crosses zero."""
    f = {"general": lambda e: typeII_saving_exponent(e, e),
         "special": lambda e: typeI_saving_exponent(e, e)}[kind]
    if f(lo) > 0 or f(hi) < 0:
        raise ValueError("saving does not change sign on [lo, hi]")
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


# ----------------------------------------------------------------------
# parameter plans
# ----------------------------------------------------------------------

def _plan_flags(A: int, B: int, M: int, N: int, q: int) -> dict:
    return {"2B<q": 2 * B < q, "AB<=N": A * B <= N, "AM<q": A * M < q}


def plan_parameters_typeI(M: int, N: int, q: int) -> ParameterPlan:
    """A = M^{-1/3} N^{2/3}, B = (MN)^{1/3}, rounded to nearest integer >= 1."""
    A = max(1, round(M ** (-1 / 3) * N ** (2 / 3)))
    B = max(1, round((M * N) ** (1 / 3)))
    return ParameterPlan(A=A, B=B, constraints=_plan_flags(A, B, M, N, q))


def plan_parameters_typeII(M: int, N: int, q: int) -> ParameterPlan:
    """A = q^{1/8} (N/M)^{1/2}, B = q^{-1/8} (MN)^{1/2}; AB = N up to rounding."""
    A = max(1, round(q ** 0.125 * math.sqrt(N / M)))
    B = max(1, round(q ** -0.125 * math.sqrt(M * N)))
    return ParameterPlan(A=A, B=B, constraints=_plan_flags(A, B, M, N, q))


# ----------------------------------------------------------------------
# exact shift-by-ab re-indexing
# ----------------------------------------------------------------------

def shift_identity_check(ctx, alpha: np.ndarray, offset: int, N: int,
                         A: int, B: int) -> float:
    """|direct - averaged re-indexed| / (|direct| + 1) for beta = 1 on the
    interval; the identity is an exact re-indexing, so this is float noise."""
    q = ctx.field.q
    M = len(alpha)
    failed = [name for name, ok in _plan_flags(A, B, M, N, q).items() if not ok]
    if any(a % q == 0 for a in range(A + 1, 2 * A + 1)):
        failed.append("a invertible mod q")
    if failed:
        raise ConstraintViolated("averaging parameters out of range: "
                                 + "; ".join(failed), failed)
    inst = BilinearInstance(M=M, N=N, offset=offset, alpha=np.asarray(alpha),
                            beta=np.ones(N, dtype=np.complex128), c=ctx.c)
    direct = bilinear_form(ctx, inst)
    tv = ctx.twisted
    acc = 0j
    m = np.arange(1, M + 1, dtype=np.int64)
    for a in range(A + 1, 2 * A + 1):
        abar = pow(a, q - 2, q)
        for b in range(B + 1, 2 * B + 1):
            # n + ab in the interval  <=>  n in [offset - ab, offset + N - 1 - ab]
            n = np.arange(offset - a * b, offset + N - a * b, dtype=np.int64)
            idx = (a * m[:, None] % q) * ((abar * n[None, :] + b) % q) % q
            acc += (np.asarray(alpha) @ tv[idx]).sum()
    averaged = acc / (A * B)
    return float(abs(direct - averaged) / (abs(direct) + 1))


# ----------------------------------------------------------------------
# extremal oracle
# ----------------------------------------------------------------------

def operator_norm(ctx, M: int, N: int, offset: int = 1, tol: float = 1e-10,
                  max_iter: int = 10**4) -> float:
    """Largest singular value of [Kl_k(c m n)] by power iteration on the Gram
    matrix, deterministic all-ones start."""
    A = kloosterman_matrix(ctx, M, N, offset)
    v = np.ones(N, dtype=np.complex128)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = A @ v
        u = A.conj().T @ w
        nu = np.linalg.norm(u)
        if nu == 0:
            return 0.0
        new_sigma = float(np.linalg.norm(w))  # ||Av|| with ||v|| = 1
        v = u / nu
        gap = abs(new_sigma - sigma)
        sigma = new_sigma
        if gap < tol * max(1.0, sigma):
            return sigma
    raise NoConvergence(f"power iteration stalled at sigma = {sigma} (gap {gap})",
                        last_value=sigma, gap=gap)


def operator_norm_dense(ctx, M: int, N: int, offset: int = 1) -> float:
    """Dense SVD oracle for small matrices."""
    return float(np.linalg.svd(kloosterman_matrix(ctx, M, N, offset),
                               compute_uv=False)[0])


# ----------------------------------------------------------------------
# ensemble sweeps
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    sizes: tuple  # iterable of (M, N)
    ensembles: tuple = ("steinhaus", "rademacher", "ones")
    seed: int = 1
    offset: int = 1
    measure_opnorm: bool = False


def _draw_coeffs(ensemble: str, n: int, rng) -> np.ndarray:
    if ensemble == "steinhaus":
        return np.exp(2j * math.pi * rng.random(n))
    if ensemble == "rademacher":
        return rng.choice((-1.0, 1.0), size=n).astype(np.complex128)
    if ensemble == "ones":
        return np.ones(n, dtype=np.complex128)
    raise ValueError(f"unknown ensemble {ensemble!r}")


def saving_sweep(ctx, spec: SweepSpec) -> list:
    """BoundReport rows over the named coefficient ensembles."""
    q = ctx.field.q
    out = []
    rng = np.random.default_rng(spec.seed)
    for M, N in spec.sizes:
        for ens in spec.ensembles:
            alpha = _draw_coeffs(ens, M, rng)
            beta = _draw_coeffs(ens, N, rng)
            inst = BilinearInstance(M=M, N=N, offset=spec.offset,
                                    alpha=alpha, beta=beta, c=ctx.c)
            measured = abs(bilinear_form(ctx, inst))
            triv = trivial_bound(inst)
            flags = []
            if np.abs(alpha).max() > 1 + 1e-12:
                flags.append("alpha exceeds 1")
            try:
                t11 = thm_typeII_bound(M, N, q, inst.l2_alpha, inst.l2_beta)
            except HypothesisViolated as e:
                t11 = math.nan
                flags.extend(f"thm11: {c}" for c in e.failed)
            try:
                t12 = thm_typeI_bound(M, N, q, inst.l1_alpha, inst.l2_alpha)
            except HypothesisViolated as e:
                t12 = math.nan
                flags.extend(f"thm12: {c}" for c in e.failed)
            gamma = math.log(triv / measured, q) if measured > 0 else math.inf
            out.append(BoundReport(
                q=q, k=ctx.k, c=ctx.c, M=M, N=N, offset=spec.offset,
                ensemble=ens, seed=spec.seed, measured=measured, trivial=triv,
                pv=pv_bound(inst, q), thm11=t11, thm12=t12, gamma=gamma,
                flags=tuple(flags), plan=plan_parameters_typeII(M, N, q)))
    return out
