"""Four-fold Kloosterman product kernels and their complete-sum statistics.

The central objects, for a twisted table K_c(x) = Kl_k(c*x) and a shift tuple
b = (b1, b2, b3, b4):

* ``big_k(r, s, lam, b)``   -- psi(lam*s) * K_c(s(r+b1)) K_c(s(r+b2))
                               * conj(K_c(s(r+b3)) K_c(s(r+b4)))
* ``big_r(r, lam, b)``      -- sum of big_k over all s (the discrete Fourier
                               transform in lam of the s-slice); the s = 0
                               term vanishes because the table is 0 at 0.

On top of these sit the complete sums over r, the incomplete (r, s)-range
sums appearing in the shift-by-ab reduction, second moments computed through
the exact Plancherel shortcut, and scanning utilities that measure normalized
cancellation ratios over sampled shift tuples.

A tuple is *diagonal* when its coordinates pair up (the even-multiplicity
rule for k even, equal two-element multisets for k odd); on diagonal tuples
square-root cancellation provably degrades, so scans treat them separately.
We call a tuple *generic* when its coordinates are pairwise distinct and it
avoids every hyperplane b1 + z2*b2 - z3*b3 - z4*b4 = 0 with (z2, z3, z4)
k-th roots of unity in F_q summing to zero against 1; those hyperplanes are
the degenerate directions visible in the data (they contain the diagonal
pairings and produce measurably inflated correlation sums).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (BadPair, NotDistinct, RangeTooLarge, ResourceLimit,
                     WrongParity, ZeroS)
from .fields import roots_of_unity
from .kloosterman import KloostermanTable, _mul_perm

FULL_SCAN_MAX_Q = 31
DEFAULT_SAMPLES = 2000
GRID_CAP = 1 << 24


@dataclass(frozen=True)
class SumProductContext:
    """A Kloosterman table together with the multiplicative twist c."""

    table: KloostermanTable
    c: int = 1
    twisted: np.ndarray = dc_field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.c % self.table.field.size == 0:
            raise ValueError("twist c must be nonzero")
        tw = self.table.values[_mul_perm(self.table.field, self.c % self.table.field.size)]
        tw.setflags(write=False)
        object.__setattr__(self, "twisted", tw)

    @property
    def field(self):
        return self.table.field

    @property
    def k(self):
        return self.table.k


@dataclass(frozen=True)
class ShiftTuple:
    """A 4-tuple of shifts with its pairing classification."""

    b: tuple
    k_parity_class: str  # "Sp" for k even, "SL" for k odd
    classification: str  # "diagonal" or "generic"


@dataclass(frozen=True)
class RatioReport:
    """A normalized cancellation statistic measured over a sample."""

    statistic: str
    sample: str
    max_ratio: float
    mean_ratio: float
    normalization_exponent: float


def classify_tuple(b, k: int) -> str:
    """'diagonal' or 'generic' per the even-multiplicity / equal-pair rule."""
    b = tuple(b)
    if k % 2 == 0:
        counts = Counter(b)
        return "diagonal" if all(v % 2 == 0 for v in counts.values()) else "generic"
    return "diagonal" if Counter(b[:2]) == Counter(b[2:]) else "generic"


def shift_tuple(b, k: int) -> ShiftTuple:
    return ShiftTuple(b=tuple(b), k_parity_class="Sp" if k % 2 == 0 else "SL",
                      classification=classify_tuple(b, k))


# ----------------------------------------------------------------------
# genericity
# ----------------------------------------------------------------------

def zero_sum_patterns(field, k: int):
    """(z2, z3, z4) in mu_k(F_{q^d})^3 with 1 + z2 - z3 - z4 = 0."""
    zs = roots_of_unity(field, k)
    out = []
    for z2 in zs:
        for z3 in zs:
            for z4 in zs:
                if field.add(field.add(1, z2), field.neg(field.add(z3, z4))) == 0:
                    out.append((z2, z3, z4))
    return out


def is_generic_tuple(b, k: int, field) -> bool:
    """Pairwise distinct and off every zero-sum-pattern hyperplane."""
    b = tuple(b)
    if len(set(b)) < 4:
        return False
    for z2, z3, z4 in zero_sum_patterns(field, k):
        v = field.add(b[0], field.mul(z2, b[1]))
        v = field.sub(v, field.mul(z3, b[2]))
        v = field.sub(v, field.mul(z4, b[3]))
        if v == 0:
            return False
    return True


def sample_generic_tuples(field, k: int, n: int, rng) -> np.ndarray:
    """n seeded generic tuples, as an (n, 4) int array of encodings."""
    q = field.size
    pats = np.array(zero_sum_patterns(field, k), dtype=np.int64).reshape(-1, 3)
    out = np.empty((n, 4), dtype=np.int64)
    got = 0
    while got < n:
        batch = rng.integers(0, q, size=(2 * (n - got) + 16, 4))
        ok = ((batch[:, 0] != batch[:, 1]) & (batch[:, 0] != batch[:, 2])
              & (batch[:, 0] != batch[:, 3]) & (batch[:, 1] != batch[:, 2])
              & (batch[:, 1] != batch[:, 3]) & (batch[:, 2] != batch[:, 3]))
        if field.degree == 1:
            for z2, z3, z4 in pats:
                ok &= (batch[:, 0] + z2 * batch[:, 1]
                       - z3 * batch[:, 2] - z4 * batch[:, 3]) % q != 0
        else:
            keep = np.nonzero(ok)[0]
            mask = np.array([is_generic_tuple(tuple(int(x) for x in batch[i]), k, field)
                             for i in keep], dtype=bool)
            ok = np.zeros(len(batch), dtype=bool)
            ok[keep[mask]] = True
        sel = batch[ok]
        take = min(len(sel), n - got)
        out[got:got + take] = sel[:take]
        got += take
    return out


# ----------------------------------------------------------------------
# index helpers (d = 1 fast path, dense tables otherwise)
# ----------------------------------------------------------------------

def _vec_ops(field):
    if field.degree == 1:
        q = field.q
        return (lambda a, b: (a + b) % q), (lambda a, b: (a * b) % q)
    at, mt = field.add_table(), field.mul_table()
    return (lambda a, b: at[a, b]), (lambda a, b: mt[a, b])


def _psi_column(ctx, lam: int) -> np.ndarray:
    """psi(lam * s) for all s, as a vector indexed by s."""
    f = ctx.field
    _, mul = _vec_ops(f)
    return f.psi_vec[mul(lam, np.arange(f.size, dtype=np.int64))]


def product_grid(ctx, b) -> np.ndarray:
    """G[r, s] = K_c(s(r+b1)) K_c(s(r+b2)) conj(K_c(s(r+b3)) K_c(s(r+b4)))."""
    f = ctx.field
    Q = f.size
    if Q * Q > GRID_CAP:
        raise ResourceLimit(f"(q^d)^2 grid too large: {Q * Q}")
    add, mul = _vec_ops(f)
    r = np.arange(Q, dtype=np.int64)[:, None]
    s = np.arange(Q, dtype=np.int64)[None, :]
    tv = ctx.twisted
    G = (tv[mul(add(r, b[0]), s)] * tv[mul(add(r, b[1]), s)]
         * np.conj(tv[mul(add(r, b[2]), s)] * tv[mul(add(r, b[3]), s)]))
    return G


def big_k(ctx, r: int, s: int, lam: int, b) -> complex:
    f = ctx.field
    tv = ctx.twisted
    t = complex(f.psi_vec[f.mul(lam, s)])
    t *= complex(tv[f.mul(s, f.add(r, b[0]))]) * complex(tv[f.mul(s, f.add(r, b[1]))])
    t *= np.conj(complex(tv[f.mul(s, f.add(r, b[2]))]) * complex(tv[f.mul(s, f.add(r, b[3]))]))
    return t


def big_r(ctx, r: int, lam: int, b) -> complex:
    """Sum of big_k over every s (the table's zero at 0 kills the s=0 term)."""
    f = ctx.field
    assert ctx.twisted[0] == 0
    add, mul = _vec_ops(f)
    s = np.arange(f.size, dtype=np.int64)
    tv = ctx.twisted
    prod = (tv[mul(s, add(r, b[0]))] * tv[mul(s, add(r, b[1]))]
            * np.conj(tv[mul(s, add(r, b[2]))] * tv[mul(s, add(r, b[3]))]))
    return complex(prod @ _psi_column(ctx, lam))


def r_profile(ctx, lam: int, b) -> np.ndarray:
    """big_r(r, lam, b) for every r, via one grid and one matvec."""
    return product_grid(ctx, b) @ _psi_column(ctx, lam)


def complete_sum_over_r(ctx, s: int, b) -> complex:
    if s % ctx.field.size == 0:
        raise ZeroS("s must be a unit")
    f = ctx.field
    add, mul = _vec_ops(f)
    r = np.arange(f.size, dtype=np.int64)
    tv = ctx.twisted
    prod = (tv[mul(s, add(r, b[0]))] * tv[mul(s, add(r, b[1]))]
            * np.conj(tv[mul(s, add(r, b[2]))] * tv[mul(s, add(r, b[3]))]))
    return complex(prod.sum())


def complete_corr_over_r(ctx, s1: int, s2: int, b) -> complex:
    """The 8-fold product sum over r for a pair s1 != s2 of units."""
    Q = ctx.field.size
    if s1 % Q == 0 or s2 % Q == 0 or s1 % Q == s2 % Q:
        raise BadPair("need nonzero s1 != s2")
    f = ctx.field
    add, mul = _vec_ops(f)
    r = np.arange(Q, dtype=np.int64)
    tv = ctx.twisted

    def slice_at(s):
        return (tv[mul(s, add(r, b[0]))] * tv[mul(s, add(r, b[1]))]
                * np.conj(tv[mul(s, add(r, b[2]))] * tv[mul(s, add(r, b[3]))]))

    return complex((slice_at(s1) * np.conj(slice_at(s2))).sum())


def r_linear_sum(ctx, lam: int, b) -> complex:
    """Sum over r of big_r(r, lam, b)."""
    col = product_grid(ctx, b).sum(axis=0)
    return complex(col @ _psi_column(ctx, lam))


def r_correlation(ctx, lam1: int, lam2: int, b) -> complex:
    """Sum over r of big_r(r, lam1, b) * conj(big_r(r, lam2, b))."""
    G = product_grid(ctx, b)
    R1 = G @ _psi_column(ctx, lam1)
    R2 = G @ _psi_column(ctx, lam2)
    return complex(R1 @ np.conj(R2))


def _require_distinct(b):
    if len(set(b)) < 4:
        raise NotDistinct(f"tuple {tuple(b)} has repeated coordinates")


def second_moment_r_lambda(ctx, b) -> float:
    """(1/Q^2) sum_{r,lam} |big_r|^2 via the exact Plancherel shortcut.

    Plancherel in lam collapses the double sum to (1/Q) sum_{r,s} |G[r,s]|^2.
    """
    _require_distinct(b)
    G = product_grid(ctx, b)
    Q = ctx.field.size
    return float((np.abs(G) ** 2).sum() / Q)


def second_moment_r_lambda_naive(ctx, b) -> float:
    """Literal double sum over (r, lam); cross-check at tiny sizes."""
    _require_distinct(b)
    Q = ctx.field.size
    if Q > 256:
        raise ResourceLimit("naive second moment is O(Q^3); use the shortcut")
    G = product_grid(ctx, b)
    _, mul = _vec_ops(ctx.field)
    ids = np.arange(Q, dtype=np.int64)
    psi_mat = ctx.field.psi_vec[mul(ids[:, None], ids[None, :])]  # [s, lam]
    R = G @ psi_mat
    return float((np.abs(R) ** 2).sum() / Q**2)


def noncorrelation_moment(ctx, b) -> complex:
    """(1/Q^2) sum_{r,lam} big_r(r,lam,b) conj(big_r(r,-lam,b)), k odd.

    Averaging over lam pairs s with -s', so the double sum collapses exactly
    to (1/Q) sum_{r,s} G[r,s] conj(G[r,-s]).
    """
    if ctx.k % 2 == 0:
        raise WrongParity("defined for odd k only")
    _require_distinct(b)
    f = ctx.field
    G = product_grid(ctx, b)
    neg = np.zeros(f.size, dtype=np.int64)
    q = f.q
    ids = np.arange(f.size, dtype=np.int64)
    for i in range(f.degree):
        neg += ((q - ids // q**i % q) % q) * q**i
    return complex((G * np.conj(G[:, neg])).sum() / f.size)


def correlation_matrix_cdiag(ctx) -> np.ndarray:
    """C(s, s') = (1/Q) sum_b K_c(s b) conj(K_c(s' b)) for all (s, s')."""
    f = ctx.field
    Q = f.size
    if Q > 5000:
        raise ResourceLimit("correlation matrix is O(Q^3)")
    _, mul = _vec_ops(f)
    ids = np.arange(Q, dtype=np.int64)
    M = ctx.twisted[mul(ids[:, None], ids[None, :])]  # [s, b]
    return (M @ np.conj(M.T)) / Q


def full_average_moment(ctx) -> float:
    """(1/Q^5) sum_{r, b} |big_r(r, 0, b)|^2, via the correlation reduction.

    Shifting r into the tuple and expanding the square turns the five-fold
    average into sum over unit pairs (s, s') of |C(s,s')|^2 |C(s',s)|^2.
    """
    C = correlation_matrix_cdiag(ctx)
    Cu = C[1:, 1:]
    return float((np.abs(Cu) ** 2 * np.abs(Cu.T) ** 2).sum().real)


def full_average_moment_naive(ctx) -> float:
    """Literal five-fold average; only for q^d <= 13."""
    f = ctx.field
    Q = f.size
    if Q > 13:
        raise ResourceLimit("naive five-fold average is O(Q^6)")
    total = 0.0
    psi0 = np.ones(Q, dtype=np.complex128)
    for b1 in range(Q):
        for b2 in range(Q):
            for b3 in range(Q):
                for b4 in range(Q):
                    R = product_grid(ctx, (b1, b2, b3, b4)) @ psi0
                    total += float((np.abs(R) ** 2).sum())
    return total / Q**5


# ----------------------------------------------------------------------
# incomplete sums (d = 1)
# ----------------------------------------------------------------------

def _require_prime_field(ctx):
    if ctx.field.degree != 1:
        raise ValueError("incomplete sums are defined over the prime field")


def sigma_incomplete(ctx, b, A: int, M: int, cap: int = GRID_CAP) -> complex:
    """Sum over r mod q and integer 1 <= s <= 2AM of the 4-fold product."""
    _require_prime_field(ctx)
    q = ctx.field.q
    smax = 2 * A * M
    if smax < 0 or q * max(smax, 1) > cap:
        raise RangeTooLarge(f"s-range 2AM = {smax} too large")
    if smax == 0:
        return 0j
    tv = ctx.twisted
    r = np.arange(q, dtype=np.int64)[:, None]
    s = np.arange(1, smax + 1, dtype=np.int64)[None, :] % q
    G = (tv[s * (r + b[0]) % q] * tv[s * (r + b[1]) % q]
         * np.conj(tv[s * (r + b[2]) % q] * tv[s * (r + b[3]) % q]))
    return complex(G.sum())


def sigma_neq(ctx, b, AM: int, cap: int = GRID_CAP) -> complex:
    """Sum over r mod q and 1 <= s1, s2 <= AM with s1 != s2 mod q of the
    8-fold product."""
    _require_prime_field(ctx)
    q = ctx.field.q
    if AM < 0 or (2 * AM) ** 2 * q > cap:
        raise RangeTooLarge(f"(2AM)^2 q = {(2 * AM) ** 2 * q} exceeds cap")
    if AM <= 1:
        return 0j
    tv = ctx.twisted
    r = np.arange(q, dtype=np.int64)[:, None]
    s = np.arange(1, AM + 1, dtype=np.int64)[None, :]
    smod = s % q
    G = (tv[smod * (r + b[0]) % q] * tv[smod * (r + b[1]) % q]
         * np.conj(tv[smod * (r + b[2]) % q] * tv[smod * (r + b[3]) % q]))
    rows = G.sum(axis=1)
    total = (np.abs(rows) ** 2).sum()
    # remove the pairs with s1 = s2 mod q, grouped by residue class
    res = np.asarray(smod[0])
    for t in np.unique(res):
        cls = G[:, res == t].sum(axis=1)
        total -= (np.abs(cls) ** 2).sum()
    return complex(total)


# ----------------------------------------------------------------------
# scanning
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ScanSpec:
    """Sampling plan for tuple scans (exhaustive below FULL_SCAN_MAX_Q)."""

    n_samples: int = DEFAULT_SAMPLES
    seed: int = 1
    lambdas: tuple = (0, 1)
    batch: int = 64


@dataclass(frozen=True)
class ScanRow:
    b: tuple
    classification: str
    ratio_r_linear: float
    ratio_corr: float
    flagged: bool
    reason: str


@dataclass(frozen=True)
class ScanResult:
    rows: list
    thresholds: dict
    flagged_fraction: float
    expected_fraction: float  # Schwarz-Zippel style deg/q yardstick
    spec: ScanSpec
    exhaustive: bool


def _batched_tuple_stats(ctx, tuples: np.ndarray, lambdas, batch: int = 64):
    """Per-tuple max |sum_r R|/q^d and off-diagonal |sum_r R conj(R')|/q^{3d/2}."""
    f = ctx.field
    Q = f.size
    add, mul = _vec_ops(f)
    tv = ctx.twisted
    r = np.arange(Q, dtype=np.int64)[None, :, None]
    s = np.arange(Q, dtype=np.int64)[None, None, :]
    lam_cols = np.stack([_psi_column(ctx, int(l)) for l in lambdas], axis=1)
    n = len(tuples)
    lin = np.empty(n)
    corr = np.empty(n)
    for lo in range(0, n, batch):
        tb = tuples[lo:lo + batch]
        m = len(tb)
        G = (tv[mul(add(r, tb[:, 0, None, None]), s)]
             * tv[mul(add(r, tb[:, 1, None, None]), s)]
             * np.conj(tv[mul(add(r, tb[:, 2, None, None]), s)]
                       * tv[mul(add(r, tb[:, 3, None, None]), s)]))
        R = G.reshape(m * Q, Q) @ lam_cols
        R = R.reshape(m, Q, len(lambdas))
        rsum = R.sum(axis=1)
        lin[lo:lo + m] = np.abs(rsum).max(axis=1) / Q
        CM = np.einsum("bri,brj->bij", R, np.conj(R))
        il, jl = np.triu_indices(len(lambdas), k=1)
        off = np.abs(CM[:, il, jl])
        corr[lo:lo + m] = (off.max(axis=1) if len(il) else 0.0) / Q**1.5
    return lin, corr


def scan_bad_tuples(ctx, thresholds: dict | None = None,
                    spec: ScanSpec = ScanSpec()) -> ScanResult:
    """Flag diagonal tuples and tuples whose normalized sums spike.

    Default thresholds are 3x the sample median of each ratio; with infinite
    thresholds only diagonal tuples are flagged.
    """
    f = ctx.field
    Q = f.size
    exhaustive = Q <= FULL_SCAN_MAX_Q
    if exhaustive:
        ids = np.arange(Q, dtype=np.int64)
        tuples = np.stack(np.meshgrid(ids, ids, ids, ids, indexing="ij"),
                          axis=-1).reshape(-1, 4)
    else:
        rng = np.random.default_rng(spec.seed)
        tuples = rng.integers(0, Q, size=(spec.n_samples, 4))
    lin, corr = _batched_tuple_stats(ctx, tuples, spec.lambdas, spec.batch)
    classes = [classify_tuple(tuple(int(x) for x in t), ctx.k) for t in tuples]
    if thresholds is None:
        nondiag = np.array([c == "generic" for c in classes])
        thresholds = {
            "r_linear": 3.0 * float(np.median(lin[nondiag])),
            "corr": 3.0 * float(np.median(corr[nondiag])) if len(spec.lambdas) > 1 else math.inf,
        }
    rows = []
    flagged = 0
    for i, t in enumerate(tuples):
        reason = ""
        if classes[i] == "diagonal":
            reason = "diagonal"
        elif lin[i] > thresholds["r_linear"]:
            reason = "r_linear"
        elif corr[i] > thresholds["corr"]:
            reason = "corr"
        if reason:
            flagged += 1
        rows.append(ScanRow(b=tuple(int(x) for x in t), classification=classes[i],
                            ratio_r_linear=float(lin[i]), ratio_corr=float(corr[i]),
                            flagged=bool(reason), reason=reason))
    return ScanResult(rows=rows, thresholds=thresholds,
                      flagged_fraction=flagged / len(tuples),
                      expected_fraction=1.0 / Q, spec=spec, exhaustive=exhaustive)


def ratio_scan(ctx, n_samples: int = 500, seed: int = 1, replicates: int = 1):
    """The four normalized cancellation statistics over seeded generic samples.

    Per replicate draws ``n_samples`` generic tuples b with companion draws of
    s, lambda1 != lambda2, and measures

    * K:  |sum_r 4-fold product at (s, b)| / q^{d/2}
    * R:  |sum_r big_r(r, lam1, b)| / q^d
    * C:  |sum_r big_r(r, lam1) conj(big_r(r, lam2))| / q^{3d/2}
    * D:  |sum_r |big_r(r, lam1)|^2 - q^{2d}| / q^{3d/2}

    Returns {name: RatioReport}, with max_ratio averaged over replicates
    (the averaging tames the extreme-value noise of a single max).
    """
    f = ctx.field
    Q = f.size
    add, mul = _vec_ops(f)
    tv = ctx.twisted
    rng = np.random.default_rng(seed)
    rep_max = {name: [] for name in "KRCD"}
    rep_mean = {name: [] for name in "KRCD"}
    r = np.arange(Q, dtype=np.int64)[None, :, None]
    s = np.arange(Q, dtype=np.int64)[None, None, :]
    batch = 64
    for _ in range(replicates):
        tuples = sample_generic_tuples(f, ctx.k, n_samples, rng)
        svals = rng.integers(1, Q, size=n_samples)
        lam1 = rng.integers(0, Q, size=n_samples)
        lam2 = (lam1 + rng.integers(1, Q, size=n_samples)) % Q
        vals = {name: np.empty(n_samples) for name in "KRCD"}
        for lo in range(0, n_samples, batch):
            tb = tuples[lo:lo + batch]
            m = len(tb)
            G = (tv[mul(add(r, tb[:, 0, None, None]), s)]
                 * tv[mul(add(r, tb[:, 1, None, None]), s)]
                 * np.conj(tv[mul(add(r, tb[:, 2, None, None]), s)]
                           * tv[mul(add(r, tb[:, 3, None, None]), s)]))
            col = G.sum(axis=1)  # [m, s] = sum over r
            vals["K"][lo:lo + m] = np.abs(col[np.arange(m), svals[lo:lo + m]]) / Q**0.5
            psi1 = f.psi_vec[mul(lam1[lo:lo + m, None], s[0])]  # [m, s]
            psi2 = f.psi_vec[mul(lam2[lo:lo + m, None], s[0])]
            R1 = np.matmul(G, psi1[:, :, None])[:, :, 0]
            R2 = np.matmul(G, psi2[:, :, None])[:, :, 0]
            vals["R"][lo:lo + m] = np.abs(R1.sum(axis=1)) / Q
            vals["C"][lo:lo + m] = np.abs((R1 * np.conj(R2)).sum(axis=1)) / Q**1.5
            vals["D"][lo:lo + m] = np.abs((np.abs(R1) ** 2).sum(axis=1) - Q * Q) / Q**1.5
        for name in "KRCD":
            rep_max[name].append(vals[name].max())
            rep_mean[name].append(vals[name].mean())
    norm = {"K": 0.5, "R": 1.0, "C": 1.5, "D": 1.5}
    desc = (f"q={f.q} d={f.degree} k={ctx.k} c={ctx.c} n={n_samples} "
            f"seed={seed} replicates={replicates}")
    return {name: RatioReport(statistic=name, sample=desc,
                              max_ratio=float(np.mean(rep_max[name])),
                              mean_ratio=float(np.mean(rep_mean[name])),
                              normalization_exponent=norm[name])
            for name in "KRCD"}
