"""Prime fields F_q and extensions F_{q^d}: arithmetic, traces, characters.

Elements of F_{q^d} are encoded as integers in [0, q^d) via base-q digits
(constant coefficient first), so an element sum_i c_i x^i maps to
sum_i c_i q^i.  All tables (powers of the generator, discrete logs, traces,
additive-character values) are indexed by that encoding.  The extension
modulus is chosen deterministically as the irreducible monic polynomial of
degree d whose non-leading coefficient encoding is smallest, so tables are
reproducible across runs.

Fields are immutable after construction; every operation is a pure function
of its inputs.
"""

from __future__ import annotations

import cmath
import math
from functools import lru_cache

import numpy as np

from .errors import CompositeModulus, ResourceLimit, TooSmall

# Largest field for which the dense Q x Q add/mul tables may be built.
PAIR_TABLE_CAP = 2048
# Largest field for which generator power / discrete log tables are built.
DLOG_TABLE_CAP = 10**7

_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _factor(n: int) -> list[int]:
    """Distinct prime factors by trial division (n <= ~1e14 at desk scale)."""
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out.append(n)
    return out


# ----------------------------------------------------------------------
# polynomial helpers over F_q (coefficient lists, low degree first)
# ----------------------------------------------------------------------

def _poly_trim(a):
    while a and a[-1] == 0:
        a.pop()
    return a


def _poly_mulmod(a, b, mod, q):
    """a*b reduced modulo the monic polynomial `mod`."""
    res = [0] * (len(a) + len(b) - 1) if a and b else []
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                res[i + j] = (res[i + j] + ai * bj) % q
    return _poly_rem(res, mod, q)


def _poly_rem(a, mod, q):
    a = list(a)
    dm = len(mod) - 1
    for i in range(len(a) - 1, dm - 1, -1):
        c = a[i]
        if c:
            a[i] = 0
            for j in range(dm):
                a[i - dm + j] = (a[i - dm + j] - c * mod[j]) % q
    _poly_trim(a)
    return a


def _poly_powmod(a, e, mod, q):
    result = [1]
    base = _poly_rem(a, mod, q)
    while e:
        if e & 1:
            result = _poly_mulmod(result, base, mod, q)
        base = _poly_mulmod(base, base, mod, q)
        e >>= 1
    return result


def _poly_gcd(a, b, q):
    a, b = list(a), list(b)
    while b:
        # a mod b with b made monic
        lead_inv = pow(b[-1], q - 2, q)
        bm = [(c * lead_inv) % q for c in b]
        a = _poly_rem(a, bm, q)
        a, b = b, a
    return a


def _is_irreducible(mod, q, d):
    """Rabin test: x^{q^d} = x mod f, and gcd(x^{q^{d/p}} - x, f) = 1."""
    x = [0, 1]
    xqd = _poly_powmod(x, q**d, mod, q)
    if xqd != [0, 1]:
        return False
    for p in _factor(d):
        e = d // p
        xe = _poly_powmod(x, q**e, mod, q)
        diff = list(xe) + [0] * (2 - len(xe))
        diff[1] = (diff[1] - 1) % q
        g = _poly_gcd(list(mod), _poly_trim(diff), q)
        if len(g) != 1:
            return False
    return True


# ----------------------------------------------------------------------
# fields
# ----------------------------------------------------------------------

class PrimeField:
    """F_q for an odd prime q, with generator/dlog and character tables."""

    def __init__(self, q: int):
        if q < 3:
            raise TooSmall(f"q = {q}: need an odd prime >= 3")
        if not is_prime(q):
            raise CompositeModulus(f"q = {q} is not prime")
        self.q = q
        self.degree = 1
        self.size = q
        self.modulus = (0, 1)  # the polynomial x
        self._build_tables()

    def _build_tables(self):
        q = self.size
        self.generator = self._find_generator()
        if q <= DLOG_TABLE_CAP:
            exp = np.empty(q - 1, dtype=np.int64)
            e = 1
            for j in range(q - 1):
                exp[j] = e
                e = self._mul_int(e, self.generator)
            self.exp_table = exp
            log = np.full(q, -1, dtype=np.int64)
            log[exp] = np.arange(q - 1)
            self.log_table = log
        else:  # pragma: no cover - beyond desk scale
            raise ResourceLimit(f"field size {q} exceeds dlog table cap")
        self.trace_vec = self._trace_vec()
        root = cmath.exp(2j * math.pi / self.q)
        self.psi_vec = np.asarray(root, dtype=np.complex128) ** self.trace_vec
        inv = np.zeros(q, dtype=np.int64)
        inv[self.exp_table] = self.exp_table[(-np.arange(q - 1)) % (q - 1)]
        self.inv_table = inv

    # integer-encoding arithmetic -------------------------------------
    def _mul_int(self, a, b):
        return a * b % self.q

    def _add_int(self, a, b):
        return (a + b) % self.q

    def _trace_vec(self):
        return np.arange(self.q, dtype=np.int64)

    def _find_generator(self):
        L = self.size - 1
        primes = _factor(L)
        for g in range(2, self.size):
            if all(self._pow_int(g, L // p) != 1 for p in primes):
                return g
        raise RuntimeError("no generator found")  # pragma: no cover

    def _pow_int(self, a, e):
        return pow(a, e, self.q)

    # public ops -------------------------------------------------------
    def add(self, a, b):
        return (a + b) % self.q

    def sub(self, a, b):
        return (a - b) % self.q

    def neg(self, a):
        return (-a) % self.q

    def mul(self, a, b):
        return a * b % self.q

    def inv(self, a):
        if a % self.q == 0:
            raise ZeroDivisionError("inverse of zero")
        return pow(a, self.q - 2, self.q)

    def pow(self, a, e):
        if e < 0:
            return pow(self.inv(a), -e, self.q)
        return pow(a, e, self.q)

    def trace(self, a):
        return a % self.q

    def add_vec(self, a, b):
        return (a + b) % self.q

    def mul_vec(self, a, b):
        return a * b % self.q

    def __repr__(self):
        return f"PrimeField(q={self.q})"

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.q == self.q and other.degree == 1

    def __hash__(self):
        return hash(("PrimeField", self.q))


class ExtField:
    """F_{q^d} as polynomials modulo a fixed monic irreducible of degree d."""

    def __init__(self, base: PrimeField, d: int, modulus=None):
        if d < 1:
            raise ValueError("extension degree must be >= 1")
        self.base = base
        self.q = base.q
        self.degree = d
        self.size = base.q**d
        if modulus is None:
            modulus = _smallest_irreducible(base.q, d)
        else:
            modulus = tuple(int(c) % base.q for c in modulus)
            if len(modulus) != d + 1 or modulus[-1] != 1:
                raise ValueError("modulus must be monic of degree d")
            if not _is_irreducible(list(modulus), base.q, d):
                raise ValueError("modulus is not irreducible")
        self.modulus = tuple(modulus)
        self._build_tables()

    # encoding helpers ---------------------------------------------------
    def decode(self, e):
        q = self.q
        return tuple((e // q**i) % q for i in range(self.degree))

    def encode(self, coeffs):
        q = self.q
        return sum((int(c) % q) * q**i for i, c in enumerate(coeffs))

    # scalar arithmetic on encodings -------------------------------------
    def add(self, a, b):
        q = self.q
        out = 0
        p = 1
        for _ in range(self.degree):
            out += ((a + b) % q) * p
            a //= q
            b //= q
            p *= q
        return out

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def neg(self, a):
        q = self.q
        out = 0
        p = 1
        for _ in range(self.degree):
            out += ((-a) % q) * p
            a //= q
            p *= q
        return out

    def mul(self, a, b):
        pa = list(self.decode(a))
        pb = list(self.decode(b))
        _poly_trim(pa)
        _poly_trim(pb)
        return self.encode(_poly_mulmod(pa, pb, list(self.modulus), self.q) + [0] * self.degree)

    def pow(self, a, e):
        if e < 0:
            return self.pow(self.inv(a), -e)
        pa = list(self.decode(a))
        _poly_trim(pa)
        return self.encode(_poly_powmod(pa, e, list(self.modulus), self.q) + [0] * self.degree)

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        return self.pow(a, self.size - 2)

    def trace(self, a):
        """Tr_{F_{q^d}/F_q}(a) = sum of Frobenius conjugates, a residue mod q."""
        return int(self.trace_vec[a])

    # tables --------------------------------------------------------------
    def _build_tables(self):
        Q, q, d = self.size, self.q, self.degree
        if Q > DLOG_TABLE_CAP:  # pragma: no cover - beyond desk scale
            raise ResourceLimit(f"field size {Q} exceeds dlog table cap")
        # traces of the basis powers x^i: sum_j (x^{q^j})^i, a constant poly
        mod = list(self.modulus)
        frob = [[0, 1]]
        for _ in range(1, d):
            frob.append(_poly_powmod(frob[-1], q, mod, q))
        basis_tr = []
        for i in range(d):
            acc = [0]
            for fj in frob:
                term = _poly_powmod(fj, i, mod, q)
                acc = [(x + y) % q for x, y in
                       zip(acc + [0] * len(term), term + [0] * len(acc))]
            _poly_trim(acc)
            assert len(acc) <= 1, "trace of a basis power must be constant"
            basis_tr.append(acc[0] if acc else 0)
        digits = np.arange(Q, dtype=np.int64)
        tr = np.zeros(Q, dtype=np.int64)
        for i in range(d):
            tr += (digits // q**i % q) * basis_tr[i]
        self.trace_vec = tr % q

        self.generator = self._find_generator()
        exp = np.empty(Q - 1, dtype=np.int64)
        e = 1
        for j in range(Q - 1):
            exp[j] = e
            e = self.mul(e, self.generator)
        self.exp_table = exp
        log = np.full(Q, -1, dtype=np.int64)
        log[exp] = np.arange(Q - 1)
        self.log_table = log
        inv = np.zeros(Q, dtype=np.int64)
        inv[exp] = exp[(-np.arange(Q - 1)) % (Q - 1)]
        self.inv_table = inv
        root = cmath.exp(2j * math.pi / q)
        self.psi_vec = np.asarray(root, dtype=np.complex128) ** self.trace_vec
        self._add_table = None
        self._mul_table = None

    def _find_generator(self):
        L = self.size - 1
        primes = _factor(L)
        for g in range(1, self.size):
            if all(self.pow(g, L // p) != 1 for p in primes):
                return g
        raise RuntimeError("no generator found")  # pragma: no cover

    def add_table(self):
        """Dense Q x Q addition table (encodings); built lazily."""
        if self._add_table is None:
            Q, q, d = self.size, self.q, self.degree
            if Q > PAIR_TABLE_CAP:
                raise ResourceLimit(f"add table needs Q <= {PAIR_TABLE_CAP}, got {Q}")
            ids = np.arange(Q, dtype=np.int64)
            tab = np.zeros((Q, Q), dtype=np.int64)
            for i in range(d):
                da = ids // q**i % q
                tab += ((da[:, None] + da[None, :]) % q) * q**i
            self._add_table = tab
        return self._add_table

    def mul_table(self):
        """Dense Q x Q multiplication table via discrete logs; built lazily."""
        if self._mul_table is None:
            Q = self.size
            if Q > PAIR_TABLE_CAP:
                raise ResourceLimit(f"mul table needs Q <= {PAIR_TABLE_CAP}, got {Q}")
            L = Q - 1
            tab = np.zeros((Q, Q), dtype=np.int64)
            logs = self.log_table[1:]
            tab[1:, 1:] = self.exp_table[(logs[:, None] + logs[None, :]) % L]
            self._mul_table = tab
        return self._mul_table

    def add_vec(self, a, b):
        return self.add_table()[a, b]

    def mul_vec(self, a, b):
        return self.mul_table()[a, b]

    def __repr__(self):
        return f"ExtField(q={self.q}, d={self.degree}, modulus={self.modulus})"

    def __eq__(self, other):
        return (isinstance(other, ExtField) and other.q == self.q
                and other.degree == self.degree and other.modulus == self.modulus)

    def __hash__(self):
        return hash(("ExtField", self.q, self.degree, self.modulus))


@lru_cache(maxsize=None)
def _smallest_irreducible(q: int, d: int):
    """Monic irreducible of degree d with smallest non-leading encoding."""
    if d == 1:
        return (0, 1)
    for tail in range(q**d):
        coeffs = [(tail // q**i) % q for i in range(d)] + [1]
        if _is_irreducible(coeffs, q, d):
            return tuple(coeffs)
    raise RuntimeError("no irreducible polynomial found")  # pragma: no cover


def make_prime_field(q: int) -> PrimeField:
    return PrimeField(q)


def build_extension(f: PrimeField, d: int) -> ExtField:
    return ExtField(f, d)


def trace(field, x: int) -> int:
    return field.trace(x)


def psi(field, lam: int, x: int) -> complex:
    """Additive character psi_lam(x) = e(Tr(lam*x)/q); lam = 0 gives 1."""
    return complex(field.psi_vec[field.mul(lam, x)])


def mult_generator(field) -> int:
    """Smallest-encoding element of full multiplicative order q^d - 1."""
    return field.generator


def roots_of_unity(field, k: int):
    """All solutions of z^k = 1 in the field, ascending by encoding.

    These form the subgroup of order gcd(k, q^d - 1).
    """
    L = field.size - 1
    m = math.gcd(k, L)
    step = L // m
    zs = sorted(int(field.exp_table[(j * step) % L]) for j in range(m))
    return zs
