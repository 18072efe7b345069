"""Integer matrices, toral affine maps and their spectral data.

Integer work (determinant, characteristic polynomial, powers) is exact
with Python ints.  Eigenvalues are the roots of the exact characteristic
polynomial, found by ``numpy.roots`` (companion matrix), polished by a few
Newton steps and cross-checked against ``numpy.linalg.eigvals`` of B.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from ..errors import PreconditionError, SingularMatrix, Unsupported

log = logging.getLogger(__name__)

UNIT_TOL = 1e-8
MAX_IRRED_DEGREE = 6
MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class IntMatrix:
    rows: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in r) for r in self.rows)
        d = len(rows)
        if d < 1 or any(len(r) != d for r in rows):
            raise PreconditionError("matrix must be square with d >= 1")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def of(cls, data) -> "IntMatrix":
        if isinstance(data, IntMatrix):
            return data
        if isinstance(data, str):
            data = json.loads(data)
        if isinstance(data, dict):
            data = data.get("B", data.get("matrix"))
        if isinstance(data, (int, np.integer)):
            data = [[int(data)]]
        arr = [list(r) if isinstance(r, (list, tuple, np.ndarray)) else [r] for r in data]
        for r in arr:
            for v in r:
                if isinstance(v, float) and not v.is_integer():
                    raise PreconditionError(f"non-integer matrix entry {v}")
        return cls(tuple(tuple(int(v) for v in r) for r in arr))

    @classmethod
    def companion(cls, coeffs) -> "IntMatrix":
        """Companion matrix of the monic ``z^d + c_{d-1} z^{d-1} + .. + c_0``,
        coefficients given highest first (leading 1 included)."""
        c = [int(v) for v in coeffs]
        if c[0] != 1:
            raise PreconditionError("companion polynomial must be monic")
        d = len(c) - 1
        rows = [[0] * d for _ in range(d)]
        for i in range(d - 1):
            rows[i][i + 1] = 1
        rows[d - 1] = [-c[d - k] for k in range(d)]
        return cls(tuple(tuple(r) for r in rows))

    @property
    def dim(self) -> int:
        return len(self.rows)

    def to_list(self) -> list:
        return [list(r) for r in self.rows]

    def to_numpy(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)

    def transpose(self) -> "IntMatrix":
        return IntMatrix(tuple(zip(*self.rows)))

    def __matmul__(self, other):
        if isinstance(other, IntMatrix):
            cols = list(zip(*other.rows))
            return IntMatrix(tuple(tuple(sum(a * b for a, b in zip(r, c)) for c in cols) for r in self.rows))
        return tuple(sum(a * b for a, b in zip(r, other)) for r in self.rows)

    def power(self, n: int) -> "IntMatrix":
        """``B^n`` by repeated squaring."""
        if n < 0:
            raise PreconditionError("negative matrix power")
        d = self.dim
        out = IntMatrix(tuple(tuple(int(i == j) for j in range(d)) for i in range(d)))
        base = self
        while n:
            if n & 1:
                out = out @ base
            base = base @ base
            n >>= 1
        return out

    def det(self) -> int:
        """Bareiss fraction-free elimination."""
        a = [list(r) for r in self.rows]
        d = self.dim
        sign, prev = 1, 1
        for k in range(d - 1):
            if a[k][k] == 0:
                for i in range(k + 1, d):
                    if a[i][k]:
                        a[k], a[i] = a[i], a[k]
                        sign = -sign
                        break
                else:
                    return 0
            for i in range(k + 1, d):
                for j in range(k + 1, d):
                    a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
            prev = a[k][k]
        return sign * a[d - 1][d - 1]

    def charpoly(self) -> tuple:
        """Coefficients of ``det(zI - B)``, highest degree first (Faddeev-LeVerrier)."""
        d = self.dim
        ident = [[int(i == j) for j in range(d)] for i in range(d)]
        M = [[0] * d for _ in range(d)]
        coeffs = [1]
        c = 1
        for k in range(1, d + 1):
            # M_k = B M_{k-1} + c_{k-1} I ; c_k = -tr(B M_k) / k
            M = [[sum(self.rows[i][t] * M[t][j] for t in range(d)) + c * ident[i][j]
                  for j in range(d)] for i in range(d)]
            BM_trace = sum(self.rows[i][t] * M[t][i] for i in range(d) for t in range(d))
            num = -BM_trace
            if num % k:
                raise AssertionError("Faddeev-LeVerrier produced a non-integer coefficient")
            c = num // k
            coeffs.append(c)
        return tuple(coeffs)


@dataclass(frozen=True)
class ToralAffineMap:
    """``x -> Bx + b mod 1`` with ``b`` rational."""

    B: IntMatrix
    b: tuple = ()

    def __post_init__(self):
        B = IntMatrix.of(self.B)
        object.__setattr__(self, "B", B)
        b = tuple(Fraction(v) if not isinstance(v, str) else Fraction(v) for v in self.b) \
            if self.b else tuple(Fraction(0) for _ in range(B.dim))
        if len(b) != B.dim:
            raise PreconditionError(f"translation has {len(b)} entries for a {B.dim}x{B.dim} matrix")
        object.__setattr__(self, "b", b)
        if B.det() == 0:
            raise SingularMatrix("det B = 0")

    @classmethod
    def from_json(cls, data) -> "ToralAffineMap":
        if isinstance(data, str):
            data = json.loads(data)
        B = data.get("B", data.get("matrix"))
        if B is None:
            raise PreconditionError("map JSON needs 'B' (or 'matrix')")
        return cls(IntMatrix.of(B), tuple(data.get("b", ())))

    def to_json(self) -> dict:
        return {"B": self.B.to_list(), "b": [str(v) for v in self.b]}

    def fixed_translation(self) -> np.ndarray:
        return np.array([int(v * (1 << 64)) & MASK64 for v in (x % 1 for x in self.b)], dtype=np.uint64)

    def fixed_orbit(self, X: np.ndarray, n: int) -> np.ndarray:
        """``T^k X`` for ``k < n`` on uint64 fixed-point points (exact mod 2**64)."""
        d = self.B.dim
        Bu = np.array([[v & MASK64 for v in r] for r in self.B.rows], dtype=np.uint64)
        bu = self.fixed_translation()
        out = np.empty((n, d), dtype=np.uint64)
        cur = np.asarray(X, dtype=np.uint64).reshape(d)
        with np.errstate(over="ignore"):
            for k in range(n):
                out[k] = cur
                cur = (Bu * cur[None, :]).sum(axis=1, dtype=np.uint64) + bu
        return out


# ---------------------------------------------------------------------------
# polynomials (integer coefficients, highest first)

def _trim(p):
    p = list(p)
    while len(p) > 1 and p[0] == 0:
        p.pop(0)
    return p


def poly_divmod(f, g):
    """Division over Q; returns (quotient, remainder) as Fraction lists."""
    f = [Fraction(v) for v in _trim(f)]
    g = [Fraction(v) for v in _trim(g)]
    if g == [0]:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(len(f) - len(g) + 1, 1)
    r = f[:]
    while len(r) >= len(g) and any(r):
        coef = r[0] / g[0]
        shift = len(r) - len(g)
        q[len(q) - 1 - shift] = coef
        for i, gv in enumerate(g):
            r[i] -= coef * gv
        r.pop(0)
    return _trim(q), _trim(r) if r else [Fraction(0)]


def poly_gcd(f, g):
    a, b = _trim(f), _trim(g)
    while any(b):
        _, r = poly_divmod(a, b)
        a, b = b, r
    lead = Fraction(a[0])
    return [Fraction(v) / lead for v in a]


def _derivative(f):
    d = len(f) - 1
    return [c * (d - i) for i, c in enumerate(f[:-1])] or [0]


def mignotte_bound(f, k: int) -> list:
    """Coefficient bounds ``C(k, j) * ||f||_2`` for a degree-``k`` factor of ``f``."""
    norm = math.sqrt(sum(int(c) ** 2 for c in f))
    return [math.comb(k, j) * norm for j in range(k + 1)]


def is_irreducible(f, roots=None) -> bool:
    """Irreducibility over Q of a monic integer polynomial of degree <= 6.

    Steps: rational-root test; square-free test (a repeated root means a
    factor); then every candidate monic factor is read off a
    conjugation-closed subset of the (simple) roots, rounded to integers,
    screened by the Mignotte bound and confirmed by exact division.
    """
    f = [int(c) for c in _trim(f)]
    d = len(f) - 1
    if f[0] != 1:
        raise PreconditionError("expected a monic polynomial")
    if d > MAX_IRRED_DEGREE:
        raise Unsupported(f"irreducibility test limited to degree <= {MAX_IRRED_DEGREE}, got {d}")
    if d <= 0:
        return False
    if d == 1:
        return True
    c0 = f[-1]
    if c0 == 0:
        return False
    for r in _divisors(abs(c0)):
        for s in (r, -r):
            if _horner(f, s) == 0:
                return False
    if d <= 3:
        return True
    g = poly_gcd(f, _derivative(f))
    if len(g) > 1:
        return False
    if roots is None:
        roots = polished_roots(f)
    for k in range(2, d // 2 + 1):
        bounds = mignotte_bound(f, k)
        for subset in itertools.combinations(range(d), k):
            coeffs = np.poly(roots[list(subset)])
            if np.max(np.abs(coeffs.imag)) > 1e-6:
                continue
            cand = [int(round(v)) for v in coeffs.real]
            if np.max(np.abs(coeffs.real - cand)) > 1e-6:
                continue
            if any(abs(c) > b + 1e-9 for c, b in zip(cand, bounds)):
                continue
            _, rem = poly_divmod(f, cand)
            if not any(rem):
                return False
    return True


def _divisors(n: int) -> list:
    out = []
    i = 1
    while i * i <= n:
        if n % i == 0:
            out.append(i)
            if i != n // i:
                out.append(n // i)
        i += 1
    return sorted(out)


def _horner(f, x):
    acc = 0
    for c in f:
        acc = acc * x + c
    return acc


def polished_roots(f, steps: int = 3) -> np.ndarray:
    """Roots of ``f`` from ``numpy.roots``, each refined by Newton on the exact coefficients."""
    fc = np.array([float(c) for c in f])
    roots = np.roots(fc).astype(complex)
    df = np.polyder(fc)
    for _ in range(steps):
        val = np.polyval(fc, roots)
        der = np.polyval(df, roots)
        ok = np.abs(der) > 1e-300
        step = np.zeros_like(roots)
        step[ok] = val[ok] / der[ok]
        cand = roots - step
        better = np.abs(np.polyval(fc, cand)) <= np.abs(val)
        roots = np.where(better, cand, roots)
    return roots


# ---------------------------------------------------------------------------
# spectral data

@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray          # sorted by decreasing modulus
    multiplicities: list             # (eigenvalue, multiplicity) groups
    charpoly: tuple
    det: int
    entropy: float
    spectral_radius: float
    leading_vector: np.ndarray       # right eigenvector for the top eigenvalue, unit norm
    transform_norm: float            # 2-norm of the unit-column eigenvector matrix
    eig_crosscheck: float            # max distance to numpy.linalg.eigvals

    def on_unit_circle(self) -> np.ndarray:
        return np.abs(np.abs(self.eigenvalues) - 1.0) < UNIT_TOL

    def to_json(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "moduli": [float(abs(z)) for z in self.eigenvalues],
            "multiplicities": [[[float(z.real), float(z.imag)], m] for z, m in self.multiplicities],
            "charpoly": list(self.charpoly),
            "det": self.det,
            "entropy": self.entropy,
            "spectral_radius": self.spectral_radius,
            "leading_vector": [[float(z.real), float(z.imag)] for z in self.leading_vector],
            "transform_norm": self.transform_norm,
            "on_unit_circle": int(self.on_unit_circle().sum()),
        }


def _sort_spectrum(z: np.ndarray) -> np.ndarray:
    # by modulus (desc), then argument, with rounding so near-ties sort stably
    keys = sorted(range(len(z)), key=lambda i: (-round(abs(z[i]), 10), round(np.angle(z[i]), 10)))
    return z[keys]


def _group(z: np.ndarray, tol: float = 1e-6) -> list:
    groups = []
    for v in z:
        for g in groups:
            if abs(g[0] - v) < tol:
                g[1] += 1
                break
        else:
            groups.append([v, 1])
    return [(complex(v), m) for v, m in groups]


def _null_vector(A: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(A)
    v = vh[-1].conj()
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])  # phase: largest entry real positive


def spectral_analysis(B) -> SpectralData:
    B = IntMatrix.of(B)
    det = B.det()
    if det == 0:
        raise SingularMatrix("det B = 0")
    cp = B.charpoly()
    roots = _sort_spectrum(polished_roots(cp))
    direct = np.linalg.eigvals(B.to_numpy())
    cross = max(min(abs(r - e) for e in direct) for r in roots)
    if cross > 1e-6 * max(1.0, float(np.max(np.abs(roots)))):
        # defective / clustered eigenvalues converge slowly in both methods
        log.warning("eigenvalue cross-check deviates by %.3g", cross)
    mods = np.abs(roots)
    entropy = float(math.fsum(math.log(m) for m in mods if m > 1.0 + UNIT_TOL))
    top = roots[0]
    A = B.to_numpy().astype(complex) - top * np.eye(B.dim)
    v11 = _null_vector(A)
    w, V = np.linalg.eig(B.to_numpy())
    tnorm = float(np.linalg.norm(V, 2))
    return SpectralData(roots, _group(roots), cp, det, entropy, float(mods[0]), v11, tnorm, float(cross))


@dataclass(frozen=True)
class Classification:
    kind: str                       # hyperbolic | partially_hyperbolic | no_expansion
    horseshoe_free: Optional[bool]  # None when not applicable (|det| != 1 or zero entropy)
    irreducible: Optional[bool]
    n_on_circle: int
    entropy: float

    def to_json(self) -> dict:
        return {"class": self.kind, "horseshoe_free": self.horseshoe_free,
                "irreducible": self.irreducible, "n_on_circle": self.n_on_circle,
                "entropy": self.entropy}


def classify(B, spec: Optional[SpectralData] = None) -> Classification:
    B = IntMatrix.of(B)
    spec = spec or spectral_analysis(B)
    on = spec.on_unit_circle()
    n_on = int(on.sum())
    d = B.dim
    if spec.entropy == 0.0:
        kind = "no_expansion"
    elif n_on == 0:
        kind = "hyperbolic"
    else:
        kind = "partially_hyperbolic"
    free, irred = None, None
    if abs(spec.det) == 1 and kind != "no_expansion":
        if 0 < n_on < d:
            irred = is_irreducible(spec.charpoly, spec.eigenvalues)
            free = irred
        else:
            free = False
    return Classification(kind, free, irred, n_on, spec.entropy)


def choose_h0(B, spec: Optional[SpectralData] = None) -> tuple:
    """Canonical basis vector ``e_i`` maximising ``|<v_11, e_i>|`` (smallest ``i`` on ties)."""
    B = IntMatrix.of(B)
    spec = spec or spectral_analysis(B)
    mags = np.abs(spec.leading_vector)
    best, idx = -1.0, None
    for i, m in enumerate(mags):
        if m > 1e-8 and m > best + 1e-9:
            best, idx = m, i
    if idx is None:  # pragma: no cover - v_11 is a unit vector
        raise PreconditionError("leading eigenvector vanished")
    return tuple(int(i == idx) for i in range(B.dim))
