"""Bounded weight sequences and their non-triviality statistics.

A weight is described by a :class:`WeightSpec` (a small JSON-able record)
and materialised as a :class:`WeightSequence`, a cached prefix
``w_0 .. w_{n-1}`` of complex doubles.  Regeneration from a WeightSpec is
deterministic, including the seeded Bernoulli kind.

Kinds and parameters::

    constant        value (complex, default 1)
    phase           theta          w_n = exp(-2 pi i theta n)
    lacunary_exp    beta           w_n = exp(2 pi i beta^n), beta^n mod 1 exact
    poly_phase      coeffs         w_n = exp(2 pi i P(n)), P(n) = sum c_k n^k, exact mod 1
    bernoulli_pm1   seed           iid symmetric +-1
    moebius                        w_n = mu(n), w_0 = 0
    custom_table    values         given prefix, zero-padded

Any kind accepts ``support = [modulus, residue]``, which zeroes every
index outside the residue class.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import PreconditionError

KINDS = ("constant", "phase", "lacunary_exp", "poly_phase", "bernoulli_pm1", "moebius", "custom_table")

MOEBIUS_CAP = 10_000_000
LACUNARY_CAP = 200_000
TWO_PI = 2.0 * math.pi


def _fraction(x) -> Fraction:
    # floats are taken at their exact binary value
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


@dataclass(frozen=True)
class WeightSpec:
    kind: str
    params: dict = field(default_factory=dict)
    support: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f"unknown weight kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "params", dict(self.params))
        if self.support is not None:
            mod, res = (int(v) for v in self.support)
            if mod < 1:
                raise PreconditionError("support modulus must be >= 1")
            object.__setattr__(self, "support", (mod, res % mod))
        if self.kind == "bernoulli_pm1" and "seed" not in self.params:
            raise PreconditionError("bernoulli_pm1 needs an explicit seed")
        if self.kind == "phase" and "theta" not in self.params:
            raise PreconditionError("phase needs theta")
        if self.kind == "lacunary_exp" and "beta" not in self.params:
            raise PreconditionError("lacunary_exp needs beta")
        if self.kind == "poly_phase" and "coeffs" not in self.params:
            raise PreconditionError("poly_phase needs coeffs")
        if self.kind == "custom_table" and "values" not in self.params:
            raise PreconditionError("custom_table needs values")

    @property
    def bound(self) -> float:
        if self.kind == "constant":
            return abs(complex(self.params.get("value", 1)))
        if self.kind == "custom_table":
            vals = [abs(_parse_complex(v)) for v in self.params["values"]]
            return max(vals, default=0.0)
        return 1.0

    def to_json(self) -> dict:
        out = {"kind": self.kind, "params": _jsonable(self.params)}
        if self.support is not None:
            out["support"] = list(self.support)
        return out

    @classmethod
    def from_json(cls, data) -> "WeightSpec":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            kind = data["kind"]
        except (KeyError, TypeError) as exc:
            raise PreconditionError("weight spec needs a 'kind'") from exc
        params = dict(data.get("params", {}))
        for k, v in data.items():
            if k not in ("kind", "params", "support"):
                params.setdefault(k, v)
        sup = data.get("support")
        return cls(kind, params, tuple(sup) if sup is not None else None)

    def digest(self) -> str:
        import hashlib
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()


def _jsonable(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, Fraction):
            out[k] = str(v)
        elif isinstance(v, complex):
            out[k] = [v.real, v.imag]
        elif isinstance(v, (list, tuple)):
            out[k] = [str(x) if isinstance(x, Fraction) else ([x.real, x.imag] if isinstance(x, complex) else x)
                      for x in v]
        else:
            out[k] = v
    return out


def _parse_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


@dataclass(frozen=True)
class WeightSequence:
    spec: WeightSpec
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, n):
        return self.values[n]

    @property
    def bound(self) -> float:
        return self.spec.bound

    def real_policy(self, N: Optional[int] = None) -> tuple:
        """Real weight used by constructions needing one: Re(w) if non-trivial, else Im(w)."""
        v = self.values[:N]
        re = v.real
        if np.any(re != 0) or not np.any(v.imag != 0):
            return re, "re"
        return v.imag, "im"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# bohrchaos weights v1\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "re", "im"])
        for n, z in enumerate(self.values):
            wr.writerow([n, repr(float(z.real)), repr(float(z.imag))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# generators

def moebius_table(n_max: int) -> np.ndarray:
    """``mu(0..n_max-1)`` as int8, with ``mu(0) = 0``.

    Segmented-free numpy sieve: sign flip per prime factor, zero on square
    divisors, and a product table recovering the one large prime factor.
    """
    if n_max > MOEBIUS_CAP:
        raise PreconditionError(f"moebius prefix capped at {MOEBIUS_CAP}, asked for {n_max}")
    mu = np.ones(n_max, dtype=np.int8)
    if n_max == 0:
        return mu
    prod = np.ones(n_max, dtype=np.int64)
    root = math.isqrt(max(n_max - 1, 0))
    is_p = np.ones(root + 1, dtype=bool)
    is_p[:2] = False
    for p in range(2, math.isqrt(root) + 1):
        if is_p[p]:
            is_p[p * p::p] = False
    for p in np.flatnonzero(is_p):
        p = int(p)
        mu[p::p] *= -1
        prod[p::p] *= p
        mu[p * p::p * p] = 0
    idx = np.arange(n_max, dtype=np.int64)
    big = (prod != idx) & (mu != 0)
    mu[big] *= -1
    mu[0] = 0
    return mu


def _lacunary_values(beta, n_max: int) -> np.ndarray:
    if n_max > LACUNARY_CAP:
        raise PreconditionError(f"lacunary_exp prefix capped at {LACUNARY_CAP}")
    b = _fraction(beta)
    if b <= 1:
        raise PreconditionError("lacunary_exp needs beta > 1")
    num, den = b.numerator, b.denominator
    a_pow, b_pow = 1, 1
    out = np.empty(n_max, dtype=np.complex128)
    for n in range(n_max):
        frac = (a_pow % b_pow) / b_pow  # int/int true division is correctly rounded
        out[n] = complex(math.cos(TWO_PI * frac), math.sin(TWO_PI * frac))
        a_pow *= num
        b_pow *= den
    return out


def _poly_values(coeffs, n_max: int) -> np.ndarray:
    cs = [_fraction(c) % 1 for c in coeffs]
    den = 1
    for c in cs:
        den = den * c.denominator // math.gcd(den, c.denominator)
    ints = [int(c * den) for c in cs]
    out = np.empty(n_max, dtype=np.complex128)
    for n in range(n_max):
        acc = 0
        for c in reversed(ints):  # Horner, reduced mod den at each step
            acc = (acc * n + c) % den
        frac = acc / den
        out[n] = complex(math.cos(TWO_PI * frac), math.sin(TWO_PI * frac))
    return out


def generate(spec: WeightSpec, n_max: int) -> WeightSequence:
    """Materialise ``w_0 .. w_{n_max-1}``."""
    if n_max < 1:
        raise PreconditionError(f"n_max must be >= 1, got {n_max}")
    kind, P = spec.kind, spec.params
    if kind == "constant":
        vals = np.full(n_max, _parse_complex(P.get("value", 1)), dtype=np.complex128)
    elif kind == "phase":
        theta = _fraction(P["theta"])
        n = np.arange(n_max, dtype=object)
        # exact theta*n mod 1 before the float conversion
        fr = np.array([float((theta * int(k)) % 1) for k in n], dtype=float)
        vals = np.exp(-1j * TWO_PI * fr)
    elif kind == "lacunary_exp":
        vals = _lacunary_values(P["beta"], n_max)
    elif kind == "poly_phase":
        vals = _poly_values(P["coeffs"], n_max)
    elif kind == "bernoulli_pm1":
        rng = np.random.default_rng(int(P["seed"]))
        vals = np.where(rng.random(n_max) < 0.5, 1.0, -1.0).astype(np.complex128)
    elif kind == "moebius":
        vals = moebius_table(n_max).astype(np.complex128)
    else:
        table = [_parse_complex(v) for v in P["values"]]
        vals = np.zeros(n_max, dtype=np.complex128)
        m = min(n_max, len(table))
        vals[:m] = table[:m]
    if spec.support is not None:
        mod, res = spec.support
        mask = (np.arange(n_max) % mod) != res
        vals = vals.copy()
        vals[mask] = 0
    vals.setflags(write=False)
    return WeightSequence(spec, vals)


# ---------------------------------------------------------------------------
# statistics

def geometric_grid(n_max: int, start: int = 1, ratio: int = 2) -> list:
    grid, N = [], start
    while N <= n_max:
        grid.append(N)
        N *= ratio
    if not grid or grid[-1] != n_max:
        grid.append(n_max)
    return grid


def _check_grid(grid, limit: int) -> list:
    g = [int(N) for N in grid]
    if not g or any(b <= a for a, b in zip(g, g[1:])) or g[0] < 1:
        raise PreconditionError("grid must be a non-empty increasing list of positive integers")
    if g[-1] > limit:
        raise PreconditionError(f"grid reaches N={g[-1]} beyond cached prefix {limit}")
    return g


def cesaro_abs(values: np.ndarray, grid) -> np.ndarray:
    cs = np.cumsum(np.abs(values))
    g = np.asarray(grid)
    return cs[g - 1] / g


@dataclass(frozen=True)
class NontrivialityIndex:
    grid: list
    averages: np.ndarray
    limsup_surrogate: float  # max over the tail half of the grid

    @property
    def nontrivial(self) -> bool:
        return self.limsup_surrogate > 0


def nontriviality_index(w: WeightSequence, grid=None) -> NontrivialityIndex:
    """Cesàro averages ``(1/N) sum_{n<N} |w_n|`` on ``grid`` plus a tail-max surrogate."""
    grid = _check_grid(grid if grid is not None else geometric_grid(len(w)), len(w))
    avg = cesaro_abs(w.values, grid)
    tail = avg[len(avg) // 2:]
    return NontrivialityIndex(grid, avg, float(tail.max()))


def best_residue(w: WeightSequence, q: int, grid=None) -> tuple:
    """``(j0, averages)``: the residue ``j`` mod ``q`` maximising the final Cesàro
    average of ``|w_{qn+j}|``; ties go to the smallest ``j``.

    ``averages[j]`` is the average over ``n < N_j`` where ``N_j`` counts the
    indices ``qn + j`` below the last grid point.
    """
    if q < 1:
        raise PreconditionError(f"q must be >= 1, got {q}")
    last = _check_grid(grid if grid is not None else [len(w)], len(w))[-1]
    a = np.abs(w.values[:last])
    averages = []
    for j in range(q):
        sub = a[j::q]
        averages.append(math.fsum(sub) / len(sub) if len(sub) else 0.0)
    best = max(averages)
    j0 = averages.index(best)
    return j0, averages
