"""Frequency orbits ``h_n = (B^T)^n h_0`` and finite-horizon dissociateness checks.

All frequency arithmetic is exact (Python ints).  The brute-force checks
enumerate the ``3^D`` signed sums of the first ``D`` terms, so the horizon
is capped at ``D = 12``.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from ..errors import PreconditionError, Unsupported
from .spectral import IntMatrix, ToralAffineMap

MAX_HORIZON = 12
Q_MAX = 16


def frequency_orbit(B, h0, n_max: int) -> list:
    """``[h_0, h_1, .., h_{n_max}]`` with ``h_{n+1} = B^T h_n`` (exact)."""
    B = IntMatrix.of(B)
    Bt = B.transpose()
    h = tuple(int(v) for v in np.atleast_1d(h0))
    if len(h) != B.dim:
        raise PreconditionError(f"h0 has {len(h)} entries for dimension {B.dim}")
    out = [h]
    for _ in range(n_max):
        h = Bt @ h
        out.append(h)
    return out


def frequency_orbit_by_powers(B, h0, n_max: int) -> list:
    """Same as :func:`frequency_orbit` via repeated squaring of ``B^T``; used as a cross-check."""
    B = IntMatrix.of(B)
    Bt = B.transpose()
    h = tuple(int(v) for v in np.atleast_1d(h0))
    return [Bt.power(n) @ h for n in range(n_max + 1)]


def psi_sequence(B, b, h0, n_max: int) -> list:
    """``psi_n = <h_0, (B^{n-1} + .. + I) b> mod 1`` for ``n = 0..n_max`` as Fractions."""
    T = ToralAffineMap(IntMatrix.of(B), tuple(b) if b is not None and len(b) else ())
    h = tuple(int(v) for v in np.atleast_1d(h0))
    s = [Fraction(0)] * T.B.dim
    out = []
    for _ in range(n_max + 1):
        out.append(sum((hi * si for hi, si in zip(h, s)), Fraction(0)) % 1)
        # s_{n+1} = B s_n + b, reduced mod 1 (B is integral, h0 too)
        s = [(sum((bij * sj for bij, sj in zip(row, s)), Fraction(0)) + bi) % 1
             for row, bi in zip(T.B.rows, T.b)]
    return out


@dataclass
class FrequencyPlan:
    B: IntMatrix
    h0: tuple
    q: int = 1
    horizon: int = 8
    delta: Optional[float] = None
    b: tuple = ()
    _cache: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.B = IntMatrix.of(self.B)
        self.h0 = tuple(int(v) for v in np.atleast_1d(self.h0))
        if self.q < 1:
            raise PreconditionError("q must be >= 1")
        if self.horizon < 1:
            raise PreconditionError("horizon must be >= 1")
        if len(self.h0) != self.B.dim:
            raise PreconditionError("h0 dimension mismatch")
        if not self.b:
            self.b = tuple(Fraction(0) for _ in range(self.B.dim))
        else:
            self.b = tuple(Fraction(v) for v in self.b)

    @property
    def dim(self) -> int:
        return self.B.dim

    def h(self, n: int) -> tuple:
        """``h_n`` (cached, exact)."""
        if not self._cache:
            self._cache.append(self.h0)
        Bt = None
        while len(self._cache) <= n:
            Bt = Bt or self.B.transpose()
            self._cache.append(Bt @ self._cache[-1])
        return self._cache[n]

    def class_terms(self, k: int, count: int) -> list:
        """First ``count`` terms of ``H_k = (h_{qn+k})``."""
        return [self.h(self.q * n + k) for n in range(count)]

    @property
    def theta(self) -> float:
        """Smallest observed ratio ``|h_{q(n+1)}| / |h_{qn}|`` over the horizon."""
        terms = self.class_terms(0, self.horizon)
        norms = [math.sqrt(sum(float(v) ** 2 for v in t)) for t in terms]
        ratios = [b / a for a, b in zip(norms, norms[1:]) if a > 0]
        return min(ratios) if ratios else math.inf

    def to_json(self) -> dict:
        return {"B": self.B.to_list(), "h0": list(self.h0), "q": self.q,
                "horizon": self.horizon, "delta": self.delta, "b": [str(v) for v in self.b]}

    @classmethod
    def from_json(cls, data: dict) -> "FrequencyPlan":
        return cls(IntMatrix.of(data["B"]), tuple(data["h0"]), int(data.get("q", 1)),
                   int(data.get("horizon", 8)), data.get("delta"), tuple(data.get("b", ())))


# ---------------------------------------------------------------------------
# brute force over sign patterns

def _signed_sums(terms: list) -> list:
    """All ``sum eps_j terms[j]``, ``eps in {-1,0,1}^D``, ordered by the base-3 index
    ``sum (eps_j + 1) 3^j``."""
    d = len(terms[0])
    sums = [tuple([0] * d)]
    for t in terms:
        nxt = []
        for e in (-1, 0, 1):
            add = tuple(e * v for v in t)
            nxt.extend(tuple(a + b for a, b in zip(s, add)) for s in sums)
        sums = nxt
    return sums


def _pattern(index: int, D: int) -> list:
    out = []
    for _ in range(D):
        index, r = divmod(index, 3)
        out.append(r - 1)
    return out


@dataclass(frozen=True)
class DissociateResult:
    ok: bool
    horizon: int
    collision: Optional[tuple] = None  # (eps, eps', common value)

    def to_json(self) -> dict:
        out = {"ok": self.ok, "horizon": self.horizon}
        if self.collision:
            e1, e2, v = self.collision
            out["collision"] = {"eps": e1, "eps_other": e2, "value": [str(x) for x in v]}
        return out


def dissociate_check(terms: list) -> DissociateResult:
    """Are all ``3^D`` signed sums of ``terms`` pairwise distinct?

    On failure returns the lexicographically first colliding pair of sign
    patterns (by base-3 index) as a witness.
    """
    D = len(terms)
    if D > MAX_HORIZON:
        raise Unsupported(f"horizon {D} exceeds the brute-force limit {MAX_HORIZON}")
    terms = [tuple(int(v) for v in np.atleast_1d(t)) for t in terms]
    sums = _signed_sums(terms)
    seen = {}
    for i, s in enumerate(sums):
        j = seen.get(s)
        if j is not None:
            return DissociateResult(False, D, (_pattern(j, D), _pattern(i, D), s))
        seen[s] = i
    return DissociateResult(True, D)


def _min_distance(points: list, pool: list) -> float:
    """Smallest Euclidean distance from ``points`` to ``pool`` (exact for d = 1)."""
    if not points:
        return math.inf
    if len(pool[0]) == 1:
        line = sorted(p[0] for p in pool)
        best = None
        for (v,) in points:
            i = bisect.bisect_left(line, v)
            for j in (i - 1, i):
                if 0 <= j < len(line):
                    gap = abs(v - line[j])
                    best = gap if best is None or gap < best else best
        return float(best)
    from scipy.spatial import cKDTree
    tree = cKDTree(np.array(pool, dtype=float))
    dist, _ = tree.query(np.array(points, dtype=float), k=1)
    return float(dist.min())


@dataclass(frozen=True)
class SplitReport:
    q: int
    horizon: int
    delta: float
    dissociate: DissociateResult
    class_gap: float        # D(H_1 u .. u H_{q-1}, H_0^*)
    difference_gap: float   # D((H_p - H_p) minus 0, H_0^*) over 1 <= p < q

    @property
    def dissociate_ok(self) -> bool:
        return self.dissociate.ok

    @property
    def split_ok(self) -> bool:
        return self.class_gap >= self.delta and self.difference_gap >= self.delta

    def to_json(self) -> dict:
        return {"q": self.q, "horizon": self.horizon, "delta": self.delta,
                "dissociate_ok": self.dissociate_ok, "dissociate": self.dissociate.to_json(),
                "split_ok": self.split_ok,
                "min_gaps": {"classes": _num(self.class_gap), "differences": _num(self.difference_gap)}}


def _num(x: float):
    return None if math.isinf(x) else x


def lacunarity_and_split_check(plan: FrequencyPlan) -> SplitReport:
    """Dissociateness of ``H_0`` and separation of the other classes from ``H_0^*``.

    ``H_0^*`` is truncated to the signed sums of the first ``D`` terms of
    ``H_0``; ``H_k`` to its first ``D`` terms.  Differences are taken
    within one class ``H_p`` (``p = 1..q-1``), zero excluded.
    """
    D = plan.horizon
    if D > MAX_HORIZON:
        raise Unsupported(f"horizon {D} exceeds the brute-force limit {MAX_HORIZON}")
    H0 = plan.class_terms(0, D)
    diss = dissociate_check(H0)
    pool = _signed_sums(H0)
    others, diffs = [], []
    for p in range(1, plan.q):
        Hp = plan.class_terms(p, D)
        others.extend(Hp)
        for a in Hp:
            for b in Hp:
                v = tuple(x - y for x, y in zip(a, b))
                if any(v):
                    diffs.append(v)
    class_gap = _min_distance(others, pool)
    diff_gap = _min_distance(diffs, pool)
    delta = plan.delta if plan.delta is not None else 0.5 * min(class_gap, diff_gap)
    if math.isinf(delta):
        delta = 0.0
    return SplitReport(plan.q, D, float(delta), diss, class_gap, diff_gap)


def search_q(B, h0, horizon: int = 6, q_max: int = Q_MAX, b=()) -> tuple:
    """Smallest ``q`` in ``2..q_max`` whose finite-horizon checks pass.

    ``delta`` is half the observed minimal gap, so the split passes exactly
    when no checked vector lies in the truncated ``H_0^*``.  Returns
    ``(plan, report)``; raises :class:`Unsupported` if no ``q`` works.
    """
    for q in range(2, q_max + 1):
        plan = FrequencyPlan(IntMatrix.of(B), tuple(h0), q, horizon, None, tuple(b))
        rep = lacunarity_and_split_check(plan)
        if rep.dissociate_ok and rep.delta > 0 and rep.split_ok:
            plan.delta = rep.delta
            return plan, rep
    raise Unsupported(f"no q <= {q_max} passes the horizon-{horizon} checks")
