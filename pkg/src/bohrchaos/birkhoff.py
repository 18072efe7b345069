"""Weighted Birkhoff averages, correlated pairs and the first-return lift.

``A_N = (1/N) sum_{n<N} w_n f(T^n x)`` is evaluated exactly term by term
(no FFT shortcuts).  Summands are produced in one vectorised pass, each
grid segment is summed with ``math.fsum`` and segment sums are accumulated
with Neumaier compensation, so the result does not depend on how the grid
is chosen beyond the last ulp.

Systems: :class:`FullShift`, :class:`CodedSubshift` (``sigma^tau`` on a
coded horseshoe, observables read in code coordinates),
:class:`CircleRotation` and :class:`ToralSystem`.
"""
from __future__ import annotations

import cmath
import csv
import io
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import CodeError, PreconditionError
from .horseshoe import CodedHorseshoe, DisjointStepsCertificate, certify
from .symbolic import BlockStream, RulePoint, shift
from .weights import WeightSequence, best_residue, geometric_grid

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# observables

@dataclass(frozen=True)
class CylinderIndicatorDiff:
    """``1_[plus] - 1_[minus]`` (cylinders anchored at 0)."""

    plus: str = "0"
    minus: str = "1"

    @property
    def length(self) -> int:
        return max(len(self.plus), len(self.minus))

    @property
    def sup(self) -> float:
        return 1.0

    def evaluate(self, word: str) -> float:
        return float(word.startswith(self.plus)) - float(word.startswith(self.minus))


@dataclass(frozen=True)
class LocallyConstant:
    """Function of the first ``length`` symbols; words missing from ``table`` map to ``default``."""

    length: int
    table: dict
    default: float = 0.0

    @property
    def sup(self) -> float:
        vals = [abs(v) for v in self.table.values()] + [abs(self.default)]
        return max(vals)

    def evaluate(self, word: str):
        return self.table.get(word[:self.length], self.default)


@dataclass(frozen=True)
class Character:
    """``exp(2 pi i <h, x>)`` on the torus; ``h = 0`` is the constant 1."""

    h: tuple

    def __post_init__(self):
        object.__setattr__(self, "h", tuple(int(v) for v in np.atleast_1d(self.h)))

    @property
    def sup(self) -> float:
        return 1.0


def _symbolic_values(f, text: str, positions: np.ndarray, alphabet: int) -> np.ndarray:
    """``f`` evaluated on the windows of ``text`` starting at ``positions``."""
    if isinstance(f, CylinderIndicatorDiff):
        out = np.zeros(len(positions))
        arr = np.frombuffer(text.encode(), dtype=np.uint8)
        for word, sign in ((f.plus, 1.0), (f.minus, -1.0)):
            if not word:
                out += sign
                continue
            hit = np.ones(len(positions), dtype=bool)
            for i, ch in enumerate(word.encode()):
                hit &= arr[positions + i] == ch
            out += sign * hit
        return out
    if isinstance(f, LocallyConstant):
        L = f.length
        if L * math.log2(max(alphabet, 2)) <= 62:
            # integer hash of every window, then one dict lookup per distinct key
            arr = np.frombuffer(text.encode(), dtype=np.uint8).astype(np.int64) - ord("0")
            key = np.zeros(len(positions), dtype=np.int64)
            for i in range(L):
                key = key * alphabet + arr[positions + i]
            lut = {}
            for word, val in f.table.items():
                if len(word) == L:
                    k = 0
                    for ch in word:
                        k = k * alphabet + int(ch)
                    lut[k] = val
            uniq, inv = np.unique(key, return_inverse=True)
            vals = np.array([lut.get(int(k), f.default) for k in uniq], dtype=np.complex128)
            out = vals[inv]
            return out.real.copy() if not np.any(out.imag) else out
        return np.array([f.evaluate(text[p:p + L]) for p in positions])
    raise PreconditionError(f"observable {type(f).__name__} is not defined on a shift space")


# ---------------------------------------------------------------------------
# systems

@dataclass(frozen=True)
class FullShift:
    symbols: int = 2

    def observable_values(self, f, x, n: int) -> np.ndarray:
        if not hasattr(x, "window"):
            raise PreconditionError("full shift needs a symbolic point")
        L = getattr(f, "length", 1)
        text = x.window(0, n + L - 1)
        return _symbolic_values(f, text, np.arange(n), self.symbols)


@dataclass(frozen=True)
class CodedSubshift:
    """``(K, sigma^tau)`` read through the conjugacy with the binary full shift.

    Points are ambient points lying in ``K`` and aligned to a block boundary.
    """

    horseshoe: CodedHorseshoe

    def observable_values(self, f, x, n: int) -> np.ndarray:
        tau = self.horseshoe.order
        L = getattr(f, "length", 1)
        ambient = x.window(0, tau * (n + L - 1))
        try:
            code = self.horseshoe.code.decode(ambient)
        except CodeError as exc:
            raise PreconditionError(f"point is not in the coded horseshoe: {exc}") from exc
        return _symbolic_values(f, code, np.arange(n), 2)


def frac_mul(n: np.ndarray, a: float) -> np.ndarray:
    """``n * a mod 1`` for integer ``n < 2**26`` with error ~1 ulp.

    ``a`` is split into a 26-bit head (so ``n * head`` is exact) and a tail.
    """
    a = a % 1.0
    head = math.ldexp(math.floor(math.ldexp(a, 26)), -26)
    tail = a - head
    n = n.astype(np.float64)
    x = np.mod(n * head, 1.0) + n * tail
    return np.mod(x, 1.0)


@dataclass(frozen=True)
class CircleRotation:
    alpha: float

    def observable_values(self, f, x, n: int) -> np.ndarray:
        if not isinstance(f, Character) or len(f.h) != 1:
            raise PreconditionError("circle rotation takes a one-dimensional character")
        k = f.h[0]
        ph = frac_mul(np.arange(n), k * self.alpha)
        ph = np.mod(ph + (k * float(x)) % 1.0, 1.0)
        return np.exp(1j * TWO_PI * ph)


@dataclass(frozen=True)
class ToralSystem:
    """Affine map ``x -> Bx + b mod 1`` on fixed-point (uint64) torus points.

    Multiplication by an integer matrix commutes with reduction mod
    ``2**64``, so orbits of fixed-point points are exact.  Only the
    conversion of ``x`` and ``b`` to fixed point rounds, and expanding
    directions amplify that rounding; dyadic data are exact throughout.
    """

    map: object  # toral.ToralAffineMap

    def observable_values(self, f, x, n: int) -> np.ndarray:
        from .toral.riesz import to_fixed, character_phase
        if not isinstance(f, Character):
            raise PreconditionError("toral systems take character observables")
        B = self.map.B
        d = B.dim
        if len(f.h) != d:
            raise PreconditionError(f"character of dimension {len(f.h)} on a {d}-torus")
        X = to_fixed(x, d)
        orbit = self.map.fixed_orbit(X, n)
        return np.exp(1j * TWO_PI * character_phase(f.h, orbit))


# ---------------------------------------------------------------------------
# series

class _Neumaier:
    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, x: float) -> None:
        t = self.s + x
        if abs(self.s) >= abs(x):
            self.c += (self.s - t) + x
        else:
            self.c += (x - t) + self.s
        self.s = t

    @property
    def value(self) -> float:
        return self.s + self.c


def compensated_partial_sums(z: np.ndarray, grid) -> np.ndarray:
    """``sum_{n<N} z_n`` for every ``N`` in ``grid``."""
    re, im = _Neumaier(), _Neumaier()
    out = np.empty(len(grid), dtype=np.complex128)
    real = np.ascontiguousarray(z.real, dtype=np.float64)
    imag = np.ascontiguousarray(np.imag(z), dtype=np.float64)
    prev = 0
    for i, N in enumerate(grid):
        re.add(math.fsum(real[prev:N]))
        im.add(math.fsum(imag[prev:N]))
        out[i] = complex(re.value, im.value)
        prev = N
    return out


@dataclass(frozen=True)
class AverageSeries:
    grid: list
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def at(self, N: int) -> complex:
        return complex(self.values[self.grid.index(N)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# bohrchaos average v1\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["N", "re", "im", "abs"])
        for N, a in zip(self.grid, self.values):
            wr.writerow([N, repr(float(a.real)), repr(float(a.imag)), repr(abs(complex(a)))])
        return buf.getvalue()


def _weights_array(w) -> np.ndarray:
    if isinstance(w, WeightSequence):
        return w.values
    return np.asarray(w, dtype=np.complex128)


def weighted_average_series(sys, f, x, w, grid) -> AverageSeries:
    """Partial averages ``A_N`` on ``grid`` (increasing, within the weight prefix)."""
    wv = _weights_array(w)
    grid = [int(N) for N in grid]
    if not grid or grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise PreconditionError("grid must be increasing positive integers")
    n = grid[-1]
    if n > len(wv):
        raise PreconditionError(f"grid reaches {n} but only {len(wv)} weights are cached")
    fv = sys.observable_values(f, x, n)
    z = wv[:n] * fv
    sums = compensated_partial_sums(z, grid)
    meta = {"system": type(sys).__name__, "observable": type(f).__name__}
    if isinstance(w, WeightSequence):
        meta["weight"] = w.spec.to_json()
    return AverageSeries(grid, sums / np.asarray(grid, dtype=np.float64), meta)


# ---------------------------------------------------------------------------
# correlated pairs

def fullshift_pair(w: WeightSequence):
    """``(f, x)`` with ``f = 1_[0] - 1_[1]`` and ``x_n = 0`` iff the real weight is ``>= 0``.

    For the real weight ``u`` selected by :meth:`WeightSequence.real_policy`
    the series satisfies ``A_N = (1/N) sum_{n<N} |u_n|``.  Coordinates
    beyond the cached prefix are 0.
    """
    u, _ = w.real_policy()
    bits = np.where(u >= 0, 0, 1).astype(np.int8)
    bits.setflags(write=False)
    size = len(bits)

    def rule(n, bits=bits, size=size):
        return int(bits[n]) if n < size else 0

    x = RulePoint(rule, name="sign-of-weight")
    return CylinderIndicatorDiff("0", "1"), x


@dataclass(frozen=True)
class LiftedPair:
    observable: LocallyConstant
    point: object
    j0: int
    tau: int


def lift_pair(h: CodedHorseshoe, cert: DisjointStepsCertificate, g, x0, w: WeightSequence,
              window_depth: int = 2, grid=None) -> LiftedPair:
    """Ambient pair ``(g*, sigma^{tau - j0} x0)`` from a coded pair ``(g, x0)``.

    ``g*`` is the locally constant function on ambient words of length
    ``tau * window_depth``: it equals ``g`` on concatenations of
    generators and 0 elsewhere.  A full certificate makes every window at
    an offset not divisible by ``tau`` miss the table, so only the residue
    ``j0`` contributes to the ambient sum.
    """
    if tuple(cert.generators) != tuple(h.generators):
        raise PreconditionError("certificate does not belong to this horseshoe")
    fresh = certify(h.generators, h.sided)
    if not fresh.full or not cert.full:
        raise PreconditionError("lift needs a full first-return certificate (offsets 1..tau-1)")
    tau = h.order
    depth = int(window_depth)
    if depth < getattr(g, "length", 1):
        raise PreconditionError(f"window_depth {depth} shorter than the observable's code length")
    j0, _ = best_residue(w, tau, grid)
    code = h.code
    table = {}
    for i in range(2 ** depth):
        c = format(i, f"0{depth}b")
        val = _symbolic_values(g, c, np.array([0]), 2)[0]
        if val != 0:
            table[code.encode(c)] = complex(val) if np.iscomplexobj(val) else float(val)
    g_star = LocallyConstant(tau * depth, table, 0.0)
    return LiftedPair(g_star, shift(x0, tau - j0), j0, tau)


def lift_comparison(h: CodedHorseshoe, cert: DisjointStepsCertificate, g, x0, w: WeightSequence,
                    N: int, window_depth: int = 2) -> dict:
    """Ambient ``A_{tau N}`` against ``(1/tau)`` times the coded ``A_N``.

    The coded series uses ``v_m = w_{tau m + j0}`` along ``T^m(T x0)``.
    """
    lift = lift_pair(h, cert, g, x0, w, window_depth)
    tau, j0 = lift.tau, lift.j0
    if tau * N > len(w):
        raise PreconditionError(f"need {tau * N} weights, have {len(w)}")
    amb = weighted_average_series(FullShift(), lift.observable, lift.point, w, [tau * N])
    v = w.values[j0::tau][:N]
    coded = weighted_average_series(CodedSubshift(h), g, shift(x0, tau), v, [N])
    a, c = complex(amb.values[-1]), complex(coded.values[-1])
    return {"tau": tau, "j0": j0, "N": N, "ambient": a, "coded": c,
            "difference": abs(a - c / tau), "bound": 2 * tau / N}


def coded_point(h: CodedHorseshoe, choices) -> BlockStream:
    """Point of ``K`` with the given choice sequence (a symbolic point over {0,1})."""
    return BlockStream(choices, h.generators)


# ---------------------------------------------------------------------------
# uniquely ergodic control

def _resonance(alpha: float, beta: float, kmax: int = 50, tol: float = 1e-9):
    for k in range(-kmax, kmax + 1):
        d = (beta - k * alpha) % 1.0
        if min(d, 1.0 - d) < tol:
            return k
    return None


def default_control_grid(n_max: int = 10 ** 6, linear: int = 1000) -> list:
    pts = set(geometric_grid(n_max))
    pts.update(int(v) for v in np.linspace(n_max / linear, n_max, linear))
    return sorted(p for p in pts if p >= 1)


def ue_control(alpha: float, beta, grid=None, h: int = 1, x: float = 0.0) -> dict:
    """Rotation by ``alpha`` against ``w_n = exp(-2 pi i beta n)``, ``f = exp(2 pi i h x)``.

    Reports the largest ratio ``|A_N| N |1 - e^{2 pi i (h alpha - beta)}| / 2``
    over the grid; the geometric-sum identity makes it at most 1.
    """
    grid = default_control_grid() if grid is None else [int(N) for N in grid]
    beta_f = float(Fraction(beta)) if isinstance(beta, str) else float(beta)
    n = grid[-1]
    idx = np.arange(n)
    w = np.exp(-1j * TWO_PI * frac_mul(idx, beta_f))
    series = weighted_average_series(CircleRotation(alpha), Character((h,)), x, w, grid)
    gap = abs(1 - cmath.exp(2j * math.pi * (h * alpha - beta_f)))
    mods = np.abs(series.values)
    warnings = []
    k = _resonance(h * alpha, beta_f)
    if k is not None:
        warnings.append(f"beta is within 1e-9 of {k}*alpha mod 1 (near-eigenvalue)")
    if gap == 0.0:
        ratios = np.zeros(len(grid))
        warnings.append("beta equals h*alpha mod 1: eigenvalue case, no decay")
    else:
        ratios = mods * np.asarray(grid, dtype=float) * gap / 2
    for wmsg in warnings:
        log.warning(wmsg)
    max_ratio = float(ratios.max())
    return {
        "alpha": alpha, "beta": beta_f, "h": h,
        "grid_max": n, "grid_points": len(grid),
        "max_ratio": max_ratio,
        "holds": max_ratio <= 1.0,
        "min_abs": float(mods.min()), "final_abs": float(mods[-1]),
        "resonance_k": k,
        "warnings": warnings,
        "series": series,
    }
