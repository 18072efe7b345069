"""Riesz products on the torus: Fourier oracle, truncated sampler, weighted-limit check.

The depth-``K`` partial product is

    P_K(x) = prod_{n<K} (1 + Re(a_n e^{2 pi i <h_{qn}, x>})),

a probability density when the frequencies are dissociate.  Torus points
are uint64 fixed-point vectors (``x = X / 2**64``); integer frequencies
act on them by wrapping uint64 arithmetic, so every phase
``<h, x> mod 1`` is exact before the final float conversion.
"""
from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from ..errors import EnvelopeTooLoose, IntegrityError, PreconditionError, Unsupported
from .lacunary import FrequencyPlan, psi_sequence
from .spectral import MASK64, ToralAffineMap

MAX_DEPTH = 16
ACCEPT_FLOOR = 1e-6
CHUNK = 8192
TWO_PI = 2.0 * math.pi
SCALE = float(1 << 64)


# ---------------------------------------------------------------------------
# fixed point helpers

def to_fixed(x, d: int) -> np.ndarray:
    """Torus point (floats, Fractions or uint64 array) to uint64 fixed point."""
    arr = np.asarray(x)
    if arr.dtype == np.uint64:
        return arr.reshape(d) if arr.ndim <= 1 else arr
    vals = np.atleast_1d(x)
    if len(vals) != d:
        raise PreconditionError(f"point has {len(vals)} coordinates on a {d}-torus")
    return np.array([int((Fraction(v) % 1) * (1 << 64)) & MASK64 for v in vals], dtype=np.uint64)


def character_phase(h, X: np.ndarray) -> np.ndarray:
    """``<h, x> mod 1`` for fixed-point points ``X`` of shape (..., d)."""
    hu = np.array([int(v) & MASK64 for v in h], dtype=np.uint64)
    with np.errstate(over="ignore"):
        acc = (X * hu).sum(axis=-1, dtype=np.uint64)
    return acc.astype(np.float64) / SCALE


# ---------------------------------------------------------------------------
# spec

@dataclass
class RieszSpec:
    """Riesz product over ``H_0 = (h_{qn})`` with ``|a_n| = r``.

    ``rule = "constant"`` gives ``a_n = r``; ``rule = "weighted"`` gives
    ``a_n = r exp(i arg w_{qn} + 2 pi i psi_{qn})`` (``arg 0`` read as 0).
    """

    plan: FrequencyPlan
    r: float = 0.5
    K: int = 12
    rule: str = "constant"
    weights: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.r <= 1:
            raise PreconditionError(f"r must be in [0, 1], got {self.r}")
        if not 1 <= self.K <= MAX_DEPTH:
            raise PreconditionError(f"depth K must be in 1..{MAX_DEPTH}, got {self.K}")
        if self.rule not in ("constant", "weighted"):
            raise PreconditionError(f"unknown coefficient rule {self.rule!r}")
        if self.rule == "weighted":
            if self.weights is None:
                raise PreconditionError("weighted rule needs weights")
            w = np.asarray(getattr(self.weights, "values", self.weights))
            if len(w) <= self.plan.q * (self.K - 1):
                raise PreconditionError("weights too short for the requested depth")
            self.weights = w

    @property
    def frequencies(self) -> list:
        return [self.plan.h(self.plan.q * n) for n in range(self.K)]

    def coefficients(self) -> np.ndarray:
        K, q = self.K, self.plan.q
        if self.rule == "constant":
            return np.full(K, complex(self.r))
        psi = psi_sequence(self.plan.B, self.plan.b, self.plan.h0, q * (K - 1))
        out = np.empty(K, dtype=complex)
        for n in range(K):
            wv = complex(self.weights[q * n])
            arg = cmath.phase(wv) if wv != 0 else 0.0
            out[n] = self.r * cmath.exp(1j * arg + 2j * math.pi * float(psi[q * n]))
        return out


# ---------------------------------------------------------------------------
# Fourier oracle

def decompositions(freqs: list, k, limit: int = 2) -> list:
    """Sign patterns ``eps`` with ``sum eps_n freqs[n] = k`` (at most ``limit`` of them).

    Depth-first from the largest index down; a branch is cut when the
    residual exceeds, coordinatewise, the total mass of the remaining terms.
    """
    K = len(freqs)
    d = len(freqs[0])
    target = tuple(int(v) for v in np.atleast_1d(k))
    if len(target) != d:
        raise PreconditionError(f"frequency has {len(target)} coordinates, expected {d}")
    # mass[n][i] = sum_{m<n} |freqs[m][i]|
    mass = [[0] * d]
    for f in freqs:
        mass.append([a + abs(b) for a, b in zip(mass[-1], f)])
    found = []
    eps = [0] * K

    def walk(n, res):
        if len(found) >= limit:
            return
        if n == 0:
            if not any(res):
                found.append(tuple(eps))
            return
        f = freqs[n - 1]
        m = mass[n - 1]
        for e in (1, -1, 0):
            nxt = tuple(r - e * v for r, v in zip(res, f))
            if all(abs(x) <= b for x, b in zip(nxt, m)):
                eps[n - 1] = e
                walk(n - 1, nxt)
                eps[n - 1] = 0

    walk(K, target)
    return found


def riesz_coefficient(spec: RieszSpec, k) -> complex:
    """``nu_hat(k)``: product of ``a_n^(eps_n)`` if ``k`` is representable, else 0."""
    found = decompositions(spec.frequencies, k, limit=2)
    if not found:
        return 0j
    if len(found) > 1:
        raise IntegrityError(f"frequency {k} has two representations {found[0]} and {found[1]}; "
                             "the plan is not dissociate at this depth")
    a = spec.coefficients()
    val = 1 + 0j
    for an, e in zip(a, found[0]):
        if e == 1:
            val *= an / 2
        elif e == -1:
            val *= an.conjugate() / 2
    return val


def character_expectation(spec: RieszSpec, k) -> complex:
    """``E[exp(2 pi i <k, x>)]`` under the partial product, i.e. ``nu_hat(-k)``."""
    return riesz_coefficient(spec, tuple(-int(v) for v in np.atleast_1d(k)))


# ---------------------------------------------------------------------------
# sampling

def density(spec: RieszSpec, X: np.ndarray) -> np.ndarray:
    """``P_K`` at fixed-point points ``X`` (shape (m, d))."""
    a = spec.coefficients()
    out = np.ones(len(X))
    for h, an in zip(spec.frequencies, a):
        ph = character_phase(h, X)
        out *= 1.0 + abs(an) * np.cos(TWO_PI * ph + cmath.phase(an))
    return out


def _uniform(rng: np.random.Generator, m: int, d: int) -> np.ndarray:
    return rng.integers(0, 1 << 64, size=(m, d), dtype=np.uint64, endpoint=False)


@dataclass(frozen=True)
class SampleBatch:
    points: np.ndarray        # uint64 fixed point, shape (count, d)
    weights: Optional[np.ndarray]  # importance weights (d >= 2), else None
    proposals: int
    path: str

    @property
    def acceptance(self) -> float:
        return len(self.points) / self.proposals if self.proposals else 1.0

    def as_float(self) -> np.ndarray:
        return self.points.astype(np.float64) / SCALE


def _chunk_rejection(spec: RieszSpec, count: int, ss: np.random.SeedSequence, d: int):
    rng = np.random.default_rng(ss)
    env = (1.0 + spec.r) ** spec.K
    got, tried = [], 0
    need = count
    while need > 0:
        m = max(64, int(need * env * 1.1) + 16)
        m = min(m, 1 << 20)
        X = _uniform(rng, m, d)
        u = rng.random(m) * env
        hit = np.flatnonzero(u < density(spec, X))
        if len(hit) > need:
            # keep the accepted prefix a sequential sampler would return and
            # count only the proposals it would have consumed
            hit = hit[:need]
            tried += int(hit[-1]) + 1
        else:
            tried += m
        keep = X[hit]
        got.append(keep)
        need -= keep.shape[0]
        if tried > 1e5 and (count - need) / tried < ACCEPT_FLOOR:
            raise EnvelopeTooLoose(f"acceptance {(count - need) / tried:.2e} below {ACCEPT_FLOOR}; "
                                   f"reduce K={spec.K} or r={spec.r}")
    return np.concatenate(got) if got else np.empty((0, d), dtype=np.uint64), tried


def _chunk_importance(spec: RieszSpec, count: int, ss: np.random.SeedSequence, d: int):
    rng = np.random.default_rng(ss)
    X = _uniform(rng, count, d)
    return X, density(spec, X)


def riesz_sample(spec: RieszSpec, count: int, seed: int, jobs: int = 1) -> SampleBatch:
    """Draw ``count`` points from the depth-``K`` partial product.

    d = 1: exact rejection sampling against the uniform law with envelope
    ``(1+r)^K``.  d >= 2: uniform points with importance weights ``P_K``
    (truncation-biased; see the report caveat).  Work is split into fixed
    chunks, each with its own child seed, so the output does not depend on
    ``jobs``.
    """
    if count < 1:
        raise PreconditionError("count must be >= 1")
    d = spec.plan.dim
    if spec.K > MAX_DEPTH:
        raise Unsupported(f"depth K={spec.K} above {MAX_DEPTH}")
    sizes = [CHUNK] * (count // CHUNK) + ([count % CHUNK] if count % CHUNK else [])
    children = np.random.SeedSequence(int(seed)).spawn(len(sizes))
    if d == 1 and spec.r > 0:
        env = (1.0 + spec.r) ** spec.K
        if 1.0 / env < ACCEPT_FLOOR:
            raise EnvelopeTooLoose(f"envelope (1+r)^K = {env:.3g} gives acceptance below {ACCEPT_FLOOR}")
        work = _chunk_rejection
        path = "exact-rejection"
    elif d == 1:
        work = _chunk_rejection
        path = "exact-uniform"
    else:
        work = _chunk_importance
        path = "importance"
    tasks = list(zip(sizes, children))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(lambda t: work(spec, t[0], t[1], d), tasks))
    else:
        parts = [work(spec, n, ss, d) for n, ss in tasks]
    if path == "importance":
        pts = np.concatenate([p[0] for p in parts])
        wts = np.concatenate([p[1] for p in parts])
        return SampleBatch(pts, wts, count, path)
    pts = np.concatenate([p[0] for p in parts])
    return SampleBatch(pts, None, int(sum(p[1] for p in parts)), path)


def _mean_stderr(values: np.ndarray, weights: Optional[np.ndarray] = None) -> tuple:
    """Complex mean and its standard error (``sqrt(E|Y - mean|^2 / n)``)."""
    if weights is not None:
        values = values * weights
    n = len(values)
    mean = complex(values.mean())
    var = float(np.mean(np.abs(values - mean) ** 2)) * n / max(n - 1, 1)
    return mean, math.sqrt(var / n)


def empirical_character(batch: SampleBatch, k) -> tuple:
    """Monte-Carlo ``E[exp(2 pi i <k, x>)]`` and its standard error."""
    ph = character_phase(tuple(np.atleast_1d(k)), batch.points)
    return _mean_stderr(np.exp(1j * TWO_PI * ph), batch.weights)


# ---------------------------------------------------------------------------
# weighted limit

def residue_averages(T: ToralAffineMap, h0, X: np.ndarray, w: np.ndarray, q: int, p: int, N: int) -> np.ndarray:
    """``(1/N) sum_{n<N} w_{qn+p} f(T^{qn+p} x)`` for each sample ``x``.

    ``f(T^m x) = e^{2 pi i psi_m} e^{2 pi i <h_m, x>}``, both factors exact mod 1.
    """
    from .lacunary import frequency_orbit
    m_max = q * (N - 1) + p
    hs = frequency_orbit(T.B, h0, m_max)
    psi = psi_sequence(T.B, T.b, h0, m_max)
    acc = np.zeros(len(X), dtype=complex)
    for n in range(N):
        m = q * n + p
        wv = complex(w[m])
        if wv == 0:
            continue
        ph = character_phase(hs[m], X) + float(psi[m])
        acc += wv * np.exp(1j * TWO_PI * ph)
    return acc / N


def verify_weighted_limit(T: ToralAffineMap, w, spec: RieszSpec, N: int, samples: int,
                          seed: int, jobs: int = 1, sigmas: float = 3.0) -> dict:
    """Monte-Carlo check of the weighted limit at finite ``N``.

    Statistic: the complex sample mean of ``Y = (1/N) sum_{n<N} w_{qn} f(T^{qn} x)``;
    its exact expectation under the partial product is
    ``(r/2)(1/N) sum_{n<N} |w_{qn}|`` when ``N <= K``.  Cross residues
    ``p = 1..q-1`` are compared against 0.
    """
    wv = np.asarray(getattr(w, "values", w))
    q, d = spec.plan.q, spec.plan.dim
    if d == 1 and N > spec.K:
        raise PreconditionError(f"N={N} exceeds truncation depth K={spec.K} on the exact path")
    if len(wv) < q * N:
        raise PreconditionError(f"need {q * N} weights, have {len(wv)}")
    batch = riesz_sample(spec, samples, seed, jobs)
    h0 = spec.plan.h0
    Y = residue_averages(T, h0, batch.points, wv, q, 0, N)
    mean, se = _mean_stderr(Y, batch.weights)
    target = spec.r / 2 * math.fsum(abs(complex(wv[q * n])) for n in range(N)) / N
    absY = np.abs(Y) if batch.weights is None else np.abs(Y) * batch.weights
    cross = {}
    for p in range(1, q):
        Yp = residue_averages(T, h0, batch.points, wv, q, p, N)
        mp, sp = _mean_stderr(Yp, batch.weights)
        cross[str(p)] = {"estimate": [mp.real, mp.imag], "stderr": sp, "target": 0.0,
                         "ok": abs(mp) <= sigmas * sp}
    report = {
        "target": target,
        "estimate": [mean.real, mean.imag],
        "stderr": se,
        "n_samples": len(batch.points),
        "ok": abs(mean - target) <= sigmas * se,
        "mean_abs": float(absY.mean()),
        "acceptance": batch.acceptance,
        "cross_residues": cross,
        "truncation": {"K": spec.K, "path": batch.path},
    }
    if batch.path == "importance":
        report["caveat"] = ("d >= 2: importance weights from the depth-K partial product; "
                            "estimates carry truncation bias")
    return report
