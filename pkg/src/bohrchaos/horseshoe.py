"""Horseshoes with disjoint steps inside the binary full shift.

A horseshoe of order ``tau`` is stored as two distinct generator words of
length ``tau``; the set ``K = {g0, g1}^infinity`` is ``sigma^tau``-invariant
and the choice sequence is the conjugacy with the full shift.

The pipeline:

``refine_cylinder``           cylinder C -> sub-cylinder C' with no self-overlap
``build_horseshoe_in_cylinder``  C' -> generators C'10, C'11 + certificate
``find_displacement_witness`` cylinder of K avoiding the shifted copies of K
``refine_avoiding``           sub-horseshoe inside that cylinder
``disjointify``               prime-by-prime then residue-by-residue refinement

Every certificate is recomputed from the generators alone
(:func:`certify`), so a serialised certificate can be re-verified without
trusting the producer.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

from .errors import (CertificateFailure, ConstantWord, DepthExceeded, PreconditionError)
from .symbolic import (BlockCode, Word, as_word, disjoint_offsets, injective_offsets,
                       relabel, suffix_injectivity)

log = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 16


# ---------------------------------------------------------------------------
# data

@dataclass(frozen=True)
class RefinedCylinder:
    original: Word
    refined: Word
    n0: int
    sided: str = "one"

    @property
    def rank(self) -> int:
        return len(self.refined)


@dataclass(frozen=True)
class CodedHorseshoe:
    """``K = {gen_0, gen_1}^infinity`` with ``sigma^order`` acting as the shift.

    ``marker_len`` is the length of the shared 0-run that prefixes (and
    suffixes, in the cylinder construction) both generators; ``None`` for
    horseshoes produced by composition.  ``ambient_code`` records the block
    code through which code-level generators were pushed, when applicable.
    """

    generators: tuple
    marker_len: Optional[int] = None
    ambient_code: Optional[BlockCode] = None
    sided: str = "one"

    def __post_init__(self):
        gens = tuple(self.generators)
        if len(gens) != 2:
            raise PreconditionError("a coded horseshoe has exactly two generators")
        if len(gens[0]) != len(gens[1]) or not gens[0]:
            raise PreconditionError("generators must be non-empty and of equal length")
        if gens[0] == gens[1]:
            raise PreconditionError("generators must be distinct")
        if self.sided not in ("one", "two"):
            raise PreconditionError(f"sided must be 'one' or 'two', got {self.sided!r}")
        object.__setattr__(self, "generators", gens)

    @property
    def order(self) -> int:
        return len(self.generators[0])

    @property
    def code(self) -> BlockCode:
        return BlockCode(*self.generators)

    def to_json(self) -> dict:
        out = {"generators": list(self.generators), "order": self.order,
               "marker_len": self.marker_len, "sided": self.sided}
        if self.ambient_code is not None:
            out["ambient_code"] = self.ambient_code.to_json()
        return out


@dataclass(frozen=True)
class DisjointStepsCertificate:
    """Offsets ``j`` with ``K`` and ``sigma^j K`` disjoint, checked by windows.

    ``offsets_checked`` lists every ``j`` in ``1..tau-1`` passing the
    pair-window test, ``injectivity_checked`` every ``n`` passing the
    suffix test (one-sided only).  The certificate is full when all offsets
    pass, i.e. ``tau`` is a first return time of ``K``.
    """

    generators: tuple
    tau: int
    offsets_checked: tuple
    injectivity_checked: tuple
    sided: str = "one"
    trace: tuple = field(default=(), compare=False)

    @property
    def full(self) -> bool:
        return len(self.offsets_checked) == self.tau - 1

    def covers(self, offsets) -> bool:
        have = set(self.offsets_checked)
        return all(j in have for j in offsets if 0 < j < self.tau)

    def to_json(self) -> dict:
        return {
            "generators": list(self.generators),
            "tau": self.tau,
            "sided": self.sided,
            "offsets_checked": list(self.offsets_checked),
            "injectivity_checked": list(self.injectivity_checked),
            "trace": list(self.trace),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass(frozen=True)
class DisplacementTask:
    p: int
    q: int
    s: int
    J: frozenset = frozenset()
    mode: str = "disp2"

    def __post_init__(self):
        object.__setattr__(self, "J", frozenset(self.J))
        if self.p < 1 or self.q < 1:
            raise PreconditionError("p and q must be positive")
        if not 1 <= self.s < self.q:
            raise PreconditionError(f"need 1 <= s < q, got s={self.s}, q={self.q}")
        if any(not 1 <= j <= self.q for j in self.J):
            raise PreconditionError("J must be a subset of {1..q}")
        if self.mode == "disp2":
            if self.q % self.s:
                raise PreconditionError(f"disp2 requires s | q, got s={self.s}, q={self.q}")
        elif self.mode == "disp1":
            if self.multiplier() is None:
                raise PreconditionError(
                    f"disp1 requires n*s mod q in J for some n (s={self.s}, q={self.q}, J={sorted(self.J)})")
        else:
            raise PreconditionError(f"unknown mode {self.mode!r}")

    @property
    def order(self) -> int:
        return self.p * self.q

    def multiplier(self) -> Optional[int]:
        """Smallest ``n >= 1`` with ``n*s mod q`` in ``J``, if any."""
        for n in range(1, self.q + 1):
            r = (n * self.s) % self.q
            if r in self.J or (r == 0 and self.q in self.J):
                return n
        return None

    def displaced_offsets(self) -> list:
        return [k * self.q + self.s for k in range(self.p)]


@dataclass(frozen=True)
class ResidueCoverSolution:
    N: int
    table: dict  # n -> (x, p) with n*x = N/p (mod N)

    def check(self) -> bool:
        N = self.N
        for n, (x, p) in self.table.items():
            if N % p or not _is_prime(p) or (n * x - N // p) % N:
                return False
        return set(self.table) == set(range(1, N))


# ---------------------------------------------------------------------------
# arithmetic

def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


def prime_factors(n: int) -> list:
    """Distinct prime factors of ``n`` in increasing order."""
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def solve_residue_cover(N: int) -> ResidueCoverSolution:
    """For each ``n`` in ``1..N-1`` find ``(x, p)``, ``p | N`` prime, with ``n*x = N/p (mod N)``.

    Brute force over ``x = 1, 2, ...``; the first hit wins.
    """
    if N < 2:
        raise PreconditionError(f"N must be >= 2, got {N}")
    targets = {N // p: p for p in prime_factors(N)}
    table = {}
    for n in range(1, N):
        for x in range(1, N):
            p = targets.get(n * x % N)
            if p is not None:
                table[n] = (x, p)
                break
        else:  # pragma: no cover - excluded by the subgroup argument
            raise CertificateFailure(f"no residue cover for n={n}, N={N}")
    return ResidueCoverSolution(N, table)


# ---------------------------------------------------------------------------
# certificates

def certify(generators, sided: str = "one", trace=()) -> DisjointStepsCertificate:
    """Recompute the certificate of ``generators`` from scratch."""
    gens = tuple(generators)
    tau = len(gens[0])
    offsets = tuple(disjoint_offsets(gens, sided))
    inj = tuple(injective_offsets(gens)) if sided == "one" else ()
    return DisjointStepsCertificate(gens, tau, offsets, inj, sided, tuple(trace))


def verify_certificate(data) -> DisjointStepsCertificate:
    """Re-check a serialised certificate; raise :class:`CertificateFailure` on mismatch.

    Accepts a dict, a JSON string or a certificate object.
    """
    if isinstance(data, DisjointStepsCertificate):
        data = data.to_json()
    elif isinstance(data, str):
        data = json.loads(data)
    try:
        gens = tuple(as_word(g, 2) for g in data["generators"])
        tau = int(data["tau"])
        sided = data.get("sided", "one")
        claimed = tuple(int(j) for j in data["offsets_checked"])
        claimed_inj = tuple(int(j) for j in data.get("injectivity_checked", ()))
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateFailure(f"malformed certificate: {exc}") from exc
    if len(gens) != 2 or gens[0] == gens[1] or len({len(g) for g in gens}) != 1:
        raise CertificateFailure("certificate generators must be two distinct equal-length words")
    if tau != len(gens[0]):
        raise CertificateFailure(f"tau={tau} but generators have length {len(gens[0])}")
    fresh = certify(gens, sided, data.get("trace", ()))
    if fresh.offsets_checked != claimed:
        bad = sorted(set(claimed) - set(fresh.offsets_checked))
        missing = sorted(set(fresh.offsets_checked) - set(claimed))
        raise CertificateFailure(f"offset list does not re-verify (claimed but failing: {bad[:10]}, "
                                 f"verified but not claimed: {missing[:10]})")
    if fresh.injectivity_checked != claimed_inj:
        raise CertificateFailure("injectivity list does not re-verify")
    return fresh


# ---------------------------------------------------------------------------
# constructions inside a cylinder

def _minimal_overlap_period(c: Word) -> int:
    M = len(c)
    for n in range(1, M):
        if c[n:] == c[:M - n]:
            return n
    return M


def refine_cylinder(C: Word, sided: str = "one") -> RefinedCylinder:
    """Sub-cylinder ``C'`` of ``C`` with ``C' ∩ sigma^n(C') = ∅`` for ``1 <= n < |C'|``.

    ``n0`` is the least period of ``C`` (``n0 = |C|`` if none shorter); when
    ``n0 < |C|`` the word is extended by ``n0`` copies of the symbol opposite
    to ``C[0]``.  The two-sided variant gives the same words.
    """
    C = as_word(C, 2)
    if not C:
        raise PreconditionError("cylinder word must be non-empty")
    if sided not in ("one", "two"):
        raise PreconditionError(f"sided must be 'one' or 'two', got {sided!r}")
    flip = C[0] == "1"
    c = relabel(C) if flip else C
    n0 = _minimal_overlap_period(c)
    refined = c if n0 == len(c) else c + "1" * n0
    if flip:
        refined = relabel(refined)
    return RefinedCylinder(C, refined, n0, sided)


def build_horseshoe_in_cylinder(C: Word, sided: str = "one", pre_refine: bool = True):
    """Horseshoe ``{C'10, C'11}^infinity`` inside ``[C]`` with a full certificate.

    Length-one cylinders have no usable marker; with ``pre_refine`` they are
    first extended by the opposite symbol (``[0] -> [01]``), otherwise
    :class:`ConstantWord` is raised.
    """
    C = as_word(C, 2)
    if not C:
        raise PreconditionError("cylinder word must be non-empty")
    flip = C[0] == "1"
    c = relabel(C) if flip else C
    if len(c) == 1:
        if not pre_refine:
            raise ConstantWord(f"cylinder {C!r} has rank 1; enable pre_refine")
        c = c + "1"
    y = refine_cylinder(c, sided).refined
    n1 = y.index("1")
    gens = (y + "10", y + "11")
    if flip:
        gens = tuple(relabel(g) for g in gens)
    h = CodedHorseshoe(gens, marker_len=n1, sided=sided)
    cert = certify(gens, sided, trace=({"op": "cylinder", "cylinder": C, "refined": y if not flip else relabel(y)},))
    if not cert.full:
        raise CertificateFailure(f"cylinder horseshoe for {C!r} failed offsets "
                                 f"{sorted(set(range(1, cert.tau)) - set(cert.offsets_checked))}")
    if sided == "one" and len(cert.injectivity_checked) != cert.tau - 1:
        raise CertificateFailure(f"cylinder horseshoe for {C!r} is not suffix-injective")
    return h, cert


# ---------------------------------------------------------------------------
# displacement

def _transition_tables(gens, offsets):
    """For each offset t: table[(i, c)] = states j with gens[c] == gens[i][t:] + gens[j][:t]."""
    tables = []
    for t in offsets:
        table = {}
        for i in (0, 1):
            tail = gens[i][t:]
            for j in (0, 1):
                w = tail + gens[j][:t]
                for c in (0, 1):
                    if gens[c] == w:
                        table.setdefault((i, c), []).append(j)
        tables.append(table)
    return tables


def find_displacement_witness(h: CodedHorseshoe, task: DisplacementTask,
                              max_depth: int = DEFAULT_MAX_DEPTH) -> Word:
    """Shortest (then lexicographically least) ``u = g_{c_1}..g_{c_d}`` with
    ``[u]`` disjoint from every ``sigma^{kq+s}(K)``, ``0 <= k < p``.

    The question "does ``u`` occur at offset ``t`` in some point of ``K``"
    is a path question in a two-state automaton (the state is the generator
    straddling the window boundary), so the search runs over subsets of
    (offset, state) pairs; a code prefix is a witness when its subset is
    empty.  Prefixes reaching an already-seen subset are pruned, which does
    not change the answer.
    """
    if h.order != task.order:
        raise PreconditionError(f"horseshoe order {h.order} != p*q = {task.order}")
    need = [k * task.q for k in range(1, task.p)]
    cert = certify(h.generators, h.sided)
    if not cert.covers(need):
        raise PreconditionError("horseshoe lacks certificate for offsets k*q, 1 <= k < p")
    gens = h.generators
    offsets = task.displaced_offsets()
    tables = _transition_tables(gens, offsets)
    start = frozenset((ti, i) for ti in range(len(offsets)) for i in (0, 1))
    seen = {start}
    level = [("", start)]
    for depth in range(1, max_depth + 1):
        nxt = []
        for prefix, states in level:
            for c in (0, 1):
                new = frozenset((ti, j) for ti, i in states
                                for j in tables[ti].get((i, c), ()))
                code = prefix + str(c)
                if not new:
                    log.debug("witness %s at depth %d for s=%d", code, depth, task.s)
                    return "".join(gens[int(b)] for b in code)
                if new not in seen:
                    seen.add(new)
                    nxt.append((code, new))
        if not nxt:
            raise DepthExceeded(max_depth, f"search space exhausted at depth {depth}; s={task.s} is not displaced")
        level = nxt
    raise DepthExceeded(max_depth, f"s={task.s}, q={task.q}, p={task.p}")


def _required_offsets(task: DisplacementTask, M: int) -> list:
    p, q = task.p, task.q
    out = [k * q for k in range(1, p * M)]
    for j in sorted(task.J | {task.s}):
        out.extend(k * q + j for k in range(p * M) if k * q + j < p * q * M)
    return out


def _base_requirements(h: CodedHorseshoe, task: DisplacementTask, cert: DisjointStepsCertificate):
    p, q = task.p, task.q
    need = [k * q for k in range(1, p)]
    need += [k * q + j for j in task.J for k in range(p) if k * q + j < p * q]
    if not cert.covers(need):
        missing = sorted(set(need) - set(cert.offsets_checked))
        raise PreconditionError(f"horseshoe not certified for offsets {missing[:10]}")
    if task.mode == "disp2" and h.sided == "one" and p > 1:
        if not suffix_injectivity(h.generators, (p - 1) * q):
            raise PreconditionError(f"sigma^{(p - 1) * q} not certified injective on the horseshoe")


def refine_avoiding(h: CodedHorseshoe, task: DisplacementTask, witness: Word, trace=()):
    """Sub-horseshoe of ``K ∩ [witness]`` of order ``M*p*q`` gaining offsets ``k*q + s``.

    The witness is decoded to code coordinates, a cylinder horseshoe is
    built there, and its generators are pushed back through ``h``'s code.
    """
    if h.order != task.order:
        raise PreconditionError(f"horseshoe order {h.order} != p*q = {task.order}")
    base = certify(h.generators, h.sided)
    _base_requirements(h, task, base)
    code = h.code
    c = code.decode(witness)
    inner, _ = build_horseshoe_in_cylinder(c, h.sided)
    M = inner.order
    gens = tuple(code.encode(g) for g in inner.generators)
    step = {"op": task.mode, "p": task.p, "q": task.q, "s": task.s, "J": sorted(task.J),
            "witness_code": c, "M": M, "tau": len(gens[0])}
    new = CodedHorseshoe(gens, ambient_code=code, sided=h.sided)
    cert = certify(gens, h.sided, tuple(trace) + (step,))
    need = _required_offsets(task, M)
    if not cert.covers(need):
        missing = sorted(set(need) - set(cert.offsets_checked))
        raise CertificateFailure(f"refinement for s={task.s} misses offsets {missing[:10]}")
    if task.mode == "disp2" and h.sided == "one":
        n = (task.p * M - 1) * task.q
        if n >= 1 and not suffix_injectivity(gens, n):
            raise CertificateFailure(f"refinement for s={task.s}: sigma^{n} not injective")
    return new, cert


def disjointify(h: CodedHorseshoe, max_depth: int = DEFAULT_MAX_DEPTH):
    """Refine ``h`` (order N) to a horseshoe of order ``M*N`` with disjoint steps.

    Step 1 handles the offsets ``N/p`` for primes ``p | N`` (largest prime
    first) in disp2 mode; Step 2 the remaining residues ``k`` in increasing
    order in disp1 mode, each justified by a residue-cover entry
    ``k*x = N/p (mod N)``.
    """
    N = h.order
    if N == 1:
        return h, certify(h.generators, h.sided, ({"op": "identity"},))
    cur = h
    trace = [{"op": "input", "generators": list(h.generators), "order": N}]
    p, J = 1, set()
    primes = sorted(prime_factors(N), reverse=True)
    for prime in primes:
        s = N // prime
        mode = "disp2"
        if h.sided == "one" and p > 1 and not suffix_injectivity(cur.generators, (p - 1) * N):
            mode = "disp1"
            log.info("suffix injectivity fails at p=%d; trying disp1 for s=%d", p, s)
        task = DisplacementTask(p, N, s, frozenset(J), mode)
        cur, cert, trace = _refine_step(cur, task, max_depth, trace, f"step 1, prime {prime}")
        p *= cur.order // (p * N)
        J.add(s)
    cover = solve_residue_cover(N)
    for k in range(1, N):
        if k in J:
            continue
        x, prime = cover.table[k]
        task = DisplacementTask(p, N, k, frozenset(J), "disp1")
        trace.append({"op": "residue", "k": k, "x": x, "prime": prime, "target": N // prime})
        cur, cert, trace = _refine_step(cur, task, max_depth, trace, f"step 2, residue {k}")
        p *= cur.order // (p * N)
        J.add(k)
    cert = certify(cur.generators, cur.sided, trace)
    if not cert.full:
        raise CertificateFailure("disjointify finished without a full certificate")
    return cur, cert


def _refine_step(h, task, max_depth, trace, label):
    try:
        witness = find_displacement_witness(h, task, max_depth)
    except DepthExceeded as exc:
        raise DepthExceeded(max_depth, f"{label}: {exc.detail}") from exc
    new, cert = refine_avoiding(h, task, witness, trace)
    return new, cert, list(cert.trace)
