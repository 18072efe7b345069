"""Words, points and window checks over small finite alphabets.

Words are plain ``str`` objects over the digit characters ``"0"``..``"9"``;
symbol ``k`` is the character ``str(k)``.  Keeping words as strings makes
every window comparison a C-level slice compare and lets certificate checks
use ``str.find``.

Points of a shift space are described finitely by one of three kinds:

* :class:`PeriodicPoint`  -- eventually periodic (preamble, period),
* :class:`BlockStream`   -- a choice sequence pushed through equal-length blocks,
* :class:`RulePoint`     -- an index -> symbol callable (must be pure).

Two-sided points share the same classes with ``two_sided=True``; the
origin is anchored at coordinate 0 and cylinders are read from there.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import CodeError, PreconditionError

Word = str

DIGITS = "0123456789"


def as_word(symbols, alphabet: int = 2) -> Word:
    """Normalise ``symbols`` (str or iterable of ints) to a validated word."""
    if not 1 <= alphabet <= 10:
        raise PreconditionError(f"alphabet size must be in 1..10, got {alphabet}")
    if isinstance(symbols, str):
        word = symbols
    else:
        word = "".join(str(int(s)) for s in symbols)
    allowed = DIGITS[:alphabet]
    bad = set(word) - set(allowed)
    if bad:
        raise PreconditionError(f"symbols {sorted(bad)} not in alphabet {{0..{alphabet - 1}}}")
    return word


def relabel(word: Word) -> Word:
    """Swap 0 and 1 (the binary relabelling involution)."""
    return word.translate(str.maketrans("01", "10"))


def is_constant(word: Word) -> bool:
    return len(set(word)) <= 1


# ---------------------------------------------------------------------------
# points

@dataclass(frozen=True)
class PeriodicPoint:
    """Eventually periodic point ``preamble + period period period ...``.

    Two-sided points continue the period to the left of the preamble.
    """

    preamble: Word = ""
    period: Word = "0"
    two_sided: bool = False

    def __post_init__(self):
        if not self.period:
            raise PreconditionError("period word must be non-empty")

    def symbol(self, n: int) -> int:
        return int(self._char(n))

    def _char(self, n: int) -> str:
        if n < 0 and not self.two_sided:
            raise PreconditionError("negative coordinate on a one-sided point")
        if 0 <= n < len(self.preamble):
            return self.preamble[n]
        return self.period[(n - len(self.preamble)) % len(self.period)]

    def window(self, start: int, length: int) -> Word:
        _check_window(self, start, length)
        pre, per = self.preamble, self.period
        if start >= len(pre):
            r = (start - len(pre)) % len(per)
            reps = (r + length) // len(per) + 1
            return (per * reps)[r:r + length]
        return "".join(self._char(n) for n in range(start, start + length))

    def shifted(self, k: int) -> "PeriodicPoint":
        if k < 0 and not self.two_sided:
            raise PreconditionError("cannot shift a one-sided point backwards")
        keep = max(0, len(self.preamble) - k)
        pre = "".join(self._char(n) for n in range(k, k + keep))
        r = (k + keep - len(self.preamble)) % len(self.period)
        per = self.period[r:] + self.period[:r]
        return PeriodicPoint(pre, per, self.two_sided)

    def to_json(self) -> dict:
        return {"kind": "periodic", "preamble": self.preamble, "period": self.period,
                "two_sided": self.two_sided}


@dataclass(frozen=True)
class RulePoint:
    """Point whose n-th coordinate is ``rule(n + offset)``."""

    rule: Callable[[int], int] = field(compare=False)
    two_sided: bool = False
    offset: int = 0
    name: str = "rule"

    def symbol(self, n: int) -> int:
        if n < 0 and not self.two_sided:
            raise PreconditionError("negative coordinate on a one-sided point")
        return int(self.rule(n + self.offset))

    def window(self, start: int, length: int) -> Word:
        _check_window(self, start, length)
        rule, off = self.rule, self.offset
        return "".join(DIGITS[rule(n + off)] for n in range(start, start + length))

    def shifted(self, k: int) -> "RulePoint":
        if k < 0 and not self.two_sided:
            raise PreconditionError("cannot shift a one-sided point backwards")
        return RulePoint(self.rule, self.two_sided, self.offset + k, self.name)


@dataclass(frozen=True)
class BlockStream:
    """Concatenation ``blocks[c_0] blocks[c_1] ...`` read from ``offset``.

    ``choices`` is itself a point over ``{0, .., len(blocks)-1}``; its
    sidedness is inherited.
    """

    choices: object
    blocks: tuple
    offset: int = 0

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks or len({len(b) for b in blocks}) != 1 or not blocks[0]:
            raise PreconditionError("blocks must be non-empty words of one common length")
        object.__setattr__(self, "blocks", blocks)
        L = len(blocks[0])
        q, r = divmod(self.offset, L)
        if q:
            object.__setattr__(self, "choices", self.choices.shifted(q))
            object.__setattr__(self, "offset", r)

    @property
    def two_sided(self) -> bool:
        return getattr(self.choices, "two_sided", False)

    @property
    def block_length(self) -> int:
        return len(self.blocks[0])

    def symbol(self, n: int) -> int:
        if n < 0 and not self.two_sided:
            raise PreconditionError("negative coordinate on a one-sided point")
        m, r = divmod(n + self.offset, self.block_length)
        return int(self.blocks[self.choices.symbol(m)][r])

    def window(self, start: int, length: int) -> Word:
        _check_window(self, start, length)
        L = self.block_length
        a = start + self.offset
        m0, m1 = a // L, (a + length - 1) // L
        picks = self.choices.window(m0, m1 - m0 + 1)
        blocks = self.blocks
        text = "".join(blocks[int(c)] for c in picks)
        r = a - m0 * L
        return text[r:r + length]

    def shifted(self, k: int) -> "BlockStream":
        if k < 0 and not self.two_sided:
            raise PreconditionError("cannot shift a one-sided point backwards")
        return BlockStream(self.choices, self.blocks, self.offset + k)


def _check_window(point, start: int, length: int) -> None:
    if length < 1:
        raise PreconditionError(f"window length must be >= 1, got {length}")
    if start < 0 and not point.two_sided:
        raise PreconditionError("negative start on a one-sided point")


def window(point, start: int, length: int) -> Word:
    """Return ``(x_start, ..., x_{start+length-1})`` of ``point``."""
    return point.window(start, length)


def shift(point, k: int):
    """The point ``sigma^k(point)``."""
    return point.shifted(k)


def point_from_json(data: dict):
    """Build a serialisable point description (periodic or block-stream)."""
    kind = data.get("kind")
    two = bool(data.get("two_sided", False))
    if kind == "periodic":
        return PeriodicPoint(data.get("preamble", ""), data["period"], two)
    if kind == "block":
        choices = point_from_json(data["choices"])
        return BlockStream(choices, tuple(data["blocks"]), int(data.get("offset", 0)))
    raise PreconditionError(f"unknown or non-serialisable point kind {kind!r}")


# ---------------------------------------------------------------------------
# cylinder / window checks

def self_overlap_free(u: Word, n: int) -> bool:
    """True iff ``[u]`` and ``sigma^n([u])`` are disjoint in the full shift.

    That is the case exactly when ``u`` does not have period ``n``.
    """
    if not 1 <= n <= len(u) - 1:
        raise PreconditionError(f"shift {n} out of range 1..{len(u) - 1}")
    return u[n:] != u[:len(u) - n]


def _check_generators(generators: Sequence[Word]) -> int:
    gens = list(generators)
    if not gens:
        raise PreconditionError("need at least one generator")
    tau = len(gens[0])
    if tau == 0 or any(len(g) != tau for g in gens):
        raise PreconditionError("generators must be non-empty and of equal length")
    return tau


def pair_window_disjointness(generators: Sequence[Word], j: int, sided: str = "one") -> bool:
    """Sufficient test for ``K`` and ``sigma^j(K)`` disjoint, ``K = G^infinity``.

    One-sided: every length-tau window at offset ``j`` of a two-generator
    concatenation must avoid ``G``.  Two-sided: windows at offsets ``j`` and
    ``j + tau`` of all three-generator concatenations.
    """
    tau = _check_generators(generators)
    if not 1 <= j <= tau - 1:
        raise PreconditionError(f"offset {j} out of range 1..{tau - 1}")
    gens = set(generators)
    if sided == "one":
        return all((a + b)[j:j + tau] not in gens for a in gens for b in gens)
    if sided == "two":
        for a in gens:
            for b in gens:
                for c in gens:
                    text = a + b + c
                    if text[j:j + tau] in gens or text[j + tau:j + 2 * tau] in gens:
                        return False
        return True
    raise PreconditionError(f"sided must be 'one' or 'two', got {sided!r}")


def _occurrences(text: str, pattern: str, lo: int, hi: int) -> Iterable[int]:
    i = text.find(pattern, lo)
    while 0 <= i < hi:
        yield i
        i = text.find(pattern, i + 1)


def disjoint_offsets(generators: Sequence[Word], sided: str = "one") -> list:
    """All ``j`` in ``1..tau-1`` passing :func:`pair_window_disjointness`.

    Same answer as calling the per-offset check tau-1 times, but done with
    one substring scan per (concatenation, generator).
    """
    tau = _check_generators(generators)
    gens = sorted(set(generators))
    bad = set()
    if sided == "one":
        texts = [a + b for a in gens for b in gens]
        for text in texts:
            for g in gens:
                bad.update(_occurrences(text, g, 1, tau))
    elif sided == "two":
        texts = [a + b + c for a in gens for b in gens for c in gens]
        for text in texts:
            for g in gens:
                bad.update(p % tau for p in _occurrences(text, g, 1, 2 * tau) if p != tau)
    else:
        raise PreconditionError(f"sided must be 'one' or 'two', got {sided!r}")
    return [j for j in range(1, tau) if j not in bad]


def suffix_injectivity(generators: Sequence[Word], n: int) -> bool:
    """True iff the generators have pairwise distinct suffixes from position ``n``.

    Sufficient for ``sigma^n`` to be injective on ``G^infinity``.
    """
    tau = _check_generators(generators)
    if not 1 <= n <= tau - 1:
        raise PreconditionError(f"position {n} out of range 1..{tau - 1}")
    return len({g[n:] for g in generators}) == len(list(generators))


def injective_offsets(generators: Sequence[Word]) -> list:
    tau = _check_generators(generators)
    return [n for n in range(1, tau) if suffix_injectivity(generators, n)]


# ---------------------------------------------------------------------------
# block codes

@dataclass(frozen=True)
class BlockCode:
    """Binary block code ``0 -> phi0``, ``1 -> phi1``."""

    phi0: Word
    phi1: Word

    def __post_init__(self):
        if not self.phi0 or len(self.phi0) != len(self.phi1):
            raise PreconditionError("code images must be non-empty and of equal length")
        if self.phi0 == self.phi1:
            raise PreconditionError("code images must differ")

    @property
    def length(self) -> int:
        return len(self.phi0)

    @property
    def images(self) -> tuple:
        return (self.phi0, self.phi1)

    def encode(self, w: Word) -> Word:
        w = as_word(w, 2)
        return "".join(self.phi1 if c == "1" else self.phi0 for c in w)

    def decode(self, word: Word) -> Word:
        L = self.length
        if len(word) % L:
            raise CodeError(f"length {len(word)} is not a multiple of block length {L}")
        out = []
        for i in range(0, len(word), L):
            block = word[i:i + L]
            if block == self.phi0:
                out.append("0")
            elif block == self.phi1:
                out.append("1")
            else:
                raise CodeError(f"block {block!r} at position {i} is not a code image")
        return "".join(out)

    def to_json(self) -> dict:
        return {"phi0": self.phi0, "phi1": self.phi1}

    @classmethod
    def from_json(cls, data) -> "BlockCode":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(data["phi0"], data["phi1"])


def block_encode(code: BlockCode, w: Word) -> Word:
    return code.encode(w)


def block_decode(code: BlockCode, word: Word) -> Word:
    return code.decode(word)
