from __future__ import annotations

import itertools
import json

import pytest

from bohrchaos.errors import CertificateFailure, ConstantWord, DepthExceeded, PreconditionError
from bohrchaos.horseshoe import (CodedHorseshoe, DisplacementTask, build_horseshoe_in_cylinder, certify,
                                 disjointify, find_displacement_witness, refine_avoiding, refine_cylinder,
                                 solve_residue_cover, verify_certificate)
from bohrchaos.symbolic import relabel, self_overlap_free

from oracles import three_block_certificate, words

RANK4 = {
    "0000": "00001", "0001": "0001", "0010": "0010111", "0011": "0011",
    "0100": "0100111", "0101": "010111", "0110": "0110111", "0111": "0111",
}


def test_rank4_table():
    for c, expected in RANK4.items():
        assert refine_cylinder(c).refined == expected
        assert refine_cylinder(relabel(c)).refined == relabel(expected)
        assert refine_cylinder(c, "two").refined == expected


def test_refine_examples_n0():
    assert refine_cylinder("0101").n0 == 2
    assert refine_cylinder("0011").n0 == 4
    assert refine_cylinder("0010").n0 == 3


def test_refined_cylinder_invariants():
    for m in range(1, 9):
        for c in words(m):
            r = refine_cylinder(c)
            y = r.refined
            assert y.startswith(c)
            assert len(y) == (m + r.n0 if r.n0 < m else m)
            for n in range(1, len(y)):
                assert self_overlap_free(y, n)


def test_build_examples():
    h, cert = build_horseshoe_in_cylinder("01")
    assert h.generators == ("0110", "0111") and cert.tau == 4 and h.marker_len == 1
    assert cert.offsets_checked == (1, 2, 3)
    h, cert = build_horseshoe_in_cylinder("0101")
    assert h.generators == ("01011110", "01011111") and cert.tau == 8
    h0, _ = build_horseshoe_in_cylinder("0")
    assert h0.generators == ("0110", "0111")
    with pytest.raises(ConstantWord):
        build_horseshoe_in_cylinder("1", pre_refine=False)


def test_build_generators_inside_cylinder_and_injective():
    for m in range(1, 6):
        for c in words(m):
            h, cert = build_horseshoe_in_cylinder(c)
            g0, g1 = h.generators
            assert g0.startswith(c) and g1.startswith(c)
            assert cert.full
            assert three_block_certificate(h.generators) == list(range(1, cert.tau))
            # distinct choice words of length k give distinct points
            for k in range(1, 7 if m <= 2 else 4):
                imgs = {"".join(h.generators[int(b)] for b in s) for s in words(k)}
                assert len(imgs) == 2 ** k


def test_two_sided_build():
    for c in ("01", "0010", "110"):
        h, cert = build_horseshoe_in_cylinder(c, "two")
        assert cert.full and cert.sided == "two" and cert.injectivity_checked == ()


def test_residue_cover_examples():
    assert solve_residue_cover(4).table[2] == (1, 2)
    assert solve_residue_cover(6).table[4] == (2, 3)
    assert solve_residue_cover(12).table[5] == (6, 2)
    with pytest.raises(PreconditionError):
        solve_residue_cover(1)


def test_residue_cover_small_exhaustive():
    for N in range(2, 60):
        sol = solve_residue_cover(N)
        assert sol.check()


def test_witness_examples():
    h = CodedHorseshoe(("00", "01"))
    assert find_displacement_witness(h, DisplacementTask(1, 2, 1)) == "01"
    h2 = CodedHorseshoe(("0110", "0111"))
    u = find_displacement_witness(h2, DisplacementTask(1, 4, 2))
    assert len(u) <= 8 * 4
    with pytest.raises(PreconditionError):
        DisplacementTask(1, 2, 2)


def _in_shifted(u, gens, t, depth):
    """Is u a window at offset t of some concatenation of `depth` generators?"""
    for choice in itertools.product(gens, repeat=depth):
        text = "".join(choice)
        if text[t:t + len(u)] == u:
            return True
    return False


def test_witness_is_disjoint_from_shifts_brute_force():
    for gens, task in ((("00", "01"), DisplacementTask(1, 2, 1)),
                       (("0110", "0111"), DisplacementTask(1, 4, 2)),
                       (("000", "001"), DisplacementTask(1, 3, 1))):
        h = CodedHorseshoe(gens)
        u = find_displacement_witness(h, task)
        blocks = len(u) // len(gens[0]) + 2
        for t in task.displaced_offsets():
            assert not _in_shifted(u, gens, t, blocks)


def test_witness_depth_exceeded():
    h = CodedHorseshoe(("0000", "0001"))
    with pytest.raises(DepthExceeded):
        find_displacement_witness(h, DisplacementTask(1, 4, 2), max_depth=0)


def test_refine_avoiding_section_case():
    h = CodedHorseshoe(("00", "01"))
    task = DisplacementTask(1, 2, 1)
    new, cert = refine_avoiding(h, task, find_displacement_witness(h, task))
    assert new.order == 8 and cert.full
    assert new.generators == ("01000001", "01000000")


def test_refine_avoiding_requires_base_certificate():
    h = CodedHorseshoe(("0000", "0101"))  # offset 2 fails
    assert 2 not in certify(h.generators).offsets_checked
    with pytest.raises(PreconditionError):
        refine_avoiding(h, DisplacementTask(2, 2, 1), "0000")


def test_refine_avoiding_empty_J_bookkeeping():
    h = CodedHorseshoe(("000", "001"))
    task = DisplacementTask(1, 3, 1)
    new, cert = refine_avoiding(h, task, find_displacement_witness(h, task))
    assert new.order % h.order == 0
    M = new.order // 3
    assert all(3 * k + 1 in cert.offsets_checked for k in range(M))


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5, 6])
def test_disjointify(N):
    h = CodedHorseshoe(("0" * N, "0" * (N - 1) + "1")) if N > 1 else CodedHorseshoe(("0", "1"))
    new, cert = disjointify(h)
    assert cert.full and cert.tau % N == 0
    if N > 1:
        assert three_block_certificate(new.generators) == list(range(1, cert.tau))
    if N == 2:
        assert cert.tau == 8


def test_disjointify_two_sided():
    h = CodedHorseshoe(("000", "001"), sided="two")
    new, cert = disjointify(h)
    assert cert.full and cert.sided == "two"


def test_certificate_roundtrip_and_tamper():
    _, cert = build_horseshoe_in_cylinder("0101")
    text = cert.dumps()
    assert verify_certificate(text) == cert
    bad = json.loads(text)
    bad["offsets_checked"] = bad["offsets_checked"] + [8]
    with pytest.raises(CertificateFailure):
        verify_certificate(bad)
    bad = json.loads(text)
    bad["generators"][0] = "01011111"
    with pytest.raises(CertificateFailure):
        verify_certificate(bad)
    bad = json.loads(text)
    bad["tau"] = 7
    with pytest.raises(CertificateFailure):
        verify_certificate(bad)


def test_coded_horseshoe_validation():
    with pytest.raises(PreconditionError):
        CodedHorseshoe(("01", "01"))
    with pytest.raises(PreconditionError):
        CodedHorseshoe(("01", "011"))
