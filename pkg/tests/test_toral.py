from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
import sympy

from bohrchaos.errors import IntegrityError, PreconditionError, SingularMatrix, Unsupported
from bohrchaos.toral import (HORSESHOE_FREE_EXAMPLE, FrequencyPlan, IntMatrix, RieszSpec, ToralAffineMap, character_expectation,
                             choose_h0, classify, dissociate_check, empirical_character, frequency_orbit,
                             frequency_orbit_by_powers, is_irreducible, lacunarity_and_split_check,
                             psi_sequence, riesz_coefficient, riesz_sample, search_q, spectral_analysis,
                             verify_weighted_limit)
from bohrchaos.toral.riesz import decompositions, density
from bohrchaos.weights import WeightSpec, generate

from oracles import mat_mul


def aa_entropy_oracle():
    u = (3 + math.sqrt(5)) / 2
    return math.log((u + math.sqrt(u * u - 4)) / 2)


def test_entropy_examples():
    assert abs(spectral_analysis([[2]]).entropy - math.log(2)) < 1e-12
    assert abs(spectral_analysis([[1, 1], [1, 0]]).entropy - math.log((1 + math.sqrt(5)) / 2)) < 1e-12
    s = spectral_analysis(HORSESHOE_FREE_EXAMPLE)
    assert abs(s.entropy - aa_entropy_oracle()) < 1e-10
    assert int(s.on_unit_circle().sum()) == 2
    assert s.charpoly == (1, -3, 3, -3, 1)


def test_det_and_charpoly_against_sympy():
    rng = np.random.default_rng(0)
    for d in range(1, 6):
        for _ in range(5):
            A = rng.integers(-5, 6, size=(d, d)).tolist()
            M = IntMatrix.of(A)
            S = sympy.Matrix(A)
            assert M.det() == S.det()
            z = sympy.symbols("z")
            assert list(M.charpoly()) == [int(c) for c in sympy.Poly(S.charpoly(z).as_expr(), z).all_coeffs()]


def test_singular_rejected():
    with pytest.raises(SingularMatrix):
        spectral_analysis([[1, 2], [2, 4]])
    with pytest.raises(SingularMatrix):
        ToralAffineMap([[0]])


def test_entropy_of_powers():
    for A in ([[2, 1], [1, 1]], [[1, 1], [1, 0]], HORSESHOE_FREE_EXAMPLE.to_list(), [[3, 1, 0], [1, 2, 1], [0, 1, 1]]):
        M = IntMatrix.of(A)
        base = spectral_analysis(M).entropy
        for k in range(1, 5):
            assert abs(spectral_analysis(M.power(k)).entropy - k * base) < 1e-8


def test_unimodular_entropy_balance():
    for A in ([[2, 1], [1, 1]], HORSESHOE_FREE_EXAMPLE.to_list(), [[0, 1, 0], [0, 0, 1], [1, 1, 0]]):
        s = spectral_analysis(A)
        assert abs(s.det) == 1
        mods = np.abs(s.eigenvalues)
        up = sum(math.log(m) for m in mods if m > 1 + 1e-8)
        down = sum(math.log(m) for m in mods if m < 1 - 1e-8)
        assert abs(up + down) < 1e-8


def test_eigen_product_is_det():
    for A in ([[2, 1], [1, 1]], [[3, 1, 0], [1, 2, 1], [0, 1, 1]], [[5]]):
        s = spectral_analysis(A)
        assert abs(abs(np.prod(s.eigenvalues)) - abs(s.det)) <= 1e-6 * abs(s.det)


def test_classify_examples():
    c = classify(HORSESHOE_FREE_EXAMPLE)
    assert c.kind == "partially_hyperbolic" and c.horseshoe_free is True
    c = classify([[2, 1], [1, 1]])
    assert c.kind == "hyperbolic" and c.horseshoe_free is False
    c = classify([[1, 0], [0, 1]])
    assert c.kind == "no_expansion" and c.horseshoe_free is None


def test_classify_reducible_partially_hyperbolic():
    # block diagonal: hyperbolic block plus a rotation block -> reducible
    A = [[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]]
    c = classify(A)
    assert c.kind == "partially_hyperbolic" and c.irreducible is False and c.horseshoe_free is False


def test_classify_degree_limit():
    # companion of z^8 - 3z^7 + ... palindromic with roots on and off the circle -> needs factoring
    f = sympy.Poly(sympy.expand(sympy.Symbol("z") ** 4 - 3 * sympy.Symbol("z") ** 3 + 3 * sympy.Symbol("z") ** 2
                                - 3 * sympy.Symbol("z") + 1) * (sympy.Symbol("z") ** 4 + 1), sympy.Symbol("z"))
    B = IntMatrix.companion([int(c) for c in f.all_coeffs()])
    with pytest.raises(Unsupported):
        classify(B)


def test_irreducibility_against_sympy():
    z = sympy.Symbol("z")
    rng = np.random.default_rng(3)
    cases = [[1, -3, 3, -3, 1], [1, 0, 0, 0, 1], [1, 0, -2, 0, 1], [1, 1, 1, 1, 1, 1, 1], [1, 0, 0, -1, 0, 0, 1]]
    for _ in range(60):
        d = int(rng.integers(2, 7))
        cases.append([1] + [int(v) for v in rng.integers(-4, 5, size=d)])
    for _ in range(20):
        a = [1] + [int(v) for v in rng.integers(-3, 4, size=2)]
        b = [1] + [int(v) for v in rng.integers(-3, 4, size=int(rng.integers(1, 4)))]
        cases.append([int(c) for c in np.polymul(a, b)])
    for f in cases:
        if f[-1] == 0:
            continue
        expected = sympy.Poly(f, z).is_irreducible
        assert is_irreducible(f) == expected, f


def test_h0_choice():
    assert choose_h0([[2]]) == (1,)
    assert choose_h0([[1, 1], [1, 0]]) == (1, 0)
    assert choose_h0([[1, 0], [0, 3]]) == (0, 1)


def test_frequency_orbit_examples_and_cross_check():
    assert [h[0] for h in frequency_orbit([[2]], (1,), 10)] == [2 ** n for n in range(11)]
    assert frequency_orbit([[1, 1], [1, 0]], (1, 0), 5)[5] == (8, 5)
    for A in (HORSESHOE_FREE_EXAMPLE.to_list(), [[3, 1], [2, 5]]):
        assert frequency_orbit(A, (1,) + (0,) * (len(A) - 1), 40) == \
            frequency_orbit_by_powers(A, (1,) + (0,) * (len(A) - 1), 40)


def test_psi_sequence():
    assert all(p == 0 for p in psi_sequence([[2, 1], [1, 1]], (0, 0), (1, 0), 10))
    # B = [3], b = 1/5, h0 = 1: psi_n = (3^n - 1)/2 * 1/5 mod 1
    got = psi_sequence([[3]], ("1/5",), (1,), 12)
    for n, p in enumerate(got):
        assert p == Fraction((3 ** n - 1) // 2, 5) % 1
    # direct definition with matrix powers
    B = [[2, 1], [1, 1]]
    b = (Fraction(1, 3), Fraction(1, 7))
    got = psi_sequence(B, b, (1, 1), 6)
    P = [[1, 0], [0, 1]]
    S = [[0, 0], [0, 0]]
    for n in range(7):
        s = [sum(S[i][j] * b[j] for j in range(2)) for i in range(2)]
        assert got[n] == (s[0] + s[1]) % 1
        S = [[S[i][j] + P[i][j] for j in range(2)] for i in range(2)]
        P = mat_mul(P, B)


def test_dissociate_examples():
    assert dissociate_check([3 ** n for n in range(8)]).ok
    assert dissociate_check([4 ** n for n in range(8)]).ok
    bad = dissociate_check([2 ** n for n in range(3)])
    assert not bad.ok
    e1, e2, v = bad.collision
    terms = [1, 2, 4]
    assert e1 != e2
    assert sum(a * t for a, t in zip(e1, terms)) == sum(a * t for a, t in zip(e2, terms)) == v[0]
    with pytest.raises(Unsupported):
        dissociate_check([5 ** n for n in range(13)])


def test_split_check_example():
    rep = lacunarity_and_split_check(FrequencyPlan([[4]], (1,), 2, 6, 1.0))
    assert rep.dissociate_ok and rep.split_ok
    assert min(rep.class_gap, rep.difference_gap) >= 1


def test_split_check_reports_collisions():
    rep = lacunarity_and_split_check(FrequencyPlan([[2]], (1,), 1, 5, 0.5))
    assert not rep.dissociate_ok
    # h0 = (1, 1) under the swap: H_1 = H_0, so the class gap is 0
    rep = lacunarity_and_split_check(FrequencyPlan([[0, 1], [1, 0]], (1, 1), 2, 3, 0.5))
    assert rep.class_gap == 0 and not rep.split_ok


def test_search_q():
    plan, rep = search_q([[4]], (1,), horizon=6)
    assert plan.q == 2 and rep.split_ok and plan.delta > 0
    plan, rep = search_q([[2]], (1,), horizon=6)
    assert plan.q >= 2 and rep.dissociate_ok


def test_search_q_two_dimensional():
    plan, rep = search_q([[2, 1], [1, 1]], (1, 0), horizon=5)
    assert rep.dissociate_ok and rep.split_ok


def spec4(q=1, r=0.5, K=12, **kw):
    return RieszSpec(FrequencyPlan([[4]], (1,), q, 12), r, K, **kw)


def test_riesz_coefficient_examples():
    s = spec4()
    assert riesz_coefficient(s, 0) == 1
    assert riesz_coefficient(s, 1) == 0.25
    assert riesz_coefficient(s, 1 + 4) == 0.0625
    assert riesz_coefficient(s, 2) == 0
    # 3 = 4 - 1 lies in the spectrum: coefficient (r/2)^2
    assert riesz_coefficient(s, 3) == 0.0625
    assert riesz_coefficient(s, 4 ** 12) == 0  # beyond the truncation


def test_riesz_coefficient_symmetry_and_bound():
    w = generate(WeightSpec("phase", {"theta": "1/7"}), 40)
    s = RieszSpec(FrequencyPlan([[3]], (1,), 1, 10, b=("1/5",)), 0.8, 10, "weighted", w.values)
    for k in range(-200, 201):
        c = riesz_coefficient(s, k)
        assert abs(c - riesz_coefficient(s, -k).conjugate()) < 1e-15
        assert abs(c) <= 1


def test_riesz_ambiguous_decomposition():
    s = RieszSpec(FrequencyPlan([[2]], (1,), 1, 4), 0.5, 4)
    with pytest.raises(IntegrityError):
        riesz_coefficient(s, 3)


def test_decomposition_matches_brute_force():
    freqs = [(3 ** n,) for n in range(7)]
    import itertools
    table = {}
    for eps in itertools.product((-1, 0, 1), repeat=7):
        table.setdefault(sum(e * f[0] for e, f in zip(eps, freqs)), []).append(eps)
    for k in range(-1200, 1201, 7):
        got = decompositions(freqs, k)
        assert got == table.get(k, [])[:2]


def test_sampler_uniform_when_r_zero():
    s = spec4(r=0.0)
    b = riesz_sample(s, 20_000, seed=5)
    assert b.acceptance == 1.0
    x = b.as_float()[:, 0]
    hist, _ = np.histogram(x, bins=10, range=(0, 1))
    assert np.all(np.abs(hist - 2000) < 5 * math.sqrt(2000))


def test_sampler_reproducible_and_jobs_invariant():
    s = spec4(K=6)
    a = riesz_sample(s, 20_000, seed=9, jobs=1)
    b = riesz_sample(s, 20_000, seed=9, jobs=3)
    assert np.array_equal(a.points, b.points)


def test_density_integrates_to_one():
    s = spec4(K=5, r=0.9)
    grid = (np.arange(2 ** 16, dtype=np.uint64) << np.uint64(48)).reshape(-1, 1)
    assert abs(density(s, grid).mean() - 1) < 1e-12


def test_truncated_spectrum_consistency():
    s = spec4(K=8, r=0.6)
    b = riesz_sample(s, 60_000, seed=21)
    freqs = [4 ** n for n in range(8)]
    ks = set(freqs)
    for i in range(8):
        for j in range(i + 1, 8):
            ks.update({freqs[i] + freqs[j], freqs[j] - freqs[i]})
    ks.update({2, 6, 7})
    for k in sorted(ks):
        est, se = empirical_character(b, k)
        assert abs(est - character_expectation(s, k)) <= 4 * se + 1e-12, k


def test_envelope_too_loose(monkeypatch):
    from bohrchaos.errors import EnvelopeTooLoose
    from bohrchaos.toral import riesz
    spec = RieszSpec(FrequencyPlan([[4]], (1,), 1, 12), 1.0, 10)
    # with K <= 16 the envelope never exceeds 2**16, so the default floor is not reachable
    assert riesz_sample(spec, 10, seed=1).path == "exact-rejection"
    monkeypatch.setattr(riesz, "ACCEPT_FLOOR", 1e-2)
    with pytest.raises(EnvelopeTooLoose):
        riesz_sample(spec, 10, seed=1)
    with pytest.raises(PreconditionError):
        RieszSpec(FrequencyPlan([[4]], (1,), 1, 12), 1.0, 17)


def test_verify_weighted_limit_scaling_and_refusal():
    T = ToralAffineMap([[4]])
    w = np.ones(100)
    for r in (0.4, 0.2):
        rep = verify_weighted_limit(T, w, spec4(r=r), 8, 20_000, seed=3)
        assert rep["target"] == r / 2 and rep["ok"]
    with pytest.raises(PreconditionError):
        verify_weighted_limit(T, w, spec4(K=6), 8, 100, seed=3)


def test_verify_weighted_limit_with_weights_and_translation():
    T = ToralAffineMap([[3]], ("1/5",))
    wv = generate(WeightSpec("bernoulli_pm1", {"seed": 2}), 200)
    plan = FrequencyPlan([[3]], (1,), 1, 10, b=("1/5",))
    s = RieszSpec(plan, 0.5, 10, "weighted", wv.values)
    rep = verify_weighted_limit(T, wv, s, 10, 30_000, seed=8)
    assert rep["ok"] and rep["target"] == 0.25


def test_two_dimensional_importance_path():
    T = ToralAffineMap([[2, 1], [1, 1]])
    plan = FrequencyPlan(T.B, (1, 0), 2, 6)
    s = RieszSpec(plan, 0.5, 6)
    rep = verify_weighted_limit(T, np.ones(40), s, 6, 40_000, seed=4)
    assert rep["truncation"]["path"] == "importance" and "caveat" in rep
    assert abs(complex(*rep["estimate"]) - rep["target"]) <= 4 * rep["stderr"]
