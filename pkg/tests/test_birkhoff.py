from __future__ import annotations

import cmath
import math

import numpy as np
import pytest

from bohrchaos.birkhoff import (Character, CircleRotation, CodedSubshift, CylinderIndicatorDiff, FullShift,
                                LocallyConstant, ToralSystem, coded_point, compensated_partial_sums,
                                frac_mul, fullshift_pair, lift_comparison, lift_pair, ue_control,
                                weighted_average_series)
from bohrchaos.errors import PreconditionError
from bohrchaos.horseshoe import CodedHorseshoe, build_horseshoe_in_cylinder, certify, disjointify
from bohrchaos.symbolic import PeriodicPoint
from bohrchaos.toral import ToralAffineMap
from bohrchaos.weights import WeightSpec, generate

from oracles import squarefree_count

GOLDEN = (math.sqrt(5) - 1) / 2


def test_fixed_point_average():
    w = generate(WeightSpec("constant"), 100)
    s = weighted_average_series(FullShift(), CylinderIndicatorDiff(), PeriodicPoint("", "0"), w, [1, 10, 100])
    assert np.all(s.values == 1)


def test_rotation_geometric_bound():
    beta = 1 / 3
    n = 5000
    w = np.exp(-2j * math.pi * beta * np.arange(n))
    grid = list(range(1, n + 1, 37))
    s = weighted_average_series(CircleRotation(GOLDEN), Character((1,)), 0.0, w, grid)
    gap = abs(1 - cmath.exp(2j * math.pi * (GOLDEN - beta)))
    for N, a in zip(grid, s.values):
        closed = abs(cmath.exp(2j * math.pi * N * (GOLDEN - beta)) - 1) / gap / N
        assert abs(abs(a) - closed) < 1e-12
        assert abs(a) <= 2 / (N * gap) + 1e-15


def test_fullshift_pair_identity_moebius():
    N = 10 ** 5
    w = generate(WeightSpec("moebius"), N)
    f, x = fullshift_pair(w)
    grid = [10, 1000, N]
    s = weighted_average_series(FullShift(), f, x, w, grid)
    for M, a in zip(grid, s.values):
        assert abs(a - np.abs(w.values[:M]).sum() / M) < 1e-12
    assert abs(s.values[-1] - squarefree_count(N - 1) / N) < 1e-12


def test_fullshift_pair_alternating_and_zero():
    alt = generate(WeightSpec("custom_table", {"values": [(-1) ** n for n in range(40)]}), 40)
    f, x = fullshift_pair(alt)
    assert x.window(0, 6) == "010101"
    s = weighted_average_series(FullShift(), f, x, alt, [1, 2, 40])
    assert np.all(s.values == 1)
    zero = generate(WeightSpec("constant", {"value": 0}), 40)
    f, x = fullshift_pair(zero)
    assert np.all(weighted_average_series(FullShift(), f, x, zero, [40]).values == 0)


def test_fullshift_pair_uses_imaginary_part_when_real_is_trivial():
    w = generate(WeightSpec("custom_table", {"values": [[0, 1], [0, -1], [0, 0.5]]}), 3)
    u, part = w.real_policy()
    assert part == "im"
    f, x = fullshift_pair(w)
    assert x.window(0, 3) == "010"


def test_average_bounded_by_sup_norms():
    rng = np.random.default_rng(0)
    w = generate(WeightSpec("bernoulli_pm1", {"seed": 3}), 2000)
    x = PeriodicPoint("".join(rng.choice(list("01"), 50)), "0110")
    s = weighted_average_series(FullShift(), CylinderIndicatorDiff("01", "11"), x, w, list(range(1, 2001, 13)))
    assert np.all(np.abs(s.values) <= 1 + 1e-15)


def test_locally_constant_matches_direct_evaluation():
    rng = np.random.default_rng(1)
    x = PeriodicPoint("".join(rng.choice(list("01"), 300)), "1")
    table = {"000": 1.0, "101": -2.0, "110": 0.5}
    f = LocallyConstant(3, table)
    w = generate(WeightSpec("constant"), 250)
    s = weighted_average_series(FullShift(), f, x, w, [250])
    direct = sum(table.get(x.window(n, 3), 0.0) for n in range(250)) / 250
    assert abs(s.values[0] - direct) < 1e-14


def test_compensated_sums_grid_independent():
    rng = np.random.default_rng(2)
    z = rng.standard_normal(10_000) * 1e8 + 1j * rng.standard_normal(10_000)
    a = compensated_partial_sums(z, [10_000])
    b = compensated_partial_sums(z, list(range(100, 10_001, 100)))
    assert abs(a[0] - b[-1]) <= 4 * np.spacing(abs(a[0]))
    assert a[0].real == math.fsum(z.real)


def test_frac_mul_accuracy():
    n = np.arange(0, 2 ** 20, 997)
    got = frac_mul(n, GOLDEN)
    from fractions import Fraction
    a = Fraction(GOLDEN)
    for k, v in zip(n[::50], got[::50]):
        assert abs(float(int(k) * a % 1) - v) < 1e-15


def test_toral_orbit_exact_for_dyadic_points():
    # dyadic data stay dyadic, so the fixed-point orbit has no rounding at all
    from fractions import Fraction
    T = ToralAffineMap([[2, 1], [1, 1]], ("3/8", "0"))
    w = generate(WeightSpec("constant"), 40)
    x = [Fraction(5, 2 ** 20), Fraction(77, 2 ** 30)]
    s = weighted_average_series(ToralSystem(T), Character((1, 0)), x, w, [40])
    acc = 0
    for _ in range(40):
        acc += cmath.exp(2j * math.pi * float(x[0] % 1))
        x = [(2 * x[0] + x[1] + Fraction(3, 8)) % 1, (x[0] + x[1]) % 1]
    assert abs(s.values[0] - acc / 40) < 1e-14


def test_system_observable_mismatch():
    w = generate(WeightSpec("constant"), 5)
    with pytest.raises(PreconditionError):
        weighted_average_series(CircleRotation(0.1), CylinderIndicatorDiff(), 0.0, w, [5])
    with pytest.raises(PreconditionError):
        weighted_average_series(FullShift(), Character((1,)), PeriodicPoint("", "0"), w, [5])
    with pytest.raises(PreconditionError):
        weighted_average_series(FullShift(), CylinderIndicatorDiff(), PeriodicPoint("", "0"), w, [6])


def test_coded_subshift_reads_code_coordinates():
    h = CodedHorseshoe(("0110", "0111"))
    x = coded_point(h, PeriodicPoint("1", "0"))
    w = generate(WeightSpec("constant"), 4)
    s = weighted_average_series(CodedSubshift(h), CylinderIndicatorDiff(), x, w, [1, 4])
    assert s.values[0] == -1 and s.values[1] == (3 - 1) / 4
    with pytest.raises(PreconditionError):
        weighted_average_series(CodedSubshift(h), CylinderIndicatorDiff(), PeriodicPoint("", "1"), w, [4])


def test_lift_identity_tau1():
    h = CodedHorseshoe(("0", "1"))
    cert = certify(h.generators)
    w = generate(WeightSpec("bernoulli_pm1", {"seed": 5}), 200)
    x0 = coded_point(h, PeriodicPoint("0110", "10"))
    lift = lift_pair(h, cert, CylinderIndicatorDiff(), x0, w, window_depth=1)
    assert lift.j0 == 0 and lift.tau == 1
    assert lift.point.window(0, 30) == x0.window(1, 30)


def test_lift_on_cylinder_horseshoe():
    h, cert = build_horseshoe_in_cylinder("01")
    w = generate(WeightSpec("constant", support=(4, 0)), 4 * 502)
    rng = np.random.default_rng(4)
    choices = "".join(rng.choice(list("01"), 600))
    x0 = coded_point(h, PeriodicPoint(choices, "0"))
    rep = lift_comparison(h, cert, CylinderIndicatorDiff(), x0, w, 500)
    assert rep["j0"] == 0
    assert rep["difference"] <= 1e-15


def test_lift_refuses_partial_certificate():
    h = CodedHorseshoe(("00", "01"))
    cert = certify(h.generators)
    assert not cert.full
    w = generate(WeightSpec("constant"), 10)
    with pytest.raises(PreconditionError):
        lift_pair(h, cert, CylinderIndicatorDiff(), coded_point(h, PeriodicPoint("", "0")), w)


def test_lift_disjointified_bernoulli():
    h, cert = disjointify(CodedHorseshoe(("00", "01")))
    tau = cert.tau
    N = 10 ** 4
    w = generate(WeightSpec("bernoulli_pm1", {"seed": 11}, support=(tau, 0)), tau * (N + 2))
    # code point following the signs of the weight on residue 0
    signs = np.where(w.values[0::tau].real >= 0, "0", "1")
    x0 = coded_point(h, PeriodicPoint("0" + "".join(signs[:N + 1]), "0"))
    rep = lift_comparison(h, cert, CylinderIndicatorDiff(), x0, w, N)
    assert rep["difference"] <= 2 * tau / N
    assert abs(rep["ambient"]) >= (1 / tau) * 0.95


def test_ue_control_examples():
    rep = ue_control(GOLDEN, 1 / 3, list(range(1, 20_001, 7)))
    assert rep["holds"] and rep["max_ratio"] <= 1
    eig = ue_control(GOLDEN, GOLDEN, [1, 10, 100])
    assert np.allclose(np.abs(eig["series"].values), 1)
    assert eig["warnings"]
    const = ue_control(GOLDEN, 0.25, [1, 50, 500], h=0)
    assert const["holds"]


def test_ue_control_resonance_warning():
    rep = ue_control(GOLDEN, (3 * GOLDEN) % 1, [1, 10])
    assert rep["resonance_k"] == 3
