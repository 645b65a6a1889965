import math
from fractions import Fraction

import numpy as np
import pytest

from iifs.systems import (AmbiguousExpansionError, DigitWord, ExpansionError, branch,
                          cylinder_length_bound_intervals, cylinder_length_bounds, expand,
                          expand_dyadic_cell, make_system, project, random_expansion,
                          system_from_config)

ALL = [("cf",), ("luroth",), ("qg",), ("linear", 2), ("linear", 2.5)]


def build(spec):
    return make_system(*spec)


@pytest.fixture(params=ALL, ids=lambda s: "-".join(map(str, s)))
def system(request):
    return build(request.param)


def test_golden_ratio_has_all_ones():
    e = expand(make_system("cf"), "0.6180339887498948482045868343656381177203", 10)
    assert e.word.tolist() == [1] * 10
    assert e.trusted_count == 10


def test_sqrt2_minus_one_has_all_twos():
    e = expand(make_system("cf"), math.sqrt(2) - 1, 15)
    assert e.word.tolist() == [2] * 15


def test_one_half_boundary_is_flagged():
    e = expand(make_system("cf"), "0.5", 2)
    assert e.ambiguous
    assert e.word.tolist() == [1, 1]
    with pytest.raises(AmbiguousExpansionError):
        expand(make_system("cf"), "1/2", 2, strict=True)


def test_terminating_rational_raises():
    with pytest.raises(ExpansionError):
        expand(make_system("cf"), "0.5", 3)


def test_x_outside_unit_interval_rejected():
    with pytest.raises(ValueError):
        expand(make_system("cf"), 1.5, 3)
    with pytest.raises(ValueError):
        expand(make_system("luroth"), "0", 3)


def test_exact_rational_cf_matches_euclid():
    q = Fraction(355, 1133)
    digits = []
    a, b = q.numerator, q.denominator
    while a:
        n, r = divmod(b, a)
        digits.append(n)
        a, b = r, a
    # the last partial quotient is split so the final iterate avoids 1
    e = expand(make_system("cf"), q, len(digits) - 1)
    assert e.word.tolist() == digits[:-1]


def test_luroth_digits_by_hand():
    # 0.31 -> 3 (0.31 in [1/4, 1/3]), T = 12*0.31 - 3 = 0.72 -> 1, T = 0.44 -> 2, ...
    e = expand(make_system("luroth"), "0.31", 3)
    assert e.word.tolist() == [3, 1, 2]


def test_quadratic_gauss_first_digit():
    # images [1/(n+1)^2, 1/n^2]; 0.2 lies in [1/9, 1/4]
    assert expand(make_system("qg"), "0.2", 1).word.tolist() == [2]


@pytest.mark.parametrize("d", [2, 2.5])
def test_linear_decay_partition_tiles(d):
    system = make_system("linear", d)
    lengths = system.level1_lengths(np.arange(1, 200001, dtype=float))
    assert abs(lengths.sum() + system.length_tail_float(1.0, 200000) - 1) < 1e-9


def test_project_roundtrip(system):
    rng = np.random.default_rng(11)
    for _ in range(10):
        x = Fraction(int(rng.integers(1, 2**60)), 2**60)
        e = expand(system, x, 12)
        if e.trusted_count < 12:
            continue
        cyl = project(system, e.word)
        assert cyl.contains(x)


def test_project_nested(system):
    outer = project(system, [3, 1])
    inner = project(system, [3, 1, 4])
    assert outer.contains_cylinder(inner)


def test_first_level_cylinders_tile_in_decreasing_order(system):
    prev_lo = None
    for a in range(1, 8):
        c = project(system, [a])
        if prev_lo is not None:
            assert abs(float(c.hi) - float(prev_lo)) < 1e-12
        prev_lo = c.lo
    assert abs(float(project(system, [1]).hi) - 1) < 1e-15


def test_length_sandwich_small_words(system):
    rng = np.random.default_rng(3)
    for _ in range(200):
        w = [int(a) for a in rng.integers(1, 30, int(rng.integers(1, 6)))]
        cyl = project(system, w)
        lo, hi = cyl.length_bounds()
        A, B = cylinder_length_bound_intervals(system, w, cyl.precision_bits)
        assert not hi < A.lo
        assert not lo > B.hi


def test_float_length_bounds_order(system):
    lo, hi = cylinder_length_bounds(system, [2, 5, 1])
    assert 0 < lo <= hi


def test_branch_point_values():
    cf = make_system("cf")
    assert abs(float(branch(cf, 3, Fraction(1, 2), 80)) - 1 / 3.5) < 1e-20
    with pytest.raises(ValueError):
        branch(cf, 0, 0.5)


def test_system_config_roundtrip(system):
    assert system_from_config(system.to_config()) == system


def test_fixed_exponent_kinds_reject_other_d():
    with pytest.raises(ValueError):
        make_system("cf", 3)
    with pytest.raises(ValueError):
        make_system("linear", 1.0)
    with pytest.raises(ValueError):
        system_from_config({"kind": "cf", "colour": 1})


def test_digit_word_big_ints():
    w = DigitWord([1, 2**80, 3])
    assert w.tolist() == [1, 2**80, 3]
    assert len(w + DigitWord([4])) == 4


@pytest.mark.parametrize("kind", ["cf", "luroth"])
def test_dyadic_cell_digits_agree_with_expand(kind):
    s = make_system(kind)
    U, bits = 123456789012345, 60
    digits = expand_dyadic_cell(s, U, bits, 8)
    for x in (Fraction(U, 2**bits), Fraction(U + 1, 2**bits)):
        assert expand(s, x, len(digits)).word.tolist() == digits


def test_random_expansion_is_seeded(system):
    a, _ = random_expansion(system, 50, np.random.default_rng([5, 0]))
    b, _ = random_expansion(system, 50, np.random.default_rng([5, 0]))
    assert a == b and len(a) == 50


def test_linear_decay_random_digits_follow_level1_law():
    s = make_system("linear", 2)
    rng = np.random.default_rng(2)
    digits = []
    for _ in range(20):
        digits += random_expansion(s, 2000, rng)[0]
    digits = np.array(digits)
    law = s.level1_lengths(np.arange(1, 4, dtype=float))
    for n, p in zip((1, 2, 3), law):
        freq = np.mean(digits == n)
        assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / digits.size)
