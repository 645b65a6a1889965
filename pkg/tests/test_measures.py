import io
import math

import mpmath
import numpy as np
import pytest

from iifs.measures import (DivergenceError, GibbsMeasureSpec, ae_tau_is_infinite_evidence,
                           birkhoff_geometric_mean, has_bounded_subsequence, khinchin_constant,
                           level1_log_mean, luroth_geometric_mean, mu_t_children_sum,
                           mu_t_cylinder, mu_t_mass_check, perron_iterate, pressure,
                           pressure_root, surrogate_log_mean, zeta, zeta_interval)
from iifs.systems import make_system

KHINCHIN = 2.6854520010653064


def test_zeta_values():
    assert abs(float(zeta(2)) - math.pi ** 2 / 6) < 1e-14
    assert abs(float(zeta(4)) - math.pi ** 4 / 90) < 1e-14
    z = zeta_interval(3, 128)
    assert abs(float(z.mid()) - 1.2020569031595942) < 1e-15


def test_zeta_rejects_divergent_exponent():
    with pytest.raises((DivergenceError, ValueError)):
        zeta(1.0)


def test_gibbs_cylinder_mass():
    spec = GibbsMeasureSpec(2)
    m = mu_t_cylinder(spec, [1, 2])
    assert abs(m - (1 * 0.25) / (math.pi ** 2 / 6) ** 2) < 1e-14
    assert abs(mu_t_cylinder(spec, [3], log=True) - math.log(mu_t_cylinder(spec, [3]))) < 1e-12


def missing_mass(t, cap):
    return float(mpmath.zeta(t, cap + 1) / mpmath.zeta(t))


def test_gibbs_children_sum_to_parent():
    spec = GibbsMeasureSpec(2.5)
    parent = mu_t_cylinder(spec, [2, 7])
    ratio = mu_t_children_sum(spec, [2, 7], 1000) / parent
    assert ratio <= 1
    assert abs(ratio - (1 - missing_mass(2.5, 1000))) < 1e-12


def test_gibbs_total_mass_is_one_up_to_the_cap():
    spec = GibbsMeasureSpec(3)
    got = mu_t_mass_check(spec, 2, 200)
    assert abs(got - (1 - missing_mass(3, 200)) ** 2) < 1e-12
    assert abs(mu_t_mass_check(spec, 2, 30, exhaustive=True) - mu_t_mass_check(spec, 2, 30)) < 1e-12


@pytest.mark.parametrize("spec", [("cf",), ("linear", 2), ("linear", 2.5), ("linear", 3)])
def test_pressure_root_is_one(spec):
    assert abs(pressure_root(make_system(*spec)) - 1) < 1e-6


def test_pressure_enclosure_contains_zero_at_one():
    enc = pressure(make_system("cf"), 1.0)
    assert enc.lower <= 0 <= enc.upper
    assert abs(enc.estimate) < 1e-9


def test_pressure_decreases_in_t():
    s = make_system("luroth")
    vals = [pressure(s, t).estimate for t in (0.7, 1.0, 1.4)]
    assert vals[0] > vals[1] > vals[2]


def test_linear_decay_pressure_closed_form():
    # level-1 lengths are n^-d / zeta(d): P(t) = log zeta(dt) - t log zeta(d)
    s = make_system("linear", 2)
    t = 0.75
    ref = math.log(float(zeta(1.5))) - t * math.log(float(zeta(2)))
    assert abs(pressure(s, t).estimate - ref) < 1e-6


def test_pressure_below_threshold_diverges():
    with pytest.raises(DivergenceError):
        pressure(make_system("cf"), 0.5)


def test_gauss_density():
    g = perron_iterate(make_system("cf"), 1.0, 2048, 30, 1000)
    ref = 1 / ((1 + g.grid_points) * math.log(2))
    assert np.max(np.abs(g.values - ref)) < 1e-4
    assert not g.diverged


def test_luroth_density_is_flat():
    g = perron_iterate(make_system("luroth"), 1.0, 1024, 1, 1000)
    assert np.max(np.abs(g.values - 1)) < 1e-6


def test_density_integrates_to_one():
    g = perron_iterate(make_system("qg"), 1.0, 1024, 20, 1000)
    assert abs(g.integral() - 1) < 1e-3


def test_density_csv():
    g = perron_iterate(make_system("luroth"), 1.0, 64, 1, 100)
    buf = io.StringIO()
    g.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "x,g" and len(lines) == 65


def test_khinchin_oracle():
    assert abs(khinchin_constant() - KHINCHIN) < 1e-6


def test_luroth_oracle_matches_level1_mean():
    assert abs(math.log(luroth_geometric_mean()) - level1_log_mean(make_system("luroth"))) < 1e-4


def test_birkhoff_small_run_is_reproducible():
    cf = make_system("cf")
    a = birkhoff_geometric_mean(cf, 40, 300, seed=9)
    b = birkhoff_geometric_mean(cf, 40, 300, seed=9, workers=3)
    assert a.estimate == b.estimate
    assert abs(a.estimate - KHINCHIN) < 6 * a.stderr + 0.05
    assert "estimate" in a.to_json()


def test_surrogate_for_linear_decay():
    # digits of LinearDecay(d) are i.i.d. with law n^-d/zeta(d)
    s = make_system("linear", 2)
    assert abs(surrogate_log_mean(s) - level1_log_mean(s)) < 1e-4


def test_bounded_subsequence_rule():
    assert has_bounded_subsequence([1] + [5] * 50)
    assert not has_bounded_subsequence([5] * 500 + [1])


def test_ae_evidence_small():
    assert ae_tau_is_infinite_evidence(make_system("cf"), 30, 500, seed=4) == 1.0
