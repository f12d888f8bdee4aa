import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from privamp.divergence import DiscreteMeasure, bernoulli, hockey_stick
from privamp.errors import BadK, BadParams, EmptyPairList, NonPositiveTheta, POutOfRange, UnsupportedFamily
from privamp.profiles import (
    EmpiricalProfile,
    GroupMode,
    GroupProfile,
    TabulatedProfile,
    calibrate_theta,
    conservative_extension,
    empirical_profile,
    gaussian_profile,
    group_blackbox,
    group_family,
    group_whitebox,
    laplace_profile,
    rr_profile,
    std_normal_cdf,
)

# mpmath ncdf at 40 digits
PHI_1 = 0.8413447460685429
GAUSS_THETA1_EPS0 = 0.3829249225480262
GAUSS_THETA1_EPS3 = 0.0015371853694009548


class TestStdNormalCdf:
    def test_centre(self):
        assert std_normal_cdf(0.0) == 0.5

    @pytest.mark.parametrize("t", [0.5, 1.0, 3.0, 8.0])
    def test_symmetry(self, t):
        assert std_normal_cdf(t) + std_normal_cdf(-t) == pytest.approx(1.0, abs=1e-15)

    def test_against_quadrature(self):
        q, _ = integrate.quad(lambda x: math.exp(-x * x / 2) / math.sqrt(2 * math.pi), -np.inf, 1.0, epsabs=1e-14)
        assert std_normal_cdf(1.0) == pytest.approx(PHI_1, abs=1e-13)
        assert q == pytest.approx(PHI_1, abs=1e-12)

    def test_far_tail_keeps_relative_accuracy(self):
        assert std_normal_cdf(-30.0) == pytest.approx(4.906713927148187e-198, rel=1e-12)


class TestLaplace:
    def test_zero_beyond_theta(self):
        assert laplace_profile(1.0)(2.0) == 0.0
        assert laplace_profile(1.0)(1.0) == 0.0

    def test_closed_form_values(self):
        assert laplace_profile(1.0)(0.0) == pytest.approx(1 - math.exp(-0.5), abs=1e-15)
        assert laplace_profile(2.0)(1.0) == pytest.approx(1 - math.exp(-0.5), abs=1e-15)

    @pytest.mark.parametrize("theta", [0.0, -1.0, math.inf, math.nan])
    def test_bad_theta(self, theta):
        with pytest.raises(NonPositiveTheta):
            laplace_profile(theta)

    @given(st.floats(0.05, 5.0), st.floats(-8.0, 8.0))
    def test_negative_eps_matches_reverse_relation(self, theta, eps):
        # Symmetric noise: D_{e^eps} = 1 - e^eps + e^eps D_{e^-eps}.
        p = laplace_profile(theta)
        if eps < 0:
            assert p(eps) == pytest.approx(-math.expm1(eps) + math.exp(eps) * p(-eps), abs=1e-12)


class TestGaussian:
    def test_theta_one_eps_zero(self):
        assert gaussian_profile(1.0)(0.0) == pytest.approx(GAUSS_THETA1_EPS0, abs=1e-15)
        assert gaussian_profile(1.0)(0.0) == pytest.approx(2 * std_normal_cdf(0.5) - 1, abs=1e-15)

    def test_theta_one_eps_three(self):
        assert gaussian_profile(1.0)(3.0) == pytest.approx(GAUSS_THETA1_EPS3, abs=1e-15)

    def test_vanishing_theta(self):
        # delta(0) = 2 Phi(theta/2) - 1 ~ theta / sqrt(2 pi): small, but above 1e-6 at theta = 1e-4.
        assert gaussian_profile(1e-4)(0.0) == pytest.approx(3.9894228023520673e-05, rel=1e-9)
        assert gaussian_profile(1e-7)(0.0) < 1e-6
        assert gaussian_profile(1e-7)(0.5) == 0.0

    def test_deep_tail_is_positive_and_monotone(self):
        p = gaussian_profile(0.5)
        vals = [p(e) for e in np.linspace(5.0, 16.0, 12)]
        assert all(v > 0 for v in vals)
        assert all(b < a for a, b in zip(vals, vals[1:]))

    @given(st.floats(0.05, 5.0), st.floats(-8.0, -1e-6))
    def test_negative_eps_matches_reverse_relation(self, theta, eps):
        p = gaussian_profile(theta)
        assert p(eps) == pytest.approx(-math.expm1(eps) + math.exp(eps) * p(-eps), abs=1e-12)


class TestRandomizedResponse:
    def test_examples(self):
        assert rr_profile(0.75)(0.0) == pytest.approx(0.5)
        assert rr_profile(0.75)(math.log(3.0)) == pytest.approx(0.0, abs=1e-15)
        assert rr_profile(0.9)(math.log(2.0)) == pytest.approx(0.7, abs=1e-15)
        assert rr_profile(0.9)(math.log(2.0)) == pytest.approx(hockey_stick(bernoulli(0.9), bernoulli(0.1), 2.0))

    @pytest.mark.parametrize("p", [0.4, 1.1])
    def test_bad_p(self, p):
        with pytest.raises(POutOfRange):
            rr_profile(p)

    @given(st.floats(0.5, 1.0), st.floats(-5.0, 5.0))
    def test_matches_divergence_at_every_eps(self, p, eps):
        assert rr_profile(p)(eps) == pytest.approx(hockey_stick(bernoulli(p), bernoulli(1 - p), math.exp(eps)), abs=1e-12)


@pytest.mark.parametrize("profile", [laplace_profile(0.7), gaussian_profile(1.3), rr_profile(0.8)])
def test_profiles_are_bounded_and_non_increasing(profile):
    grid = np.linspace(-3.0, 6.0, 400)
    vals = [profile(e) for e in grid]
    assert all(0.0 <= v <= 1.0 for v in vals)
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


class TestConservativeExtension:
    def test_upper_bounds_the_true_negative_profile(self):
        for prof in (laplace_profile(1.0), gaussian_profile(1.0), rr_profile(0.8)):
            for eps in np.linspace(-4.0, 0.0, 41):
                assert conservative_extension(prof, eps) >= prof(eps) - 1e-15

    def test_used_when_family_has_no_continuation(self):
        tab = TabulatedProfile(((0.0, 0.3), (1.0, 0.1)))
        assert tab(-1.0) == pytest.approx(min(1.0, 0.3 + 1 - math.exp(-1.0)))


class TestTabulated:
    def test_step_interpolation(self):
        tab = TabulatedProfile(((0.0, 0.5), (1.0, 0.2), (2.0, 0.0)))
        assert tab(0.5) == 0.5 and tab(1.0) == 0.2 and tab(5.0) == 0.0

    @pytest.mark.parametrize("points", [(), ((0.0, 0.5), (0.0, 0.4)), ((0.0, 0.1), (1.0, 0.2)), ((0.0, 1.5),)])
    def test_validation(self, points):
        with pytest.raises(BadParams):
            TabulatedProfile(points)

    def test_csv_round_trip(self, tmp_path):
        tab = TabulatedProfile(tuple((e, gaussian_profile(1.0)(e)) for e in np.linspace(0, 3, 13)))
        tab.to_csv(tmp_path / "t.csv")
        assert TabulatedProfile.from_csv(tmp_path / "t.csv") == tab

    def test_csv_header_checked(self, tmp_path):
        (tmp_path / "bad.csv").write_text("eps,d\n0,1\n")
        with pytest.raises(BadParams):
            TabulatedProfile.from_csv(tmp_path / "bad.csv")


class TestEmpirical:
    def test_constant_kernel(self):
        assert empirical_profile(lambda y: bernoulli(0.3), [("x", "y")], 0.0) == 0.0

    def test_membership_randomized_response(self):
        kernel = {"in": bernoulli(0.75), "out": bernoulli(0.25)}
        assert empirical_profile(kernel, [("in", "out")], 0.0) == pytest.approx(0.5)

    def test_disjoint_outputs(self):
        kernel = {"x": DiscreteMeasure.point("a"), "y": DiscreteMeasure.point("b")}
        assert empirical_profile(kernel, [("x", "y")], 0.0) == 1.0

    def test_empty_pairs(self):
        with pytest.raises(EmptyPairList):
            EmpiricalProfile({}, [])

    def test_symmetric_takes_both_orders(self):
        kernel = {"x": DiscreteMeasure({"a": 0.9, "b": 0.1}), "y": DiscreteMeasure({"a": 0.5, "b": 0.5})}
        one_way = EmpiricalProfile(kernel, [("x", "y")], symmetric=False)
        both = EmpiricalProfile(kernel, [("x", "y")])
        e = 0.5
        assert both(e) == pytest.approx(max(hockey_stick(kernel["x"], kernel["y"], math.exp(e)),
                                            hockey_stick(kernel["y"], kernel["x"], math.exp(e))))
        assert both(e) >= one_way(e)


class TestGroups:
    def test_blackbox_k1_is_base(self):
        base = laplace_profile(1.0)
        assert group_blackbox(base, 1, 0.4) == base(0.4)

    def test_blackbox_at_zero(self):
        base = TabulatedProfile(((0.0, 0.1), (1.0, 0.0)))
        assert group_blackbox(base, 3, 0.0) == pytest.approx(0.3)
        assert group_blackbox(base, 30, 0.0) == 1.0

    def test_blackbox_laplace_example(self):
        base = laplace_profile(1.0)
        assert group_blackbox(base, 2, 2 * math.log(2)) == pytest.approx(3 * base(math.log(2)), abs=1e-15)
        assert group_blackbox(base, 2, 2 * math.log(2)) == pytest.approx(0.42670834511787961, abs=1e-15)

    def test_blackbox_is_continuous_at_zero(self):
        base = gaussian_profile(0.3)
        assert group_blackbox(base, 4, 1e-9) == pytest.approx(group_blackbox(base, 4, 0.0), abs=1e-8)

    @pytest.mark.parametrize("k", [0, -1, 1.5, True])
    def test_bad_k(self, k):
        with pytest.raises(BadK):
            group_blackbox(laplace_profile(1.0), k, 0.5)

    def test_whitebox_examples(self):
        base = laplace_profile(1.0)
        assert group_whitebox(base, 1) is base
        assert group_whitebox(base, 3)(1.0) == pytest.approx(1 - math.exp(-1), abs=1e-15)

    @pytest.mark.parametrize("base", [rr_profile(0.7), TabulatedProfile(((0.0, 0.5),))])
    def test_whitebox_needs_closed_form(self, base):
        with pytest.raises(UnsupportedFamily):
            group_whitebox(base, 2)
        with pytest.raises(UnsupportedFamily):
            group_family(base, "whitebox")

    @pytest.mark.parametrize("theta", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_whitebox_below_blackbox(self, theta, k):
        base = laplace_profile(theta)
        for e in np.linspace(0.0, k * theta, 60):
            assert group_whitebox(base, k)(e) <= group_blackbox(base, k, e) + 1e-15

    def test_group_profile_modes(self):
        base = gaussian_profile(0.5)
        assert GroupProfile(base, 3, GroupMode.CONSTANT)(0.2) == base(0.2)
        assert GroupProfile(base, 3, "whitebox")(0.2) == gaussian_profile(1.5)(0.2)
        assert GroupProfile(base, 3)(0.2) == group_blackbox(base, 3, 0.2)
        assert not GroupProfile(base, 3).supports_negative_eps

    def test_group_profiles_increase_with_k(self):
        for mode in ("whitebox", "blackbox"):
            fam = group_family(laplace_profile(0.5), mode)
            for e in (0.0, 0.3, 1.0):
                vals = [fam(k)(e) for k in range(1, 6)]
                assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


class TestCalibration:
    @pytest.mark.parametrize("make", [laplace_profile, gaussian_profile])
    def test_hits_target(self, make):
        theta = calibrate_theta(make, 0.25)
        assert make(theta)(0.0) == pytest.approx(0.25, abs=1e-12)

    def test_unbracketed_target(self):
        with pytest.raises(BadParams):
            calibrate_theta(laplace_profile, 1.5)
