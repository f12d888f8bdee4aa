import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import measures
from privamp.amplification import Poisson, Relation, WithoutReplacement, WithReplacement, scheme_eta
from privamp.divergence import DiscreteMeasure, advanced_joint_convexity, maximal_coupling, total_variation
from privamp.errors import BadParams, InfeasibleMarginals, InstanceTooLarge, MissingKernelEntry, POutOfRange, Unreachable
from privamp.oracle import (
    Dataset,
    KernelGroupProfiles,
    MechanismKernel,
    enumerate_subsamples,
    exact_subsampled_divergence,
    group_profile_sum,
    is_distance_compatible,
    key_distance,
    load_scenario,
    membership_kernel,
    min_cost_coupling,
    parse_scenario,
    path_distance,
    run_scenario,
    support_distances,
    verify_tightness,
)
from privamp.oracle.checks import constant_kernel, subsampled_output, theorem_bound
from privamp.oracle.datasets import decode, encode
from privamp.profiles import GroupMode, GroupProfile, laplace_profile, rr_profile

U = ["a", "b", "c", "d", "e", "f", "g", "h", "w"]


def ds(*elems):
    return Dataset.build(list(elems), U)


class TestDatasets:
    def test_canonical_key_follows_universe_order(self):
        assert ds("c", "a", "a").key == "a:2|c:1"
        assert decode("a:2|c:1") == (("a", 2), ("c", 1))
        assert encode([]) == "" and decode("") == ()

    def test_equal_content_equal_object(self):
        assert ds("a", "b") == Dataset.build({"b": 1, "a": 1}, U)

    @pytest.mark.parametrize("elements,universe", [(["z"], U), (["a"], ["a", "a"]), (["a"], ["a:b"])])
    def test_validation(self, elements, universe):
        with pytest.raises(BadParams):
            Dataset.build(elements, universe)

    def test_edits(self):
        x = ds("a", "b")
        assert x.add("a").key == "a:2|b:1"
        assert x.remove("a") == ds("b")
        assert x.substitute("b", "c") == ds("a", "c")
        with pytest.raises(BadParams):
            x.remove("c")


class TestPathDistance:
    def test_examples(self):
        assert path_distance(ds("a", "b"), ds("a", "b"), "substitute") == 0
        assert path_distance(ds("a", "b"), ds("a", "c"), "substitute") == 1
        assert path_distance(ds("a", "b"), ds("a"), "removeadd") == 1
        with pytest.raises(Unreachable):
            path_distance(ds("a", "b"), ds("a"), "substitute")

    def test_key_distance_reports_inf(self):
        assert key_distance("a:1", "", Relation.SUBSTITUTE) == math.inf
        assert key_distance("a:2", "b:2", Relation.SUBSTITUTE) == 2

    @given(st.lists(st.sampled_from("abc"), max_size=4), st.lists(st.sampled_from("abc"), max_size=4),
           st.lists(st.sampled_from("abc"), max_size=4))
    def test_triangle_inequality(self, x, y, z):
        dx, dy, dz = (Dataset.build(v, U) for v in (x, y, z))
        d = lambda p, q: path_distance(p, q, "removeadd")  # noqa: E731
        assert d(dx, dz) <= d(dx, dy) + d(dy, dz)


class TestEnumeration:
    def test_poisson_single(self):
        assert enumerate_subsamples(Poisson(0.5), ds("a")) == DiscreteMeasure({"": 0.5, "a:1": 0.5})

    def test_wor_uniform(self):
        out = enumerate_subsamples(WithoutReplacement(3, 2), ds("a", "b", "c"))
        assert set(out.support) == {"a:1|b:1", "a:1|c:1", "b:1|c:1"}
        assert all(w == pytest.approx(1 / 3) for _, w in out.items())

    def test_wr_multinomial(self):
        out = enumerate_subsamples(WithReplacement(2, 2), ds("a", "b"))
        assert out == DiscreteMeasure({"a:2": 0.25, "a:1|b:1": 0.5, "b:2": 0.25})

    def test_wr_with_repeated_records(self):
        out = enumerate_subsamples(WithReplacement(3, 2), Dataset.build({"a": 2, "b": 1}, U))
        assert out["a:2"] == pytest.approx(4 / 9) and out["a:1|b:1"] == pytest.approx(4 / 9)

    def test_wor_multiset_hypergeometric(self):
        out = enumerate_subsamples(WithoutReplacement(3, 2), Dataset.build({"a": 2, "b": 1}, U))
        assert out["a:2"] == pytest.approx(1 / 3) and out["a:1|b:1"] == pytest.approx(2 / 3)

    def test_limits_are_errors(self):
        big = Dataset.build([f"x{i}" for i in range(20)], [f"x{i}" for i in range(20)])
        with pytest.raises(InstanceTooLarge) as exc:
            enumerate_subsamples(Poisson(0.5), big)
        assert exc.value.cardinality == 20
        with pytest.raises(InstanceTooLarge):
            enumerate_subsamples(WithReplacement(20, 12), big)

    @pytest.mark.parametrize("scheme", [Poisson(0.3), WithoutReplacement(5, 2), WithReplacement(5, 3)])
    def test_mass_sums_to_one(self, scheme):
        assert enumerate_subsamples(scheme, ds("a", "b", "c", "d", "e")).total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_tv_matches_scheme_eta(self, n):
        x = Dataset.build(U[:n], U)
        cases = [
            (Poisson(0.3), Relation.REMOVE_ADD, x.remove("a"), None),
            (WithoutReplacement(n, 2), Relation.SUBSTITUTE, x.substitute("a", "w"), None),
            (WithReplacement(n, 3), Relation.SUBSTITUTE, x.substitute("a", "w"), None),
            (WithReplacement(n, 3), Relation.REMOVE_ADD, x.remove("a"), n),
        ]
        for scheme, rel, xp, n_ctx in cases:
            tv = total_variation(enumerate_subsamples(scheme, x), enumerate_subsamples(scheme, xp))
            assert tv == pytest.approx(scheme_eta(scheme, rel, n_ctx), abs=1e-12)

    def test_joint_convexity_through_subsampling(self):
        x = ds("a", "b", "c", "d")
        xp = x.substitute("a", "w")
        scheme = WithoutReplacement(4, 2)
        kernel = MechanismKernel({k: DiscreteMeasure({"hi": 0.2 + 0.1 * len(k) % 0.7, "lo": 0.8 - 0.1 * len(k) % 0.7})
                                  for k in set(enumerate_subsamples(scheme, x).support)
                                  | set(enumerate_subsamples(scheme, xp).support)})
        dec = maximal_coupling(enumerate_subsamples(scheme, x), enumerate_subsamples(scheme, xp))
        from privamp.divergence import pushforward

        mu0, mu1, mu1p = (pushforward(w, kernel) for w in (dec.omega0, dec.omega1, dec.omega1_prime))
        for alpha in (1.0, 2.0, 5.0):
            r = advanced_joint_convexity(mu0, mu1, mu1p, dec.eta, alpha)
            exact = exact_subsampled_divergence(scheme, kernel, x, xp, r.alpha_prime)
            assert r.lhs == pytest.approx(exact, abs=1e-12)
            assert r.rhs == pytest.approx(exact, abs=1e-12)


class TestKernels:
    def test_membership_outputs(self):
        k = membership_kernel("a", 0.8)
        assert k("b:1").as_dict() == pytest.approx({"0": 0.8, "1": 0.2})
        assert k("a:1|b:1").as_dict() == pytest.approx({"1": 0.8, "0": 0.2})
        assert membership_kernel("a", 1.0)("a:2") == DiscreteMeasure.point("1")

    def test_membership_bad_p(self):
        with pytest.raises(POutOfRange):
            membership_kernel("a", 0.3)

    def test_table_kernel_missing(self):
        with pytest.raises(MissingKernelEntry):
            MechanismKernel({"a:1": DiscreteMeasure.point("x")})("b:1")

    def test_exact_divergence_trivial_cases(self):
        x = ds("a", "b", "c")
        k = membership_kernel("a", 0.7)
        assert exact_subsampled_divergence(Poisson(0.4), k, x, x, 1.0) == 0.0
        c = constant_kernel(DiscreteMeasure({"u": 0.3, "v": 0.7}))
        assert exact_subsampled_divergence(Poisson(0.4), c, x, x.remove("a"), 1.0) == 0.0

    @pytest.mark.parametrize("gamma,p,eps", [(0.2, 0.7, 0.0), (0.5, 0.9, 1.0), (0.3, 0.8, math.log(2))])
    def test_poisson_membership_attains_gamma_psi(self, gamma, p, eps):
        x = ds("a", "b", "c", "d")
        alpha = 1 + gamma * math.expm1(eps)
        exact = exact_subsampled_divergence(Poisson(gamma), membership_kernel("a", p), x, x.remove("a"), alpha)
        assert exact == pytest.approx(gamma * rr_profile(p)(eps), abs=1e-14)


class TestTightness:
    def test_poisson(self):
        x = Dataset.build(U[:6], U)
        r = verify_tightness(Poisson(0.3), "removeadd", 0.8, math.log(2), (x, x.remove("a")))
        assert abs(r.gap) <= 1e-12 and r.bound == pytest.approx(0.3 * rr_profile(0.8)(math.log(2)))

    def test_wor(self):
        x = Dataset.build(U[:6], U)
        r = verify_tightness(WithoutReplacement(6, 3), "substitute", 0.8, math.log(2), (x, x.substitute("a", "w")))
        assert abs(r.gap) <= 1e-12 and r.bound == pytest.approx(0.5 * rr_profile(0.8)(math.log(2)))

    def test_wr(self):
        x = Dataset.build(U[:5], U)
        r = verify_tightness(WithReplacement(5, 3), "substitute", 0.8, math.log(2), (x, x.substitute("a", "w")))
        assert abs(r.gap) <= 1e-12

    def test_needs_distinguishing_record(self):
        x = ds("a", "b")
        with pytest.raises(BadParams):
            verify_tightness(Poisson(0.3), "removeadd", 0.8, 0.1, (x.remove("a"), x))

    def test_hybrid_case_is_reported(self, capsys):
        # Tightness of the remove/add with-replacement bound is not claimed; print the gaps for the record.
        gaps = []
        for n in (3, 4, 5):
            x = Dataset.build(U[:n], U)
            for m in (1, 2, 3):
                r = verify_tightness(WithReplacement(n, m), "removeadd", 0.75, 0.5, (x, x.remove("a")))
                assert r.gap >= -1e-10
                gaps.append(r.gap)
        with capsys.disabled():
            print(f"\nwith-replacement remove/add membership gaps: max={max(gaps):.3g} min={min(gaps):.3g}")


class TestTransport:
    def test_identity_costs_nothing(self):
        nu = DiscreteMeasure({"a:1": 0.3, "b:1": 0.7})
        res = min_cost_coupling(nu, nu, lambda y, yp: key_distance(y, yp, Relation.SUBSTITUTE))
        assert res.value == pytest.approx(0.0, abs=1e-12)

    def test_point_masses(self):
        res = min_cost_coupling(DiscreteMeasure.point("x"), DiscreteMeasure.point("y"), lambda a, b: 2.5)
        assert res.value == pytest.approx(2.5)
        assert res.plan.joint == {("x", "y"): pytest.approx(1.0)}

    def test_marginals_and_duality(self):
        rng = np.random.default_rng(3)
        a = DiscreteMeasure({f"p{i}": float(v) for i, v in enumerate(rng.dirichlet(np.ones(6)))})
        b = DiscreteMeasure({f"q{i}": float(v) for i, v in enumerate(rng.dirichlet(np.ones(5)))})
        res = min_cost_coupling(a, b, lambda y, yp: abs(int(y[1:]) - int(yp[1:])) ** 1.5)
        assert res.value == pytest.approx(res.dual_value, abs=1e-9)
        first = res.plan.first_marginal()
        assert all(first[z] == pytest.approx(a[z], abs=1e-9) for z in a.support)

    def test_mass_mismatch(self):
        with pytest.raises(InfeasibleMarginals):
            min_cost_coupling(DiscreteMeasure({"a": 1.0}), DiscreteMeasure({"a": 0.5}), lambda y, yp: 0.0)

    def test_wor_decomposition_matches_group_sum(self):
        x = ds("a", "b", "c", "d")
        scheme = WithoutReplacement(4, 2)
        dec = maximal_coupling(enumerate_subsamples(scheme, x), enumerate_subsamples(scheme, x.substitute("a", "w")))
        deltas = {0: 0.0, **{k: GroupProfile(laplace_profile(0.5), k, "whitebox")(0.2) for k in range(1, 4)}}
        assert is_distance_compatible(dec.omega1, dec.omega1_prime, "substitute")
        cost = lambda y, yp: deltas[int(key_distance(y, yp, Relation.SUBSTITUTE))]  # noqa: E731
        value = min_cost_coupling(dec.omega1, dec.omega1_prime, cost).value
        assert value == pytest.approx(group_profile_sum(dec.omega1, dec.omega1_prime, "substitute", deltas), abs=1e-10)

    def test_wr_decomposition_is_compatible(self):
        x = ds("a", "b", "c", "d")
        scheme = WithReplacement(4, 2)
        dec = maximal_coupling(enumerate_subsamples(scheme, x), enumerate_subsamples(scheme, x.substitute("a", "w")))
        assert is_distance_compatible(dec.omega1, dec.omega1_prime, Relation.SUBSTITUTE)
        dist = support_distances(dec.omega1, dec.omega1_prime, "substitute")
        assert set(dist.values()) == {1, 2}

    def test_poisson_substitution_components_are_incompatible(self):
        x = ds("a", "b", "c")
        nu = enumerate_subsamples(Poisson(0.4), x)
        omega1 = DiscreteMeasure((k, w / 0.4) for k, w in nu.items() if "a:" in k)
        omega0 = DiscreteMeasure((k, w / 0.6) for k, w in nu.items() if "a:" not in k)
        assert not is_distance_compatible(omega1, omega0, Relation.SUBSTITUTE)

    def test_identical_is_compatible(self):
        nu = DiscreteMeasure({"a:1": 0.5, "b:1": 0.5})
        assert is_distance_compatible(nu, nu, "substitute")

    @given(measures(outcomes=("a:1", "b:1", "c:1", "a:2", "a:1|b:1")),
           measures(outcomes=("a:1", "b:1", "c:1", "a:2", "a:1|b:1")))
    @settings(max_examples=60, deadline=None)
    def test_cost_never_below_group_sum(self, nu, nup):
        # Substitution needs equal sizes, so only compare measures over keys of one size.
        size = lambda k: sum(c for _, c in decode(k))  # noqa: E731
        nu = DiscreteMeasure((k, w) for k, w in nu.items() if size(k) == 1)
        nup = DiscreteMeasure((k, w) for k, w in nup.items() if size(k) == 1)
        if nu.total == 0 or nup.total == 0:
            return
        nu, nup = nu.scale(1 / nu.total), nup.scale(1 / nup.total)
        deltas = {0: 0.0, 1: 0.3, 2: 0.5}
        cost = lambda y, yp: deltas[int(key_distance(y, yp, Relation.SUBSTITUTE))]  # noqa: E731
        value = min_cost_coupling(nu, nup, cost).value
        target = group_profile_sum(nu, nup, "substitute", deltas)
        assert value >= target - 1e-10
        if is_distance_compatible(nu, nup, "substitute"):
            assert value == pytest.approx(target, abs=1e-10)


class TestKernelGroupProfiles:
    def test_constant_domain_has_zero_profile(self):
        g = KernelGroupProfiles(membership_kernel("a", 0.8), ["a:1"], "substitute")
        assert g.profile(1)(0.0) == 0.0 and g.max_distance == 0

    def test_membership_group_profile_is_k_independent(self):
        x = ds("a", "b", "c")
        scheme = WithReplacement(3, 2)
        domain = list(enumerate_subsamples(scheme, x).support) + list(
            enumerate_subsamples(scheme, x.substitute("a", "w")).support)
        g = KernelGroupProfiles(membership_kernel("a", 0.8), domain, "substitute")
        for k in (1, 2):
            assert g(k)(0.3) == pytest.approx(rr_profile(0.8)(0.3))

    def test_theorem_bound_uses_instance_size(self):
        x = ds("a", "b", "c")
        b = theorem_bound(WithReplacement(99, 2), "removeadd", rr_profile(0.8), 0.2, x, x.remove("a"),
                          group_mode=GroupMode.CONSTANT)
        assert b.eta == pytest.approx(1 - (2 / 3) ** 2)


class TestScenarios:
    def _base(self):
        return {
            "name": "wor", "universe": ["a", "b", "c", "w"], "x": ["a", "b", "c"], "x_prime": ["w", "b", "c"],
            "scheme": {"type": "wor", "n": 3, "m": 2}, "relation": "substitute",
            "mechanism": {"type": "membership", "v": "a", "p": 0.75}, "epsilons": [0, 0.5],
        }

    def test_membership_scenario_is_tight(self):
        rows = run_scenario(parse_scenario(self._base()))
        assert all(abs(gap) <= 1e-12 for *_, gap in rows)

    def test_kernel_scenario_dominates(self, tmp_path):
        data = self._base()
        keys = ["a:1|b:1", "a:1|c:1", "b:1|c:1", "b:1|w:1", "c:1|w:1"]
        data["mechanism"] = {"type": "kernel", "outputs": {k: {"u": (i + 1) / 6, "v": 1 - (i + 1) / 6}
                                                           for i, k in enumerate(keys)}}
        path = tmp_path / "s.json"
        path.write_text(json.dumps(data))
        rows = run_scenario(load_scenario(path))
        assert len(rows) == 2 and all(gap >= -1e-10 for *_, gap in rows)

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("x"),
        lambda d: d.update(relation="sideways"),
        lambda d: d.update(x_prime=["a", "b"]),
        lambda d: d.update(epsilons=[]),
        lambda d: d.update(scheme={"type": "wor"}),
        lambda d: d.update(mechanism={"type": "kernel", "outputs": {"a:1|b:1": {"u": 0.9}}}),
    ])
    def test_invalid_scenarios(self, mutate):
        data = self._base()
        mutate(data)
        with pytest.raises(BadParams):
            parse_scenario(data)

    def test_unreadable_file(self, tmp_path):
        (tmp_path / "bad.json").write_text("{not json")
        with pytest.raises(BadParams):
            load_scenario(tmp_path / "bad.json")


def test_subsampled_output_is_normalized():
    out = subsampled_output(Poisson(0.5), membership_kernel("a", 0.9), ds("a", "b", "c"))
    assert out.total == pytest.approx(1.0, abs=1e-12)
