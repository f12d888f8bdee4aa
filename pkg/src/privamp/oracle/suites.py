"""Seeded verification suites over the exact oracle.

Each suite returns a :class:`SuiteResult` holding one :class:`Check` per
compared quantity.  The command line ``verify`` command and the acceptance
tests both run these.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from privamp.amplification import Poisson, Relation, WithoutReplacement, WithReplacement, amplify_poisson_substitution
from privamp.divergence import DiscreteMeasure, advanced_joint_convexity, hockey_stick, maximal_coupling
from privamp.mgf import loss_distribution, mgf_from_profiles, profile_from_loss
from privamp.oracle.checks import (
    MechanismKernel,
    check_dominance,
    exact_subsampled_divergence,
    membership_kernel,
    verify_tightness,
)
from privamp.oracle.datasets import Dataset, enumerate_subsamples, key_distance
from privamp.oracle.transport import group_profile_sum, is_distance_compatible, min_cost_coupling
from privamp.profiles import (
    GroupMode,
    GroupProfile,
    gaussian_profile,
    laplace_profile,
    rr_profile,
)

LN2 = math.log(2.0)


@dataclass(frozen=True)
class Check:
    label: str
    exact: float
    bound: float
    gap: float
    passed: bool


@dataclass(frozen=True)
class SuiteResult:
    name: str
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def worst(self) -> Check | None:
        failing = [c for c in self.checks if not c.passed]
        return failing[0] if failing else None


def _equality(label, a, b, tol) -> Check:
    return Check(label, a, b, b - a, abs(b - a) <= tol)


def _dominance(label, exact, bound, tol) -> Check:
    return Check(label, exact, bound, bound - exact, bound - exact >= -tol)


# Random instances ------------------------------------------------------------

def random_measure(rng: np.random.Generator, support, zero_prob: float = 0.2) -> DiscreteMeasure:
    """Dirichlet-distributed probability vector with some entries forced to zero."""
    support = list(support)
    w = rng.dirichlet(np.ones(len(support)))
    mask = rng.random(len(support)) < zero_prob
    if mask.all():
        mask[rng.integers(len(support))] = False
    w = np.where(mask, 0.0, w)
    w = w / w.sum()
    return DiscreteMeasure({z: float(v) for z, v in zip(support, w) if v > 0.0})


def random_ajc_instances(trials: int, seed: int, size: int = 5) -> Iterator[tuple]:
    rng = np.random.default_rng(seed)
    support = [f"z{i}" for i in range(size)]
    for t in range(trials):
        mu0, mu1, mu1p = (random_measure(rng, support) for _ in range(3))
        r = rng.random()
        eta = 0.0 if t % 50 == 0 else 1.0 if t % 50 == 1 else float(r)
        yield mu0, mu1, mu1p, eta


def random_kernel(rng: np.random.Generator, domain, max_outputs: int = 4) -> MechanismKernel:
    k = int(rng.integers(2, max_outputs + 1))
    outputs = [f"o{i}" for i in range(k)]
    return MechanismKernel({y: random_measure(rng, outputs, zero_prob=0.25) for y in domain})


def _names(rng, count):
    pool = list("abcdefgh")
    rng.shuffle(pool)
    return pool[:count]


def _dominance_instance(rng: np.random.Generator, kind: str):
    """Small neighbouring pair whose subsample domain has at most five keys."""
    if kind == "poisson":
        a, b, v = _names(rng, 3)
        big = [a, v] if rng.random() < 0.5 else [v]
        x = Dataset.build(big, [a, b, v])
        xp = x.remove(v)
        if rng.random() < 0.5:
            x, xp = xp, x
        return Poisson(float(rng.choice([0.1, 0.3, 0.5, 0.8]))), Relation.REMOVE_ADD, x, xp
    if kind == "wor":
        a, b, c, w = _names(rng, 4)
        n, m = (3, int(rng.integers(1, 3))) if rng.random() < 0.7 else (2, 1)
        elems = [a, b, c][:n]
        x = Dataset.build(elems, [a, b, c, w])
        return WithoutReplacement(n, m), Relation.SUBSTITUTE, x, x.substitute(elems[-1], w)
    if kind == "wr":
        a, b, w = _names(rng, 3)
        n, m = (2, 2) if rng.random() < 0.5 else (int(rng.integers(2, 4)), 1)
        elems = [a, b, w][: n] if n == 3 else [a, b]
        universe = [a, b, w, "zz"]
        x = Dataset.build(elems, universe)
        return WithReplacement(n, m), Relation.SUBSTITUTE, x, x.substitute(elems[-1], "zz")
    if kind == "wr_hybrid":
        a, b, v = _names(rng, 3)
        x = Dataset.build([a, b, v] if rng.random() < 0.5 else [a, v], [a, b, v])
        m = 1 if x.size == 3 else int(rng.integers(1, 3))
        xp = x.remove(v)
        if rng.random() < 0.5:
            x, xp = xp, x
        return WithReplacement(max(x.size, xp.size), m), Relation.REMOVE_ADD, x, xp
    raise ValueError(kind)


DOMINANCE_KINDS = ("poisson", "wor", "wr", "wr_hybrid")


# Suites ----------------------------------------------------------------------

def suite_ajc(trials: int = 1000, seed: int = 7, tol: float = 1e-12) -> SuiteResult:
    checks = []
    for t, (mu0, mu1, mu1p, eta) in enumerate(random_ajc_instances(trials, seed)):
        for alpha in (1.0, 2.0, math.e, 10.0):
            r = advanced_joint_convexity(mu0, mu1, mu1p, eta, alpha)
            checks.append(_equality(f"ajc trial={t} eta={eta:.6g} alpha={alpha:.6g}", r.lhs, r.rhs, tol))
    return SuiteResult("ajc", tuple(checks))


def tightness_instances() -> Iterator[tuple]:
    universe = [f"u{i}" for i in range(1, 9)] + ["w"]
    for gamma in (0.1, 0.3, 0.5):
        for n in range(1, 9):
            x = Dataset.build(universe[:n], universe)
            yield Poisson(gamma), Relation.REMOVE_ADD, x, x.remove("u1")
    for n in range(1, 9):
        for m in range(1, min(4, n) + 1):
            x = Dataset.build(universe[:n], universe)
            yield WithoutReplacement(n, m), Relation.SUBSTITUTE, x, x.substitute("u1", "w")
    for n in range(1, 7):
        for m in range(1, 5):
            x = Dataset.build(universe[:n], universe)
            yield WithReplacement(n, m), Relation.SUBSTITUTE, x, x.substitute("u1", "w")


def suite_tightness(tol: float = 1e-12) -> SuiteResult:
    checks = []
    for scheme, rel, x, xp in tightness_instances():
        for p in (0.6, 0.75, 0.9):
            for eps in (0.0, LN2, 1.0):
                r = verify_tightness(scheme, rel, p, eps, (x, xp))
                checks.append(_equality(f"tight {scheme} n={x.size} p={p} eps={eps:.6g}", r.exact, r.bound, tol))
    return SuiteResult("tightness", tuple(checks))


def suite_dominance(trials: int = 200, seed: int = 11, tol: float = 1e-10) -> SuiteResult:
    rng = np.random.default_rng(seed)
    checks = []
    for t in range(trials):
        kind = DOMINANCE_KINDS[t % len(DOMINANCE_KINDS)]
        scheme, rel, x, xp = _dominance_instance(rng, kind)
        domain = list(dict.fromkeys(list(enumerate_subsamples(scheme, x).support)
                                    + list(enumerate_subsamples(scheme, xp).support)))
        kernel = random_kernel(rng, domain)
        eps_values = [0.0, 0.1, 0.5, 1.0, 2.0]
        for rec in check_dominance(scheme, rel, kernel, x, xp, eps_values):
            checks.append(_dominance(f"dom trial={t} {kind} {x.key}/{xp.key} eps={rec.eps:.6g}",
                                     rec.exact, rec.bound, tol))
    return SuiteResult("dominance", tuple(checks))


def _laplace_divergence_quad(theta: float, eps: float) -> float:
    """``int [p(x) - e^eps q(x)]_+ dx`` for unit-scale Laplace densities centred at 0 and theta."""
    a = math.exp(eps)

    def f(x):
        return max(0.5 * math.exp(-abs(x)) - a * 0.5 * math.exp(-abs(x - theta)), 0.0)

    # The positive part switches sign where |x - theta| - |x| = eps, i.e. x = (theta - eps)/2.
    cut = (theta - eps) / 2.0
    pts = sorted({0.0, theta, min(max(cut, -60.0), 60.0)})
    edges = [-60.0] + pts + [60.0]
    return math.fsum(integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
                     for lo, hi in zip(edges, edges[1:]) if hi > lo)


def _gaussian_divergence_quad(theta: float, eps: float) -> float:
    a = math.exp(eps)
    c = 1.0 / math.sqrt(2.0 * math.pi)

    def f(x):
        return max(c * math.exp(-0.5 * x * x) - a * c * math.exp(-0.5 * (x - theta) ** 2), 0.0)

    # Positive exactly for x < theta/2 - eps/theta.
    cut = theta / 2.0 - eps / theta
    return math.fsum(integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
                     for lo, hi in ((-40.0, cut - 5.0), (cut - 5.0, cut)))


def profile_grid():
    for theta in (0.5, 1.0, 2.0):
        for frac in (0.0, 0.25, 0.5, 1.0, 2.0):
            yield theta, frac * theta


def suite_profiles(tol: float = 1e-9) -> SuiteResult:
    checks = []
    for theta, eps in profile_grid():
        checks.append(_equality(f"laplace theta={theta} eps={eps:.6g}",
                                _laplace_divergence_quad(theta, eps), laplace_profile(theta)(eps), tol))
        checks.append(_equality(f"gaussian theta={theta} eps={eps:.6g}",
                                _gaussian_divergence_quad(theta, eps), gaussian_profile(theta)(eps), tol))
        if eps >= theta:
            v = laplace_profile(theta)(eps)
            checks.append(Check(f"laplace zero theta={theta} eps={eps:.6g}", 0.0, v, v, v == 0.0))
    return SuiteResult("profiles", tuple(checks))


def suite_loss(trials: int = 500, seed: int = 5, tol: float = 1e-12) -> SuiteResult:
    rng = np.random.default_rng(seed)
    support = [f"z{i}" for i in range(5)]
    checks = []
    for t in range(trials):
        mu, mup = random_measure(rng, support), random_measure(rng, support)
        fwd, rev = loss_distribution(mu, mup), loss_distribution(mup, mu)
        for eps in (0.0, 0.5, 1.0, 2.0):
            checks.append(_equality(f"loss trial={t} eps={eps}", hockey_stick(mu, mup, math.exp(eps)),
                                    profile_from_loss(fwd, rev, eps), tol))
    return SuiteResult("loss", tuple(checks))


def suite_mgf(rel_tol: float = 1e-6, rr_tol: float = 1e-8) -> SuiteResult:
    checks = []
    for theta in (0.5, 1.0, 2.0):
        for s in (0.5, 1.0, 2.0, 5.0):
            exact = math.exp(theta * theta * s * (s + 1.0) / 2.0)
            got = mgf_from_profiles(gaussian_profile(theta), None, s)
            checks.append(Check(f"mgf gaussian theta={theta} s={s}", exact, got, got - exact,
                                abs(got / exact - 1.0) <= rel_tol))
    for p in (0.6, 0.75):
        r = p / (1.0 - p)
        for s in (0.5, 1.0, 2.0, 5.0):
            exact = p * r**s + (1.0 - p) * r ** (-s)
            checks.append(_equality(f"mgf rr p={p} s={s}", exact, mgf_from_profiles(rr_profile(p), None, s), rr_tol))
    return SuiteResult("mgf", tuple(checks))


def coupling_instances() -> Iterator[tuple]:
    universe = [f"u{i}" for i in range(1, 7)] + ["w"]
    for n in range(2, 7):
        x = Dataset.build(universe[:n], universe)
        xp = x.substitute("u1", "w")
        for m in range(1, n + 1):
            if math.comb(n, m) <= 20:
                yield WithoutReplacement(n, m), x, xp
        for m in range(1, 4):
            yield WithReplacement(n, m), x, xp


def suite_coupling(tol: float = 1e-10) -> SuiteResult:
    """Distance-compatible couplings collapse the transport cost to a group-profile sum."""
    checks = []
    base = laplace_profile(1.0)
    for eps in (0.0, 0.5):
        deltas = {k: GroupProfile(base, k, GroupMode.WHITE_BOX)(eps) for k in range(1, 8)}
        deltas[0] = 0.0
        for scheme, x, xp in coupling_instances():
            dec = maximal_coupling(enumerate_subsamples(scheme, x), enumerate_subsamples(scheme, xp))
            w1, w1p = dec.omega1, dec.omega1_prime
            label = f"coupling {scheme} eps={eps}"
            if not is_distance_compatible(w1, w1p, Relation.SUBSTITUTE):
                checks.append(Check(label + " compatible", 1.0, 0.0, -1.0, False))
                continue

            def cost(y, yp):
                return deltas[int(key_distance(y, yp, Relation.SUBSTITUTE))]

            value = min_cost_coupling(w1, w1p, cost).value
            target = group_profile_sum(w1, w1p, Relation.SUBSTITUTE, deltas)
            checks.append(_equality(label, target, value, tol))
    # Poisson under substitution: the component containing the substituted
    # element cannot be matched to the common component at equal sizes.
    for n in (2, 3, 4):
        universe = [f"u{i}" for i in range(1, n + 1)] + ["w"]
        x = Dataset.build(universe[:n], universe)
        nu = enumerate_subsamples(Poisson(0.4), x)
        omega1 = DiscreteMeasure((k, w) for k, w in nu.items() if "u1:" in k).scale(1.0 / 0.4)
        omega0 = DiscreteMeasure((k, w) for k, w in nu.items() if "u1:" not in k).scale(1.0 / 0.6)
        ok = is_distance_compatible(omega1, omega0, Relation.SUBSTITUTE)
        checks.append(Check(f"poisson-substitution n={n} incompatible", 0.0, float(ok), float(ok), not ok))
    return SuiteResult("coupling", tuple(checks))


def suite_appendix(tol: float = 1e-10) -> SuiteResult:
    checks = []
    for n in (3, 4, 5):
        universe = [f"u{i}" for i in range(1, n + 1)] + ["w"]
        x = Dataset.build(universe[:n], universe)
        xp = x.substitute("u1", "w")
        for gamma in (0.2, 0.5):
            for p in (0.6, 0.75, 0.9):
                for eps in (0.0, LN2):
                    b = amplify_poisson_substitution(rr_profile(p), n, gamma, eps)
                    kernel = membership_kernel("u1", p)
                    exact = exact_subsampled_divergence(Poisson(gamma), kernel, x, xp, math.exp(b.eps_out))
                    checks.append(_dominance(f"appendix n={n} gamma={gamma} p={p} eps={eps:.6g}",
                                             exact, b.delta_out, tol))
    return SuiteResult("appendix", tuple(checks))


def suite_group_order(points: int = 100, eps_max: float = 4.0) -> SuiteResult:
    checks = []
    grid = np.linspace(0.0, eps_max, points)
    for make, family in ((laplace_profile, "laplace"), (gaussian_profile, "gaussian")):
        for theta in (0.5, 1.0, 2.0):
            base = make(theta)
            for k in (2, 3, 5):
                white = GroupProfile(base, k, GroupMode.WHITE_BOX)
                black = GroupProfile(base, k, GroupMode.BLACK_BOX)
                for e in grid.tolist():
                    w, b = white(e), black(e)
                    checks.append(_dominance(f"group {family} theta={theta} k={k} eps={e:.6g}", w, b, 0.0))
    return SuiteResult("group_order", tuple(checks))


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "ajc": suite_ajc,
    "tightness": suite_tightness,
    "dominance": suite_dominance,
    "profiles": suite_profiles,
    "loss": suite_loss,
    "mgf": suite_mgf,
    "coupling": suite_coupling,
    "appendix": suite_appendix,
    "group_order": suite_group_order,
}

SEEDED = {"ajc", "dominance", "loss"}
