"""Amplification-by-subsampling bounds.

Every bound maps an input privacy parameter ``eps`` to
``eps' = log(1 + eta (e^eps - 1))`` and a ``delta'`` built from the base
mechanism's (group) privacy profile.  Supported pairings:

====================  ==============  =====================================
scheme                relation        delta'
====================  ==============  =====================================
Poisson(gamma)        remove/add      gamma * delta(eps)
WOR(n, m)             substitute      (m/n) * delta(eps)
WR(n, m)              substitute      sum_k Binom(m, 1/n)[k] * delta_k(eps)
WR(n, m)              remove/add      same sum, n = size of the larger set
Poisson(gamma)        substitute      mixed bound, needs delta at eps < 0
====================  ==============  =====================================
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from typing import Union

from privamp.errors import (
    BadParams,
    EtaOutOfRange,
    MissingGroupProfile,
    NegativeEpsilon,
    UnsupportedPairing,
)
from privamp.profiles import GroupMode, PrivacyProfile, TabulatedProfile, group_family


class Relation(str, enum.Enum):
    REMOVE_ADD = "removeadd"
    SUBSTITUTE = "substitute"


def _positive_int(name, v, minimum=1):
    if isinstance(v, bool) or int(v) != v or v < minimum:
        raise BadParams(f"{name} must be an integer >= {minimum}, got {v!r}")
    return int(v)


@dataclass(frozen=True)
class Poisson:
    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise BadParams(f"Poisson rate must lie in (0, 1], got {self.gamma!r}")


@dataclass(frozen=True)
class WithoutReplacement:
    n: int
    m: int

    def __post_init__(self):
        _positive_int("n", self.n)
        _positive_int("m", self.m)
        if self.m > self.n:
            raise BadParams(f"without-replacement sample size m={self.m} exceeds n={self.n}")


@dataclass(frozen=True)
class WithReplacement:
    n: int
    m: int

    def __post_init__(self):
        _positive_int("n", self.n)
        _positive_int("m", self.m)


SubsamplingScheme = Union[Poisson, WithoutReplacement, WithReplacement]


@dataclass(frozen=True)
class AmplificationBound:
    eps_in: float
    eps_out: float
    delta_out: float
    eta: float
    weights: tuple[tuple[int, float], ...] | None = None
    notes: tuple[str, ...] = ()


def amplified_epsilon(eta: float, eps: float) -> float:
    """``log(1 + eta (e^eps - 1))``, computed with log1p/expm1."""
    if not 0.0 < eta <= 1.0:
        raise EtaOutOfRange(f"eta must lie in (0, 1], got {eta!r}")
    if eps < 0.0:
        raise NegativeEpsilon(f"eps must be >= 0, got {eps!r}")
    if eta == 1.0:
        return float(eps)
    return math.log1p(eta * math.expm1(eps))


def _wr_eta(n: int, m: int) -> float:
    if n == 1:
        return 1.0
    return -math.expm1(m * math.log1p(-1.0 / n))


def scheme_eta(scheme: SubsamplingScheme, relation: Relation | str, n_context: int | None = None) -> float:
    """Total-variation distance between subsample distributions of worst-case neighbours."""
    relation = Relation(relation)
    if isinstance(scheme, Poisson):
        return float(scheme.gamma)
    if isinstance(scheme, WithoutReplacement):
        if relation is not Relation.SUBSTITUTE:
            raise UnsupportedPairing(f"pairing (wor, {relation.value}) is unsupported: "
                                     "without-replacement sampling is only analysed under substitution")
        return scheme.m / scheme.n
    if isinstance(scheme, WithReplacement):
        n = scheme.n if n_context is None else _positive_int("n_context", n_context)
        return _wr_eta(n, scheme.m)
    raise BadParams(f"unknown subsampling scheme {scheme!r}")


def _binomial_pmf(trials: int, q: float) -> list[float]:
    """Binomial(trials, q) pmf, direct when C(trials, k) fits a float, else in log space."""
    if q == 0.0:
        return [1.0] + [0.0] * trials
    if q == 1.0:
        return [0.0] * trials + [1.0]
    try:
        return [float(math.comb(trials, k)) * q**k * (1.0 - q) ** (trials - k) for k in range(trials + 1)]
    except OverflowError:
        pass
    lq, l1q = math.log(q), math.log1p(-q)
    lg = math.lgamma(trials + 1)
    return [
        math.exp(lg - math.lgamma(k + 1) - math.lgamma(trials - k + 1) + k * lq + (trials - k) * l1q)
        for k in range(trials + 1)
    ]


def wr_weights(n: int, m: int) -> list[tuple[int, float]]:
    """Weights ``C(m,k) (1/n)^k (1-1/n)^(m-k)`` for ``k = 1..m``; they sum to the WR eta."""
    n = _positive_int("n", n)
    m = _positive_int("m", m)
    pmf = _binomial_pmf(m, 1.0 / n)
    return [(k, pmf[k]) for k in range(1, m + 1)]


GroupProfiles = Union[Mapping[int, PrivacyProfile], Callable[[int], PrivacyProfile], PrivacyProfile]


def _group_lookup(group_profiles: GroupProfiles, group_mode) -> Callable[[int], PrivacyProfile]:
    if isinstance(group_profiles, PrivacyProfile):
        if group_mode is None:
            raise BadParams("a single base profile needs a group mode (whitebox, blackbox or constant)")
        return group_family(group_profiles, group_mode)
    if isinstance(group_profiles, Mapping):
        def lookup(k):
            try:
                return group_profiles[k]
            except KeyError:
                raise MissingGroupProfile(k) from None
        return lookup
    return group_profiles


def amplify_poisson(profile: PrivacyProfile, gamma: float, eps: float) -> AmplificationBound:
    Poisson(gamma)
    eps_out = amplified_epsilon(gamma, eps)
    return AmplificationBound(eps, eps_out, gamma * profile.evaluate(eps), float(gamma))


def amplify_wor(profile: PrivacyProfile, n: int, m: int, eps: float) -> AmplificationBound:
    s = WithoutReplacement(n, m)
    eta = s.m / s.n
    return AmplificationBound(eps, amplified_epsilon(eta, eps), eta * profile.evaluate(eps), eta)


def amplify_wr(group_profiles: GroupProfiles, n: int, m: int, eps: float,
               group_mode: GroupMode | str | None = None) -> AmplificationBound:
    """WR bound under substitution; ``group_profiles`` gives ``delta_{M,k}`` for k = 1..m.

    Accepts a mapping ``k -> profile``, a callable, or one base profile
    together with ``group_mode``.
    """
    s = WithReplacement(n, m)
    lookup = _group_lookup(group_profiles, group_mode)
    eta = _wr_eta(s.n, s.m)
    weights = wr_weights(s.n, s.m)
    terms = [w * lookup(k).evaluate(eps) for k, w in weights]
    return AmplificationBound(
        eps, amplified_epsilon(eta, eps), min(eta, math.fsum(terms)), eta, tuple(weights)
    )


def amplify_wr_hybrid(group_profiles: GroupProfiles, n: int, m: int, eps: float,
                      group_mode: GroupMode | str | None = None) -> AmplificationBound:
    """WR bound for remove/add neighbours of a size-``n`` dataset, base profiles under substitution."""
    return amplify_wr(group_profiles, n, m, eps, group_mode)


def amplify_poisson_substitution(profile: PrivacyProfile, n: int, gamma: float, eps: float) -> AmplificationBound:
    """Poisson subsampling of size-``n`` datasets under substitution.

    No distance-compatible coupling exists here, so the bound splits the
    differing component by subsample size and evaluates the base profile at
    shifted levels ``eps_k = eps + log(gamma/(1-gamma) (n/k - 1))``, which can
    be negative.  Profiles without an analytic negative-eps continuation get
    the conservative one; the bound then carries the note
    ``"conservative_extension"``.
    """
    n = _positive_int("n", n, minimum=2)
    if not 0.0 < gamma < 1.0:
        raise BadParams(f"Poisson rate must lie in (0, 1) for this bound, got {gamma!r}")
    eps_out = amplified_epsilon(gamma, eps)
    beta = math.exp(eps_out - eps)
    sizes = _binomial_pmf(n - 1, gamma)  # sizes[k-1] = C(n-1, k-1) g^(k-1) (1-g)^(n-k)
    shift = math.log(gamma / (1.0 - gamma))
    notes = []
    terms = []
    for k in range(1, n):
        eps_k = eps + shift + math.log(n / k - 1.0)
        if eps_k < 0.0 and not profile.supports_negative_eps and "conservative_extension" not in notes:
            notes.append("conservative_extension")
        terms.append(sizes[k - 1] * min(1.0, max(0.0, profile.evaluate(eps_k))))
    terms.append(sizes[n - 1])
    delta = gamma * beta * profile.evaluate(eps) + gamma * (1.0 - beta) * math.fsum(terms)
    return AmplificationBound(eps, eps_out, min(gamma, delta), float(gamma), notes=tuple(notes))


def amplify(scheme: SubsamplingScheme, relation: Relation | str, profile: GroupProfiles, eps: float, *,
            group_mode: GroupMode | str | None = None, n: int | None = None) -> AmplificationBound:
    """Dispatch to the bound for a scheme/relation pairing.

    ``n`` is the dataset size for Poisson under substitution, and optionally
    overrides ``scheme.n`` for WR under remove/add.
    """
    relation = Relation(relation)
    if isinstance(scheme, Poisson):
        if relation is Relation.REMOVE_ADD:
            return amplify_poisson(_base(profile), scheme.gamma, eps)
        if n is None:
            raise UnsupportedPairing("Poisson sampling under substitution needs the dataset size n")
        return amplify_poisson_substitution(_base(profile), n, scheme.gamma, eps)
    if isinstance(scheme, WithoutReplacement):
        if relation is not Relation.SUBSTITUTE:
            raise UnsupportedPairing(f"pairing (wor, {relation.value}) is unsupported: "
                                     "without-replacement sampling is only analysed under substitution")
        return amplify_wor(_base(profile), scheme.n, scheme.m, eps)
    if isinstance(scheme, WithReplacement):
        if relation is Relation.SUBSTITUTE:
            return amplify_wr(profile, scheme.n, scheme.m, eps, group_mode)
        return amplify_wr_hybrid(profile, scheme.n if n is None else n, scheme.m, eps, group_mode)
    raise BadParams(f"unknown subsampling scheme {scheme!r}")


def _base(profile: GroupProfiles) -> PrivacyProfile:
    if isinstance(profile, PrivacyProfile):
        return profile
    if isinstance(profile, Mapping):
        if 1 not in profile:
            raise MissingGroupProfile(1)
        return profile[1]
    return profile(1)


def amplified_profile_curve(scheme: SubsamplingScheme, relation: Relation | str, profile: GroupProfiles,
                            eps_grid: Sequence[float], *, group_mode: GroupMode | str | None = None,
                            n: int | None = None) -> TabulatedProfile:
    """Tabulate ``(eps', delta')`` over an increasing grid of input ``eps``.

    A bound at ``eps'`` also holds at every larger ``eps'``, so the running
    minimum of ``delta'`` is stored; this only changes curves that are not
    already monotone (the Poisson substitution bound).
    """
    grid = [float(e) for e in eps_grid]
    if not grid:
        raise BadParams("epsilon grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise BadParams("epsilon grid must be strictly increasing")
    points = []
    best = 1.0
    for e in grid:
        b = amplify(scheme, relation, profile, e, group_mode=group_mode, n=n)
        best = min(best, b.delta_out)
        points.append((b.eps_out, best))
    return TabulatedProfile(tuple(points))
