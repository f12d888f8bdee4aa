"""Hockey-stick divergences, total variation and maximal couplings on finite measures.

Measures are finitely supported and keyed by hashable outcome identifiers
(the library itself uses canonical strings).  Everything here is exact up to
double-precision rounding: sums go through :func:`math.fsum`, so results do
not depend on support order.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Hashable, Iterable, Mapping
from dataclasses import dataclass

from privamp.errors import (
    EtaOutOfRange,
    MissingKernelEntry,
    NegativeMass,
    NonPositiveAlpha,
    NotNormalized,
)

PRUNE_TOL = 1e-15
NORM_TOL = 1e-12


class DiscreteMeasure:
    """Non-negative measure with finite support.

    Masses below ``PRUNE_TOL`` are dropped at construction; the dropped total
    is remembered and widens the normalization tolerance accordingly.
    Duplicate outcomes in the input are summed.

    Args:
      mass: mapping outcome -> mass, or an iterable of ``(outcome, mass)``.
    """

    __slots__ = ("_mass", "_pruned", "_total")

    def __init__(self, mass: Mapping[Hashable, float] | Iterable[tuple[Hashable, float]] = ()):
        items = mass.items() if isinstance(mass, Mapping) else mass
        terms: dict[Hashable, list[float]] = {}
        for z, w in items:
            w = float(w)
            if not w >= 0.0:
                raise NegativeMass(f"mass {w!r} at outcome {z!r}")
            terms.setdefault(z, []).append(w)
        kept = {}
        pruned = []
        for z, ws in terms.items():
            w = math.fsum(ws) if len(ws) > 1 else ws[0]
            if w >= PRUNE_TOL:
                kept[z] = w
            elif w > 0.0:
                pruned.append(w)
        self._mass = kept
        self._pruned = math.fsum(pruned)
        self._total = math.fsum(kept.values())

    @classmethod
    def point(cls, z: Hashable) -> DiscreteMeasure:
        return cls({z: 1.0})

    @classmethod
    def uniform(cls, outcomes: Iterable[Hashable]) -> DiscreteMeasure:
        outcomes = list(outcomes)
        return cls({z: 1.0 / len(outcomes) for z in outcomes})

    @property
    def support(self) -> tuple:
        return tuple(self._mass)

    @property
    def total(self) -> float:
        return self._total

    @property
    def pruned_mass(self) -> float:
        return self._pruned

    @property
    def normalized(self) -> bool:
        return abs(self._total - 1.0) <= NORM_TOL + self._pruned

    def __getitem__(self, z: Hashable) -> float:
        return self._mass.get(z, 0.0)

    def __contains__(self, z: Hashable) -> bool:
        return z in self._mass

    def __len__(self) -> int:
        return len(self._mass)

    def __iter__(self):
        return iter(self._mass)

    def items(self):
        return self._mass.items()

    def as_dict(self) -> dict:
        return dict(self._mass)

    def scale(self, c: float) -> DiscreteMeasure:
        return DiscreteMeasure((z, c * w) for z, w in self._mass.items())

    def __add__(self, other: DiscreteMeasure) -> DiscreteMeasure:
        return mixture([(1.0, self), (1.0, other)])

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return self._mass == other._mass

    def __hash__(self):
        return hash(frozenset(self._mass.items()))

    def __repr__(self):
        body = ", ".join(f"{z!r}: {w:.6g}" for z, w in self._mass.items())
        return f"DiscreteMeasure({{{body}}})"


def bernoulli(q: float) -> DiscreteMeasure:
    """Distribution on the bits ``"1"`` (mass q) and ``"0"``."""
    return DiscreteMeasure({"1": q, "0": 1.0 - q})


def mixture(components: Iterable[tuple[float, DiscreteMeasure]]) -> DiscreteMeasure:
    """Weighted sum of measures, accumulated per outcome with fsum."""
    terms = []
    for w, m in components:
        if w == 0.0:
            continue
        terms.extend((z, w * v) for z, v in m.items())
    return DiscreteMeasure(terms)


def require_normalized(m: DiscreteMeasure, name: str = "measure") -> None:
    if not m.normalized:
        raise NotNormalized(f"{name} has total mass {m.total!r}")


def hockey_stick(mu: DiscreteMeasure, mu_prime: DiscreteMeasure, alpha: float) -> float:
    """Return ``sum_z [mu(z) - alpha * mu_prime(z)]_+``.

    Unnormalized measures are accepted.  Any ``alpha > 0`` is allowed; the
    result lies in [0, 1] for probability measures only when ``alpha >= 1``.
    """
    alpha = float(alpha)
    if not alpha > 0.0:
        raise NonPositiveAlpha(f"alpha must be positive, got {alpha!r}")
    if math.isinf(alpha):
        return math.fsum(w for z, w in mu.items() if z not in mu_prime)
    terms = []
    for z, w in mu.items():
        d = w - alpha * mu_prime[z]
        if d > 0.0:
            terms.append(d)
    return math.fsum(terms)


def total_variation(nu: DiscreteMeasure, nu_prime: DiscreteMeasure) -> float:
    require_normalized(nu, "nu")
    require_normalized(nu_prime, "nu_prime")
    return 1.0 - math.fsum(min(w, nu_prime[z]) for z, w in nu.items())


@dataclass(frozen=True)
class CouplingDecomposition:
    """Overlapping mixture decomposition induced by the maximal coupling.

    ``first = (1 - eta) * omega0 + eta * omega1`` and
    ``second = (1 - eta) * omega0 + eta * omega1_prime``.  When ``eta`` is 0
    the components omega1/omega1_prime are the zero measure; when it is 1
    omega0 is the zero measure.  ``degenerate`` marks both cases.
    """

    eta: float
    omega0: DiscreteMeasure
    omega1: DiscreteMeasure
    omega1_prime: DiscreteMeasure
    degenerate: bool

    def recompose(self) -> tuple[DiscreteMeasure, DiscreteMeasure]:
        a = 1.0 - self.eta
        return (
            mixture([(a, self.omega0), (self.eta, self.omega1)]),
            mixture([(a, self.omega0), (self.eta, self.omega1_prime)]),
        )


@dataclass(frozen=True)
class TransportPlan:
    joint: Mapping[tuple[Hashable, Hashable], float]

    def first_marginal(self) -> DiscreteMeasure:
        return DiscreteMeasure((y, w) for (y, _), w in self.joint.items())

    def second_marginal(self) -> DiscreteMeasure:
        return DiscreteMeasure((yp, w) for (_, yp), w in self.joint.items())

    def mismatch_probability(self) -> float:
        return math.fsum(w for (y, yp), w in self.joint.items() if y != yp)


def maximal_coupling(nu: DiscreteMeasure, nu_prime: DiscreteMeasure) -> CouplingDecomposition:
    """Split two distributions into their common part and disjoint remainders."""
    require_normalized(nu, "nu")
    require_normalized(nu_prime, "nu_prime")
    common = DiscreteMeasure((z, min(w, nu_prime[z])) for z, w in nu.items())
    eta = 1.0 - common.total
    rest = DiscreteMeasure((z, w - common[z]) for z, w in nu.items())
    rest_prime = DiscreteMeasure((z, w - common[z]) for z, w in nu_prime.items())
    zero = DiscreteMeasure()
    if len(rest) == 0 and len(rest_prime) == 0:
        return CouplingDecomposition(0.0, nu, zero, zero, True)
    if len(common) == 0:
        return CouplingDecomposition(1.0, zero, nu, nu_prime, True)
    return CouplingDecomposition(
        eta=eta,
        omega0=common.scale(1.0 / (1.0 - eta)),
        omega1=rest.scale(1.0 / eta),
        omega1_prime=rest_prime.scale(1.0 / eta),
        degenerate=False,
    )


def maximal_coupling_plan(nu: DiscreteMeasure, nu_prime: DiscreteMeasure) -> TransportPlan:
    """Joint distribution of the maximal coupling; ``P[y != y'] = TV``."""
    dec = maximal_coupling(nu, nu_prime)
    joint: dict = {}
    for y, w in dec.omega0.items():
        joint[(y, y)] = (1.0 - dec.eta) * w
    for y, w in dec.omega1.items():
        for yp, wp in dec.omega1_prime.items():
            joint[(y, yp)] = joint.get((y, yp), 0.0) + dec.eta * w * wp
    return TransportPlan(joint)


@dataclass(frozen=True)
class JointConvexityCheck:
    alpha_prime: float
    beta: float
    lhs: float
    rhs: float


def advanced_joint_convexity(
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    mu1_prime: DiscreteMeasure,
    eta: float,
    alpha: float,
) -> JointConvexityCheck:
    """Evaluate both sides of the advanced joint convexity identity.

    lhs is the divergence at ``alpha' = 1 + eta (alpha - 1)`` between the two
    overlapping mixtures; rhs is ``eta`` times the divergence at ``alpha``
    between ``mu1`` and ``(1 - beta) mu0 + beta mu1'`` with ``beta = alpha'/alpha``.
    """
    if not 0.0 <= eta <= 1.0:
        raise EtaOutOfRange(f"eta must lie in [0, 1], got {eta!r}")
    if not alpha >= 1.0:
        raise NonPositiveAlpha(f"alpha must be >= 1, got {alpha!r}")
    for name, m, weight in (("mu0", mu0, 1.0 - eta), ("mu1", mu1, eta), ("mu1_prime", mu1_prime, eta)):
        if weight > 0.0:
            require_normalized(m, name)
    alpha_prime = 1.0 + eta * (alpha - 1.0)
    beta = alpha_prime / alpha
    mu = mixture([(1.0 - eta, mu0), (eta, mu1)])
    mu_prime = mixture([(1.0 - eta, mu0), (eta, mu1_prime)])
    lhs = hockey_stick(mu, mu_prime, alpha_prime)
    rhs = eta * hockey_stick(mu1, mixture([(1.0 - beta, mu0), (beta, mu1_prime)]), alpha)
    return JointConvexityCheck(alpha_prime, beta, lhs, rhs)


Kernel = Mapping[Hashable, DiscreteMeasure] | Callable[[Hashable], DiscreteMeasure]


def apply_kernel(kernel: Kernel, y: Hashable) -> DiscreteMeasure:
    if isinstance(kernel, Mapping):
        try:
            return kernel[y]
        except KeyError:
            raise MissingKernelEntry(f"kernel has no entry for input {y!r}") from None
    return kernel(y)


def pushforward(omega: DiscreteMeasure, kernel: Kernel) -> DiscreteMeasure:
    """Mixture ``sum_y omega(y) kernel(y)``; every kernel output must be normalized."""
    components = []
    for y, w in omega.items():
        out = apply_kernel(kernel, y)
        require_normalized(out, f"kernel output at {y!r}")
        components.append((w, out))
    return mixture(components)
