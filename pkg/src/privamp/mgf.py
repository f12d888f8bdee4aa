"""Privacy-loss distributions and moment generating functions from privacy profiles.

For a pair of output distributions ``(mu, mu')`` the privacy loss is
``L = log(mu(z) / mu'(z))`` with ``z ~ mu``.  Its tail recovers the profile
exactly (together with the reverse loss ``L'``), and its MGF
``phi(s) = E[exp(s L)]`` can be recovered from the two directional profiles
by a one-dimensional integral over ``eps >= 0``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from privamp.divergence import DiscreteMeasure, require_normalized
from privamp.errors import BadLambda, BadParams, DivergentIntegrand, NotNormalized

Profile = Callable[[float], float]


@dataclass(frozen=True)
class PrivacyLossDistribution:
    """Atoms ``(loss, probability)`` sorted by loss; equal losses are merged.

    ``inf_mass`` is the probability of outcomes outside the support of the
    second distribution (loss ``+inf``); it is not listed among the atoms.
    """

    atoms: tuple[tuple[float, float], ...]
    inf_mass: float = 0.0

    def __post_init__(self):
        merged: dict[float, list[float]] = {}
        for loss, prob in self.atoms:
            loss, prob = float(loss), float(prob)
            if not math.isfinite(loss):
                raise BadParams(f"finite atoms need finite loss values, got {loss!r}")
            if prob < 0.0:
                raise BadParams(f"negative atom probability {prob!r}")
            merged.setdefault(loss, []).append(prob)
        atoms = tuple(sorted((l, math.fsum(ps)) for l, ps in merged.items()))
        total = math.fsum([p for _, p in atoms] + [self.inf_mass])
        if abs(total - 1.0) > 1e-12:
            raise NotNormalized(f"loss distribution has total mass {total!r}")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "inf_mass", float(self.inf_mass))

    def prob_greater(self, t: float) -> float:
        """``Pr[L > t]``, counting the ``+inf`` atom."""
        return math.fsum([p for l, p in self.atoms if l > t] + [self.inf_mass])

    def prob_less(self, t: float) -> float:
        return math.fsum(p for l, p in self.atoms if l < t)


def loss_distribution(mu: DiscreteMeasure, mu_prime: DiscreteMeasure) -> PrivacyLossDistribution:
    """Distribution of ``log(mu/mu')`` under ``mu``; both inputs must be probability measures."""
    require_normalized(mu, "mu")
    require_normalized(mu_prime, "mu_prime")
    atoms, inf = [], []
    for z, w in mu.items():
        wp = mu_prime[z]
        if wp > 0.0:
            atoms.append((math.log(w / wp), w))
        else:
            inf.append(w)
    # Renormalise tiny pruning residue so the stored atoms sum to one exactly.
    total = mu.total
    return PrivacyLossDistribution(tuple((l, p / total) for l, p in atoms), math.fsum(inf) / total)


def profile_from_loss(pld_fwd: PrivacyLossDistribution, pld_rev: PrivacyLossDistribution, eps: float) -> float:
    """``Pr[L > eps] - e^eps Pr[L' < -eps]`` for the losses of a pair and of its reverse."""
    return pld_fwd.prob_greater(eps) - math.exp(eps) * pld_rev.prob_less(-eps)


def tail_bound_profile(pld: PrivacyLossDistribution, eps: float) -> float:
    """``Pr[L > eps]``, an upper bound on the profile at ``eps``."""
    return pld.prob_greater(eps)


def mgf_direct(pld: PrivacyLossDistribution, s: float) -> float:
    """``E[exp(s L)]`` summed over atoms; infinite whenever ``s > 0`` meets a ``+inf`` atom."""
    s = _check_s(s)
    if s == 0.0:
        return 1.0
    if pld.inf_mass > 0.0:
        raise DivergentIntegrand("loss distribution has a +inf atom, so its MGF is infinite for s > 0")
    return math.fsum(p * math.exp(s * l) for l, p in pld.atoms)


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule on growing windows.

    The first window is ``[0, eps_max]``; each later window doubles the
    covered range.  Every window is cut into ``panels`` equal panels, with
    the profiles' breakpoints added as extra panel edges.  Integration stops
    once a window adds at most ``rel_tol`` of the running total.
    """

    eps_max: float = 8.0
    panels: int = 64
    order: int = 20
    rel_tol: float = 1e-12
    max_windows: int = 40

    def __post_init__(self):
        if not self.eps_max > 0.0 or self.panels < 1 or self.order < 1 or self.max_windows < 1:
            raise BadParams(f"invalid quadrature spec {self!r}")


@lru_cache(maxsize=None)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _check_s(s: float) -> float:
    s = float(s)
    if not s >= 0.0 or math.isinf(s):
        raise BadParams(f"s must be a finite number >= 0, got {s!r}")
    return s


def _weighted(profile: Profile, rate: float, eps: float) -> float:
    """``exp(rate * eps) * delta(eps)`` evaluated in log space."""
    d = profile(eps)
    if d <= 0.0:
        return 0.0
    exponent = rate * eps + math.log(d)
    if exponent > 700.0:
        raise DivergentIntegrand(f"integrand overflows at eps={eps!r}; the profile tail is too heavy for this s")
    return math.exp(exponent)


def _window_integral(f: Callable[[float], float], a: float, b: float, n_panels: int, order: int,
                     cuts: Iterable[float]) -> float:
    edges = set(np.linspace(a, b, n_panels + 1).tolist())
    edges.update(c for c in cuts if a < c < b)
    edges = sorted(edges)
    x, w = _legendre(order)
    parts = []
    for lo, hi in zip(edges, edges[1:]):
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        parts.extend(half * wi * f(mid + half * xi) for xi, wi in zip(x.tolist(), w.tolist()))
    return math.fsum(parts)


def mgf_from_profiles(profile_fwd: Profile, profile_rev: Profile | None = None, s: float = 1.0,
                      quad: QuadratureSpec | None = None) -> float:
    """MGF of the privacy loss recovered from the two directional profiles.

    Computes ``1 + s(s+1) * int_0^inf (e^{s eps} delta_fwd(eps) + e^{-(s+1) eps} delta_rev(eps)) d eps``.
    Omitting ``profile_rev`` asserts the pair is symmetric, so ``profile_fwd``
    serves for both directions.

    Args:
      profile_fwd: ``eps -> D_{e^eps}(mu || mu')``.
      profile_rev: ``eps -> D_{e^eps}(mu' || mu)``, or None for a symmetric pair.
      s: order of the MGF, ``s >= 0``.
      quad: quadrature settings; defaults to :class:`QuadratureSpec()`.

    Returns:
      The value ``phi(s)``; exactly 1.0 at ``s = 0``.

    Raises:
      DivergentIntegrand: the integrand does not decay within the window budget.
    """
    s = _check_s(s)
    if s == 0.0:
        return 1.0
    quad = quad or QuadratureSpec()
    rev = profile_fwd if profile_rev is None else profile_rev
    cuts = set()
    for prof in (profile_fwd, rev):
        cuts.update(b for b in getattr(prof, "breakpoints", lambda: ())() if b > 0.0)

    def integrand(e):
        return _weighted(profile_fwd, s, e) + _weighted(rev, -(s + 1.0), e)

    total = _window_integral(integrand, 0.0, quad.eps_max, quad.panels, quad.order, cuts)
    a, b = quad.eps_max, 2.0 * quad.eps_max
    for _ in range(quad.max_windows):
        part = _window_integral(integrand, a, b, quad.panels, quad.order, cuts)
        total += part
        if not math.isfinite(total):
            raise DivergentIntegrand("quadrature produced a non-finite value")
        if part <= quad.rel_tol * total:
            return 1.0 + s * (s + 1.0) * total
        a, b = b, 2.0 * b
    raise DivergentIntegrand(f"integrand still contributes beyond eps={a!r}; the profile tail is too heavy for s={s!r}")


def renyi_epsilon(mgf_value: float, lam: float) -> float:
    """Renyi divergence of order ``lam`` from ``phi(lam - 1)``: ``log(phi) / (lam - 1)``."""
    lam = float(lam)
    if not lam > 1.0 or math.isinf(lam):
        raise BadLambda(f"Renyi order must be a finite number > 1, got {lam!r}")
    if not mgf_value > 0.0:
        raise BadParams(f"MGF value must be positive, got {mgf_value!r}")
    return math.log(mgf_value) / (lam - 1.0)
