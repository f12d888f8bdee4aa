"""Privacy profiles ``eps -> delta(eps)`` and group-privacy profiles.

Closed forms cover Laplace and Gaussian output perturbation (parametrised by
``theta = sensitivity / noise scale``) and binary randomized response.
Tabulated and empirical profiles wrap numeric data or a finite mechanism.

Profiles are evaluated at negative ``eps`` by the appendix-style Poisson
substitution bound.  Families with an analytic continuation use it; the rest
fall back to ``min(1, delta(0) + 1 - e^eps)``, which is a valid upper bound
because ``[mu - a mu']_+ <= [mu - mu']_+ + (1 - a) mu'`` for ``a <= 1``.
"""

from __future__ import annotations

import abc
import bisect
import csv
import enum
import math
from collections.abc import Callable, Hashable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from scipy.special import erfcx

from privamp.divergence import DiscreteMeasure, Kernel, apply_kernel, hockey_stick
from privamp.errors import (
    BadK,
    BadParams,
    EmptyPairList,
    NonPositiveTheta,
    POutOfRange,
    UnsupportedFamily,
)

_SQRT2 = math.sqrt(2.0)


def std_normal_cdf(t: float) -> float:
    """Standard normal CDF through erfc, accurate in both tails."""
    return 0.5 * math.erfc(-t / _SQRT2)


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


class PrivacyProfile(abc.ABC):
    """Callable curve ``eps -> delta``; subclasses implement ``_delta``."""

    supports_negative_eps: bool = False

    @abc.abstractmethod
    def _delta(self, eps: float) -> float:
        ...

    def evaluate(self, eps: float) -> float:
        eps = float(eps)
        if eps < 0.0 and not self.supports_negative_eps:
            return conservative_extension(self, eps)
        return _clamp01(self._delta(eps))

    def __call__(self, eps: float) -> float:
        return self.evaluate(eps)

    def breakpoints(self) -> tuple[float, ...]:
        """Points where the curve has a kink or a jump (used to place quadrature panels)."""
        return ()


def conservative_extension(profile: PrivacyProfile, eps: float) -> float:
    return _clamp01(profile.evaluate(0.0) - math.expm1(eps))


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not theta > 0.0 or math.isinf(theta):
        raise NonPositiveTheta(f"theta must be a positive finite number, got {theta!r}")
    return theta


@dataclass(frozen=True)
class LaplaceProfile(PrivacyProfile):
    """Laplace mechanism, ``delta(eps) = [1 - exp((eps - theta)/2)]_+``."""

    theta: float
    supports_negative_eps = True

    def __post_init__(self):
        object.__setattr__(self, "theta", _check_theta(self.theta))

    def _delta(self, eps):
        if eps >= self.theta:
            return 0.0
        if eps >= -self.theta:
            return -math.expm1((eps - self.theta) / 2.0)
        return -math.expm1(eps)

    def scaled(self, k: int) -> LaplaceProfile:
        return LaplaceProfile(k * self.theta)

    def breakpoints(self):
        return (-self.theta, self.theta)


@dataclass(frozen=True)
class GaussianProfile(PrivacyProfile):
    """Gaussian mechanism, ``Phi(theta/2 - eps/theta) - e^eps Phi(-theta/2 - eps/theta)``."""

    theta: float
    supports_negative_eps = True

    def __post_init__(self):
        object.__setattr__(self, "theta", _check_theta(self.theta))

    def _delta(self, eps):
        th = self.theta
        lo = eps / th - th / 2.0
        hi = eps / th + th / 2.0
        if lo > 0.0:
            # Both terms share the factor exp(-lo^2/2); erfcx keeps the tail relative-accurate.
            return 0.5 * math.exp(-0.5 * lo * lo) * (float(erfcx(lo / _SQRT2)) - float(erfcx(hi / _SQRT2)))
        return std_normal_cdf(-lo) - math.exp(eps) * std_normal_cdf(-hi)

    def scaled(self, k: int) -> GaussianProfile:
        return GaussianProfile(k * self.theta)


@dataclass(frozen=True)
class RandomizedResponseProfile(PrivacyProfile):
    """Divergence between the two outputs of randomized response with bias ``p``.

    For ``eps >= 0`` this is ``psi_p(eps) = [p - e^eps (1 - p)]_+``; the second
    hinge term only matters at negative ``eps``.
    """

    p: float
    supports_negative_eps = True

    def __post_init__(self):
        p = float(self.p)
        if not 0.5 <= p <= 1.0:
            raise POutOfRange(f"p must lie in [1/2, 1], got {p!r}")
        object.__setattr__(self, "p", p)

    def _delta(self, eps):
        a = math.exp(eps)
        p, q = self.p, 1.0 - self.p
        return max(p - a * q, 0.0) + max(q - a * p, 0.0)

    def breakpoints(self):
        if self.p >= 1.0:
            return ()
        t = math.log(self.p / (1.0 - self.p))
        return (-t, t) if t > 0 else (0.0,)


def laplace_profile(theta: float) -> LaplaceProfile:
    return LaplaceProfile(theta)


def gaussian_profile(theta: float) -> GaussianProfile:
    return GaussianProfile(theta)


def rr_profile(p: float) -> RandomizedResponseProfile:
    return RandomizedResponseProfile(p)


@dataclass(frozen=True)
class TabulatedProfile(PrivacyProfile):
    """Step-interpolated table of ``(eps, delta)`` knots.

    Between knots the value at the next lower knot is used, which keeps the
    table an upper bound for any non-increasing curve it was sampled from.
    Below the first knot the trivial bound 1 is returned.
    """

    points: tuple[tuple[float, float], ...]
    _eps: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = tuple((float(e), float(d)) for e, d in self.points)
        if not pts:
            raise BadParams("tabulated profile needs at least one point")
        for (e0, d0), (e1, d1) in zip(pts, pts[1:]):
            if not e1 > e0:
                raise BadParams(f"epsilon knots must be strictly increasing ({e0!r}, {e1!r})")
            if d1 > d0:
                raise BadParams(f"delta must be non-increasing (at eps={e1!r})")
        for _, d in pts:
            if not 0.0 <= d <= 1.0:
                raise BadParams(f"delta value {d!r} outside [0, 1]")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_eps", tuple(e for e, _ in pts))

    def _delta(self, eps):
        i = bisect.bisect_right(self._eps, eps) - 1
        return 1.0 if i < 0 else self.points[i][1]

    def breakpoints(self):
        return self._eps

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epsilon", "delta"])
            for e, d in self.points:
                w.writerow([f"{e:.17g}", f"{d:.17g}"])

    @classmethod
    def from_csv(cls, path: str | Path) -> TabulatedProfile:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["epsilon", "delta"]:
                raise BadParams(f"expected header 'epsilon,delta', got {reader.fieldnames}")
            return cls(tuple((float(r["epsilon"]), float(r["delta"])) for r in reader))


class EmpiricalProfile(PrivacyProfile):
    """Worst-case divergence of a finite mechanism over a list of input pairs.

    Kernel outputs are computed once.  With ``symmetric=True`` each pair is
    also used in reverse order, matching a symmetric neighbouring relation.
    Evaluation is exact at every ``eps`` (negative included).
    """

    supports_negative_eps = True

    def __init__(self, kernel: Kernel, pairs: Iterable[tuple[Hashable, Hashable]], symmetric: bool = True):
        pairs = list(pairs)
        if not pairs:
            raise EmptyPairList("empirical profile needs at least one input pair")
        if symmetric:
            pairs = pairs + [(b, a) for a, b in pairs]
        cache: dict[Hashable, DiscreteMeasure] = {}
        for a, b in pairs:
            for y in (a, b):
                if y not in cache:
                    cache[y] = apply_kernel(kernel, y)
        self._outputs = cache
        self._pairs = list(dict.fromkeys(pairs))

    @property
    def pairs(self):
        return tuple(self._pairs)

    def _delta(self, eps):
        alpha = math.exp(eps)
        out = self._outputs
        return max(hockey_stick(out[a], out[b], alpha) for a, b in self._pairs)

    def breakpoints(self):
        pts = set()
        out = self._outputs
        for a, b in self._pairs:
            mu, mu_p = out[a], out[b]
            for z, w in mu.items():
                wp = mu_p[z]
                if wp > 0.0 and w != wp:
                    pts.add(abs(math.log(w / wp)))
        return tuple(sorted(pts))


def empirical_profile(kernel: Kernel, pairs: Sequence[tuple[Hashable, Hashable]], eps: float) -> float:
    return EmpiricalProfile(kernel, pairs).evaluate(eps)


class GroupMode(str, enum.Enum):
    BLACK_BOX = "blackbox"
    WHITE_BOX = "whitebox"
    CONSTANT = "constant"


def group_blackbox(base: PrivacyProfile, k: int, eps: float) -> float:
    """Generic group-privacy bound ``(e^eps - 1) delta(eps/k) / (e^{eps/k} - 1)``, clamped to 1."""
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise BadK(f"group size must be an integer >= 1, got {k!r}")
    k = int(k)
    if k == 1:
        return base.evaluate(eps)
    if eps < 0.0:
        raise BadParams("black-box group bound is only defined for eps >= 0")
    if eps == 0.0:
        return min(1.0, k * base.evaluate(0.0))
    factor = math.expm1(eps) / math.expm1(eps / k)
    return min(1.0, factor * base.evaluate(eps / k))


def group_whitebox(base: PrivacyProfile, k: int) -> PrivacyProfile:
    """Group profile of an output-perturbation mechanism: sensitivity, hence theta, scales by k."""
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise BadK(f"group size must be an integer >= 1, got {k!r}")
    if not isinstance(base, (LaplaceProfile, GaussianProfile)):
        raise UnsupportedFamily(f"white-box group profiles need a Laplace or Gaussian base, got {type(base).__name__}")
    return base if k == 1 else base.scaled(int(k))


@dataclass(frozen=True)
class GroupProfile(PrivacyProfile):
    """``delta_{M,k}`` derived from a base profile."""

    base: PrivacyProfile
    k: int
    mode: GroupMode = GroupMode.BLACK_BOX

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise BadK(f"group size must be an integer >= 1, got {self.k!r}")
        mode = GroupMode(self.mode)
        object.__setattr__(self, "mode", mode)
        if mode is GroupMode.WHITE_BOX:
            group_whitebox(self.base, self.k)

    @property
    def supports_negative_eps(self):
        return self.k == 1 or self.mode is not GroupMode.BLACK_BOX

    def _delta(self, eps):
        if self.mode is GroupMode.WHITE_BOX:
            return group_whitebox(self.base, self.k).evaluate(eps)
        if self.mode is GroupMode.CONSTANT:
            return self.base.evaluate(eps)
        return group_blackbox(self.base, self.k, eps)

    def breakpoints(self):
        if self.mode is GroupMode.WHITE_BOX:
            return group_whitebox(self.base, self.k).breakpoints()
        if self.mode is GroupMode.CONSTANT or self.k == 1:
            return self.base.breakpoints()
        return tuple(self.k * b for b in self.base.breakpoints() if b >= 0)


def group_family(base: PrivacyProfile, mode: GroupMode | str) -> Callable[[int], PrivacyProfile]:
    """Return ``k -> delta_{M,k}`` for a base profile under the given group mode."""
    mode = GroupMode(mode)
    if mode is GroupMode.WHITE_BOX:
        group_whitebox(base, 1)
    return lambda k: base if k == 1 else GroupProfile(base, k, mode)


def calibrate_theta(make: Callable[[float], PrivacyProfile], target: float, eps: float = 0.0,
                    lo: float = 1e-9, hi: float = 1e3, tol: float = 1e-13) -> float:
    """Bisection for the parameter whose profile takes value ``target`` at ``eps``.

    The profile value must be increasing in the parameter (true for theta of
    Laplace/Gaussian and for p of randomized response).
    """
    f_lo, f_hi = make(lo).evaluate(eps), make(hi).evaluate(eps)
    if not f_lo <= target <= f_hi:
        raise BadParams(f"target delta {target!r} not bracketed by [{f_lo!r}, {f_hi!r}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if make(mid).evaluate(eps) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)

