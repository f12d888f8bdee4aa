"""Brute-force verification of the amplification bounds on finite instances."""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from privamp.amplification import (
    AmplificationBound,
    Poisson,
    Relation,
    SubsamplingScheme,
    WithoutReplacement,
    WithReplacement,
    amplify,
)
from privamp.divergence import DiscreteMeasure, hockey_stick, pushforward, require_normalized
from privamp.errors import BadParams, MissingKernelEntry, POutOfRange
from privamp.oracle.datasets import Dataset, decode, enumerate_subsamples, key_distance
from privamp.profiles import EmpiricalProfile, GroupMode, PrivacyProfile, rr_profile


class MechanismKernel:
    """Mechanism on canonical subsample keys with finite output alphabet.

    Wraps either a mapping ``key -> DiscreteMeasure`` or a function of the
    key; outputs are memoised and must be probability measures.
    """

    def __init__(self, source: Mapping[str, DiscreteMeasure] | Callable[[str], DiscreteMeasure]):
        self._source = source
        self._cache: dict[str, DiscreteMeasure] = {}

    def __call__(self, key: str) -> DiscreteMeasure:
        out = self._cache.get(key)
        if out is None:
            if isinstance(self._source, Mapping):
                if key not in self._source:
                    raise MissingKernelEntry(f"kernel has no entry for input {key!r}")
                out = self._source[key]
            else:
                out = self._source(key)
            require_normalized(out, f"kernel output at {key!r}")
            self._cache[key] = out
        return out

    @property
    def domain(self) -> tuple[str, ...] | None:
        return tuple(self._source) if isinstance(self._source, Mapping) else None


def membership_kernel(v: str, p: float) -> MechanismKernel:
    """Randomized response applied to the bit ``v in y``."""
    p = float(p)
    if not 0.5 <= p <= 1.0:
        raise POutOfRange(f"p must lie in [1/2, 1], got {p!r}")
    on = DiscreteMeasure({"1": p, "0": 1.0 - p})
    off = DiscreteMeasure({"0": p, "1": 1.0 - p})

    def respond(key: str) -> DiscreteMeasure:
        return on if any(u == v for u, _ in decode(key)) else off

    return MechanismKernel(respond)


def constant_kernel(output: DiscreteMeasure) -> MechanismKernel:
    return MechanismKernel(lambda key: output)


def subsampled_output(scheme: SubsamplingScheme, kernel, x: Dataset) -> DiscreteMeasure:
    return pushforward(enumerate_subsamples(scheme, x), kernel)


def exact_subsampled_divergence(scheme: SubsamplingScheme, kernel, x: Dataset, x_prime: Dataset,
                                alpha: float) -> float:
    """Divergence between the subsampled mechanism's outputs on ``x`` and ``x_prime``, by full enumeration."""
    return hockey_stick(subsampled_output(scheme, kernel, x), subsampled_output(scheme, kernel, x_prime), alpha)


def neighbour_relation(x: Dataset, x_prime: Dataset) -> Relation:
    """Relation under which ``x`` and ``x_prime`` are neighbours."""
    d_ra = key_distance(x.key, x_prime.key, Relation.REMOVE_ADD)
    if d_ra == 1:
        return Relation.REMOVE_ADD
    if d_ra == 2 and x.size == x_prime.size:
        return Relation.SUBSTITUTE
    raise BadParams(f"{x.key!r} and {x_prime.key!r} are not neighbours")


def base_relation(scheme: SubsamplingScheme, relation: Relation) -> Relation:
    """Relation on subsamples under which the base mechanism's profile is stated."""
    if isinstance(scheme, Poisson) and relation is Relation.REMOVE_ADD:
        return Relation.REMOVE_ADD
    return Relation.SUBSTITUTE


def theorem_bound(scheme: SubsamplingScheme, relation: Relation | str, profiles, eps: float,
                  x: Dataset, x_prime: Dataset, group_mode=None) -> AmplificationBound:
    """Amplification bound for the pairing, with dataset sizes read off the instance."""
    relation = Relation(relation)
    n = max(x.size, x_prime.size)
    return amplify(scheme, relation, profiles, eps, group_mode=group_mode, n=n)


@dataclass(frozen=True)
class TightnessRecord:
    exact: float
    bound: float
    gap: float
    eps_out: float


def verify_tightness(scheme: SubsamplingScheme, relation: Relation | str, p: float, eps: float,
                     instance: tuple[Dataset, Dataset]) -> TightnessRecord:
    """Compare the bound for the membership mechanism with its exact subsampled divergence.

    The instance must have an element ``v`` in ``x`` but not in ``x'``; the
    mechanism reports (with randomized response) whether ``v`` survived.
    Its group profiles do not depend on k, so ``delta_k = psi_p`` for all k.
    """
    relation = Relation(relation)
    x, x_prime = instance
    only = [u for u, _ in x.counts if u not in x_prime]
    if not only:
        raise BadParams("instance needs an element of x that is absent from x'")
    kernel = membership_kernel(only[0], p)
    b = theorem_bound(scheme, relation, rr_profile(p), eps, x, x_prime, group_mode=GroupMode.CONSTANT)
    exact = exact_subsampled_divergence(scheme, kernel, x, x_prime, math.exp(b.eps_out))
    return TightnessRecord(exact, b.delta_out, b.delta_out - exact, b.eps_out)


class KernelGroupProfiles:
    """Group-privacy profiles of a finite kernel restricted to a domain of keys.

    ``profile(k)`` is the worst divergence over domain pairs at path distance
    between 1 and k under ``relation``.  Only pairs inside the domain are
    examined, which is enough for the couplings used by the bounds whenever
    the domain contains every subsample of both datasets.
    """

    def __init__(self, kernel, domain: Iterable[str], relation: Relation | str):
        self.kernel = kernel
        self.relation = Relation(relation)
        self.domain = tuple(dict.fromkeys(domain))
        self._by_distance: dict[int, list[tuple[str, str]]] = {}
        dom = self.domain
        for i, a in enumerate(dom):
            for b in dom[i + 1:]:
                d = key_distance(a, b, self.relation)
                if 0 < d < math.inf:
                    self._by_distance.setdefault(int(d), []).append((a, b))
        self._profiles: dict[int, PrivacyProfile] = {}

    @property
    def max_distance(self) -> int:
        return max(self._by_distance, default=0)

    def profile(self, k: int) -> PrivacyProfile:
        if k not in self._profiles:
            pairs = [pr for d, prs in self._by_distance.items() if d <= k for pr in prs]
            if not pairs:
                self._profiles[k] = _ZeroProfile()
            else:
                self._profiles[k] = EmpiricalProfile(self.kernel, pairs, symmetric=True)
        return self._profiles[k]

    __call__ = profile


class _ZeroProfile(PrivacyProfile):
    supports_negative_eps = False

    def _delta(self, eps):
        return 0.0


def instance_domain(scheme: SubsamplingScheme, x: Dataset, x_prime: Dataset) -> list[str]:
    keys = list(enumerate_subsamples(scheme, x).support)
    keys += [k for k in enumerate_subsamples(scheme, x_prime).support if k not in set(keys)]
    return keys


@dataclass(frozen=True)
class DominanceRecord:
    eps: float
    eps_out: float
    exact: float
    bound: float
    gap: float


def check_dominance(scheme: SubsamplingScheme, relation: Relation | str, kernel, x: Dataset, x_prime: Dataset,
                    eps_values: Sequence[float]) -> list[DominanceRecord]:
    """Bound from the kernel's own group profiles versus the exact divergence, for each eps."""
    relation = Relation(relation)
    groups = KernelGroupProfiles(kernel, instance_domain(scheme, x, x_prime), base_relation(scheme, relation))
    mu = subsampled_output(scheme, kernel, x)
    mu_p = subsampled_output(scheme, kernel, x_prime)
    out = []
    for eps in eps_values:
        b = theorem_bound(scheme, relation, groups.profile, eps, x, x_prime)
        exact = hockey_stick(mu, mu_p, math.exp(b.eps_out))
        out.append(DominanceRecord(eps, b.eps_out, exact, b.delta_out, b.delta_out - exact))
    return out


# Scenario files ------------------------------------------------------------

_SCHEMES = {
    "poisson": lambda d: Poisson(float(d["gamma"])),
    "wor": lambda d: WithoutReplacement(int(d["n"]), int(d["m"])),
    "wr": lambda d: WithReplacement(int(d["n"]), int(d["m"])),
}


@dataclass(frozen=True)
class Scenario:
    name: str
    scheme: SubsamplingScheme
    relation: Relation
    x: Dataset
    x_prime: Dataset
    kernel: MechanismKernel
    membership_p: float | None
    epsilons: tuple[float, ...]


def parse_scenario(data: Mapping) -> Scenario:
    """Validate a scenario mapping; raises :class:`BadParams` naming the offending field."""
    def need(key):
        if key not in data:
            raise BadParams(f"scenario field '{key}' is missing")
        return data[key]

    name = str(data.get("name", "scenario"))
    universe = need("universe")
    x = Dataset.build(need("x"), universe)
    x_prime = Dataset.build(need("x_prime"), universe)
    spec = need("scheme")
    try:
        scheme = _SCHEMES[spec["type"]](spec)
    except KeyError as e:
        raise BadParams(f"scenario field 'scheme' is invalid: {e}") from None
    try:
        relation = Relation(need("relation"))
    except ValueError:
        raise BadParams(f"scenario field 'relation' must be one of {[r.value for r in Relation]}") from None
    if neighbour_relation(x, x_prime) is not relation:
        raise BadParams("scenario fields 'x' and 'x_prime' are not neighbours under 'relation'")
    raw_eps = need("epsilons")
    if not isinstance(raw_eps, list) or not all(isinstance(e, (int, float)) for e in raw_eps):
        raise BadParams("scenario field 'epsilons' must be a list of numbers")
    eps = tuple(float(e) for e in raw_eps)
    if not eps or any(not e >= 0 for e in eps):
        raise BadParams("scenario field 'epsilons' must be a non-empty list of non-negative numbers")
    mech = need("mechanism")
    p = None
    if mech.get("type") == "membership":
        p = float(mech["p"])
        kernel = membership_kernel(str(mech["v"]), p)
    elif mech.get("type") == "kernel":
        table = {}
        for key, out in mech["outputs"].items():
            m = DiscreteMeasure(out)
            if not m.normalized:
                raise BadParams(f"scenario field 'mechanism.outputs[{key!r}]' has total mass {m.total!r}")
            table[key] = m
        kernel = MechanismKernel(table)
    else:
        raise BadParams("scenario field 'mechanism.type' must be 'membership' or 'kernel'")
    return Scenario(name, scheme, relation, x, x_prime, kernel, p, eps)


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise BadParams(f"cannot read scenario {path}: {e}") from None
    return parse_scenario(data)


def run_scenario(sc: Scenario) -> list[tuple[str, float, float, float, float]]:
    """Rows ``(scenario, epsilon, exact, bound, gap)``."""
    if sc.membership_p is not None:
        recs = [verify_tightness(sc.scheme, sc.relation, sc.membership_p, e, (sc.x, sc.x_prime)) for e in sc.epsilons]
        return [(sc.name, e, r.exact, r.bound, r.gap) for e, r in zip(sc.epsilons, recs)]
    recs = check_dominance(sc.scheme, sc.relation, sc.kernel, sc.x, sc.x_prime, sc.epsilons)
    return [(sc.name, r.eps, r.exact, r.bound, r.gap) for r in recs]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "epsilon", "exact", "bound", "gap"])
    for name, *vals in rows:
        w.writerow([name] + [f"{v:.15g}" for v in vals])
    return buf.getvalue()
