"""Optimal transport and distance-compatible couplings between finite distributions."""

from __future__ import annotations

import math
from collections import deque
from collections.abc import Callable, Hashable, Mapping
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from privamp.amplification import Relation
from privamp.divergence import DiscreteMeasure, TransportPlan
from privamp.errors import BadParams, InfeasibleMarginals
from privamp.oracle.datasets import key_distance

MAX_SUPPORT = 300
MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class CostedCoupling:
    plan: TransportPlan
    value: float
    dual_value: float


def _sorted_support(m: DiscreteMeasure) -> list:
    return sorted(m.support, key=lambda z: (str(type(z)), str(z)))


def _check_sizes(nu, nu_prime):
    for name, m in (("nu", nu), ("nu_prime", nu_prime)):
        if len(m) > MAX_SUPPORT:
            raise BadParams(f"{name} support {len(m)} exceeds {MAX_SUPPORT}")
    if abs(nu.total - nu_prime.total) > MARGINAL_TOL:
        raise InfeasibleMarginals(f"total masses differ: {nu.total!r} vs {nu_prime.total!r}")


def min_cost_coupling(nu: DiscreteMeasure, nu_prime: DiscreteMeasure,
                      cost: Callable[[Hashable, Hashable], float]) -> CostedCoupling:
    """Exact transport plan minimising ``sum pi(y, y') cost(y, y')``.

    Solved as a linear program with HiGHS; supports are sorted so the
    variable order, and hence any tie-breaking, is deterministic.  The LP
    duals are checked for complementary slackness before returning.
    """
    _check_sizes(nu, nu_prime)
    ys, yps = _sorted_support(nu), _sorted_support(nu_prime)
    a = np.array([nu[y] for y in ys])
    b = np.array([nu_prime[y] for y in yps])
    b = b * (a.sum() / b.sum())
    na, nb = len(ys), len(yps)
    c = np.array([[float(cost(y, yp)) for yp in yps] for y in ys])
    if not np.all(np.isfinite(c)) or np.any(c < 0):
        raise BadParams("transport costs must be finite and non-negative")
    idx = np.arange(na * nb)
    rows = np.concatenate([idx // nb, na + idx % nb])
    cols = np.concatenate([idx, idx])
    a_eq = coo_matrix((np.ones(2 * na * nb), (rows, cols)), shape=(na + nb, na * nb)).tocsr()
    res = linprog(
        c.ravel(), A_eq=a_eq, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise InfeasibleMarginals(f"transport LP failed: {res.message}")
    x = np.clip(res.x, 0.0, None).reshape(na, nb)
    duals = res.eqlin.marginals
    u, v = duals[:na], duals[na:]
    reduced = c - u[:, None] - v[None, :]
    scale = max(1.0, float(np.abs(c).max()))
    if reduced.min() < -1e-8 * scale or float(np.abs(x * reduced).sum()) > 1e-8 * scale:
        raise ArithmeticError("transport solution failed the complementary slackness check")
    nz = np.argwhere(x > 1e-15)
    joint = {(ys[i], yps[j]): float(x[i, j]) for i, j in nz}
    value = math.fsum(float(x[i, j] * c[i, j]) for i, j in nz)
    dual_value = math.fsum(list(u * a) + list(v * b))
    return CostedCoupling(TransportPlan(joint), value, dual_value)


def _max_flow(caps_src: list[float], caps_snk: list[float], edges: list[list[int]]) -> float:
    """Max flow on a bipartite graph with unbounded middle edges (Edmonds-Karp)."""
    na, nb = len(caps_src), len(caps_snk)
    res_src = list(caps_src)
    res_snk = list(caps_snk)
    flow: dict[tuple[int, int], float] = {}
    back: list[list[int]] = [[] for _ in range(nb)]
    for i, js in enumerate(edges):
        for j in js:
            back[j].append(i)
    total = 0.0
    tiny = 1e-18
    while True:
        # BFS over left nodes (L i) and right nodes (R j); forward L->R always open,
        # backward R->L open when flow(i, j) > 0.
        prev_l: dict[int, tuple[str, int] | None] = {}
        prev_r: dict[int, int] = {}
        queue = deque()
        for i in range(na):
            if res_src[i] > tiny:
                prev_l[i] = None
                queue.append(i)
        sink_j = None
        while queue and sink_j is None:
            i = queue.popleft()
            for j in edges[i]:
                if j in prev_r:
                    continue
                prev_r[j] = i
                if res_snk[j] > tiny:
                    sink_j = j
                    break
                for i2 in back[j]:
                    if i2 not in prev_l and flow.get((i2, j), 0.0) > tiny:
                        prev_l[i2] = ("r", j)
                        queue.append(i2)
        if sink_j is None:
            return total
        path = []
        j = sink_j
        bottleneck = res_snk[j]
        while True:
            i = prev_r[j]
            path.append((i, j, +1))
            p = prev_l[i]
            if p is None:
                bottleneck = min(bottleneck, res_src[i])
                break
            j_prev = p[1]
            bottleneck = min(bottleneck, flow[(i, j_prev)])
            path.append((i, j_prev, -1))
            j = j_prev
        for i, j, sgn in path:
            flow[(i, j)] = flow.get((i, j), 0.0) + sgn * bottleneck
        res_snk[sink_j] -= bottleneck
        res_src[path[-1][0]] -= bottleneck
        total += bottleneck


Distance = Callable[[Hashable, Hashable], float] | Relation | str


def as_distance(distance: Distance) -> Callable[[Hashable, Hashable], float]:
    """A neighbouring relation becomes the path distance between canonical keys."""
    if callable(distance):
        return distance
    relation = Relation(distance)
    return lambda a, b: key_distance(a, b, relation)


def support_distances(nu: DiscreteMeasure, nu_prime: DiscreteMeasure, distance: Distance) -> dict:
    """``d(y, supp(nu'))`` for each ``y`` in ``supp(nu)`` (``inf`` if unreachable)."""
    distance = as_distance(distance)
    return {y: min(distance(y, yp) for yp in nu_prime.support) for y in nu.support}


def is_distance_compatible(nu: DiscreteMeasure, nu_prime: DiscreteMeasure, distance: Distance) -> bool:
    """Whether some coupling only pairs ``y`` with its nearest points of ``supp(nu')``.

    Pairs at infinite distance are never admissible.  Decided by checking
    that max flow over the admissible edges saturates the total mass.
    """
    _check_sizes(nu, nu_prime)
    distance = as_distance(distance)
    ys, yps = _sorted_support(nu), _sorted_support(nu_prime)
    dmin = support_distances(nu, nu_prime, distance)
    edges = []
    for y in ys:
        if math.isinf(dmin[y]):
            return False
        edges.append([j for j, yp in enumerate(yps) if distance(y, yp) == dmin[y]])
    flow = _max_flow([nu[y] for y in ys], [nu_prime[y] for y in yps], edges)
    return flow >= nu.total - MARGINAL_TOL


def group_profile_sum(nu: DiscreteMeasure, nu_prime: DiscreteMeasure, distance: Distance,
                      group_delta: Callable[[int], float] | Mapping[int, float]) -> float:
    """``sum_k nu(Y_k) delta_k`` where ``Y_k`` holds the points at distance k from ``supp(nu')``.

    ``delta_0`` is taken as 0 and unreachable points contribute their full mass.
    """
    lookup = group_delta.__getitem__ if isinstance(group_delta, Mapping) else group_delta
    terms = []
    for y, d in support_distances(nu, nu_prime, distance).items():
        if d == 0:
            continue
        terms.append(nu[y] * (1.0 if math.isinf(d) else lookup(int(d))))
    return math.fsum(terms)
