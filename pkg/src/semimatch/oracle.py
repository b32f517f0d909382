"""Ground-truth computations and structural verifiers for small instances.

Flow feasibility checks go through networkx so that the oracle side never
shares code with the hand-written matching engine it is used to check.
Enumeration-based optima are exact and exhaustive.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass

import networkx as nx

from .instance import Instance
from .matching import AugPath, CapacityProfile, CapMatching
from .solvers import Assignment, InfeasibleError, LoadVector


class PreconditionError(Exception):
    """A verifier's precondition failed (distinct from a negative verdict)."""


class EnumerationTooLarge(Exception):
    """The assignment space exceeds the configured enumeration cutoff."""


# ---------------------------------------------------------------------------
# Flow feasibility (networkx side)
# ---------------------------------------------------------------------------


def _flow_value(inst: Instance, kappa: dict[int, int], tau: dict[int, int],
                edge_cap: int | None = None) -> int:
    g = nx.DiGraph()
    for c in inst.clients:
        g.add_edge("src", ("c", c), capacity=kappa[c])
    for s in inst.servers:
        g.add_edge(("s", s), "dst", capacity=tau[s])
    for c, s in inst.edges:
        if edge_cap is None:
            g.add_edge(("c", c), ("s", s))
        else:
            g.add_edge(("c", c), ("s", s), capacity=edge_cap)
    if "src" not in g or "dst" not in g:
        return 0
    return nx.maximum_flow_value(g, "src", "dst")


def client_perfect_matching_exists(inst: Instance, kappa: dict[int, int],
                                   tau: dict[int, int], edge_cap: int | None = None) -> bool:
    demand = sum(kappa[c] for c in inst.clients)
    return _flow_value(inst, kappa, tau, edge_cap) == demand


def opt_minmax_unweighted(inst: Instance) -> int:
    """Minimum B admitting a client-perfect (1, B)-matching, by binary search
    over flow feasibility."""
    if not inst.is_unit_weight():
        raise ValueError("opt_minmax_unweighted requires unit weights")
    _check_degrees(inst)
    kappa = {c: 1 for c in inst.clients}
    lo, hi = max(1, math.ceil(len(inst.clients) / max(1, len(inst.servers)))), len(inst.clients)
    while lo < hi:
        mid = (lo + hi) // 2
        if client_perfect_matching_exists(inst, kappa, {s: mid for s in inst.servers}):
            hi = mid
        else:
            lo = mid + 1
    return lo


def opt_split(inst: Instance) -> int:
    """Minimum B admitting a client-perfect (w, B)-matching (the split
    l_inf optimum)."""
    _check_degrees(inst)
    total = inst.total_weight
    lo = max(1, math.ceil(total / max(1, len(inst.servers))))
    hi = total
    kappa = dict(inst.weight)
    while lo < hi:
        mid = (lo + hi) // 2
        if client_perfect_matching_exists(inst, kappa, {s: mid for s in inst.servers}):
            hi = mid
        else:
            lo = mid + 1
    return lo


def _check_degrees(inst: Instance) -> None:
    bad = inst.zero_degree_clients()
    if bad:
        raise InfeasibleError(f"client {bad[0]} has no adjacent server", client=bad[0])


# ---------------------------------------------------------------------------
# Exhaustive enumeration
# ---------------------------------------------------------------------------


def _assignment_space_size(inst: Instance) -> int:
    size = 1
    for c in inst.clients:
        size *= max(1, inst.degree(c))
    return size


def opt_allnorm_enum(
    inst: Instance,
    p_list=(1, 2, 3, math.inf),
    max_assignments: int = 10**6,
) -> tuple[dict, Assignment | None]:
    """Exhaustive per-norm optima; for unit weights also the canonical
    all-norm optimal assignment.

    Canonical optimum: lexicographically smallest sorted-descending load
    vector, ties broken by the lexicographic assignment map.  For unit
    weights the per-p optima are asserted to coincide with the canonical
    assignment's norms.
    """
    _check_degrees(inst)
    space = _assignment_space_size(inst)
    if space > max_assignments:
        raise EnumerationTooLarge(f"{space} assignments exceed the cutoff {max_assignments}")
    clients = list(inst.clients)
    choices = [inst.client_adj[c] for c in clients]
    finite_ps = [p for p in p_list if p != math.inf and p != 1]
    best_pow = {p: None for p in finite_ps}
    best_inf = None
    best_l1 = None
    unit = inst.is_unit_weight()
    best_key = None
    best_map = None
    for combo in itertools.product(*choices):
        loads = {s: 0 for s in inst.servers}
        for c, s in zip(clients, combo):
            loads[s] += inst.weight[c]
        values = list(loads.values())
        for p in finite_ps:
            total = sum(v**p for v in values)
            if best_pow[p] is None or total < best_pow[p]:
                best_pow[p] = total
        mx = max(values)
        if best_inf is None or mx < best_inf:
            best_inf = mx
        l1 = sum(values)
        if best_l1 is None or l1 < best_l1:
            best_l1 = l1
        if unit:
            key = (tuple(sorted(values, reverse=True)), combo)
            if best_key is None or key < best_key:
                best_key = key
                best_map = dict(zip(clients, combo))
    optima = {}
    for p in p_list:
        if p == math.inf:
            optima[p] = float(best_inf)
        elif p == 1:
            optima[p] = float(best_l1)
        else:
            optima[p] = best_pow[p] ** (1.0 / p)
    witness = None
    if unit and best_map is not None:
        witness = Assignment(inst, best_map)
        lv = witness.load_vector()
        for p in p_list:
            if not math.isclose(lv.norm(p), optima[p], rel_tol=1e-12, abs_tol=1e-9):
                raise AssertionError(
                    f"canonical optimum misses the p={p} optimum: {lv.norm(p)} vs {optima[p]}"
                )
    return optima, witness


def opt_power_sums(
    inst: Instance, p_list=(2, 3), max_assignments: int = 10**6
) -> dict[int, int]:
    """Exact minimum sum of p-th powers of loads over all assignments, per p.

    Integer-valued, so approximation-ratio checks can avoid float tolerance:
    norm_A <= K * norm_opt  iff  power_sum_A <= K**p * opt_power_sum.
    """
    _check_degrees(inst)
    space = _assignment_space_size(inst)
    if space > max_assignments:
        raise EnumerationTooLarge(f"{space} assignments exceed the cutoff {max_assignments}")
    clients = list(inst.clients)
    choices = [inst.client_adj[c] for c in clients]
    best: dict[int, int | None] = {p: None for p in p_list}
    for combo in itertools.product(*choices):
        loads = {s: 0 for s in inst.servers}
        for c, s in zip(clients, combo):
            loads[s] += inst.weight[c]
        values = loads.values()
        for p in p_list:
            total = sum(v**p for v in values)
            if best[p] is None or total < best[p]:
                best[p] = total
    return {p: v for p, v in best.items()}


def opt_backup_enum(inst: Instance, r: int, max_combinations: int = 10**6) -> int:
    """Exact backup-placement optimum by exhaustive r-subset enumeration."""
    _check_degrees(inst)
    per_client = []
    size = 1
    for c in inst.clients:
        subsets = list(itertools.combinations(inst.client_adj[c], r))
        if not subsets:
            raise InfeasibleError(f"client {c} has degree < {r}", client=c)
        per_client.append(subsets)
        size *= len(subsets)
        if size > max_combinations:
            raise EnumerationTooLarge(
                f"more than {max_combinations} r-subset combinations"
            )
    best = None
    clients = list(inst.clients)
    for combo in itertools.product(*per_client):
        loads = {s: 0 for s in inst.servers}
        for c, chosen in zip(clients, combo):
            for s in chosen:
                loads[s] += inst.weight[c]
        mx = max(loads.values())
        if best is None or mx < best:
            best = mx
    return best


# ---------------------------------------------------------------------------
# Structural verifiers
# ---------------------------------------------------------------------------


def find_cost_reducing_path(inst: Instance, assignment: Assignment):
    """A server-to-server reassignment chain dropping load by >= 2, or None.

    BFS over the digraph with an arc s -> s' whenever a client assigned to s
    is adjacent to s'.  Returns the alternating vertex path
    [s1, c1, s2, c2, ..., sk].
    """
    if not inst.is_unit_weight():
        raise ValueError("cost-reducing paths are defined for unit weights")
    loads = assignment.load_vector().loads
    # arc s -> s' realized by a witness client
    arcs: dict[int, dict[int, int]] = {s: {} for s in inst.servers}
    for c, s in assignment.mapping.items():
        for s2 in inst.client_adj[c]:
            if s2 != s and s2 not in arcs[s]:
                arcs[s][s2] = c
    for start in inst.servers:
        prev: dict[int, tuple[int, int]] = {}
        seen = {start}
        queue = deque([start])
        while queue:
            s = queue.popleft()
            if loads[s] <= loads[start] - 2:
                path = [s]
                while s != start:
                    p, c = prev[s]
                    path.extend([c, p])
                    s = p
                path.reverse()
                return path
            for s2, c in sorted(arcs[s].items()):
                if s2 not in seen:
                    seen.add(s2)
                    prev[s2] = (s, c)
                    queue.append(s2)
    return None


def apply_cost_reducing_path(assignment: Assignment, path) -> Assignment:
    """Shift one unit along the chain (re-assign each client forward)."""
    mapping = dict(assignment.mapping)
    for i in range(1, len(path), 2):
        mapping[path[i]] = path[i + 1]
    return Assignment(assignment.inst, mapping)


def verify_no_short_aug_paths(
    inst: Instance,
    profile: CapacityProfile,
    matching: CapMatching,
    k: int,
):
    """True if no augmenting path of length <= k exists; otherwise a witness
    AugPath.  Exhaustive layered BFS from every unsaturated client, with
    saturation recomputed from scratch."""
    if k % 2 == 0:
        raise ValueError("k must be odd")
    cdeg = {c: 0 for c in inst.clients}
    sdeg = {s: 0 for s in inst.servers}
    for (c, s), x in matching.mult.items():
        cdeg[c] += x
        sdeg[s] += x
    for c in inst.clients:
        if cdeg[c] >= profile.kappa[c]:
            continue
        parent: dict[int, int | None] = {c: None}
        depth = {c: 0}
        queue = deque([c])
        while queue:
            v = queue.popleft()
            if depth[v] >= k:
                continue
            if v in inst.client_adj:
                for s in inst.client_adj[v]:
                    if s in parent or profile.tau[s] == 0:
                        continue
                    if matching.mult.get((v, s), 0) >= profile.cap((v, s)):
                        continue
                    parent[s] = v
                    depth[s] = depth[v] + 1
                    if sdeg[s] < profile.tau[s]:
                        path = [s]
                        u: int | None = v
                        while u is not None:
                            path.append(u)
                            u = parent[u]
                        path.reverse()
                        return AugPath(path)
                    queue.append(s)
            else:
                for c2 in inst.server_adj[v]:
                    if c2 in parent or matching.mult.get((c2, v), 0) == 0:
                        continue
                    parent[c2] = v
                    depth[c2] = depth[v] + 1
                    queue.append(c2)
    return True


@dataclass
class ExpansionCounterexample:
    """Would falsify the structural expansion property; indicates a bug."""

    inst: Instance
    matching: CapMatching
    client: int
    bound: int


def verify_expansion_lemma(
    inst: Instance,
    kappa: dict[int, int],
    tau: dict[int, int],
    alpha: float,
    matching: CapMatching,
):
    """Check that every unsaturated client of an inflated-capacity matching
    has an augmenting path of length <= 2*ceil(log_alpha tau(S)) + 1.

    Precondition (raises PreconditionError if violated): a client-perfect
    (kappa, tau)-matching exists.  Returns True, or a counterexample record.
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if not client_perfect_matching_exists(inst, kappa, tau):
        raise PreconditionError("no client-perfect base matching exists")
    tau_total = sum(tau.values())
    bound = 2 * math.ceil(math.log(max(2, tau_total), alpha)) + 1
    if bound % 2 == 0:
        bound += 1
    prof = matching.profile
    for c in inst.clients:
        if matching.client_saturated(c):
            continue
        if not _has_short_path_from(inst, prof, matching, c, bound):
            return ExpansionCounterexample(inst, matching, c, bound)
    return True


def _has_short_path_from(inst, prof, matching, c, bound) -> bool:
    parent = {c: None}
    depth = {c: 0}
    queue = deque([c])
    while queue:
        v = queue.popleft()
        if depth[v] >= bound:
            continue
        if v in inst.client_adj:
            for s in inst.client_adj[v]:
                if s in parent or prof.tau[s] == 0:
                    continue
                if matching.mult.get((v, s), 0) >= prof.cap((v, s)):
                    continue
                parent[s] = v
                depth[s] = depth[v] + 1
                if not matching.server_saturated(s):
                    return True
                queue.append(s)
        else:
            for c2 in inst.server_adj[v]:
                if c2 in parent or matching.mult.get((c2, v), 0) == 0:
                    continue
                parent[c2] = v
                depth[c2] = depth[v] + 1
                queue.append(c2)
    return False


# ---------------------------------------------------------------------------
# Levels
# ---------------------------------------------------------------------------


@dataclass
class LevelMap:
    """Per-vertex loads under the canonical all-norm optimum."""

    optimal: Assignment
    server_level: dict[int, int]
    client_level: dict[int, int]


def levels(inst: Instance, max_assignments: int = 10**6) -> LevelMap:
    """Levels from the canonical all-norm optimum; asserts the no-downhill
    adjacency property (no client adjacent to a server two levels below its
    own) before returning."""
    if not inst.is_unit_weight():
        raise ValueError("levels require unit weights")
    _, witness = opt_allnorm_enum(inst, (2, math.inf), max_assignments)
    assert witness is not None
    loads = witness.load_vector().loads
    client_level = {c: loads[witness.mapping[c]] for c in inst.clients}
    for c in inst.clients:
        for s in inst.client_adj[c]:
            if loads[s] <= client_level[c] - 2:
                raise AssertionError(
                    f"adjacency ({c}, {s}) violates the level structure: "
                    f"{loads[s]} <= {client_level[c]} - 2"
                )
    return LevelMap(witness, dict(loads), client_level)
