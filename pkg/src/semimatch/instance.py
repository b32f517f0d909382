"""Bipartite client/server instances: construction, normalization, expansion, I/O.

An instance is a bipartite graph on dense integer ids in [0, n).  Clients carry
positive integer weights; servers accumulate load.  All objects here are
treated as immutable after construction and may be shared freely.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field


class InstanceError(ValueError):
    """Raised for malformed instance data (bad ids, weights, edges, files)."""


def _next_pow2(x: int) -> int:
    return 1 << (x - 1).bit_length() if x > 1 else 1


def _prev_pow2(x: int) -> int:
    return 1 << (x.bit_length() - 1)


@dataclass
class Instance:
    """A bipartite load-balancing instance.

    clients / servers are disjoint dense id ranges covering [0, n); edges join
    one client and one server; weights are positive integers.  When an
    instance has been weight-normalized, ``original_weight`` keeps the
    pre-normalization weights for reporting.
    """

    clients: tuple[int, ...]
    servers: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    weight: dict[int, int]
    original_weight: dict[int, int] | None = None

    # adjacency caches, filled in __post_init__
    client_adj: dict[int, tuple[int, ...]] = field(default_factory=dict, repr=False)
    server_adj: dict[int, tuple[int, ...]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        cset, sset = set(self.clients), set(self.servers)
        if cset & sset:
            raise InstanceError(f"client/server id overlap: {sorted(cset & sset)[:5]}")
        n = len(cset) + len(sset)
        if cset | sset != set(range(n)):
            raise InstanceError("ids must be dense integers in [0, n)")
        if len(self.edges) != len(set(self.edges)):
            raise InstanceError("duplicate edges are not allowed")
        ca: dict[int, list[int]] = {c: [] for c in self.clients}
        sa: dict[int, list[int]] = {s: [] for s in self.servers}
        for c, s in self.edges:
            if c not in cset:
                raise InstanceError(f"edge ({c}, {s}): {c} is not a client")
            if s not in sset:
                raise InstanceError(f"edge ({c}, {s}): {s} is not a server")
            ca[c].append(s)
            sa[s].append(c)
        for c in self.clients:
            w = self.weight.get(c)
            if w is None or w <= 0:
                raise InstanceError(f"client {c} must have a positive weight, got {w}")
        self.clients = tuple(sorted(self.clients))
        self.servers = tuple(sorted(self.servers))
        self.edges = tuple(sorted(self.edges))
        self.client_adj = {c: tuple(sorted(ca[c])) for c in self.clients}
        self.server_adj = {s: tuple(sorted(sa[s])) for s in self.servers}

    @property
    def n(self) -> int:
        return len(self.clients) + len(self.servers)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def max_weight(self) -> int:
        return max(self.weight.values()) if self.clients else 1

    @property
    def total_weight(self) -> int:
        return sum(self.weight[c] for c in self.clients)

    def is_unit_weight(self) -> bool:
        return all(self.weight[c] == 1 for c in self.clients)

    def is_normalized(self) -> bool:
        return all(
            w & (w - 1) == 0 and w <= self.n for w in self.weight.values()
        )

    def degree(self, v: int) -> int:
        if v in self.client_adj:
            return len(self.client_adj[v])
        return len(self.server_adj[v])

    def zero_degree_clients(self) -> list[int]:
        return [c for c in self.clients if not self.client_adj[c]]


@dataclass
class WeightClassView:
    """Clients of one power-of-two weight class and their induced subgraph."""

    class_index: int  # class weight is 2**class_index
    clients: tuple[int, ...]
    servers: tuple[int, ...]  # N(C_i)
    edges: tuple[tuple[int, int], ...]

    @property
    def class_weight(self) -> int:
        return 1 << self.class_index


@dataclass
class ExpandedInstance:
    """Client-expanded graph: each client replaced by w(c) unit-weight copies."""

    base: Instance
    instance: Instance
    copy_of: dict[int, tuple[int, int]]  # expanded client -> (base client, copy idx)
    server_map: dict[int, int]  # base server -> expanded server id

    @property
    def server_unmap(self) -> dict[int, int]:
        return {v: k for k, v in self.server_map.items()}


def build_instance(
    clients,
    servers,
    edges,
    weights: dict[int, int] | None = None,
) -> Instance:
    """Construct a validated Instance; unit weights when ``weights`` is None."""
    clients = tuple(clients)
    if weights is None:
        weights = {c: 1 for c in clients}
    return Instance(clients, tuple(servers), tuple(tuple(e) for e in edges), dict(weights))


def normalize_weights(inst: Instance) -> Instance:
    """Rescale weights so all are powers of two and at most n.

    When the maximum weight exceeds n, every weight is first rescaled by n/W
    (rounded up), then each weight is rounded up to the nearest power of two.
    A power-of-two rounded weight that still exceeds n is clamped down to the
    largest power of two <= n, which keeps the stated invariant and makes the
    operation idempotent.  Original weights are retained for reporting.
    """
    n = inst.n
    W = inst.max_weight
    cap = _prev_pow2(n) if n >= 1 else 1
    new_w = {}
    for c in inst.clients:
        w = inst.weight[c]
        if W > n:
            w = math.ceil(w * n / W)
        w = _next_pow2(w)
        if w > n:
            w = cap
        new_w[c] = w
    original = inst.original_weight if inst.original_weight is not None else dict(inst.weight)
    return Instance(inst.clients, inst.servers, inst.edges, new_w, dict(original))


def weight_classes(inst: Instance) -> list[WeightClassView]:
    """Partition a normalized instance into per-weight-class induced subgraphs."""
    for c in inst.clients:
        w = inst.weight[c]
        if w & (w - 1) != 0:
            raise InstanceError(
                f"client {c} has non-power-of-two weight {w}; call normalize_weights first"
            )
    by_class: dict[int, list[int]] = {}
    for c in inst.clients:
        by_class.setdefault(inst.weight[c].bit_length() - 1, []).append(c)
    views = []
    for i in sorted(by_class):
        cs = tuple(sorted(by_class[i]))
        es = tuple(e for e in inst.edges if e[0] in set(cs))
        srv = tuple(sorted({s for _, s in es}))
        views.append(WeightClassView(i, cs, srv, es))
    return views


def client_expand(inst: Instance, max_expanded_clients: int = 10**6) -> ExpandedInstance:
    """Replace each client by w(c) unit-weight copies with the same neighbors."""
    total = inst.total_weight
    if total > max_expanded_clients:
        raise InstanceError(
            f"expansion would create {total} clients, above the cap {max_expanded_clients}"
        )
    copy_of = {}
    next_id = 0
    for c in inst.clients:
        for j in range(1, inst.weight[c] + 1):
            copy_of[next_id] = (c, j)
            next_id += 1
    server_map = {s: next_id + i for i, s in enumerate(inst.servers)}
    edges = []
    for cid, (c, _) in copy_of.items():
        for s in inst.client_adj[c]:
            edges.append((cid, server_map[s]))
    expanded = build_instance(
        range(next_id), server_map.values(), edges, {c: 1 for c in range(next_id)}
    )
    return ExpandedInstance(inst, expanded, copy_of, server_map)


def induced_subinstance(
    inst: Instance, clients, servers
) -> tuple[Instance, dict[int, int], dict[int, int]]:
    """Relabel a client/server subset into a dense-id sub-instance.

    Returns (sub-instance, client map old->new, server map old->new).  Weights
    are reset to 1 (callers use this for the per-class unweighted reduction).
    """
    clients = sorted(clients)
    servers = sorted(servers)
    cmap = {c: i for i, c in enumerate(clients)}
    smap = {s: len(clients) + i for i, s in enumerate(servers)}
    edges = [
        (cmap[c], smap[s])
        for c, s in inst.edges
        if c in cmap and s in smap
    ]
    sub = build_instance(range(len(clients)), smap.values(), edges)
    return sub, cmap, smap


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

GENERATORS = (
    "random-bipartite",
    "star",
    "disjoint-perfect",
    "power-law-degrees",
    "weighted-random",
)


def generate_instance(name: str, seed: int = 0, **params) -> Instance:
    """Deterministic instance generators.

    Supported: random-bipartite(n_clients, n_servers, p), star(n_clients),
    disjoint-perfect(k), power-law-degrees(n_clients, n_servers, exponent),
    weighted-random(n_clients, n_servers, p, max_weight).  Every client ends
    up with degree >= 1 (a fallback edge is added when sampling leaves a
    client isolated).
    """
    rng = random.Random(seed)
    if name == "star":
        nc = int(params["n_clients"])
        if nc < 1:
            raise InstanceError("star requires n_clients >= 1")
        return build_instance(range(nc), [nc], [(c, nc) for c in range(nc)])
    if name == "disjoint-perfect":
        k = int(params["k"])
        if k < 1:
            raise InstanceError("disjoint-perfect requires k >= 1")
        return build_instance(range(k), range(k, 2 * k), [(i, k + i) for i in range(k)])
    if name == "random-bipartite":
        return _random_bipartite(rng, int(params["n_clients"]), int(params["n_servers"]),
                                 float(params["p"]))
    if name == "power-law-degrees":
        nc, ns = int(params["n_clients"]), int(params["n_servers"])
        exponent = float(params.get("exponent", 2.0))
        if nc < 1 or ns < 1 or exponent <= 0:
            raise InstanceError("power-law-degrees parameters out of range")
        servers = list(range(nc, nc + ns))
        # server attachment weights ~ rank^(-exponent)
        attach = [1.0 / (i + 1) ** exponent for i in range(ns)]
        edges = set()
        for c in range(nc):
            deg = max(1, min(ns, int(rng.paretovariate(exponent))))
            # bias attachment toward high-rank servers
            for s in rng.choices(servers, weights=attach, k=deg):
                edges.add((c, s))
        return build_instance(range(nc), servers, sorted(edges))
    if name == "weighted-random":
        max_w = int(params.get("max_weight", 8))
        if max_w < 1:
            raise InstanceError("weighted-random requires max_weight >= 1")
        base = _random_bipartite(rng, int(params["n_clients"]), int(params["n_servers"]),
                                 float(params["p"]))
        weights = {c: rng.randint(1, max_w) for c in base.clients}
        return build_instance(base.clients, base.servers, base.edges, weights)
    raise InstanceError(f"unknown generator {name!r}; expected one of {GENERATORS}")


def _random_bipartite(rng: random.Random, nc: int, ns: int, p: float) -> Instance:
    if nc < 1 or ns < 1 or not (0.0 <= p <= 1.0):
        raise InstanceError("random-bipartite parameters out of range")
    servers = list(range(nc, nc + ns))
    edges = []
    for c in range(nc):
        row = [s for s in servers if rng.random() < p]
        if not row:
            row = [rng.choice(servers)]
        edges.extend((c, s) for s in row)
    return build_instance(range(nc), servers, edges)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

_ALLOWED_KEYS = {"clients", "servers", "edges"}


def write_instance(inst: Instance, path) -> None:
    """Write the JSON instance format (keys ordered, arrays sorted by id)."""
    doc = {
        "clients": [{"id": c, "weight": inst.weight[c]} for c in inst.clients],
        "servers": [{"id": s} for s in inst.servers],
        "edges": [[c, s] for c, s in inst.edges],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_instance(path) -> Instance:
    """Read the JSON instance format, with field-level diagnostics."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise InstanceError(f"{path}: top-level value must be an object")
    unknown = set(doc) - _ALLOWED_KEYS
    if unknown:
        raise InstanceError(f"{path}: unknown field {sorted(unknown)[0]!r}")
    for key in _ALLOWED_KEYS:
        if key not in doc:
            raise InstanceError(f"{path}: missing field {key!r}")
    clients, weights = [], {}
    for i, entry in enumerate(doc["clients"]):
        if not isinstance(entry, dict) or "id" not in entry or "weight" not in entry:
            raise InstanceError(f"{path}: clients[{i}] must have 'id' and 'weight'")
        if not isinstance(entry["weight"], int) or entry["weight"] <= 0:
            raise InstanceError(f"{path}: clients[{i}].weight must be a positive integer")
        clients.append(entry["id"])
        weights[entry["id"]] = entry["weight"]
    servers = []
    for i, entry in enumerate(doc["servers"]):
        if not isinstance(entry, dict) or "id" not in entry:
            raise InstanceError(f"{path}: servers[{i}] must have 'id'")
        servers.append(entry["id"])
    edges = []
    for i, e in enumerate(doc["edges"]):
        if not isinstance(e, list) or len(e) != 2:
            raise InstanceError(f"{path}: edges[{i}] must be a [client, server] pair")
        edges.append((e[0], e[1]))
    try:
        return build_instance(clients, servers, edges, weights)
    except InstanceError as exc:
        raise InstanceError(f"{path}: {exc}") from exc
