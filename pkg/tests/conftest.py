import heapq
import random
from itertools import permutations
from pathlib import Path

import pytest

from alarmpatrol import PatrolInstance, TargetSpec, load_instance

DATA = Path(__file__).resolve().parent.parent / "src" / "alarmpatrol" / "data"


@pytest.fixture(scope="session")
def fig2():
    return load_instance(DATA / "fig2.json")


@pytest.fixture(scope="session")
def fig3():
    return load_instance(DATA / "fig3.json")


def random_instance(rng, n_max=7, t_max=4, k=2, weights=(1, 1, 1, 2), values=(0.25, 0.5, 1.0), d_max=5):
    """Connected random graph: a random tree plus a few chords."""
    n = rng.randint(2, n_max)
    names = [f"v{i}" for i in range(n)]
    edges = {}
    for i in range(1, n):
        j = rng.randrange(i)
        edges[frozenset((names[i], names[j]))] = rng.choice(weights)
    for _ in range(rng.randint(0, n)):
        a, b = rng.sample(names, 2)
        edges.setdefault(frozenset((a, b)), rng.choice(weights))
    targets = {
        v: TargetSpec(rng.choice(values), rng.randint(1, d_max))
        for v in rng.sample(names, rng.randint(1, min(t_max, n)))
    }
    edge_list = [sorted(e) + [w] for e, w in edges.items()]
    return PatrolInstance(names, edge_list, targets, k=k)


def small_instances(seed, count, max_unit_vertices=7, min_targets=1, **kw):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        inst = random_instance(rng, **kw)
        if inst.compiled.n <= max_unit_vertices and len(inst.targets) >= min_targets:
            out.append(inst)
    return out


def dijkstra(inst, source):
    adj = {v: [] for v in inst.vertices}
    for u, v, w in inst.edges:
        adj[u].append((v, w))
        adj[v].append((u, w))
    dist = {source: 0}
    heap = [(0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj[u]:
            if d + w < dist.get(v, float("inf")):
                dist[v] = d + w
                heapq.heappush(heap, (d + w, v))
    return dist


def brute_force_cover(inst, start, attacked):
    """Best covered value over every ordering of every subset of the attacked targets."""
    dist = {v: dijkstra(inst, v) for v in inst.vertices}
    names = sorted(attacked)
    best = 0.0
    for size in range(1, len(names) + 1):
        for order in permutations(names, size):
            clock, pos, ok = 0, start, True
            for t in order:
                clock += dist[pos][t]
                if clock > attacked[t]:
                    ok = False
                    break
                pos = t
            if ok:
                best = max(best, sum(inst.targets[t].value for t in order))
    return best - sum(inst.targets[t].value for t in names)
