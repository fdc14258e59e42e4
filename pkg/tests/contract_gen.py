"""Random single-file contracts with a known call graph, for oracle tests."""

import random
from collections import deque


def random_program(rng: random.Random, max_functions: int = 20):
    """Return (source, adjacency, fields_used) for a random call graph.

    Functions ``f0..fN`` live in a base and a derived contract; edges may form
    cycles and self-loops. ``fields_used[i]`` lists the state variables f_i reads.
    """
    n = rng.randint(1, max_functions)
    adj = {i: sorted(rng.sample(range(n), rng.randint(0, min(3, n)))) for i in range(n)}
    fields = [f"v{k}" for k in range(rng.randint(0, 4))]
    used = {i: sorted(rng.sample(fields, rng.randint(0, len(fields)))) if fields else [] for i in range(n)}
    split = rng.randint(0, n)  # f0..f(split-1) in Base, the rest in Token
    vis = {i: rng.choice(["public", "internal", "private", "external"]) for i in range(n)}
    # private functions are invisible to the derived contract; keep calls legal
    for i in range(n):
        if vis[i] == "private" and any(i in adj[j] for j in range(split, n)):
            vis[i] = "internal"
        if vis[i] == "external" and any(i in adj[j] for j in range(n)):
            vis[i] = "public"

    def fn(i):
        body = [f"        f{j}();" for j in adj[i]]
        body += [f"        x += {v};" for v in used[i]]
        return [f"    function f{i}() {vis[i]} {{", "        uint256 x;", *body, "    }", ""]

    lines = ["pragma solidity ^0.8.0;", "", "contract Base {"]
    lines += [f"    uint256 internal {v};" for v in fields]
    for i in range(split):
        lines += fn(i)
    lines += ["}", "", "contract Token is Base {"]
    for i in range(split, n):
        lines += fn(i)
    lines += ["}"]
    return "\n".join(lines) + "\n", adj, used


def bfs_closure(adj, start):
    """Nodes reachable from ``start`` over one or more edges."""
    seen, queue = set(), deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in adj[cur]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen
