"""Brute-force reference implementations used to check the library.

Everything here works from first principles on raw inputs and imports
nothing from the package under test except plain data types.
"""

from __future__ import annotations

import math
from itertools import product


def tfidf_scores(docs: dict[str, str], query: str) -> dict[str, float]:
    """Cosine scores of raw-tf x ln(N/df) vectors, by nested loops over whitespace tokens."""
    split = {d: text.lower().split() for d, text in docs.items()}
    n = len(split)
    vocab = []
    for toks in split.values():
        for t in toks:
            if t not in vocab:
                vocab.append(t)

    def df(term):
        c = 0
        for toks in split.values():
            if term in toks:
                c += 1
        return c

    def vec(toks):
        out = []
        for term in vocab:
            tf = 0
            for t in toks:
                if t == term:
                    tf += 1
            out.append(tf * math.log(n / df(term)) if tf else 0.0)
        return out

    q = vec(query.lower().split())
    scores = {}
    for d, toks in split.items():
        v = vec(toks)
        dot = 0.0
        for i in range(len(vocab)):
            dot += q[i] * v[i]
        nq = math.sqrt(sum(x * x for x in q))
        nv = math.sqrt(sum(x * x for x in v))
        scores[d] = 0.0 if nq == 0 or nv == 0 else dot / (nq * nv)
    return scores


def flood_enumeration(adj: dict[str, list[str]], relays: set[str], source: str, budget: int) -> dict[str, int]:
    """Minimum walk length to every node reachable within ``budget``.

    Enumerates every walk (revisits allowed) of length <= budget from
    ``source`` where only ``relays`` (and the source) may forward.
    """
    best: dict[str, int] = {}
    stack = [(source, 0)]
    while stack:
        node, depth = stack.pop()
        if depth == budget or (node != source and node not in relays):
            continue
        for nb in adj[node]:
            if nb == source:
                continue
            if nb not in best or depth + 1 < best[nb]:
                best[nb] = depth + 1
            stack.append((nb, depth + 1))
    return best


def closure(concepts: list[str], parents: dict[str, list[str]]) -> dict[tuple[str, str], bool]:
    """``closure[(a, b)]`` is True when ``a`` subsumes ``b`` (Warshall on the parent relation)."""
    idx = {c: i for i, c in enumerate(concepts)}
    n = len(concepts)
    m = [[i == j for j in range(n)] for i in range(n)]
    for child, ps in parents.items():
        for p in ps:
            m[idx[p]][idx[child]] = True
    # k outermost, as Warshall requires
    for k, i, j in product(range(n), repeat=3):
        if m[i][k] and m[k][j]:
            m[i][j] = True
    return {(a, b): m[idx[a]][idx[b]] for a in concepts for b in concepts}


def degree(
    client_xy, svc_xy, max_distance, window, now, client_dc, svc_dc, load, max_load,
    req_in, req_out, svc_in, svc_out, sub, has_context=True,
) -> int:
    """Independent restatement of the four-level context grade (3 Exact .. 0 Fail)."""
    dx, dy = svc_xy[0] - client_xy[0], svc_xy[1] - client_xy[1]
    ok = (
        dx * dx + dy * dy <= max_distance * max_distance
        and window[0] <= now <= window[1]
        and svc_dc >= client_dc
        and load <= max_load
    )
    if not ok:
        return 0
    exact = all(r in svc_out for r in req_out) and all(i in req_in for i in svc_in)
    subsume = all(any(sub[(r, o)] for o in svc_out) for r in req_out) and all(
        any(sub[(i, c)] for c in req_in) for i in svc_in
    )
    if exact:
        return 3 if has_context else 2
    if subsume:
        return 2
    return 1
