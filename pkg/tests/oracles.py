"""Brute-force reference implementations used only by the tests.

Each one is written independently of the package code it checks.
"""
from __future__ import annotations

import itertools
from collections import deque

import numpy as np


def dijkstra_length(occupied, start, goal, kind, blocked=()):
    """Plain Dijkstra with unit edges (a BFS queue suffices); None when unreachable."""
    nx, ny, nz = occupied.shape
    steps = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]
    if kind == "aerial":
        steps += [(0, 0, 1), (0, 0, -1)]

    def ok(c):
        x, y, z = c
        if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
            return False
        if kind == "ground" and z != 0:
            return False
        return not occupied[x, y, z] and c not in blocked

    if start == goal:
        return 0
    if not ok(start) or not ok(goal):
        return None
    dist = {start: 0}
    q = deque([start])
    while q:
        c = q.popleft()
        for d in steps:
            n = (c[0] + d[0], c[1] + d[1], c[2] + d[2])
            if n not in dist and ok(n):
                dist[n] = dist[c] + 1
                if n == goal:
                    return dist[n]
                q.append(n)
    return None


def brute_assignment_min(cost):
    """Minimum total over every injective row->column (or column->row) map."""
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    best = np.inf
    if n <= m:
        for cols in itertools.permutations(range(m), n):
            best = min(best, sum(cost[i, c] for i, c in enumerate(cols)))
    else:
        for rows in itertools.permutations(range(n), m):
            best = min(best, sum(cost[r, j] for j, r in enumerate(rows)))
    return best


def naive_sage(X, i, W, Wp):
    """Double loop over agents and matrix entries."""
    X = np.asarray(X, dtype=float)
    out = []
    for r in range(W.shape[0]):
        acc = 0.0
        for c in range(W.shape[1]):
            acc += W[r][c] * X[i][c]
        for j in range(len(X)):
            if j == i:
                continue
            for c in range(W.shape[1]):
                acc += Wp[r][c] * X[j][c]
        out.append(np.tanh(acc))
    return np.array(out)


def naive_mlp(z, weights, biases):
    """Scalar loops; ReLU on hidden layers, linear output."""
    h = list(z)
    for k, (W, b) in enumerate(zip(weights, biases)):
        nxt = []
        for o in range(W.shape[1]):
            s = b[o]
            for i in range(W.shape[0]):
                s += h[i] * W[i][o]
            nxt.append(max(s, 0.0) if k < len(weights) - 1 else s)
        h = nxt
    return np.array(h)


def naive_softmax(logits):
    import math
    mx = max(logits)
    ex = [math.exp(v - mx) for v in logits]
    s = sum(ex)
    return np.array([e / s for e in ex])


def gae_direct(rewards, values, dones, bootstrap, gamma, lam):
    """A_t = sum_k (gamma*lam)^k delta_{t+k}, truncated at the first terminal."""
    T = len(rewards)
    deltas = []
    for t in range(T):
        nxt = bootstrap if t == T - 1 else values[t + 1]
        live = 0.0 if dones[t] else 1.0
        deltas.append(rewards[t] + gamma * nxt * live - values[t])
    adv = []
    for t in range(T):
        total, coef = 0.0, 1.0
        for k in range(t, T):
            total += coef * deltas[k]
            if dones[k]:
                break
            coef *= gamma * lam
        adv.append(total)
    return np.array(adv)


def adam_by_hand(p0, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar Adam recursion written out term by term."""
    p, m, v = p0, 0.0, 0.0
    out = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        p = p - lr * mhat / (vhat ** 0.5 + eps)
        out.append(p)
    return out


def central_diff(f, x, h=1e-5):
    """Central finite differences of scalar f over every entry of array x (in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)
