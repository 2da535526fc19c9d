"""Barnes-Hut quadtree approximation of the t-SNE repulsive forces.

Numba-compiled; the traversal for point i accumulates sum_j count*w^2*(y_i - com)
over accepted cells plus the normalizer contribution count*w, where
w = 1/(1 + d^2). A cell is accepted when its width over the distance to its
center of mass is below theta. Cells whose only point is i itself are skipped;
an internal cell containing i can never pass the acceptance test for
theta <= 1, so self-interactions are excluded.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_MIN_HALF_WIDTH = 1e-12


@njit(cache=True)
def _build(Y):
    n = Y.shape[0]
    cap = 8 * n + 4096
    cx = np.zeros(cap)
    cy = np.zeros(cap)
    hw = np.zeros(cap)
    count = np.zeros(cap, np.int64)
    comx = np.zeros(cap)
    comy = np.zeros(cap)
    child = np.full((cap, 4), -1, np.int64)
    point = np.full(cap, -1, np.int64)

    minx = Y[:, 0].min(); maxx = Y[:, 0].max()
    miny = Y[:, 1].min(); maxy = Y[:, 1].max()
    cx[0] = 0.5 * (minx + maxx)
    cy[0] = 0.5 * (miny + maxy)
    half = 0.5 * max(maxx - minx, maxy - miny)
    hw[0] = half + 1e-9 + 1e-9 * half
    n_nodes = 1

    for i in range(n):
        px = Y[i, 0]; py = Y[i, 1]
        node = 0
        while True:
            c = count[node]
            comx[node] = (comx[node] * c + px) / (c + 1)
            comy[node] = (comy[node] * c + py) / (c + 1)
            count[node] = c + 1
            if c == 0:
                point[node] = i
                break
            if point[node] >= 0:
                # occupied leaf: push the resident point one level down
                if hw[node] < _MIN_HALF_WIDTH or n_nodes + 2 > cap:
                    break  # degenerate cell: coincident points accumulate here
                old = point[node]
                point[node] = -1
                q = 0
                if Y[old, 0] >= cx[node]:
                    q += 1
                if Y[old, 1] >= cy[node]:
                    q += 2
                ch = child[node, q]
                if ch < 0:
                    ch = n_nodes
                    n_nodes += 1
                    child[node, q] = ch
                    hw[ch] = 0.5 * hw[node]
                    cx[ch] = cx[node] + (hw[ch] if q & 1 else -hw[ch])
                    cy[ch] = cy[node] + (hw[ch] if q & 2 else -hw[ch])
                comx[ch] = Y[old, 0]
                comy[ch] = Y[old, 1]
                count[ch] = 1
                point[ch] = old
            q = 0
            if px >= cx[node]:
                q += 1
            if py >= cy[node]:
                q += 2
            ch = child[node, q]
            if ch < 0:
                if n_nodes + 1 > cap:
                    break
                ch = n_nodes
                n_nodes += 1
                child[node, q] = ch
                hw[ch] = 0.5 * hw[node]
                cx[ch] = cx[node] + (hw[ch] if q & 1 else -hw[ch])
                cy[ch] = cy[node] + (hw[ch] if q & 2 else -hw[ch])
            node = ch
    return cx, cy, hw, count, comx, comy, child, point, n_nodes


@njit(cache=True)
def _forces(Y, theta, cx, cy, hw, count, comx, comy, child, point):
    n = Y.shape[0]
    rep = np.zeros((n, 2))
    zsum = 0.0
    stack = np.empty(4096, np.int64)
    theta_sq = theta * theta
    for i in range(n):
        px = Y[i, 0]; py = Y[i, 1]
        sp = 1
        stack[0] = 0
        while sp > 0:
            sp -= 1
            node = stack[sp]
            cnt = count[node]
            if cnt == 0:
                continue
            dx = px - comx[node]
            dy = py - comy[node]
            d2 = dx * dx + dy * dy
            leaf = (child[node, 0] < 0 and child[node, 1] < 0
                    and child[node, 2] < 0 and child[node, 3] < 0)
            if leaf and point[node] == i and cnt == 1:
                continue
            width = 2.0 * hw[node]
            if leaf or width * width < theta_sq * d2:
                w = 1.0 / (1.0 + d2)
                zsum += cnt * w
                coef = cnt * w * w
                rep[i, 0] += coef * dx
                rep[i, 1] += coef * dy
            else:
                for q in range(4):
                    ch = child[node, q]
                    if ch >= 0 and sp < stack.shape[0]:
                        stack[sp] = ch
                        sp += 1
    return rep, zsum


def repulsion(Y: np.ndarray, theta: float) -> tuple[np.ndarray, float]:
    """Approximate (sum_j w^2 (y_i - y_j), sum_{i != j} w) for the current layout."""
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    cx, cy, hw, count, comx, comy, child, point, _ = _build(Y)
    return _forces(Y, float(theta), cx, cy, hw, count, comx, comy, child, point)
