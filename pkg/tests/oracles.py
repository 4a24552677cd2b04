"""Deliberately naive reference implementations used as test oracles.

None of these share code with the package.
"""

import math
from itertools import combinations

import numpy as np


# --- alpha shapes -----------------------------------------------------------

def brute_force_alpha_triangles(points, max_radius):
    """Delaunay triangles by the empty-circumcircle test over all triples, pruned by radius."""
    pts = [tuple(map(float, p)) for p in points]
    kept = []
    for i, j, k in combinations(range(len(pts)), 3):
        (ax, ay), (bx, by), (cx, cy) = pts[i], pts[j], pts[k]
        d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
        if abs(d) < 1e-14:
            continue
        ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
        uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
        r = math.hypot(ax - ux, ay - uy)
        empty = True
        for m, (px, py) in enumerate(pts):
            if m in (i, j, k):
                continue
            if math.hypot(px - ux, py - uy) < r * (1 - 1e-12):
                empty = False
                break
        if empty and r < max_radius:
            kept.append((pts[i], pts[j], pts[k]))
    return kept


def rasterize_triangles(triangles, xs, ys):
    """Boolean coverage of the grid of cell centers ``xs x ys`` by the triangles."""
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    inside = np.zeros(X.shape, dtype=bool)
    for (ax, ay), (bx, by), (cx, cy) in triangles:
        det = (by - cy) * (ax - cx) + (cx - bx) * (ay - cy)
        l1 = ((by - cy) * (X - cx) + (cx - bx) * (Y - cy)) / det
        l2 = ((cy - ay) * (X - cx) + (ax - cx) * (Y - cy)) / det
        l3 = 1 - l1 - l2
        inside |= (l1 >= 0) & (l2 >= 0) & (l3 >= 0)
    return inside


def sampled_segment_distance(point, a, b, n=1001):
    """Distance from ``point`` to segment ab by coarse then fine sampling along the segment."""
    p = np.asarray(point, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = np.linspace(0, 1, n)
    d = np.hypot(*(a + t[:, None] * (b - a) - p).T)
    i = int(np.argmin(d))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, n - 1)]
    t2 = np.linspace(lo, hi, n)
    d2 = np.hypot(*(a + t2[:, None] * (b - a) - p).T)
    return float(d2.min())


# --- rainflow ---------------------------------------------------------------

def naive_reversals(series):
    vals = []
    for v in series:
        v = float(v)
        if vals and v == vals[-1]:
            continue
        vals.append(v)
    if len(vals) < 3:
        return vals
    out = [vals[0]]
    for i in range(1, len(vals) - 1):
        # compare directions, not a product of differences (which can underflow)
        if (vals[i] > vals[i - 1]) != (vals[i + 1] > vals[i]):
            out.append(vals[i])
    out.append(vals[-1])
    return out


def astm_three_point(series):
    """Rainflow counting following the standard's step-by-step text (start-point variant).

    Returns a sorted list of (range, mean, count).
    """
    pts = naive_reversals(series)
    cycles = []
    stack = []
    for p in pts:
        stack.append(p)
        while len(stack) >= 3:
            x = abs(stack[-1] - stack[-2])
            y = abs(stack[-2] - stack[-3])
            if x < y:
                break
            if len(stack) == 3:
                # Y contains the starting point: half cycle, drop the start
                cycles.append((y, (stack[0] + stack[1]) / 2, 0.5))
                stack.pop(0)
            else:
                cycles.append((y, (stack[-2] + stack[-3]) / 2, 1.0))
                last = stack.pop()
                stack.pop()
                stack.pop()
                stack.append(last)
    for a, b in zip(stack[:-1], stack[1:]):
        cycles.append((abs(a - b), (a + b) / 2, 0.5))
    return sorted(cycles)


def four_point_scan(series):
    """Four-point rainflow written as a left-to-right scan over a list with backtracking.

    Returns a sorted list of (range, mean, count).
    """
    pts = list(naive_reversals(series))
    cycles = []
    i = 0
    while i + 3 < len(pts):
        a, b, c, d = pts[i:i + 4]
        inner = abs(b - c)
        if inner <= abs(a - b) and inner <= abs(c - d):
            cycles.append((inner, (b + c) / 2, 1.0))
            del pts[i + 1:i + 3]
            i = max(i - 2, 0)
        else:
            i += 1
    for a, b in zip(pts[:-1], pts[1:]):
        cycles.append((abs(a - b), (a + b) / 2, 0.5))
    return sorted(cycles)


# --- metrics ----------------------------------------------------------------

def naive_metrics(y, yh):
    y = np.asarray(y, dtype=float)
    yh = np.asarray(yh, dtype=float)
    n = len(y)
    err = yh - y
    mae = math.fsum(abs(e) for e in err) / n
    mse = math.fsum(e * e for e in err) / n
    ybar = math.fsum(y) / n
    sst = math.fsum((v - ybar) ** 2 for v in y)
    norm_y = math.sqrt(math.fsum(v * v for v in y))
    return {
        "mae": mae,
        "mse": mse,
        "rmse": math.sqrt(mse),
        "r2": 1 - math.fsum(e * e for e in err) / sst if len(set(y.tolist())) > 1 else None,
        "rel_l2": math.sqrt(math.fsum(e * e for e in err)) / norm_y if norm_y > 0 else None,
        "mre": math.fsum(abs(e) / abs(v) for e, v in zip(err, y)) / n if np.all(y != 0) else None,
        "max_err": max(abs(e) for e in err),
    }


def formula_metrics(y, yh):
    """Vectorized but formula-by-formula recomputation (no shared intermediates)."""
    y = np.asarray(y, dtype=float)
    yh = np.asarray(yh, dtype=float)
    mse = np.mean((yh - y) ** 2)
    return {
        "mae": float(np.mean(np.abs(yh - y))),
        "mse": float(mse),
        "rmse": float(np.sqrt(np.mean((yh - y) ** 2))),
        "r2": float(1 - np.sum((y - yh) ** 2) / np.sum((y - np.mean(y)) ** 2))
        if np.ptp(y) > 0 else None,
        "rel_l2": float(np.linalg.norm(yh - y) / np.linalg.norm(y)) if np.any(y) else None,
        "mre": float(np.mean(np.abs(yh - y) / np.abs(y))) if np.all(y != 0) else None,
        "max_err": float(np.max(np.abs(y - yh))),
    }
