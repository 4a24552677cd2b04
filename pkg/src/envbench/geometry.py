"""Standardized 2-D point-cloud geometry: scaling, alpha shapes, hull queries.

The alpha shape keeps a Delaunay triangle iff its circumradius is below a
threshold. With the default ``convention="inverse"`` the threshold is
``1 / alpha`` (so ``alpha = 0`` keeps every triangle and gives the convex
hull); ``convention="radius"`` uses ``alpha`` itself as the radius.
"""

from fractions import Fraction

import numpy as np
from scipy.spatial import Delaunay, QhullError
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._checks import check_points_2d, unique_rows
from .exceptions import GeometryError

# Shewchuk's static error bound for the 2x2 orientation determinant.
_EPS = np.finfo(np.float64).eps / 2
_CCW_ERRBOUND = (3.0 + 16.0 * _EPS) * _EPS

ALPHA_CONVENTIONS = ("inverse", "radius")


def _orient_exact(ax, ay, bx, by, cx, cy):
    det = (Fraction(bx) - Fraction(ax)) * (Fraction(cy) - Fraction(ay)) - (
        Fraction(by) - Fraction(ay)
    ) * (Fraction(cx) - Fraction(ax))
    return (det > 0) - (det < 0)


def orient2d(a, b, c):
    """Sign of the signed area of (a, b, c): +1 counter-clockwise, -1 clockwise, 0 collinear.

    Arguments broadcast against each other with a trailing axis of length 2.
    The float determinant is trusted only when it clears Shewchuk's error
    bound; the remaining entries are recomputed exactly with rationals.
    """
    a, b, c = (np.asarray(v, dtype=np.float64) for v in (a, b, c))
    a, b, c = np.broadcast_arrays(a, b, c)
    detleft = (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
    detright = (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])
    det = detleft - detright
    bound = _CCW_ERRBOUND * (np.abs(detleft) + np.abs(detright))
    sign = np.sign(det).astype(np.int8)
    unsure = np.abs(det) <= bound
    if np.any(unsure):
        for idx in zip(*np.nonzero(unsure)):
            sign[idx] = _orient_exact(
                a[idx][0], a[idx][1], b[idx][0], b[idx][1], c[idx][0], c[idx][1]
            )
    return sign


def _delaunay(pts):
    try:
        return Delaunay(pts).simplices
    except QhullError:
        pass
    # nearly flat clouds: rescale to the unit box and retry once
    try:
        return Delaunay(pts, qhull_options="Qbb Qc Qz Q12 QbB").simplices
    except QhullError as exc:
        raise GeometryError(
            "triangulation failed on numerically degenerate points: "
            + str(exc).strip().splitlines()[0]
        ) from None


def _all_collinear(points):
    p0 = points[0]
    far = np.argmax(np.sum((points - p0) ** 2, axis=1))
    if far == 0:
        return True
    return not np.any(orient2d(p0, points[far], points))


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-axis z-scoring fitted on a training cloud (population std, ddof=0)."""

    def fit(self, X, y=None):
        X = check_points_2d(X, min_points=2)
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)
        if np.any(self.scale_ == 0):
            bad = [i for i in range(2) if self.scale_[i] == 0]
            raise GeometryError(f"zero-variance axis {bad} cannot be standardized")
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        X = check_points_2d(X)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "scale_")
        X = check_points_2d(X)
        return X * self.scale_ + self.mean_


def fit_standardizer(points):
    return Standardizer().fit(points)


def circumradius(p, q, r):
    """Circumradius of triangles given as (..., 2) vertex arrays; inf when degenerate."""
    a = np.linalg.norm(q - r, axis=-1)
    b = np.linalg.norm(p - r, axis=-1)
    c = np.linalg.norm(p - q, axis=-1)
    cross = (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (
        r[..., 0] - p[..., 0]
    )
    area2 = np.abs(cross)
    with np.errstate(divide="ignore", invalid="ignore"):
        radius = a * b * c / (2.0 * area2)
    return np.where(area2 > 0, radius, np.inf)


class AlphaShape(BaseEstimator):
    """Alpha-shape (concave hull) of a 2-D point cloud.

    Parameters
    ----------
    alpha : float, default=0.1
        Shape parameter, interpreted per ``convention``.
    convention : {"inverse", "radius"}, default="inverse"
        ``"inverse"`` keeps triangles with circumradius < 1/alpha;
        ``"radius"`` keeps triangles with circumradius < alpha.

    Attributes
    ----------
    points_ : ndarray of shape (n_unique, 2)
        Deduplicated source points.
    triangles_ : ndarray of shape (n_kept, 3)
        Kept Delaunay triangles, vertices in counter-clockwise order.
    boundary_edges_ : ndarray of shape (n_edges, 2)
        Directed edges incident to exactly one kept triangle (interior on the left).
    isolated_ : ndarray
        Indices of source points not touched by any kept triangle; they are
        treated as zero-area components for containment and distance.
    """

    def __init__(self, alpha=0.1, convention="inverse"):
        self.alpha = alpha
        self.convention = convention

    def _radius_limit(self):
        if self.alpha < 0:
            raise GeometryError("alpha must be >= 0")
        if self.convention == "inverse":
            return np.inf if self.alpha == 0 else 1.0 / self.alpha
        if self.convention == "radius":
            return self.alpha
        raise GeometryError(
            f"unknown alpha convention {self.convention!r}; use one of {ALPHA_CONVENTIONS}"
        )

    def fit(self, X, y=None):
        X = check_points_2d(X)
        limit = self._radius_limit()
        pts, _ = unique_rows(X)
        if len(pts) < 3:
            raise GeometryError(f"alpha shape needs >= 3 distinct points, got {len(pts)}")
        if _all_collinear(pts):
            raise GeometryError("all points are collinear; alpha shape undefined")

        simplices = _delaunay(pts)
        orient = orient2d(pts[simplices[:, 0]], pts[simplices[:, 1]], pts[simplices[:, 2]])
        # Qhull may emit zero-area simplices on degenerate input
        simplices = simplices[orient != 0]
        orient = orient[orient != 0]
        cw = orient < 0
        simplices[cw] = simplices[cw][:, [0, 2, 1]]

        radii = circumradius(pts[simplices[:, 0]], pts[simplices[:, 1]], pts[simplices[:, 2]])
        keep = radii < limit
        self.points_ = pts
        self.triangles_ = simplices[keep]
        self.circumradii_ = radii[keep]
        self.boundary_edges_ = _boundary_edges(self.triangles_)
        touched = np.zeros(len(pts), dtype=bool)
        touched[self.triangles_.ravel()] = True
        self.isolated_ = np.flatnonzero(~touched)
        return self

    @property
    def area_(self):
        check_is_fitted(self, "triangles_")
        p = self.points_[self.triangles_]
        cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
            p[:, 1, 1] - p[:, 0, 1]
        ) * (p[:, 2, 0] - p[:, 0, 0])
        return float(np.sum(cross) / 2.0)

    def contains(self, X, chunk=2048):
        """True where a point lies inside or on a kept triangle (or equals an isolated vertex)."""
        check_is_fitted(self, "triangles_")
        X = check_points_2d(X)
        out = np.zeros(len(X), dtype=bool)
        if len(self.triangles_):
            tris = self.points_[self.triangles_]
            lo = tris.min(axis=1)
            hi = tris.max(axis=1)
            for start in range(0, len(X), chunk):
                q = X[start : start + chunk]
                # bounding-box prefilter, then exact orientation on candidates
                cand = np.all(
                    (q[:, None, :] >= lo[None]) & (q[:, None, :] <= hi[None]), axis=2
                )
                qi, ti = np.nonzero(cand)
                if qi.size == 0:
                    continue
                p = q[qi]
                t = tris[ti]
                inside = (
                    (orient2d(t[:, 0], t[:, 1], p) >= 0)
                    & (orient2d(t[:, 1], t[:, 2], p) >= 0)
                    & (orient2d(t[:, 2], t[:, 0], p) >= 0)
                )
                hit = np.zeros(len(q), dtype=bool)
                hit[qi[inside]] = True
                out[start : start + chunk] = hit
        if len(self.isolated_):
            iso = self.points_[self.isolated_]
            out |= np.any(np.all(X[:, None, :] == iso[None], axis=2), axis=1)
        return out

    predict = contains

    def boundary_distance(self, X, chunk=2048):
        """Euclidean distance to the nearest boundary edge (or isolated vertex)."""
        check_is_fitted(self, "triangles_")
        X = check_points_2d(X)
        a = self.points_[self.boundary_edges_[:, 0]]
        b = self.points_[self.boundary_edges_[:, 1]]
        if len(self.isolated_):
            iso = self.points_[self.isolated_]
            a = np.vstack([a, iso])
            b = np.vstack([b, iso])
        out = np.full(len(X), np.inf)
        if len(a) == 0:
            return out
        for start in range(0, len(X), chunk):
            out[start : start + chunk] = segment_distance(X[start : start + chunk], a, b).min(axis=1)
        return out

    def boundary_polylines(self):
        """Closed boundary walks as a list of (k, 2) arrays, one per component."""
        check_is_fitted(self, "triangles_")
        loops = _euler_loops(self.boundary_edges_)
        return [self.points_[loop] for loop in loops]


def segment_distance(P, A, B):
    """Distances from each point in ``P`` (m, 2) to each segment ``A[j]``-``B[j]``; shape (m, k)."""
    d = B - A
    len2 = np.einsum("ij,ij->i", d, d)
    rel = P[:, None, :] - A[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.einsum("mkj,kj->mk", rel, d) / len2
    t = np.where(len2 > 0, np.clip(t, 0.0, 1.0), 0.0)
    closest = A[None] + t[..., None] * d[None]
    return np.linalg.norm(P[:, None, :] - closest, axis=2)


def _boundary_edges(triangles):
    if len(triangles) == 0:
        return np.empty((0, 2), dtype=np.intp)
    directed = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    undirected = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(undirected, axis=0, return_inverse=True, return_counts=True)
    once = counts[inverse.ravel()] == 1
    edges = directed[once]
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return edges[order]


def _euler_loops(edges):
    """Split directed boundary edges into closed walks (Hierholzer)."""
    outgoing = {}
    for a, b in edges.tolist():
        outgoing.setdefault(a, []).append(b)
    for targets in outgoing.values():
        targets.sort(reverse=True)
    loops = []
    for start in sorted(outgoing):
        while outgoing[start]:
            stack, walk = [start], []
            while stack:
                v = stack[-1]
                if outgoing.get(v):
                    stack.append(outgoing[v].pop())
                else:
                    walk.append(stack.pop())
            loops.append(walk[::-1])
    return loops


def build_alpha_shape(points, alpha, convention="inverse"):
    return AlphaShape(alpha=alpha, convention=convention).fit(points)


def contains(shape, p):
    return bool(shape.contains(np.atleast_2d(p))[0])


def boundary_distance(shape, p):
    return float(shape.boundary_distance(np.atleast_2d(p))[0])


def write_boundary_csv(shape, path, transform=None):
    """Export the hull boundary as ``x,y,component_id`` rows.

    ``transform`` maps (k, 2) arrays before writing, e.g. a fitted
    standardizer's ``inverse_transform`` to get physical units back.
    """
    lines = ["x,y,component_id"]
    for cid, loop in enumerate(shape.boundary_polylines()):
        if transform is not None:
            loop = transform(loop)
        for x, y in np.asarray(loop).tolist():
            lines.append(f"{x!r},{y!r},{cid}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
