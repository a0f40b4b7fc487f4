"""Point-cloud to occupancy pipeline: elevation grid, Sobel gradient,
binarization, grid-window DBSCAN, a classical DBSCAN baseline, and the
DBI / silhouette clustering quality metrics."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import cdist

from .geometry import Point2D, mvee_fit, Ellipse

NOISE = -1
UNLABELED = 0


@dataclass(frozen=True, slots=True)
class GridGeometry:
    """Shared grid frame: `origin` is the world position of the lower-left
    corner of cell (0, 0); rows index y, columns index x."""

    resolution: float
    origin: Point2D

    def cell_center(self, row: int, col: int) -> Point2D:
        return Point2D(
            self.origin.x + (col + 0.5) * self.resolution,
            self.origin.y + (row + 0.5) * self.resolution,
        )

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (
            int(math.floor((y - self.origin.y) / self.resolution)),
            int(math.floor((x - self.origin.x) / self.resolution)),
        )


@dataclass(frozen=True)
class ElevationGrid:
    """Max-z elevation per cell; NaN marks cells containing no points."""

    values: np.ndarray
    geometry: GridGeometry

    def __post_init__(self) -> None:
        if self.values.ndim != 2 or self.values.size == 0:
            raise ValueError("elevation grid must be a non-empty 2D array")
        if not self.geometry.resolution > 0:
            raise ValueError("resolution must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class GradientGrid:
    values: np.ndarray
    geometry: GridGeometry


@dataclass(frozen=True)
class BinaryGrid:
    values: np.ndarray  # bool occupancy
    geometry: GridGeometry

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def occupied_centers(self) -> np.ndarray:
        """World coordinates of occupied cell centers in row-major order, (n, 2)."""
        rows, cols = np.nonzero(self.values)
        res = self.geometry.resolution
        return np.column_stack(
            [
                self.geometry.origin.x + (cols + 0.5) * res,
                self.geometry.origin.y + (rows + 0.5) * res,
            ]
        )


@dataclass(frozen=True, slots=True)
class ClusteringParams:
    """Window order k (radius eps = k * resolution) and the core-point count."""

    k: int = 1
    min_pts: int = 3

    def __post_init__(self) -> None:
        if self.k < 1 or self.min_pts < 1:
            raise ValueError("k and min_pts must be >= 1")


def build_elevation(
    cloud, window: float, resolution: float, robot_center: Point2D
) -> ElevationGrid:
    """Voxelize a 3D cloud into a max-z elevation grid covering the
    window x window square centered on the robot."""
    if window <= 0 or resolution <= 0:
        raise ValueError("window and resolution must be positive")
    n = int(round(window / resolution))
    origin = Point2D(robot_center.x - window / 2.0, robot_center.y - window / 2.0)
    values = np.full((n, n), np.nan)
    pts = np.asarray(cloud, dtype=float).reshape(-1, 3)
    if pts.shape[0]:
        cols = np.floor((pts[:, 0] - origin.x) / resolution).astype(int)
        rows = np.floor((pts[:, 1] - origin.y) / resolution).astype(int)
        keep = (rows >= 0) & (rows < n) & (cols >= 0) & (cols < n)
        rows, cols, z = rows[keep], cols[keep], pts[keep, 2]
        flat = np.full(n * n, -np.inf)
        np.maximum.at(flat, rows * n + cols, z)
        hit = flat > -np.inf
        values.ravel()[hit] = flat[hit]
    return ElevationGrid(values, GridGeometry(resolution, origin))


def sobel_gradient(elev: ElevationGrid) -> GradientGrid:
    """Per-cell magnitude of the 3x3 Sobel kernels (unnormalized).

    Empty cells count as ground level (0 m); borders replicate the edge row
    and column.
    """
    v = np.nan_to_num(elev.values, nan=0.0)
    gx = ndimage.sobel(v, axis=1, mode="nearest")
    gy = ndimage.sobel(v, axis=0, mode="nearest")
    return GradientGrid(np.hypot(gx, gy), elev.geometry)


def binarize(
    elev: ElevationGrid, grad: GradientGrid, q_th: float, s_th: float
) -> BinaryGrid:
    """Occupancy = elevation above q_th OR gradient above s_th."""
    if elev.values.shape != grad.values.shape:
        raise ValueError(
            f"shape mismatch: {elev.values.shape} vs {grad.values.shape}"
        )
    q = elev.values
    occupied = np.where(np.isnan(q), False, q > q_th) | (grad.values > s_th)
    return BinaryGrid(occupied, elev.geometry)


def _window_counts(occ: np.ndarray, k: int) -> np.ndarray:
    """Occupied-cell count in the (2k+1)^2 window of every cell, via an
    integral image; lookups are O(1) per cell."""
    h, w = occ.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(occ, axis=0, out=ii[1:, 1:])
    np.cumsum(ii[1:, 1:], axis=1, out=ii[1:, 1:])
    r0 = np.clip(np.arange(h) - k, 0, h)
    r1 = np.clip(np.arange(h) + k + 1, 0, h)
    c0 = np.clip(np.arange(w) - k, 0, w)
    c1 = np.clip(np.arange(w) + k + 1, 0, w)
    return (
        ii[np.ix_(r1, c1)] - ii[np.ix_(r0, c1)] - ii[np.ix_(r1, c0)] + ii[np.ix_(r0, c0)]
    )


def _dbscan_expand(occ, core, k, labels, queue):
    """Row-major scan with FIFO cluster expansion over window neighborhoods.

    Noise labels are reclaimed when a later cluster reaches the cell; already
    clustered cells are never relabeled, so the first cluster to reach a
    border cell keeps it. Written jit-compatible; compiled when numba is
    available.
    """
    h, w = occ.shape
    cid = 0
    for i in range(h):
        for j in range(w):
            if occ[i, j] == 0 or labels[i, j] != UNLABELED:
                continue
            if core[i, j] == 0:
                labels[i, j] = NOISE
                continue
            cid += 1
            labels[i, j] = cid
            head = 0
            tail = 0
            for qi in range(max(0, i - k), min(h, i + k + 1)):
                for qj in range(max(0, j - k), min(w, j + k + 1)):
                    if occ[qi, qj] != 0 and not (qi == i and qj == j):
                        queue[tail, 0] = qi
                        queue[tail, 1] = qj
                        tail += 1
            while head < tail:
                qi = queue[head, 0]
                qj = queue[head, 1]
                head += 1
                lab = labels[qi, qj]
                if lab == NOISE:
                    labels[qi, qj] = cid
                    continue
                if lab != UNLABELED:
                    continue
                labels[qi, qj] = cid
                if core[qi, qj] != 0:
                    for pi in range(max(0, qi - k), min(h, qi + k + 1)):
                        for pj in range(max(0, qj - k), min(w, qj + k + 1)):
                            if occ[pi, pj] != 0:
                                queue[tail, 0] = pi
                                queue[tail, 1] = pj
                                tail += 1
    return labels


try:
    from numba import njit as _njit

    _dbscan_expand = _njit(cache=True)(_dbscan_expand)
except ImportError:  # pragma: no cover - numba is a soft dependency
    pass


def grid_dbscan(grid: BinaryGrid, params: ClusteringParams) -> np.ndarray:
    """Density clustering on the occupancy grid.

    A cell is a core point iff its (2k+1)x(2k+1) window (self included) holds
    at least min_pts occupied cells. Cells are scanned row-major and clusters
    expand through a FIFO queue, so the labeling is deterministic.

    Returns an int array shaped like the grid: 0 for free cells, -1 for noise,
    cluster ids contiguous from 1.
    """
    occ = grid.values
    k = params.k
    counts = _window_counts(occ, k)
    core = occ & (counts >= params.min_pts)
    labels = np.zeros(occ.shape, dtype=np.int64)
    n_occ = int(occ.sum())
    if n_occ == 0:
        return labels
    # every core cell pushes at most its whole window, plus the seed pushes
    queue = np.empty((n_occ * (2 * k + 1) ** 2 + 1, 2), dtype=np.int64)
    return _dbscan_expand(
        occ.astype(np.uint8), core.astype(np.uint8), k, labels, queue
    )


def naive_dbscan(points, eps: float, min_pts: int, metric: str = "euclidean") -> np.ndarray:
    """Classical O(n^2) DBSCAN over 2D points; the equivalence oracle and the
    timing baseline. Returns per-point labels: -1 noise, ids from 1."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if metric not in ("euclidean", "chebyshev"):
        raise ValueError(f"unknown metric {metric!r}")
    pts = np.asarray(
        [[p.x, p.y] if isinstance(p, Point2D) else p for p in points], dtype=float
    ).reshape(-1, 2)
    n = pts.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    if n == 0:
        return labels

    if metric == "euclidean":
        def query(i: int) -> np.ndarray:
            d = pts - pts[i]
            return np.nonzero(d[:, 0] ** 2 + d[:, 1] ** 2 <= eps * eps)[0]
    else:
        def query(i: int) -> np.ndarray:
            d = np.abs(pts - pts[i])
            return np.nonzero(np.maximum(d[:, 0], d[:, 1]) <= eps)[0]

    cid = 0
    for i in range(n):
        if labels[i] != UNLABELED:
            continue
        neighbors = query(i)
        if neighbors.size < min_pts:
            labels[i] = NOISE
            continue
        cid += 1
        labels[i] = cid
        queue = deque(int(x) for x in neighbors if x != i)
        while queue:
            q = queue.popleft()
            if labels[q] == NOISE:
                labels[q] = cid
                continue
            if labels[q] != UNLABELED:
                continue
            labels[q] = cid
            nq = query(q)
            if nq.size >= min_pts:
                queue.extend(int(x) for x in nq)
    return labels


def _clusters_from_labels(points, labels) -> list[np.ndarray]:
    pts = np.asarray(
        [[p.x, p.y] if isinstance(p, Point2D) else p for p in points], dtype=float
    ).reshape(-1, 2)
    labels = np.asarray(labels).reshape(-1)
    if pts.shape[0] != labels.shape[0]:
        raise ValueError("points and labels must align")
    ids = sorted(int(c) for c in np.unique(labels) if c > 0)
    return [pts[labels == c] for c in ids]


def dbi(points, labels) -> float:
    """Davies-Bouldin index over the labeled clusters (noise excluded)."""
    clusters = _clusters_from_labels(points, labels)
    if len(clusters) < 2:
        raise ValueError("dbi requires at least 2 clusters")
    centroids = np.array([c.mean(axis=0) for c in clusters])
    scatter = np.array(
        [np.linalg.norm(c - mu, axis=1).mean() for c, mu in zip(clusters, centroids)]
    )
    n = len(clusters)
    total = 0.0
    for i in range(n):
        ratios = [
            (scatter[i] + scatter[j]) / np.linalg.norm(centroids[i] - centroids[j])
            for j in range(n)
            if j != i
        ]
        total += max(ratios)
    return total / n


def silhouette(points, labels) -> float:
    """Mean silhouette score over the labeled points (noise excluded).

    Points in singleton clusters contribute 0. Computation is chunked so large
    scenes do not materialize the full pairwise distance matrix.
    """
    clusters = _clusters_from_labels(points, labels)
    if len(clusters) < 2:
        raise ValueError("silhouette requires at least 2 clusters")
    pts = np.vstack(clusters)
    sizes = np.array([len(c) for c in clusters])
    member = np.repeat(np.arange(len(clusters)), sizes)
    n = pts.shape[0]
    scores = np.empty(n)
    chunk = max(1, int(4e6 // max(n, 1)))
    onehot = np.zeros((n, len(clusters)))
    onehot[np.arange(n), member] = 1.0
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        d = cdist(pts[s:e], pts)
        sums = d @ onehot  # (chunk, n_clusters) distance sums per cluster
        own = member[s:e]
        own_size = sizes[own]
        with np.errstate(invalid="ignore", divide="ignore"):
            a = sums[np.arange(e - s), own] / np.maximum(own_size - 1, 1)
            mean_other = sums / sizes[None, :]
            mean_other[np.arange(e - s), own] = np.inf
            b = mean_other.min(axis=1)
            sc = (b - a) / np.maximum(a, b)
        sc[own_size == 1] = 0.0
        scores[s:e] = sc
    return float(scores.mean())


@dataclass(frozen=True, slots=True)
class PerceptionParams:
    """Knobs for the full cloud -> ellipses chain."""

    window: float = 15.0
    resolution: float = 0.1
    q_th: float = 0.15
    s_th: float = 0.3
    clustering: ClusteringParams = field(default_factory=ClusteringParams)
    # cell quantization (resolution/2) dwarfs the ellipse dual gap, so the
    # online fit runs much looser than the geometry default
    mvee_tolerance: float = 3e-3

    @property
    def r_min(self) -> float:
        return self.resolution / 2.0


def cluster_ellipses(grid: BinaryGrid, labels: np.ndarray, params: PerceptionParams) -> list[Ellipse]:
    """Fit one enclosing ellipse per cluster id, from occupied cell centers."""
    out = []
    res = grid.geometry.resolution
    for cid in range(1, int(labels.max(initial=0)) + 1):
        rows, cols = np.nonzero(labels == cid)
        centers = np.column_stack(
            [
                grid.geometry.origin.x + (cols + 0.5) * res,
                grid.geometry.origin.y + (rows + 0.5) * res,
            ]
        )
        out.append(
            mvee_fit(centers, tolerance=params.mvee_tolerance, r_min=params.r_min)
        )
    return out


def perceive(cloud, robot_center: Point2D, params: PerceptionParams):
    """Full pipeline: cloud -> binary grid -> clusters -> ellipses.

    Returns (binary_grid, labels, ellipses)."""
    elev = build_elevation(cloud, params.window, params.resolution, robot_center)
    grad = sobel_gradient(elev)
    binary = binarize(elev, grad, params.q_th, params.s_th)
    labels = grid_dbscan(binary, params.clustering)
    return binary, labels, cluster_ellipses(binary, labels, params)


def load_cloud(path) -> np.ndarray:
    """Read a whitespace-separated 'x y z' text file, one point per line."""
    return np.loadtxt(path, dtype=float).reshape(-1, 3)
