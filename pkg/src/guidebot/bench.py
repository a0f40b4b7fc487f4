"""Clustering benchmark: a fixed obstacle scene rasterized at several grid
resolutions, timed for both the grid method and the classical baseline, with
quality metrics and fitted scaling exponents."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .geometry import Point2D
from .perception import (
    BinaryGrid,
    ClusteringParams,
    GridGeometry,
    dbi,
    grid_dbscan,
    naive_dbscan,
    silhouette,
)

TIMINGS_HEADER = "n_cells,method,trial,micros,dbi,sil"
EXPONENTS_HEADER = "method,exponent"

# the scene spans the 15 m local window; ellipse sizes give ~5% occupancy
SCENE_WINDOW = 15.0
SCENE_OBSTACLES = (
    (2.5, 2.0, 1.1, 0.7, 0.4),
    (5.0, 11.5, 0.9, 0.9, 0.0),
    (7.5, 5.0, 1.4, 0.6, -0.7),
    (11.0, 2.5, 0.8, 0.8, 0.0),
    (12.0, 9.0, 1.2, 0.9, 1.1),
    (3.5, 7.5, 0.7, 0.6, 0.2),
    (9.0, 12.5, 1.0, 0.5, -0.3),
    (13.5, 13.0, 0.6, 0.6, 0.0),
)


def bench_scene(n_edge: int) -> BinaryGrid:
    """Rasterize the fixed scene onto an n_edge x n_edge grid."""
    res = SCENE_WINDOW / n_edge
    geo = GridGeometry(res, Point2D(0.0, 0.0))
    xs = (np.arange(n_edge) + 0.5) * res
    gx, gy = np.meshgrid(xs, xs)
    occ = np.zeros((n_edge, n_edge), dtype=bool)
    for x, y, a, b, th in SCENE_OBSTACLES:
        ct, st = math.cos(th), math.sin(th)
        dx, dy = gx - x, gy - y
        u = ct * dx + st * dy
        v = -st * dx + ct * dy
        occ |= (u / a) ** 2 + (v / b) ** 2 <= 1.0
    return BinaryGrid(occ, geo)


@dataclass
class BenchRow:
    n_cells: int
    method: str
    trial: int
    micros: float
    dbi: float
    sil: float

    def csv(self) -> str:
        return (
            f"{self.n_cells},{self.method},{self.trial},"
            f"{self.micros:.1f},{self.dbi:.6f},{self.sil:.6f}"
        )


def fit_exponent(sizes, times) -> float:
    """Least-squares slope of log(time) against log(cell count)."""
    logs = np.log(np.asarray(sizes, dtype=float))
    logt = np.log(np.asarray(times, dtype=float))
    slope, _ = np.polyfit(logs, logt, 1)
    return float(slope)


def run_bench(
    sizes, trials: int, params: ClusteringParams | None = None
) -> tuple[list[BenchRow], dict[str, float]]:
    """Time both methods on each size; returns per-trial rows and fitted
    exponents keyed by method."""
    if not sizes:
        raise ValueError("sizes must be non-empty")
    params = params or ClusteringParams(k=1, min_pts=3)
    rows: list[BenchRow] = []
    medians: dict[str, list[float]] = {"grid": [], "naive": []}
    for n_edge in sizes:
        grid = bench_scene(n_edge)
        centers = grid.occupied_centers()
        eps = params.k * grid.geometry.resolution
        n_cells = n_edge * n_edge

        def timed(fn):
            out = None
            samples = []
            for _ in range(trials):
                t0 = time.perf_counter_ns()
                out = fn()
                samples.append((time.perf_counter_ns() - t0) / 1e3)
            return out, samples

        grid_labels, grid_times = timed(lambda: grid_dbscan(grid, params))
        naive_labels, naive_times = timed(
            lambda: naive_dbscan(centers, eps, params.min_pts, metric="chebyshev")
        )
        flat = grid_labels[np.nonzero(grid.values)]
        metrics = {
            "grid": (dbi(centers, flat), silhouette(centers, flat)),
            "naive": (dbi(centers, naive_labels), silhouette(centers, naive_labels)),
        }
        for method, samples in (("grid", grid_times), ("naive", naive_times)):
            d, s = metrics[method]
            for trial, micros in enumerate(samples):
                rows.append(BenchRow(n_cells, method, trial, micros, d, s))
            medians[method].append(float(np.median(samples)))
    n_cells_list = [n * n for n in sizes]
    exponents = {
        method: fit_exponent(n_cells_list, ts) if len(ts) > 1 else float("nan")
        for method, ts in medians.items()
    }
    return rows, exponents


def write_bench_csv(path, rows: list[BenchRow]) -> None:
    with open(path, "w") as f:
        f.write(TIMINGS_HEADER + "\n")
        for r in rows:
            f.write(r.csv() + "\n")


def write_exponents_csv(path, exponents: dict[str, float]) -> None:
    with open(path, "w") as f:
        f.write(EXPONENTS_HEADER + "\n")
        for method in sorted(exponents):
            f.write(f"{method},{exponents[method]:.4f}\n")
