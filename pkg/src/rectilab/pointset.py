"""Weighted point clouds standing in for n-regular sets.

A cloud is a finite list of weighted points approximating n-dimensional
Hausdorff measure on a set at a declared resolution. Generators are
deterministic; every measure-like query (projection measure, ball mass,
regularity constant) is a grid or ball count at a declared scale, so all
statements about clouds are scale-indexed and reproducible.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .grassmann import GrassmannBall, Subspace, sample_haar, sample_in_ball


class LipschitzViolationError(ValueError):
    def __init__(self, bound, observed, witness):
        self.bound = bound
        self.observed = observed
        self.witness = witness
        super().__init__(
            f"empirical Lipschitz constant {observed:.4g} exceeds the declared {bound:.4g} "
            f"between grid points {witness[0]} and {witness[1]}"
        )


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius

    def scaled(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor)


@dataclass(frozen=True, eq=False)
class RegularCloud:
    """Weighted points approximating H^n on a set at a stated resolution.

    Invariants (checked on construction unless ``validate=False``):
    total weight positive and finite, no two points closer than
    resolution/4, and every weight inside
    [resolution^n / density_constant, density_constant * resolution^n].
    """

    points: np.ndarray
    weights: np.ndarray
    n: int
    resolution: float
    density_constant: float = 8.0
    generator: str = "custom"
    params: dict = field(default_factory=dict)
    validate: bool = True

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if self.validate:
            self._check()

    def _check(self):
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights must have equal length")
        total = float(self.weights.sum())
        if not (0.0 < total < math.inf):
            raise ValueError("total weight must be finite and positive")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        lo = self.resolution**self.n / self.density_constant
        hi = self.density_constant * self.resolution**self.n
        live = self.weights[self.weights > 0]
        if live.size and (live.min() < lo - 1e-15 or live.max() > hi + 1e-15):
            raise ValueError(
                f"weights outside the uniform-density band [{lo:.3g}, {hi:.3g}]"
            )
        if len(self.points) > 1:
            pairs = cKDTree(self.points).query_pairs(self.resolution / 4.0)
            if pairs:
                i, j = next(iter(pairs))
                raise ValueError(f"points {i} and {j} are closer than resolution/4")

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    @property
    def diameter(self) -> float:
        lo, hi = self.bounding_box
        return float(np.linalg.norm(hi - lo))

    def ball_mass(self, ball: Ball) -> float:
        return float(self.weights[ball.contains(self.points)].sum())

    def enclosing_ball(self, factor: float = 1.0) -> Ball:
        lo, hi = self.bounding_box
        center = (lo + hi) / 2.0
        return Ball(center, factor * max(self.diameter / 2.0, self.resolution))

    def dilated(self, factor: float) -> "RegularCloud":
        return replace(
            self,
            points=self.points * factor,
            weights=self.weights * factor**self.n,
            resolution=self.resolution * factor,
        )

    def rotated(self, g: np.ndarray) -> "RegularCloud":
        return replace(self, points=self.points @ np.asarray(g, dtype=float).T)


@dataclass(frozen=True)
class RegularityReport:
    C0_estimate: float
    worst_ball: Ball
    samples: int

    def __post_init__(self):
        if self.C0_estimate < 1.0:
            raise ValueError("a regularity constant is always >= 1")


def _merge_close_points(points: np.ndarray, weights: np.ndarray, radius: float):
    """Union points closer than ``radius``, summing weights (dedup contract)."""
    tree = cKDTree(points)
    parent = np.arange(len(points))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in tree.query_pairs(radius):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
    roots = np.array([find(i) for i in range(len(points))])
    out_pts, out_w = [], []
    for r in np.unique(roots):
        mask = roots == r
        w = weights[mask].sum()
        out_pts.append(points[mask][np.argmax(weights[mask])])
        out_w.append(w)
    return np.array(out_pts), np.array(out_w)


def four_corners(k: int) -> RegularCloud:
    """Generation-k four-corners Cantor cloud in the unit square.

    4^k points at the centres of the generation-k corner squares (side
    4^-k), each carrying weight 4^-k; total mass 1.
    """
    if not 1 <= k <= 8:
        raise ValueError("generation k must be in 1..8")
    offsets = np.array([[0.0, 0.0]])
    for g in range(1, k + 1):
        step = 3.0 * 4.0**-g
        shifts = np.array([[0.0, 0.0], [step, 0.0], [0.0, step], [step, step]])
        offsets = (offsets[:, None, :] + shifts[None, :, :]).reshape(-1, 2)
    side = 4.0**-k
    centers = offsets + side / 2.0
    weights = np.full(len(centers), 4.0**-k)
    return RegularCloud(
        centers, weights, n=1, resolution=side, generator="four-corners", params={"k": k}
    )


def hrycak(m: int) -> RegularCloud:
    """Iterated subdivide-and-rotate segment cloud with small projections.

    Starting from the unit segment, repeat m times: split every segment into
    m equal pieces and rotate each piece by 2*pi/m about its own left
    endpoint (rotations accumulate across stages, pieces keep their left
    endpoints). The result is m^m segments of length m^-m, sampled at one
    point per segment.
    """
    if not 2 <= m <= 5:
        raise ValueError("m must be in 2..5")
    angle_step = 2.0 * math.pi / m
    # segment = (start point, angle); all segments share a common length per stage
    starts = np.array([[0.0, 0.0]])
    angles = np.array([0.0])
    length = 1.0
    for _ in range(m):
        piece = length / m
        direction = np.column_stack([np.cos(angles), np.sin(angles)])
        new_starts = (
            starts[:, None, :] + direction[:, None, :] * (np.arange(m) * piece)[None, :, None]
        ).reshape(-1, 2)
        new_angles = np.repeat(angles + angle_step, m)
        starts, angles, length = new_starts, new_angles, piece
    mids = starts + 0.5 * length * np.column_stack([np.cos(angles), np.sin(angles)])
    weights = np.full(len(mids), length)
    pts, w = _merge_close_points(mids, weights, length / 4.0)
    return RegularCloud(
        pts, w, n=1, resolution=length, density_constant=2.0 * m**2,
        generator="hrycak", params={"m": m},
    )


def segment(resolution: float = 1e-3, length: float = 1.0) -> RegularCloud:
    """Unit-density segment on the x-axis, sampled at cell centres."""
    cells = max(1, round(length / resolution))
    h = length / cells
    xs = (np.arange(cells) + 0.5) * h
    pts = np.column_stack([xs, np.zeros(cells)])
    return RegularCloud(
        pts, np.full(cells, h), n=1, resolution=h,
        generator="segment", params={"length": length},
    )


def circle(resolution: float = 2e-3, radius: float = 1.0) -> RegularCloud:
    """Circle of the given radius centred at the origin, arclength weights."""
    count = max(8, round(2.0 * math.pi * radius / resolution))
    theta = 2.0 * math.pi * np.arange(count) / count
    pts = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    h = 2.0 * math.pi * radius / count
    return RegularCloud(
        pts, np.full(count, h), n=1, resolution=h,
        generator="circle", params={"radius": radius},
    )


def lipschitz_graph_cloud(
    f,
    v: Subspace,
    lipschitz_bound: float,
    resolution: float,
    box: tuple[float, float] | np.ndarray = (0.0, 1.0),
) -> RegularCloud:
    """Cloud sampling the graph of ``f`` over the subspace ``v``.

    ``f`` maps n-vectors of v-coordinates to (d-n)-vectors of coordinates in
    a fixed orthonormal basis of the complement. Grid cells of side
    ``resolution`` tile the coordinate box; each sample carries the graph
    area element of its cell, estimated from finite differences. The
    empirical Lipschitz constant over the grid is checked against the
    declared bound.
    """
    n, d = v.n, v.d
    comp = v.complement()
    box = np.asarray(box, dtype=float)
    if box.ndim == 1:
        box = np.tile(box, (n, 1))
    cells = [max(1, round((hi - lo) / resolution)) for lo, hi in box]
    axes = [(lo + (np.arange(c) + 0.5) * (hi - lo) / c) for (lo, hi), c in zip(box, cells)]
    steps = [(hi - lo) / c for (lo, hi), c in zip(box, cells)]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=-1)  # (N, n)
    values = np.array([np.atleast_1d(np.asarray(f(t), dtype=float)) for t in coords])

    grid_shape = tuple(cells)
    vals_grid = values.reshape(grid_shape + (d - n,))
    grads = []
    worst = (0.0, None)
    for axis in range(n):
        diff = np.diff(vals_grid, axis=axis)
        slopes = np.linalg.norm(diff, axis=-1) / steps[axis]
        if slopes.size:
            idx = np.unravel_index(np.argmax(slopes), slopes.shape)
            if slopes[idx] > worst[0]:
                lo_idx = list(idx)
                hi_idx = list(idx)
                hi_idx[axis] += 1
                worst = (
                    float(slopes[idx]),
                    (
                        np.array([axes[a][lo_idx[a]] for a in range(n)]),
                        np.array([axes[a][hi_idx[a]] for a in range(n)]),
                    ),
                )
        grad = np.gradient(vals_grid, axes[axis], axis=axis)
        grads.append(np.linalg.norm(np.atleast_1d(grad), axis=-1).reshape(-1))
    if worst[0] > lipschitz_bound * (1.0 + 1e-9):
        raise LipschitzViolationError(lipschitz_bound, worst[0], worst[1])

    grad_sq = np.zeros(len(coords))
    for g in grads:
        grad_sq += g**2
    cell_volume = float(np.prod(steps))
    area = np.sqrt(1.0 + grad_sq) * cell_volume
    pts = coords @ v.basis.T + values @ comp.basis.T
    density_c = max(8.0, 4.0 * math.sqrt(1.0 + lipschitz_bound**2) * (max(steps) / resolution) ** n)
    return RegularCloud(
        pts, area, n=n, resolution=resolution, density_constant=density_c,
        generator="graph", params={"lipschitz": lipschitz_bound},
    )


def estimate_regularity(cloud: RegularCloud, trials: int, rng: np.random.Generator) -> RegularityReport:
    """Randomised scan for the n-regularity constant of a cloud.

    Samples centres from the cloud (weighted) and radii log-uniformly in
    [4 * resolution, diam]; the estimate is the worst ratio between ball
    mass and r^n in either direction.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    r_lo = 4.0 * cloud.resolution
    r_hi = max(cloud.diameter, r_lo * (1.0 + 1e-9))
    prob = cloud.weights / cloud.total_weight
    idx = rng.choice(len(cloud.points), size=trials, p=prob)
    radii = np.exp(rng.uniform(math.log(r_lo), math.log(r_hi), size=trials))
    tree = cKDTree(cloud.points)
    worst, worst_ball = 1.0, Ball(cloud.points[idx[0]], radii[0])
    for i, r in zip(idx, radii):
        center = cloud.points[i]
        mass = float(cloud.weights[tree.query_ball_point(center, r)].sum())
        if mass <= 0:
            continue
        ratio = max(mass / r**cloud.n, r**cloud.n / mass)
        if ratio > worst:
            worst, worst_ball = ratio, Ball(center, float(r))
    return RegularityReport(C0_estimate=worst, worst_ball=worst_ball, samples=trials)


def projection_measure(
    cloud: RegularCloud, v: Subspace, ball: Ball, grid_resolution: float
) -> float:
    """Outer estimate of the measure of the shadow of ``cloud ∩ ball`` on ``v``.

    Projects the in-ball points to v-coordinates, bins them into half-open
    grid cells of side ``grid_resolution``, and returns occupied cells times
    cell volume.
    """
    if grid_resolution < cloud.resolution:
        raise ValueError("grid_resolution must be at least the cloud resolution")
    mask = ball.contains(cloud.points)
    if not mask.any():
        return 0.0
    coords = cloud.points[mask] @ v.basis  # (m, n)
    cells = np.floor(coords / grid_resolution).astype(np.int64)
    occupied = len(np.unique(cells, axis=0))
    return float(occupied) * grid_resolution**v.n


def _pca_direction(cloud: RegularCloud, ball: Ball, n: int) -> Subspace:
    mask = ball.contains(cloud.points)
    pts = cloud.points[mask]
    w = cloud.weights[mask]
    if len(pts) <= n:
        return Subspace.axis(cloud.d, *range(n))
    mean = np.average(pts, axis=0, weights=w)
    cov = (w[:, None] * (pts - mean)).T @ (pts - mean)
    vals, vecs = np.linalg.eigh(cov)
    return Subspace(vecs[:, np.argsort(vals)[::-1][:n]])


def pbp_margin(
    cloud: RegularCloud,
    ball: Ball,
    delta: float,
    n_directions: int,
    rng: np.random.Generator,
    n_candidates: int = 8,
    grid_resolution: float | None = None,
) -> tuple[Subspace, float]:
    """Best plenty-of-big-projections margin over sampled centre planes.

    For each candidate centre V0 (the weighted PCA plane first, then Haar
    samples), the margin is
    ``min over n_directions samples V in B(V0, delta) of shadow/r^n - delta``.
    Returns the candidate with the largest margin; the margin is negative
    when no candidate certifies the projection bound everywhere in its ball.
    """
    if n_directions < 16:
        raise ValueError("n_directions must be >= 16")
    g = grid_resolution if grid_resolution is not None else cloud.resolution
    n = cloud.n
    candidates = [_pca_direction(cloud, ball, n)]
    candidates += [sample_haar(cloud.d, n, rng) for _ in range(n_candidates - 1)]
    best_v0, best_margin = candidates[0], -math.inf
    rn = ball.radius**n
    for v0 in candidates:
        gball = GrassmannBall(v0, delta)
        margin = math.inf
        for _ in range(n_directions):
            v = sample_in_ball(gball, rng)
            margin = min(margin, projection_measure(cloud, v, ball, g) / rn - delta)
            if margin < best_margin:
                break
        if margin > best_margin:
            best_v0, best_margin = v0, margin
    return best_v0, float(best_margin)


def check_pbp(
    cloud: RegularCloud,
    ball: Ball,
    delta: float,
    n_directions: int,
    rng: np.random.Generator,
    n_candidates: int = 8,
    grid_resolution: float | None = None,
):
    """Search for a witness ball of directions with uniformly big shadows.

    Returns (V0, margin) with margin >= 0 when a witness is found, else None
    (absence of a witness is a value, not an error).
    """
    v0, margin = pbp_margin(
        cloud, ball, delta, n_directions, rng, n_candidates, grid_resolution
    )
    if margin >= 0.0:
        return v0, margin
    return None


def graph_overlap(cloud: RegularCloud, graph_cloud: RegularCloud, ball: Ball) -> float:
    """Weight of in-ball cloud points lying on the graph cloud, at matched scale.

    The matching tolerance is twice the coarser of the two resolutions.
    """
    if cloud.d != graph_cloud.d:
        raise ValueError("clouds must share the ambient dimension")
    tol = 2.0 * max(cloud.resolution, graph_cloud.resolution)
    mask = ball.contains(cloud.points)
    if not mask.any():
        return 0.0
    tree = cKDTree(graph_cloud.points)
    dist, _ = tree.query(cloud.points[mask], k=1)
    return float(cloud.weights[mask][dist <= tol].sum())


def save_cloud(cloud: RegularCloud, path: str | Path, seed: int | None = None):
    """CSV with header x1..xd,weight plus a JSON sidecar of the metadata."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(cloud.d)] + ["weight"])
        for p, w in zip(cloud.points, cloud.weights):
            writer.writerow([repr(float(x)) for x in p] + [repr(float(w))])
    sidecar = {
        "n": cloud.n,
        "resolution": cloud.resolution,
        "generator": cloud.generator,
        "params": cloud.params,
        "seed": seed,
        "density_constant": cloud.density_constant,
    }
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)


def load_cloud(path: str | Path) -> RegularCloud:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(x) for x in row] for row in rows[1:]])
    with open(path.with_suffix(path.suffix + ".json")) as fh:
        meta = json.load(fh)
    return RegularCloud(
        data[:, :-1],
        data[:, -1],
        n=meta["n"],
        resolution=meta["resolution"],
        density_constant=meta.get("density_constant", 8.0),
        generator=meta.get("generator", "file"),
        params=meta.get("params", {}),
    )
