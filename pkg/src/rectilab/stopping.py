"""Weighted-ball stopping algorithm on shifted dyadic systems.

Everything is evaluated on a regular grid over the unit cube at a declared
depth, so integrals are finite sums and every claimed inequality is an exact
finite assertion. The pieces: a family of 2^d one-third-shifted dyadic cube
systems such that every ball has a containing cube of comparable volume, a
weight profile transferring ball weights to cubes, the centred
Hardy-Littlewood maximal function with dyadic radii, and the stopping
recursion that extracts disjoint cubes carrying a definite fraction of the
high-level mass at high density.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .grassmann import unit_ball_volume

MAX_GENERATIONS = 40


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class BallFamily:
    """Weighted balls inside the unit cube, the carrier of f = sum w_B 1_B."""

    centers: np.ndarray
    radii: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        r = np.asarray(self.radii, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "weights", w)
        if not (len(c) == len(r) == len(w)):
            raise ValueError("centers, radii, weights must have equal length")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(r <= 0):
            raise ValueError("radii must be positive")
        if np.any(c - r[:, None] < -1e-12) or np.any(c + r[:, None] > 1.0 + 1e-12):
            raise ValueError("every ball must lie inside the unit cube")

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    def __len__(self) -> int:
        return len(self.radii)

    def volumes(self) -> np.ndarray:
        return unit_ball_volume(self.d) * self.radii**self.d


@dataclass
class GridFunction:
    """Nonnegative function sampled at the cell centres of a 2^depth grid."""

    values: np.ndarray
    depth: int

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def cell_size(self) -> float:
        return 2.0**-self.depth

    @property
    def cell_volume(self) -> float:
        return self.cell_size**self.d

    def l1(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    @classmethod
    def zeros(cls, d: int, depth: int) -> "GridFunction":
        return cls(np.zeros((2**depth,) * d), depth)

    @classmethod
    def from_balls(cls, family: BallFamily, depth: int, subset=None) -> "GridFunction":
        g = cls.zeros(family.d, depth)
        idx = range(len(family)) if subset is None else subset
        for i in idx:
            sel = _cells_in_ball(family.centers[i], family.radii[i], depth, family.d)
            if sel is not None:
                g.values[sel] += family.weights[i]
        return g


def _axis_centers(depth: int) -> np.ndarray:
    h = 2.0**-depth
    return (np.arange(2**depth) + 0.5) * h


def _cells_in_ball(center, radius, depth, d):
    """Boolean mask (or None) of grid cells whose centres lie in the ball."""
    h = 2.0**-depth
    size = 2**depth
    los, his = [], []
    for j in range(d):
        lo = max(0, int(math.ceil((center[j] - radius) / h - 0.5)))
        hi = min(size - 1, int(math.floor((center[j] + radius) / h - 0.5)))
        if lo > hi:
            return None
        los.append(lo)
        his.append(hi)
    axes = [_axis_centers(depth)[lo : hi + 1] for lo, hi in zip(los, his)]
    mesh = np.meshgrid(*axes, indexing="ij")
    dist2 = sum((m - center[j]) ** 2 for j, m in enumerate(mesh))
    inside = dist2 <= radius**2
    if not inside.any():
        return None
    mask = np.zeros((size,) * d, dtype=bool)
    window = tuple(slice(lo, hi + 1) for lo, hi in zip(los, his))
    mask[window] = inside
    return mask


def grid_ball_volume(center, radius, depth, d) -> float:
    mask = _cells_in_ball(center, radius, depth, d)
    return 0.0 if mask is None else float(mask.sum()) * 2.0 ** (-depth * d)


# -- adjacent dyadic systems ------------------------------------------------


@dataclass(frozen=True)
class SystemCube:
    system: int
    level: int
    cell: tuple[int, ...]

    @property
    def side(self) -> float:
        return 2.0**-self.level

    def volume(self, d: int) -> float:
        return self.side**d


class AdjacentSystems:
    """2^d dyadic systems shifted by one-third offsets per coordinate.

    Grid points of the shifted and unshifted systems at scale 2^-k stay
    2^-k/3 apart, so every ball is contained in a cube of one of the systems
    with volume at most ``covering_constant`` times the ball volume.
    """

    def __init__(self, d: int):
        if d > 4:
            raise ValueError("supported ambient dimensions are 1..4")
        self.d = d
        self.shifts = [
            np.array([(1.0 / 3.0) * ((i >> j) & 1) for j in range(d)]) for i in range(2**d)
        ]
        # side <= 24 r  =>  |R| <= (24 r)^d = covering_constant * |B|
        self.covering_constant = 24.0**d / unit_ball_volume(d)

    def __len__(self):
        return len(self.shifts)

    def bounds(self, cube: SystemCube):
        shift = self.shifts[cube.system]
        lo = shift + np.array(cube.cell, dtype=float) * cube.side
        return lo, lo + cube.side

    def contains_ball(self, cube: SystemCube, center, radius) -> bool:
        lo, hi = self.bounds(cube)
        return bool(np.all(center - radius >= lo - 1e-15) and np.all(center + radius <= hi + 1e-15))

    def cube_of(self, system: int, point, level: int) -> SystemCube:
        shift = self.shifts[system]
        cell = tuple(int(c) for c in np.floor((np.asarray(point) - shift) * 2.0**level))
        return SystemCube(system, level, cell)

    def parent(self, cube: SystemCube) -> SystemCube:
        return SystemCube(cube.system, cube.level - 1, tuple(c >> 1 for c in cube.cell))

    def locate(self, center, radius) -> tuple[SystemCube, float]:
        """Smallest system cube containing the ball, with the achieved ratio.

        The returned cube R satisfies B ⊂ R and |R| <= covering_constant *
        |B|; the second return value is the achieved |R| / |B|.
        """
        center = np.asarray(center, dtype=float)
        if np.any(center - radius < -1e-12) or np.any(center + radius > 1.0 + 1e-12):
            raise ValueError("ball is not inside the unit cube")
        k_max = max(0, int(math.floor(-math.log2(2.0 * radius))))
        ball_volume = unit_ball_volume(self.d) * radius**self.d
        for level in range(k_max, -1, -1):
            for system in range(len(self.shifts)):
                cube = self.cube_of(system, center, level)
                if self.contains_ball(cube, center, radius):
                    ratio = cube.volume(self.d) / ball_volume
                    if ratio <= self.covering_constant + 1e-9:
                        return cube, ratio
        raise AssertionError("one-third-shift covering failed; unreachable for admissible balls")

    def related_cubes(self, center, radius, located: SystemCube) -> list[SystemCube]:
        """All cubes of the located system containing B with comparable volume."""
        ball_volume = unit_ball_volume(self.d) * radius**self.d
        out = []
        cube = located
        while cube.volume(self.d) <= self.covering_constant * ball_volume + 1e-15:
            if self.contains_ball(cube, center, radius):
                out.append(cube)
            if cube.level == 0:
                break
            cube = self.parent(cube)
        return out


def adjacent_systems(d: int) -> AdjacentSystems:
    return AdjacentSystems(d)


def weight_profile(family: BallFamily, systems: AdjacentSystems) -> dict[SystemCube, float]:
    """Cube weights: each ball contributes to the comparable-volume cubes of
    its assigned system (one assignment per ball, via ``locate``)."""
    out: dict[SystemCube, float] = {}
    for i in range(len(family)):
        located, _ = systems.locate(family.centers[i], family.radii[i])
        for cube in systems.related_cubes(family.centers[i], family.radii[i], located):
            out[cube] = out.get(cube, 0.0) + float(family.weights[i])
    return out


# -- maximal function --------------------------------------------------------

_KERNEL_CACHE: dict = {}


def _ball_kernel(d: int, depth: int, radius: float):
    key = (d, depth, radius)
    if key in _KERNEL_CACHE:
        return _KERNEL_CACHE[key]
    h = 2.0**-depth
    reach = int(math.floor(radius / h + 0.5))
    offsets = np.arange(-reach, reach + 1) * h
    mesh = np.meshgrid(*([offsets] * d), indexing="ij")
    kernel = (sum(m**2 for m in mesh) <= radius**2).astype(float)
    _KERNEL_CACHE[key] = kernel
    return kernel


def maximal_function(f: GridFunction) -> GridFunction:
    """Centred Hardy-Littlewood maximal function with dyadic radii.

    At each cell centre, the max over radii r in {2^-k : k = 0..depth+1} of
    the average of f over the grid cells within distance r (cells beyond the
    unit cube count as zeros). The smallest radius reproduces the cell value,
    so the result dominates f pointwise.
    """
    if np.any(f.values < 0):
        raise ValueError("the maximal function is defined for nonnegative grids")
    best = f.values.copy()  # radius 2^-(depth+1): the cell itself
    for k in range(0, f.depth + 1):
        radius = 2.0**-k
        kernel = _ball_kernel(f.d, f.depth, radius)
        if kernel.size == 1:
            avg = f.values
        else:
            avg = fftconvolve(f.values, kernel, mode="same") / kernel.sum()
            np.maximum(avg, 0.0, out=avg)
        np.maximum(best, avg, out=best)
    return GridFunction(best, f.depth)


# -- the stopping algorithm ---------------------------------------------------


@dataclass(frozen=True)
class StoppingConfig:
    """Parameter block: threshold N, density target M, exponent gamma >= 1,
    mass constant c, dimensional constant A, and the guarantee switch."""

    N: float
    M: float
    gamma: int = 1
    c: float = 1.0
    A: float = 1.0
    guarantee: bool = False

    def __post_init__(self):
        if self.gamma < 1 or self.M < 1 or self.N <= 0 or self.c <= 0 or self.A < 1:
            raise ConfigurationError("need gamma >= 1, M >= 1, N > 0, c > 0, A >= 1")
        if self.guarantee:
            bound = self.A ** ((self.gamma + 1) ** 2) * self.M ** (self.gamma + 2) / self.c
            if not self.N > bound:
                raise ConfigurationError(
                    f"guarantee mode needs N > A^(gamma+1)^2 M^(gamma+2) / c = {bound:.6g}"
                )


def relation_constant(d: int) -> float:
    """Upper bound for sum of related-cube volumes over the ball volume."""
    systems = AdjacentSystems(d)
    return systems.covering_constant / (1.0 - 2.0**-d)


def recommended_A(d: int, gamma: int) -> float:
    """Dimensional constant sufficient for guarantee-mode termination.

    Derived from the generation mass bound with 2^d systems and the declared
    relation constant; valid when every ball covers enough grid cells that
    its grid volume is at least half its true volume.
    """
    s = 2**d
    aw = 2.0 * relation_constant(d)
    return float(math.ceil(3.0 * (2.0 * s * aw) ** (1.0 / (gamma + 1))))


@dataclass
class HeavyCubesResult:
    status: str                         # early_exit | heavy_found | vacuous | exhausted
    heavy: list[SystemCube]
    f_masses: dict[SystemCube, float]   # L1 norms of the full sub-functions
    trace: dict
    checks: dict
    config: StoppingConfig
    grid_depth: int

    @property
    def vacuous(self) -> bool:
        return self.status == "vacuous"

    def export_trace(self, path: str | Path):
        with open(path, "w") as fh:
            json.dump(self.trace, fh, indent=2, sort_keys=True, default=_json_cube)


def _json_cube(obj):
    if isinstance(obj, SystemCube):
        return {"system": obj.system, "level": obj.level, "cell": list(obj.cell)}
    raise TypeError(type(obj))


def _closure_tree(weight_keys: list[SystemCube], systems: AdjacentSystems):
    """Ancestor closure of the weighted cubes, as child links plus roots."""
    children: dict[SystemCube, set[SystemCube]] = {}
    roots: set[SystemCube] = set()
    seen: set[SystemCube] = set()
    for key in weight_keys:
        node = key
        while True:
            if node.level == 0:
                roots.add(node)
                if node in seen:
                    break
                seen.add(node)
                break
            parent = systems.parent(node)
            children.setdefault(parent, set()).add(node)
            if node in seen:
                break
            seen.add(node)
            node = parent
    return {k: sorted(v, key=lambda c: (c.level, c.cell)) for k, v in children.items()}, sorted(
        roots, key=lambda c: (c.level, c.cell)
    )


def _generation_cubes(starts, weights, children, threshold, inclusive_start):
    """Maximal cubes whose inclusive weighted ancestry reaches the threshold.

    ``starts`` are (cube, initial sum) pairs; descending from each start, the
    cumulative sum of cube weights first reaching ``threshold`` marks a
    stopping cube (coarse-to-fine, lexicographic per level by scanning order).
    """
    out = []
    stack = list(starts)
    while stack:
        node, acc = stack.pop()
        acc = acc + weights.get(node, 0.0)
        if acc >= threshold:
            out.append(node)
            continue
        for child in children.get(node, ()):
            stack.append((child, acc))
    return sorted(out, key=lambda c: (c.level, c.cell))


def heavy_cubes(family: BallFamily, config: StoppingConfig, grid_depth: int) -> HeavyCubesResult:
    """Extract disjoint dyadic cubes carrying dense, substantial mass.

    Grid rendering of the stopping-time argument: if the total mass exceeds
    M the unit cube alone is the answer; otherwise the balls are assigned to
    shifted dyadic systems, the system carrying the largest high-level mass
    is selected, and generations of maximal cubes are peeled off at
    thresholds N_k = floor(N_w / 2^k) until the heavy cubes of some
    generation carry a 2^-k fraction of the high-level mass. The returned
    family satisfies, exactly as grid sums,

        sum_R ||f_R||_1  >=  c 2^(-2(gamma+1)) N^-gamma   and
        ||f_R||_1        >   M |R|  for every returned R,

    whenever the run is not labeled vacuous. The working high-level set is
    {f_i >= N / #systems} on the selected system's function; the maximal
    function version of the hypothesis is evaluated and reported alongside.
    """
    d = family.d
    systems = adjacent_systems(d)
    s = len(systems)
    f = GridFunction.from_balls(family, grid_depth)
    cellvol = f.cell_volume
    n, m_target, gamma, c = config.N, config.M, config.gamma, config.c
    conclusion_floor = c * 2.0 ** (-2 * (gamma + 1)) * n**-gamma

    grid_volumes = np.array(
        [grid_ball_volume(family.centers[i], family.radii[i], grid_depth, d) for i in range(len(family))]
    )
    visible = grid_volumes > 0

    mf = maximal_function(f)
    hyp_mf_mass = float(f.values[mf.values >= n].sum() * cellvol)

    checks: dict = {"hypothesis_mf_mass": hyp_mf_mass, "hypothesis_mf_ok": hyp_mf_mass >= c * n**-gamma}
    trace: dict = {
        "systems": s,
        "grid_depth": grid_depth,
        "invisible_balls": int((~visible).sum()),
        "generations": [],
    }

    def full_norm(cube: SystemCube) -> float:
        lo, hi = systems.bounds(cube)
        inside = np.all(family.centers - family.radii[:, None] >= lo - 1e-15, axis=1) & np.all(
            family.centers + family.radii[:, None] <= hi + 1e-15, axis=1
        )
        return float((family.weights[inside] * grid_volumes[inside]).sum())

    # early exit: the unit cube already has density above M
    if f.l1() > m_target:
        cube = SystemCube(0, 0, (0,) * d)
        masses = {cube: f.l1()}
        checks["density_ok"] = masses[cube] > m_target * cube.volume(d)
        checks["mass_retention_ok"] = masses[cube] >= conclusion_floor
        trace["early_exit"] = True
        return HeavyCubesResult("early_exit", [cube], masses, trace, checks, config, grid_depth)

    if config.guarantee:
        needed = recommended_A(d, gamma)
        if config.A < needed:
            raise ConfigurationError(
                f"guarantee mode needs A >= {needed:.0f} in dimension {d} (got {config.A})"
            )

    # assignment and pigeonholing over systems
    assigned: dict[int, list[int]] = {i: [] for i in range(s)}
    for i in np.flatnonzero(visible):
        located, _ = systems.locate(family.centers[i], family.radii[i])
        assigned[located.system].append(int(i))
    n_working = n / s
    best = None
    for i in range(s):
        fi = GridFunction.from_balls(family, grid_depth, subset=assigned[i])
        high = fi.values >= n_working
        theta = float(fi.values[high].sum() * cellvol)
        if best is None or theta > best[1]:
            best = (i, theta, fi, high)
    istar, theta, fi, high = best
    trace["selected_system"] = istar
    trace["theta"] = theta
    checks["hypothesis_working_ok"] = theta >= c * n**-gamma

    if not checks["hypothesis_working_ok"]:
        return HeavyCubesResult("vacuous", [], {}, trace, checks, config, grid_depth)

    ball_idx = np.array(assigned[istar], dtype=int)
    centers, radii = family.centers[ball_idx], family.radii[ball_idx]
    weights_arr, gvols = family.weights[ball_idx], grid_volumes[ball_idx]

    wmap: dict[SystemCube, float] = {}
    for pos, i in enumerate(ball_idx):
        located, _ = systems.locate(family.centers[i], family.radii[i])
        for cube in systems.related_cubes(family.centers[i], family.radii[i], located):
            wmap[cube] = wmap.get(cube, 0.0) + float(family.weights[i])
    children, roots = _closure_tree(list(wmap), systems)

    def system_norm(cube: SystemCube) -> float:
        lo, hi = systems.bounds(cube)
        inside = np.all(centers - radii[:, None] >= lo - 1e-15, axis=1) & np.all(
            centers + radii[:, None] <= hi + 1e-15, axis=1
        )
        return float((weights_arr[inside] * gvols[inside]).sum())

    def high_mass(cube: SystemCube) -> float:
        lo, hi = systems.bounds(cube)
        window = _cell_window(lo, hi, grid_depth, d)
        if window is None:
            return 0.0
        vals = fi.values[window]
        return float(vals[high[window] if isinstance(high, np.ndarray) else high].sum() * cellvol)

    def _cell_window(lo, hi, depth, dim):
        size = 2**depth
        h = 2.0**-depth
        sl = []
        for j in range(dim):
            a = max(0, int(math.ceil(lo[j] / h - 0.5)))
            b = min(size - 1, int(math.floor(hi[j] / h - 0.5 - 1e-12)))
            if a > b:
                return None
            sl.append(slice(a, b + 1))
        return tuple(sl)

    # rebind; the closure above needs the helper defined first
    def high_mass(cube: SystemCube) -> float:  # noqa: F811
        lo, hi = systems.bounds(cube)
        window = _cell_window(lo, hi, grid_depth, d)
        if window is None:
            return 0.0
        block_vals = fi.values[window]
        block_high = high[window]
        return float(block_vals[block_high].sum() * cellvol)

    mass_constant = relation_constant(d)
    threshold_product = 1.0
    prior_light_high = None
    starts = [(r, 0.0) for r in roots]
    generation = 0
    heavy_result: list[SystemCube] | None = None
    empirical_a = 0.0
    while generation < MAX_GENERATIONS:
        generation += 1
        n_k = math.floor(n_working / 2.0**generation)
        if n_k < 1:
            break
        cubes = _generation_cubes(starts, wmap, children, n_k, True)
        if not cubes:
            break
        threshold_product *= n_k
        total_side_volume = sum(cb.volume(d) for cb in cubes)
        mass_law_bound = (mass_constant * m_target) ** generation / threshold_product
        empirical_a = max(
            empirical_a,
            (total_side_volume * threshold_product / m_target**generation) ** (1.0 / generation),
        )
        records = []
        heavy, light = [], []
        heavy_mass = light_mass = 0.0
        for cube in cubes:
            norm_i = system_norm(cube)
            hm = high_mass(cube)
            is_heavy = norm_i > m_target * cube.volume(d)
            records.append(
                {
                    "cube": cube,
                    "system_norm": norm_i,
                    "high_mass": hm,
                    "volume": cube.volume(d),
                    "heavy": is_heavy,
                }
            )
            if is_heavy:
                heavy.append(cube)
                heavy_mass += hm
            else:
                light.append(cube)
                light_mass += hm
        trace["generations"].append(
            {
                "k": generation,
                "threshold": n_k,
                "heavy": heavy,
                "light": light,
                "heavy_high_mass": heavy_mass,
                "light_high_mass": light_mass,
                "volume_bound": mass_law_bound,
                "total_volume": total_side_volume,
            }
        )
        if total_side_volume > mass_law_bound * (1.0 + 1e-9):
            checks.setdefault("mass_law_violations", []).append(generation)
        if prior_light_high is not None:
            covered = heavy_mass + light_mass
            checks.setdefault("coverage_ok", True)
            if covered < prior_light_high - 1e-9 * max(1.0, prior_light_high):
                checks["coverage_ok"] = False
        if heavy_mass >= 2.0**-generation * theta:
            heavy_result = heavy
            break
        prior_light_high = light_mass
        starts = [(cube, 0.0) for cube in light]
        if config.guarantee and generation >= gamma + 1:
            raise AssertionError(
                "guarantee-mode run passed the promised generation bound; "
                "this indicates an inadmissible family (balls below grid scale)"
            )

    checks["empirical_mass_constant"] = empirical_a
    checks.setdefault("coverage_ok", True)
    checks["generations_run"] = generation

    if heavy_result is None:
        return HeavyCubesResult("exhausted", [], {}, trace, checks, config, grid_depth)

    masses = {cube: full_norm(cube) for cube in heavy_result}
    retention = sum(masses.values())
    checks["mass_retention"] = retention
    checks["mass_retention_ok"] = retention >= conclusion_floor
    checks["density_ok"] = all(
        masses[cube] > m_target * cube.volume(d) for cube in heavy_result
    )
    checks["disjoint_ok"] = _pairwise_disjoint(heavy_result, systems)
    return HeavyCubesResult("heavy_found", heavy_result, masses, trace, checks, config, grid_depth)


def _pairwise_disjoint(cubes: list[SystemCube], systems: AdjacentSystems) -> bool:
    for i, a in enumerate(cubes):
        lo_a, hi_a = systems.bounds(a)
        for b in cubes[i + 1 :]:
            lo_b, hi_b = systems.bounds(b)
            if np.all(np.maximum(lo_a, lo_b) < np.minimum(hi_a, hi_b) - 1e-15):
                return False
    return True


def exhaustive_verify(
    family: BallFamily, config: StoppingConfig, result: HeavyCubesResult, oracle_depth: int = 8
) -> dict:
    """Independent re-check of a stopping run against brute-force enumeration.

    Recomputes each returned cube's sub-function norm by direct summation,
    confirms the density and retention inequalities, pairwise disjointness,
    and that every returned cube is a genuine cube of its system with level
    at most max(oracle_depth, deepest returned level).
    """
    systems = adjacent_systems(family.d)
    depth = result.grid_depth
    gvols = np.array(
        [grid_ball_volume(family.centers[i], family.radii[i], depth, family.d) for i in range(len(family))]
    )
    out = {"status": result.status, "ok": True, "failures": []}
    if result.status in ("vacuous", "exhausted"):
        return out
    max_level = max([oracle_depth] + [cb.level for cb in result.heavy])
    conclusion_floor = (
        config.c * 2.0 ** (-2 * (config.gamma + 1)) * config.N**-config.gamma
    )
    total = 0.0
    for cube in result.heavy:
        if not (0 <= cube.system < len(systems)) or cube.level > max_level:
            out["failures"].append(("identity", cube))
        lo, hi = systems.bounds(cube)
        norm = 0.0
        for i in range(len(family)):
            if np.all(family.centers[i] - family.radii[i] >= lo - 1e-15) and np.all(
                family.centers[i] + family.radii[i] <= hi + 1e-15
            ):
                norm += float(family.weights[i] * gvols[i])
        if abs(norm - result.f_masses[cube]) > 1e-9 * max(1.0, norm):
            out["failures"].append(("norm", cube, norm, result.f_masses[cube]))
        if not norm > config.M * cube.volume(family.d):
            out["failures"].append(("density", cube, norm))
        total += norm
    if total < conclusion_floor:
        out["failures"].append(("retention", total, conclusion_floor))
    if not _pairwise_disjoint(result.heavy, systems):
        out["failures"].append(("disjoint",))
    out["ok"] = not out["failures"]
    return out


def random_family(
    d: int,
    rng: np.random.Generator,
    max_balls: int = 64,
    profile: str = "mixed",
    config: StoppingConfig | None = None,
    grid_depth: int = 8,
) -> BallFamily:
    """Seeded random ball families for demos and randomized verification.

    Profiles: ``bulk`` (generic balls, typically early-exit), ``peaked``
    (low total mass with a few hot small balls, exercising the generation
    recursion), ``mixed`` (either, by coin flip).
    """
    if profile == "mixed":
        profile = "bulk" if rng.random() < 0.5 else "peaked"
    count = int(rng.integers(2, max_balls + 1))
    h = 2.0**-grid_depth
    radii = np.exp(rng.uniform(math.log(4 * h), math.log(0.2), size=count))
    centers = np.column_stack(
        [rng.uniform(radii, 1.0 - radii) for _ in range(d)]
    ).reshape(count, d)
    if profile == "bulk":
        weights = rng.uniform(0.0, 3.0, size=count)
        n_hot = int(rng.integers(0, 3))
    else:
        weights = rng.uniform(0.0, 0.1, size=count)
        n_hot = int(rng.integers(1, 4))
    if config is not None and n_hot:
        hot = rng.choice(count, size=min(n_hot, count), replace=False)
        for i in hot:
            radii[i] = float(np.exp(rng.uniform(math.log(4 * h), math.log(16 * h))))
            centers[i] = rng.uniform(radii[i], 1.0 - radii[i], size=d)
            weights[i] = config.N * rng.uniform(1.05, 2.0)
    return BallFamily(centers, radii, weights)
