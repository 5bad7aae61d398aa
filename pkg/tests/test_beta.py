"""Plane-approximation coefficients: oracles, method ordering, invariances."""

import math

import numpy as np
import pytest

from rectilab import beta as bt
from rectilab import cubes as cb
from rectilab import pointset as ps
from rectilab.grassmann import random_rotation


def two_segments(h: float, res: float = 5e-3) -> ps.RegularCloud:
    seg = ps.segment(res)
    pts = np.vstack([seg.points + [-0.5, h], seg.points + [-0.5, -h]])
    return ps.RegularCloud(pts, np.concatenate([seg.weights] * 2), 1, res, generator="two-seg")


def random_cloud(rng, count=40):
    pts = rng.uniform(0.0, 1.0, size=(count, 2))
    return ps.RegularCloud(pts, np.full(count, 0.02), 1, 0.02, density_constant=2.0, validate=False)


class TestBeta1:
    def test_collinear_is_zero(self):
        seg = ps.segment(1e-2)
        res = bt.beta1(seg, ps.Ball(np.array([0.5, 0.0]), 0.6))
        assert res.value <= 1e-12

    def test_two_segment_reference_from_oracle(self):
        cloud = two_segments(0.2)
        ball = ps.Ball(np.zeros(2), 1.0)
        oracle = bt.beta1(cloud, ball, "grid_oracle")
        refined = bt.beta1(cloud, ball, "pca_refined")
        pca = bt.beta1(cloud, ball, "pca")
        # the horizontal mid-line gives sum(w * h) / r^2; the oracle may do
        # better with a tilted plane, never worse than grid granularity
        mask = ball.contains(cloud.points)
        midline_value = float((cloud.weights[mask] * 0.2).sum())
        assert oracle.value <= midline_value + 1e-12
        assert refined.value <= pca.value + 1e-12
        assert abs(refined.value - oracle.value) <= 0.01

    def test_four_corners_lower_bound(self):
        cloud = ps.four_corners(4)
        ball = ps.Ball(np.array([0.5, 0.5]), 0.5)
        assert bt.beta1(cloud, ball, "grid_oracle").value >= 0.05

    def test_empty_ball_raises(self):
        with pytest.raises(ValueError):
            bt.beta1(ps.segment(1e-2), ps.Ball(np.array([9.0, 9.0]), 0.1))

    def test_degenerate_flag(self):
        cloud = ps.four_corners(2)
        res = bt.beta1(cloud, ps.Ball(cloud.points[0], cloud.resolution / 3.0))
        assert res.degenerate and res.value == 0.0


class TestBetaInf:
    def test_collinear_is_zero(self):
        seg = ps.segment(1e-2)
        assert bt.beta_inf(seg, ps.Ball(np.array([0.5, 0.0]), 0.6)).value <= 1e-12

    def test_two_segment_midplane(self):
        h = 0.15
        cloud = two_segments(h)
        ball = ps.Ball(np.zeros(2), 1.0)
        refined = bt.beta_inf(cloud, ball, "pca_refined")
        oracle = bt.beta_inf(cloud, ball, "grid_oracle")
        assert refined.value == pytest.approx(h, abs=2e-3)
        assert oracle.value == pytest.approx(h, abs=2e-2)

    def test_sup_dominates_normalized_mean(self):
        # evaluating the mean objective at the sup-optimal plane bounds it by
        # (mass / r^n) * sup value, a per-sample arithmetic identity
        rng = np.random.default_rng(0)
        for _ in range(20):
            cloud = random_cloud(rng)
            ball = ps.Ball(np.array([0.5, 0.5]), 0.7)
            sup = bt.beta_inf(cloud, ball, "pca_refined")
            mask = ball.contains(cloud.points)
            pts, w = cloud.points[mask], cloud.weights[mask]
            dist = sup.plane.distance(pts)
            l1_at_plane = float((w * dist).sum() / ball.radius**2)
            massn = float(w.sum() / ball.radius)
            assert l1_at_plane <= massn * sup.value + 1e-12


class TestBetaLattice:
    def test_segment_all_near_zero(self):
        lat = cb.build_lattice(ps.segment(1e-3), 0, 4)
        betas = bt.beta_lattice(lat, "beta1")
        for key, res in betas.items():
            tol = 2.0 * lat.cloud.resolution / 2.0 ** -key[0]
            assert res.value <= tol

    def test_four_corners_flagged_levels(self):
        lat = cb.build_lattice(ps.four_corners(4), 0, 4)
        betas = bt.beta_lattice(lat, "beta1")
        by_level = {}
        for (level, _), res in betas.items():
            by_level.setdefault(level, []).append(res.value)
        # the top ball sees the whole set at radius 3*sqrt(2), which dilutes
        # the coefficient; from level 1 on the grid_oracle confirms >= 0.05
        assert max(by_level[0]) < 0.05
        for level in range(1, 5):
            assert min(by_level[level]) >= 0.05

    def test_translation_resampled_distribution(self):
        base = ps.four_corners(3)
        lat0 = cb.build_lattice(base, 0, 4)
        shifted_pts = base.points + np.array([0.37, 0.11])
        shifted = ps.RegularCloud(shifted_pts, base.weights, 1, base.resolution, generator="fc-shift")
        lat1 = cb.build_lattice(shifted, 0, 4)
        b0 = [r.value for r in bt.beta_lattice(lat0, "beta1").values() if not r.degenerate]
        b1 = [r.value for r in bt.beta_lattice(lat1, "beta1").values() if not r.degenerate]
        assert np.mean(b1) == pytest.approx(np.mean(b0), rel=0.5)


class TestWglSum:
    def test_segment_zero(self):
        lat = cb.build_lattice(ps.segment(1e-3), 0, 4)
        betas = bt.beta_lattice(lat, "beta1")
        assert bt.wgl_sum(lat, betas, 0.1, (0, (0, 0))) == 0.0

    def test_four_corners_growth(self):
        cloud = ps.four_corners(4)
        ratios = {}
        for depth in (4, 6):
            lat = cb.build_lattice(cloud, 0, depth)
            betas = bt.beta_lattice(lat, "beta1")
            ratios[depth] = bt.wgl_sum(lat, betas, 0.05, (0, (0, 0)))
        assert ratios[6] >= 1.5 * ratios[4]


class TestBetaComparison:
    def test_segment_returns_none(self):
        lat = cb.build_lattice(ps.segment(1e-3), 0, 3)
        worst, used = bt.beta_comparison(lat)
        assert worst is None and used == 0

    def test_four_corners_bounded(self):
        lat = cb.build_lattice(ps.four_corners(4), 0, 4)
        worst, used = bt.beta_comparison(lat)
        assert used > 0
        assert worst <= 10.0

    def test_two_segment_sweep_stable(self):
        constants = []
        for h in (0.1, 0.15, 0.2):
            cloud = two_segments(h, res=1e-2)
            lat = cb.build_lattice(cloud, 0, 3)
            worst, used = bt.beta_comparison(lat)
            if worst is not None:
                constants.append(worst)
        assert constants
        assert max(constants) <= 10.0


class TestMethodAndSymmetryInvariants:
    def test_refined_never_above_pca(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            cloud = random_cloud(rng)
            ball = ps.Ball(rng.uniform(0.3, 0.7, size=2), rng.uniform(0.4, 0.8))
            if not ball.contains(cloud.points).any():
                continue
            assert (
                bt.beta1(cloud, ball, "pca_refined").value
                <= bt.beta1(cloud, ball, "pca").value + 1e-12
            )

    def test_oracle_below_methods_plus_granularity(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            cloud = random_cloud(rng)
            ball = ps.Ball(np.array([0.5, 0.5]), 0.7)
            oracle = bt.beta1(cloud, ball, "grid_oracle").value
            assert oracle <= bt.beta1(cloud, ball, "pca").value + 0.02
            assert oracle <= bt.beta1(cloud, ball, "pca_refined").value + 0.02

    def test_zero_iff_coplanar(self):
        rng = np.random.default_rng(3)
        cloud = random_cloud(rng)
        ball = ps.Ball(np.array([0.5, 0.5]), 0.8)
        assert bt.beta1(cloud, ball).value > 1e-6  # generic points are not collinear
        seg = ps.segment(1e-2)
        assert bt.beta1(seg, ps.Ball(np.array([0.5, 0.0]), 1.0)).value <= 1e-12

    def test_dilation_invariance_exact(self):
        cloud = ps.four_corners(3)
        ball = ps.Ball(np.array([0.5, 0.5]), 0.75)
        lam = 4.0  # power of two keeps the float scaling exact
        scaled = cloud.dilated(lam)
        sball = ps.Ball(ball.center * lam, ball.radius * lam)
        for fn in (bt.beta1, bt.beta_inf):
            a = fn(cloud, ball, "pca_refined").value
            b = fn(scaled, sball, "pca_refined").value
            assert abs(a - b) <= 1e-10

    def test_rotation_invariance_within_tolerance(self):
        cloud = ps.four_corners(3)
        ball = ps.Ball(np.array([0.5, 0.5]), 0.75)
        g = random_rotation(2, np.random.default_rng(7))
        rotated = cloud.rotated(g)
        rball = ps.Ball(g @ ball.center, ball.radius)
        a = bt.beta1(cloud, ball, "pca_refined").value
        b = bt.beta1(rotated, rball, "pca_refined").value
        assert b == pytest.approx(a, rel=0.05, abs=1e-3)

    def test_export(self, tmp_path):
        lat = cb.build_lattice(ps.four_corners(2), 0, 2)
        betas = bt.beta_lattice(lat, "beta1")
        out = tmp_path / "betas.csv"
        bt.export_betas(betas, out)
        lines = out.read_text().strip().splitlines()
        assert len(lines) == len(betas) + 1
