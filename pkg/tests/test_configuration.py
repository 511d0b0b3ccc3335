import math

import numpy as np
import pytest

from planargibbs.configuration import (CellIndex, Configuration, MarkedParticle, Point,
                                       Window, cell_index, count_in, covering_radius,
                                       quadratic_density, read_csv, restrict,
                                       restrict_complement, wrap_angle, write_csv)


class TestCellIndex:
    def test_origin(self):
        assert cell_index(Point(0.0, 0.0)) == CellIndex(0, 0)

    def test_half_open_upper_boundary(self):
        # 0.5 belongs to the next cell: 0.5 - 1 = -0.5 lies in [-0.5, 0.5)
        assert cell_index(Point(0.5, 0.0)) == CellIndex(1, 0)

    def test_lower_boundary_included(self):
        assert cell_index(Point(-0.5, 0.3)) == CellIndex(0, 0)

    def test_membership_roundtrip(self, rng):
        """Every point lies in its own cell: p - r in [-1/2, 1/2)^2."""
        pts = rng.uniform(-50, 50, size=(2000, 2))
        for x, y in pts:
            r = cell_index(Point(x, y))
            assert -0.5 <= x - r.i < 0.5
            assert -0.5 <= y - r.j < 0.5

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            cell_index(Point(math.nan, 0.0))


class TestConfiguration:
    def test_simplicity_enforced(self):
        with pytest.raises(ValueError):
            Configuration([[0, 0], [0, 0]], [0.0, 1.0])

    def test_spins_wrapped(self):
        cfg = Configuration([[0, 0]], [7.0])
        assert 0.0 <= cfg.spins[0] < 2 * math.pi
        assert np.isclose(cfg.spins[0], 7.0 - 2 * math.pi)

    def test_immutable(self):
        cfg = Configuration([[0, 0]], [0.0])
        with pytest.raises(ValueError):
            cfg.positions[0, 0] = 1.0

    def test_rotation_roundtrip(self, rng):
        cfg = Configuration(rng.uniform(-1, 1, (20, 2)), rng.uniform(0, 6, 20))
        back = cfg.rotate(1.3).rotate(-1.3)
        assert np.allclose(back.spins, cfg.spins, atol=1e-12)


class TestCounting:
    def test_empty(self):
        assert count_in(Configuration.empty(), Window(1.0)) == 0
        assert count_in(Configuration.empty(), CellIndex(3, -2)) == 0

    def test_single_inside(self):
        cfg = Configuration([[0, 0]], [0.0])
        assert count_in(cfg, Window(1.0)) == 1

    def test_window_boundary_excluded(self):
        cfg = Configuration([[1.0, 1.0]], [0.0])
        assert count_in(cfg, Window(1.0)) == 0

    def test_against_per_particle_membership(self, rng):
        """Vectorized counting agrees with a plain per-particle check."""
        for _ in range(50):
            n = int(rng.integers(0, 40))
            cfg = Configuration(rng.uniform(-4, 4, (n, 2)), rng.uniform(0, 6, n)) \
                if n else Configuration.empty()
            t = float(rng.uniform(0.5, 3.0))
            manual = sum(1 for p in cfg
                         if -t <= p.position.x < t and -t <= p.position.y < t)
            assert count_in(cfg, Window(t)) == manual


class TestRestrict:
    def test_empty(self):
        assert len(restrict(Configuration.empty(), Window(1.0))) == 0

    def test_all_inside(self, rng):
        cfg = Configuration(rng.uniform(-0.9, 0.9, (10, 2)), rng.uniform(0, 6, 10))
        assert restrict(cfg, Window(1.0)) == cfg

    def test_partition_recovers_everything(self, rng):
        cfg = Configuration(rng.uniform(-3, 3, (30, 2)), rng.uniform(0, 6, 30))
        w = Window(1.5)
        inside = restrict(cfg, w)
        outside = restrict_complement(cfg, w)
        assert len(inside) + len(outside) == len(cfg)
        assert inside.union(outside).same_particles(cfg)

    def test_idempotent(self, rng):
        cfg = Configuration(rng.uniform(-3, 3, (25, 2)), rng.uniform(0, 6, 25))
        w = Window(2.0)
        once = restrict(cfg, w)
        assert restrict(once, w) == once


class TestQuadraticDensity:
    def test_empty(self):
        assert quadratic_density(Configuration.empty(), 3) == 0.0

    def test_single_particle_origin(self):
        assert quadratic_density(Configuration([[0, 0]], [0.0]), 0) == 1.0

    def test_two_in_one_cell(self):
        cfg = Configuration([[0.1, 0.1], [-0.1, 0.2]], [0.0, 0.0])
        assert quadratic_density(cfg, 0) == 4.0

    def test_monotone_under_insertion(self, rng):
        """Adding a particle inside the covered block never lowers the sum."""
        for _ in range(30):
            n = int(rng.integers(1, 20))
            cfg = Configuration(rng.uniform(-2, 2, (n, 2)), np.zeros(n))
            new = rng.uniform(-2, 2, 2)
            grown = Configuration(np.vstack([cfg.positions, new]),
                                  np.zeros(n + 1))
            radius = 3
            assert quadratic_density(grown, radius) >= quadratic_density(cfg, radius)

    def test_covering_radius(self):
        cfg = Configuration([[4.9, 0.2]], [0.0])
        assert covering_radius(cfg) == 5


class TestCsvRoundtrip:
    def test_roundtrip(self, tmp_path, rng):
        cfg = Configuration(rng.uniform(-5, 5, (17, 2)), rng.uniform(0, 6.28, 17))
        path = tmp_path / "cfg.csv"
        write_csv(cfg, path)
        back = read_csv(path)
        assert back == cfg

    def test_empty_roundtrip(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_csv(Configuration.empty(), path)
        assert len(read_csv(path)) == 0

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(ValueError):
            read_csv(path)


def test_wrap_angle_range(rng):
    a = rng.uniform(-50, 50, 1000)
    w = wrap_angle(a)
    assert np.all((w >= 0) & (w < 2 * math.pi))
    assert np.allclose(np.cos(w), np.cos(a), atol=1e-9)
