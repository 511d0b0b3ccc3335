import math

import numpy as np
import pytest

from planargibbs.configuration import Configuration, MarkedParticle, Point, Window
from planargibbs.potential import (TrigPolySpin, energy, hamiltonian, ideal_gas_model,
                                   interaction, load_model, lower_regularity_margin,
                                   pair_energy, reference_model, superstability_margin,
                                   tail_constant)


def particle(x, y, spin=0.0):
    return MarkedParticle(Point(x, y), spin)


def random_configuration(rng, n, box=3.0, min_sep=0.25):
    """Hard-core-respecting random configuration (rejection sampling)."""
    pts = []
    while len(pts) < n:
        cand = rng.uniform(-box, box, 2)
        if all(np.max(np.abs(cand - p)) >= min_sep for p in pts):
            pts.append(cand)
    return Configuration(np.array(pts), rng.uniform(0, 2 * math.pi, n))


class TestPairEnergy:
    def test_reference_value_distance_one(self, ref_model):
        """J(1) V(0) = e^{-1} * (-1) for equal spins one unit apart."""
        val = pair_energy(ref_model, particle(0, 0), particle(1, 0))
        assert np.isclose(val, -math.exp(-1), atol=1e-12)

    def test_hard_core(self, ref_model):
        assert pair_energy(ref_model, particle(0, 0), particle(0.1, 0)) == math.inf

    def test_zero_model(self, gas_model):
        assert pair_energy(gas_model, particle(0, 0, 1.0), particle(1, 1, 2.0)) == 0.0

    def test_symmetric(self, ref_model, rng):
        for _ in range(200):
            a = particle(*rng.uniform(-2, 2, 2), rng.uniform(0, 6))
            b = particle(*rng.uniform(-2, 2, 2), rng.uniform(0, 6))
            if a.position == b.position:
                continue
            assert pair_energy(ref_model, a, b) == pair_energy(ref_model, b, a)

    def test_coincident_rejected(self, ref_model):
        with pytest.raises(ValueError):
            pair_energy(ref_model, particle(1, 1), particle(1, 1))


class TestEnergy:
    def test_small_sizes(self, ref_model):
        assert energy(ref_model, Configuration.empty()) == 0.0
        assert energy(ref_model, Configuration([[0, 0]], [0.0])) == 0.0
        two = Configuration([[0, 0], [1, 0]], [0.0, 0.0])
        assert np.isclose(energy(ref_model, two), -math.exp(-1))

    def test_matches_pair_enumeration(self, ref_model, rng):
        """Chunked total equals the brute-force sum over unordered pairs."""
        cfg = random_configuration(rng, 9)
        brute = sum(pair_energy(ref_model, cfg.particle(i), cfg.particle(j))
                    for i in range(9) for j in range(i + 1, 9))
        assert np.isclose(energy(ref_model, cfg), brute, atol=1e-12)

    def test_order_invariance(self, ref_model, rng):
        cfg = random_configuration(rng, 8)
        perm = rng.permutation(8)
        shuffled = Configuration(cfg.positions[perm], cfg.spins[perm])
        assert np.isclose(energy(ref_model, cfg), energy(ref_model, shuffled),
                          rtol=1e-12)

    def test_spin_rotation_invariance(self, ref_model, rng):
        """Global spin rotations leave the energy unchanged (couplings depend
        on spin differences only)."""
        cfg = random_configuration(rng, 10)
        for angle in rng.uniform(0, 2 * math.pi, 5):
            rotated = cfg.rotate(float(angle))
            assert np.isclose(energy(ref_model, rotated), energy(ref_model, cfg),
                              rtol=1e-12, atol=1e-12)


class TestInteraction:
    def test_empty_side(self, ref_model, rng):
        cfg = random_configuration(rng, 4)
        assert interaction(ref_model, cfg, Configuration.empty()) == 0.0

    def test_singletons(self, ref_model):
        a = Configuration([[0, 0]], [0.3])
        b = Configuration([[1, 0]], [0.3])
        assert np.isclose(interaction(ref_model, a, b), -math.exp(-1))

    def test_symmetry(self, ref_model, rng):
        a = random_configuration(rng, 5, box=1.0)
        b = Configuration(random_configuration(rng, 4, box=1.0).positions + 4.0,
                          rng.uniform(0, 6, 4))
        assert np.isclose(interaction(ref_model, a, b), interaction(ref_model, b, a),
                          rtol=1e-12)

    def test_additivity_identity(self, ref_model, rng):
        """energy(A u B) = energy(A) + energy(B) + interaction(A, B)."""
        for _ in range(10):
            a = random_configuration(rng, 5, box=1.5)
            b = Configuration(random_configuration(rng, 4, box=1.5).positions + 5.0,
                              rng.uniform(0, 6, 4))
            union = a.union(b)
            lhs = energy(ref_model, union)
            rhs = energy(ref_model, a) + energy(ref_model, b) + interaction(ref_model, a, b)
            assert np.isclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_shared_position_rejected(self, ref_model):
        a = Configuration([[0, 0]], [0.0])
        b = Configuration([[0, 0]], [1.0])
        with pytest.raises(ValueError):
            interaction(ref_model, a, b)


class TestHamiltonian:
    def test_empty_boundary_reduces_to_energy(self, ref_model, rng):
        cfg = random_configuration(rng, 6, box=1.5)
        w = Window(2.0)
        assert np.isclose(hamiltonian(ref_model, w, cfg, Configuration.empty()),
                          energy(ref_model, cfg), rtol=1e-12)

    def test_empty_inside(self, ref_model):
        bdry = Configuration([[3, 3]], [0.0])
        assert hamiltonian(ref_model, Window(2.0), Configuration.empty(), bdry) == 0.0

    def test_matches_endpoint_predicate_enumeration(self, ref_model, rng):
        """Equals the pair sum restricted to pairs with an endpoint inside."""
        w = Window(1.5)
        inside = random_configuration(rng, 5, box=1.2)
        bdry_pos = random_configuration(rng, 5, box=1.0).positions + 2.6
        bdry = Configuration(bdry_pos, rng.uniform(0, 6, 5))
        union = inside.union(bdry)
        in_window = w.contains_many(union.positions)
        brute = 0.0
        for i in range(len(union)):
            for j in range(i + 1, len(union)):
                if in_window[i] or in_window[j]:
                    brute += pair_energy(ref_model, union.particle(i), union.particle(j))
        assert np.isclose(hamiltonian(ref_model, w, inside, bdry), brute, rtol=1e-12)

    def test_misplaced_particles_rejected(self, ref_model):
        w = Window(1.0)
        outside = Configuration([[2, 2]], [0.0])
        inside = Configuration([[0, 0]], [0.0])
        with pytest.raises(ValueError):
            hamiltonian(ref_model, w, outside, Configuration.empty())
        with pytest.raises(ValueError):
            hamiltonian(ref_model, w, inside, inside)


class TestStabilityDiagnostics:
    def test_empty_margin(self, ref_model):
        assert superstability_margin(ref_model, Configuration.empty()) == 0.0

    def test_single_particle_margin(self, ref_model):
        """H = 0 against the one-cell bound A - B gives margin B - A."""
        cfg = Configuration([[0, 0]], [0.0])
        expected = ref_model.superstability_b - ref_model.superstability_a
        assert np.isclose(superstability_margin(ref_model, cfg), expected)

    def test_margin_nonnegative_on_sweep(self, ref_model, rng):
        for _ in range(25):
            cfg = random_configuration(rng, 10, box=2.0)
            assert superstability_margin(ref_model, cfg) >= 0.0

    def test_core_violation_saturates(self, ref_model):
        cfg = Configuration([[0, 0], [0.05, 0]], [0.0, 0.0])
        assert superstability_margin(ref_model, cfg) == math.inf

    def test_lower_regularity_empty(self, ref_model, rng):
        cfg = random_configuration(rng, 3)
        assert lower_regularity_margin(ref_model, cfg, Configuration.empty()) == 0.0

    def test_lower_regularity_adjacent_cells(self, ref_model):
        """Two singletons: W >= -Psi(|r-s|), checked directly."""
        a = Configuration([[0.0, 0.0]], [0.0])
        b = Configuration([[1.0, 0.0]], [math.pi])  # aligned for max attraction
        w = interaction(ref_model, a, b)
        psi1 = float(ref_model.lower_reg_psi(np.array([1]))[0])
        assert np.isclose(lower_regularity_margin(ref_model, a, b), w + psi1)
        assert lower_regularity_margin(ref_model, a, b) >= 0.0

    def test_lower_regularity_sweep(self, ref_model, rng):
        for _ in range(20):
            a = random_configuration(rng, 6, box=2.0)
            b = Configuration(random_configuration(rng, 6, box=2.0).positions + 5.5,
                              rng.uniform(0, 6, 6))
            assert lower_regularity_margin(ref_model, a, b) >= 0.0


class TestEnvelopeAndTails:
    def test_psi_dominates_j(self, ref_model):
        """|J|(1 + r^2) <= psi(r) on a dense radial grid."""
        r = np.linspace(0, 12, 4000)
        lhs = np.abs(ref_model.j_many(r)) * (1 + r * r)
        assert np.all(lhs <= ref_model.envelope.psi(r) + 1e-12)

    def test_envelope_valid(self, ref_model):
        ref_model.envelope.validate()

    def test_coupling_budget_value(self, ref_model):
        # 1 + psi(0) + 8 * (1/2 + 1/2) evaluates to 10 for the Gaussian model
        assert np.isclose(ref_model.c_j, 10.0, atol=1e-5)

    def test_tail_full_plane_below_budget(self, ref_model):
        assert tail_constant(ref_model, 0.0) <= ref_model.c_j

    def test_tail_value_at_three(self, ref_model):
        # 8 * integral_3^inf t e^{-t^2} dt = 4 e^{-9}; the estimate may only
        # exceed the truth, and stays within the documented quadrature slack
        est = tail_constant(ref_model, 3.0)
        truth = 4 * math.exp(-9)
        assert truth <= est <= truth + 1e-6

    def test_tail_decreasing_to_zero(self, ref_model):
        grid = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0]
        vals = [tail_constant(ref_model, r) for r in grid]
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-9

    def test_compact_support_tail(self, tmp_path):
        jt = tmp_path / "j.csv"
        vt = tmp_path / "v.csv"
        jt.write_text("0.0,1.0\n1.0,0.5\n2.0,0.0\n")
        vt.write_text("0.0,-1.0\n3.14159,1.0\n6.28318,-1.0\n")
        mf = tmp_path / "model.cfg"
        mf.write_text("model.kind = custom-table\nmodel.j_table = j.csv\n"
                      "model.v_table = v.csv\nmodel.hardcore_radius = 0.2\n")
        model = load_model(mf)
        assert tail_constant(model, 2.5) == 0.0
        assert model.j_support == 2.0


class TestModelFiles:
    def test_xy_kind(self, tmp_path):
        mf = tmp_path / "m.cfg"
        mf.write_text("model.kind = xy\nmodel.j0 = 2.0\nmodel.hardcore_radius = 0.25\n")
        model = load_model(mf)
        assert np.isclose(float(model.j_many(np.array([0.0]))[0]), 2.0)
        assert model.hardcore_radius == 0.25

    def test_table_interpolation(self, tmp_path):
        jt = tmp_path / "j.csv"
        vt = tmp_path / "v.csv"
        jt.write_text("0.0,1.0\n2.0,0.0\n")
        vt.write_text("0.0,-1.0\n3.14159265,1.0\n6.28318531,-1.0\n")
        mf = tmp_path / "model.cfg"
        mf.write_text("model.kind = custom-table\nmodel.j_table = j.csv\n"
                      "model.v_table = v.csv\n")
        model = load_model(mf)
        assert np.isclose(float(model.j_many(np.array([1.0]))[0]), 0.5)
        assert np.isclose(float(model.v_many(np.array([math.pi]))[0]), 1.0, atol=1e-6)
