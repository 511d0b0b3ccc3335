import json
import math
import os

import numpy as np
import pytest

from planargibbs.cli import main as cli_main
from planargibbs.configuration import Configuration, Window, restrict_complement
from planargibbs.harness import (ExperimentPlan, count_band_event, full_event,
                                 half_plane_event, matched_seed_rotation, parse_event,
                                 replicate_records, run_lemma_suite,
                                 run_main_inequality, run_symmetry_scan,
                                 sector_count_event)
from planargibbs.report import CheckResult, Report, comparable_dict, load_report
from planargibbs.sampler import sample_poisson

SMALL = dict(n=8, n_prime=2, plateau_radius=3, sweeps=12, replicates=2, z=0.4,
             seed=424242)


class TestPlan:
    def test_defaults_valid(self):
        plan = ExperimentPlan()
        model = plan.load_model()
        smo, dom = plan.epsilons(model)
        assert 0 < smo <= dom < 1
        # largest admissible strength with the 10% margin
        assert np.isclose(dom, 0.9 / (2 * model.c_j * plan.z * plan.xi), rtol=1e-9)

    def test_geometry_validated(self):
        with pytest.raises(ValueError):
            ExperimentPlan(n=4, plateau_radius=4)
        with pytest.raises(ValueError):
            ExperimentPlan(n_prime=5, plateau_radius=4)

    def test_smoothing_budget_capped(self):
        plan = ExperimentPlan(smoothing_epsilon=0.5, domination_epsilon=0.01)
        with pytest.raises(ValueError):
            plan.epsilons(plan.load_model())

    def test_file_roundtrip(self, tmp_path):
        plan = ExperimentPlan(**SMALL)
        path = tmp_path / "plan.cfg"
        path.write_text(plan.to_text())
        again = ExperimentPlan.from_file(path)
        assert again == plan

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "plan.cfg"
        path.write_text("bogus = 1\n")
        with pytest.raises(ValueError):
            ExperimentPlan.from_file(path)

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "plan.cfg"
        path.write_text("# a plan\n\nn = 8\nplateau_radius = 3\n")
        assert ExperimentPlan.from_file(path).n == 8


class TestEvents:
    @pytest.mark.parametrize("spec,name", [
        ("half-plane", "half-plane"),
        ("sector-count:2", "sector-count:2"),
        ("count-band:1:5", "count-band:1:5"),
        ("everything", "everything"),
    ])
    def test_parser(self, spec, name):
        assert parse_event(spec, 2).name == name

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            parse_event("mystery", 2)

    def test_cylinder_property(self, rng):
        """Resampling exterior particles never changes any event value."""
        events = [half_plane_event(2), sector_count_event(2, 1), count_band_event(2, 1, 7)]
        trials = 0
        while trials < 1000:
            cfg = sample_poisson(Window(6.0), 0.4, rng)
            inner = restrict_complement(cfg, Window(2.0))  # keep only exterior swap
            base_vals = [ev.evaluate(cfg) for ev in events]
            exterior = sample_poisson(Window(6.0), 0.4, rng)
            exterior = restrict_complement(exterior, Window(2.0))
            from planargibbs.configuration import restrict
            merged = restrict(cfg, Window(2.0)).union(exterior)
            new_vals = [ev.evaluate(merged) for ev in events]
            assert new_vals == base_vals
            trials += 1

    def test_zero_rotation_is_identity(self, rng):
        cfg = sample_poisson(Window(3.0), 0.8, rng)
        for ev in (half_plane_event(2), sector_count_event(2), count_band_event(2)):
            assert ev.evaluate_rotated(cfg, 0.0) == ev.evaluate(cfg)

    def test_half_plane_empty_window(self):
        assert half_plane_event(2).evaluate(Configuration.empty()) is False

    def test_half_plane_sign(self):
        cfg = Configuration([[0.0, 0.0]], [0.0])
        ev = half_plane_event(1)
        assert ev.evaluate(cfg) is True
        assert ev.evaluate(cfg.rotate(math.pi)) is False


class TestLemmaSuite:
    def test_reference_plan_passes(self):
        report = run_lemma_suite(ExperimentPlan(**SMALL))
        assert report.all_passed, report.render()
        names = [c.name for c in report.checks]
        assert len(names) == len(set(names))

    def test_ideal_gas_trivializes(self):
        """Without coupling the bond sets are empty and every percolation
        statistic collapses to its trivial value."""
        report = run_lemma_suite(ExperimentPlan(model="ideal-gas", **SMALL))
        assert report.all_passed, report.render()
        by_name = {c.name: c for c in report.checks}
        assert by_name["cluster-range-tail"].statistic == 0.0
        assert by_name["deformation-energy-tail"].statistic == 0.0

    def test_invalid_plan_rejected_before_running(self):
        with pytest.raises(ValueError):
            ExperimentPlan(n=3, plateau_radius=4, n_prime=2)


class TestMainInequality:
    def test_shipped_events_pass(self):
        report = run_main_inequality(ExperimentPlan(**SMALL))
        assert report.all_passed, report.render()
        for check in report.checks:
            assert check.details["p_good"] > 0.5

    def test_full_event_margin_identity(self):
        """For B = everything the margin reduces to (e - 1) P(good)."""
        report = run_main_inequality(ExperimentPlan(**SMALL), ("everything",))
        check = report.checks[0]
        expected = (math.e - 1.0) * check.details["p_good"]
        assert np.isclose(check.statistic, expected, rtol=1e-9)
        assert check.statistic >= 0.0

    def test_impossible_event_margin(self):
        report = run_main_inequality(ExperimentPlan(**SMALL), ("count-band:900:901",))
        check = report.checks[0]
        assert check.statistic == 0.0 and check.passed


class TestSymmetryScan:
    def test_small_scan_passes(self):
        plan = ExperimentPlan(n=8, n_prime=2, plateau_radius=3, sweeps=10,
                              replicates=4, z=0.4, seed=7)
        report = run_symmetry_scan(plan)
        assert report.all_passed, report.render()

    def test_matched_seed_exactness_ideal_gas(self):
        plan = ExperimentPlan(model="ideal-gas", **SMALL)
        out = matched_seed_rotation(plan, 1.0)
        assert out["same_positions"]
        assert out["max_spin_deviation"] <= 1e-12


class TestReplicateRecords:
    def test_deterministic(self):
        plan = ExperimentPlan(**SMALL)
        a = replicate_records(plan, plan.n, 5, ("half-plane",))
        b = replicate_records(plan, plan.n, 5, ("half-plane",))
        assert a == b

    def test_record_shape(self):
        plan = ExperimentPlan(**SMALL)
        recs = replicate_records(plan, plan.n, 5, ("half-plane",))
        assert recs
        rec = recs[0]
        for key in ("count", "bonds", "reach", "cost", "good", "margin", "order"):
            assert key in rec
        assert set(rec["events"]) == {"half-plane"}


class TestReport:
    def test_duplicate_names_rejected(self):
        report = Report(seed=1)
        report.add(CheckResult("a", 0.0, 1.0, True, 0.0))
        with pytest.raises(ValueError):
            report.add(CheckResult("a", 0.0, 1.0, True, 0.0))

    def test_json_roundtrip(self, tmp_path):
        report = Report(seed=3)
        report.add(CheckResult("x", 0.5, 1.0, True, 0.1, {"k": 2}))
        path = tmp_path / "report.json"
        report.write(path)
        data = load_report(path)
        assert data["checks"][0]["name"] == "x"
        assert data["all_passed"] is True

    def test_determinism_modulo_timestamp(self):
        """Same plan and seed give byte-identical reports up to `created`."""
        plan = ExperimentPlan(**SMALL)
        a = comparable_dict(run_main_inequality(plan, ("everything",)))
        b = comparable_dict(run_main_inequality(plan, ("everything",)))
        a_checks = [{k: v for k, v in c.items() if k != "runtime_s"} for c in a["checks"]]
        b_checks = [{k: v for k, v in c.items() if k != "runtime_s"} for c in b["checks"]]
        assert a_checks == b_checks


class TestCli:
    def test_no_arguments_usage(self, capsys):
        assert cli_main([]) == 2
        assert "usage" in capsys.readouterr().out.lower()

    def test_unknown_flag_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            cli_main(["--nope"])
        assert exc.value.code == 2

    def test_verify_pass_and_report(self, tmp_path, capsys):
        cfg = tmp_path / "plan.cfg"
        lines = [f"{k} = {v}" for k, v in SMALL.items()]
        lines.append(f"out_dir = {tmp_path / 'run'}")
        cfg.write_text("\n".join(lines) + "\n")
        assert cli_main(["verify", "--config", str(cfg)]) == 0
        report_path = tmp_path / "run" / "report.json"
        assert report_path.exists()
        assert cli_main(["report", str(report_path)]) == 0

    def test_sample_bonds_deform_pipeline(self, tmp_path, capsys):
        cfg = tmp_path / "plan.cfg"
        lines = [f"{k} = {v}" for k, v in SMALL.items()]
        lines.append(f"out_dir = {tmp_path / 'run'}")
        cfg.write_text("\n".join(lines) + "\n")
        assert cli_main(["sample", "--config", str(cfg)]) == 0
        sample = tmp_path / "run" / "samples" / "sample_00000.csv"
        assert sample.exists()
        assert cli_main(["bonds", "--config", str(cfg), "--sample", str(sample)]) == 0
        bonds = tmp_path / "run" / "bonds.csv"
        assert cli_main(["deform", "--config", str(cfg), "--sample", str(sample),
                         "--bonds", str(bonds)]) == 0
        verdict = json.loads((tmp_path / "run" / "deform_verdict.json").read_text())
        assert "is_good" in verdict
        summary = json.loads((tmp_path / "run" / "sample_summary.json").read_text())
        assert summary["rng"] == "numpy PCG64"

    def test_decompose_outputs(self, tmp_path, capsys):
        cfg = tmp_path / "plan.cfg"
        cfg.write_text("model = reference\nout_dir = %s\n" % (tmp_path / "run"))
        assert cli_main(["decompose", "--config", str(cfg)]) == 0
        data = json.loads((tmp_path / "run" / "decomposition.json").read_text())
        assert 0 < data["delta"] <= math.pi / 4
