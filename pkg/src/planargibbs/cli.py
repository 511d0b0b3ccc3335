"""Batch command line: sampling, decomposition, bonds, deformation, verification.

Every subcommand reads a flat key = value plan file (see ExperimentPlan) and
writes machine-readable outputs under --out: CSV tables plus a schema-v1
JSON report.  Exit code 0 means every executed check passed, 1 means some
check failed, 2 means a usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .bonds import clusters, sample_bonds
from .configuration import Configuration, Window, read_csv, write_csv
from .deformation import cluster_taper, good_set_verdict, taylor_report
from .harness import (DEFAULT_EVENT_SPECS, ExperimentPlan, run_lemma_suite,
                      run_main_inequality, run_symmetry_scan, _cached_decomposition)
from .report import Report, load_report
from .sampler import GibbsChain
from .smoothing import smooth_decompose


def _load_plan(args) -> ExperimentPlan:
    plan = ExperimentPlan.from_file(args.config) if args.config else ExperimentPlan()
    if args.seed is not None:
        plan = replace(plan, seed=args.seed)
    if args.out is not None:
        plan = replace(plan, out_dir=args.out)
    return plan


def _outdir(plan: ExperimentPlan, *parts: str) -> str:
    path = os.path.join(plan.out_dir, *parts)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    return path


def cmd_sample(args) -> int:
    plan = _load_plan(args)
    model = plan.load_model()
    window = Window(float(plan.n))
    boundary = read_csv(args.boundary) if args.boundary else Configuration.empty()
    chain = GibbsChain(model, window, plan.sampler_params(plan.seed), boundary)
    samples = chain.run()
    for idx, cfg in enumerate(samples):
        write_csv(cfg, _outdir(plan, "samples", f"sample_{idx:05d}.csv"))
    summary = {
        "model": plan.model,
        "n": plan.n,
        "z": plan.z,
        "sweeps": plan.sweeps,
        "seed": plan.seed,
        "samples": len(samples),
        "acceptance_rates": chain.acceptance_rates(),
        "energy_trace": chain.energy_trace,
        "truncation_tol_per_pair": model.truncation_tol,
        "rng": "numpy PCG64",
    }
    with open(_outdir(plan, "sample_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(f"wrote {len(samples)} samples to {os.path.join(plan.out_dir, 'samples')}")
    return 0


def cmd_decompose(args) -> int:
    plan = _load_plan(args)
    model = plan.load_model()
    eps_smooth, _ = plan.epsilons(model)
    decomp = smooth_decompose(model.spin_coupling, eps_smooth)
    grid = np.linspace(0.0, 2.0 * math.pi, 1024, endpoint=False)
    path = _outdir(plan, "decomposition_grid.csv")
    with open(path, "w") as fh:
        fh.write("sigma,V,Vbar,v\n")
        vb = decomp.vbar_eval(grid)
        vv = decomp.v_eval(grid)
        v0 = model.v_many(grid)
        for s, a, b, c in zip(grid, v0, vb, vv):
            fh.write(f"{float(s)!r},{float(a)!r},{float(b)!r},{float(c)!r}\n")
    payload = {
        "epsilon": decomp.epsilon,
        "delta": decomp.delta,
        "vbar_second_sup": decomp.vbar_second_sup,
        "kernel_second_sup": decomp.kernel.second_derivative_sup,
        "grid_csv": path,
    }
    with open(_outdir(plan, "decomposition.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_bonds(args) -> int:
    plan = _load_plan(args)
    model = plan.load_model()
    eps_smooth, _ = plan.epsilons(model)
    decomp = _cached_decomposition(plan.model, model, eps_smooth)
    cfg = read_csv(args.sample)
    rng = np.random.default_rng(plan.seed)
    bondset = sample_bonds(cfg, model, decomp, float(plan.n), rng,
                           cutoff=model.interaction_range)
    present = bondset.as_set()

    from .neighbors import window_pairs
    path = _outdir(plan, "bonds.csv")
    with open(path, "w") as fh:
        fh.write("i,j,p_e,present\n")
        for ii, jj, d in window_pairs(cfg.positions, float(plan.n),
                                      model.interaction_range):
            w = model.j_many(d) * decomp.v_eval(cfg.spins[ii] - cfg.spins[jj])
            p = -np.expm1(-w)
            for a, b, pe in zip(ii, jj, p):
                from .bonds import Bond
                flag = 1 if Bond.of(int(a), int(b)) in present else 0
                fh.write(f"{a},{b},{float(pe)!r},{flag}\n")

    clustering = clusters(cfg, bondset)
    payload = {
        "num_particles": len(cfg),
        "num_bonds": len(bondset),
        "labels": clustering.labels.tolist(),
        "cluster_ranges": {str(k): v for k, v in sorted(clustering.max_norm.items())},
    }
    with open(_outdir(plan, "clusters.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    print(f"{len(bondset)} bonds present over {len(cfg)} particles")
    return 0


def cmd_deform(args) -> int:
    plan = _load_plan(args)
    model = plan.load_model()
    eps_smooth, _ = plan.epsilons(model)
    decomp = _cached_decomposition(plan.model, model, eps_smooth)
    cfg = read_csv(args.sample)
    pairs = np.loadtxt(args.bonds, delimiter=",", skiprows=1, ndmin=2)
    from .bonds import BondSet
    present = pairs[pairs[:, 3] > 0][:, :2].astype(np.int64) if pairs.size else np.empty((0, 2), np.int64)
    bondset = BondSet(pairs=present, window_n=float(plan.n), num_particles=len(cfg))
    clustering = clusters(cfg, bondset)
    taper = plan.taper_params()
    fld = cluster_taper(cfg, clustering, taper)

    path = _outdir(plan, "field.csv")
    with open(path, "w") as fh:
        fh.write("id,angle,witness\n")
        for i in range(len(cfg)):
            fh.write(f"{i},{float(fld.angles[i])!r},{int(fld.witness[i])}\n")

    verdict = good_set_verdict(cfg, model, decomp, bondset, taper,
                               clustering=clustering, cutoff=model.interaction_range)
    ty = taylor_report(cfg, model, decomp, float(plan.n), fld,
                       cutoff=model.interaction_range)
    payload = {
        "range_ok": verdict.range_ok,
        "energy_ok": verdict.energy_ok,
        "is_good": verdict.is_good,
        "cluster_reach": verdict.cluster_reach,
        "energy_value": verdict.energy_value,
        "energy_threshold": verdict.energy_threshold,
        "taylor_margin": ty.margin,
        "curvature_gap": ty.curvature_gap,
        "saturated": ty.saturated,
    }
    with open(_outdir(plan, "deform_verdict.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_verify(args) -> int:
    plan = _load_plan(args)
    report = run_lemma_suite(plan)
    report.write(_outdir(plan, "report.json"))
    print(report.render())
    return 0 if report.all_passed else 1


def cmd_experiment(args) -> int:
    plan = _load_plan(args)
    events = tuple(args.event) if args.event else DEFAULT_EVENT_SPECS
    main = run_main_inequality(plan, events)
    scan = run_symmetry_scan(plan, events[0])
    merged = Report(seed=plan.seed)
    for check in main.checks + scan.checks:
        merged.add(check)
    merged.write(_outdir(plan, "report.json"))
    print(merged.render())
    return 0 if merged.all_passed else 1


def cmd_report(args) -> int:
    data = load_report(args.report)
    for check in data["checks"]:
        flag = "PASS" if check["passed"] else "FAIL"
        print(f"[{flag}] {check['name']}: statistic={check['statistic']:.6g} "
              f"threshold={check['threshold']:.6g}")
    ok = bool(data["all_passed"])
    print("ALL CHECKS PASSED" if ok else "SOME CHECKS FAILED")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planargibbs",
        description="Planar marked Gibbs point processes: sampling, bond coupling, "
                    "tapered deformations, and verification suites.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", help="plan file (key = value lines)")
        p.add_argument("--seed", type=int, help="override the plan seed")
        p.add_argument("--out", help="override the plan output directory")

    p = sub.add_parser("sample", help="run one chain and write sample CSVs")
    common(p)
    p.add_argument("--boundary", help="CSV of fixed exterior particles")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("decompose", help="smooth/remainder split of the spin coupling")
    common(p)
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("bonds", help="draw the conditional bond field for a sample")
    common(p)
    p.add_argument("--sample", required=True, help="sample CSV (id,x,y,spin)")
    p.set_defaults(fn=cmd_bonds)

    p = sub.add_parser("deform", help="taper field, verdict, and convexity margin")
    common(p)
    p.add_argument("--sample", required=True)
    p.add_argument("--bonds", required=True, help="bond CSV (i,j,p_e,present)")
    p.set_defaults(fn=cmd_deform)

    p = sub.add_parser("verify", help="run the verification suite")
    common(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("experiment", help="main-inequality and symmetry experiments")
    common(p)
    p.add_argument("--event", action="append",
                   help="event family (half-plane | sector-count:k | count-band:a:b); repeatable")
    p.set_defaults(fn=cmd_experiment)

    p = sub.add_parser("report", help="render an existing report.json")
    p.add_argument("report")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "fn", None):
        parser.print_usage()
        return 2
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
