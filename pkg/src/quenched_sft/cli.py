"""Command-line front end: ``quenched-sft {describe,measure,simulate,verify}``.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
3 numerical non-convergence.  Set ``QUENCHED_SFT_VERBOSE=1`` for progress
messages on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .base import quadrature_grid, refine
from .config import ConfigError, RunConfig, load_config
from .errors import HorizonError, NonConvergenceError, ValidationError, WordCapExceeded
from .gibbs import distortion_constant, epsilon_decay, measure_table
from .process import (
    IntervalUnion,
    counts_in,
    realize_process,
    time_change_covering,
    window_constants,
)
from .scenario import (
    approach_sequence,
    build_bernoulli_oracle,
    build_markov_oracle,
    nonmixing_gap,
    q_table,
    symmetry_check,
    tilt_potential,
)
from .sft import CylinderSet, aperiodicity_constant, count_admissible
from .stats import (
    CheckEntry,
    MCConfig,
    PathSampler,
    VerificationReport,
    check_K1_exact,
    dispersion_ratio,
    engine_checks,
    estimate_beta,
    estimate_phi,
    exp_law_error,
    delta_decomposition_check,
    short_hit_check,
    void_product_check,
    mc_zero_probability,
    oracle_exactness,
    poisson_gof,
    product_inequality_trials,
    sample_paths,
    simulate_counts,
)

log = logging.getLogger("quenched_sft")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
APERIODICITY_SEARCH = 20
EXP_LAW_LIMIT = 0.05


def _mc(cfg: RunConfig) -> MCConfig:
    return MCConfig(N=cfg.N, seed=cfg.seed, workers=cfg.workers, chunk=cfg.chunk, tolerances=cfg.tolerances)


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _word_str(w):
    return "".join(str(int(s)) for s in w)


# --- describe -----------------------------------------------------------------


def describe(cfg: RunConfig) -> dict:
    sc = cfg.scenario
    sft = sc.sft
    cells = [
        {"interval": [lo, hi], "matrix": sft.matrices[c].tolist()}
        for c, (lo, hi) in enumerate(sft.partition.cells())
    ]
    return {
        "scenario": sc.name,
        "alphabet_size": sft.b,
        "rotation": sft.base.r,
        "potential": sc.psi.name or "custom",
        "cells": cells,
        "aperiodicity_M": aperiodicity_constant(sft, APERIODICITY_SEARCH),
        "word": list(cfg.word),
        "q_n": [[n, q] for n, q in q_table(cfg.word)],
        "admissible_counts": {str(n): count_admissible(sft, cfg.omega, n) for n in range(1, 9)},
        "omega": cfg.omega,
    }


def _print_describe(d):
    print(f"scenario {d['scenario']}  b={d['alphabet_size']}  r={d['rotation']!r}  potential={d['potential']}")
    for cell in d["cells"]:
        lo, hi = cell["interval"]
        print(f"  Q on [{lo:g}, {hi:g}):")
        for row in cell["matrix"]:
            print("    " + " ".join(str(v) for v in row))
    print(f"aperiodicity M = {d['aperiodicity_M']}")
    print("q_n: " + " ".join(f"{n}:{q}" for n, q in d["q_n"]))


# --- measure ------------------------------------------------------------------


def measure(cfg: RunConfig, out: Path | None) -> dict:
    sc = cfg.scenario
    sft, psi = sc.sft, sc.psi
    lo, hi = cfg.n_range
    grid = quadrature_grid(refine(sft.partition, sft.base, 4), cfg.setting("grid_ppc"))
    eps, slope, r2 = epsilon_decay(sft, psi, range(lo, hi + 1), grid)
    cyl_rows = []
    for n in range(1, min(4, hi) + 1):
        t = measure_table(sft, psi, cfg.omega, n)
        cyl_rows += [(n, _word_str(w), float(p)) for w, p in zip(t.words.words, t.probs)]
    dist_rows = [(n, n, distortion_constant(sft, psi, cfg.omega, n, n)) for n in range(1, 5)]
    g_lo, g_hi = cfg.gaps
    ph = estimate_phi(sft, psi, cfg.omega, *cfg.phi_nm, range(g_lo, g_hi + 1))
    b_lo, b_hi = cfg.setting("beta_n")
    be = estimate_beta(sft, psi, quadrature_grid(sft.partition, 8), cfg.word, range(b_lo, b_hi + 1))
    summary = {
        "epsilon_fit": {"slope": slope, "r_squared": r2},
        "phi_fit": {"slope": ph.slope, "r_squared": ph.r_squared, "nonincreasing": ph.nonincreasing},
        "beta_rates": {"beta0": be.rate0, "beta1": be.rate1, "skipped_fibres": be.skipped},
        "omega": cfg.omega,
        "scenario": sc.name,
    }
    if out is not None:
        _write_csv(out / "cylinders.csv", ["n", "word", "measure"], cyl_rows)
        _write_csv(out / "epsilon.csv", ["n", "epsilon"], zip(range(lo, hi + 1), eps))
        _write_csv(out / "distortion.csv", ["n", "m", "c"], dist_rows)
        _write_csv(out / "phi.csv", ["gap", "phi"], zip(ph.gaps.tolist(), ph.phi))
        _write_csv(out / "beta0.csv", ["j", "beta0"], zip(be.j.tolist(), be.beta0))
        _write_csv(out / "beta1.csv", ["n", "beta1"], zip(be.n.tolist(), be.beta1))
        _write_json(out / "measure.json", _json_ready(summary))
    summary["epsilon"] = eps.tolist()
    return summary


def _json_ready(obj):
    from .stats import _plain

    return _plain(obj)


# --- simulate -----------------------------------------------------------------


def simulate(cfg: RunConfig, out: Path | None) -> dict:
    sc = cfg.scenario
    A = CylinderSet.single(cfg.word[: cfg.n])
    mc = _mc(cfg)
    sim = simulate_counts(sc.sft, sc.psi, cfg.omega, A, cfg.R, mc)
    wc = window_constants(sim.tc, cfg.R)
    R0 = IntervalUnion((cfg.R.intervals[0],))
    void = mc_zero_probability(sc.sft, sc.psi, cfg.omega, A, R0, mc)
    gof = poisson_gof(sim.counts, cfg.R) if mc.N >= 1000 else []
    result = {
        "word": list(cfg.word[: cfg.n]),
        "n": cfg.n,
        "R": [list(iv) for iv in cfg.R],
        "N": mc.N,
        "seed": mc.seed,
        "omega": cfg.omega,
        "time_change": {"K": sim.tc.K, "eps_A": sim.tc.max_step, "k_star": wc.k_star,
                        "p": list(wc.p), "q": list(wc.q)},
        "mean_counts": sim.counts.mean(axis=0).tolist(),
        "dispersion_union": dispersion_ratio(sim.counts.sum(axis=1)),
        "void": void.to_dict(),
        "gof": [e.to_dict() for e in gof],
    }
    invariants = _realization_invariants(cfg, A, sim, out)
    result["realization_invariants"] = invariants
    if out is not None:
        _write_json(out / "simulate.json", _json_ready(result))
    return _json_ready(result)


def _realization_invariants(cfg, A, sim, out):
    """Rebuild a few paths explicitly and compare with the streamed counts."""
    k = min(max(cfg.csv_paths, 8), cfg.N)
    last = int(sim.windows[0].max()) if sim.windows.shape[1] else 1
    tc = sim.tc.truncated(last)
    sampler = PathSampler(cfg.scenario.sft, cfg.scenario.psi, cfg.omega, tc.K + A.depth)
    paths = sample_paths(sampler, cfg.seed, range(k))
    rows, ok = [], True
    for s, x in enumerate(paths):
        re = realize_process(x, A, tc, cfg.scenario.b)
        ok &= bool(np.all(np.diff(re.times) >= 0) and np.all(re.times >= 0))
        ok &= bool(np.array_equal(counts_in(re, cfg.R), sim.counts[s]))
        if s < cfg.csv_paths:
            rows += [(s, float(t)) for t in re.times]
    if out is not None and cfg.csv_paths:
        _write_csv(out / "realizations.csv", ["path", "time"], rows)
    return {"checked_paths": k, "consistent": ok}


# --- verify -------------------------------------------------------------------


def verify(cfg: RunConfig, out: Path | None) -> VerificationReport:
    sc = cfg.scenario
    sft, psi = sc.sft, sc.psi
    rep = VerificationReport()
    mc = _mc(cfg)
    n_eng = cfg.setting("engine_n")
    is_example = sc.name == "example5"

    log.info("oracle checks")
    bern = build_bernoulli_oracle(3)
    rep.add(oracle_exactness(bern.sft, bern.psi, bern.exact, [0.1, 0.6], 8, 1e-12, "oracle_bernoulli"))
    mk = build_markov_oracle([[1.0, 2.0], [0.5, 1.5]])
    rep.add(oracle_exactness(mk.sft, mk.psi, mk.exact, [0.1, 0.6], 8, 1e-8, "oracle_markov"))

    log.info("engine invariants")
    scale = float(cfg.tamper.get("table_scale", 1.0))
    rep.extend(engine_checks(sft, psi, cfg.omega, n_eng, scale=scale, label=psi.name or "psi"))
    if is_example and psi.name != "tilt":
        rep.extend(engine_checks(sft, tilt_potential(), cfg.omega, n_eng, label="tilt"))

    log.info("exact bounds")
    A = CylinderSet.single(cfg.word[: cfg.n])
    tc = time_change_covering(sft, psi, cfg.omega, A, cfg.R.sup)
    rep.add(check_K1_exact(tc, window_constants(tc, cfg.R), cfg.R))
    for g in sorted({1, cfg.n, 2 * cfg.n}):
        rep.add(short_hit_check(sft, psi, tc, cfg.R, g))
    rep.add(product_inequality_trials(10_000, np.random.default_rng(cfg.seed)))
    k = cfg.setting("delta_k")
    A2 = CylinderSet.single(cfg.word[:2])
    decomp = [delta_decomposition_check(sft, psi, cfg.omega, A2, k, g) for g in range(0, k + 1)]
    rep.add(CheckEntry(
        f"delta_decomposition_k{k}", sum(not e.passed for e in decomp), 0, 0, all(e.passed for e in decomp),
        "bound", details={"lhs": decomp[0].value, "rhs_by_g": [e.target for e in decomp]},
    ))
    A1 = CylinderSet.single(cfg.word[:1])
    tc1 = time_change_covering(sft, psi, cfg.omega, A1, 1.0, K0=16)
    tc1 = tc1 if tc1.K >= 9 else time_change_covering(sft, psi, cfg.omega, A1, float(tc1.T[-1]) + 1.0, K0=16)
    R_tiny = IntervalUnion.single(0.5 * tc1.T[1], 0.5 * (tc1.T[7] + tc1.T[8]))
    rep.add(void_product_check(sft, psi, tc1, R_tiny))

    log.info("hitting-time point process (N=%d)", mc.N)
    R0 = IntervalUnion((cfg.R.intervals[0],))
    rep.add(mc_zero_probability(sft, psi, cfg.omega, A, R0, mc))
    sim = simulate_counts(sft, psi, cfg.omega, A, cfg.R, mc)
    disp = dispersion_ratio(sim.counts.sum(axis=1))
    band = mc.tol("dispersion_band", 0.1)
    rep.add(CheckEntry(f"dispersion_(0,{cfg.R.sup:g})", disp, 1.0, band, abs(disp - 1) <= band, "limit"))
    if mc.N >= 1000:
        rep.extend(poisson_gof(sim.counts, cfg.R))

    log.info("exponential law")
    dists = []
    for n in cfg.exp_law_n:
        e = exp_law_error(sft, psi, cfg.omega, cfg.word, n, mc)
        e.passed = True
        rep.add(e)
        dists.append(e.value)
    limit = mc.tol("exp_law_limit", EXP_LAW_LIMIT)
    decreasing = all(a > b for a, b in zip(dists, dists[1:]))
    rep.add(CheckEntry(
        "exp_law_trend", dists, f"strictly decreasing, last < {limit}", limit,
        decreasing and dists[-1] < limit, "limit", details={"n": list(cfg.exp_law_n)},
    ))

    log.info("hypothesis estimators")
    lo, hi = cfg.n_range
    grid = quadrature_grid(refine(sft.partition, sft.base, 4), cfg.setting("grid_ppc"))
    eps, slope, r2 = epsilon_decay(sft, psi, range(lo, hi + 1), grid)
    rep.add(CheckEntry("epsilon_decay_fit", {"slope": slope, "r_squared": r2}, "slope < 0, R2 > 0.95",
                       0.95, slope < 0 and r2 > 0.95, "regression", details={"eps": eps}))
    psi_mix = tilt_potential() if is_example else psi
    ph = estimate_phi(sft, psi_mix, cfg.omega, *cfg.phi_nm, range(cfg.gaps[0], cfg.gaps[1] + 1))
    independent = bool(np.max(ph.phi) < 1e-10)
    rep.add(CheckEntry(
        "phi_mixing_fit", {"slope": ph.slope, "r_squared": ph.r_squared}, "nonincreasing, R2 > 0.9",
        0.9, ph.nonincreasing and (independent or ph.r_squared > 0.9), "regression",
        note="exactly independent" if independent else "", details={"phi": ph.phi, "potential": psi_mix.name},
    ))
    b_lo, b_hi = cfg.setting("beta_n")
    be = estimate_beta(sft, psi, quadrature_grid(sft.partition, 8), cfg.word, range(b_lo, b_hi + 1))
    rep.add(CheckEntry("beta_return_rates", {"beta0": be.rate0, "beta1": be.rate1}, "both < 0", 0.0,
                       be.rate0 < 0 and be.rate1 < 0, "regression",
                       details={"beta0": be.beta0, "beta1": be.beta1, "skipped": be.skipped}))
    qs = q_table(cfg.word)
    reaches = any(q == n for n, q in qs if n >= 2)
    monotone = all(a[1] <= b[1] for a, b in zip(qs, qs[1:]))
    rep.add(CheckEntry("q_n_growth", qs, "q_n = n for some n >= 2", 0, reaches and monotone, "regression"))

    log.info("symmetry and non-mixing")
    if is_example:
        sgrid = quadrature_grid(sft.partition, 8)
        for n in range(1, cfg.setting("symmetry_n") + 1):
            rep.add(symmetry_check(sc, n, sgrid))
        ks = approach_sequence(sft.base.r, 6)
        rep.add(nonmixing_gap(sc, ks, points_per_cell=cfg.setting("nonmix_ppc")))
    else:
        for name in ("symmetry", "nonmixing_jensen_gap"):
            rep.add(CheckEntry(name, None, None, None, False, "oracle",
                               note="defined for example5 only", applicable=False))
    if out is not None:
        _write_json(out / "verify.json", rep.to_dict())
    return rep


# --- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quenched-sft", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["describe", "measure", "simulate", "verify"])
    p.add_argument("--config", metavar="PATH", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--workers", type=int, help="worker processes for Monte Carlo")
    p.add_argument("--out", metavar="DIR", help="directory for JSON/CSV outputs")
    p.add_argument("--profile", choices=["smoke", "full"], help="problem sizes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if os.environ.get("QUENCHED_SFT_VERBOSE") else logging.WARNING,
        format="%(message)s", stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config, seed=args.seed, workers=args.workers, profile=args.profile)
        out = None
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
        if args.command == "describe":
            d = describe(cfg)
            _print_describe(d)
            if out is not None:
                _write_json(out / "describe.json", _json_ready(d))
            return EXIT_OK
        if args.command == "measure":
            s = measure(cfg, out)
            print(json.dumps(_json_ready(s), sort_keys=True, indent=2))
            return EXIT_OK
        if args.command == "simulate":
            r = simulate(cfg, out)
            print(json.dumps({k: r[k] for k in ("void", "mean_counts", "dispersion_union")}, sort_keys=True, indent=2))
            ok = r["realization_invariants"]["consistent"]
            return EXIT_OK if ok else EXIT_FAIL
        rep = verify(cfg, out)
        for e in rep.applicable:
            print(f"{'PASS' if e.passed else 'FAIL'}  {e.name}")
        for e in rep.entries:
            if not e.applicable:
                print(f"N/A   {e.name}  ({e.note})")
        return EXIT_OK if rep.all_passed else EXIT_FAIL
    except (ConfigError, WordCapExceeded) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, HorizonError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
