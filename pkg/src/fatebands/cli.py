"""Command-line front end.

Subcommands::

    fatebands fit-effect     --data FILE [--kind K ...] [--estimand fate|fatt]
    fatebands overlap        --data FILE
    fatebands simulate       --config FILE --seed N
    fatebands make-synthetic --n N --seed N

Every subcommand writes into ``--out-dir`` and exits non-zero on failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._errors import DatasetError, FateBandsError, SeparationError
from .bands import BandKind, pointwise_t_band, simultaneous_band
from .effects import effect_standard_error, estimate_fate, estimate_fatt
from .fosr import fit_arm
from .io import fmt_float, load_toml, read_sample_csv, sha256_file, write_sample_csv, write_table
from .propensity import fit_logistic, overlap_report, predict_propensity
from .simulate import (
    BandType,
    CoverageReport,
    ScenarioConfig,
    default_spec,
    fixed_design,
    generate_replicate,
    simulate_scenario,
    true_fate,
)
from .simulate.dgp import GAMMA_MEN, GAMMA_WOMEN, DEFAULT_STRATA

log = logging.getLogger("fatebands")

DEFAULT_SCENARIOS = [
    {"name": "fixed-gauss", "design": "fixed", "error_family": "gauss",
     "band_types": ["I", "II", "III", "IV"]},
    {"name": "random-gauss", "design": "random", "error_family": "gauss",
     "band_types": ["II", "IV"]},
    {"name": "fixed-t10", "design": "fixed", "error_family": "t",
     "band_types": ["II", "IV"]},
]


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _pointwise_df(policy, n, K):
    return n - 1 if policy == "paper" else n - 2 * (K + 1)


# --------------------------------------------------------------------------- fit-effect

def cmd_fit_effect(args) -> int:
    sample, _ = read_sample_csv(args.data)
    kinds = [BandKind(k) for k in (args.kind or ["kr-gauss"])]
    kinds = list(dict.fromkeys(kinds))
    fit1, fit0 = fit_arm(sample, 1), fit_arm(sample, 0)
    if args.estimand == "fatt":
        est = estimate_fatt(fit1, fit0, sample.arm(1)[0])
    else:
        est = estimate_fate(fit1, fit0, sample.X)
    se = effect_standard_error(est)

    bands = []
    for kind in kinds:
        if kind is BandKind.POINTWISE_T:
            band = pointwise_t_band(est, args.alpha, _pointwise_df(args.df_policy, sample.n, sample.K))
        elif kind is BandKind.SIMULTANEOUS_KR_T:
            band = simultaneous_band(est, args.alpha, tail="t")
        else:
            band = simultaneous_band(est, args.alpha, tail="gauss")
        bands.append(band)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = ["t", "estimate", "se"]
    for b in bands:
        k = b.kind.value
        header += [f"lower_{k}", f"upper_{k}", f"u_{k}"]
    rows = []
    for j, t in enumerate(sample.grid.points):
        row = [float(t), float(est.theta[j]), float(se[j])]
        for b in bands:
            row += [float(b.lower[j]), float(b.upper[j]), float(b.u[j])]
        rows.append(row)
    write_table(out / "effect.csv", header, rows)
    _write_json(out / "report.json", {
        "software": {"name": "fatebands", "version": __version__},
        "input": {"path": Path(args.data).name, "sha256": sha256_file(args.data)},
        "estimand": est.kind.value,
        "n": sample.n, "n1": sample.n1, "n0": sample.n0, "K": sample.K,
        "alpha": args.alpha,
        "df_policy": args.df_policy,
        "bands": [
            {"kind": b.kind.value, "df": b.df, "integral_tau": b.tau_integral,
             "u": b.threshold}
            for b in bands
        ],
    })
    log.info("wrote %s and %s", out / "effect.csv", out / "report.json")
    return 0


# --------------------------------------------------------------------------- overlap

def cmd_overlap(args) -> int:
    sample, _ = read_sample_csv(args.data)
    separation = False
    messages = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            model = fit_logistic(sample.X, sample.z, max_iter=args.max_iter)
        messages = [str(w.message) for w in caught]
    except SeparationError as exc:
        separation = True
        model = exc.model
        messages = [f"separation detected: {exc}"]
    for msg in messages:
        log.warning("%s", msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    pi = predict_propensity(model, sample.X)
    rep = overlap_report(pi, sample.z, n_bins=args.n_bins)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = ["intercept", *(sample.covariate_names or ())]
    write_table(out / "propensity_coefficients.csv", ["term", "estimate", "std_error"],
                [[nm, float(g), float(s)] for nm, g, s in zip(names, model.gamma, model.std_errors)])
    edges = rep.bin_edges
    write_table(out / "overlap_histogram.csv", ["bin_lower", "bin_upper", "treated", "control"],
                [[float(edges[i]), float(edges[i + 1]), int(rep.histogram_treated[i]),
                  int(rep.histogram_control[i])] for i in range(len(edges) - 1)])
    _write_json(out / "overlap.json", {
        "software": {"name": "fatebands", "version": __version__},
        "input": {"path": Path(args.data).name, "sha256": sha256_file(args.data)},
        "n": sample.n, "n1": sample.n1, "n0": sample.n0,
        "converged": model.converged,
        "iterations": model.iterations,
        "separation_detected": separation,
        "warnings": messages,
        "min_pi_treated": rep.min_pi_treated,
        "max_pi_treated": rep.max_pi_treated,
        "min_pi_control": rep.min_pi_control,
        "max_pi_control": rep.max_pi_control,
    })
    return 0


# --------------------------------------------------------------------------- specs from config

def spec_from_config(section: dict | None, error_family: str | None = None, **overrides):
    section = dict(section or {})
    section.update({k: v for k, v in overrides.items() if v is not None})
    gamma = section.get("gamma", "men")
    if isinstance(gamma, str):
        try:
            gamma = {"men": GAMMA_MEN, "women": GAMMA_WOMEN}[gamma]
        except KeyError:
            raise DatasetError(f"unknown gamma preset {gamma!r}") from None
    known = {"grid_size", "sigma_scale", "nu", "pool_size", "pool_seed", "gamma",
             "null_effect", "length_scales", "error_family"}
    extra = set(section) - known
    if extra:
        raise DatasetError(f"unknown [dgp] keys: {sorted(extra)}")
    return default_spec(
        grid_size=int(section.get("grid_size", 43)),
        error_family=error_family or section.get("error_family", "gauss"),
        nu=float(section.get("nu", 10.0)),
        sigma_scale=float(section.get("sigma_scale", 1.0)),
        null_effect=bool(section.get("null_effect", False)),
        pool_size=int(section.get("pool_size", 27805)),
        pool_seed=int(section.get("pool_seed", 1954)),
        gamma=np.asarray(gamma, dtype=float),
        length_scales=tuple(section.get("length_scales", (0.18, 0.20))),
    )


# --------------------------------------------------------------------------- simulate

def cmd_simulate(args) -> int:
    if args.seed is None:
        raise DatasetError("simulate requires --seed")
    cfg = load_toml(args.config) if args.config else {}
    sim = cfg.get("simulation", {})
    scenarios = cfg.get("scenario", DEFAULT_SCENARIOS)
    report = CoverageReport()
    sample_rows = []
    for idx, sc in enumerate(scenarios):
        name = sc.get("name", f"scenario{idx}")
        family = sc.get("error_family", "gauss")
        spec = spec_from_config(cfg.get("dgp"), error_family=family)
        sizes = sc.get("sizes", sim.get("sizes", [250, 500, 1000]))
        types = sc.get("band_types", sim.get("band_types", ["I", "II", "III", "IV"]))
        for n in sizes:
            config = ScenarioConfig(
                design=sc.get("design", "fixed"),
                n=int(n),
                master_seed=args.seed,
                replicates=int(sc.get("replicates", sim.get("replicates", 1000))),
                alpha=float(sim.get("alpha", args.alpha)),
                band_types=tuple(types),
                strata=tuple(sim.get("strata", DEFAULT_STRATA)),
                df_policy=sc.get("df_policy", sim.get("df_policy", args.df_policy)),
                simultaneous_tail=sim.get("simultaneous_tail", "gauss"),
                label=name,
            )
            log.info("scenario %s n=%d (%d replicates)", name, n, config.replicates)
            try:
                result = simulate_scenario(spec, config,
                                           n_jobs=args.workers or int(sim.get("workers", 1)))
            except FateBandsError as exc:
                raise type(exc)(f"scenario {name!r}, n={n}: {exc}") from exc
            report.extend(result.report())
            rec = result.records[0]
            for j, t in enumerate(result.grid_points):
                row = [name, int(n), float(t), float(result.truth[j]), float(rec.theta_hat[j])]
                for bt in BandType:
                    if bt in config.band_types:
                        row += [float(rec.lower[bt][j]), float(rec.upper[bt][j])]
                    else:
                        row += ["", ""]
                sample_rows.append(row)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "coverage.csv").write_text(report.to_csv(), encoding="utf-8")
    _write_table1(out / "coverage_table.csv", report)
    header = ["scenario", "n", "t", "truth", "estimate"]
    for bt in BandType:
        header += [f"lower_{bt.value}", f"upper_{bt.value}"]
    write_table(out / "sample_bands.csv", header, sample_rows)
    _write_json(out / "coverage_report.json", {
        "software": {"name": "fatebands", "version": __version__},
        "seed": args.seed,
        "config_sha256": sha256_file(args.config) if args.config else None,
        "notes": report.notes,
        "rows": [r.__dict__ for r in report.rows],
    })
    return 0


def _write_table1(path, report: CoverageReport) -> None:
    """Wide layout: one row per (scenario, band type), one column per n."""
    sizes = sorted({r.n for r in report.rows})
    keys = list(dict.fromkeys((r.scenario, r.band_type) for r in report.rows))
    cells = {(r.scenario, r.band_type, r.n): r.coverage for r in report.rows}
    rows = []
    for sc, bt in keys:
        rows.append([sc, bt, *(format(cells[(sc, bt, n)], ".1f") if (sc, bt, n) in cells else ""
                               for n in sizes)])
    write_table(path, ["scenario", "type", *map(str, sizes)], rows)


# --------------------------------------------------------------------------- make-synthetic

def cmd_make_synthetic(args) -> int:
    if args.seed is None:
        raise DatasetError("make-synthetic requires --seed")
    cfg = load_toml(args.config) if args.config else {}
    spec = spec_from_config(cfg.get("dgp"), error_family=args.error_family,
                            sigma_scale=args.sigma_scale,
                            null_effect=True if args.null_effect else None)
    config = ScenarioConfig(design="fixed", n=args.n, master_seed=args.seed, replicates=1)
    X = fixed_design(spec, config)
    rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(2,)))
    sample, _ = generate_replicate(spec, X, rng)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_sample_csv(sample, out / "data.csv")
    fatt = sample.arm(1)[0].mean(axis=0) @ (spec.beta1 - spec.beta0)
    fate = true_fate(spec, X)
    write_table(out / "truth.csv", ["t", "fate", "fatt"],
                [[float(t), float(a), float(b)] for t, a, b in zip(spec.grid.points, fate, fatt)])
    terms = ["intercept", *spec.covariate_names]
    beta_rows = []
    for arm in (0, 1):
        for k, term in enumerate(terms):
            beta_rows.append([arm, term, *(float(v) for v in spec.beta(arm)[k])])
    write_table(out / "beta.csv", ["arm", "term", *("t=" + fmt_float(t) for t in spec.grid.points)],
                beta_rows)
    return 0


# --------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fatebands", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out-dir", default=".", help="output directory (default: .)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--df-policy", choices=["paper", "residual"], default="paper",
                        help="pointwise t df: n-1 (paper) or n-2(K+1) (residual)")
        sp.add_argument("--config", default=None, help="TOML config file")

    sp = sub.add_parser("fit-effect", help="estimate FATE/FATT with confidence bands")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--kind", action="append", choices=[k.value for k in BandKind],
                    help="band kind; repeat for several (default: kr-gauss)")
    sp.add_argument("--estimand", choices=["fate", "fatt"], default="fate")
    sp.set_defaults(func=cmd_fit_effect)

    sp = sub.add_parser("overlap", help="propensity score overlap diagnostic")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--n-bins", type=int, default=20)
    sp.add_argument("--max-iter", type=int, default=50)
    sp.set_defaults(func=cmd_overlap)

    sp = sub.add_parser("simulate", help="Monte Carlo coverage study")
    common(sp)
    sp.add_argument("--workers", type=int, default=None, help="replicate worker threads")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("make-synthetic", help="write one synthetic dataset with its truth")
    common(sp)
    sp.add_argument("--n", type=int, default=500)
    sp.add_argument("--sigma-scale", type=float, default=None)
    sp.add_argument("--null-effect", action="store_true", help="set beta1 = beta0")
    sp.add_argument("--error-family", choices=["gauss", "t"], default=None)
    sp.set_defaults(func=cmd_make_synthetic)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (FateBandsError, OSError) as exc:
        print(f"fatebands {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
