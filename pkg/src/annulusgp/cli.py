"""Command-line batch interface.

Every subcommand writes CSV/JSON files into ``--out`` and never plots.
Settings resolve as command-line flags > ``--config`` JSON file > defaults.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure,
1 output failed its schema check.

Examples::

    annulusgp generate --out run --rakes 9,45,97,135,174,253,337
    annulusgp fit --out run --data run/measurements.csv
    annulusgp area --out run
    annulusgp place --out run
    annulusgp study --out study --trials 40 --rake-counts 2,3,4,5,6,7,8,9,10,11,12
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np
from scipy.linalg import LinAlgError

from . import schemas
from .core import PROBE_RADII, THETA_A, AnnulusGeometry, HarmonicModel, NumericalError
from .dataio import (
    IngestError,
    SyntheticFieldSpec,
    generate_field,
    ingest,
    random_rakes,
    sample_field,
    tabulate_selection,
    write_measurements,
)
from .design import dmu_df, dmu_dX, dsigma2_dX, place_rake
from .posterior import PriorSpec, ensemble_predict
from .quadrature import ensemble_area_average, sector_area_average
from .sampler import SamplerConfig, SamplerError, default_n_jobs, diagnose, read_chains, write_chains
from .uncertainty import ensemble_decomposition, field_decomposition
from .workflow import fit, run_trial, select_states

log = logging.getLogger("annulusgp")

EXIT_OK = 0
EXIT_SCHEMA = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DEFAULTS = {
    "data": None,
    "chains_dir": None,
    "fieldspec": None,
    "rakes": list(THETA_A),
    "probes": list(PROBE_RADII),
    "noise_std": None,
    "harmonics": [1, 4, 7, 12, 14],
    "max_harmonic": None,
    "prior": {"variant": "simple", "epsilon": 1.0, "beta": 0.1, "gamma": 30.0, "s": 1.0},
    "sampler": {"chains": 4, "tune": 500, "draws": 1000, "target_accept": 0.9, "max_tree_depth": 10},
    "geometry": {"r_inner": 0.5, "r_outer": 1.0},
    "grid": {"n_r": 21, "n_theta": 72},
    "max_draws": 200,
    "threshold": 0.05,
    "anomaly": {"mad_factor": 5.0, "abs_threshold": 50.0},
    "placement": {"restarts": 24, "max_draws": 50},
    "study": {"trials": 40, "rake_counts": list(range(2, 13)), "lattice_step": 5.0,
              "chains": 2, "tune": 300, "draws": 300, "max_draws": 100},
    "seed": 0,
    "threads": 1,
    "out": "out",
}

# flag dest -> path in the config tree
_FLAG_PATHS = {
    "data": ("data",),
    "chains_dir": ("chains_dir",),
    "fieldspec": ("fieldspec",),
    "rakes": ("rakes",),
    "probes": ("probes",),
    "noise_std": ("noise_std",),
    "harmonics": ("harmonics",),
    "max_harmonic": ("max_harmonic",),
    "prior": ("prior", "variant"),
    "epsilon": ("prior", "epsilon"),
    "beta": ("prior", "beta"),
    "chains": ("sampler", "chains"),
    "tune": ("sampler", "tune"),
    "draws": ("sampler", "draws"),
    "target_accept": ("sampler", "target_accept"),
    "max_draws": ("max_draws",),
    "threshold": ("threshold",),
    "restarts": ("placement", "restarts"),
    "trials": ("study", "trials"),
    "rake_counts": ("study", "rake_counts"),
    "seed": ("seed",),
    "threads": ("threads",),
    "out": ("out",),
}


class ConfigError(Exception):
    pass


class SchemaError(Exception):
    pass


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(args) -> dict:
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            user = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        try:
            jsonschema.validate(user, schemas.CONFIG)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"{path}: {exc.message}") from None
        cfg = _merge(cfg, user)
    for dest, keys in _FLAG_PATHS.items():
        val = getattr(args, dest, None)
        if val is None:
            continue
        node = cfg
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = val
    try:
        jsonschema.validate(cfg, schemas.CONFIG)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid setting: {exc.message}") from None
    return cfg


# --------------------------------------------------------------------------
# helpers


def _geometry(cfg):
    try:
        return AnnulusGeometry(cfg["geometry"]["r_inner"], cfg["geometry"]["r_outer"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _model(cfg):
    try:
        if cfg["max_harmonic"]:
            return HarmonicModel.up_to(cfg["max_harmonic"])
        return HarmonicModel(tuple(cfg["harmonics"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _prior(cfg):
    try:
        return PriorSpec(**cfg["prior"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _sampler(cfg, section=None, seed=None):
    s = dict(cfg["sampler"])
    if section:
        s.update({k: section[k] for k in ("chains", "tune", "draws") if k in section})
    try:
        return SamplerConfig(seed=cfg["seed"] if seed is None else seed, **s)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _out(cfg) -> Path:
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    return out


def _write_json(path, obj, schema):
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"{path.name}: {exc.message}") from None
    path.write_text(json.dumps(obj, indent=2))
    return path


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def _read_data(path, cfg):
    if not path:
        raise ConfigError("no measurement file given (use --data or the 'data' config key)")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"measurement file not found: {p}")
    try:
        return ingest(p, cfg["anomaly"]["mad_factor"], cfg["anomaly"]["abs_threshold"])
    except IngestError as exc:
        raise ConfigError(str(exc)) from None


def _chain_dir(cfg) -> Path:
    return Path(cfg["chains_dir"]) if cfg["chains_dir"] else Path(cfg["out"]) / "chains"


def _load_fit(cfg):
    """Chains, data and model of a previous ``fit`` run."""
    d = _chain_dir(cfg)
    meta_path = d / "fit.json"
    if not meta_path.exists():
        raise ConfigError(f"no fit found: expected {meta_path} (run 'fit' first or pass --chains)")
    try:
        chains = read_chains(d)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    meta = json.loads(meta_path.read_text())
    data, _ = _read_data(cfg["data"] or meta["data"], cfg)
    model = HarmonicModel(tuple(meta["harmonics"]))
    return chains, data, model


def _grid(cfg):
    r = np.linspace(0.0, 1.0, cfg["grid"]["n_r"])
    t = np.arange(cfg["grid"]["n_theta"]) * (360.0 / cfg["grid"]["n_theta"])
    return r, t


# --------------------------------------------------------------------------
# subcommands


def cmd_generate(cfg):
    out = _out(cfg)
    try:
        spec = SyntheticFieldSpec.from_json(cfg["fieldspec"]) if cfg["fieldspec"] \
            else SyntheticFieldSpec.default()
    except (OSError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad field spec: {exc}") from None
    geometry = _geometry(cfg)
    field = generate_field(spec, geometry)
    noise = spec.noise_std if cfg["noise_std"] is None else cfg["noise_std"]
    try:
        data = sample_field(field, cfg["rakes"], cfg["probes"], noise, cfg["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    spec.to_json(out / "fieldspec.json")
    write_measurements(out / "measurements.csv", data)
    r, t = _grid(cfg)
    R, T = np.meshgrid(r, t, indexing="ij")
    _write_csv(out / "field_grid.csv", ["r", "theta_deg", "value"],
               zip(R.ravel(), T.ravel(), field(R, T).ravel()))
    summary = {"truth": field.true_area_average, "n_readings": len(data), "noise_std": noise,
               "seed": cfg["seed"], "measurements_csv": "measurements.csv",
               "field_grid_csv": "field_grid.csv", "fieldspec": "fieldspec.json"}
    _write_json(out / "generate.json", summary, schemas.GENERATE)
    print(f"wrote {len(data)} readings to {out / 'measurements.csv'}; true area average "
          f"{field.true_area_average:.6f}")


def cmd_fit(cfg):
    out = _out(cfg)
    data, report = _read_data(cfg["data"], cfg)
    if data.noise is not None:
        raise ConfigError("fit samples the noise level; drop the sigma column from the data file")
    model = _model(cfg)
    prior = _prior(cfg)
    sampler_cfg = _sampler(cfg)
    n_jobs = default_n_jobs(cfg["threads"])
    log.info("fitting %d readings, %d modes, %s prior", len(data), model.n_modes, prior.variant)
    chains = fit(data, model, prior, sampler_cfg, n_jobs)
    diag = diagnose(chains)
    cdir = _chain_dir(cfg)
    write_chains(chains, cdir, diag)
    meta = {"data": str(Path(cfg["data"]).resolve()), "harmonics": list(model.frequencies),
            "prior": cfg["prior"], "geometry": cfg["geometry"], "sampler": cfg["sampler"],
            "seed": cfg["seed"], "n_readings": len(data),
            "excluded": [{"line": e[0], "r": e[1], "theta_deg": e[2], "value": str(e[3]),
                          "reason": e[4]} for e in report.excluded]}
    _write_json(cdir / "fit.json", meta, schemas.FIT)
    _write_diagnostics(out, diag)
    if prior.variant == "horseshoe":
        tabulate_selection(chains, model, cfg["threshold"]).to_csv(out / "selection_table.csv")
    print(f"{len(chains)} chains x {sampler_cfg.draws} draws; max R-hat {diag.max_rhat():.3f}; "
          f"Geweke |z|<=2: {100 * diag.geweke_fraction_within():.0f}%; "
          f"excluded readings: {len(report)}")


def _write_diagnostics(out, diag):
    d = diag.to_dict()
    d.pop("parameters")
    d["max_rhat"] = diag.max_rhat()
    d["geweke_fraction_within_2"] = diag.geweke_fraction_within()
    _write_json(out / "diagnostics.json", d, schemas.DIAGNOSTICS)


def cmd_diagnostics(cfg):
    out = _out(cfg)
    d = _chain_dir(cfg)
    try:
        chains = read_chains(d)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    diag = diagnose(chains)
    _write_diagnostics(out, diag)
    print(f"{'parameter':<16}{'R-hat':>8}{'ESS':>10}{'max |z|':>10}")
    for name in diag.parameters:
        z = max(abs(v) for v in diag.geweke[name])
        print(f"{name:<16}{diag.rhat[name]:>8.3f}{diag.ess[name]:>10.0f}{z:>10.2f}")
    print(f"divergences per chain: {diag.divergences}")


def cmd_predict(cfg):
    out = _out(cfg)
    chains, data, model = _load_fit(cfg)
    states = select_states(chains, cfg["max_draws"])
    r, t = _grid(cfg)
    R, T = np.meshgrid(r, t, indexing="ij")
    X = np.column_stack([R.ravel(), T.ravel()])
    mean, var = ensemble_predict(data, states, X, model, add_offset=True)
    _write_csv(out / "prediction_grid.csv", ["r", "theta_deg", "mean", "std"],
               zip(X[:, 0], X[:, 1], mean, np.sqrt(np.clip(var, 0, None))))
    _write_json(out / "prediction.json", {"grid_csv": "prediction_grid.csv", "n_points": len(X),
                                          "n_draws": len(states)}, schemas.PREDICTION)
    print(f"predicted {len(X)} grid points from {len(states)} draws")


def cmd_area(cfg):
    out = _out(cfg)
    chains, data, model = _load_fit(cfg)
    geometry = _geometry(cfg)
    states = select_states(chains, cfg["max_draws"])
    area = ensemble_area_average(data, states, model, geometry)
    sector = sector_area_average(data, geometry)
    _write_csv(out / "area_per_draw.csv", ["draw", "mean", "variance"],
               zip(range(area.n_draws), area.per_draw_mean, area.per_draw_variance))
    summary = {"mean": area.mean, "std": area.std, "n_draws": area.n_draws,
               "per_draw_csv_path": "area_per_draw.csv", "sector_average": sector}
    _write_json(out / "area_average.json", summary, schemas.AREA)
    print(f"area average {area.mean:.4f} +/- {area.std:.4f} (sector average {sector:.4f})")


def cmd_decompose(cfg):
    out = _out(cfg)
    chains, data, model = _load_fit(cfg)
    geometry = _geometry(cfg)
    states = select_states(chains, cfg["max_draws"])
    dec = ensemble_decomposition(data, states, model, geometry)
    r, t = _grid(cfg)
    rows = []
    for ri in r:
        X = np.column_stack([np.full(t.size, ri), t])
        meas = np.zeros(t.size)
        samp = np.zeros(t.size)
        for s in states:
            d = field_decomposition(data, s, X, model)
            meas += np.diag(d.measurement)
            samp += np.diag(d.sampling)
        meas /= len(states)
        samp /= len(states)
        rows += zip(X[:, 0], X[:, 1], np.sqrt(np.clip(samp, 0, None)),
                    np.sqrt(np.clip(meas, 0, None)))
    _write_csv(out / "decomposition_grid.csv",
               ["r", "theta_deg", "sampling_std", "measurement_std"], rows)
    _write_csv(out / "decomposition_per_draw.csv", ["draw", "measurement", "sampling", "total"],
               zip(range(len(states)), dec.per_draw_measurement, dec.per_draw_sampling,
                   dec.per_draw_total))
    resid = abs(dec.measurement + dec.sampling - dec.total) / max(abs(dec.total), 1e-300)
    summary = {"area": {"measurement": dec.measurement, "sampling": dec.sampling,
                        "total": dec.total, "residual": resid},
               "grid_csv": "decomposition_grid.csv", "per_draw_csv": "decomposition_per_draw.csv",
               "n_draws": len(states)}
    _write_json(out / "decomposition.json", summary, schemas.DECOMPOSITION)
    print(f"area variance {dec.total:.4e} = measurement {dec.measurement:.4e} "
          f"+ sampling {dec.sampling:.4e}")


def cmd_sensitivity(cfg):
    out = _out(cfg)
    chains, data, model = _load_fit(cfg)
    geometry = _geometry(cfg)
    states = select_states(chains, cfg["max_draws"])
    df = np.mean([dmu_df(data, s, model, geometry) for s in states], axis=0)
    dmu = np.mean([dmu_dX(data, s, model, geometry) for s in states], axis=0)
    dvar = np.mean([dsigma2_dX(data, s, model, geometry) for s in states], axis=0)
    _write_csv(out / "sensitivity.csv",
               ["r", "theta_deg", "dmu_df", "dmu_dr", "dmu_dtheta", "dsigma2_dr", "dsigma2_dtheta"],
               zip(data.r, data.theta, df, dmu[:, 0], dmu[:, 1], dvar[:, 0], dvar[:, 1]))
    _write_json(out / "sensitivity.json", {"csv": "sensitivity.csv", "n_readings": len(data),
                                           "n_draws": len(states)}, schemas.SENSITIVITY)
    print(f"sensitivities for {len(data)} readings from {len(states)} draws")


def cmd_place(cfg):
    out = _out(cfg)
    chains, data, model = _load_fit(cfg)
    geometry = _geometry(cfg)
    states = select_states(chains, cfg["placement"]["max_draws"])
    res = place_rake(data, states, cfg["probes"], model, geometry,
                     restarts=cfg["placement"]["restarts"])
    _write_csv(out / "placement_scan.csv", ["theta_deg", "sigma2"], res.scan)
    summary = {"theta_hat_deg": res.theta_hat, "sigma2_before": res.sigma2_before,
               "sigma2_after": res.sigma2_after, "converged": res.converged,
               "n_draws": len(states), "scan_csv": "placement_scan.csv"}
    _write_json(out / "placement.json", summary, schemas.PLACEMENT)
    flag = "" if res.converged else " (some restarts hit the iteration limit)"
    print(f"new rake at {res.theta_hat:.2f} deg: variance {res.sigma2_before:.4e} -> "
          f"{res.sigma2_after:.4e}{flag}")


def _study_task(args):
    return run_trial(*args[:-1], **args[-1])


def cmd_study(cfg):
    out = _out(cfg)
    st = cfg["study"]
    try:
        spec = SyntheticFieldSpec.from_json(cfg["fieldspec"]) if cfg["fieldspec"] \
            else SyntheticFieldSpec.default()
    except (OSError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad field spec: {exc}") from None
    geometry = _geometry(cfg)
    field = generate_field(spec, geometry)
    model = _model(cfg)
    prior = _prior(cfg)
    upper = 360.0 - st["lattice_step"]
    n_lattice = int(round(360.0 / st["lattice_step"]))
    tasks, keys = [], []
    for n_rakes in st["rake_counts"]:
        if n_rakes > n_lattice:
            raise ConfigError(f"{n_rakes} rakes do not fit on a {st['lattice_step']} deg lattice")
        for trial in range(st["trials"]):
            rng = np.random.default_rng([cfg["seed"], n_rakes, trial])
            rakes = random_rakes(n_rakes, rng, st["lattice_step"], upper)
            noise_seed = int(rng.integers(2**31))
            scfg = _sampler(cfg, st, seed=noise_seed)
            tasks.append((field, rakes, cfg["probes"], model, prior, scfg, geometry,
                          cfg["noise_std"], {"seed": noise_seed, "max_draws": st["max_draws"]}))
            keys.append(trial)
    n_jobs = default_n_jobs(cfg["threads"])
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(_study_task, tasks))
    else:
        results = [_study_task(t) for t in tasks]
    cols = ["trial", "n_rakes", "rakes", "truth", "sector_mean", "bayes_mean", "bayes_std",
            "sigma2_measurement", "sigma2_sampling"]
    _write_csv(out / "study.csv", cols, ([k] + [r[c] for c in cols[1:]] for k, r in zip(keys, results)))
    _write_json(out / "study.json", {"csv": "study.csv", "n_rows": len(results),
                                     "trials": st["trials"], "rake_counts": st["rake_counts"],
                                     "truth": field.true_area_average}, schemas.STUDY)
    print(f"{len(results)} trials written to {out / 'study.csv'}")


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "area": cmd_area,
    "decompose": cmd_decompose,
    "sensitivity": cmd_sensitivity,
    "place": cmd_place,
    "study": cmd_study,
    "diagnostics": cmd_diagnostics,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", help="JSON configuration file")
    g.add_argument("--seed", type=int, help="base random seed (default 0)")
    g.add_argument("--out", help="output directory (default ./out)")
    g.add_argument("--threads", type=int, help="worker processes for chains/trials (default 1)")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="annulusgp",
        description="Gaussian-process reconstruction and area averaging of annular rake data.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("Examples::", 1)[1],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    def model_opts(p):
        p.add_argument("--harmonics", type=_ints, help="candidate frequencies, e.g. 1,4,7,12,14")
        p.add_argument("--max-harmonic", dest="max_harmonic", type=int,
                       help="use every frequency 1..K instead of --harmonics")
        p.add_argument("--prior", choices=["simple", "horseshoe"])
        p.add_argument("--epsilon", type=float, help="upper bound of the noise-std prior")
        p.add_argument("--beta", type=float, help="horseshoe sparsity level")

    def sampler_opts(p):
        p.add_argument("--chains", type=int)
        p.add_argument("--tune", type=int)
        p.add_argument("--draws", type=int)
        p.add_argument("--target-accept", dest="target_accept", type=float)

    def fitted_opts(p):
        p.add_argument("--chains-dir", dest="chains_dir", help="directory written by 'fit'")
        p.add_argument("--data", help="override the measurement CSV recorded by 'fit'")
        p.add_argument("--max-draws", dest="max_draws", type=int,
                       help="use at most this many evenly spaced draws")

    p = add("generate", "sample the synthetic test field")
    p.add_argument("--fieldspec", help="field specification JSON (default: bundled)")
    p.add_argument("--rakes", type=_floats, help="rake angles in degrees")
    p.add_argument("--probes", type=_floats, help="probe radii in [0, 1]")
    p.add_argument("--noise-std", dest="noise_std", type=float)

    p = add("fit", "sample the hyperparameter posterior")
    p.add_argument("--data", help="measurement CSV (r,theta_deg,value[,sigma])")
    p.add_argument("--chains-dir", dest="chains_dir", help="where to write chains (default OUT/chains)")
    p.add_argument("--threshold", type=float, help="activity threshold for the selection table")
    model_opts(p)
    sampler_opts(p)

    for name, help_ in [("predict", "posterior mean/std on a polar grid"),
                        ("area", "Bayesian and sector area averages"),
                        ("decompose", "measurement vs sampling uncertainty"),
                        ("sensitivity", "derivatives of the area average")]:
        fitted_opts(add(name, help_))

    p = add("place", "optimal angle of one extra rake")
    fitted_opts(p)
    p.add_argument("--probes", type=_floats, help="probe radii on the new rake")
    p.add_argument("--restarts", type=int)

    p = add("study", "randomized rake-arrangement experiment")
    p.add_argument("--fieldspec")
    p.add_argument("--probes", type=_floats)
    p.add_argument("--noise-std", dest="noise_std", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--rake-counts", dest="rake_counts", type=_ints)
    model_opts(p)

    p = add("diagnostics", "recompute convergence diagnostics for saved chains")
    p.add_argument("--chains-dir", dest="chains_dir")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, SamplerError, LinAlgError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SchemaError as exc:
        print(f"output failed validation: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
