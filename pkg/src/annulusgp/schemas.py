"""JSON schemas for the run configuration and every JSON file the CLI writes."""

_NUM = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_STR = {"type": "string"}


def _obj(props, required=None, extra=False):
    return {
        "type": "object",
        "properties": props,
        "required": list(props) if required is None else required,
        "additionalProperties": extra,
    }


CONFIG = _obj(
    {
        "data": {"type": ["string", "null"]},
        "chains_dir": {"type": ["string", "null"]},
        "fieldspec": {"type": ["string", "null"]},
        "rakes": {"type": "array", "items": _NUM, "minItems": 1},
        "probes": {"type": "array", "items": _NUM, "minItems": 1},
        "noise_std": {"type": ["number", "null"], "minimum": 0},
        "harmonics": {"type": "array", "items": _POS_INT, "minItems": 1},
        "max_harmonic": {"type": ["integer", "null"], "minimum": 1},
        "prior": _obj({
            "variant": {"enum": ["simple", "horseshoe"]},
            "epsilon": {"type": "number", "exclusiveMinimum": 0},
            "beta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "gamma": {"type": "number", "exclusiveMinimum": 0},
            "s": {"type": "number", "exclusiveMinimum": 0},
        }, required=[]),
        "sampler": _obj({
            "chains": _POS_INT,
            "tune": {"type": "integer", "minimum": 0},
            "draws": _POS_INT,
            "target_accept": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "max_tree_depth": _POS_INT,
        }, required=[]),
        "geometry": _obj({
            "r_inner": {"type": "number", "exclusiveMinimum": 0},
            "r_outer": {"type": "number", "exclusiveMinimum": 0},
        }, required=[]),
        "grid": _obj({"n_r": _POS_INT, "n_theta": _POS_INT}, required=[]),
        "max_draws": _POS_INT,
        "threshold": _NONNEG,
        "anomaly": _obj({"mad_factor": _NONNEG, "abs_threshold": _NONNEG}, required=[]),
        "placement": _obj({"restarts": _POS_INT, "max_draws": _POS_INT}, required=[]),
        "study": _obj({
            "trials": _POS_INT,
            "rake_counts": {"type": "array", "items": _POS_INT, "minItems": 1},
            "lattice_step": {"type": "number", "exclusiveMinimum": 0},
            "chains": _POS_INT,
            "tune": {"type": "integer", "minimum": 0},
            "draws": _POS_INT,
            "max_draws": _POS_INT,
        }, required=[]),
        "seed": {"type": "integer", "minimum": 0},
        "threads": _POS_INT,
        "out": _STR,
    },
    required=[],
)

GENERATE = _obj({
    "truth": _NUM,
    "n_readings": _POS_INT,
    "noise_std": _NONNEG,
    "seed": {"type": "integer"},
    "measurements_csv": _STR,
    "field_grid_csv": _STR,
    "fieldspec": _STR,
})

FIT = _obj({
    "data": _STR,
    "harmonics": {"type": "array", "items": _POS_INT},
    "prior": {"type": "object"},
    "geometry": {"type": "object"},
    "sampler": {"type": "object"},
    "seed": {"type": "integer"},
    "n_readings": _POS_INT,
    "excluded": {"type": "array"},
})

DIAGNOSTICS = _obj({
    "max_rhat": _NUM,
    "geweke_fraction_within_2": _NONNEG,
    "rhat": {"type": "object", "additionalProperties": _NUM},
    "ess": {"type": "object", "additionalProperties": _NUM},
    "geweke": {"type": "object"},
    "autocorr": {"type": "object"},
    "divergences": {"type": "array", "items": {"type": "integer"}},
    "step_sizes": {"type": "array", "items": _NUM},
})

PREDICTION = _obj({"grid_csv": _STR, "n_points": _POS_INT, "n_draws": _POS_INT})

AREA = _obj({
    "mean": _NUM,
    "std": _NONNEG,
    "n_draws": _POS_INT,
    "per_draw_csv_path": _STR,
    "sector_average": _NUM,
})

_PARTS = _obj({"measurement": _NUM, "sampling": _NUM, "total": _NUM, "residual": _NONNEG})

DECOMPOSITION = _obj({"area": _PARTS, "grid_csv": _STR, "per_draw_csv": _STR, "n_draws": _POS_INT})

SENSITIVITY = _obj({"csv": _STR, "n_readings": _POS_INT, "n_draws": _POS_INT})

PLACEMENT = _obj({
    "theta_hat_deg": {"type": "number", "minimum": 0, "exclusiveMaximum": 360},
    "sigma2_before": _NONNEG,
    "sigma2_after": _NONNEG,
    "converged": {"type": "boolean"},
    "n_draws": _POS_INT,
    "scan_csv": _STR,
})

STUDY = _obj({
    "csv": _STR,
    "n_rows": _POS_INT,
    "trials": _POS_INT,
    "rake_counts": {"type": "array", "items": _POS_INT},
    "truth": _NUM,
})
