"""Synthetic test fields, measurement files and harmonic-selection tables.

Measurement CSV format (header required)::

    r,theta_deg,value[,sigma]

``r`` is the normalized radius, ``theta_deg`` the rake angle in degrees.
Missing readings are an empty ``value`` field or ``NaN``; they are dropped
at ingestion and listed in the exclusion report, as are anomalous readings.
"""
from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from .core import AnnulusGeometry, MeasurementSet, PosteriorChain, ProbeLocation, HarmonicModel

__all__ = [
    "SyntheticFieldSpec",
    "SyntheticField",
    "generate_field",
    "sample_field",
    "write_measurements",
    "ingest",
    "IngestError",
    "ExclusionReport",
    "SelectionTable",
    "tabulate_selection",
    "frequency_activity",
    "random_rakes",
]


@dataclass(frozen=True)
class SyntheticFieldSpec:
    """Ground-truth field: affine radial base plus harmonics with affine
    amplitude and phase profiles from hub (r=0) to casing (r=1)."""

    harmonics: tuple = (1, 4, 7, 12, 14)
    amplitude_hub: tuple = (1.5, 1.2, 1.0, 0.8, 0.6)
    amplitude_casing: tuple = (0.5, 0.8, 0.6, 0.5, 1.0)
    phase_hub_deg: tuple = (0.0, 30.0, 60.0, 90.0, 45.0)
    phase_casing_deg: tuple = (90.0, 120.0, 10.0, 150.0, 0.0)
    base_hub: float = -2.0
    base_casing: float = 4.0
    mean_level: float = 750.0
    noise_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        k = len(self.harmonics)
        for name in ("amplitude_hub", "amplitude_casing", "phase_hub_deg", "phase_casing_deg"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != k:
                raise ValueError(f"{name} needs {k} entries")
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "harmonics", tuple(int(w) for w in self.harmonics))
        if not self.noise_std >= 0:
            raise ValueError("noise_std must be nonnegative")

    @classmethod
    def default(cls) -> "SyntheticFieldSpec":
        """The pinned test field shipped with the package."""
        text = resources.files("annulusgp").joinpath("data/default_fieldspec.json").read_text()
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_dict(cls, d) -> "SyntheticFieldSpec":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    @classmethod
    def from_json(cls, path) -> "SyntheticFieldSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


class SyntheticField:
    """Deterministic field ``y(r, theta_deg)`` with its exact area average."""

    def __init__(self, spec: SyntheticFieldSpec, geometry: AnnulusGeometry = AnnulusGeometry(),
                 order=256):
        self.spec = spec
        self.geometry = geometry
        self.true_area_average = _area_average_of(self, geometry, order)

    def __call__(self, r, theta):
        s = self.spec
        r = np.asarray(r, dtype=float)
        t = np.deg2rad(np.asarray(theta, dtype=float))
        y = s.mean_level + s.base_hub + (s.base_casing - s.base_hub) * r
        for j, w in enumerate(s.harmonics):
            amp = s.amplitude_hub[j] + (s.amplitude_casing[j] - s.amplitude_hub[j]) * r
            ph = np.deg2rad(s.phase_hub_deg[j] + (s.phase_casing_deg[j] - s.phase_hub_deg[j]) * r)
            y = y + amp * np.cos(w * t - ph)
        return y


def _area_average_of(fn, geometry, order):
    # Gauss-Legendre in r, equispaced (exact for trig polynomials) in theta
    x, wr = np.polynomial.legendre.leggauss(order)
    r = 0.5 * (x + 1.0)
    wr = 0.5 * wr
    theta = np.arange(order) * (360.0 / order)
    R, T = np.meshgrid(r, theta, indexing="ij")
    vals = fn(R, T)
    inner = vals.mean(axis=1) * 2.0 * math.pi
    return float(geometry.nu * np.sum(wr * geometry.h(r) * inner))


def generate_field(spec: SyntheticFieldSpec | None = None,
                   geometry: AnnulusGeometry = AnnulusGeometry()) -> SyntheticField:
    return SyntheticField(spec or SyntheticFieldSpec.default(), geometry)


def sample_field(field: SyntheticField, rakes, probes, noise_std=None, seed=None) -> MeasurementSet:
    """Noisy readings on the ``probes x rakes`` grid (r-major order).

    The returned set leaves the noise level as a hyperparameter.
    """
    noise_std = field.spec.noise_std if noise_std is None else float(noise_std)
    seed = field.spec.seed if seed is None else seed
    r = np.repeat(np.asarray(probes, dtype=float), len(rakes))
    t = np.tile(np.asarray(rakes, dtype=float), len(probes))
    y = field(r, t)
    if noise_std > 0:
        y = y + np.random.default_rng(seed).normal(0.0, noise_std, y.size)
    return MeasurementSet([ProbeLocation(a, b) for a, b in zip(r, t)], y)


def random_rakes(n_rakes, rng, step=5.0, upper=355.0):
    """Distinct rake angles drawn on a ``step``-degree lattice in ``[0, upper]``."""
    lattice = np.arange(0.0, upper + 0.5 * step, step)
    return tuple(sorted(rng.choice(lattice, size=n_rakes, replace=False).tolist()))


def write_measurements(path, data: MeasurementSet, sigma=None, missing: Sequence[tuple] = ()):
    """Write readings (uncentered) in the CSV exchange format.

    ``missing`` lists extra ``(r, theta)`` rows written with an empty value.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["r", "theta_deg", "value"] + (["sigma"] if sigma is not None else [])
        w.writerow(header)
        sig = None if sigma is None else np.broadcast_to(np.asarray(sigma, float), (len(data),))
        for i, (p, v) in enumerate(zip(data.locations, data.raw_values)):
            row = [repr(float(p.r)), repr(float(p.theta)), repr(float(v))]
            if sig is not None:
                row.append(repr(float(sig[i])))
            w.writerow(row)
        for r, t in missing:
            w.writerow([repr(float(r)), repr(float(t)), ""] + ([""] if sigma is not None else []))


class IngestError(ValueError):
    pass


@dataclass
class ExclusionReport:
    """Rows dropped at ingestion: ``(line number, r, theta, raw value, reason)``."""

    excluded: list = field(default_factory=list)

    def __len__(self):
        return len(self.excluded)

    def reasons(self) -> Counter:
        return Counter(e[4] for e in self.excluded)


def ingest(path, mad_factor=5.0, abs_threshold=50.0):
    """Read a measurement CSV, dropping missing and anomalous readings.

    A reading is anomalous when it is more than ``mad_factor`` scaled median
    absolute deviations from the median *and* more than ``abs_threshold``
    away from it.

    Returns
    -------
    MeasurementSet, ExclusionReport
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if header[:3] != ["r", "theta_deg", "value"] or len(header) not in (3, 4) or \
                (len(header) == 4 and header[3] != "sigma"):
            raise IngestError(f"{path}: header must be r,theta_deg,value[,sigma], got {','.join(header)}")
        has_sigma = len(header) == 4
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                r = float(row[0])
                t = float(row[1])
                v = float(row[2]) if row[2].strip() else math.nan
                s = (float(row[3]) if row[3].strip() else math.nan) if has_sigma else None
            except ValueError:
                raise IngestError(f"{path}:{lineno}: unparseable field in {row}") from None
            if not (math.isfinite(r) and math.isfinite(t) and 0 <= r <= 1 and 0 <= t < 360):
                raise IngestError(f"{path}:{lineno}: location ({row[0]}, {row[1]}) out of range")
            rows.append((lineno, r, t, v, s))

    report = ExclusionReport()
    finite = [row for row in rows if math.isfinite(row[3])]
    for row in rows:
        if not math.isfinite(row[3]):
            report.excluded.append((row[0], row[1], row[2], row[3], "missing"))
    if finite:
        vals = np.array([row[3] for row in finite])
        med = float(np.median(vals))
        spread = 1.4826 * float(np.median(np.abs(vals - med)))
        keep = []
        for row in finite:
            dev = abs(row[3] - med)
            if dev > mad_factor * spread and dev > abs_threshold:
                report.excluded.append((row[0], row[1], row[2], row[3], "anomalous"))
            else:
                keep.append(row)
    else:
        keep = []
    if not keep:
        raise IngestError(f"{path}: every row was excluded")
    report.excluded.sort(key=lambda e: e[0])
    noise = None
    if has_sigma:
        sig = np.array([row[4] for row in keep])
        if np.all(np.isfinite(sig)):
            noise = sig**2
        elif np.any(np.isfinite(sig)):
            raise IngestError(f"{path}: sigma given for some retained rows but not all")
    data = MeasurementSet([ProbeLocation(row[1], row[2]) for row in keep],
                          [row[3] for row in keep], noise)
    return data, report


@dataclass
class SelectionTable:
    """Frequency subsets ranked by the share of draws in which they were active."""

    rows: list  # (tuple of frequencies, percent)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["subset", "percent"])
            for subset, pct in self.rows:
                w.writerow([" ".join(str(s) for s in subset), f"{pct:.6g}"])

    def top(self, n=10):
        return self.rows[:n]


def _active_sets(chains, model: HarmonicModel, threshold):
    if isinstance(chains, PosteriorChain):
        chains = [chains]
    lam = np.vstack([c.lam_matrix() for c in chains])
    if lam.shape[1] != model.n_modes:
        raise ValueError("chain does not match the harmonic model")
    per_freq = np.maximum(lam[:, 1::2], lam[:, 2::2])
    active = per_freq > threshold
    freqs = np.asarray(model.frequencies)
    return active, freqs


def tabulate_selection(chains, model: HarmonicModel, threshold=0.05) -> SelectionTable:
    """Rank the active frequency subsets over all draws.

    A frequency is active in a draw when the larger of its sine and cosine
    scales exceeds ``threshold``.
    """
    active, freqs = _active_sets(chains, model, threshold)
    counts = Counter(tuple(int(w) for w in freqs[row]) for row in active)
    n = active.shape[0]
    rows = sorted(((k, 100.0 * v / n) for k, v in counts.items()), key=lambda kv: (-kv[1], kv[0]))
    return SelectionTable(rows)


def frequency_activity(chains, model: HarmonicModel, threshold=0.05) -> dict:
    """Share of draws in which each frequency is active."""
    active, freqs = _active_sets(chains, model, threshold)
    return {int(w): float(a) for w, a in zip(freqs, active.mean(axis=0))}
