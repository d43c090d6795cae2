"""Command-line experiment runner.

Usage::

    fiberdeco <experiment> --config <path> [--seed N] [--out PREFIX]
    fiberdeco [<experiment>] --dump-defaults

Config files are flat ``key = value`` text (``#`` comments allowed).  Every
physical quantity carries its unit in the key name and unknown keys are
rejected.  Random fibers use numpy's PCG64 generator; ensemble member ``k``
of a run with seed ``s`` uses seed ``s + k``.

Exit codes: 0 success, 2 configuration error, 3 numerical or convergence
error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import franson_sim as fr
from .errors import ConvergenceWarning, DomainError, NumericalError
from .fiber_model import (PS_PER_KM, FiberRandomModel, FiberSpec, band_averaged_dgd,
                          generate_fiber, propagate, round_trip)
from .pmd_interferometer import (NO_COUPLING, STRONG_COUPLING, estimate_pmd,
                                 synthesize_interferogram)
from .polarization_core import PRESETS, faraday_mirror, poincare_from_jones
from .spectral_state import (SourceSpectrum, degree_of_polarization, make_spectral_state,
                             mean_polarization)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
EXPERIMENTS = ("depolarize", "roundtrip", "pmd-scan", "franson-sweep")

#: Column-name suffixes that declare a unit.
UNIT_SUFFIXES = ("_s", "_ps", "_ns", "_nm", "_um", "_m", "_km", "_rad", "_rad_s", "_ps_sqrtkm")
#: Columns that are dimensionless by nature.
DIMENSIONLESS = frozenset({"seed", "dop", "forward_dop", "return_dop", "visibility", "S_value",
                           "violated", "centered", "rate", "intensity", "density", "re_a", "im_a",
                           "re_b", "im_b", "passed"})


class ConfigError(Exception):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class Key:
    name: str
    kind: str           # int | float | str | floats
    default: Any
    help: str
    scale: float = 1.0  # factor to SI for float keys
    choices: tuple = ()


def _k(name, kind, default, help, scale=1.0, choices=()):
    return Key(name, kind, default, help, scale, choices)


_FIBER = [
    _k("trunk_length_m", "float", 100.0, "trunk length, m"),
    _k("length_jitter", "float", 0.0, "relative trunk-length jitter, uniform in [-j, j)"),
]
_SOURCE = [
    _k("center_nm", "float", 1550.0, "source center wavelength, nm", 1e-9),
    _k("shape", "str", "gaussian", "source line shape", choices=("gaussian", "rectangular")),
    _k("n_samples", "int", 2048, "frequency samples"),
    _k("span", "float", 2.0, "grid half-extent in spectral widths"),
    _k("polarization", "str", "H", "launch polarization preset", choices=tuple(PRESETS)),
]

SCHEMA: dict[str, list[Key]] = {
    "depolarize": [
        _k("seed", "int", 0, "base seed"),
        _k("n_seeds", "int", 20, "ensemble size"),
        _k("lengths_km", "floats", [23.0], "fiber lengths to sweep, km", 1e3),
        _k("widths_nm", "floats", [0.0, 60.0], "spectral widths to sweep (FWHM), nm; 0 = monochromatic", 1e-9),
        _k("beta_ps_per_km", "float", 5.0, "trunk birefringence, ps/km", PS_PER_KM),
        *[k if k.name != "length_jitter" else _k("length_jitter", "float", 0.5, k.help) for k in _FIBER],
        *_SOURCE,
    ],
    "roundtrip": [
        _k("seed", "int", 0, "base seed"),
        _k("n_seeds", "int", 20, "ensemble size"),
        _k("lengths_km", "floats", [23.0], "fiber lengths to sweep, km; 0 = no fiber", 1e3),
        _k("width_nm", "float", 60.0, "spectral width (FWHM), nm", 1e-9),
        _k("beta_ps_per_km", "float", 0.5, "trunk birefringence, ps/km", PS_PER_KM),
        *_FIBER,
        *[k if k.name != "n_samples" else _k("n_samples", "int", 512, k.help) for k in _SOURCE],
    ],
    "pmd-scan": [
        _k("seed", "int", 0, "fiber seed"),
        _k("fiber_file", "str", "", "fiber description file; empty = random fiber"),
        _k("fiber_length_km", "float", 72.9, "random fiber length, km", 1e3),
        _k("beta_ps_per_km", "float", 2.2206, "trunk birefringence, ps/km", PS_PER_KM),
        *_FIBER,
        _k("center_nm", "float", 1550.0, "source center wavelength, nm", 1e-9),
        _k("width_nm", "float", 66.0, "source spectral width (FWHM), nm", 1e-9),
        _k("shape", "str", "gaussian", "source line shape", choices=("gaussian", "rectangular")),
        _k("polarizer", "str", "D", "input polarizer and output analyzer preset", choices=tuple(PRESETS)),
        _k("pmd_coupling", "str", "auto", "estimator coupling regime; auto = none for collinear trunks",
           choices=("auto", "strong", "none")),
        _k("noise_rms", "float", 0.0, "additive detector noise, intensity units"),
    ],
    "franson-sweep": [
        _k("seed", "int", 0, "unused (deterministic); accepted for uniformity"),
        _k("detunings_nm", "floats", [0.0, 5.0, 10.0, 20.0, 30.0], "pair center minus lambda0, nm", 1e-9),
        _k("lengths_km", "floats", [17.0], "fiber length per arm, km", 1e3),
        _k("half_width_nm", "float", 35.0, "pair spectral half width (HWHM), nm", 1e-9),
        _k("shape", "str", "gaussian", "pair spectrum shape", choices=("gaussian", "rectangular")),
        _k("lambda0_nm", "float", 1310.0, "zero-dispersion wavelength, nm", 1e-9),
        _k("slope_ps_nm2_km", "float", 0.092, "dispersion slope, ps/(nm^2 km)", fr.PS_PER_NM2_KM),
        _k("validity_nm", "float", 60.0, "dispersion model validity half-band, nm", 1e-9),
        _k("out_of_band", "str", "exclude", "pairs outside the validity band",
           choices=fr.OUT_OF_BAND),
        _k("window_ps", "float", 300.0, "coincidence window, ps", 1e-12),
        _k("imbalance_ns", "float", 1.2, "interferometer arm imbalance, ns", 1e-9),
        _k("n_phases", "int", 64, "phase-sweep points"),
        _k("n_samples", "int", 2001, "detuning samples (odd)"),
        _k("visibility_factor", "float", 1.0, "flat-background visibility multiplier"),
    ],
}


def _fmt(value) -> str:
    if isinstance(value, list):
        return ", ".join(_fmt(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def dump_defaults(experiment: str) -> str:
    lines = [f"# {experiment} defaults"]
    for key in SCHEMA[experiment]:
        lines.append(f"# {key.help}" + (f" ({' | '.join(key.choices)})" if key.choices else ""))
        lines.append(f"{key.name} = {_fmt(key.default)}")
    return "\n".join(lines) + "\n"


def _parse_value(key: Key, raw: str):
    try:
        if key.kind == "int":
            value = int(raw)
        elif key.kind == "float":
            value = float(raw)
        elif key.kind == "floats":
            value = [float(x) for x in raw.replace(",", " ").split()]
            if not value:
                raise ValueError("empty list")
        else:
            value = raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{key.name}: cannot parse {raw!r} as {key.kind} ({exc})") from None
    if key.choices and value not in key.choices:
        raise ConfigError(f"{key.name}: {value!r} is not one of {', '.join(key.choices)}")
    if key.kind in ("float", "floats") and not np.all(np.isfinite(value)):
        raise ConfigError(f"{key.name}: values must be finite")
    return value


def parse_config(text: str, experiment: str) -> dict:
    """Parse flat ``key = value`` text into SI values for ``experiment``.

    Raises
    ------
    ConfigError
        On syntax errors, unknown keys or unparsable values.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    keys = {k.name: k for k in SCHEMA[experiment]}
    raw = dict(parser["config"])
    unknown = sorted(set(raw) - set(keys))
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r} for {experiment}")
    cfg = {}
    for name, key in keys.items():
        value = _parse_value(key, raw[name]) if name in raw else key.default
        if key.kind == "float":
            value = value * key.scale
        elif key.kind == "floats":
            value = [v * key.scale for v in value]
        cfg[name] = value
    return cfg


# ----------------------------------------------------------------- output


def _check_columns(columns) -> None:
    for col in columns:
        if col not in DIMENSIONLESS and not col.endswith(UNIT_SUFFIXES):
            raise AssertionError(f"column {col!r} lacks a unit suffix")


def csv_text(columns, rows) -> str:
    _check_columns(columns)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def json_text(record: dict) -> str:
    return json.dumps(record, sort_keys=True, indent=2) + "\n"


def write_outputs(files: dict[str, str]) -> None:
    """Write every file atomically (temp file + rename), in sorted order."""
    for path in sorted(files):
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(files[path])
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


# ------------------------------------------------------------ experiments


def _fiber(cfg, length, seed) -> FiberSpec:
    n = max(1, int(round(length / cfg["trunk_length_m"])))
    return generate_fiber(FiberRandomModel(n, cfg["trunk_length_m"], cfg["beta_ps_per_km"],
                                           seed, cfg["length_jitter"]))


def _unit(x: float, per_si: float) -> float:
    """SI value back in config units, rounded to undo the scaling error."""
    return float(f"{x * per_si:.12g}")


def _stats(values) -> dict:
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "std": float(arr.std(ddof=1)) if arr.size > 1 else 0.0}


def run_depolarize(cfg: dict, prefix: str) -> dict[str, str]:
    """DOP after one-way propagation, swept over width and length."""
    rows, summary = [], []
    pol = PRESETS[cfg["polarization"]]
    for width in cfg["widths_nm"]:
        spec = SourceSpectrum(cfg["shape"], cfg["center_nm"], width)
        state = make_spectral_state(spec, pol, cfg["n_samples"], cfg["span"])
        for length in cfg["lengths_km"]:
            dops = []
            for k in range(cfg["n_seeds"]):
                seed = cfg["seed"] + k
                dop = degree_of_polarization(propagate(_fiber(cfg, length, seed), state))
                dops.append(dop)
                rows.append((_unit(width, 1e9), _unit(length, 1e-3), seed, dop))
            st = _stats(dops)
            summary.append({"width_nm": _unit(width, 1e9), "length_km": _unit(length, 1e-3),
                            "mean_dop": st["mean"], "std_dop": st["std"]})
    return {f"{prefix}_dop.csv": csv_text(("width_nm", "length_km", "seed", "dop"), rows),
            f"{prefix}_summary.json": json_text({"experiment": "depolarize", "points": summary})}


def _angle(a, b) -> float:
    return float(math.atan2(np.linalg.norm(np.cross(a, b)), float(np.dot(a, b))))


def run_roundtrip(cfg: dict, prefix: str) -> dict[str, str]:
    """Forward and return DOP through a Faraday-mirror round trip."""
    pol = np.asarray(PRESETS[cfg["polarization"]])
    spec = SourceSpectrum(cfg["shape"], cfg["center_nm"], cfg["width_nm"])
    state = make_spectral_state(spec, pol, cfg["n_samples"], cfg["span"])
    m_in = poincare_from_jones(pol)
    rows, failures = [], 0
    for length in cfg["lengths_km"]:
        for k in range(cfg["n_seeds"]):
            seed = cfg["seed"] + k
            if length > 0:
                fiber = _fiber(cfg, length, seed)
                fwd = degree_of_polarization(propagate(fiber, state))
                back = round_trip(fiber, state)
            else:
                fwd = 1.0
                back = state.with_field(faraday_mirror(state.field))
            ret = degree_of_polarization(back)
            angle = _angle(mean_polarization(back), -m_in)
            ok = ret >= 0.998 and angle < 1e-6
            failures += not ok
            rows.append((_unit(length, 1e-3), seed, fwd, ret, angle, ok))
    record = {"experiment": "roundtrip", "runs": len(rows), "failures": failures,
              "all_passed": failures == 0,
              "min_return_dop": min(r[3] for r in rows),
              "max_angle_rad": max(r[4] for r in rows)}
    cols = ("length_km", "seed", "forward_dop", "return_dop", "angle_rad", "passed")
    return {f"{prefix}_roundtrip.csv": csv_text(cols, rows),
            f"{prefix}_summary.json": json_text(record)}


def _collinear(fiber: FiberSpec) -> bool:
    d = fiber.directions
    return bool(np.all(np.linalg.norm(np.cross(d, d[0]), axis=1) < 1e-12))


def run_pmd_scan(cfg: dict, prefix: str) -> dict[str, str]:
    """Synthesize an interferogram, estimate PMD and compare with the oracle."""
    if cfg["fiber_file"]:
        try:
            fiber = FiberSpec.load(cfg["fiber_file"])
        except OSError as exc:
            raise ConfigError(f"fiber_file: {exc}") from None
    else:
        fiber = _fiber(cfg, cfg["fiber_length_km"], cfg["seed"])
    spec = SourceSpectrum(cfg["shape"], cfg["center_nm"], cfg["width_nm"])
    pol = PRESETS[cfg["polarizer"]]
    coupling = cfg["pmd_coupling"]
    if coupling == "auto":
        coupling = "none" if _collinear(fiber) else "strong"
    k = NO_COUPLING if coupling == "none" else STRONG_COUPLING
    gram = synthesize_interferogram(fiber, spec, pol, noise_rms=cfg["noise_rms"], seed=cfg["seed"])
    est = estimate_pmd(gram, sigma_to_dgd=k)
    oracle = band_averaged_dgd(fiber, make_spectral_state(spec, pol, 512))
    record = est.to_record()
    record.update({
        "experiment": "pmd-scan",
        "coupling": coupling,
        "fiber_length_km": _unit(fiber.total_length, 1e-3),
        "n_trunks": len(fiber.trunks),
        "oracle_dgd_ps": oracle * 1e12,
        "relative_error": (est.delay - oracle) / oracle if oracle > 0 else None,
    })
    rows = zip(gram.delays, gram.displacement * 1e6, gram.intensity)
    return {f"{prefix}_interferogram.csv": csv_text(("delay_s", "displacement_um", "intensity"), rows),
            f"{prefix}_estimate.json": json_text(record)}


def run_franson_sweep(cfg: dict, prefix: str) -> dict[str, str]:
    """Two-photon visibility versus detuning from lambda0 and arm length."""
    sweep, fringes = [], []
    for length in cfg["lengths_km"]:
        prof = fr.DispersionProfile(cfg["lambda0_nm"], cfg["slope_ps_nm2_km"], length,
                                    cfg["validity_nm"])
        conf = fr.FransonConfig(arm_imbalance=cfg["imbalance_ns"],
                                coincidence_window=cfg["window_ps"],
                                profile_a=prof, profile_b=prof, n_phases=cfg["n_phases"],
                                visibility_factor=cfg["visibility_factor"],
                                out_of_band=cfg["out_of_band"])
        for det in cfg["detunings_nm"]:
            ens = fr.make_biphoton_ensemble(cfg["lambda0_nm"] + det, cfg["half_width_nm"],
                                            cfg["shape"], cfg["n_samples"])
            res = fr.coincidence_rate(ens, conf)
            s, violated = fr.chsh_check(res.visibility)
            sweep.append((_unit(det, 1e9), _unit(length, 1e-3), res.visibility, s, violated, det == 0))
            fringes.extend((_unit(det, 1e9), _unit(length, 1e-3), ph, r) for ph, r in res.curve)
    cols = ("detuning_nm", "length_km", "visibility", "S_value", "violated", "centered")
    return {f"{prefix}_visibility.csv": csv_text(cols, sweep),
            f"{prefix}_fringes.csv": csv_text(("detuning_nm", "length_km", "phase_rad", "rate"), fringes)}


RUNNERS: dict[str, Callable[[dict, str], dict[str, str]]] = {
    "depolarize": run_depolarize,
    "roundtrip": run_roundtrip,
    "pmd-scan": run_pmd_scan,
    "franson-sweep": run_franson_sweep,
}


# --------------------------------------------------------------------- main


def _key_table() -> str:
    out = ["config keys (key = default: description):"]
    for exp, keys in SCHEMA.items():
        out.append(f"  [{exp}]")
        for key in keys:
            choice = f" ({' | '.join(key.choices)})" if key.choices else ""
            out.append(f"    {key.name} = {_fmt(key.default)}: {key.help}{choice}")
    return "\n".join(out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fiberdeco", description="Fiber polarization and dispersion decoherence experiments.",
        epilog=_key_table() + "\n\nexit codes: 0 success, 2 config error, 3 numerical error",
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="output path prefix (default: fiberdeco_<experiment>)")
    parser.add_argument("--dump-defaults", action="store_true",
                        help="print default config(s) and exit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.dump_defaults:
        exps = [args.experiment] if args.experiment else list(EXPERIMENTS)
        sys.stdout.write("\n".join(dump_defaults(e) for e in exps))
        return EXIT_OK
    if not args.experiment or not args.config:
        print("fiberdeco: error: an experiment and --config are required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"fiberdeco: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    prefix = args.out or f"fiberdeco_{args.experiment}"
    try:
        cfg = parse_config(text, args.experiment)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if cfg["seed"] < 0 or cfg["seed"] >= 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        with warnings.catch_warnings():
            warnings.simplefilter("error", ConvergenceWarning)
            files = RUNNERS[args.experiment](cfg, prefix)
    except (ConfigError, DomainError) as exc:
        print(f"fiberdeco: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ConvergenceWarning, FloatingPointError) as exc:
        print(f"fiberdeco: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    write_outputs(files)
    for path in sorted(files):
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
