"""Command-line front end: config validation, single points, sweeps.

Exit codes are stable API: 0 success, 2 config/schema error, 3 unstable
operating point, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__, _kernels
from .core import SystemParams, occupations
from .dynamics import (STABILITY_EPS_FACTOR, build_diffusion, build_drift,
                       is_stable)
from .entanglement import (ModePair, log_negativity, reduced_covariance,
                           symplectic_eigenvalues_pt)
from .lyapunov import residual, residual_scale, solve_lyapunov
from .steady_state import (NoSteadyStateError, operating_point_direct,
                           operating_point_from_fields, solve_mean_fields)
from .sweep import (KERR_SIGNS, Axis, SweepSpec, export_table, run_sweep)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_NUMERICAL = 4

SCHEMA_VERSION = 1

ALL_PAIRS = (("a", "m"), ("a", "b"), ("a", "c"),
             ("m", "b"), ("m", "c"), ("b", "c"))

_EFFECTIVE_KEYS = {
    "omega_b", "omega_a", "omega_m", "omega_c", "temperature",
    "delta_a", "delta_m_eff", "delta_c_eff", "delta_k",
    "G_m", "G_c", "g_am", "kappa_a", "kappa_m", "kappa_c", "gamma_b",
    "n_a", "n_m", "n_b", "n_c",
}
_PHYSICAL_KEYS = {
    "omega_a", "omega_m", "omega_c", "omega_b",
    "kappa_a", "kappa_m", "kappa_c", "gamma_b",
    "g_am", "g_m", "g_c", "K0", "E_m", "E_c", "w_m", "w_c", "temperature",
}
_NONNEG_EFFECTIVE = ("omega_b", "omega_a", "omega_m", "omega_c", "temperature",
                     "G_m", "G_c", "g_am", "kappa_a", "kappa_m", "kappa_c",
                     "gamma_b", "n_a", "n_m", "n_b", "n_c")
_AXIS_KEYS = {"name", "start", "stop", "num"}
_SWEEP_KEYS = {"axis1", "axis2", "kerr_signs", "kerr_magnitude"}
_OUTPUT_KEYS = {"table", "manifest"}
_NUMERICS_KEYS = {"stability_eps_factor"}
_TOP_KEYS = {"schema_version", "mode", "effective", "physical", "pairs",
             "sweep", "output", "numerics"}


class ConfigError(ValueError):
    pass


def _num(diags, block, key, path, required=True, nonneg=False):
    if key not in block:
        if required:
            diags.append(f"{path}.{key}: missing")
        return None
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        diags.append(f"{path}.{key}: expected a number, got {type(v).__name__}")
        return None
    v = float(v)
    if not math.isfinite(v):
        diags.append(f"{path}.{key}: must be finite")
        return None
    if nonneg and v < 0.0:
        diags.append(f"{path}.{key}: must be >= 0, got {v}")
        return None
    return v


def validate_config(cfg, command=None):
    """Structural validation; returns a list of diagnostics (empty = ok)."""
    diags = []
    if not isinstance(cfg, dict):
        return ["top level: expected an object"]
    for key in cfg:
        if key not in _TOP_KEYS:
            diags.append(f"{key}: unknown key")
    sv = cfg.get("schema_version")
    if sv != SCHEMA_VERSION:
        diags.append(f"schema_version: expected {SCHEMA_VERSION}, got {sv!r}")
    mode = cfg.get("mode")
    if mode not in ("effective", "physical"):
        diags.append(f"mode: must be 'effective' or 'physical', got {mode!r}")
    if "effective" in cfg and "physical" in cfg:
        diags.append("effective/physical: exactly one parameter block allowed, "
                     "both present")
    elif mode == "effective" and "effective" not in cfg:
        diags.append("effective: block missing for mode 'effective'")
    elif mode == "physical" and "physical" not in cfg:
        diags.append("physical: block missing for mode 'physical'")
    elif mode in ("effective", "physical") and mode in cfg:
        blk = cfg[mode]
        if not isinstance(blk, dict):
            diags.append(f"{mode}: expected an object")
        elif mode == "effective":
            _validate_effective(diags, blk, cfg, command)
        else:
            _validate_physical(diags, blk)
    if "pairs" in cfg:
        _validate_pairs(diags, cfg["pairs"])
    if "sweep" in cfg:
        _validate_sweep_block(diags, cfg["sweep"])
    elif command == "sweep":
        diags.append("sweep: block missing for the sweep command")
    if "output" in cfg:
        blk = cfg["output"]
        if not isinstance(blk, dict):
            diags.append("output: expected an object")
        else:
            for key in blk:
                if key not in _OUTPUT_KEYS:
                    diags.append(f"output.{key}: unknown key")
                elif not isinstance(blk[key], str):
                    diags.append(f"output.{key}: expected a string")
    if "numerics" in cfg:
        blk = cfg["numerics"]
        if not isinstance(blk, dict):
            diags.append("numerics: expected an object")
        else:
            for key in blk:
                if key not in _NUMERICS_KEYS:
                    diags.append(f"numerics.{key}: unknown key")
            v = _num(diags, blk, "stability_eps_factor", "numerics",
                     required=False)
            if v is not None and v <= 0.0:
                diags.append("numerics.stability_eps_factor: must be > 0")
    if mode == "physical" and "sweep" in cfg:
        diags.append("sweep: grids run in effective mode only")
    return diags


def _validate_effective(diags, blk, cfg, command):
    for key in blk:
        if key not in _EFFECTIVE_KEYS:
            diags.append(f"effective.{key}: unknown key")
    for key in _NONNEG_EFFECTIVE:
        if key in blk:
            _num(diags, blk, key, "effective", required=False, nonneg=True)
    for key in ("delta_a", "delta_m_eff", "delta_c_eff", "delta_k"):
        if key in blk:
            _num(diags, blk, key, "effective", required=False)
    v = _num(diags, blk, "omega_b", "effective", required=True, nonneg=True)
    if v is not None and v <= 0.0:
        diags.append("effective.omega_b: must be > 0")
    has_occ = any(k in blk for k in ("n_a", "n_m", "n_b", "n_c"))
    has_temp = "temperature" in blk
    if has_occ and has_temp:
        diags.append("effective: give n_a..n_c or temperature, not both")
    if not has_occ and not has_temp:
        diags.append("effective: occupations missing (n_a..n_c or "
                     "temperature with omega_a/omega_m/omega_c)")
    if has_temp:
        for key in ("omega_a", "omega_m", "omega_c"):
            if key not in blk:
                diags.append(f"effective.{key}: needed for thermal occupations")
    if has_occ:
        for key in ("n_a", "n_m", "n_b", "n_c"):
            if key not in blk:
                diags.append(f"effective.{key}: missing")
    swept = set()
    sweep_blk = cfg.get("sweep")
    if isinstance(sweep_blk, dict):
        for ax in ("axis1", "axis2"):
            a = sweep_blk.get(ax)
            if isinstance(a, dict) and isinstance(a.get("name"), str):
                swept.add(a["name"])
    if sweep_blk is not None or command == "sweep":
        if "delta_k" in blk:
            diags.append("effective.delta_k: not allowed with a sweep "
                         "(set kerr_magnitude / kerr_signs or a delta_k axis)")
        for key in ("delta_a", "delta_m_eff", "delta_c_eff",
                    "G_m", "G_c", "g_am",
                    "kappa_a", "kappa_m", "kappa_c", "gamma_b"):
            if key in swept:
                if key in blk:
                    diags.append(f"effective.{key}: both fixed and swept")
            elif key not in blk:
                diags.append(f"effective.{key}: missing")
        if "temperature" in swept and "temperature" in blk:
            diags.append("effective.temperature: both fixed and swept")
    else:
        for key in ("delta_a", "delta_m_eff", "delta_c_eff", "delta_k",
                    "G_m", "G_c", "g_am",
                    "kappa_a", "kappa_m", "kappa_c", "gamma_b"):
            if key not in blk:
                diags.append(f"effective.{key}: missing")


def _validate_physical(diags, blk):
    for key in blk:
        if key not in _PHYSICAL_KEYS:
            diags.append(f"physical.{key}: unknown key")
    for key in sorted(_PHYSICAL_KEYS):
        if key == "K0":
            _num(diags, blk, key, "physical", required=True)
        elif key == "temperature":
            _num(diags, blk, key, "physical", required=False, nonneg=True)
        else:
            _num(diags, blk, key, "physical", required=True, nonneg=True)


def _validate_pairs(diags, pairs):
    if not isinstance(pairs, list) or not pairs:
        diags.append("pairs: expected a non-empty list")
        return
    for i, p in enumerate(pairs):
        if not isinstance(p, list) or len(p) != 2:
            diags.append(f"pairs[{i}]: expected a two-element list")
            continue
        try:
            ModePair(*p)
        except (ValueError, TypeError) as exc:
            diags.append(f"pairs[{i}]: {exc}")


def _validate_sweep_block(diags, blk):
    if not isinstance(blk, dict):
        diags.append("sweep: expected an object")
        return
    for key in blk:
        if key not in _SWEEP_KEYS:
            diags.append(f"sweep.{key}: unknown key")
    names = []
    for ax in ("axis1", "axis2"):
        a = blk.get(ax)
        if a is None:
            if ax == "axis1":
                diags.append("sweep.axis1: missing")
            continue
        if not isinstance(a, dict):
            diags.append(f"sweep.{ax}: expected an object")
            continue
        for key in a:
            if key not in _AXIS_KEYS:
                diags.append(f"sweep.{ax}.{key}: unknown key")
        if not isinstance(a.get("name"), str):
            diags.append(f"sweep.{ax}.name: expected a string")
        else:
            names.append(a["name"])
        _num(diags, a, "start", f"sweep.{ax}")
        _num(diags, a, "stop", f"sweep.{ax}")
        num = a.get("num")
        if isinstance(num, bool) or not isinstance(num, int):
            diags.append(f"sweep.{ax}.num: expected an integer")
        elif num < 2:
            diags.append(f"sweep.{ax}.num: point counts must be >= 2, got {num}")
    signs = blk.get("kerr_signs", ["0"])
    if not isinstance(signs, list) or not signs:
        diags.append("sweep.kerr_signs: expected a non-empty list")
        signs = []
    if "delta_k" in names:
        if signs and signs != ["axis"]:
            diags.append("sweep.kerr_signs: must be ['axis'] when delta_k "
                         "is swept")
        if "kerr_magnitude" in blk:
            diags.append("sweep.kerr_magnitude: not allowed when delta_k "
                         "is swept")
    else:
        for s in signs:
            if s not in KERR_SIGNS:
                diags.append(f"sweep.kerr_signs: unknown sign {s!r}")
        if len(set(signs)) != len(signs):
            diags.append("sweep.kerr_signs: duplicate entries")
        needs_mag = any(s in ("+", "-") for s in signs)
        mag = _num(diags, blk, "kerr_magnitude", "sweep", required=needs_mag,
                   nonneg=True)
        if needs_mag and mag == 0.0:
            diags.append("sweep.kerr_magnitude: must be > 0 for signed runs")
    if len(names) == 2 and names[0] == names[1]:
        diags.append("sweep.axis2.name: duplicates axis1")


# ---------------------------------------------------------------------------
# config -> domain objects


def _pairs_from(cfg):
    pairs = cfg.get("pairs")
    if pairs is None:
        return tuple(ModePair(*p) for p in ALL_PAIRS)
    return tuple(ModePair(*p) for p in pairs)


def _effective_operating_point(blk):
    if "temperature" in blk:
        n_a, n_m, n_b, n_c = occupations(
            blk["temperature"], blk["omega_a"], blk["omega_m"],
            blk["omega_b"], blk["omega_c"])
    else:
        n_a, n_m, n_b, n_c = blk["n_a"], blk["n_m"], blk["n_b"], blk["n_c"]
    return operating_point_direct(
        blk["omega_b"],
        delta_a=blk["delta_a"], delta_m_eff=blk["delta_m_eff"],
        delta_c_eff=blk["delta_c_eff"], delta_k=blk["delta_k"],
        G_m=blk["G_m"], G_c=blk["G_c"], g_am=blk["g_am"],
        kappa_a=blk["kappa_a"], kappa_m=blk["kappa_m"],
        kappa_c=blk["kappa_c"], gamma_b=blk["gamma_b"],
        n_a=n_a, n_m=n_m, n_b=n_b, n_c=n_c)


def _system_params(blk):
    return SystemParams(**{k: float(blk[k]) for k in _PHYSICAL_KEYS
                           if k in blk})


def _sweep_spec(cfg):
    blk = cfg["sweep"]
    axis1 = Axis(**blk["axis1"])
    axis2 = Axis(**blk["axis2"]) if "axis2" in blk else None
    eff = dict(cfg["effective"])
    names = [axis1.name] + ([axis2.name] if axis2 else [])
    fixed = {k: float(v) for k, v in eff.items() if k not in names}
    if "delta_k" in names:
        signs = ("axis",)
        mag = 0.0
    else:
        signs = tuple(blk.get("kerr_signs", ["0"]))
        mag = float(blk.get("kerr_magnitude", 0.0))
    return SweepSpec(axis1=axis1, axis2=axis2, fixed=fixed,
                     pairs=_pairs_from(cfg), kerr_signs=signs,
                     kerr_magnitude=mag)


# ---------------------------------------------------------------------------
# commands


def _load(path, command):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    diags = validate_config(cfg, command=command)
    if diags:
        raise ConfigError("invalid config:\n  " + "\n  ".join(diags))
    return cfg


def _eps_factor(cfg):
    return float(cfg.get("numerics", {}).get(
        "stability_eps_factor", STABILITY_EPS_FACTOR))


def cmd_validate(args):
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}")
        return EXIT_CONFIG
    diags = validate_config(cfg)
    if diags:
        for d in diags:
            print(d)
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


def _point_report(op, pairs, oracle=False):
    """Stability, covariance and entanglement report for one operating point."""
    norm = op.normalized()
    A = build_drift(norm)
    D = build_diffusion(norm)
    stab = is_stable(A, omega_b=1.0)
    report = {
        "operating_point": {k: getattr(norm, k) for k in (
            "delta_a", "delta_m_eff", "delta_c_eff", "delta_k", "G_m", "G_c",
            "g_am", "kappa_a", "kappa_m", "kappa_c", "gamma_b",
            "n_a", "n_m", "n_b", "n_c")},
        "stable": stab.stable,
        "stability_margin": stab.margin,
    }
    if not stab.stable:
        return report, None
    cov = solve_lyapunov(A, D, stability=stab)
    res = residual(A, cov.V, D)
    report["lyapunov_residual"] = res
    report["lyapunov_residual_relative"] = res / residual_scale(A, cov.V, D)
    report["symplectic_eigenvalues"] = list(cov.symplectic_eigenvalues())
    ens = {}
    for pair in pairs:
        rc = reduced_covariance(cov, pair)
        ens[pair.label] = log_negativity(rc)
    report["log_negativity"] = ens
    if oracle:
        from ._kernels import lyap_kron
        Vk = lyap_kron(A, D)
        report["oracle_kron_max_dev"] = float(np.abs(cov.V - Vk).max())
        devs = []
        for pair in pairs:
            rc = reduced_covariance(cov, pair)
            _, eta_spec = symplectic_eigenvalues_pt(rc)
            en_spec = max(0.0, -math.log(2.0 * eta_spec))
            devs.append(abs(en_spec - max(ens[pair.label], 0.0)))
        report["oracle_logneg_max_dev"] = max(devs)
    return report, cov


def cmd_point(args):
    cfg = _load(args.config, "point")
    pairs = _pairs_from(cfg)
    out = {"mode": cfg["mode"], "backend": _kernels.BACKEND}
    if cfg["mode"] == "physical":
        params = _system_params(cfg["physical"])
        try:
            branches = solve_mean_fields(params, cross_check=args.oracle)
        except (NoSteadyStateError, ValueError, RuntimeError) as exc:
            print(f"numerical failure in the mean-field solve: {exc}")
            return EXIT_NUMERICAL
        sel = branches.selected_branch
        out["branches"] = [{
            "m_abs_sq": abs(b.fields.m_ss) ** 2,
            "c_abs_sq": abs(b.fields.c_ss) ** 2,
            "q": b.fields.q_ss,
            "stable": b.stable,
            "residual": b.residual,
            "decay_free_rel_dev": b.decay_free_rel_dev,
        } for b in branches.branches]
        out["selected_branch"] = branches.selected
        out["mean_fields"] = {
            "a_ss": [sel.fields.a_ss.real, sel.fields.a_ss.imag],
            "m_ss": [sel.fields.m_ss.real, sel.fields.m_ss.imag],
            "c_ss": [sel.fields.c_ss.real, sel.fields.c_ss.imag],
            "q_ss": sel.fields.q_ss,
            "p_ss": sel.fields.p_ss,
        }
        op = operating_point_from_fields(params, sel.fields)
    else:
        op = _effective_operating_point(cfg["effective"])
    try:
        report, cov = _point_report(op, pairs, oracle=args.oracle)
    except (np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    out.update(report)

    print(f"mode: {out['mode']}   backend: {out['backend']}")
    if cfg["mode"] == "physical":
        print(f"mean-field branches: {len(out['branches'])} "
              f"(selected {out['selected_branch']})")
        for i, b in enumerate(out["branches"]):
            mark = "*" if i == out["selected_branch"] else " "
            print(f"  {mark}[{i}] |m|^2={b['m_abs_sq']:.6e} q={b['q']:+.6e} "
                  f"stable={b['stable']} residual={b['residual']:.2e}")
    opn = out["operating_point"]
    print("operating point (units of omega_b): "
          f"delta_a={opn['delta_a']:+.4f} delta_m_eff={opn['delta_m_eff']:+.4f} "
          f"delta_c_eff={opn['delta_c_eff']:+.4f} delta_k={opn['delta_k']:+.4f}")
    print(f"  G_m={opn['G_m']:.4f} G_c={opn['G_c']:.4f} g_am={opn['g_am']:.4f} "
          f"n_b={opn['n_b']:.4f}")
    if not out["stable"]:
        print(f"UNSTABLE operating point, margin {out['stability_margin']:.3e} "
              "omega_b; no covariance computed")
        _write_report(args, out)
        return EXIT_UNSTABLE
    print(f"stable, margin {out['stability_margin']:.6e} omega_b; "
          f"lyapunov residual {out['lyapunov_residual']:.3e} "
          f"(relative {out['lyapunov_residual_relative']:.3e})")
    for lab, en in out["log_negativity"].items():
        print(f"  E_N[{lab}] = {en:.9f}")
    if args.oracle:
        print(f"oracle: kron |dV|_max = {out['oracle_kron_max_dev']:.3e}, "
              f"spectral E_N dev = {out['oracle_logneg_max_dev']:.3e}")
        if out["oracle_kron_max_dev"] > 1e-8:
            print("oracle deviation exceeds 1e-8")
            return EXIT_NUMERICAL
    _write_report(args, out)
    return EXIT_OK


def _write_report(args, out):
    if args.out is None:
        return
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "point.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_sweep(args):
    cfg = _load(args.config, "sweep")
    spec = _sweep_spec(cfg)
    try:
        result = run_sweep(spec, threads=args.threads, oracle=args.oracle,
                           eps_factor=_eps_factor(cfg))
    except RuntimeError as exc:
        print(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    out_dir = args.out if args.out is not None else "."
    os.makedirs(out_dir, exist_ok=True)
    names = cfg.get("output", {})
    table_path = os.path.join(out_dir, names.get("table", "sweep.csv"))
    manifest_path = os.path.join(out_dir, names.get("manifest", "manifest.json"))
    export_table(result, table_path)
    manifest = {
        "package_version": __version__,
        "backend": _kernels.BACKEND,
        "threads": args.threads,
        "oracle": bool(args.oracle),
        "config": cfg,
    }
    if args.oracle:
        manifest["oracle_max_dev"] = result.oracle_max_dev
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    n_pts = result.stable.size
    n_unstable = int(n_pts - result.stable.sum())
    print(f"sweep done: {n_pts} points ({n_unstable} unstable), "
          f"table -> {table_path}, manifest -> {manifest_path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kerrcomm",
        description="Steady-state Gaussian entanglement in Kerr-modified "
                    "cavity optomagnomechanics")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("point", cmd_point), ("sweep", cmd_sweep),
                     ("validate", cmd_validate)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--oracle", action="store_true",
                       help="enable dual-method cross-checks at runtime")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
