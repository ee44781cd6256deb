"""Command-line scenario runner.

Every scenario resolves a configuration from three layers, later ones
winning: built-in preset, ``--config`` JSON file, command-line flags. The
resolved configuration is written to ``run.json`` next to the CSV outputs,
and feeding that manifest back through ``--config`` reproduces the CSVs
byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 censored or partial results.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import __version__
from . import closed_solver as cs
from . import dynamics as dyn
from . import liouville as lv
from . import open_solver as osv
from .model import ChainSpec, SpecError, site_label

log = logging.getLogger("superchain")

FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CENSORED = 4

SCENARIOS = (
    "band-structure",
    "decoupled-limit",
    "pair-analysis",
    "complex-spectrum",
    "gamma-sweep",
    "superradiance",
    "band-structure-open",
    "profiles",
    "survival",
    "coherence-scan",
    "mc-validate",
)

BASE_SPEC = dict(N=10, epsilon0=0.0, nu=1.0, delta_L=2.5, delta_R=2.5, lam=2.0, kappa=4.0, gamma=0.0, alpha_phi=0.0)

COHERENCE_GAMMAS = "0.05,0.1,0.25,0.5,1,1.5,2,2.5,3,3.5,4,5,7,10,15,20"

# per-scenario spec overrides, grids and options
PRESETS: Dict[str, dict] = {
    "band-structure": dict(spec={}, grids={"lambda_grid": "0.01:0.01:4"}, options={}),
    "decoupled-limit": dict(spec={"lam": 1e-6}, grids={"lambda_grid": "1e-2,1e-3,1e-4"}, options={}),
    "pair-analysis": dict(spec={}, grids={}, options={}),
    "complex-spectrum": dict(spec={"lam": 0.01}, grids={"gamma_grid": None}, options={}),
    "gamma-sweep": dict(spec={"lam": 0.01}, grids={"gamma_grid": "0.05:0.01:20"}, options={}),
    "superradiance": dict(spec={"lam": 0.01}, grids={"gamma_grid": "0.05:0.01:20"}, options={}),
    "band-structure-open": dict(spec={"gamma": 3.0}, grids={"lambda_grid": "0.05:0.05:20"}, options={}),
    "profiles": dict(spec={"lam": 0.01}, grids={"gamma_grid": "0.1:0.1:20"}, options={}),
    "survival": dict(
        spec={},
        grids={"gamma_grid": "0.25,2.5,25", "t_grid": "0:0.1:300"},
        options={"initial": "1:upper", "basis": "open"},
    ),
    "coherence-scan": dict(
        spec={"alpha_phi": 1e-3},
        grids={"gamma_grid": COHERENCE_GAMMAS, "n_list": "10,20,30,40", "alpha_list": None},
        options={"mode": lv.MODULUS_SUM, "cap": None},
    ),
    "mc-validate": dict(
        spec={"gamma": 2.5, "alpha_phi": 1e-3},
        grids={"t_grid": "5:5:50"},
        options={"initial": "1:upper", "n_traj": 2000, "dt": 0.01, "n_sigma": 3.0},
    ),
}

SPEC_ALIASES = {
    "n": "N",
    "lambda": "lam",
    "alpha": "alpha_phi",
    "epsilon_0": "epsilon0",
}


class ConfigError(ValueError):
    """Invalid configuration, reported with exit code 2."""


class Censored(RuntimeError):
    """Results written but incomplete, reported with exit code 4."""


NUMERICAL_ERRORS = (
    cs.EigensolverError,
    cs.RootCountError,
    cs.ClassificationError,
    osv.NoTransitionError,
    dyn.IntegrationError,
    dyn.ConsistencyError,
    lv.IntegrationError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


# --- grids -----------------------------------------------------------------


def _dec(tok: str) -> Decimal:
    try:
        d = Decimal(tok.strip())
    except InvalidOperation:
        raise ConfigError(f"not a number: {tok!r}") from None
    if not d.is_finite():
        raise ConfigError(f"grid values must be finite, got {tok!r}")
    return d


def parse_grid(value) -> List[float]:
    """Parse ``start:step:stop``, a comma list, a number or a JSON list.

    Ranges are computed in decimal arithmetic, so ``0.05:0.01:20`` gives
    exactly the decimal values 0.05, 0.06, ..., 20. The stop value is
    included when it lies within half a step of the last point.
    """
    if value is None:
        raise ConfigError("grid is missing")
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, (list, tuple)):
        try:
            out = [float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(f"grid list must hold numbers, got {value!r}") from None
        if not all(math.isfinite(v) for v in out):
            raise ConfigError("grid values must be finite")
        return out
    if not isinstance(value, str):
        raise ConfigError(f"cannot parse grid {value!r}")
    s = value.strip()
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range grid must be start:step:stop, got {value!r}")
        start, step, stop = (_dec(p) for p in parts)
        if step == 0 or (stop - start) * step < 0:
            raise ConfigError(f"step {step} never reaches stop in {value!r}")
        n = int(((stop - start) / step + Decimal("0.5")).to_integral_value(rounding="ROUND_FLOOR"))
        if n > 10_000_000:
            raise ConfigError(f"grid {value!r} has too many points")
        return [float(start + k * step) for k in range(n + 1)]
    if not s:
        raise ConfigError("empty grid")
    return [float(_dec(t)) for t in s.split(",")]


def parse_int_list(value) -> List[int]:
    vals = parse_grid(value)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected integers, got {value!r}")
    return [int(v) for v in vals]


# --- configuration ---------------------------------------------------------


def _normalize_spec(raw: dict, where: str) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: 'spec' must be an object")
    fields = {f.name for f in dataclasses.fields(ChainSpec)}
    out = {}
    for key, val in raw.items():
        if key == "delta":
            out["delta_L"] = out["delta_R"] = val
            continue
        name = SPEC_ALIASES.get(key, key)
        if name not in fields:
            raise ConfigError(f"{where}: unknown spec key {key!r}; valid keys are {sorted(fields | {'delta'})}")
        out[name] = val
    for key, val in out.items():
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{where}: spec.{key} must be a number, got {val!r}")
    return out


def _load_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if isinstance(data, dict) and "config" in data and isinstance(data["config"], dict):
        data = data["config"]  # a run.json manifest
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    allowed = {"scenario", "spec", "grids", "options", "output_dir", "seed", "format_version"}
    extra = set(data) - allowed
    if extra:
        raise ConfigError(f"config {path}: unknown keys {sorted(extra)}; allowed {sorted(allowed)}")
    fv = data.get("format_version", FORMAT_VERSION)
    if fv != FORMAT_VERSION:
        raise ConfigError(f"config {path}: format_version {fv!r} unsupported (expected {FORMAT_VERSION})")
    return data


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge preset, config file and flags into a validated RunConfig dict."""
    file_cfg = _load_file(args.config) if args.config else {}
    scenario = args.scenario
    if scenario == "run":
        scenario = file_cfg.get("scenario")
        if scenario is None:
            raise ConfigError("'run' needs a config file with a 'scenario' key")
    elif file_cfg.get("scenario", scenario) != scenario:
        raise ConfigError(f"config file is for scenario {file_cfg['scenario']!r}, not {scenario!r}")
    if scenario not in PRESETS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {list(SCENARIOS)}")
    preset = PRESETS[scenario]

    spec = dict(BASE_SPEC)
    spec.update(preset["spec"])
    spec.update(_normalize_spec(file_cfg.get("spec", {}), "config"))
    flags = {k: getattr(args, k) for k in ("N", "epsilon0", "nu", "delta_L", "delta_R", "lam", "kappa", "gamma", "alpha_phi")}
    if args.delta is not None:
        flags.update(delta_L=args.delta, delta_R=args.delta)
    spec.update({k: v for k, v in flags.items() if v is not None})
    if scenario == "pair-analysis":
        spec["lam"] = math.sqrt(spec["kappa"])
    if spec["N"] != int(spec["N"]):
        raise ConfigError(f"N must be an integer, got {spec['N']!r}")
    spec["N"] = int(spec["N"])
    spec = {k: (v if k == "N" else float(v)) for k, v in spec.items()}
    try:
        ChainSpec(**spec)
    except SpecError as exc:
        raise ConfigError(f"invalid spec: {exc}") from None

    grids = dict(preset["grids"])
    file_grids = file_cfg.get("grids", {})
    if not isinstance(file_grids, dict):
        raise ConfigError("'grids' must be an object")
    for key, val in file_grids.items():
        if key not in grids:
            raise ConfigError(f"scenario {scenario} takes grids {sorted(grids)}, got {key!r}")
        grids[key] = val
    for key in grids:
        val = getattr(args, key, None)
        if val is not None:
            grids[key] = val
    for key, val in grids.items():
        if val is not None:
            (parse_int_list if key == "n_list" else parse_grid)(val)  # validate early

    options = dict(preset["options"])
    file_opts = file_cfg.get("options", {})
    if not isinstance(file_opts, dict):
        raise ConfigError("'options' must be an object")
    for key, val in file_opts.items():
        if key not in options:
            raise ConfigError(f"scenario {scenario} takes options {sorted(options)}, got {key!r}")
        options[key] = val
    for key in options:
        val = getattr(args, key, None)
        if val is not None:
            options[key] = val

    seed = args.seed if args.seed is not None else file_cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    output_dir = args.output_dir or file_cfg.get("output_dir") or f"out/{scenario}"

    return {
        "scenario": scenario,
        "spec": spec,
        "grids": grids,
        "options": options,
        "output_dir": str(output_dir),
        "seed": seed,
        "format_version": FORMAT_VERSION,
    }


# --- output ----------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Writer:
    def __init__(self, out: Path):
        self.out = out
        self.files: List[str] = []

    def csv(self, name: str, header: List[str], rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        _atomic_write(self.out / name, buf.getvalue())
        self.files.append(name)


# --- scenarios -------------------------------------------------------------


def _spec(cfg) -> ChainSpec:
    return ChainSpec(**cfg["spec"])


def _parse_initial(text: str):
    try:
        pair, member = str(text).split(":")
        pair = int(pair)
    except ValueError:
        raise ConfigError(f"initial state must look like '1:upper', got {text!r}") from None
    if member not in ("upper", "lower") or pair < 1:
        raise ConfigError(f"initial state must look like '1:upper', got {text!r}")
    return pair, member


def run_band_structure(cfg, w: Writer) -> int:
    spec = _spec(cfg)
    bs = cs.band_structure(spec, parse_grid(cfg["grids"]["lambda_grid"]))
    rows = (
        (lam, q, bs["energies"][i, q], *bs["weights"][i, q])
        for i, lam in enumerate(bs["lambda"])
        for q in range(spec.dim)
    )
    w.csv("band_structure.csv", ["lambda", "level", "energy", "w_left", "w_right", "w_qubits"], rows)
    return EXIT_OK


def _decoupled_errors(spec: ChainSpec):
    num = np.array([s.energy for s in cs.closed_spectrum(spec)])
    ana = cs.decoupled_limit_spectrum(spec).energies(spec.lam)
    return num, ana


def run_decoupled_limit(cfg, w: Writer) -> int:
    spec = _spec(cfg)
    num, ana = _decoupled_errors(spec)
    w.csv(
        "decoupled.csv",
        ["level", "e_numeric", "e_analytic", "abs_err"],
        ((q, num[q], ana[q], abs(num[q] - ana[q])) for q in range(spec.dim)),
    )
    rows = []
    for lam in parse_grid(cfg["grids"]["lambda_grid"]):
        n, a = _decoupled_errors(spec.replace(lam=lam))
        err = np.abs(n - a)
        rows.append((lam, err.max(), (err / np.maximum(np.abs(a), 1.0)).max(), err[1:-1].max()))
    w.csv("convergence.csv", ["lambda", "max_abs_err", "max_rel_err", "bounded_max_abs_err"], rows)
    return EXIT_OK


def run_pair_analysis(cfg, w: Writer) -> int:
    spec = _spec(cfg)
    spectrum = cs.closed_spectrum(spec)
    pairs = cs.classify_pairs(spectrum, spec)
    w.csv(
        "pairs.csv",
        ["pair", "label", "e_upper", "e_lower", "rabi", "upper_w_left", "upper_w_right", "upper_w_qubits",
         "lower_w_left", "lower_w_right", "lower_w_qubits"],
        ((p.pair_index, p.label, p.e_upper, p.e_lower, p.rabi, *p.weights_upper, *p.weights_lower) for p in pairs),
    )
    band = sorted(s.energy for s in spectrum if cs.in_band(s.energy, spec))
    roots = cs.solve_symmetric_point_energies(spec, expected=len(band))
    eig = np.array([s.energy for s in spectrum])
    w.csv(
        "roots.csv",
        ["energy", "parity", "eig_energy", "abs_err"],
        (
            (E, par, eig[np.abs(eig - E).argmin()], np.abs(eig - E).min())
            for E, par in sorted(roots.roots)
        ),
    )
    return EXIT_OK


def run_complex_spectrum(cfg, w: Writer) -> int:
    spec = _spec(cfg)
    grid = cfg["grids"]["gamma_grid"]
    if grid is None:
        es = osv.eigensystem(spec)
        pair, member = osv.pair_labels(es.values, es.right, spec)
        w.csv(
            "spectrum.csv",
            ["q", "e_real", "gamma_q", "pair", "member", "condition"],
            ((q, v.real, -2 * v.imag, pair[q], member[q], es.condition[q]) for q, v in enumerate(es.values)),
        )
        return EXIT_OK
    traj = osv.sweep_gamma(spec, parse_grid(grid))
    _write_trajectories(w, traj)
    return EXIT_OK


def _write_trajectories(w: Writer, traj) -> None:
    E, G = traj.energies, traj.widths
    rows = ((g, b, E[i, b], G[i, b]) for i, g in enumerate(traj.gamma_grid) for b in range(E.shape[1]))
    w.csv("trajectories.csv", ["gamma", "branch_id", "e_real", "gamma_q"], rows)


def run_gamma_sweep(cfg, w: Writer) -> int:
    spec = _spec(cfg)
    traj = osv.sweep_gamma(spec, parse_grid(cfg["grids"]["gamma_grid"]))
    _write_trajectories(w, traj)
    pr, s2 = osv.width_metrics(traj.widths)
    total = traj.widths.sum(axis=1)
    ambiguous = set(traj.ambiguous)
    w.csv(
        "width_metrics.csv",
        ["gamma", "participation_ratio", "top2_share", "width_sum", "sum_rule_err", "ambiguous"],
        (
            (g, pr[i], s2[i], total[i], abs(total[i] - 2 * g), i in ambiguous)
            for i, g in enumerate(traj.gamma_grid)
        ),
    )
    return EXIT_OK


def run_superradiance(cfg, w: Writer) -> int:
    spec = _spec(cfg)
    traj = osv.sweep_gamma(spec, parse_grid(cfg["grids"]["gamma_grid"]))
    pr, s2 = osv.width_metrics(traj.widths)
    w.csv(
        "width_metrics.csv",
        ["gamma", "participation_ratio", "top2_share"],
        ((g, pr[i], s2[i]) for i, g in enumerate(traj.gamma_grid)),
    )
    res = osv.detect_superradiance(traj)
    w.csv(
        "superradiance.csv",
        ["gamma_crit", "level_spacing", "gamma_crit_over_spacing", "sr_branch_a", "sr_branch_b"],
        [(res.gamma_crit, res.level_spacing, res.gamma_crit / res.level_spacing, *res.sr_indices)],
    )
    return EXIT_OK


def run_band_structure_open(cfg, w: Writer) -> int:
    spec = _spec(cfg)
    obs = osv.band_structure_vs_lambda(spec, parse_grid(cfg["grids"]["lambda_grid"]))
    rows = (
        (lam, b, obs.energies[i, b], obs.widths[i, b], obs.pair[i, b], obs.member[i, b])
        for i, lam in enumerate(obs.lambda_grid)
        for b in range(obs.energies.shape[1])
    )
    w.csv("open_band_structure.csv", ["lambda", "branch_id", "e_real", "gamma_q", "pair", "member"], rows)
    return EXIT_OK


def run_profiles(cfg, w: Writer) -> int:
    spec = _spec(cfg)
    prof = osv.superradiant_profiles(spec, parse_grid(cfg["grids"]["gamma_grid"]))
    N = spec.N
    rows = []
    for i, g in enumerate(prof.gamma_grid):
        for j, name in enumerate(("upper", "lower")):
            v = prof.eigenvalues[i, j]
            comps = np.concatenate([prof.chain[i, j], prof.qubits[i, j]])
            for f, weight in enumerate(comps):
                rows.append((g, name, v.real, -2 * v.imag, site_label(N, f), weight))
    w.csv("profiles.csv", ["gamma", "state", "e_real", "gamma_q", "site", "weight"], rows)
    edge = prof.edge_weight()
    w.csv(
        "edge_weight.csv",
        ["gamma", "upper_edge_weight", "lower_edge_weight"],
        ((g, edge[i, 0], edge[i, 1]) for i, g in enumerate(prof.gamma_grid)),
    )
    return EXIT_OK


def _initial_vector(spec: ChainSpec, initial: str, basis: str) -> np.ndarray:
    pair, member = _parse_initial(initial)
    try:
        if basis == "open":
            return osv.pair_resonance(spec, pair, member).right_vec
        if basis == "closed":
            return cs.pair_state(spec, pair, member).amplitudes
    except IndexError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"basis must be 'open' or 'closed', got {basis!r}")


def run_survival(cfg, w: Writer) -> int:
    spec = _spec(cfg)
    opts = cfg["options"]
    t = np.asarray(parse_grid(cfg["grids"]["t_grid"]))
    rows, life = [], []
    for g in parse_grid(cfg["grids"]["gamma_grid"]):
        sg = spec.replace(gamma=g)
        psi0 = _initial_vector(sg, opts["initial"], opts["basis"])
        p = dyn.evolve_state(sg, psi0, t, cross_check=True).p
        rows.extend((g, ti, pi) for ti, pi in zip(t, p))
        life.append((g, dyn.lifetime(sg, psi0)))
    w.csv("survival.csv", ["gamma", "t", "p"], rows)
    w.csv("lifetimes.csv", ["gamma", "tau_1e"], life)
    return EXIT_OK


def run_coherence_scan(cfg, w: Writer) -> int:
    spec = _spec(cfg)
    grids, opts = cfg["grids"], cfg["options"]
    alphas = parse_grid(grids["alpha_list"]) if grids["alpha_list"] is not None else [spec.alpha_phi]
    if opts["mode"] not in (lv.MODULUS_SUM, lv.ELEMENT_SUM):
        raise ConfigError(f"mode must be {lv.MODULUS_SUM!r} or {lv.ELEMENT_SUM!r}")
    rows = lv.coherence_scan(
        spec,
        parse_grid(grids["gamma_grid"]),
        parse_int_list(grids["n_list"]),
        alphas,
        mode=opts["mode"],
        cap=opts["cap"],
    )
    w.csv(
        "coherence_scan.csv",
        ["N", "alpha_phi", "gamma", "tau_coh", "censored", "hygiene_ok", "error"],
        ((r.N, r.alpha_phi, r.gamma, r.tau, r.censored, r.hygiene_ok, r.error) for r in rows),
    )
    if any(r.error for r in rows) and all(r.error for r in rows):
        raise lv.IntegrationError("every scan point failed")
    if any(r.censored or r.error or not r.hygiene_ok for r in rows):
        raise Censored(f"{sum(bool(r.censored or r.error or not r.hygiene_ok) for r in rows)} scan points censored or failed")
    return EXIT_OK


def run_mc_validate(cfg, w: Writer) -> int:
    spec = _spec(cfg)
    opts = cfg["options"]
    psi0 = _initial_vector(spec, opts["initial"], "closed")
    noise = lv.NoiseModel(spec.alpha_phi, seed=cfg["seed"], dt=float(opts["dt"]), n_traj=int(opts["n_traj"]))
    t = parse_grid(cfg["grids"]["t_grid"])
    cmp = lv.compare_with_master(spec, psi0, noise, t, n_sigma=float(opts["n_sigma"]))
    w.csv(
        "mc_summary.csv",
        ["t", "z_max", "exceed", "max_abs_dev"],
        zip(cmp.t_grid, cmp.z_max, cmp.exceed, cmp.max_abs_dev),
    )
    iu = np.triu_indices(spec.dim)
    rows = []
    for k, tk in enumerate(cmp.t_grid):
        mc, ref, se = cmp.mc.rho[k], cmp.master.rho[k], cmp.mc.stderr[k]
        for i, j in zip(*iu):
            rows.append((tk, i, j, mc[i, j].real, mc[i, j].imag, ref[i, j].real, ref[i, j].imag, se[i, j]))
    w.csv("mc_elements.csv", ["t", "i", "j", "mc_re", "mc_im", "master_re", "master_im", "stderr"], rows)
    if not cmp.passed:
        raise lv.IntegrationError(f"{int(cmp.exceed.sum())} elements beyond {cmp.n_sigma} standard errors")
    return EXIT_OK


RUNNERS: Dict[str, Callable] = {
    "band-structure": run_band_structure,
    "decoupled-limit": run_decoupled_limit,
    "pair-analysis": run_pair_analysis,
    "complex-spectrum": run_complex_spectrum,
    "gamma-sweep": run_gamma_sweep,
    "superradiance": run_superradiance,
    "band-structure-open": run_band_structure_open,
    "profiles": run_profiles,
    "survival": run_survival,
    "coherence-scan": run_coherence_scan,
    "mc-validate": run_mc_validate,
}


def run(cfg: dict) -> int:
    """Execute a resolved configuration, writing CSVs and ``run.json``."""
    out = Path(cfg["output_dir"])
    w = Writer(out)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    error = ""
    try:
        status = RUNNERS[cfg["scenario"]](cfg, w)
    except (ConfigError, SpecError) as exc:
        status, error = EXIT_CONFIG, str(exc)
    except Censored as exc:
        status, error = EXIT_CENSORED, str(exc)
    except NUMERICAL_ERRORS as exc:
        status, error = EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
    manifest = {
        "config": cfg,
        "version": __version__,
        "numpy": np.__version__,
        "started_utc": started.isoformat(),
        "wall_clock_s": time.perf_counter() - t0,
        "exit_status": status,
        "error": error,
        "files": w.files,
    }
    _atomic_write(out / "run.json", json.dumps(manifest, indent=2) + "\n")
    if error:
        log.error(error)
    return status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run")
    g.add_argument("--config", help="JSON config or a previous run.json manifest")
    g.add_argument("--output-dir", dest="output_dir", help="directory for CSVs and run.json")
    g.add_argument("--seed", type=int, help="64-bit seed for stochastic scenarios")
    g.add_argument("-v", "--verbose", action="store_true")
    s = common.add_argument_group("spec")
    s.add_argument("--n", dest="N", type=int, help="sites per arm")
    s.add_argument("--epsilon0", type=float)
    s.add_argument("--nu", type=float)
    s.add_argument("--delta", type=float, help="sets both qubit energies")
    s.add_argument("--delta-l", dest="delta_L", type=float)
    s.add_argument("--delta-r", dest="delta_R", type=float)
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--kappa", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--alpha", dest="alpha_phi", type=float, help="dephasing strength alpha_phi")
    gr = common.add_argument_group("grids")
    gr.add_argument("--lambda-grid", dest="lambda_grid")
    gr.add_argument("--gamma-grid", dest="gamma_grid")
    gr.add_argument("--t-grid", dest="t_grid")
    gr.add_argument("--n-list", dest="n_list")
    gr.add_argument("--alpha-list", dest="alpha_list")
    o = common.add_argument_group("options")
    o.add_argument("--initial", help="initial state as pair:member, e.g. 1:upper")
    o.add_argument("--basis", choices=("open", "closed"))
    o.add_argument("--mode", choices=(lv.MODULUS_SUM, lv.ELEMENT_SUM))
    o.add_argument("--cap", type=float, help="censoring horizon for coherence times")
    o.add_argument("--n-traj", dest="n_traj", type=int)
    o.add_argument("--dt", type=float)
    o.add_argument("--n-sigma", dest="n_sigma", type=float)

    ap = argparse.ArgumentParser(prog="superchain", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sub.add_parser(name, parents=[common])
    sub.add_parser("run", parents=[common], help="run the scenario named in --config")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"superchain: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
