"""``oscillattr <subcommand> --config <path> [--out <dir>] [--workers <n>]``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import subprocess
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .attractor import (InsufficientOccupancy, absorbing_radius, fit_horizontal_curve,
                        initial_cloud, pullback_cloud, pullback_curve)
from .config import ConfigError, RunConfig, load_config
from .coupling import validate_ha
from .dynamics import BlowUpError, integrate_rde, integrate_sde, sde_to_rde
from .energy import build_energy, check_conditions, mu_eigenvalues
from .noise import MIN_HORIZON, TimeGrid, ou_path, sample_path
from .rotation import RotationEstimate, estimate_rotation, locking_report

EXIT_OK, EXIT_INVALID, EXIT_BLOWUP = 0, 2, 3
ROTATION_CHUNK = 4


def tool_version() -> str:
    try:
        rev = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, cwd=Path(__file__).parent, timeout=5)
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k).lower(): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    return x


class Collector:
    """Single writer for every artifact; each gets a ``.meta.json`` sidecar."""

    def __init__(self, cfg: RunConfig, out: Path, subcommand: str, seeds=()):
        self.cfg, self.out, self.subcommand = cfg, out, subcommand
        self.seeds = list(seeds)
        self.written: list[Path] = []
        out.mkdir(parents=True, exist_ok=True)

    def _sidecar(self, path: Path, extra=None):
        meta = {
            "artifact": path.name, "subcommand": self.subcommand,
            "config_digest": self.cfg.digest(), "tool_version": tool_version(),
            "seeds": self.seeds, "created": datetime.now(timezone.utc).isoformat(),
            **(extra or {}),
        }
        with open(path.with_name(path.name + ".meta.json"), "w", encoding="utf-8") as fh:
            json.dump(_jsonable(meta), fh, indent=2, sort_keys=True)

    def json(self, name: str, payload: dict, extra=None):
        if "json" not in self.cfg.outputs.formats:
            return
        path = self.out / name
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self._sidecar(path, extra)
        self.written.append(path)

    def csv(self, name: str, header, rows, extra=None):
        if "csv" not in self.cfg.outputs.formats:
            return
        path = self.out / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        self._sidecar(path, extra)
        self.written.append(path)


def _setup(cfg: RunConfig):
    A = cfg.coupling()
    rep = validate_ha(A)
    if not rep.ha_satisfied:
        raise ConfigError("model", f"coupling matrix rejected: {rep.violation}")
    return A, cfg.oscillator_params(A.size)


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def cmd_spectrum(cfg: RunConfig, col: Collector) -> int:
    A = cfg.coupling()
    rep = validate_ha(A)
    col.json("spectrum.json", {
        "eigenvalues": rep.eigenvalues, "lambda1": rep.lambda1,
        "ha_satisfied": rep.ha_satisfied, "violation": rep.violation, "size": A.size,
    })
    mu = mu_eigenvalues(cfg.params.alpha, cfg.params.K, rep.eigenvalues)
    rows = [(i, lam, m[0].real, m[0].imag, m[1].real, m[1].imag)
            for i, (lam, m) in enumerate(zip(rep.eigenvalues, mu))]
    col.csv("mu.csv", ["i", "lambda", "mu_plus_re", "mu_plus_im", "mu_minus_re", "mu_minus_im"], rows)
    return EXIT_OK if rep.ha_satisfied else EXIT_INVALID


def cmd_check_conditions(cfg: RunConfig, col: Collector) -> int:
    A, params = _setup(cfg)
    rep = check_conditions(A, params, cfg.numerics.delta)
    col.json("conditions.json", rep.as_dict())
    return EXIT_OK


def _simulate_one(cfg: RunConfig, seed: int):
    A, params = _setup(cfg)
    num = cfg.numerics
    grid = TimeGrid.span(0.0, num.T, num.dt)
    rec = num.record_every or max(1, grid.n_steps // 1000)
    n = A.size
    if num.kind == "sde":
        traj = integrate_sde(np.zeros(2 * n), sample_path(seed, grid, params.eps), A, params, rec)
    else:
        path = ou_path(seed, grid, params.eps)
        Y0 = sde_to_rde(np.zeros(2 * n), path.z[0])
        traj = integrate_rde(Y0, path, A, params, num.scheme, rec)
    return traj


def cmd_simulate(cfg: RunConfig, col: Collector) -> int:
    seeds = col.seeds
    trajs = _map(_simulate_one, [(cfg, s) for s in seeds], cfg.numerics.workers)
    for seed, traj in zip(seeds, trajs):
        n = traj.states.shape[-1] // 2
        second = "udot" if traj.kind == "sde" else "v"
        rows = ((t, j, Y[j], Y[n + j]) for t, Y in zip(traj.times, traj.states) for j in range(n))
        col.csv(f"trajectory_{seed}.csv", ["t", "j", "u", second], rows, traj.metadata())
    return EXIT_OK


def _attractor_one(cfg: RunConfig, seed: int):
    A, params = _setup(cfg)
    num = cfg.numerics
    es = build_energy(A, params, num.delta)
    horizon = max(num.T, MIN_HORIZON)
    path = ou_path(seed, TimeGrid.span(-horizon, 0.0, num.dt), params.eps)
    ab = absorbing_radius(es, params, path)
    Y0 = initial_cloud(es, num.n_cloud, ab.R0, np.random.default_rng(seed))
    cloud = pullback_cloud(es, params, A, [seed], Y0, num.T, num.dt, scheme=num.scheme)[0]
    curve = pullback_curve(es, params, A, seed, num.T, num.n_cloud, dt=num.dt, scheme=num.scheme,
                           path=path.window(-num.T, 0.0))
    try:
        fit = fit_horizontal_curve(curve, num.n_bins).summary()
    except InsufficientOccupancy as e:
        fit = {"error": str(e)}
    return cloud, ab, fit


def cmd_attractor(cfg: RunConfig, col: Collector) -> int:
    seeds = col.seeds
    results = _map(_attractor_one, [(cfg, s) for s in seeds], cfg.numerics.workers)
    m = results[0][0].q.shape[1]
    rows = ((c.seed, c.T, s, *q) for c, _, _ in results for s, q in zip(c.s, c.q))
    col.csv("attractor.csv", ["seed", "T", "s"] + [f"q_{i + 1}" for i in range(m)], rows)
    col.json("attractor.json", {"runs": [{
        "seed": c.seed, "t": c.T, "e2_diameter": c.e2_diameter,
        "diameters": {repr(h): v for h, v in c.diameters.items()},
        "absorbing": ab.__dict__, "curve_fit": fit,
    } for c, ab, fit in results]})
    return EXIT_OK


def _rotation_chunk(cfg: RunConfig, seeds):
    A, params = _setup(cfg)
    with warnings.catch_warnings():
        # seed count is judged on the merged ensemble, not per chunk
        warnings.simplefilter("ignore", UserWarning)
        est = estimate_rotation(A, params, seeds, cfg.numerics.T, cfg.numerics.dt)
    return est.half.per_oscillator_slopes, est.per_oscillator_slopes


def cmd_rotation(cfg: RunConfig, col: Collector) -> int:
    seeds = col.seeds
    # fixed chunking: batch shape affects rounding, so it must not follow the worker count
    chunks = [seeds[i:i + ROTATION_CHUNK] for i in range(0, len(seeds), ROTATION_CHUNK)]
    parts = _map(_rotation_chunk, [(cfg, c) for c in chunks], cfg.numerics.workers)
    T = cfg.numerics.T
    half = RotationEstimate.from_slopes(np.vstack([p[0] for p in parts]), T / 2, seeds)
    est = RotationEstimate.from_slopes(np.vstack([p[1] for p in parts]), T, seeds, half=half)
    A, params = _setup(cfg)
    cond = check_conditions(A, params, cfg.numerics.delta)
    rep = locking_report(est, cond)
    col.csv("rotation.csv", ["seed", "j", "T", "slope"], est.rows())
    col.json("rotation.json", {
        "t": T, "rho_hat": est.rho_hat, "rho_hat_half": half.rho_hat,
        "spread_j": est.spread_j, "spread_seed": est.spread_seed,
        "locking": rep.as_dict(),
    })
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "check-conditions": cmd_check_conditions,
    "simulate": cmd_simulate,
    "attractor": cmd_attractor,
    "rotation": cmd_rotation,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oscillattr", description="Stochastic coupled oscillator lattices.")
    ap.add_argument("subcommand", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="YAML run configuration")
    ap.add_argument("--out", help="output directory (overrides outputs.directory)")
    ap.add_argument("--workers", type=int, help="worker processes (overrides numerics.workers)")
    return ap


def run(subcommand: str, config_path, out=None, workers=None) -> int:
    try:
        cfg = load_config(config_path)
        if workers is not None:
            if workers < 1:
                raise ConfigError("--workers", "must be at least 1")
            from dataclasses import replace
            cfg = replace(cfg, numerics=replace(cfg.numerics, workers=workers))
        out_dir = Path(out) if out else Path(cfg.base_dir) / cfg.outputs.directory
        seeds = cfg.seeds(subcommand) if subcommand in ("simulate", "attractor", "rotation") else []
        col = Collector(cfg, out_dir, subcommand, seeds)
        return COMMANDS[subcommand](cfg, col)
    except BlowUpError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BLOWUP
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.subcommand, args.config, args.out, args.workers)


if __name__ == "__main__":
    sys.exit(main())
