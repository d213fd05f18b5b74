"""Rotation-number estimates and frequency-locking diagnostics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import integrate_rde, integrate_sde, sde_to_rde
from .energy import ConditionReport, EnergyStructure, OscillatorParams
from .noise import BASE_DT, NoiseEnsemble, TimeGrid, stationary_ou_init


@dataclass
class RotationEstimate:
    T: float
    seeds: tuple
    per_oscillator_slopes: np.ndarray   # (n_seeds, n)
    rho_hat: float
    spread_j: float
    spread_seed: float
    half: "RotationEstimate | None" = None
    rde_slopes: np.ndarray | None = None

    @classmethod
    def from_slopes(cls, slopes, T, seeds, half=None, rde_slopes=None) -> "RotationEstimate":
        slopes = np.asarray(slopes, dtype=float)
        rho = float(slopes.mean())
        spread_j = float(np.abs(slopes.mean(axis=0) - rho).max())
        per_seed = slopes.mean(axis=1)
        se = float(per_seed.std(ddof=1) / math.sqrt(len(per_seed))) if len(per_seed) > 1 else float("nan")
        return cls(float(T), tuple(seeds), slopes, rho, spread_j, se, half, rde_slopes)

    def rows(self):
        """``(seed, j, T, slope)`` rows for this horizon and the half horizon."""
        for est in (self.half, self):
            if est is None:
                continue
            for seed, row in zip(est.seeds, est.per_oscillator_slopes):
                for j, slope in enumerate(row):
                    yield seed, j, est.T, float(slope)


def estimate_rotation(A, params: OscillatorParams, seeds, T: float, dt: float = 1e-3,
                      phi0=None, base_dt: float = BASE_DT, compare_rde: bool = False,
                      es: EnergyStructure | None = None) -> RotationEstimate:
    """Slopes ``u_j(T)/T`` of the SDE from ``phi0`` (default rest) for each seed.

    The half-horizon estimate is recorded from the same runs.  With
    ``compare_rde`` the random ODE is integrated on the same noise and its
    slopes are attached for comparison.
    """
    seeds = tuple(int(s) for s in seeds)
    n = params.n
    if len(seeds) < 8:
        warnings.warn(f"only {len(seeds)} seeds; standard errors will be crude", stacklevel=2)
    if es is not None and T < 1e3 / es.a:
        warnings.warn(f"T={T:g} is shorter than 1000/a={1e3 / es.a:g}; Cauchy check may be weak",
                      stacklevel=2)
    grid = TimeGrid.span(0.0, T, dt)
    if grid.n_steps % 2:
        raise ValueError("T/dt must be even so the half horizon is a grid node")
    ens = NoiseEnsemble(seeds, grid, params.eps, base_dt)
    phi0 = np.zeros(2 * n) if phi0 is None else np.asarray(phi0, dtype=float)
    state = np.broadcast_to(phi0, (len(seeds), 2 * n)).copy()

    def take_u(Y):
        return Y[..., :n].copy()

    traj = integrate_sde(state, ens, A, params, record_every=grid.n_steps // 2, observe=take_u)
    u_half, u_end = traj.states[1], traj.states[2]

    rde = None
    if compare_rde:
        z0 = np.stack([stationary_ou_init(s, params.eps, grid.k0) for s in seeds])
        Y0 = sde_to_rde(state, z0)
        rtraj = integrate_rde(Y0, ens, A, params, record_every=None, observe=take_u)
        rde = rtraj.final / T

    half = RotationEstimate.from_slopes(u_half / (T / 2), T / 2, seeds)
    return RotationEstimate.from_slopes(u_end / T, T, seeds, half=half, rde_slopes=rde)


@dataclass(frozen=True)
class LockingReport:
    locked: bool
    rho_hat: float
    tolerance_used: float
    pooled_se: float
    spread_j: float
    cauchy_gap: float
    condition: ConditionReport | None

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "condition"}
        if self.condition is not None:
            d["condition"] = self.condition.as_dict()
        return d


def pooled_standard_error(est: RotationEstimate) -> float:
    ses = [est.spread_seed] + ([est.half.spread_seed] if est.half is not None else [])
    return float(math.sqrt(np.mean(np.square(ses))))


def default_tolerance(est: RotationEstimate) -> float:
    return max(3 * pooled_standard_error(est), 1e-3 * max(1.0, abs(est.rho_hat)))


def locking_report(est: RotationEstimate, cond: ConditionReport | None = None,
                   tolerance: float | None = None) -> LockingReport:
    """Locked when oscillators agree and the estimate is Cauchy over ``T/2 -> T``."""
    if est.half is None:
        raise ValueError("locking needs estimates at T and T/2")
    tol = default_tolerance(est) if tolerance is None else float(tolerance)
    gap = abs(est.rho_hat - est.half.rho_hat)
    locked = est.spread_j <= tol and gap <= tol
    return LockingReport(bool(locked), est.rho_hat, tol, pooled_standard_error(est),
                         est.spread_j, gap, cond)


def order_preservation_check(es: EnergyStructure, params: OscillatorParams, A, noise, Y1, Y2,
                             T: float | None = None, slack: float = 1e-9,
                             scheme: str = "expmid") -> bool:
    """True iff the E1 coordinates of the two solutions stay ordered at every grid time.

    ``noise`` may be a single path or an ensemble (then every member is checked).
    """
    Y1 = np.asarray(Y1, dtype=float)
    Y2 = np.asarray(Y2, dtype=float)
    if np.any(es.e1_coord(Y1) > es.e1_coord(Y2)):
        raise ValueError("initial points must satisfy PY1 <= PY2")
    if T is not None:
        g = noise.grid
        if isinstance(noise, NoiseEnsemble):
            # same origin, so the stationary z start is unchanged
            noise = replace(noise, grid=TimeGrid(g.t0, g.dt, g.index_of(g.t0 + T)))
        else:
            noise = noise.window(g.t0, g.t0 + T)
    pair = np.stack([Y1, Y2], axis=-2)
    if hasattr(noise, "seeds"):
        pair = np.broadcast_to(pair, (len(noise.seeds),) + pair.shape[-2:]).copy()
    traj = integrate_rde(pair, noise, A, params, scheme, record_every=1, observe=es.e1_coord)
    gaps = traj.states[..., 1] - traj.states[..., 0]
    return bool(np.all(gaps >= -slack))
