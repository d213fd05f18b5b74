"""Integrators for the noisy oscillator network.

Two formulations share the same Brownian increments:

* the SDE in ``(u, udot)``, integrated by Euler-Maruyama;
* the random ODE in ``Y = (u, v)`` with ``v = udot - z``, driven by the OU
  path ``z`` and integrated by an exponential midpoint rule (``exp(C dt)``
  is computed once).

States are arrays whose last axis has length ``2n``; any leading axes are
batch axes (cloud points, seeds), so one call advances a whole ensemble.
Noise sources yield blocks with an optional seed axis, which is aligned
with the first batch axis of the state.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .coupling import CouplingMatrix
from .energy import EnergyStructure, OscillatorParams, build_C
from .noise import BLOCK, TimeGrid

BLOWUP = 1e12
_CHECK_EVERY = 64


class BlowUpError(RuntimeError):
    def __init__(self, step: int, t: float):
        super().__init__(f"state left the bounded region (|Y| > {BLOWUP:g} or non-finite) by step {step}, t={t:g}")
        self.step = step
        self.t = t


@dataclass(frozen=True)
class State:
    u: np.ndarray
    v: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.u, self.v], axis=-1)

    @classmethod
    def from_array(cls, Y) -> "State":
        Y = np.asarray(Y)
        n = Y.shape[-1] // 2
        return cls(Y[..., :n], Y[..., n:])


@dataclass(frozen=True)
class PhasePoint:
    u: np.ndarray
    udot: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.u, self.udot], axis=-1)


@dataclass(frozen=True)
class QuotientPoint:
    s: float
    q: np.ndarray


def params_digest(params: OscillatorParams, A) -> str:
    M = A.entries if isinstance(A, CouplingMatrix) else np.asarray(A)
    blob = json.dumps(params.as_dict(), sort_keys=True).encode() + M.tobytes()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray          # (n_records, *batch, 2n) or observed quantity
    grid: TimeGrid
    scheme: str
    kind: str                   # "rde" (u, v) or "sde" (u, udot)
    seed: int | tuple | None = None
    params_hash: str = ""
    record_every: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path, batch_index=()) -> None:
        """Long-format dump: ``t, j, u_j, udot_j`` (SDE) or ``t, j, u_j, v_j`` (RDE)."""
        import csv

        n = self.states.shape[-1] // 2
        second = "udot" if self.kind == "sde" else "v"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "j", "u", second])
            for t, Y in zip(self.times, self.states):
                Y = Y[batch_index]
                for j in range(n):
                    w.writerow([repr(float(t)), j, repr(float(Y[j])), repr(float(Y[n + j]))])

    def metadata(self) -> dict:
        return {
            "seed": self.seed, "params_digest": self.params_hash, "scheme": self.scheme,
            "kind": self.kind, "dt": self.grid.dt, "t0": self.grid.t0, "t1": self.grid.t1,
            "record_every": self.record_every, **self.meta,
        }


def _matrix(A) -> np.ndarray:
    return A.entries if isinstance(A, CouplingMatrix) else np.asarray(A, dtype=float)


def _align(z: np.ndarray, batch_ndim: int) -> np.ndarray:
    """Insert singleton axes so a ``(m, S, n)`` block broadcasts against ``(S, P, 2n)`` states."""
    if z.ndim == 3 and batch_ndim > 1:
        return z.reshape(z.shape[:2] + (1,) * (batch_ndim - 1) + z.shape[2:])
    return z


def forcing(Y: np.ndarray, z: np.ndarray, params: OscillatorParams) -> np.ndarray:
    """Nonlinear part ``F = (z, f - beta g(u) + (1 - alpha) z)``."""
    n = params.n
    u = Y[..., :n]
    z = np.broadcast_to(z, u.shape)
    rest = params.f - params.beta * params.g_model.g(u) + (1 - params.alpha) * z
    return np.concatenate([z, rest], axis=-1)


def drift_rde(Y, z_t, A, params: OscillatorParams) -> np.ndarray:
    """Right-hand side ``(v + z, -K A u - alpha v + f - beta g(u) + (1-alpha) z)``."""
    Y = np.asarray(Y, dtype=float)
    n = params.n
    u, v = Y[..., :n], Y[..., n:]
    M = _matrix(A)
    du = v + z_t
    dv = -params.K * (u @ M.T) - params.alpha * v + params.f - params.beta * params.g_model.g(u) \
        + (1 - params.alpha) * z_t
    return np.concatenate([np.broadcast_to(du, u.shape), dv], axis=-1)


MAX_ALPHA_DT = 0.1


def _check_step(alpha: float, dt: float) -> None:
    if alpha * dt > MAX_ALPHA_DT:
        raise ValueError(f"alpha*dt = {alpha * dt:g} exceeds {MAX_ALPHA_DT}; reduce dt")


def _check(Y, step, t):
    if not np.all(np.isfinite(Y)) or np.abs(Y).max() > BLOWUP:
        raise BlowUpError(step, t)


def _recorder(n_steps, record_every, observe):
    if record_every is None:
        record_every = n_steps
    if n_steps % record_every:
        raise ValueError(f"record_every={record_every} must divide n_steps={n_steps}")
    obs = observe or (lambda Y: Y.copy())
    return record_every, obs


def integrate_rde(Y0, noise, A, params: OscillatorParams, scheme: str = "expmid",
                  record_every: int | None = 1, observe=None, block: int = BLOCK) -> Trajectory:
    """Integrate the random ODE over ``noise.grid``.

    ``scheme="expmid"``: ``Y+ = E Y + dt E_h F(t + dt/2, Y_mid)`` with
    ``E = exp(C dt)``, ``E_h = exp(C dt / 2)`` and predictor
    ``Y_mid = E_h Y + dt/2 F(t, Y)``.  ``scheme="rk4"``: classical RK4 on the
    full drift.  ``z`` between nodes is linear in time.

    ``record_every=None`` keeps only the initial and final states;
    ``observe`` maps each recorded state to what is stored.
    """
    grid = noise.grid
    dt, n_steps = grid.dt, grid.n_steps
    _check_step(params.alpha, dt)
    record_every, obs = _recorder(n_steps, record_every, observe)
    M = _matrix(A)
    C = build_C(M, params.alpha, params.K)
    Y = np.array(Y0, dtype=float)
    if Y.shape[-1] != C.shape[0]:
        raise ValueError(f"state has length {Y.shape[-1]}, expected {C.shape[0]}")

    if scheme == "expmid":
        ET = expm(C * dt).T
        EhT = expm(C * dt / 2).T
    elif scheme != "rk4":
        raise ValueError(f"unknown scheme {scheme!r}")

    records = [obs(Y)]
    k = 0
    for zb in noise.z_blocks(block):
        zb = _align(zb, Y.ndim - 1)
        for i in range(zb.shape[0] - 1):
            za, zc = zb[i], zb[i + 1]
            zm = 0.5 * (za + zc)
            if scheme == "expmid":
                Ym = Y @ EhT + (0.5 * dt) * forcing(Y, za, params)
                Y = Y @ ET + dt * (forcing(Ym, zm, params) @ EhT)
            else:
                k1 = drift_rde(Y, za, M, params)
                k2 = drift_rde(Y + 0.5 * dt * k1, zm, M, params)
                k3 = drift_rde(Y + 0.5 * dt * k2, zm, M, params)
                k4 = drift_rde(Y + dt * k3, zc, M, params)
                Y = Y + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            k += 1
            if k % _CHECK_EVERY == 0 or k == n_steps:
                _check(Y, k, grid.t0 + k * dt)
            if k % record_every == 0:
                records.append(obs(Y))
    times = grid.t0 + dt * np.arange(0, n_steps + 1, record_every)
    return Trajectory(times, np.asarray(records), grid, scheme, "rde",
                      _seed_of(noise), params_digest(params, M), record_every)


def integrate_sde(phi0, noise, A, params: OscillatorParams, record_every: int | None = 1,
                  observe=None, block: int = BLOCK) -> Trajectory:
    """Euler-Maruyama for ``d udot + alpha udot dt + K A u dt + beta g(u) dt = f dt + dW``.

    ``udot+ = udot + dt (-alpha udot - K A u - beta g(u) + f) + dW`` and
    ``u+ = u + dt udot``.
    """
    grid = noise.grid
    dt, n_steps = grid.dt, grid.n_steps
    _check_step(params.alpha, dt)
    record_every, obs = _recorder(n_steps, record_every, observe)
    M = _matrix(A)
    KMT = params.K * M.T
    n = M.shape[0]
    Y = np.array(phi0, dtype=float)
    if Y.shape[-1] != 2 * n:
        raise ValueError(f"state has length {Y.shape[-1]}, expected {2 * n}")
    u, ud = Y[..., :n].copy(), Y[..., n:].copy()
    g = params.g_model.g
    alpha, beta, f = params.alpha, params.beta, params.f

    def pack():
        return np.concatenate([u, ud], axis=-1)

    records = [obs(pack())]
    k = 0
    for dW in noise.increment_blocks(block):
        dW = _align(dW, u.ndim - 1)
        for i in range(dW.shape[0]):
            acc = f - alpha * ud - u @ KMT
            if beta != 0.0:
                acc -= beta * g(u)
            u_next = u + dt * ud
            ud = ud + dt * acc + dW[i]
            u = u_next
            k += 1
            if k % _CHECK_EVERY == 0 or k == n_steps:
                _check(ud, k, grid.t0 + k * dt)
                _check(u, k, grid.t0 + k * dt)
            if k % record_every == 0:
                records.append(obs(pack()))
    times = grid.t0 + dt * np.arange(0, n_steps + 1, record_every)
    return Trajectory(times, np.asarray(records), grid, "euler-maruyama", "sde",
                      _seed_of(noise), params_digest(params, M), record_every)


def _seed_of(noise):
    return getattr(noise, "seed", None) if hasattr(noise, "seed") else tuple(getattr(noise, "seeds", ()))


def sde_to_rde(phi0, z0) -> np.ndarray:
    """``Y0 = (u0, udot0 - z(t0))``."""
    phi0 = np.asarray(phi0, dtype=float)
    n = phi0.shape[-1] // 2
    Y0 = phi0.copy()
    Y0[..., n:] -= z0
    return Y0


def rde_to_sde(Y, z) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[-1] // 2
    phi = Y.copy()
    phi[..., n:] += z
    return phi


def quotient_coords(Y, es: EnergyStructure) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised reduction modulo ``p0``: ``(s mod kappa, E2 coordinates)``."""
    s = np.mod(es.e1_coord(Y), es.kappa)
    # mod can return kappa itself for tiny negative inputs
    s = np.where(s >= es.kappa, 0.0, s)
    return s, es.e2_coords(Y)


def mod_p0(Y, es: EnergyStructure) -> QuotientPoint:
    s, q = quotient_coords(np.asarray(Y, dtype=float), es)
    return QuotientPoint(float(s), q)


def cocycle_residual(Y0, noise, t: float, s: float, A, params: OscillatorParams,
                     es: EnergyStructure, scheme: str = "expmid") -> float:
    """``|Y(t+s, w, Y0) - Y(t, theta_s w, Y(s, w, Y0))|_E`` on grid-aligned ``s, t``."""
    if t < 0 or s < 0:
        raise ValueError("t and s must be nonnegative")
    t0 = noise.grid.t0
    if t == 0 and s == 0:
        return 0.0

    def run(path, Y):
        return integrate_rde(Y, path, A, params, scheme, record_every=None).final

    full = run(noise.window(t0, t0 + t + s), Y0)
    Ys = run(noise.window(t0, t0 + s), Y0) if s > 0 else np.asarray(Y0, dtype=float)
    two_step = run(noise.window(t0 + s, t0 + s + t), Ys) if t > 0 else Ys
    return float(es.norm(full - two_step).max())
