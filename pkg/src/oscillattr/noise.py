"""Reproducible two-sided Wiener paths and the stationary OU process.

Every Gaussian draw is addressed by ``(seed, oscillator, stream, absolute
index)`` through numpy's Philox counter-based generator, so a path segment
can be regenerated anywhere on the time axis (including negative times used
for pullback runs) without storing or replaying the rest of the path.

Increments live on a *base* resolution ``base_dt``.  Coarser grids sum base
increments; finer grids split each base increment with the exact Gaussian
bridge, recursively by halves when the refinement factor is a power of two.
Any chain of dyadic refinements of the same base therefore samples one and
the same Brownian path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

BASE_DT = 1e-3
BLOCK = 4096
_MASK64 = (1 << 64) - 1

# stream tags
_BASE, _DYADIC, _SPLIT, _OU_INIT = 0, 1, 2, 3


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        k0 = self.t0 / self.dt
        if abs(k0 - round(k0)) > 1e-6:
            raise ValueError(f"t0={self.t0} is not aligned with dt={self.dt}")

    @classmethod
    def span(cls, t0: float, t1: float, dt: float) -> "TimeGrid":
        n = (t1 - t0) / dt
        if abs(n - round(n)) > 1e-6:
            raise ValueError(f"[{t0}, {t1}] is not a whole number of steps of {dt}")
        return cls(float(t0), float(dt), int(round(n)))

    @property
    def t1(self) -> float:
        return self.t0 + self.n_steps * self.dt

    @property
    def k0(self) -> int:
        """Absolute index of the first node, ``t0 = k0 * dt``."""
        return int(round(self.t0 / self.dt))

    @property
    def times(self) -> np.ndarray:
        return (self.k0 + np.arange(self.n_steps + 1)) * self.dt

    def index_of(self, t: float) -> int:
        i = (t - self.t0) / self.dt
        if abs(i - round(i)) > 1e-6 or not 0 <= round(i) <= self.n_steps:
            raise ValueError(f"t={t} is not a node of {self}")
        return int(round(i))


def _stream_key(j: int, tag: int, level: int = 0) -> int:
    return (tag << 56) | (level << 32) | j


def keyed_normals(seed: int, j: int, tag: int, level: int, i0: int, n: int) -> np.ndarray:
    """Standard normals for absolute indices ``i0 .. i0+n-1`` of one stream.

    Draws are produced in blocks of ``BLOCK``; the block number sits in the
    third Philox counter word so distinct blocks never share counters.
    """
    if n <= 0:
        return np.empty(0)
    key = np.array([int(seed) & _MASK64, _stream_key(j, tag, level)], dtype=np.uint64)
    b_first = i0 // BLOCK
    b_last = (i0 + n - 1) // BLOCK
    out = np.empty((b_last - b_first + 1) * BLOCK)
    for pos, b in enumerate(range(b_first, b_last + 1)):
        counter = np.array([0, 0, b & _MASK64, 0], dtype=np.uint64)
        bitgen = np.random.Philox(key=key, counter=counter)
        out[pos * BLOCK:(pos + 1) * BLOCK] = np.random.Generator(bitgen).standard_normal(BLOCK)
    start = i0 - b_first * BLOCK
    return out[start:start + n]


def _ratio(a: float, b: float) -> int | None:
    r = a / b
    if r >= 1 - 1e-9 and abs(r - round(r)) <= 1e-9 * max(1.0, r):
        return int(round(r))
    return None


def _refine(seed, j, coarse, b0, base_dt, r):
    """Split base increments ``coarse[b]`` (indices b0..) into ``r`` pieces each."""
    nb = coarse.size
    if r & (r - 1) == 0:
        x = coarse[:, None]
        width = base_dt
        level = 0
        while x.shape[1] < r:
            level += 1
            parents = x.shape[1]
            z = keyed_normals(seed, j, _DYADIC, level, b0 * parents, nb * parents)
            z = z.reshape(nb, parents)
            left = 0.5 * x + 0.5 * math.sqrt(width) * z
            right = x - left
            x = np.stack([left, right], axis=2).reshape(nb, 2 * parents)
            width /= 2
        return x.ravel()
    dt = base_dt / r
    z = math.sqrt(dt) * keyed_normals(seed, j, _SPLIT, r, b0 * r, nb * r).reshape(nb, r)
    # iid pieces conditioned on their sum
    x = z - z.mean(axis=1, keepdims=True) + coarse[:, None] / r
    return x.ravel()


def unit_increments(seed: int, j: int, dt: float, k0: int, n: int,
                    base_dt: float = BASE_DT) -> np.ndarray:
    """Unscaled Wiener increments ``W(t_{k+1}) - W(t_k)`` for ``k = k0..k0+n-1``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    m = _ratio(dt, base_dt)
    if m is not None:
        base = math.sqrt(base_dt) * keyed_normals(seed, j, _BASE, 0, k0 * m, n * m)
        return base.reshape(n, m).sum(axis=1) if m > 1 else base
    r = _ratio(base_dt, dt)
    if r is None:
        raise ValueError(
            f"dt={dt} is neither a multiple nor an integer fraction of base_dt={base_dt}"
        )
    b0 = k0 // r
    b1 = -((-(k0 + n)) // r)
    coarse = math.sqrt(base_dt) * keyed_normals(seed, j, _BASE, 0, b0, b1 - b0)
    fine = _refine(seed, j, coarse, b0, base_dt, r)
    start = k0 - b0 * r
    return fine[start:start + n]


def brownian_increments(seed: int, eps, dt: float, k0: int, n: int,
                        base_dt: float = BASE_DT) -> np.ndarray:
    """Scaled increments ``eps_j dW_j`` with shape ``(n, len(eps))``."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    out = np.zeros((n, eps.size))
    for j, e in enumerate(eps):
        if e != 0.0:
            out[:, j] = e * unit_increments(seed, j, dt, k0, n, base_dt)
    return out


@dataclass(frozen=True)
class NoisePath:
    grid: TimeGrid
    seed: int
    eps: np.ndarray
    increments: np.ndarray
    z: np.ndarray | None = None
    base_dt: float = BASE_DT
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def n_osc(self) -> int:
        return self.increments.shape[1]

    def W(self) -> np.ndarray:
        """Wiener path relative to ``t0`` at every node, shape ``(n_steps+1, n_osc)``."""
        out = np.zeros((self.grid.n_steps + 1, self.n_osc))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out

    def window(self, t_start: float, t_end: float | None = None) -> "NoisePath":
        """Restriction to ``[t_start, t_end]``; realises the shift ``theta_s``."""
        if t_end is None:
            t_end = self.grid.t1
        i0 = self.grid.index_of(t_start)
        i1 = self.grid.index_of(t_end)
        if i1 <= i0:
            raise ValueError("window must contain at least one step")
        grid = TimeGrid(self.grid.t0 + i0 * self.grid.dt, self.grid.dt, i1 - i0)
        z = None if self.z is None else self.z[i0:i1 + 1]
        return replace(self, grid=grid, increments=self.increments[i0:i1], z=z)

    def shift(self, s: float) -> "NoisePath":
        return self.window(self.grid.t0 + s)

    def increment_blocks(self, block: int = BLOCK):
        for i in range(0, self.grid.n_steps, block):
            yield self.increments[i:i + block]

    def z_blocks(self, block: int = BLOCK):
        """OU values at the nodes of each block of steps, endpoints included."""
        if self.z is None:
            raise ValueError("path has no OU component; run ou_from_increments first")
        for i in range(0, self.grid.n_steps, block):
            yield self.z[i:i + block + 1]

    def to_csv(self, path) -> None:
        t = self.times
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "j", "dW", "z"])
            for k in range(self.grid.n_steps + 1):
                for j in range(self.n_osc):
                    dw = repr(float(self.increments[k, j])) if k < self.grid.n_steps else ""
                    zz = "" if self.z is None else repr(float(self.z[k, j]))
                    w.writerow([repr(float(t[k])), j, dw, zz])


def sample_path(seed: int, grid: TimeGrid, eps, base_dt: float = BASE_DT) -> NoisePath:
    """Wiener increments on ``grid`` for the noise intensities ``eps``."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float)).copy()
    if np.any(eps < 0):
        raise ValueError("noise intensities must be nonnegative")
    inc = brownian_increments(seed, eps, grid.dt, grid.k0, grid.n_steps, base_dt)
    return NoisePath(grid, int(seed), eps, inc, None, base_dt)


def stationary_ou_init(seed: int, eps, k: int) -> np.ndarray:
    """Draw ``z(t_k)`` from the stationary law ``N(0, eps^2 / 2)``."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    out = np.zeros(eps.size)
    for j, e in enumerate(eps):
        if e != 0.0:
            out[j] = e * math.sqrt(0.5) * keyed_normals(seed, j, _OU_INIT, 0, k, 1)[0]
    return out


def ou_recursion(z0: np.ndarray, increments: np.ndarray, dt: float) -> np.ndarray:
    """``z_{k+1} = exp(-dt) z_k + dW_k`` along axis 0."""
    decay = math.exp(-dt)
    z = np.empty((increments.shape[0] + 1,) + increments.shape[1:])
    z[0] = z0
    z[1:] = lfilter([1.0], [1.0, -decay], increments, axis=0, zi=decay * z0[None, ...])[0]
    return z


def ou_from_increments(path: NoisePath, init: str = "stationary",
                       burn_in: float = 20.0) -> NoisePath:
    """Fill ``z`` from the path's increments.

    ``init="stationary"`` draws ``z(t0)`` from the stationary law on a
    dedicated substream; ``init="burn_in"`` starts from zero at
    ``t0 - burn_in`` on the same Brownian path and discards the lead-in.
    """
    g = path.grid
    if init == "stationary":
        z0 = stationary_ou_init(path.seed, path.eps, g.k0)
    elif init == "burn_in":
        n_burn = int(round(burn_in / g.dt))
        lead = brownian_increments(path.seed, path.eps, g.dt, g.k0 - n_burn, n_burn, path.base_dt)
        z0 = ou_recursion(np.zeros(path.n_osc), lead, g.dt)[-1]
    else:
        raise ValueError(f"unknown OU initialisation {init!r}")
    z = ou_recursion(z0, path.increments, g.dt)
    return replace(path, z=z, meta={**path.meta, "ou_init": init})


def ou_path(seed: int, grid: TimeGrid, eps, base_dt: float = BASE_DT, init: str = "stationary") -> NoisePath:
    return ou_from_increments(sample_path(seed, grid, eps, base_dt), init=init)


@dataclass(frozen=True)
class TemperednessReport:
    epsilon_rate: float
    times: np.ndarray
    sup_envelope: np.ndarray
    tempered: bool
    r_tilde: float


MIN_HORIZON = 100.0


def check_temperedness(path: NoisePath, epsilon_rate: float) -> TemperednessReport:
    """Envelope test for ``|z(t)| <= exp(eps |t|) r``.

    The path is tempered at rate ``eps`` when the envelope
    ``exp(-eps |t|) |z(t)|`` over the far half of the horizon stays within 5%
    of its maximum over the near half.
    """
    if path.z is None:
        raise ValueError("path has no OU component; run ou_from_increments first")
    if not epsilon_rate > 0:
        raise ValueError("epsilon_rate must be positive")
    t = path.times
    horizon = np.abs(t).max()
    if horizon < MIN_HORIZON:
        raise ValueError(f"horizon {horizon:g} < {MIN_HORIZON:g}: temperedness test inconclusive")
    env = np.exp(-epsilon_rate * np.abs(t)) * np.linalg.norm(path.z, axis=1)
    near = np.abs(t) <= horizon / 2
    near_max = env[near].max() if near.any() else 0.0
    far_max = env[~near].max() if (~near).any() else 0.0
    tempered = bool(far_max <= 1.05 * near_max)
    return TemperednessReport(float(epsilon_rate), t, env, tempered, float(env.max()))


@dataclass(frozen=True)
class NoiseEnsemble:
    """Several independent realisations on one grid, generated block by block.

    Blocks carry a seed axis: increments have shape ``(m, n_seeds, n_osc)``.
    Nothing is stored, so horizons of millions of steps stay cheap in memory.
    """

    seeds: tuple
    grid: TimeGrid
    eps: np.ndarray
    base_dt: float = BASE_DT
    ou_init: str = "stationary"

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "eps", np.atleast_1d(np.asarray(self.eps, dtype=float)))

    @property
    def n_osc(self) -> int:
        return self.eps.size

    def _increments(self, k0: int, m: int) -> np.ndarray:
        return np.stack(
            [brownian_increments(s, self.eps, self.grid.dt, k0, m, self.base_dt) for s in self.seeds],
            axis=1,
        )

    def increment_blocks(self, block: int = BLOCK):
        k0, n = self.grid.k0, self.grid.n_steps
        for i in range(0, n, block):
            yield self._increments(k0 + i, min(block, n - i))

    def z_blocks(self, block: int = BLOCK):
        g = self.grid
        if self.ou_init == "stationary":
            z = np.stack([stationary_ou_init(s, self.eps, g.k0) for s in self.seeds])
        else:
            z = np.stack([
                ou_from_increments(sample_path(s, TimeGrid(g.t0, g.dt, 1), self.eps, self.base_dt),
                                   init=self.ou_init).z[0]
                for s in self.seeds
            ])
        for inc in self.increment_blocks(block):
            zb = ou_recursion(z, inc, g.dt)
            yield zb
            z = zb[-1]

    def member(self, i: int) -> NoisePath:
        """Materialise realisation ``i`` as a stored path (with ``z``)."""
        return ou_from_increments(sample_path(self.seeds[i], self.grid, self.eps, self.base_dt),
                                  init=self.ou_init)
