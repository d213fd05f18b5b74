"""Coupling operators for oscillator lattices.

The coupling matrix ``A`` must be symmetric, nonnegative definite, with a
simple zero eigenvalue whose eigenvector is the constant vector.  The
lattice Laplacians built here satisfy this for any ``N >= 2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SYMMETRY_RTOL = 1e-12
NONNEG_RTOL = 1e-10
KERNEL_RTOL = 1e-12
ZERO_EIG_RTOL = 1e-8


@dataclass(frozen=True)
class CouplingMatrix:
    n_side: int
    dim: int
    entries: np.ndarray
    spacing: float | None = None
    bc: str | None = None

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"coupling matrix must be square, got shape {m.shape}")
        if m.shape[0] != self.n_side**self.dim:
            raise ValueError(
                f"matrix size {m.shape[0]} does not match N^d = {self.n_side}^{self.dim}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other):
        return self.entries @ other


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    lambda1: float
    ha_satisfied: bool
    violation: str | None = None
    eigenvectors: np.ndarray | None = field(default=None, repr=False)


def _neighbor(idx: int, step: int, n: int, bc: str) -> int:
    k = idx + step
    if 0 <= k < n:
        return k
    if bc == "neumann":
        # ghost node mirrors the boundary node: u_0 = u_1, u_{N+1} = u_N
        return idx
    return k % n


def build_laplacian(N: int, d: int, h: float = 1.0, bc: str = "neumann") -> CouplingMatrix:
    """Negative discrete Laplacian on an ``N^d`` lattice.

    Row ``j`` is ``(2d u_j - sum of the 2d neighbours) / h^2`` with neighbours
    reflected (``neumann``) or wrapped (``periodic``) at the boundary.
    Lattice sites are ordered row-major over the multi-index.
    """
    if int(N) != N or N < 2:
        raise ValueError(f"N must be an integer >= 2, got {N}")
    if int(d) != d or d < 1:
        raise ValueError(f"d must be an integer >= 1, got {d}")
    if not h > 0:
        raise ValueError(f"spacing h must be positive, got {h}")
    if bc not in ("neumann", "periodic"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    N, d = int(N), int(d)

    shape = (N,) * d
    size = N**d
    A = np.zeros((size, size))
    for multi in itertools.product(range(N), repeat=d):
        row = np.ravel_multi_index(multi, shape)
        A[row, row] += 2 * d
        for axis in range(d):
            for step in (-1, 1):
                nb = list(multi)
                nb[axis] = _neighbor(multi[axis], step, N, bc)
                A[row, np.ravel_multi_index(tuple(nb), shape)] -= 1.0
    return CouplingMatrix(N, d, A / h**2, spacing=float(h), bc=bc)


def from_array(A, n_side: int | None = None, dim: int | None = None) -> CouplingMatrix:
    """Wrap a user-supplied matrix; ``N`` and ``d`` default to ``(size, 1)``."""
    A = np.asarray(A, dtype=float)
    if n_side is None:
        n_side, dim = A.shape[0], 1
    return CouplingMatrix(int(n_side), int(dim), A)


def load_matrix(path: str | Path) -> CouplingMatrix:
    """Read the plain-text matrix format: header ``N d`` then ``N^d`` rows."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"{path}: header must be 'N d', got {lines[0]!r}")
    N, d = int(header[0]), int(header[1])
    size = N**d
    rows = [np.array(ln.split(), dtype=float) for ln in lines[1:]]
    if len(rows) != size or any(r.size != size for r in rows):
        raise ValueError(f"{path}: expected {size} rows of {size} values")
    return CouplingMatrix(N, d, np.vstack(rows))


def save_matrix(A: CouplingMatrix, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{A.n_side} {A.dim}\n")
        for row in A.entries:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def validate_ha(A: CouplingMatrix | np.ndarray) -> SpectrumReport:
    """Check the coupling hypotheses and return the sorted spectrum.

    Never raises on a bad matrix; problems are collected in ``violation``.
    """
    M = A.entries if isinstance(A, CouplingMatrix) else np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")

    problems = []
    scale = max(np.abs(M).max(), np.finfo(float).tiny)
    asym = np.abs(M - M.T).max()
    if asym > SYMMETRY_RTOL * scale:
        problems.append(f"not symmetric (max |A - A^T| = {asym:.3e})")

    sym = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(sym)
    rho = max(np.abs(w).max(), np.finfo(float).tiny)
    if w[0] < -NONNEG_RTOL * rho:
        problems.append(f"indefinite (smallest eigenvalue {w[0]:.3e})")

    ones = np.ones(M.shape[0])
    resid = np.linalg.norm(M @ ones)
    if resid > KERNEL_RTOL * np.linalg.norm(M, 2) * np.sqrt(M.shape[0]):
        problems.append(f"constant vector not in the kernel (|A 1| = {resid:.3e})")

    n_zero = int(np.sum(np.abs(w) <= ZERO_EIG_RTOL * rho))
    if n_zero == 0:
        problems.append("no zero eigenvalue")
    elif n_zero > 1:
        problems.append(f"zero eigenvalue not simple (multiplicity {n_zero})")

    positive = w[w > ZERO_EIG_RTOL * rho]
    lambda1 = float(positive[0]) if positive.size else float("nan")
    return SpectrumReport(
        eigenvalues=w,
        lambda1=lambda1,
        ha_satisfied=not problems,
        violation="; ".join(problems) or None,
        eigenvectors=V,
    )


def neumann_eigenvalues_1d(N: int, h: float = 1.0) -> np.ndarray:
    k = np.arange(N)
    return 4.0 / h**2 * np.sin(k * np.pi / (2 * N)) ** 2


def periodic_eigenvalues_1d(N: int, h: float = 1.0) -> np.ndarray:
    k = np.arange(N)
    return np.sort(4.0 / h**2 * np.sin(k * np.pi / N) ** 2)
