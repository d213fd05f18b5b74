"""Model parameters, the linear operator ``C`` and its energy geometry.

The phase space ``E = R^n x R^n`` splits into the neutral line
``E1 = span{eta0}`` and the dissipative complement ``E2``.  On ``E`` we use
the equivalent inner product under which ``exp(Ct)`` contracts ``E2`` at
rate ``a`` and the nonlinearity has Lipschitz constant ``2 c2 |beta| / alpha``.
All of it is realised by one positive-definite Gram matrix ``G`` with
``<Y1, Y2>_E = Y1^T G Y2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import expm

from .coupling import CouplingMatrix, validate_ha

SQRT2P1_SQ = (math.sqrt(2.0) + 1.0) ** 2


@dataclass(frozen=True)
class NonlinearityModel:
    """Periodic ``C^1`` nonlinearity with ``|g| <= c1`` and ``|g'| <= c2``."""

    kappa: float = 2 * math.pi
    c1: float = 1.0
    c2: float = 1.0
    g: callable = field(default=np.sin, compare=False, repr=False)
    dg: callable = field(default=np.cos, compare=False, repr=False)
    name: str = "sin"

    @classmethod
    def sine(cls) -> "NonlinearityModel":
        return cls()

    @classmethod
    def from_table(cls, values, kappa: float) -> "NonlinearityModel":
        """Periodic cubic spline through ``values`` sampled uniformly on ``[0, kappa)``."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 4:
            raise ValueError("g table needs at least 4 samples")
        if not kappa > 0:
            raise ValueError("kappa must be positive")
        x = np.linspace(0.0, kappa, values.size + 1)
        spline = CubicSpline(x, np.append(values, values[0]), bc_type="periodic")
        deriv = spline.derivative()

        def g(u):
            return spline(np.mod(u, kappa))

        def dg(u):
            return deriv(np.mod(u, kappa))

        xs = np.linspace(0.0, kappa, 10_001)
        c1 = float(np.abs(g(xs)).max())
        c2 = float(np.abs(dg(xs)).max())
        # bounds from a dense sample; pad slightly so they remain bounds
        return cls(float(kappa), c1 * (1 + 1e-6), c2 * (1 + 1e-6), g, dg, "table")

    def validate(self, n_samples: int = 10_000, rng=None) -> None:
        rng = np.random.default_rng(0) if rng is None else rng
        x = rng.uniform(0.0, self.kappa, n_samples)
        if not np.allclose(self.g(x + self.kappa), self.g(x), rtol=0, atol=1e-12):
            raise ValueError("g is not kappa-periodic")
        if np.abs(self.g(x)).max() > self.c1 or np.abs(self.dg(x)).max() > self.c2:
            raise ValueError("g violates its stated bounds c1/c2")


@dataclass(frozen=True)
class OscillatorParams:
    alpha: float
    K: float
    beta: float
    f: np.ndarray
    eps: np.ndarray
    g_model: NonlinearityModel = field(default_factory=NonlinearityModel)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.K > 0:
            raise ValueError(f"K must be positive, got {self.K}")
        f = np.atleast_1d(np.asarray(self.f, dtype=float))
        eps = np.atleast_1d(np.asarray(self.eps, dtype=float))
        if f.shape != eps.shape:
            raise ValueError(f"f and eps lengths differ: {f.size} vs {eps.size}")
        if np.any(eps < 0):
            raise ValueError("eps must be nonnegative")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "eps", eps)

    @classmethod
    def create(cls, n: int, alpha: float, K: float, beta: float = 0.0, f=0.0, eps=0.0,
               g_model: NonlinearityModel | None = None) -> "OscillatorParams":
        """Broadcast scalar ``f``/``eps`` to ``n`` oscillators."""
        f = np.broadcast_to(np.asarray(f, dtype=float), (n,)).copy()
        eps = np.broadcast_to(np.asarray(eps, dtype=float), (n,)).copy()
        return cls(float(alpha), float(K), float(beta), f, eps, g_model or NonlinearityModel())

    @property
    def n(self) -> int:
        return self.f.size

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha, "K": self.K, "beta": self.beta,
            "f": self.f.tolist(), "eps": self.eps.tolist(),
            "g": self.g_model.name, "kappa": self.g_model.kappa,
            "c1": self.g_model.c1, "c2": self.g_model.c2,
        }


def mu_eigenvalues(alpha: float, K: float, lambdas) -> np.ndarray:
    """Eigenvalue pairs ``(mu+, mu-)`` of ``C``, one row per eigenvalue of ``A``."""
    lam = np.asarray(lambdas, dtype=float)
    root = np.sqrt((alpha**2 - 4 * K * lam).astype(complex))
    return np.stack([(-alpha + root) / 2, (-alpha - root) / 2], axis=-1)


def decay_rate_a(alpha: float, K: float, delta: float, lambda1: float) -> float:
    return alpha / 2 - abs(alpha / 2 - delta * K * lambda1 / alpha)


def choose_delta(alpha: float, K: float, lambda1: float) -> float:
    """The ``delta`` in ``(0, 1]`` that maximises ``a``."""
    return float(min(1.0, alpha**2 / (2 * K * lambda1)))


def lipschitz_constant(params: OscillatorParams) -> float:
    return 2 * params.g_model.c2 * abs(params.beta) / params.alpha


def build_C(A: CouplingMatrix | np.ndarray, alpha: float, K: float) -> np.ndarray:
    M = A.entries if isinstance(A, CouplingMatrix) else np.asarray(A, dtype=float)
    n = M.shape[0]
    I = np.eye(n)
    return np.block([[np.zeros((n, n)), I], [-K * M, -alpha * I]])


@dataclass(frozen=True)
class EnergyStructure:
    alpha: float
    K: float
    delta: float
    lambda1: float
    kappa: float
    C: np.ndarray
    gram: np.ndarray
    chol: np.ndarray          # upper R with gram = R^T R
    eta0: np.ndarray
    eta_minus1: np.ndarray
    e22_basis: np.ndarray     # columns, Euclidean lifts of eigenvectors of A
    e2_basis: np.ndarray      # columns, orthonormal for <.,.>_E
    a: float
    LF: float
    m_eq: float
    M_eq: float

    @property
    def n(self) -> int:
        return self.eta0.size // 2

    @property
    def M1(self) -> float:
        """Smallest constant with ``|Y|_E <= M1 |Y|``."""
        return self.M_eq

    @property
    def p0(self) -> np.ndarray:
        return self.kappa * self.eta0

    @property
    def eta0_norm(self) -> float:
        return math.sqrt(self.eta0 @ self.gram @ self.eta0)

    def inner(self, Y1, Y2) -> np.ndarray:
        return np.einsum("...i,ij,...j->...", Y1, self.gram, Y2)

    def norm(self, Y) -> np.ndarray:
        return np.linalg.norm(np.asarray(Y) @ self.chol.T, axis=-1)

    def e1_coord(self, Y) -> np.ndarray:
        """``s`` with ``PY = s eta0``."""
        w = self.gram @ self.eta0
        return (np.asarray(Y) @ w) / (self.eta0 @ w)

    def e2_coords(self, Y) -> np.ndarray:
        """Coordinates of ``QY`` in the E-orthonormal basis of ``E2``."""
        return np.asarray(Y) @ (self.gram @ self.e2_basis)

    @property
    def P(self) -> np.ndarray:
        w = self.gram @ self.eta0
        return np.outer(self.eta0, w) / (self.eta0 @ w)

    @property
    def Q(self) -> np.ndarray:
        return np.eye(2 * self.n) - self.P

    def operator_norm(self, M) -> float:
        """Operator norm of ``M`` with respect to ``|.|_E``."""
        R = self.chol
        return float(np.linalg.norm(R @ M @ np.linalg.inv(R), 2))


def build_energy(A: CouplingMatrix | np.ndarray, params: OscillatorParams,
                 delta: float | None = None) -> EnergyStructure:
    rep = validate_ha(A)
    if not rep.ha_satisfied:
        raise ValueError(f"coupling matrix violates the hypotheses: {rep.violation}")
    M = A.entries if isinstance(A, CouplingMatrix) else np.asarray(A, dtype=float)
    alpha, K, lam1 = params.alpha, params.K, rep.lambda1
    if delta is None:
        delta = choose_delta(alpha, K, lam1)
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    n = M.shape[0]
    I = np.eye(n)
    ones = np.ones(n)
    J = np.outer(ones, ones) / n

    G11 = np.block([[alpha**2 / 2 * I, alpha / 2 * I], [alpha / 2 * I, I]])
    G22 = np.block([
        [K * M + (alpha**2 / 2 - delta * K * lam1) * I, alpha / 2 * I],
        [alpha / 2 * I, I],
    ])
    # E11 = span{(1,0), (1,-alpha 1)} = {(c1, d1)}; its Euclidean complement is
    # E22 = {(u, v): u, v orthogonal to 1}
    Pi11 = np.kron(np.eye(2), J)
    Pi22 = np.eye(2 * n) - Pi11
    gram = Pi11 @ G11 @ Pi11 + Pi22 @ G22 @ Pi22
    gram = 0.5 * (gram + gram.T)
    try:
        R = np.linalg.cholesky(gram).T
    except np.linalg.LinAlgError as exc:
        raise ValueError("energy form is not positive definite") from exc

    eta0 = np.concatenate([ones, np.zeros(n)])
    eta_m1 = np.concatenate([ones, -alpha * ones])
    phi = rep.eigenvectors[:, 1:]
    zeros = np.zeros_like(phi)
    e22 = np.hstack([np.vstack([phi, zeros]), np.vstack([zeros, phi])])
    raw = np.hstack([eta_m1[:, None], e22])
    L = np.linalg.cholesky(raw.T @ gram @ raw)
    e2 = np.linalg.solve(L, raw.T).T

    w = np.linalg.eigvalsh(gram)
    return EnergyStructure(
        alpha=alpha, K=K, delta=float(delta), lambda1=lam1,
        kappa=params.g_model.kappa,
        C=build_C(M, alpha, K), gram=gram, chol=R,
        eta0=eta0, eta_minus1=eta_m1, e22_basis=e22, e2_basis=e2,
        a=decay_rate_a(alpha, K, delta, lam1),
        LF=lipschitz_constant(params),
        m_eq=float(math.sqrt(w[0])), M_eq=float(math.sqrt(w[-1])),
    )


def projections(es: EnergyStructure, Y) -> tuple[np.ndarray, np.ndarray]:
    Y = np.asarray(Y, dtype=float)
    PY = es.e1_coord(Y)[..., None] * es.eta0
    return PY, Y - PY


@dataclass(frozen=True)
class ConditionReport:
    lambda1: float
    delta: float
    a: float
    LF: float
    gap_ok: bool
    gamma_star: float
    cond_4c_value: float
    cond_4c_ok: bool
    M2: float | None
    remark54_c: float
    alpha_threshold: float
    K_threshold: float
    delta_window: tuple[float, float]
    remark54_ok: bool

    @property
    def locked_regime(self) -> bool:
        return self.gap_ok and self.cond_4c_ok

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["delta_window"] = list(self.delta_window)
        d["locked_regime"] = self.locked_regime
        return d


def check_conditions(A: CouplingMatrix | np.ndarray, params: OscillatorParams,
                     delta: float | None = None) -> ConditionReport:
    """Evaluate the one-dimensionality conditions; never raises on a failed check."""
    lam1 = validate_ha(A).lambda1
    alpha, K = params.alpha, params.K
    if delta is None:
        delta = choose_delta(alpha, K, lam1)
    a = decay_rate_a(alpha, K, delta, lam1)
    LF = lipschitz_constant(params)
    gamma = a / (2 + math.sqrt(2)) if a > 0 else float("nan")
    cond = LF * SQRT2P1_SQ / a if a > 0 else float("inf")
    c = 2 * params.g_model.c2 * abs(params.beta) * SQRT2P1_SQ
    return ConditionReport(
        lambda1=lam1, delta=float(delta), a=a, LF=LF,
        gap_ok=bool(a > 4 * LF),
        gamma_star=gamma,
        cond_4c_value=cond,
        cond_4c_ok=bool(cond < 1),
        M2=1.0 / (1.0 - cond) if cond < 1 else None,
        remark54_c=c,
        alpha_threshold=math.sqrt(2 * c),
        K_threshold=c / lam1,
        delta_window=(c / (K * lam1), min((alpha**2 - c) / (K * lam1), 1.0)),
        remark54_ok=bool(alpha > math.sqrt(2 * c) and K > c / lam1),
    )


@dataclass
class DecayReport:
    passed: bool
    max_dissipation_excess: float
    norm_ratios: dict
    neutral_residual: float
    failures: list = field(default_factory=list)
    witness: np.ndarray | None = None


def verify_semigroup_decay(es: EnergyStructure, t_grid, n_samples: int = 1000,
                           rng=None) -> DecayReport:
    """Numerically check the three decay properties of ``exp(Ct)``.

    (i) ``<CY, Y>_E <= -a |Y|_E^2`` on sampled ``Y`` in ``E2``;
    (ii) ``|exp(Ct) Q|_E <= exp(-a t)`` for each ``t``;
    (iii) ``exp(Ct) P Y = P Y``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    failures = []
    witness = None

    Y = rng.standard_normal((n_samples, es.e2_basis.shape[1])) @ es.e2_basis.T
    nrm2 = es.norm(Y) ** 2
    excess = (es.inner(Y @ es.C.T, Y) + es.a * nrm2) / nrm2
    worst = int(np.argmax(excess))
    if excess[worst] > 1e-9:
        failures.append(f"dissipation: <CY,Y>_E + a|Y|^2 = {excess[worst]:.3e} |Y|^2")
        witness = Y[worst]

    Q, P = es.Q, es.P
    ratios = {}
    neutral = 0.0
    Yp = rng.standard_normal((16, 2 * es.n))
    for t in t_grid:
        Et = expm(es.C * t)
        ratio = es.operator_norm(Et @ Q) / math.exp(-es.a * t)
        ratios[float(t)] = ratio
        if ratio > 1 + 1e-8:
            failures.append(f"decay: |exp(Ct)Q|_E = {ratio:.12f} exp(-at) at t={t}")
        PY = Yp @ P.T
        resid = np.abs(PY @ Et.T - PY).max() / max(1.0, np.abs(PY).max())
        neutral = max(neutral, float(resid))
    if neutral > 1e-10:
        failures.append(f"neutral direction: |exp(Ct)PY - PY| = {neutral:.3e}")

    return DecayReport(not failures, float(excess.max()), ratios, neutral, failures, witness)
