"""Strict run configuration: YAML in, validated dataclasses out."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .coupling import CouplingMatrix, build_laplacian, load_matrix
from .energy import NonlinearityModel, OscillatorParams


class ConfigError(ValueError):
    def __init__(self, where: str, msg: str):
        super().__init__(f"{where}: {msg}")
        self.where = where


@dataclass(frozen=True)
class ModelConfig:
    N: int = 4
    d: int = 1
    h: float = 1.0
    bc: str = "neumann"
    matrix_file: str | None = None


@dataclass(frozen=True)
class GConfig:
    builtin: str | None = "sin"
    table: tuple | None = None
    kappa: float | None = None


@dataclass(frozen=True)
class ParamsConfig:
    alpha: float = 1.0
    K: float = 1.0
    beta: float = 0.0
    f: Any = 0.0
    eps: Any = 0.0
    g: GConfig = field(default_factory=GConfig)


@dataclass(frozen=True)
class NumericsConfig:
    dt: float = 1e-3
    T: float = 10.0
    n_seeds: int = 8
    seed0: int = 0
    n_cloud: int = 256
    n_bins: int = 64
    delta: float | None = None
    scheme: str = "expmid"
    kind: str = "rde"
    record_every: int | None = None
    workers: int = 1


@dataclass(frozen=True)
class OutputsConfig:
    directory: str = "out"
    formats: tuple = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    params: ParamsConfig = field(default_factory=ParamsConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)
    base_dir: str = field(default=".", compare=False)

    def digest(self) -> str:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        blob = json.dumps(d, sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()

    def seeds(self, tag: str) -> list[int]:
        """``seed0 + crc32(tag) + i`` for ``i < n_seeds``."""
        base = self.numerics.seed0 + zlib.crc32(tag.encode())
        return [base + i for i in range(self.numerics.n_seeds)]

    def coupling(self) -> CouplingMatrix:
        m = self.model
        if m.matrix_file is not None:
            path = Path(m.matrix_file)
            if not path.is_absolute():
                path = Path(self.base_dir) / path
            if not path.exists():
                raise ConfigError("model.matrix_file", f"no such file {path}")
            return load_matrix(path)
        return build_laplacian(m.N, m.d, m.h, m.bc)

    def oscillator_params(self, n: int) -> OscillatorParams:
        p = self.params
        try:
            return OscillatorParams.create(n, p.alpha, p.K, p.beta, p.f, p.eps, self.g_model())
        except ValueError as e:
            raise ConfigError("params", str(e)) from None

    def g_model(self) -> NonlinearityModel:
        g = self.params.g
        if g.table is not None:
            return NonlinearityModel.from_table(g.table, g.kappa or 2 * math.pi)
        return NonlinearityModel.sine()


_NESTED = {"model": ModelConfig, "params": ParamsConfig, "numerics": NumericsConfig,
           "outputs": OutputsConfig}


def _strict(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(where, "expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}" if where else unknown[0], "unknown key")
    return data


def _num(where, value, kind=float, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, f"expected a number, got {value!r}")
    if kind is int and value != int(value):
        raise ConfigError(where, f"expected an integer, got {value!r}")
    value = kind(value)
    if not math.isfinite(value):
        raise ConfigError(where, "must be finite")
    if positive and not value > 0:
        raise ConfigError(where, f"must be positive, got {value}")
    if nonneg and value < 0:
        raise ConfigError(where, f"must be nonnegative, got {value}")
    return value


def _vector(where, value, nonneg=False):
    if isinstance(value, (list, tuple)):
        return tuple(_num(f"{where}[{i}]", v, nonneg=nonneg) for i, v in enumerate(value))
    return _num(where, value, nonneg=nonneg)


def _parse_g(raw):
    if raw is None or raw == "sin":
        return GConfig()
    if isinstance(raw, str):
        raise ConfigError("params.g", f"unknown builtin {raw!r} (only 'sin')")
    data = _strict(GConfig, raw, "params.g")
    if data.get("table") is not None:
        table = _vector("params.g.table", data["table"])
        if not isinstance(table, tuple) or len(table) < 4:
            raise ConfigError("params.g.table", "needs a list of at least 4 values")
        kappa = _num("params.g.kappa", data.get("kappa", 2 * math.pi), positive=True)
        return GConfig(builtin=None, table=table, kappa=kappa)
    if data.get("builtin", "sin") != "sin":
        raise ConfigError("params.g.builtin", f"unknown builtin {data['builtin']!r}")
    return GConfig()


def parse_config(raw: dict, base_dir: str = ".") -> RunConfig:
    raw = _strict(RunConfig, raw, "")
    if "base_dir" in raw:
        raise ConfigError("base_dir", "unknown key")

    m = _strict(ModelConfig, raw.get("model"), "model")
    if m.get("matrix_file") is not None:
        model = ModelConfig(matrix_file=str(m["matrix_file"]))
    else:
        bc = m.get("bc", "neumann")
        if bc not in ("neumann", "periodic"):
            raise ConfigError("model.bc", f"expected neumann or periodic, got {bc!r}")
        model = ModelConfig(_num("model.N", m.get("N", 4), int, positive=True),
                            _num("model.d", m.get("d", 1), int, positive=True),
                            _num("model.h", m.get("h", 1.0), positive=True), bc)

    p = _strict(ParamsConfig, raw.get("params"), "params")
    params = ParamsConfig(
        alpha=_num("params.alpha", p.get("alpha", 1.0), positive=True),
        K=_num("params.K", p.get("K", 1.0), positive=True),
        beta=_num("params.beta", p.get("beta", 0.0)),
        f=_vector("params.f", p.get("f", 0.0)),
        eps=_vector("params.eps", p.get("eps", 0.0), nonneg=True),
        g=_parse_g(p.get("g")),
    )

    n = _strict(NumericsConfig, raw.get("numerics"), "numerics")
    delta = n.get("delta")
    if delta is not None:
        delta = _num("numerics.delta", delta, positive=True)
        if delta > 1:
            raise ConfigError("numerics.delta", f"must lie in (0, 1], got {delta}")
    scheme = n.get("scheme", "expmid")
    if scheme not in ("expmid", "rk4"):
        raise ConfigError("numerics.scheme", f"expected expmid or rk4, got {scheme!r}")
    kind = n.get("kind", "rde")
    if kind not in ("rde", "sde"):
        raise ConfigError("numerics.kind", f"expected rde or sde, got {kind!r}")
    rec = n.get("record_every")
    numerics = NumericsConfig(
        dt=_num("numerics.dt", n.get("dt", 1e-3), positive=True),
        T=_num("numerics.T", n.get("T", 10.0), positive=True),
        n_seeds=_num("numerics.n_seeds", n.get("n_seeds", 8), int, positive=True),
        seed0=_num("numerics.seed0", n.get("seed0", 0), int, nonneg=True),
        n_cloud=_num("numerics.n_cloud", n.get("n_cloud", 256), int, positive=True),
        n_bins=_num("numerics.n_bins", n.get("n_bins", 64), int, positive=True),
        delta=delta, scheme=scheme, kind=kind,
        record_every=None if rec is None else _num("numerics.record_every", rec, int, positive=True),
        workers=_num("numerics.workers", n.get("workers", 1), int, positive=True),
    )

    o = _strict(OutputsConfig, raw.get("outputs"), "outputs")
    formats = o.get("formats", ["csv", "json"])
    if isinstance(formats, str):
        formats = [formats]
    bad = sorted(set(formats) - {"csv", "json"})
    if bad:
        raise ConfigError("outputs.formats", f"unsupported format {bad[0]!r}")
    outputs = OutputsConfig(str(o.get("directory", "out")), tuple(formats))
    return RunConfig(model, params, numerics, outputs, base_dir=base_dir)


def load_config(path) -> RunConfig:
    path = Path(path)
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ConfigError(str(path), f"not valid YAML ({e})") from None
    return parse_config(raw or {}, base_dir=str(path.parent))
