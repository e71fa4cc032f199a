"""Constrained LASSO instances and the INI experiment configuration."""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .algorithms import MODES
from .functions import L1PlusBoxFn, QuadraticBoxFn, ScaledL1Fn, ZeroFn
from .graph import erdos_renyi
from .problem import ProblemInstance

MAPPINGS = ("box-in-f", "box-in-g", "indicator-only")
NORMALIZATIONS = ("m", "sqrt_m")
# smallest acceptable lambda_min / lambda_max of a local Gram matrix
SINGULAR_RTOL = 1e-10


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the line and field."""


@dataclass
class ExperimentConfig:
    # graph
    n: int = 10
    p: float = 0.2
    graph_seed: int = 1
    # problem
    d: int = 3
    samples: int = 30
    gamma: float = 0.1
    lb: float = -0.8
    ub: float = 0.8
    noise_variance: float = 1e-2
    data_seed: int = 2
    normalization: str = "m"
    mapping: str = "box-in-f"
    # algorithm
    mode: str = "async_node"
    step_scale: float = 1.0
    nesterov: bool = False
    # stop rule
    threshold: float = 1e-6
    max_iterations: int = 1_000_000
    # output
    out_dir: str = "out"
    primal_trace: bool = False
    source: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.validate()

    @property
    def effective_mode(self) -> str:
        if self.nesterov:
            if self.mode not in ("sync", "sync_nesterov"):
                raise ConfigError(self._where("nesterov") + "acceleration is only defined for the synchronous mode")
            return "sync_nesterov"
        return self.mode

    def _where(self, name: str) -> str:
        line = self.source.get(name)
        return f"line {line}, field {name!r}: " if line else f"field {name!r}: "

    def validate(self) -> None:
        def check(ok, name, msg):
            if not ok:
                raise ConfigError(self._where(name) + msg)

        check(self.n >= 2, "n", "need at least 2 nodes")
        check(0.0 < self.p <= 1.0, "p", "edge probability must lie in (0, 1]")
        check(self.d >= 1, "d", "dimension must be positive")
        check(self.samples >= self.d, "samples", "need at least d samples per node")
        check(self.gamma >= 0, "gamma", "regularisation weight must be nonnegative")
        check(self.lb < self.ub, "ub", "need lb < ub")
        check(self.noise_variance >= 0, "noise_variance", "must be nonnegative")
        check(self.normalization in NORMALIZATIONS, "normalization",
              f"choose from {', '.join(NORMALIZATIONS)}")
        check(self.mapping in MAPPINGS, "mapping", f"choose from {', '.join(MAPPINGS)}")
        check(self.mode in MODES, "mode", f"choose from {', '.join(MODES)}")
        check(0.0 < self.step_scale <= 1.0, "step_scale", "must lie in (0, 1]")
        check(self.threshold > 0, "threshold", "must be positive")
        check(self.max_iterations >= 1, "max_iterations", "must be positive")
        for name in ("graph_seed", "data_seed"):
            check(getattr(self, name) >= 0, name, "seeds are unsigned")

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


# section -> (ini key, attribute, parser)
_SCHEMA = {
    "graph": [("n", "n", int), ("p", "p", float), ("seed", "graph_seed", int)],
    "problem": [("d", "d", int), ("samples", "samples", int), ("gamma", "gamma", float),
                ("lb", "lb", float), ("ub", "ub", float), ("noise_variance", "noise_variance", float),
                ("data_seed", "data_seed", int), ("normalization", "normalization", str),
                ("mapping", "mapping", str)],
    "algorithm": [("mode", "mode", str), ("step_scale", "step_scale", float), ("nesterov", "nesterov", "bool")],
    "stop": [("threshold", "threshold", float), ("max_iterations", "max_iterations", int)],
    "output": [("dir", "out_dir", str), ("primal_trace", "primal_trace", "bool")],
}

_BOOLS = {"on": True, "off": False, "true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
        elif section and "=" in s and not s.startswith(("#", ";")):
            lines[(section, s.split("=", 1)[0].strip().lower())] = no
    return lines


def parse_config(text: str, origin: str = "<config>") -> ExperimentConfig:
    """Parse the INI experiment description; every key of every section is required."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from exc
    lines = _key_lines(text)
    values, source = {}, {}
    for section, keys in _SCHEMA.items():
        if not cp.has_section(section):
            raise ConfigError(f"{origin}: missing section [{section}]")
        known = {k for k, _, _ in keys}
        for key in cp[section]:
            if key not in known:
                raise ConfigError(f"{origin}: line {lines.get((section, key), '?')}, "
                                  f"unknown field {section}.{key}")
        for key, attr, kind in keys:
            where = f"{origin}: line {lines.get((section, key), '?')}, field {section}.{key}"
            if key not in cp[section]:
                raise ConfigError(f"{origin}: missing field {section}.{key}")
            raw = cp[section][key].strip()
            try:
                if kind == "bool":
                    if raw.lower() not in _BOOLS:
                        raise ValueError(f"expected on/off, got {raw!r}")
                    val = _BOOLS[raw.lower()]
                else:
                    val = kind(raw)
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from exc
            values[attr] = val
            source[attr] = lines.get((section, key))
    try:
        return ExperimentConfig(**values, source=source)
    except ConfigError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), origin=str(path))


def dump_config(cfg: ExperimentConfig) -> str:
    out = []
    for section, keys in _SCHEMA.items():
        out.append(f"[{section}]")
        for key, attr, kind in keys:
            val = getattr(cfg, attr)
            if kind == "bool":
                val = "on" if val else "off"
            elif isinstance(val, float):
                val = repr(val)
            out.append(f"{key} = {val}")
        out.append("")
    return "\n".join(out)


@dataclass
class LassoData:
    problem: ProblemInstance
    x_true: np.ndarray
    resampled: list[int]


def sparse_truth(d: int, seed: int) -> np.ndarray:
    """``ceil(d/2)`` standard-normal nonzeros at random positions, zeros elsewhere."""
    rng = np.random.default_rng([seed, 0xFFFF])
    x = np.zeros(d)
    support = rng.permutation(d)[: math.ceil(d / 2)]
    x[support] = rng.standard_normal(support.size)
    return x


def generate_lasso_data(cfg: ExperimentConfig) -> LassoData:
    """Draw the graph and the local least-squares data of a constrained LASSO.

    Node ``i`` gets ``A_i`` with i.i.d. standard-normal entries and
    ``b_i = A_i x_true + noise``; both are divided by ``m`` (or ``sqrt(m)``).
    A numerically singular ``A_i'A_i`` is redrawn from the next sub-seed and
    the node is listed in ``resampled``.
    """
    graph = erdos_renyi(cfg.n, cfg.p, cfg.graph_seed)
    d, m = cfg.d, cfg.samples
    x_true = sparse_truth(d, cfg.data_seed)
    scale = m if cfg.normalization == "m" else math.sqrt(m)
    lb, ub = np.full(d, cfg.lb), np.full(d, cfg.ub)
    weight = cfg.gamma / cfg.n
    fs, gs, resampled = [], [], []
    for i in range(cfg.n):
        for sub in range(1000):
            rng = np.random.default_rng([cfg.data_seed, i, sub])
            A = rng.standard_normal((m, d))
            b = A @ x_true + math.sqrt(cfg.noise_variance) * rng.standard_normal(m)
            ev = np.linalg.eigvalsh(A.T @ A)
            if ev[0] > SINGULAR_RTOL * ev[-1]:
                break
        else:
            raise ValueError(f"node {i}: could not draw a nonsingular design")
        if sub:
            resampled.append(i)
        A, b = A / scale, b / scale
        if cfg.mapping == "box-in-f":
            fs.append(QuadraticBoxFn(A, b, lb, ub))
            gs.append(ScaledL1Fn(weight, d))
        elif cfg.mapping == "box-in-g":
            fs.append(QuadraticBoxFn(A, b))
            gs.append(L1PlusBoxFn(weight, lb, ub, d))
        else:
            fs.append(QuadraticBoxFn(A, b, lb, ub))
            gs.append(ZeroFn(d))
    return LassoData(ProblemInstance(graph, fs, gs), x_true, resampled)


def generate_lasso(cfg: ExperimentConfig) -> ProblemInstance:
    return generate_lasso_data(cfg).problem


def desk_config(**overrides) -> ExperimentConfig:
    """Desk-scale instance: 10 nodes, 30 samples each, d=3, box +-0.8."""
    return ExperimentConfig(**overrides)


def full_scale_config(**overrides) -> ExperimentConfig:
    """50 nodes with 150 samples each, otherwise as :func:`desk_config`."""
    base = dict(n=50, samples=150)
    base.update(overrides)
    return ExperimentConfig(**base)
