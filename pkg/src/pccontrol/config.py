"""Strict JSON run configurations: parsing, validation, and problem building.

A configuration has sections ``model``, ``grid``, ``problem`` and optional
``solver`` and ``checks``.  Unknown keys are fatal; every error names the
offending key.  Vectors are given literally or sparsely
(``{"coords": [[index, value], ...]}``); subspace generators are either
exponential profiles ``{"rate": r, "vector"|"coords": ..., "support":
[t0, t1]}`` realized by exact interval averages, or literal grid signals
``{"signal": [[...], ...]}``.  ``g_star``/``w_star`` are coefficient lists
against the orthonormalized subspace bases (orthonormalization is
deterministic, so coefficients are reproducible).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import numpy as np

from .core import LinearSystem, TimeGrid
from .errors import ConfigError
from .functionals import APPROX_KINDS, KINDS, ProblemData
from .models import ModelDescriptor, exponential_profile_signal, make_heat1d, make_ode, make_wave1d
from .solvers import SolverOptions
from .subspaces import SignalAmbient, Subspace, VectorAmbient, orthonormalize

__all__ = ["RunConfig", "BuildResult", "parse_config"]

_TOP_KEYS = {"model", "grid", "problem", "solver", "checks"}
_MODEL_KEYS = {
    "ode": {"family", "A", "B", "name"},
    "heat1d": {"family", "n_modes", "omega", "n_quad"},
    "wave1d": {"family", "n_modes", "omega", "n_quad"},
}
_GRID_KEYS = {"T", "n_steps"}
_PROBLEM_KEYS = {"kind", "y0", "y1", "epsilon", "G", "W", "E", "g_star", "w_star"}
_SOLVER_KEYS = {"max_iters", "grad_tol", "divergence_bound"}
_CHECKS_KEYS = {"uc", "observability", "two_time", "tol_uc"}
_ENTRY_KEYS = {"rate", "vector", "coords", "signal", "support"}
_TWO_TIME_KEYS = {"t_tilde"}
_OBS_KIND_NAMES = {"final_state", "initial_state", "general_final", "general_initial"}


def _check_keys(section: dict, allowed: set, required: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"section {where!r} must be a mapping")
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")
    for key in required:
        if key not in section:
            raise ConfigError(f"missing key {key!r} in {where}")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer")
    return value


def _number_list(value, where: str) -> list[float]:
    if not isinstance(value, list):
        raise ConfigError(f"{where} must be a list of numbers")
    return [_number(v, f"{where}[{i}]") for i, v in enumerate(value)]


@dataclass(frozen=True)
class RunConfig:
    """A validated configuration; holds the normalized document verbatim."""

    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        _validate(raw)
        return cls(copy.deepcopy(raw))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def build(self) -> "BuildResult":
        return _build(self.data)


def parse_config(path) -> RunConfig:
    return RunConfig.from_file(path)


@dataclass
class BuildResult:
    system: LinearSystem
    descriptor: ModelDescriptor | None
    grid: TimeGrid
    problem: ProblemData
    solver: SolverOptions
    checks: dict


def _validate(raw: dict):
    _check_keys(raw, _TOP_KEYS, {"model", "grid", "problem"}, "config")
    model = raw["model"]
    if not isinstance(model, dict) or "family" not in model:
        raise ConfigError("model section must declare a 'family'")
    family = model["family"]
    if family not in _MODEL_KEYS:
        raise ConfigError(f"unknown model family {family!r}")
    _check_keys(
        model,
        _MODEL_KEYS[family],
        {"family", "A", "B"} if family == "ode" else {"family", "n_modes"},
        "model",
    )
    _check_keys(raw["grid"], _GRID_KEYS, _GRID_KEYS, "grid")
    problem = raw["problem"]
    _check_keys(problem, _PROBLEM_KEYS, {"kind", "y0"}, "problem")
    kind = problem.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"problem.kind must be one of {KINDS}, got {kind!r}")
    if kind == "null" and "y1" in problem:
        raise ConfigError("problem.y1 is not allowed for kind 'null'")
    if kind != "null" and "y1" not in problem:
        raise ConfigError(f"problem.y1 is required for kind {kind!r}")
    if kind in APPROX_KINDS and "epsilon" not in problem:
        raise ConfigError(f"problem.epsilon is required for kind {kind!r}")
    if kind not in APPROX_KINDS and "epsilon" in problem:
        raise ConfigError(f"problem.epsilon is not allowed for kind {kind!r}")
    if kind not in APPROX_KINDS and "E" in problem:
        raise ConfigError(f"problem.E is not allowed for kind {kind!r}")
    for name in ("G", "W"):
        entries = problem.get(name, [])
        if not isinstance(entries, list):
            raise ConfigError(f"problem.{name} must be a list of generator entries")
        for i, entry in enumerate(entries):
            _validate_entry(entry, f"problem.{name}[{i}]")
    if "solver" in raw:
        _check_keys(raw["solver"], _SOLVER_KEYS, set(), "solver")
    if "checks" in raw:
        checks = raw["checks"]
        _check_keys(checks, _CHECKS_KEYS, set(), "checks")
        if "observability" in checks:
            kinds = checks["observability"]
            if not isinstance(kinds, list):
                raise ConfigError("checks.observability must be a list of kinds")
            for k in kinds:
                if k not in _OBS_KIND_NAMES:
                    raise ConfigError(f"unknown observability kind {k!r}")
        if "two_time" in checks:
            _check_keys(checks["two_time"], _TWO_TIME_KEYS, _TWO_TIME_KEYS, "checks.two_time")


def _validate_entry(entry, where: str):
    if not isinstance(entry, dict):
        raise ConfigError(f"{where} must be a mapping")
    _check_keys(entry, _ENTRY_KEYS, set(), where)
    has_rate = "rate" in entry
    has_signal = "signal" in entry
    if has_rate == has_signal:
        raise ConfigError(f"{where} must give either 'rate' (with a vector) or 'signal'")
    if has_rate and ("vector" in entry) == ("coords" in entry):
        raise ConfigError(f"{where} needs exactly one of 'vector' or 'coords'")
    if has_signal and ("vector" in entry or "coords" in entry):
        raise ConfigError(f"{where} mixes 'signal' with vector data")


def _vector(value, dim: int, where: str) -> np.ndarray:
    if isinstance(value, list):
        values = _number_list(value, where)
        if len(values) != dim:
            raise ConfigError(f"{where} must have {dim} entries, got {len(values)}")
        return np.array(values)
    if isinstance(value, dict):
        _check_keys(value, {"coords"}, {"coords"}, where)
        out = np.zeros(dim)
        pairs = value["coords"]
        if not isinstance(pairs, list):
            raise ConfigError(f"{where}.coords must be a list of [index, value] pairs")
        for i, pair in enumerate(pairs):
            if not (isinstance(pair, list) and len(pair) == 2):
                raise ConfigError(f"{where}.coords[{i}] must be an [index, value] pair")
            idx = _integer(pair[0], f"{where}.coords[{i}][0]")
            if not (0 <= idx < dim):
                raise ConfigError(f"{where}.coords[{i}] index {idx} out of range 0..{dim - 1}")
            out[idx] = _number(pair[1], f"{where}.coords[{i}][1]")
        return out
    raise ConfigError(f"{where} must be a list or a coords mapping")


def _entry_signal(entry: dict, dim: int, grid: TimeGrid, where: str) -> np.ndarray:
    support = None
    if "support" in entry:
        window = _number_list(entry["support"], f"{where}.support")
        if len(window) != 2 or not window[0] < window[1]:
            raise ConfigError(f"{where}.support must be [t0, t1] with t0 < t1")
        support = (window[0], window[1])
    if "signal" in entry:
        sig = entry["signal"]
        if not isinstance(sig, list) or len(sig) != grid.n_steps:
            raise ConfigError(f"{where}.signal must have {grid.n_steps} rows")
        arr = np.array([_vector(row, dim, f"{where}.signal[{k}]") for k, row in enumerate(sig)])
        if support is not None:
            arr = arr * _support_mask(grid, support)[:, None]
        return arr
    rate = _number(entry["rate"], f"{where}.rate")
    if "vector" in entry:
        vec = _vector(entry["vector"], dim, f"{where}.vector")
    else:
        vec = _vector({"coords": entry["coords"]}, dim, where)
    return exponential_profile_signal(grid, rate, vec, support)


def _support_mask(grid: TimeGrid, support) -> np.ndarray:
    t0, t1 = support
    dt = grid.dt
    t_left = np.arange(grid.n_steps) * dt
    tol = 1e-9 * max(1.0, grid.horizon)
    return ((t_left >= t0 - tol) & (t_left + dt <= t1 + tol)).astype(float)


def _build_model(model: dict) -> tuple[LinearSystem, ModelDescriptor | None]:
    family = model["family"]
    if family == "ode":
        A = model["A"]
        B = model["B"]
        return make_ode(A, B, name=model.get("name", "ode")), None
    n_modes = _integer(model["n_modes"], "model.n_modes")
    omega = tuple(_number_list(model.get("omega", [0.3, 0.7]), "model.omega"))
    if len(omega) != 2:
        raise ConfigError("model.omega must be [a, b]")
    kwargs = {"omega": omega}
    if "n_quad" in model:
        kwargs["n_quad"] = _integer(model["n_quad"], "model.n_quad")
    maker = make_heat1d if family == "heat1d" else make_wave1d
    return maker(n_modes, **kwargs)


def _build(data: dict) -> BuildResult:
    system, descriptor = _build_model(data["model"])
    grid_sec = data["grid"]
    grid = TimeGrid(
        horizon=_number(grid_sec["T"], "grid.T"),
        n_steps=_integer(grid_sec["n_steps"], "grid.n_steps"),
    )
    prob = data["problem"]
    kind = prob["kind"]
    n, m = system.n, system.m
    y0 = _vector(prob["y0"], n, "problem.y0")
    y1 = _vector(prob["y1"], n, "problem.y1") if "y1" in prob else None
    G = _build_subspace(prob.get("G", []), m, grid, "problem.G")
    W = _build_subspace(prob.get("W", []), n, grid, "problem.W")
    E = None
    if kind in APPROX_KINDS:
        vectors = prob.get("E", [])
        if not isinstance(vectors, list):
            raise ConfigError("problem.E must be a list of state vectors")
        E = orthonormalize(
            [_vector(v, n, f"problem.E[{i}]") for i, v in enumerate(vectors)], VectorAmbient(n)
        )
    g_star = _star(prob.get("g_star"), G, "problem.g_star")
    w_star = _star(prob.get("w_star"), W, "problem.w_star")
    epsilon = _number(prob["epsilon"], "problem.epsilon") if "epsilon" in prob else None
    problem = ProblemData(
        kind=kind,
        system=system,
        grid=grid,
        y0=y0,
        y1=y1,
        epsilon=epsilon,
        G=G,
        W=W,
        E=E,
        g_star=g_star,
        w_star=w_star,
    )
    solver_sec = data.get("solver", {})
    solver_kwargs = {}
    if "max_iters" in solver_sec:
        solver_kwargs["max_iters"] = _integer(solver_sec["max_iters"], "solver.max_iters")
    if "grad_tol" in solver_sec:
        solver_kwargs["grad_tol"] = _number(solver_sec["grad_tol"], "solver.grad_tol")
    if "divergence_bound" in solver_sec:
        solver_kwargs["divergence_bound"] = _number(
            solver_sec["divergence_bound"], "solver.divergence_bound"
        )
    solver = SolverOptions(**solver_kwargs)
    checks_sec = data.get("checks", {})
    checks = {
        "uc": bool(checks_sec.get("uc", False)),
        "observability": list(checks_sec.get("observability", [])),
        "two_time": None,
        "tol_uc": _number(checks_sec["tol_uc"], "checks.tol_uc")
        if "tol_uc" in checks_sec
        else 1e-8,
    }
    if "two_time" in checks_sec:
        checks["two_time"] = _number(checks_sec["two_time"]["t_tilde"], "checks.two_time.t_tilde")
    return BuildResult(system, descriptor, grid, problem, solver, checks)


def _build_subspace(entries: list, dim: int, grid: TimeGrid, where: str) -> Subspace:
    signals = [
        _entry_signal(entry, dim, grid, f"{where}[{i}]") for i, entry in enumerate(entries)
    ]
    return orthonormalize(signals, SignalAmbient(dim, grid))


def _star(coeffs, space: Subspace, where: str):
    if coeffs is None:
        return None
    values = _number_list(coeffs, where)
    if len(values) != space.dim:
        raise ConfigError(
            f"{where} must have one coefficient per basis element ({space.dim}), got {len(values)}"
        )
    return space.lift(np.array(values))
