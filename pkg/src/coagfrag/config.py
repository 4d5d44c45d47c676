"""JSON run configuration.

Top-level keys::

    kernels  {"coag": {"name": ..., params...}, "frag": {"name": ..., params...}}
    suite    {"s": 1.5, "delta": 0.1, "C0": 4.0}
    domain   {"L", "cells", "particles", "N_phys", "init": {"kind": ..., params...}}
    grid     {"m_min", "ratio", "K", "init": {"kind": ..., params...}}
    time     {"dt", "T", "cadence"}
    audit    {"radii", "samples", "gamma", ...}
    seed, workers

Errors name the offending field by its dotted path.
"""
from __future__ import annotations

import inspect
import json
from pathlib import Path

from .audit import AuditConfig
from .dsmc import SAMPLERS, DsmcConfig
from .homogeneous import HomogeneousConfig, MassGrid, exponential, monodisperse
from .kernels import COAG_BUILTINS, FRAG_BUILTINS, KernelSuite

_MISSING = object()
TOP_LEVEL = {"kernels", "suite", "domain", "grid", "time", "audit", "seed", "workers", "name", "description"}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _sub(d: dict, path: str, key: str) -> dict:
    v = d.get(key, {})
    full = f"{path}.{key}" if path else key
    if not isinstance(v, dict):
        raise ConfigError(full, f"expected an object, got {type(v).__name__}")
    return v


def _num(d: dict, path: str, key: str, default=_MISSING, *, positive=False, integer=False, allow_none=False):
    full = f"{path}.{key}" if path else key
    if key not in d:
        if default is _MISSING:
            raise ConfigError(full, "required field is missing")
        return default
    v = d[key]
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(full, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(full, f"expected an integer, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(full, f"must be positive, got {v!r}")
    return int(v) if integer else float(v)


def _num_list(d: dict, path: str, key: str, default):
    full = f"{path}.{key}"
    v = d.get(key, default)
    if not isinstance(v, (list, tuple)) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(full, f"expected a list of numbers, got {v!r}")
    return tuple(float(x) for x in v)


def load(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"malformed JSON in {path}: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("", "top level must be an object")
    unknown = sorted(set(cfg) - TOP_LEVEL)
    if unknown:
        raise ConfigError(unknown[0], f"unknown top-level key; expected one of {sorted(TOP_LEVEL)}")
    return cfg


def _factory_call(catalog: dict, spec: dict, path: str, extra: dict):
    if "name" not in spec:
        raise ConfigError(f"{path}.name", "required field is missing")
    name = spec["name"]
    if name not in catalog:
        raise ConfigError(f"{path}.name", f"unknown kernel {name!r}; known: {sorted(catalog)}")
    factory = catalog[name]
    accepted = inspect.signature(factory).parameters
    params = {}
    for k, v in spec.items():
        if k == "name":
            continue
        if k not in accepted:
            raise ConfigError(f"{path}.{k}", f"kernel {name!r} takes no parameter {k!r}; accepted: {sorted(accepted)}")
        if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
            raise ConfigError(f"{path}.{k}", f"expected a number, got {v!r}")
        params[k] = v
    for k, v in extra.items():
        if k in accepted and k not in params:
            params[k] = v
    try:
        return factory(**params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from exc


def suite_from(cfg: dict) -> KernelSuite:
    kernels = _sub(cfg, "", "kernels")
    sp = _sub(cfg, "", "suite")
    extra = {}
    if "C0" in sp:
        extra["C0"] = _num(sp, "suite", "C0", allow_none=True)
    A = _factory_call(COAG_BUILTINS, _sub(kernels, "kernels", "coag") or {"name": "zero"}, "kernels.coag", {})
    B = _factory_call(FRAG_BUILTINS, _sub(kernels, "kernels", "frag") or {"name": "zero"}, "kernels.frag", extra)
    s = _num(sp, "suite", "s", 1.5)
    delta = _num(sp, "suite", "delta", 0.1)
    try:
        return KernelSuite(A, B, s, delta)
    except ValueError as exc:
        raise ConfigError("suite", str(exc)) from exc


def _time(cfg: dict):
    t = _sub(cfg, "", "time")
    dt = _num(t, "time", "dt", positive=True)
    T = _num(t, "time", "T", positive=True)
    cadence = _num(t, "time", "cadence", T, positive=True)
    return dt, T, cadence


def homogeneous_from(cfg: dict):
    """``(HomogeneousConfig, initial SectionalState)``."""
    suite = suite_from(cfg)
    for path, kern in (("kernels.coag", suite.A), ("kernels.frag", suite.B)):
        if kern.mass_fn is None and not kern.is_zero:
            raise ConfigError(f"{path}.name", f"kernel {kern.name!r} has no mass-only form for the sectional solver")
    g = _sub(cfg, "", "grid")
    ratio = _num(g, "grid", "ratio", 2 ** 0.125)
    if not ratio > 1:
        raise ConfigError("grid.ratio", f"must exceed 1, got {ratio}")
    K = _num(g, "grid", "K", 128, integer=True, positive=True)
    center = _num(g, "grid", "center", 1.0, positive=True)
    below = _num(g, "grid", "below", 8, integer=True)
    if "m_min" in g:
        grid = MassGrid.geometric(_num(g, "grid", "m_min", positive=True), ratio, K)
    else:
        grid = MassGrid.around(center, ratio, K, below)
    init = _sub(g, "grid", "init") or {"kind": "monodisperse"}
    kind = init.get("kind", "monodisperse")
    if kind == "monodisperse":
        state = monodisperse(grid, _num(init, "grid.init", "mass", 1.0, positive=True), _num(init, "grid.init", "N0", 1.0, positive=True))
    elif kind == "exponential":
        state = exponential(grid, _num(init, "grid.init", "N0", 1.0, positive=True), _num(init, "grid.init", "mean", 1.0, positive=True))
    else:
        raise ConfigError("grid.init.kind", f"unknown initial condition {kind!r}; known: ['exponential', 'monodisperse']")
    dt, T, cadence = _time(cfg)
    return HomogeneousConfig(suite, grid, T, dt, cadence), state


def dsmc_from(cfg: dict, seed: int | None = None, workers: int | None = None) -> DsmcConfig:
    suite = suite_from(cfg)
    d = _sub(cfg, "", "domain")
    init = dict(_sub(d, "domain", "init") or {"kind": "monodisperse"})
    kind = init.get("kind", "monodisperse")
    if kind not in SAMPLERS:
        raise ConfigError("domain.init.kind", f"unknown sampler {kind!r}; known: {sorted(SAMPLERS)}")
    accepted = set(inspect.signature(SAMPLERS[kind]).parameters) - {"rng", "n", "L"}
    for k, v in init.items():
        if k == "kind":
            continue
        if k not in accepted:
            raise ConfigError(f"domain.init.{k}", f"sampler {kind!r} takes no parameter {k!r}; accepted: {sorted(accepted)}")
    init["kind"] = kind
    dt, T, cadence = _time(cfg)
    seed = int(cfg.get("seed", 0)) if seed is None else int(seed)
    workers = int(cfg.get("workers", 1)) if workers is None else int(workers)
    try:
        return DsmcConfig(
            suite,
            _num(d, "domain", "particles", integer=True, positive=True),
            dt,
            T,
            seed=seed,
            L=_num(d, "domain", "L", 1.0, positive=True),
            cells=_num(d, "domain", "cells", 1, integer=True, positive=True),
            N_phys=_num(d, "domain", "N_phys", 1.0, positive=True),
            init=init,
            cadence=cadence,
            workers=workers,
            min_fraction=_num(d, "domain", "min_fraction", 0.5, positive=True),
            rate_limit=_num(d, "domain", "rate_limit", 0.1, positive=True),
        )
    except ValueError as exc:
        raise ConfigError("domain", str(exc)) from exc


def audit_from(cfg: dict) -> AuditConfig:
    a = _sub(cfg, "", "audit")
    base = AuditConfig()
    probes = a.get("galkin_probes", [])
    if not isinstance(probes, list) or any(not (isinstance(p, list) and len(p) == 2) for p in probes):
        raise ConfigError("audit.galkin_probes", "expected a list of [y, y_star] pairs")
    states = a.get("comparison_states", [list(s) for s in base.comparison_states])
    if not isinstance(states, list) or any(not (isinstance(s, list) and len(s) == 5) for s in states):
        raise ConfigError("audit.comparison_states", "expected a list of 5-vectors [m, px, py, pz, e]")
    radii = _num_list(a, "audit", "radii", base.radii)
    if any(b <= a_ for a_, b in zip(radii[:-1], radii[1:])):
        raise ConfigError("audit.radii", "radii must be strictly increasing")
    return AuditConfig(
        R=_num(a, "audit", "R", base.R, positive=True),
        growth_R=_num(a, "audit", "growth_R", base.growth_R, positive=True),
        radii=radii,
        samples=_num(a, "audit", "samples", base.samples, integer=True, positive=True),
        quad_samples=_num(a, "audit", "quad_samples", base.quad_samples, integer=True, positive=True),
        gamma=_num(a, "audit", "gamma", base.gamma, positive=True),
        weight_radii=_num_list(a, "audit", "weight_radii", base.weight_radii),
        weight_samples=_num(a, "audit", "weight_samples", base.weight_samples, integer=True, positive=True),
        comparison_states=tuple(tuple(float(x) for x in s) for s in states),
        galkin_probes=tuple((tuple(p[0]), tuple(p[1])) for p in probes),
    )


__all__ = ["ConfigError", "audit_from", "dsmc_from", "homogeneous_from", "load", "suite_from"]
