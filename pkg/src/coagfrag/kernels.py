"""Coagulation and fragmentation kernels.

Kernels are evaluator callbacks together with explicit local bounds.  A
coagulation kernel ``A(y, y*)`` carries ``local_sup(R)``, an upper bound of
``A`` over ``Y_R x Y_R``; a fragmentation kernel ``B(y', y)`` carries
``local_sup_B(y')``, a bound of ``B(y', .)`` over the admissible daughters of
``y'``.  Bounds cannot be recovered from a black box, and both the audit and
the particle simulator's majorants rely on them.

Fragmentation evaluators are only meaningful on admissible pairs
``y < y'``; callers apply the indicator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import betainc

from .state_space import ParticleState, States, as_states, split_arrays
from .stochastics import McEstimate, StreamKey, mc_B1

# volume of {y : y < y'} is this constant times (m' e')^(5/2)
ADMISSIBLE_VOLUME_CONST = math.pi**2 / (20.0 * math.sqrt(2.0))


def admissible_volume(m_prime, e_prime):
    """Exact volume of the admissible daughter set of ``(m', p', e')``.

    Independent of ``p'``: shifting momenta by ``(m/m') p'`` leaves the set
    invariant up to translation.
    """
    return ADMISSIBLE_VOLUME_CONST * (np.asarray(m_prime) * np.asarray(e_prime)) ** 2.5


def _K(s: States):
    return s.e + np.einsum("...i,...i->...", s.p, s.p) / (2.0 * s.m)


def truncation_support(y_prime: States, y: States, C0: float) -> np.ndarray:
    """Indicator of ``m' <= C0 m`` and ``e'+|p'|^2/2m' <= C0 (e+|p|^2/2m)``."""
    return (y_prime.m <= C0 * y.m) & (_K(y_prime) <= C0 * _K(y))


@dataclass(frozen=True, eq=False)
class CoagKernel:
    name: str
    fn: Callable[[States, States], np.ndarray]
    local_sup: Callable[[float], float]
    mass_fn: Callable | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, y, y_star) -> np.ndarray:
        return np.asarray(self.fn(as_states(y), as_states(y_star)), dtype=float)

    @property
    def is_zero(self) -> bool:
        return self.name == "zero" or (self.name == "constant" and self.params.get("a0", 1.0) == 0.0)


@dataclass(frozen=True, eq=False)
class FragKernel:
    name: str
    fn: Callable[[States, States], np.ndarray]
    local_sup_B: Callable[[States], np.ndarray]
    C0: float | None = None
    B1_closed: Callable[[States], np.ndarray] | None = None
    mass_fn: Callable | None = None
    mass_B1: Callable | None = None
    mass_breakpoints: tuple = ()
    mass_only: bool = False
    isotropic: bool = True
    params: dict = field(default_factory=dict)

    def __call__(self, y_prime, y) -> np.ndarray:
        return np.asarray(self.fn(as_states(y_prime), as_states(y)), dtype=float)

    @property
    def is_zero(self) -> bool:
        return self.name == "zero" or self.params.get("b0", 1.0) == 0.0


@dataclass(frozen=True)
class KernelSuite:
    A: CoagKernel
    B: FragKernel
    s: float = 1.5
    delta: float = 0.1

    def __post_init__(self):
        if not self.s > 1.0:
            raise ValueError(f"comparison exponent s must exceed 1, got {self.s}")
        if not 0.0 < self.delta < 1.0 / (6.0 * self.s - 5.0):
            raise ValueError(
                f"delta must lie in (0, 1/(6s-5)) = (0, {1.0 / (6.0 * self.s - 5.0):.6g}), got {self.delta}"
            )


# --- coagulation builtins ---------------------------------------------------


def constant_coag(a0: float = 1.0) -> CoagKernel:
    a0 = float(a0)
    return CoagKernel(
        "constant",
        lambda y, ys: np.full(np.broadcast(y.m, ys.m).shape, a0),
        lambda R: a0,
        mass_fn=lambda m, ms: np.full(np.broadcast(m, ms).shape, a0),
        params={"a0": a0},
    )


def zero_coag() -> CoagKernel:
    k = constant_coag(0.0)
    return CoagKernel("zero", k.fn, k.local_sup, k.mass_fn, {"a0": 0.0})


def additive_power_coag(alpha: float = 0.5) -> CoagKernel:
    """``m^alpha + m*^alpha`` with ``0 < alpha < 1``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"additive-power kernel needs 0 < alpha < 1, got {alpha}")

    def mass_fn(m, ms):
        return np.asarray(m, dtype=float) ** alpha + np.asarray(ms, dtype=float) ** alpha

    return CoagKernel(
        "additive_power",
        lambda y, ys: mass_fn(y.m, ys.m),
        lambda R: 2.0 * R**alpha,
        mass_fn=mass_fn,
        params={"alpha": alpha},
    )


def smoluchowski_coag() -> CoagKernel:
    """Brownian kernel ``(m^(1/3) + m*^(1/3)) (m^(-1/3) + m*^(-1/3))``; unbounded near 0."""

    def mass_fn(m, ms):
        a = np.cbrt(np.asarray(m, dtype=float))
        b = np.cbrt(np.asarray(ms, dtype=float))
        return (a + b) * (1.0 / a + 1.0 / b)

    return CoagKernel("smoluchowski", lambda y, ys: mass_fn(y.m, ys.m), lambda R: math.inf, mass_fn=mass_fn)


def droplet_coag(alpha: float = 0.25) -> CoagKernel:
    """``(m^a + m*^a)^2 |p/m - p*/m*|``; velocity-dependent and unbounded on ``Y_R``."""

    def fn(y, ys):
        dv = y.p / y.m[..., None] - ys.p / ys.m[..., None]
        return (y.m**alpha + ys.m**alpha) ** 2 * np.linalg.norm(dv, axis=-1)

    return CoagKernel("droplet", fn, lambda R: math.inf, params={"alpha": alpha})


def stellar_coag(alpha: float = 0.5, gamma: float = -1.0) -> CoagKernel:
    """``((m+m*)/(m m*))^a |p/m - p*/m*|^g`` with ``-3 < g <= 0``."""

    def fn(y, ys):
        dv = np.linalg.norm(y.p / y.m[..., None] - ys.p / ys.m[..., None], axis=-1)
        with np.errstate(divide="ignore"):
            return ((y.m + ys.m) / (y.m * ys.m)) ** alpha * dv**gamma

    return CoagKernel("stellar", fn, lambda R: math.inf, params={"alpha": alpha, "gamma": gamma})


# --- fragmentation builtins -------------------------------------------------


def zero_frag() -> FragKernel:
    def fn(yp, y):
        return np.zeros(np.broadcast(yp.m, y.m).shape)

    return FragKernel(
        "zero",
        fn,
        lambda yp: np.zeros(np.shape(yp.m)),
        C0=None,
        B1_closed=lambda yp: np.zeros(np.shape(yp.m)),
        mass_fn=lambda mp, m: np.zeros(np.broadcast(mp, m).shape),
        mass_B1=lambda mp: np.zeros(np.shape(mp)),
        params={"b0": 0.0},
    )


def constant_truncated_frag(b0: float = 1.0, C0: float | None = 4.0) -> FragKernel:
    """``b0`` on admissible pairs where both daughters satisfy the truncation.

    Requiring the constraint of both ``y`` and ``y' - y`` makes the kernel
    symmetric under daughter exchange; the support is then nonempty only for
    ``C0 > 2``.  ``C0=None`` disables truncation and gives the closed-form
    ``B_1 = b0 * pi^2 (m'e')^(5/2) / (20 sqrt 2)``.
    """
    b0 = float(b0)
    if not b0 >= 0.0:
        raise ValueError(f"b0 must be nonnegative, got {b0}")
    if C0 is not None and not C0 > 1.0:
        raise ValueError(f"truncation constant must exceed 1, got {C0}")

    if C0 is None:

        def fn(yp, y):
            return np.full(np.broadcast(yp.m, y.m).shape, b0)

        closed = lambda yp: b0 * admissible_volume(yp.m, yp.e)
    else:

        def fn(yp, y):
            ys = split_arrays(yp, y, check=False)
            return b0 * (truncation_support(yp, y, C0) & truncation_support(yp, ys, C0))

        closed = None

    return FragKernel(
        "constant_truncated",
        fn,
        lambda yp: np.full(np.shape(yp.m), b0),
        C0=C0,
        B1_closed=closed,
        params={"b0": b0, "C0": C0},
    )


def mass_binary_frag(b0: float = 1.0, C0: float = 2.0) -> FragKernel:
    """Mass-only ``B(m', m) = b0 1{m' <= C0 m}``; ``B_1(m') = b0 m' (1 - 1/C0)``.

    Not symmetric under ``m <-> m' - m``; the sectional solver symmetrizes
    the daughter distribution, which keeps ``B_1`` and mass conservation.
    """
    b0 = float(b0)
    C0 = float(C0)
    if not b0 >= 0.0:
        raise ValueError(f"b0 must be nonnegative, got {b0}")
    if not C0 > 1.0:
        raise ValueError(f"truncation constant must exceed 1, got {C0}")

    def mass_fn(mp, m):
        return b0 * (np.asarray(mp) <= C0 * np.asarray(m))

    def fn(yp, y):
        return mass_fn(yp.m, y.m).astype(float)

    def closed(yp):
        return b0 * admissible_volume(yp.m, yp.e) * (1.0 - betainc(2.5, 2.5, 1.0 / C0))

    return FragKernel(
        "mass_binary",
        fn,
        lambda yp: np.full(np.shape(yp.m), b0),
        C0=C0,
        B1_closed=closed,
        mass_fn=mass_fn,
        mass_B1=lambda mp: b0 * np.asarray(mp, dtype=float) * (1.0 - 1.0 / C0),
        mass_breakpoints=(1.0 / C0,),
        mass_only=True,
        params={"b0": b0, "C0": C0},
    )


COAG_BUILTINS = {
    "constant": constant_coag,
    "zero": zero_coag,
    "additive_power": additive_power_coag,
    "smoluchowski": smoluchowski_coag,
    "droplet": droplet_coag,
    "stellar": stellar_coag,
}

FRAG_BUILTINS = {
    "zero": zero_frag,
    "constant_truncated": constant_truncated_frag,
    "mass_binary": mass_binary_frag,
}


def builtin_kernels() -> dict[str, dict[str, Callable]]:
    """Catalog of kernel factories, ``{"coag": {...}, "frag": {...}}``."""
    return {"coag": dict(COAG_BUILTINS), "frag": dict(FRAG_BUILTINS)}


def make_coag(name: str, **params) -> CoagKernel:
    try:
        factory = COAG_BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown coagulation kernel {name!r}; known: {sorted(COAG_BUILTINS)}") from None
    return factory(**params)


def make_frag(name: str, **params) -> FragKernel:
    try:
        factory = FRAG_BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown fragmentation kernel {name!r}; known: {sorted(FRAG_BUILTINS)}") from None
    return factory(**params)


# --- derived quantities -----------------------------------------------------


def B1(B: FragKernel, y_prime, budget: int = 100_000, key: StreamKey | None = None, workers: int = 1) -> McEstimate:
    """Total fragmentation frequency ``B_1(y') = int B(y', y) 1{y < y'} dy``.

    Uses the kernel's closed form when it has one, otherwise Monte Carlo over
    the admissible envelope with a standard error.
    """
    if budget < 1:
        raise ValueError("B1 quadrature budget must be at least one sample")
    yp = as_states(y_prime)
    if B.B1_closed is not None:
        return McEstimate(float(np.asarray(B.B1_closed(yp)).reshape(-1)[0]), 0.0, budget, exact=True)
    key = key if key is not None else StreamKey(0, "B1")
    return mc_B1(B, yp, budget, key, workers=workers)


def B1_mass(B: FragKernel, m_prime) -> np.ndarray:
    """Mass-only ``B_1(m') = int_0^m' B(m', m) dm``."""
    if B.mass_B1 is None:
        raise ValueError(f"kernel {B.name!r} has no mass-only form")
    return np.asarray(B.mass_B1(m_prime), dtype=float)


@dataclass(frozen=True)
class GronwallConstant:
    value: float
    method: str
    R: float
    resolution: int
    samples: int = 0
    sampled_max: float = math.nan
    envelope_bound: float = math.nan

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def gronwall_constant(
    B: FragKernel,
    budget: int = 20_000,
    key: StreamKey | None = None,
    R: float | None = None,
    resolution: int = 5,
) -> GronwallConstant:
    """Upper estimate of ``sup B_1`` over ``Y_R`` (default ``R = 2 C0``).

    Closed forms are maximized on a grid that includes the closure of the
    box.  Otherwise each grid node gets a Monte-Carlo estimate and the
    result is ``max(estimate + 3 se)``; if any node is too noisy the bound
    ``local_sup_B * admissible volume`` at the box corner is returned.
    """
    if R is None:
        if B.C0 is None:
            if B.is_zero:
                return GronwallConstant(0.0, "zero", math.nan, 0)
            raise ValueError("untruncated kernel: pass the radius R of the region to maximize over")
        R = 2.0 * B.C0
    if B.is_zero:
        return GronwallConstant(0.0, "zero", R, 0)
    if B.mass_only:
        grid = np.linspace(0.0, R, 64 * resolution + 1)[1:]
        return GronwallConstant(float(np.max(B1_mass(B, grid))), "closed-form-mass", R, grid.size)

    ms = np.linspace(R / resolution, R, resolution)
    es = np.linspace(R / resolution, R, resolution)
    ps = np.linspace(0.0, R, resolution)
    M, P, E = np.meshgrid(ms, ps, es, indexing="ij")
    nodes = States(M.ravel(), np.stack([P.ravel(), np.zeros(P.size), np.zeros(P.size)], axis=1), E.ravel())
    envelope = float(np.max(np.asarray(B.local_sup_B(nodes)) * admissible_volume(nodes.m, nodes.e)))
    if B.B1_closed is not None:
        vals = np.asarray(B.B1_closed(nodes), dtype=float)
        return GronwallConstant(float(vals.max()), "closed-form", R, resolution, envelope_bound=envelope)

    key = key if key is not None else StreamKey(0, "gronwall")
    upper = 0.0
    noisy = False
    for i in range(len(nodes)):
        est = mc_B1(B, nodes.take([i]), budget, key.lane(cell=i))
        bound = est.value + 3.0 * est.std_error
        if bound > upper:
            upper = bound
            noisy = est.std_error > 0.1 * est.value
    if noisy:
        return GronwallConstant(envelope, "envelope", R, resolution, budget, upper, envelope)
    return GronwallConstant(min(upper, envelope), "sampled", R, resolution, budget, upper, envelope)


class B1Cache:
    """Tabulated ``B_1`` on a ``(log m', w, log e')`` grid with trilinear interpolation.

    ``w = K_kin / (K_kin + e')`` is the kinetic share of the parent energy,
    so the momentum axis is bounded.  Interpolation is done on ``log B_1``
    (power laws in ``m'`` and ``e'`` are then reproduced exactly) and
    extrapolates linearly outside the table; extrapolated lookups are
    counted.  Assumes the kernel is isotropic in momentum.
    """

    def __init__(
        self,
        B: FragKernel,
        m_range: tuple[float, float],
        e_range: tuple[float, float],
        n: int = 6,
        budget: int = 20_000,
        key: StreamKey | None = None,
    ):
        if not B.isotropic:
            raise ValueError("B1Cache assumes a momentum-isotropic kernel")
        key = key if key is not None else StreamKey(0, "B1cache")
        self.log_m = np.linspace(np.log(m_range[0]), np.log(m_range[1]), n)
        self.log_e = np.linspace(np.log(e_range[0]), np.log(e_range[1]), n)
        # kinetic shares crowd towards 1 for fast daughters
        self.w = np.concatenate([np.linspace(0.0, 0.9, n), [0.97, 0.99, 0.997, 0.999]])
        nw = self.w.size
        table = np.empty((n, nw, n))
        rel = np.zeros((n, nw, n))
        for i, lm in enumerate(self.log_m):
            for j, w in enumerate(self.w):
                for k, le in enumerate(self.log_e):
                    m, e = math.exp(lm), math.exp(le)
                    kin = e * w / (1.0 - w)
                    p = math.sqrt(2.0 * m * kin)
                    y = States(np.array([m]), np.array([[p, 0.0, 0.0]]), np.array([e]))
                    est = mc_B1(B, y, budget, key.lane(cell=(i * nw + j) * n + k))
                    table[i, j, k] = est.value
                    rel[i, j, k] = est.std_error / est.value if est.value > 0 else 0.0
        self.samples_per_node = budget
        self.max_rel_error = float(rel.max())
        self.log_space = bool(np.all(table > 0))
        data = np.log(table) if self.log_space else table
        self._interp = RegularGridInterpolator(
            (self.log_m, self.w, self.log_e), data, method="linear", bounds_error=False, fill_value=None
        )
        self.extrapolated = 0

    def __call__(self, y_prime: States) -> np.ndarray:
        y = as_states(y_prime)
        m = np.asarray(y.m, dtype=float)
        e = np.asarray(y.e, dtype=float)
        kin = np.einsum("...i,...i->...", y.p, y.p) / (2.0 * m)
        pts = np.stack([np.log(m), kin / (kin + e), np.log(e)], axis=-1)
        outside = (
            (pts[..., 0] < self.log_m[0])
            | (pts[..., 0] > self.log_m[-1])
            | (pts[..., 1] > self.w[-1])
            | (pts[..., 2] < self.log_e[0])
            | (pts[..., 2] > self.log_e[-1])
        )
        self.extrapolated += int(np.count_nonzero(outside))
        vals = self._interp(pts)
        return np.exp(vals) if self.log_space else np.maximum(vals, 0.0)

    def report(self) -> dict:
        return {
            "nodes": int(self.log_m.size * self.w.size * self.log_e.size),
            "samples_per_node": self.samples_per_node,
            "max_rel_error": self.max_rel_error,
            "extrapolated_lookups": self.extrapolated,
        }


def particle_B1(B: FragKernel, y_prime: States, cache: B1Cache | None = None) -> np.ndarray:
    """``B_1`` for a batch of parents: closed form if available, else the cache."""
    if B.is_zero:
        return np.zeros(np.shape(y_prime.m))
    if B.B1_closed is not None:
        return np.asarray(B.B1_closed(y_prime), dtype=float)
    if cache is None:
        raise ValueError(f"kernel {B.name!r} has no closed-form B1; build a B1Cache")
    return cache(y_prime)


__all__ = [
    "ADMISSIBLE_VOLUME_CONST",
    "B1",
    "B1Cache",
    "B1_mass",
    "CoagKernel",
    "FragKernel",
    "GronwallConstant",
    "KernelSuite",
    "ParticleState",
    "COAG_BUILTINS",
    "FRAG_BUILTINS",
    "additive_power_coag",
    "admissible_volume",
    "builtin_kernels",
    "constant_coag",
    "constant_truncated_frag",
    "droplet_coag",
    "gronwall_constant",
    "make_coag",
    "make_frag",
    "mass_binary_frag",
    "particle_B1",
    "smoluchowski_coag",
    "stellar_coag",
    "truncation_support",
    "zero_coag",
    "zero_frag",
]
