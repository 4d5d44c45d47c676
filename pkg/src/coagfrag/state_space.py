"""Microscopic kinematics of coalescence and fragmentation.

A particle state is ``y = (m, p, e)`` with mass ``m > 0``, momentum ``p`` in
R^3 and internal energy ``e > 0``.  Merges and break-ups conserve mass,
momentum and total (kinetic + internal) energy; the kinetic energy lost in a
merger, or gained in a break-up, is moved to or from internal energy.

Every array-level function broadcasts: masses and energies have shape
``(...)`` and momenta ``(..., 3)``.  The :class:`ParticleState` wrappers are
thin conveniences for single particles.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class States(NamedTuple):
    """A batch of particle states stored column-wise."""

    m: np.ndarray
    p: np.ndarray
    e: np.ndarray

    def __len__(self) -> int:
        return int(np.shape(self.m)[0]) if np.ndim(self.m) else 1

    def take(self, idx) -> "States":
        return States(self.m[idx], self.p[idx], self.e[idx])

    @classmethod
    def stack(cls, states) -> "States":
        states = list(states)
        return cls(
            np.array([s.m for s in states], dtype=float),
            np.array([s.p for s in states], dtype=float).reshape(-1, 3),
            np.array([s.e for s in states], dtype=float),
        )

    @classmethod
    def concat(cls, parts) -> "States":
        parts = list(parts)
        return cls(
            np.concatenate([s.m for s in parts]),
            np.concatenate([s.p for s in parts]).reshape(-1, 3),
            np.concatenate([s.e for s in parts]),
        )


def as_states(y) -> States:
    """Coerce a ParticleState, a States batch or an ``(m, p, e)`` triple."""
    if isinstance(y, ParticleState):
        return States(np.array([y.m]), np.asarray(y.p, dtype=float).reshape(1, 3), np.array([y.e]))
    if isinstance(y, States):
        return y
    m, p, e = y
    return States(np.asarray(m, dtype=float), np.asarray(p, dtype=float), np.asarray(e, dtype=float))


@dataclass(frozen=True)
class ParticleState:
    """A point of the state space ``]0, inf[ x R^3 x ]0, inf[``."""

    m: float
    p: tuple[float, float, float]
    e: float

    def __post_init__(self):
        p = tuple(float(c) for c in np.asarray(self.p, dtype=float).reshape(3))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "e", float(self.e))
        if not (self.m > 0.0 and self.e > 0.0):
            raise ValueError(f"invalid state: need m > 0 and e > 0, got m={self.m}, e={self.e}")
        if not np.all(np.isfinite(self.p)):
            raise ValueError(f"invalid state: non-finite momentum {self.p}")

    @property
    def p_array(self) -> np.ndarray:
        return np.array(self.p)

    def norm(self) -> float:
        """Max-norm ``max(m, |p|, e)`` used for box membership and growth limits."""
        return max(self.m, float(np.linalg.norm(self.p)), self.e)

    def total_energy(self) -> float:
        return kinetic_energy(self) + self.e

    def to_list(self) -> list[float]:
        return [self.m, *self.p, self.e]

    @classmethod
    def from_list(cls, values) -> "ParticleState":
        m, px, py, pz, e = values
        return cls(m, (px, py, pz), e)


@dataclass(frozen=True)
class PhasePoint:
    x: tuple[float, float, float]
    state: ParticleState

    def __post_init__(self):
        x = tuple(float(c) for c in np.asarray(self.x, dtype=float).reshape(3))
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class StateBox:
    """The box ``Y_R = ]0,R[ x B_R x ]0,R[``."""

    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"StateBox radius must be positive, got {self.R}")

    def volume(self) -> float:
        return self.R * (4.0 * np.pi / 3.0) * self.R**3 * self.R

    def contains(self, y) -> np.ndarray:
        s = as_states(y)
        pn = np.linalg.norm(s.p, axis=-1)
        return (s.m > 0) & (s.m < self.R) & (pn < self.R) & (s.e > 0) & (s.e < self.R)


def _sqnorm(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.einsum("...i,...i->...", v, v)


def state_norm(y) -> np.ndarray:
    s = as_states(y)
    return np.maximum(np.maximum(s.m, np.sqrt(_sqnorm(s.p))), s.e)


def kinetic_energy(y) -> float | np.ndarray:
    """``|p|^2 / (2m)``; scalar for a ParticleState, array for a batch."""
    if isinstance(y, ParticleState):
        return float(_sqnorm(y.p) / (2.0 * y.m))
    s = as_states(y)
    return _sqnorm(s.p) / (2.0 * s.m)


def energy_loss(m, m_star, p, p_star):
    """Kinetic energy lost when ``(m, p)`` and ``(m_star, p_star)`` merge.

    ``|m* p - m p*|^2 / (2 m m* (m + m*))``, zero iff the velocities agree.
    """
    m = np.asarray(m, dtype=float)
    m_star = np.asarray(m_star, dtype=float)
    rel = m_star[..., None] * np.asarray(p, dtype=float) - m[..., None] * np.asarray(p_star, dtype=float)
    out = _sqnorm(rel) / (2.0 * m * m_star * (m + m_star))
    return float(out) if out.ndim == 0 else out


def energy_gain(m_prime, m, p_prime, p):
    """Kinetic energy released when ``(m', p')`` breaks off a piece ``(m, p)``.

    ``|m' p - m p'|^2 / (2 m m' (m' - m))``.  Requires ``0 < m < m'``.
    """
    m_prime = np.asarray(m_prime, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(~(m < m_prime)):
        raise ValueError("energy_gain requires 0 < m < m' (inadmissible split mass)")
    rel = m_prime[..., None] * np.asarray(p, dtype=float) - m[..., None] * np.asarray(p_prime, dtype=float)
    out = _sqnorm(rel) / (2.0 * m * m_prime * (m_prime - m))
    return float(out) if out.ndim == 0 else out


def _energy_gain_masked(m_prime, m, p_prime, p):
    # like energy_gain but returns +inf where m >= m' instead of raising
    ok = m < m_prime
    denom = np.where(ok, 2.0 * m * m_prime * (m_prime - m), 1.0)
    rel = m_prime[..., None] * p - m[..., None] * p_prime
    return np.where(ok, _sqnorm(rel) / denom, np.inf)


def coalesce_arrays(y: States, y_star: States) -> States:
    """Vectorized merge: ``(m+m*, p+p*, e+e*+E_-)``."""
    loss = energy_loss(y.m, y_star.m, y.p, y_star.p)
    return States(y.m + y_star.m, y.p + y_star.p, y.e + y_star.e + loss)


def admissible_arrays(y: States, y_prime: States) -> np.ndarray:
    """Vectorized ``y < y'``: ``m < m'`` and ``e < e' - E_+(m', m, p', p)``."""
    m = np.asarray(y.m, dtype=float)
    mp = np.asarray(y_prime.m, dtype=float)
    gain = _energy_gain_masked(mp, m, np.asarray(y_prime.p, dtype=float), np.asarray(y.p, dtype=float))
    return (m > 0) & (m < mp) & (y.e > 0) & (y.e < y_prime.e - gain)


def split_arrays(y_prime: States, y: States, check: bool = True) -> States:
    """Vectorized break-up ``y' -> (y, y' - y)``; returns the complement."""
    if check and not np.all(admissible_arrays(y, y_prime)):
        raise ValueError("split requires y < y' (inadmissible daughter)")
    gain = _energy_gain_masked(y_prime.m, y.m, y_prime.p, y.p)
    return States(y_prime.m - y.m, y_prime.p - y.p, y_prime.e - y.e - gain)


def coalesce(y: ParticleState, y_star: ParticleState) -> ParticleState:
    loss = energy_loss(y.m, y_star.m, y.p_array, y_star.p_array)
    return ParticleState(y.m + y_star.m, y.p_array + y_star.p_array, y.e + y_star.e + loss)


def admissible(y: ParticleState, y_prime: ParticleState) -> bool:
    """True iff ``y`` is an admissible daughter of ``y_prime``.

    Degenerate splits (``m == m'`` or no internal energy left) give False
    rather than an error, since samplers probe the boundary constantly.
    """
    return bool(admissible_arrays(as_states(y), as_states(y_prime))[0])


def split(y_prime: ParticleState, y: ParticleState) -> ParticleState:
    """The complementary daughter ``y* = y' - y``.

    Raises
    ------
    ValueError
        If ``y`` is not an admissible daughter of ``y_prime``.
    """
    if not admissible(y, y_prime):
        raise ValueError(f"inadmissible split: {y} is not < {y_prime}")
    gain = energy_gain(y_prime.m, y.m, y_prime.p_array, y.p_array)
    return ParticleState(y_prime.m - y.m, y_prime.p_array - y.p_array, y_prime.e - y.e - gain)


@dataclass(frozen=True)
class AdmissibleBox:
    """Envelope of the admissible daughters of one parent."""

    m_max: float
    p_radius: float
    e_max: float

    def volume(self) -> float:
        return self.m_max * (4.0 * np.pi / 3.0) * self.p_radius**3 * self.e_max


def admissible_bounds(y_prime: ParticleState) -> AdmissibleBox:
    """Box ``]0,m'[ x B_r x ]0,e'[`` with ``r = sqrt(2 m' e' + |p'|^2)``.

    Every admissible daughter lies inside; it is the rejection envelope of
    the samplers.
    """
    r = np.sqrt(2.0 * y_prime.m * y_prime.e + _sqnorm(y_prime.p))
    return AdmissibleBox(y_prime.m, float(r), y_prime.e)


def admissible_bounds_arrays(y_prime: States) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r = np.sqrt(2.0 * y_prime.m * y_prime.e + _sqnorm(y_prime.p))
    return np.asarray(y_prime.m, dtype=float), r, np.asarray(y_prime.e, dtype=float)


def advect(pt: PhasePoint, dt: float) -> PhasePoint:
    """Free flight along the characteristic ``x + dt p / m``."""
    s = pt.state
    x = np.asarray(pt.x) + dt * s.p_array / s.m
    return PhasePoint(x, s)


def advect_arrays(x: np.ndarray, m: np.ndarray, p: np.ndarray, dt: float) -> np.ndarray:
    return x + dt * p / m[:, None]


def change_of_variables(z: np.ndarray) -> np.ndarray:
    """``(m', m, p', p, e', e) -> (m', m*, p', p*, e', e*)`` on flat 10-vectors.

    Layout of ``z``: ``[m', m, p'(3), p(3), e', e]``.  The map is volume
    preserving on its admissible domain.
    """
    z = np.asarray(z, dtype=float)
    mp, m = z[..., 0], z[..., 1]
    pp, p = z[..., 2:5], z[..., 5:8]
    ep, e = z[..., 8], z[..., 9]
    gain = _energy_gain_masked(mp, m, pp, p)
    out = np.empty_like(z)
    out[..., 0] = mp
    out[..., 1] = mp - m
    out[..., 2:5] = pp
    out[..., 5:8] = pp - p
    out[..., 8] = ep
    out[..., 9] = ep - e - gain
    return out


def jacobian_determinant(z: np.ndarray, h: float = 1e-6) -> float:
    """Central finite-difference Jacobian determinant of :func:`change_of_variables`."""
    z = np.asarray(z, dtype=float)
    n = z.size
    steps = h * np.maximum(1.0, np.abs(z))
    plus = z + np.diag(steps)
    minus = z - np.diag(steps)
    jac = (change_of_variables(plus) - change_of_variables(minus)).T / (2.0 * steps)
    return float(np.linalg.det(jac.reshape(n, n)))
