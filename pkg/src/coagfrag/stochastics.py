"""Reproducible random streams, Monte-Carlo quadrature and admissible-region samplers.

Streams are derived from a :class:`StreamKey` through numpy's ``SeedSequence``
spawn keys feeding a Philox counter-based generator, so a key always yields
the same sequence no matter which thread consumes it.  Work is split into
fixed-size blocks with one lane per block, which keeps results bit-identical
for any worker count.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .state_space import (
    ParticleState,
    States,
    admissible_arrays,
    admissible_bounds_arrays,
    as_states,
)

BLOCK = 1 << 16


class SamplingError(RuntimeError):
    """The admissible region could not be sampled (degenerate or empty)."""


class KernelContractError(RuntimeError):
    """A kernel evaluation exceeded its declared bound."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


def _phase_code(phase) -> int:
    if isinstance(phase, str):
        return zlib.crc32(phase.encode("utf-8"))
    return int(phase)


@dataclass(frozen=True)
class StreamKey:
    """Seed plus lane identifiers ``(phase, step, cell, counter)``."""

    seed: int
    phase: str | int = 0
    step: int = 0
    cell: int = 0
    counter: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.seed) & (2**64 - 1),
            spawn_key=(_phase_code(self.phase), int(self.step), int(self.cell), int(self.counter)),
        )
        return np.random.Generator(np.random.Philox(ss))

    def lane(self, **kw) -> "StreamKey":
        return replace(self, **kw)


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    samples: int
    exact: bool = False

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "samples": self.samples, "exact": self.exact}


def _map_blocks(fn, keys, workers: int):
    if workers <= 1 or len(keys) <= 1:
        return [fn(k) for k in keys]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, keys))


def _block_sizes(n: int) -> list[int]:
    full, rest = divmod(n, BLOCK)
    return [BLOCK] * full + ([rest] if rest else [])


def _combine(sums, sumsqs, n, volume) -> McEstimate:
    s = float(np.sum(sums))
    ss = float(np.sum(sumsqs))
    mean = s / n
    var = max(ss / n - mean * mean, 0.0) * n / (n - 1) if n > 1 else 0.0
    return McEstimate(float(volume * mean), float(volume * np.sqrt(var / n)), n)


def uniform_ball(rng: np.random.Generator, n: int, radius) -> np.ndarray:
    """``n`` points uniform in the 3-ball(s) of the given radius (scalar or per-point)."""
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = np.asarray(radius, dtype=float) * rng.random(n) ** (1.0 / 3.0)
    return v * r[:, None]


def uniform_box(rng: np.random.Generator, n: int, R: float) -> States:
    """``n`` states uniform in ``Y_R``."""
    m = R * rng.random(n)
    p = uniform_ball(rng, n, R)
    e = R * rng.random(n)
    return States(m, p, e)


def box_volume(R: float) -> float:
    return R * (4.0 * np.pi / 3.0) * R**3 * R


def integrate_box(
    g: Callable,
    R: float,
    n: int,
    key: StreamKey,
    pairs: bool = False,
    workers: int = 1,
) -> McEstimate:
    """Monte-Carlo integral of ``g`` over ``Y_R`` (or ``Y_R x Y_R`` if ``pairs``).

    ``g`` receives a :class:`States` batch (two batches for pairs) and returns
    one value per sample.
    """
    if n < 2:
        raise ValueError("integrate_box needs at least 2 samples")
    vol = box_volume(R) ** (2 if pairs else 1)
    sizes = _block_sizes(n)
    keys = [key.lane(counter=key.counter + i) for i in range(len(sizes))]

    def block(k):
        rng = k.generator()
        size = sizes[k.counter - key.counter]
        if pairs:
            vals = np.asarray(g(uniform_box(rng, size, R), uniform_box(rng, size, R)), dtype=float)
        else:
            vals = np.asarray(g(uniform_box(rng, size, R)), dtype=float)
        vals = np.broadcast_to(vals, (size,))
        return vals.sum(), np.dot(vals, vals)

    out = _map_blocks(block, keys, workers)
    return _combine([o[0] for o in out], [o[1] for o in out], n, vol)


ENVELOPES = ("sheared", "box")


def envelope_proposals(rng: np.random.Generator, parents: States, idx: np.ndarray, envelope: str = "sheared") -> States:
    """One uniform proposal per entry of ``idx`` inside that parent's envelope.

    The envelope is ``m in ]0,m'[``, ``e in ]0,e'[`` and ``p`` in the ball of
    radius ``sqrt(m'e'/2)`` centred on ``(m/m') p'``.  The momentum constraint
    of an admissible daughter is a ball with that centre and radius at most
    ``sqrt(m'e'/2)``, so the envelope covers the admissible set and its
    acceptance rate is ``3 pi / 40`` whatever the parent.

    ``envelope="box"`` uses the centred ball of radius
    ``sqrt(2 m'e' + |p'|^2)`` instead; it is much looser for fast parents.
    """
    par = parents.take(idx)
    k = idx.size
    if envelope == "box":
        _, r, _ = admissible_bounds_arrays(par)
        return States(par.m * rng.random(k), uniform_ball(rng, k, r), par.e * rng.random(k))
    if envelope != "sheared":
        raise ValueError(f"unknown envelope {envelope!r}; known: {list(ENVELOPES)}")
    m = par.m * rng.random(k)
    r = np.sqrt(0.5 * par.m * par.e)
    p = (m / par.m)[:, None] * par.p + uniform_ball(rng, k, r)
    e = par.e * rng.random(k)
    return States(m, p, e)


def envelope_volume(parents: States, envelope: str = "sheared") -> np.ndarray:
    m, e = np.asarray(parents.m, dtype=float), np.asarray(parents.e, dtype=float)
    if envelope == "box":
        _, r, _ = admissible_bounds_arrays(parents)
        return m * e * (4.0 * np.pi / 3.0) * r**3
    return m * e * (4.0 * np.pi / 3.0) * (0.5 * m * e) ** 1.5


@dataclass
class AcceptanceStats:
    proposed: int = 0
    accepted: int = 0

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")


def sample_admissible_batch(
    rng: np.random.Generator,
    parents: States,
    accept: Callable | None = None,
    max_rounds: int = 100_000,
    floor: float = 1e-6,
    stats: AcceptanceStats | None = None,
) -> States:
    """Draw one daughter per parent, uniform on the admissible set (optionally thinned).

    ``accept(parents_subset, proposals, u)`` may thin admissible proposals
    further (for kernel-weighted sampling); it returns a boolean mask.
    Proposals are made in rounds for all still-pending parents at once.
    """
    n = len(parents)
    stats = stats if stats is not None else AcceptanceStats()
    cap = int(np.ceil(1.0 / floor))
    out_m = np.empty(n)
    out_p = np.empty((n, 3))
    out_e = np.empty(n)
    pending = np.arange(n)
    proposed = np.zeros(n, dtype=np.int64)
    rounds = 0
    while pending.size:
        rounds += 1
        reps = 8 if pending.size > 256 else 64
        idx = np.repeat(pending, reps)
        prop = envelope_proposals(rng, parents, idx)
        ok = admissible_arrays(prop, parents.take(idx))
        u = rng.random(idx.size)
        if accept is not None and ok.any():
            sel = np.flatnonzero(ok)
            ok[sel] = accept(parents.take(idx[sel]), prop.take(sel), u[sel])
        proposed[pending] += reps
        stats.proposed += idx.size
        hit = np.flatnonzero(ok)
        if hit.size:
            # first accepted proposal per parent keeps the draw order deterministic
            owners, first = np.unique(idx[hit], return_index=True)
            chosen = hit[first]
            out_m[owners] = prop.m[chosen]
            out_p[owners] = prop.p[chosen]
            out_e[owners] = prop.e[chosen]
            stats.accepted += owners.size
            pending = np.setdiff1d(pending, owners, assume_unique=True)
        if pending.size and (rounds >= max_rounds or proposed[pending].max() >= cap):
            worst = int(pending[np.argmax(proposed[pending])])
            raise SamplingError(
                f"acceptance below floor {floor:g} for parent index {worst}: "
                f"no admissible daughter in {int(proposed[worst])} proposals"
            )
    return States(out_m, out_p, out_e)


def sample_admissible(
    y_prime: ParticleState,
    key: StreamKey,
    n: int = 1,
    floor: float = 1e-6,
    envelope: str = "sheared",
) -> tuple[States, AcceptanceStats]:
    """``n`` daughters uniform on ``{y : y < y'}`` by rejection from the envelope.

    Returns the samples and the acceptance statistics.  Raises
    :class:`SamplingError` when the acceptance rate falls below ``floor``.
    """
    parent = as_states(y_prime)
    rng = key.generator()
    stats = AcceptanceStats()
    chunks = []
    got = 0
    while got < n:
        want = min(n - got, BLOCK)
        k = max(64, int(want / (0.2 if envelope == "sheared" else 0.02)))
        idx = np.zeros(k, dtype=np.int64)
        prop = envelope_proposals(rng, parent, idx, envelope)
        ok = admissible_arrays(prop, parent.take(idx))
        stats.proposed += k
        acc = np.flatnonzero(ok)[:want]
        stats.accepted += int(ok.sum())
        chunks.append(prop.take(acc))
        got += acc.size
        if stats.proposed >= 1.0 / floor and stats.accepted < floor * stats.proposed:
            raise SamplingError(
                f"acceptance rate {stats.accepted}/{stats.proposed} below floor {floor:g}: "
                f"degenerate admissible region for {y_prime}"
            )
    return States.concat(chunks), stats


def sample_density_on_admissible(y_prime, B, key: StreamKey, n: int = 1) -> States:
    """Daughters of ``y'`` with density ``B(y', .) / B_1(y')``.

    Uniform admissible proposals are accepted with probability
    ``B / local_sup_B(y')``.

    Raises
    ------
    SamplingError
        ``B_1(y') = 0`` (nothing to sample) or acceptance collapses.
    KernelContractError
        An evaluation exceeded the declared ``local_sup_B`` bound.
    """
    parent = as_states(y_prime)
    if B.B1_closed is not None and not np.all(B.B1_closed(parent) > 0):
        raise SamplingError(f"B_1 = 0 at {y_prime}: nothing to sample")
    parents = States(
        np.repeat(parent.m, n), np.repeat(parent.p.reshape(-1, 3), n, axis=0), np.repeat(parent.e, n)
    )
    return sample_daughters(key.generator(), parents, B)


def sample_daughters(
    rng: np.random.Generator,
    parents: States,
    B,
    stats: AcceptanceStats | None = None,
    floor: float = 1e-6,
) -> States:
    """One ``B``-distributed daughter per parent (batched rejection)."""
    bound = np.asarray(B.local_sup_B(parents), dtype=float)
    bound = np.broadcast_to(bound, parents.m.shape)
    if np.any(~np.isfinite(bound)):
        raise KernelContractError("local_sup_B must be finite for daughter sampling")

    def accept(par, prop, u):
        vals = np.asarray(B(par, prop), dtype=float)
        b = np.asarray(B.local_sup_B(par), dtype=float)
        b = np.broadcast_to(b, vals.shape)
        bad = vals > b * (1.0 + 1e-12)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            witness = {
                "y_prime": [float(par.m[i]), *map(float, par.p[i]), float(par.e[i])],
                "y": [float(prop.m[i]), *map(float, prop.p[i]), float(prop.e[i])],
                "B": float(vals[i]),
                "local_sup_B": float(b[i]),
            }
            raise KernelContractError("B exceeded its declared local bound", witness)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(b > 0, vals / b, 0.0)
        return u < ratio

    return sample_admissible_batch(rng, parents, accept=accept, stats=stats, floor=floor)


def mc_B1(B, y_prime: States, n: int, key: StreamKey, workers: int = 1) -> McEstimate:
    """Plain envelope Monte-Carlo of ``int B(y', y) 1{y < y'} dy`` for one parent."""
    if n < 1:
        raise ValueError("B1 quadrature budget must be at least one sample")
    parent = as_states(y_prime)
    vol = float(envelope_volume(parent)[0])
    sizes = _block_sizes(n)
    keys = [key.lane(counter=key.counter + i) for i in range(len(sizes))]

    def block(k):
        rng = k.generator()
        size = sizes[k.counter - key.counter]
        idx = np.zeros(size, dtype=np.int64)
        prop = envelope_proposals(rng, parent, idx)
        par = parent.take(idx)
        ok = admissible_arrays(prop, par)
        vals = np.zeros(size)
        if ok.any():
            sel = np.flatnonzero(ok)
            vals[sel] = np.asarray(B(par.take(sel), prop.take(sel)), dtype=float)
        return vals.sum(), np.dot(vals, vals)

    out = _map_blocks(block, keys, workers)
    if n == 1:
        return McEstimate(vol * float(out[0][0]), float("inf"), 1)
    return _combine([o[0] for o in out], [o[1] for o in out], n, vol)
