"""Built-in property suites behind ``coagfrag verify``.

Each suite runs without any configuration and returns a list of
:class:`Check` results with the measured value and its threshold.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .state_space import (
    States,
    coalesce_arrays,
    energy_gain,
    energy_loss,
    jacobian_determinant,
    kinetic_energy,
    split_arrays,
)
from .stochastics import (
    StreamKey,
    sample_admissible,
    sample_admissible_batch,
    uniform_box,
)


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    seconds: float = 0.0
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.value = float(self.value)

    def to_dict(self) -> dict:
        return asdict(self)


class _timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def random_pairs(n: int, key: StreamKey, R: float = 4.0) -> tuple[States, States]:
    rng = key.generator()
    y, ys = uniform_box(rng, n, R), uniform_box(rng, n, R)
    return y, ys


def kinematics_errors(n: int = 100_000, seed: int = 0) -> dict:
    """Worst relative errors of the merge/split identities on ``n`` random pairs."""
    y, ys = random_pairs(n, StreamKey(seed, "verify-kinematics"))
    yp = coalesce_arrays(y, ys)
    E_before = kinetic_energy(y) + y.e + kinetic_energy(ys) + ys.e
    E_after = kinetic_energy(yp) + yp.e
    pscale = np.sqrt(2.0 * yp.m * E_after)
    out = {
        "mass": float(np.max(np.abs(yp.m - (y.m + ys.m)) / yp.m)),
        "momentum": float(np.max(np.linalg.norm(yp.p - (y.p + ys.p), axis=1) / pscale)),
        "energy": float(np.max(np.abs(E_after - E_before) / E_before)),
    }
    loss = energy_loss(y.m, ys.m, y.p, ys.p)
    gain = energy_gain(yp.m, y.m, yp.p, y.p)
    # reciprocity and the exchange symmetries, relative to the exchanged energy
    out["reciprocity"] = float(np.max(np.abs(loss - gain) / np.maximum(loss, 1e-16 * E_before)))
    swapped = energy_loss(ys.m, y.m, ys.p, y.p)
    out["loss_symmetry"] = float(np.max(np.abs(swapped - loss) / np.maximum(loss, 1e-16 * E_before)))
    g2 = energy_gain(yp.m, yp.m - y.m, yp.p, yp.p - y.p)
    out["gain_symmetry"] = float(np.max(np.abs(g2 - gain) / np.maximum(gain, 1e-16 * E_before)))
    back = split_arrays(yp, y, check=False)
    out["roundtrip"] = float(
        max(
            np.max(np.abs(back.m - ys.m) / yp.m),
            np.max(np.linalg.norm(back.p - ys.p, axis=1) / pscale),
            np.max(np.abs(back.e - ys.e) / yp.e),
        )
    )
    return out


def jacobian_errors(n: int = 1000, seed: int = 0, R: float = 4.0) -> np.ndarray:
    """``| |det J| - 1 |`` at ``n`` random admissible points of the split change of variables."""
    rng = StreamKey(seed, "verify-jacobian").generator()
    parents = uniform_box(rng, n, R)
    daughters = sample_admissible_batch(rng, parents)
    z = np.column_stack([parents.m, daughters.m, parents.p, daughters.p, parents.e, daughters.e])
    return np.array([abs(abs(jacobian_determinant(zi)) - 1.0) for zi in z])


def kinematics_suite(n: int = 100_000, seed: int = 0) -> list[Check]:
    with _timer() as tm:
        errs = kinematics_errors(n, seed)
    checks = [Check(f"coalesce_{k}", v <= 1e-12, v, 1e-12, tm.seconds) for k, v in errs.items()]
    with _timer() as tj:
        jac = jacobian_errors(1000, seed)
    checks.append(Check("jacobian", bool(jac.max() <= 1e-6), float(jac.max()), 1e-6, tj.seconds))
    return checks


def samplers_suite(n: int = 1_000_000, seed: int = 0) -> list[Check]:
    from .kernels import B1, constant_truncated_frag
    from .state_space import ParticleState

    y = ParticleState(2.0, (0.0, 0.0, 0.0), 3.0)
    B = constant_truncated_frag(1.0, None)
    checks = []
    with _timer() as tm:
        exact = B1(B, y).value
        from .state_space import as_states
        from .stochastics import mc_B1

        est = mc_B1(B, as_states(y), n, StreamKey(seed, "verify-B1"))
    z = abs(est.value - exact) / est.std_error
    checks.append(Check("B1_oracle", z <= 3.0, z, 3.0, tm.seconds, f"{est.value:.5f} +- {est.std_error:.5f} vs {exact:.5f}"))

    with _timer() as tm:
        d, stats = sample_admissible(y, StreamKey(seed, "verify-sampler"), 100_000)
    rate = 3.0 * math.pi / 40.0
    se = math.sqrt(rate * (1 - rate) / stats.proposed)
    z = abs(stats.rate - rate) / se
    checks.append(Check("acceptance_rate", z <= 3.0, z, 3.0, tm.seconds, f"{stats.rate:.5f} vs {rate:.5f}"))
    # daughter masses are symmetric about m'/2 under the uniform law
    zm = abs(d.m.mean() - 1.0) / (d.m.std(ddof=1) / math.sqrt(d.m.size))
    checks.append(Check("daughter_mass_mean", zm <= 3.0, float(zm), 3.0, tm.seconds))
    return checks


def moments_suite(seed: int = 0) -> list[Check]:
    from .dsmc import DsmcConfig
    from .dsmc import run as dsmc_run
    from .homogeneous import (
        HomogeneousConfig,
        MassGrid,
        analytic_constant_N,
        mass_drift,
        monodisperse,
        run,
    )
    from .kernels import KernelSuite, constant_coag, zero_coag, zero_frag

    checks = []
    suite = KernelSuite(constant_coag(1.0), zero_frag())
    grid = MassGrid.around(1.0, 2 ** 0.125, 128, below=8)
    with _timer() as tm:
        errs = []
        for dt in (0.1, 0.05, 0.025):
            r = run(HomogeneousConfig(suite, grid, 2.0, dt), monodisperse(grid))
            errs.append(r.column("N")[-1] - float(analytic_constant_N(1.0, 1.0, 2.0)))
    rel = abs(errs[-1]) / float(analytic_constant_N(1.0, 1.0, 2.0))
    checks.append(Check("sectional_constant_kernel", rel <= 0.01, rel, 0.01, tm.seconds))
    ratio = errs[0] / errs[1]
    checks.append(Check("sectional_richardson", 3.5 <= ratio <= 4.5, ratio, 4.0, tm.seconds))
    drift = mass_drift(r)
    checks.append(Check("sectional_mass_drift", drift <= 1e-10, drift, 1e-10, tm.seconds))

    with _timer() as tm:
        res = dsmc_run(DsmcConfig(KernelSuite(zero_coag(), zero_frag()), 1000, 0.1, 1.0, seed=seed,
                                  init={"kind": "beam"}, cadence=0.1))
    vals = [res.series.column(c) for c in ("N", "M", "Px", "Py", "Pz", "Etot")]
    dev = max(float(np.max(np.abs(v - v[0]))) / max(abs(v[0]), 1.0) for v in vals)
    checks.append(Check("dsmc_free_flight_totals", dev <= 1e-12, dev, 1e-12, tm.seconds))
    return checks


SUITES = {"kinematics": kinematics_suite, "samplers": samplers_suite, "moments": moments_suite}


def run_suite(name: str = "all", seed: int = 0) -> list[Check]:
    if name == "all":
        out = []
        for fn in SUITES.values():
            out.extend(fn(seed=seed))
        return out
    try:
        fn = SUITES[name]
    except KeyError:
        raise KeyError(f"unknown suite {name!r}; known: {sorted(SUITES) + ['all']}") from None
    return fn(seed=seed)


__all__ = ["Check", "SUITES", "jacobian_errors", "kinematics_errors", "run_suite"]
