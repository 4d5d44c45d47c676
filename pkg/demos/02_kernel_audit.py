"""
Auditing kernel hypotheses
==========================

The existence theory asks the coagulation kernel for a structure
inequality, ``A(y, y*) <= A(y, y + y*) + A(y*, y + y*)``, rather than
monotonicity.  The Brownian (Smoluchowski) kernel is the standard example
of a kernel with the first property but not the second.
"""

# %%
from coagfrag.audit import AuditConfig, run_audit
from coagfrag.kernels import (
    KernelSuite,
    additive_power_coag,
    constant_truncated_frag,
    smoluchowski_coag,
    zero_frag,
)

# %%
probe = ((1.0, 0.0, 0.0, 0.0, 0.5), (1.1, 0.0, 0.0, 0.0, 1.0))
cfg = AuditConfig(samples=200_000, quad_samples=5_000, galkin_probes=(probe,))
rep = run_audit(KernelSuite(smoluchowski_coag(), zero_frag()), cfg, seed=0, include_weight=False)
for e in rep.entries:
    print(f"{e.assumption:12s} {e.status}")

# %%
# The monotonicity failure comes with a witness that can be replayed.
w = rep["galkin"].witness
print(f"A(y, y* - y) = {w['lhs']:.4f} > A(y, y*) = {w['rhs']:.4f}")

# %%
# The Brownian kernel blows up at small mass, so it has no local bound and
# the particle simulator cannot build a majorant for it.
print(rep["A_bounded"].note)

# %%
# A sublinear kernel with a weak truncated fragmentation passes everything.
suite = KernelSuite(additive_power_coag(0.5), constant_truncated_frag(0.01, 4.0))
rep = run_audit(suite, AuditConfig(samples=50_000, quad_samples=5_000), seed=0, include_weight=False)
print("all mandatory checks pass:", rep.passed)
