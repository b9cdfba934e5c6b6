"""
Lelong mass of |z|^2 under mollification
========================================

``h = |z|^2`` vanishes at the origin, so it lies outside the ``det h > eps``
regime. The curvature of the mollified metric, ``-ddbar log h_nu``,
concentrates near zero and its pairing with a bump equal to 1 near 0 tends
to ``-2 pi`` times the Lelong number.
"""

import math

from singherm import regularize as reg
from singherm.grid import GridSpec, radial_bump
from singherm.metric import MetricField

spec = GridSpec(1, 0.0, 1.0, 512)
h = MetricField.from_catalog("lelong", spec)
phi = radial_bump(spec, 0.5)
tab = reg.weak_convergence_probe(h, [4.0, 8.0, 16.0, 32.0], 1.0, [phi], floor=1e-12, enforce_hypothesis=False)

print(f"in hypothesis: {tab.in_hypothesis}")
for nu, val in zip(tab.nus, tab.pairings[:, 0, 0, 0]):
    print(f"nu={nu:4.0f}  pairing={val.real: .5f}  ratio to -2 pi = {val.real / (-2 * math.pi):.4f}")
