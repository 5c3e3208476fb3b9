"""Counter-based random streams keyed by ``(base_seed, rep, role)``.

Each repetition and role gets an independent Philox stream, so results do
not depend on how repetitions are spread over workers.  Labeled and
unlabeled rows use separate roles: the unlabeled rows of a run with ``m``
rows are the first ``m`` rows of any run with more, which gives common
random numbers across ``m`` grids.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

ROLES = {"labeled": 0, "unlabeled": 1, "density": 2, "auxiliary": 3, "noise": 4}
_SCALE = 2.0**-53


def stream(base_seed, rep, role) -> np.random.Generator:
    role_id = ROLES[role] if isinstance(role, str) else int(role)
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(rep), role_id))
    return np.random.Generator(np.random.Philox(ss))


def seed_for(base_seed, rep, role):
    """Integer seed derived from a stream; used to key per-point draws."""
    return int(stream(base_seed, rep, role).integers(0, 2**63))


def uniform_open(rng, size):
    """Uniforms on ``(0, 1)`` from 53-bit integers, midpoint-shifted."""
    return (rng.integers(0, 2**53, size=size, dtype=np.int64) + 0.5) * _SCALE


def standard_normal(rng, size):
    """Normals by inverse CDF so other implementations can match the recipe."""
    return ndtri(uniform_open(rng, size))
