"""Deterministic random number plumbing.

Two layers:

* **Seed schedule** (`mix64`, `trial_seed`): a SplitMix64 hash chain run in
  plain Python.  Every trial's seed is a pure function of the master seed and
  its (experiment, group, trial) indices, so parallel execution order can
  never change results.

* **In-simulation stream** (`Rng`): a MINSTD (Lehmer) generator whose state is
  a single int64 held in a 1-element array.  All arithmetic fits in int64
  exactly, so the jitted and pure-Python kernel paths produce bit-identical
  streams.  Simulation code draws from it only for spawn placement, puck
  scattering, and the recovery turn rate.
"""

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_MINSTD_MOD = 2147483647  # 2**31 - 1
_MINSTD_MULT = 48271

# Experiment identifiers folded into the seed schedule, one per CLI subcommand.
EXPERIMENT_IDS = {
    "run": 1,
    "sweep": 2,
    "perturb": 3,
    "ablate": 4,
    "search": 5,
    "flow": 6,
    "fuzz": 7,
}


def splitmix64(x: int) -> int:
    """One SplitMix64 step: advance-and-mix a 64-bit value."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix64(*values: int) -> int:
    """Hash a tuple of integers into one 64-bit value.

    Each value is folded in with XOR and passed through SplitMix64, so any
    change to any position changes the output.
    """
    h = 0x8AE3A58C41D7B2F5
    for v in values:
        h = splitmix64((h ^ (int(v) & _MASK64)) & _MASK64)
    return h


def trial_seed(master_seed: int, experiment: str, group_index: int, trial_index: int) -> int:
    """Seed for one trial under the documented schedule."""
    return mix64(master_seed, EXPERIMENT_IDS[experiment], group_index, trial_index)


def minstd_state_from_seed(seed: int) -> int:
    """Map an arbitrary 64-bit seed onto a valid MINSTD state in [1, 2**31-3]."""
    return (mix64(seed) % (_MINSTD_MOD - 2)) + 1


class Rng:
    """Seeded MINSTD stream exposed for object-level APIs.

    The state lives in ``self.state`` (shape-(1,) int64 array) so kernels can
    advance it in place; this class is a thin convenience wrapper.
    """

    def __init__(self, seed: int):
        self.state = np.array([minstd_state_from_seed(seed)], dtype=np.int64)

    def uniform(self) -> float:
        """Next uniform draw in [0, 1)."""
        self.state[0] = (self.state[0] * _MINSTD_MULT) % _MINSTD_MOD
        return (self.state[0] - 1) / 2147483646.0

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def copy(self) -> "Rng":
        other = Rng(0)
        other.state = self.state.copy()
        return other
