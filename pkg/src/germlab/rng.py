"""Counter-based splittable random streams built on the splitmix64 finalizer.

Every particle owns a 64-bit key. Its random numbers are pure functions of
that key and a purpose tag, and a child's key is a pure function of the
parent key and the child index, so a trajectory does not depend on the order
in which particles are processed. All functions are vectorised over numpy
``uint64`` arrays with wrap-around arithmetic.
"""

from __future__ import annotations

import numpy as np

GENERATOR_NAME = "splitmix64-tree-v1"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_CHILD_GAMMA = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1

# purpose tags, xor-ed into the key before finalising
OFFSPRING = np.uint64(0x6F6666737072696E)
STEP = np.uint64(0x737465700000AA55)

_TO_UNIT = 2.0**-53


def mix(z: np.ndarray) -> np.ndarray:
    """splitmix64 output function (a bijection of 64-bit words)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64_reference(seed: int, count: int) -> list[int]:
    """Plain-integer splitmix64 sequence, kept as a cross-check."""
    out = []
    state = seed & _MASK
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        out.append(z ^ (z >> 31))
    return out


def root_keys(seed: int, replicas) -> np.ndarray:
    """Keys of the generation-0 particle for each replica index."""
    r = np.asarray(replicas, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = mix(np.uint64(seed & _MASK) + _GAMMA)
        return mix(base + (r + np.uint64(1)) * _GAMMA)


def child_keys(parents: np.ndarray, index: np.ndarray) -> np.ndarray:
    """Key of child number ``index`` (0-based) of each parent key."""
    with np.errstate(over="ignore"):
        return mix(np.asarray(parents, dtype=np.uint64)
                   + (np.asarray(index, dtype=np.uint64) + np.uint64(1)) * _CHILD_GAMMA)


def uniforms(keys: np.ndarray, purpose: np.uint64) -> np.ndarray:
    """One uniform in [0, 1) per key for the given purpose, 53-bit resolution."""
    bits = mix(np.asarray(keys, dtype=np.uint64) ^ purpose) >> np.uint64(11)
    return bits.astype(np.float64) * _TO_UNIT
