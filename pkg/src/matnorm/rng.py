"""Reproducible random number generation.

The whole package draws its randomness from a single documented generator
so that every experiment is reproducible from its integer seed, on any
platform, without depending on the evolution of an external library's
stream layout.

Generator
---------
SplitMix64 (Steele, Lea & Flood 2014) used in counter mode: output ``j``
of the stream with seed ``s`` is::

    out_j = mix64(s + (j + 1) * GAMMA)           (mod 2**64)

with ``GAMMA = 0x9E3779B97F4A7C15`` and ``mix64`` the standard SplitMix64
finalizer::

    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

This equals the sequential SplitMix64 sequence started at state ``s`` and
is therefore both a named, well-studied generator and trivially
vectorizable/parallelizable.

Normal variates are produced by the Box-Muller transform from pairs of
consecutive outputs: with ``u1 = ((out_{2i} >> 11) + 1) * 2**-53`` in
``(0, 1]`` and ``u2 = (out_{2i+1} >> 11) * 2**-53`` in ``[0, 1)``,

    z_{2i}   = sqrt(-2 ln u1) * cos(2 pi u2)
    z_{2i+1} = sqrt(-2 ln u1) * sin(2 pi u2)
"""

from __future__ import annotations

import numpy as np

__all__ = ["standard_normal_stream", "NormalStream", "derive_seed", "raw_outputs"]

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
# Offset folded into derive_seed labels so that the label 0 still perturbs
# the state (mix64(0) == 0).
_LABEL_OFFSET = 0x632BE59BD9B4E019

_U64 = np.uint64


def _mix64_int(z: int) -> int:
    """SplitMix64 finalizer on plain Python integers (reference path)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over a uint64 array."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _U64(_MIX1)
        z = (z ^ (z >> _U64(27))) * _U64(_MIX2)
        return z ^ (z >> _U64(31))


def raw_outputs(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs ``start .. start + count - 1`` of the stream as uint64.

    Useful for deterministic auxiliary decisions (index permutations,
    sign bits) that must not disturb the normal-variate stream.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    idx = np.arange(start + 1, start + count + 1, dtype=_U64)
    with np.errstate(over="ignore"):
        states = _U64(seed & _MASK64) + idx * _U64(_GAMMA)
    return _mix64_array(states)


def derive_seed(seed: int, *labels: int) -> int:
    """Mix integer labels into a fresh 64-bit seed.

    ``derive_seed(base, cell, replicate)`` gives every (cell, replicate)
    combination its own independent stream; adding new labels never
    perturbs streams derived with other labels.
    """
    state = _mix64_int(int(seed))
    for label in labels:
        state = _mix64_int(state ^ _mix64_int((int(label) + _LABEL_OFFSET) & _MASK64))
    return state


def _normal_pairs(seed: int, pair_indices: np.ndarray):
    """Box-Muller pairs (z0, z1) for the given pair indices."""
    first = 2 * pair_indices
    second = first + 1
    idx = np.concatenate([first, second]).astype(_U64)
    with np.errstate(over="ignore"):
        raw = _mix64_array(_U64(seed & _MASK64) + (idx + _U64(1)) * _U64(_GAMMA))
    k = pair_indices.size
    u1 = ((raw[:k] >> _U64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (raw[k:] >> _U64(11)).astype(np.float64) * 2.0**-53
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = (2.0 * np.pi) * u2
    return radius * np.cos(angle), radius * np.sin(angle)


class NormalStream:
    """Deterministic stream of i.i.d. standard normal variates.

    Draws are independent of call chunking: ``draw(2)`` followed by
    ``draw(1)`` yields the same three values as a single ``draw(3)``.
    """

    __slots__ = ("seed", "_next_pair", "_leftover")

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._next_pair = 0
        self._leftover: float | None = None

    def draw(self, count: int) -> np.ndarray:
        """Return the next ``count`` standard normal variates."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        out = np.empty(count, dtype=np.float64)
        pos = 0
        if self._leftover is not None and count > 0:
            out[0] = self._leftover
            self._leftover = None
            pos = 1
        need = count - pos
        if need > 0:
            n_pairs = (need + 1) // 2
            pair_idx = np.arange(
                self._next_pair, self._next_pair + n_pairs, dtype=_U64
            )
            self._next_pair += n_pairs
            z0, z1 = _normal_pairs(self.seed, pair_idx)
            block = np.empty(2 * n_pairs, dtype=np.float64)
            block[0::2] = z0
            block[1::2] = z1
            out[pos:] = block[:need]
            if need % 2 == 1:
                self._leftover = float(block[need])
        return out


def standard_normal_stream(seed: int) -> NormalStream:
    """Create a reproducible standard normal stream for ``seed``."""
    return NormalStream(seed)
