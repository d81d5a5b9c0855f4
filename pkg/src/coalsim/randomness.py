"""Counter-based randomness for reproducible simulation.

Every random decision inside a simulated kernel is a pure hash of
``(campaign seed, sample index, role tags)``.  That makes a sample's timing a
function of its index alone: results are bit-identical no matter how samples
are chunked across workers, and the scalar and vectorised simulator paths
consume randomness identically by construction.

The hash is the standard splitmix64 finaliser, applied field by field.
"""

from __future__ import annotations

import math

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# Draw roles.  SEQ covers the per-kernel policy resolution (width or r
# pattern), GAUSS the measurement-noise pair, MISS the per-transaction miss
# bitplanes.
TAG_SEQ = 0x5EC0
TAG_GAUSS = 0x6A55
TAG_MISS = 0x4D15


def mix64(x):
    """splitmix64 finaliser; works on uint64 scalars and arrays (wrapping).

    Inputs are promoted to 1-d because numpy only warns about wrap-around on
    scalar integer arithmetic; the wrap is intended here.
    """
    x = np.asarray(x, dtype=np.uint64)
    scalar = x.ndim == 0
    z = x.reshape(1) + _GAMMA if scalar else x + _GAMMA
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    z ^= z >> np.uint64(31)
    return z[0] if scalar else z


def hash_fields(*fields):
    """Chain-hash integers/arrays into a uint64 key (broadcasting)."""
    acc = np.uint64(0)
    for f in fields:
        acc = mix64(np.asarray(acc, dtype=np.uint64) ^ np.asarray(f, dtype=np.uint64))
    return acc


def to_unit(h):
    """uint64 -> float64 in [0, 1)."""
    return (np.asarray(h, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def to_unit_open(h):
    """uint64 -> float64 in (0, 1]; safe as a log() argument."""
    return ((np.asarray(h, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def sample_keys(seed: int, sample_indices) -> np.ndarray:
    """Per-sample root keys."""
    return hash_fields(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), sample_indices)


def tagged_unit(keys, tag: int, counter: int) -> np.ndarray:
    return to_unit(hash_fields(keys, np.uint64(tag), np.uint64(counter)))


def gauss_from_keys(keys) -> np.ndarray:
    """One standard normal per key (Box-Muller, fixed tag pair)."""
    u1 = to_unit_open(hash_fields(keys, np.uint64(TAG_GAUSS), np.uint64(0)))
    u2 = to_unit(hash_fields(keys, np.uint64(TAG_GAUSS), np.uint64(1)))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def miss_plane(keys, warp: int, slot: int, lane: int, plane: int) -> np.ndarray:
    """One 64-bit random word per key for miss decisions.

    A transaction whose granule occupies bit g of lane ``lane`` misses iff
    bit g is set in all ``k`` planes, giving an exact miss probability of
    2**-k per transaction, independent across (warp, slot, granule).
    """
    return hash_fields(
        keys,
        np.uint64(TAG_MISS),
        np.uint64(warp),
        np.uint64(slot),
        np.uint64(lane),
        np.uint64(plane),
    )


def miss_rate_planes(miss_rate: float) -> int | None:
    """Number of bitplanes realising the rate, or None when the rate is 0.

    Only dyadic rates (1, 1/2, 1/4, ...) are representable; they are the
    rates the counter-based scheme can produce exactly.
    """
    if miss_rate == 0:
        return None
    k = round(-math.log2(miss_rate))
    if k < 0 or k > 30 or abs(miss_rate * (1 << k) - 1.0) > 1e-9:
        raise ValueError(f"miss rate must be 0 or 2**-k, got {miss_rate}")
    return k


class SampleRng:
    """Per-kernel randomness handle for the scalar simulator.

    ``random()`` yields the tagged sequential draws used by policy
    resolution; ``gauss()`` the measurement-noise normal; ``miss_word`` the
    keyed bitplane words.  A vectorised caller computing the same tags gets
    the same values, so both simulator paths agree bit for bit.
    """

    def __init__(self, seed: int, sample_index: int):
        self.key = sample_keys(seed, np.uint64(sample_index))
        self._seq = 0

    def random(self) -> float:
        u = float(tagged_unit(self.key, TAG_SEQ, self._seq))
        self._seq += 1
        return u

    def gauss(self) -> float:
        return float(gauss_from_keys(self.key))

    def miss_word(self, warp: int, slot: int, lane: int, plane: int) -> int:
        return int(miss_plane(self.key, warp, slot, lane, plane))

    def transaction_missed(self, warp: int, slot: int, gid: int, planes: int | None) -> bool:
        if planes is None:
            return False
        lane, bit = divmod(gid, 64)
        for p in range(planes):
            if not (self.miss_word(warp, slot, lane, p) >> bit) & 1:
                return False
        return True
