"""Abstract-cycle GPU memory timing model.

One kernel run encrypts a batch of blocks spread over warps (chunks of 32
blocks) that are assigned round-robin to SMs.  Warps execute the 160 table
lookups of a block in lockstep slots; per slot each warp's 32 element
accesses are coalesced into transactions.  Costs are pure accounting, not
pipeline simulation:

* every transaction pays an issue cost plus a per-byte transfer cost,
* a hit adds the hit service time ``h``,
* a miss adds ``m0*h`` plus a fill tail: the enclosing line is fetched at
  subtransaction granularity, one extra beat per remaining part,
* misses on a line already being fetched by the same SM in the same slot
  share the MSHR entry (latency paid, no second fill),
* under hierarchical MSHRs, a miss whose 128-byte L2 line is already in
  flight from an earlier SM in the slot completes with the remaining
  latency of that entry instead of a full miss.

Warp time is the sum of its slot costs, SM time the max over its warps,
kernel time the max over SMs plus launch overhead and Gaussian measurement
noise.  All randomness is counter-based (see ``randomness``), so the scalar
and vectorised paths agree and results are independent of chunking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import aes
from .coalescer import (
    DynamicPerLine,
    Fixed,
    LINE_BYTES,
    Policy,
    coalesce,
    resolve_for_kernel,
)
from .randomness import (
    SampleRng,
    gauss_from_keys,
    hash_fields,
    miss_rate_planes,
    sample_keys,
    tagged_unit,
    TAG_SEQ,
)

N_SLOTS = aes.TOTAL_LOOKUPS
ROWS_PER_TABLE = 16
MAX_PARTS = 8


@dataclass(frozen=True)
class SimConfig:
    num_sms: int = 15
    threads_per_warp: int = 32
    warps_per_sm: int = 2
    l1_line_bytes: int = 64
    l2_line_bytes: int = 128
    mshr_entries_per_sm: int = 32
    unified_mshr_entries: int = 32
    l1_size_bytes: int = 48 * 1024
    l2_size_bytes: int = 768 * 1024

    def __post_init__(self):
        if min(
            self.num_sms,
            self.threads_per_warp,
            self.warps_per_sm,
            self.l1_line_bytes,
            self.l2_line_bytes,
            self.mshr_entries_per_sm,
            self.unified_mshr_entries,
        ) <= 0:
            raise ValueError("all configuration values must be positive")
        if self.l2_line_bytes % self.l1_line_bytes:
            raise ValueError("L2 line must be a multiple of the L1 line")

    @property
    def max_blocks(self) -> int:
        return self.num_sms * self.warps_per_sm * self.threads_per_warp


DEFAULT_CONFIG = SimConfig()


@dataclass(frozen=True)
class TimingParams:
    """Abstract cost constants.

    Defaults are an arbitrary calibration (see the calibrate command for the
    resulting regression table): hit time ``h`` = 1, miss multiplier ``m0`` =
    5, per-transaction issue cost 4.  A transaction's transfer is charged per
    byte of payload (``c_byte``) plus per byte of the minimum burst envelope
    it occupies (``c_burst`` over ``max(width, burst_bytes)``), so narrow
    transactions waste part of a fixed burst; the two rates are calibrated so
    mean kernel time is nearly width-invariant.  ``c_fill`` is the per-beat
    cost of fetching the rest of a missed line at subtransaction granularity.
    ``miss_rate`` injects L1 misses per transaction (tables are treated as
    warm after a warm-up kernel, so the default is 0); only rates of 0 or
    2**-k are representable by the counter-based randomness.
    """

    h: float = 1.0
    m0: float = 5.0
    c_issue: float = 4.0
    c_byte: float = 0.1088
    c_burst: float = 0.0248
    burst_bytes: int = 32
    c_fill: float = 6.0
    t_launch: float = 300.0
    sigma_eps: float = 60.0
    miss_rate: float = 0.0

    def __post_init__(self):
        if self.h <= 0 or self.m0 <= 1 or self.c_issue <= 0 or self.sigma_eps < 0:
            raise ValueError("need h>0, m0>1, c_issue>0, sigma_eps>=0")
        if self.c_byte < 0 or self.c_burst < 0 or self.c_fill < 0:
            raise ValueError("transfer costs must be non-negative")
        if self.burst_bytes <= 0:
            raise ValueError("burst_bytes must be positive")
        miss_rate_planes(self.miss_rate)  # validates

    @property
    def miss_time(self) -> float:
        return self.m0 * self.h

    def transfer_cost(self, width_bytes) -> float:
        """Per-transaction transfer charge for a given width."""
        return self.c_byte * width_bytes + self.c_burst * np.maximum(
            width_bytes, self.burst_bytes
        )


@dataclass(frozen=True)
class MshrTopology:
    """Per-SM MSHR files, optionally backed by a unified second level."""

    mode: str = "per_sm"

    def __post_init__(self):
        if self.mode not in ("per_sm", "hierarchical"):
            raise ValueError("mode must be 'per_sm' or 'hierarchical'")

    @property
    def hierarchical(self) -> bool:
        return self.mode == "hierarchical"


PER_SM = MshrTopology("per_sm")
HIERARCHICAL = MshrTopology("hierarchical")


@dataclass
class TimingSample:
    """One kernel run as the attacker sees it."""

    plaintexts: np.ndarray  # (N, 16) uint8
    ciphertexts: np.ndarray  # (N, 16) uint8
    time: float

    def __post_init__(self):
        if self.plaintexts.shape != self.ciphertexts.shape:
            raise ValueError("plaintext/ciphertext batches must match")

    @property
    def n_blocks(self) -> int:
        return self.plaintexts.shape[0]

    def warp_ciphertexts(self, threads_per_warp: int = 32) -> np.ndarray:
        return self.ciphertexts.reshape(-1, threads_per_warp, 16)


@dataclass
class KernelDiagnostics:
    warp_times: np.ndarray
    total_txns: int = 0
    missed_txns: int = 0
    shared_in_sm: int = 0
    unified_joined: int = 0
    joined_service_sum: float = 0.0
    stall_events: int = 0
    max_inflight: int = 0
    t4_txn_counts: np.ndarray | None = None  # (16,) per final-round byte slot


def _joined_service(rank: int, params: TimingParams) -> float:
    """Remaining latency for a miss merged onto an in-flight L2-line entry.

    Requests reach the unified file one issue beat apart, so the r-th joiner
    sees the entry ``r*c_issue`` into its lifetime; service never drops below
    the hit time and is strictly below a full miss.
    """
    return max(params.h, params.miss_time - params.c_issue * rank)


def _fill_tail(parts: int, params: TimingParams) -> float:
    return (parts - 1) * params.c_fill


# ---------------------------------------------------------------------------
# Scalar reference path
# ---------------------------------------------------------------------------

def simulate_kernel(
    pts,
    key_schedule: aes.KeySchedule,
    tables: aes.TTables = aes.TTABLES,
    layout=None,
    policy: Policy = Fixed(64),
    topology: MshrTopology = PER_SM,
    params: TimingParams | None = None,
    rng: SampleRng | None = None,
    config: SimConfig = DEFAULT_CONFIG,
    collect_diagnostics: bool = False,
):
    """Simulate one kernel run; returns a TimingSample (plus diagnostics on
    request).  ``rng`` must be the per-sample randomness handle."""
    params = params or TimingParams()
    if rng is None:
        rng = SampleRng(0, 0)
    pts = np.ascontiguousarray(pts, dtype=np.uint8)
    if pts.ndim != 2 or pts.shape[1] != aes.BLOCK_BYTES:
        raise ValueError("pts must be (N, 16) uint8")
    n = pts.shape[0]
    if n == 0 or n % config.threads_per_warp or n > config.max_blocks:
        raise ValueError(
            f"batch must be a positive multiple of {config.threads_per_warp} "
            f"blocks, at most {config.max_blocks}"
        )
    if layout is not None and layout.size != 256:
        raise ValueError("layout does not match the 256-element tables")

    kernel_policy = resolve_for_kernel(policy, rng)
    planes = miss_rate_planes(params.miss_rate)
    cts, trace = aes.encrypt_batch(pts, key_schedule, tables, layout)

    n_warps = n // config.threads_per_warp
    warp_time = np.zeros(n_warps)
    diag = KernelDiagnostics(warp_times=warp_time, t4_txn_counts=np.zeros(16, dtype=np.int64))

    for slot in range(N_SLOTS):
        tid = int(aes.SLOT_TABLE_ID[slot])
        base = aes.TABLE_BASE[tid]
        # Coalesce per warp, then decide misses
        warp_txns: list[list] = []
        warp_missed: list[set] = []
        for w in range(n_warps):
            idx = trace[w * config.threads_per_warp : (w + 1) * config.threads_per_warp, slot]
            txns = sorted(coalesce(base + 4 * idx.astype(np.int64), kernel_policy,
                                   memory_bytes=aes.TABLE_REGION_BYTES))
            warp_txns.append(txns)
            missed = set()
            for t in txns:
                row = t.line % ROWS_PER_TABLE
                gid = row * MAX_PARTS + t.sub_index
                if rng.transaction_missed(w, slot, gid, planes):
                    missed.add(t)
            warp_missed.append(missed)
            diag.total_txns += len(txns)
            if slot >= 144:
                diag.t4_txn_counts[slot - 144] += len(txns)

        # Within-SM allocation: first missing transaction on a line owns the
        # MSHR entry and the fill; later ones in the same SM share it.
        alloc: dict[int, list] = {}  # sm -> [(warp, txn)]
        shared: dict[int, int] = {}
        for sm in range(config.num_sms):
            lines_seen: set[int] = set()
            for w in range(sm, n_warps, config.num_sms):
                for t in warp_txns[w]:
                    if t not in warp_missed[w]:
                        continue
                    if t.line in lines_seen:
                        shared[w] = shared.get(w, 0) + 1
                    else:
                        lines_seen.add(t.line)
                        alloc.setdefault(sm, []).append((w, t))
            inflight = min(len(lines_seen), config.mshr_entries_per_sm)
            diag.max_inflight = max(diag.max_inflight, inflight)
            assert inflight <= config.mshr_entries_per_sm
            overflow = len(lines_seen) - config.mshr_entries_per_sm
            if overflow > 0 and sm < n_warps:
                # Allocation stalls until entries free; penalised one miss
                # time per overflowing entry, charged to the SM's first warp.
                diag.stall_events += overflow
                warp_time[sm] += overflow * params.miss_time

        # Unified second level: rank allocating misses per L2 line across SMs
        joined_rank: dict[tuple[int, object], int] = {}
        if topology.hierarchical:
            l2_sms: dict[int, list[int]] = {}
            for sm in sorted(alloc):
                sm_l2 = {t.line * LINE_BYTES // config.l2_line_bytes for _, t in alloc[sm]}
                for l2 in sm_l2:
                    l2_sms.setdefault(l2, []).append(sm)
            for sm in alloc:
                for w, t in alloc[sm]:
                    l2 = t.line * LINE_BYTES // config.l2_line_bytes
                    rank = l2_sms[l2].index(sm)
                    if rank > 0:
                        joined_rank[(w, t)] = rank

        # Cost accounting
        for w in range(n_warps):
            txns = warp_txns[w]
            missed = warp_missed[w]
            cost = params.c_issue * len(txns)
            cost += sum(float(params.transfer_cost(t.width_bytes)) for t in txns)
            cost += params.h * (len(txns) - len(missed))
            warp_time[w] += cost
        for w, count in shared.items():
            warp_time[w] += count * params.miss_time
            diag.shared_in_sm += count
            diag.missed_txns += count
        for sm, entries in alloc.items():
            for w, t in entries:
                diag.missed_txns += 1
                rank = joined_rank.get((w, t))
                if rank is None:
                    parts = LINE_BYTES // t.width_bytes
                    warp_time[w] += params.miss_time + _fill_tail(parts, params)
                else:
                    service = _joined_service(rank, params)
                    warp_time[w] += service
                    diag.unified_joined += 1
                    diag.joined_service_sum += service

    sm_time = np.zeros(config.num_sms)
    for w in range(n_warps):
        sm = w % config.num_sms
        sm_time[sm] = max(sm_time[sm], warp_time[w])
    time = params.t_launch + float(sm_time.max()) + params.sigma_eps * rng.gauss()
    sample = TimingSample(plaintexts=pts, ciphertexts=cts, time=time)
    if collect_diagnostics:
        return sample, diag
    return sample


# ---------------------------------------------------------------------------
# Vectorised batch path
# ---------------------------------------------------------------------------

def _resolve_parts_rows(policy: Policy, keys: np.ndarray) -> np.ndarray:
    """Per-sample subtransaction counts per table row, (S, 16) uint8.

    Consumes the same tagged draws as ``resolve_for_kernel`` on a SampleRng.
    """
    s = keys.shape[0]
    if isinstance(policy, Fixed):
        return np.full((s, ROWS_PER_TABLE), LINE_BYTES // policy.width_bytes, dtype=np.uint8)
    if isinstance(policy, DynamicPerLine):
        return np.tile(np.asarray(policy.r, dtype=np.uint8), (s, 1))
    from .coalescer import DynamicRandom, FixedRandom, R_VALUES, WIDTHS

    if isinstance(policy, FixedRandom):
        cdf = np.cumsum(policy.dist.probs)
        u = tagged_unit(keys, TAG_SEQ, 0)
        widths = np.asarray(WIDTHS, dtype=np.int64)[np.searchsorted(cdf, u, side="right")]
        return (LINE_BYTES // widths).astype(np.uint8)[:, None].repeat(ROWS_PER_TABLE, axis=1)
    if isinstance(policy, DynamicRandom):
        cdf = np.cumsum(policy.r_probs)
        cols = []
        for i in range(ROWS_PER_TABLE):
            u = tagged_unit(keys, TAG_SEQ, i)
            cols.append(np.asarray(R_VALUES, dtype=np.uint8)[np.searchsorted(cdf, u, side="right")])
        return np.stack(cols, axis=1)
    raise TypeError(f"unknown policy {policy!r}")


def simulate_batch(
    pts: np.ndarray,
    key_schedule: aes.KeySchedule,
    tables: aes.TTables = aes.TTABLES,
    layout=None,
    policy: Policy = Fixed(64),
    topology: MshrTopology = PER_SM,
    params: TimingParams | None = None,
    seed: int = 0,
    sample_indices: np.ndarray | None = None,
    config: SimConfig = DEFAULT_CONFIG,
    phys_maps: np.ndarray | None = None,
):
    """Vectorised equivalent of ``simulate_kernel`` over a sample batch.

    ``pts`` is (S, N, 16); returns ``(times, cts, extras)`` where ``cts`` is
    (S, N, 16) and extras carries per-sample transaction statistics.  Agrees
    with the scalar path sample by sample (up to float summation order); the
    heavy inner loop is JIT-compiled (see ``_fastsim``).

    ``phys_maps`` optionally supplies one final-round translation map per
    sample, (S, 256) uint8, overriding ``layout``; campaigns use it to batch
    across rotation epochs.
    """
    from ._fastsim import encrypt_trace_chunk, simulate_chunk

    params = params or TimingParams()
    pts = np.ascontiguousarray(pts, dtype=np.uint8)
    if pts.ndim != 3 or pts.shape[2] != aes.BLOCK_BYTES:
        raise ValueError("pts must be (S, N, 16) uint8")
    s, n = pts.shape[0], pts.shape[1]
    if n == 0 or n % config.threads_per_warp or n > config.max_blocks:
        raise ValueError("invalid batch size")
    n_warps = n // config.threads_per_warp
    if sample_indices is None:
        sample_indices = np.arange(s, dtype=np.uint64)
    keys = sample_keys(seed, np.asarray(sample_indices, dtype=np.uint64))

    parts_rows = _resolve_parts_rows(policy, keys)  # (S, 16)
    planes = miss_rate_planes(params.miss_rate)

    if phys_maps is not None:
        phys_maps = np.ascontiguousarray(phys_maps, dtype=np.uint8)
        if phys_maps.shape != (s, 256):
            raise ValueError("phys_maps must be (S, 256)")
        phys = np.arange(256, dtype=np.uint8)
    elif layout is None:
        phys = np.arange(256, dtype=np.uint8)
    else:
        if layout.size != 256:
            raise ValueError("layout does not match the 256-element tables")
        phys = np.ascontiguousarray(layout.physical_lookup, dtype=np.uint8)
    cts, trace = encrypt_trace_chunk(
        pts.reshape(-1, 16),
        key_schedule.round_words,
        tables.t0,
        tables.t1,
        tables.t2,
        tables.t3,
        (tables.t4 & np.uint32(0xFF)).astype(np.uint8),
        phys,
    )
    cts = cts.reshape(s, n, 16)
    if phys_maps is not None:
        final = trace.reshape(s, n, N_SLOTS)[:, :, 144:]
        final[:] = phys_maps[np.arange(s)[:, None, None], final]
    # slot-major layout so the simulation loop walks contiguous memory
    trace = np.ascontiguousarray(
        trace.reshape(s, n_warps, config.threads_per_warp, N_SLOTS).transpose(0, 3, 1, 2)
    )

    warp_time, t4_counts, total_txns, missed_total, joined_total = simulate_chunk(
        trace,
        parts_rows,
        keys,
        -1 if planes is None else planes,
        topology.hierarchical,
        config.num_sms,
        config.mshr_entries_per_sm,
        params.h,
        params.miss_time,
        params.c_issue,
        params.c_byte,
        params.c_burst,
        float(params.burst_bytes),
        params.c_fill,
    )

    sm_time = np.full((s, config.num_sms), -np.inf)
    for w in range(n_warps):
        sm = w % config.num_sms
        np.maximum(sm_time[:, sm], warp_time[:, w], out=sm_time[:, sm])
    active = np.isfinite(sm_time)
    sm_time = np.where(active, sm_time, 0.0)
    times = params.t_launch + sm_time.max(axis=1) + params.sigma_eps * gauss_from_keys(keys)

    extras = {
        "total_txns": total_txns,
        "t4_txn_counts": t4_counts,
        "missed_txns": missed_total,
        "unified_joined": joined_total,
        "parts_rows": parts_rows,
        "warp_time_mean": warp_time.mean(axis=1),
    }
    return times, cts, extras


# ---------------------------------------------------------------------------
# Microbenchmark: one warp, one load slot, cold array
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MicrobenchPoint:
    n_unique: int
    width_bytes: int
    time: float


MICROBENCH_LINE_STRIDE = 16  # keep every accessed line in the same width-pattern slot


def microbench_addresses(n_unique: int, config: SimConfig = DEFAULT_CONFIG) -> np.ndarray:
    """32 loads over n distinct line-aligned addresses (1 KiB apart)."""
    if not 1 <= n_unique <= config.threads_per_warp:
        raise ValueError("n_unique must lie in [1, 32]")
    i = np.arange(config.threads_per_warp)
    return (i % n_unique) * MICROBENCH_LINE_STRIDE * config.l1_line_bytes


def microbench_kernel_time(
    n_unique: int,
    policy: Policy,
    params: TimingParams,
    rng: SampleRng,
    config: SimConfig = DEFAULT_CONFIG,
) -> MicrobenchPoint:
    """One cold microbenchmark kernel through the scalar cost model.

    The kernel streams a fresh array, so every transaction misses; the rest
    of the accounting is exactly the kernel simulator's.
    """
    kernel_policy = resolve_for_kernel(policy, rng)
    addrs = microbench_addresses(n_unique, config)
    txns = sorted(
        coalesce(addrs, kernel_policy, memory_bytes=int(addrs.max()) + config.l1_line_bytes)
    )
    cost = 0.0
    for t in txns:
        parts = LINE_BYTES // t.width_bytes
        cost += params.c_issue + float(params.transfer_cost(t.width_bytes))
        cost += params.miss_time + _fill_tail(parts, params)
    time = params.t_launch + cost + params.sigma_eps * rng.gauss()
    width = txns[0].width_bytes
    return MicrobenchPoint(n_unique=n_unique, width_bytes=width, time=time)


def run_microbenchmark(
    n_unique: int,
    width_or_policy,
    reps: int,
    params: TimingParams | None = None,
    seed: int = 0,
    config: SimConfig = DEFAULT_CONFIG,
) -> list[MicrobenchPoint]:
    """Repeat the cold one-warp load kernel; vectorised over reps.

    ``width_or_policy`` may be a width in bytes or any coalescing policy.
    Deterministic given (seed, policy, n_unique).
    """
    params = params or TimingParams()
    policy = Fixed(width_or_policy) if isinstance(width_or_policy, int) else width_or_policy
    if not 1 <= n_unique <= config.threads_per_warp:
        raise ValueError("n_unique must lie in [1, 32]")
    sub_seed = int(hash_fields(np.uint64(seed), np.uint64(0x4D42), np.uint64(n_unique)))
    keys = sample_keys(sub_seed, np.arange(reps, dtype=np.uint64))
    parts0 = _resolve_parts_rows(policy, keys)[:, 0].astype(np.float64)
    widths = LINE_BYTES / parts0
    per_line = (
        params.c_issue
        + params.transfer_cost(widths)
        + params.miss_time
        + (parts0 - 1.0) * params.c_fill
    )
    times = params.t_launch + n_unique * per_line + params.sigma_eps * gauss_from_keys(keys)
    return [
        MicrobenchPoint(n_unique=n_unique, width_bytes=int(w), time=float(t))
        for w, t in zip(widths, times)
    ]


def microbench_sweep(
    policy_or_width,
    reps: int,
    params: TimingParams | None = None,
    seed: int = 0,
    config: SimConfig = DEFAULT_CONFIG,
) -> dict[int, list[MicrobenchPoint]]:
    """All points for n = 1..32 under one policy; keyed by n."""
    return {
        n: run_microbenchmark(n, policy_or_width, reps, params, seed, config)
        for n in range(1, config.threads_per_warp + 1)
    }


# ---------------------------------------------------------------------------
# Unified-MSHR merge probability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MergeWorkload:
    """A fixed kernel re-run under fresh randomness to observe merging."""

    pts: np.ndarray
    key_schedule: aes.KeySchedule
    policy: Policy = Fixed(64)
    params: TimingParams = field(default_factory=lambda: TimingParams(miss_rate=0.25))
    layout: object = None
    tables: aes.TTables = aes.TTABLES
    config: SimConfig = DEFAULT_CONFIG


def estimate_p_merge(topology: MshrTopology, workload: MergeWorkload, reps: int, seed: int = 0) -> float:
    """Fraction of L1 misses that complete through an in-flight unified
    entry; exactly 0 without the hierarchical level."""
    if not topology.hierarchical:
        return 0.0
    joined = 0
    missed = 0
    for rep in range(reps):
        _, diag = simulate_kernel(
            workload.pts,
            workload.key_schedule,
            workload.tables,
            workload.layout,
            workload.policy,
            topology,
            workload.params,
            SampleRng(seed, rep),
            workload.config,
            collect_diagnostics=True,
        )
        joined += diag.unified_joined
        missed += diag.missed_txns
    return joined / missed if missed else 0.0
