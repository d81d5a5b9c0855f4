"""JIT-compiled inner loop for batch kernel simulation.

This mirrors ``simulate_kernel``'s per-slot accounting step for step; the
test suite pins the two paths against each other.  Hash-based randomness is
re-implemented here bit-for-bit (same splitmix64 chain) so miss decisions
agree with ``randomness.SampleRng``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TAG_MISS = np.uint64(0x4D15)

_POPCNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


@njit(cache=True, inline="always")
def _mix64(x):
    z = x + _GAMMA
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _miss_word(key, warp, slot, lane, plane):
    acc = _mix64(np.uint64(0) ^ key)
    acc = _mix64(acc ^ _TAG_MISS)
    acc = _mix64(acc ^ np.uint64(warp))
    acc = _mix64(acc ^ np.uint64(slot))
    acc = _mix64(acc ^ np.uint64(lane))
    return _mix64(acc ^ np.uint64(plane))


@njit(cache=True, inline="always")
def _popcount64(x):
    c = 0
    for b in range(8):
        c += _POPCNT8[(x >> np.uint64(8 * b)) & np.uint64(0xFF)]
    return c


@njit(cache=True, nogil=True)
def encrypt_trace_chunk(pts, rk, t0, t1, t2, t3, sbox, phys):
    """Word-table encryption of (B, 16) blocks with per-lookup tracing.

    ``rk`` is the (11, 4) uint32 round-key word matrix, ``phys`` the 256-entry
    logical-to-physical map for the final-round table (identity when no
    rotation is active).  Returns (cts, trace) with trace (B, 160) uint8 in
    slot order; matches ``aes.encrypt_batch`` exactly.
    """
    b_n = pts.shape[0]
    cts = np.empty((b_n, 16), dtype=np.uint8)
    trace = np.empty((b_n, 160), dtype=np.uint8)
    w = np.empty(4, dtype=np.uint32)
    nxt = np.empty(4, dtype=np.uint32)
    for b in range(b_n):
        for i in range(4):
            w[i] = (
                (np.uint32(pts[b, 4 * i]) << np.uint32(24))
                | (np.uint32(pts[b, 4 * i + 1]) << np.uint32(16))
                | (np.uint32(pts[b, 4 * i + 2]) << np.uint32(8))
                | np.uint32(pts[b, 4 * i + 3])
            ) ^ rk[0, i]
        for rnd in range(1, 10):
            for i in range(4):
                acc = rk[rnd, i]
                idx = (w[i] >> np.uint32(24)) & np.uint32(0xFF)
                acc ^= t0[idx]
                trace[b, (rnd - 1) * 16 + 4 * i] = idx
                idx = (w[(i + 1) & 3] >> np.uint32(16)) & np.uint32(0xFF)
                acc ^= t1[idx]
                trace[b, (rnd - 1) * 16 + 4 * i + 1] = idx
                idx = (w[(i + 2) & 3] >> np.uint32(8)) & np.uint32(0xFF)
                acc ^= t2[idx]
                trace[b, (rnd - 1) * 16 + 4 * i + 2] = idx
                idx = w[(i + 3) & 3] & np.uint32(0xFF)
                acc ^= t3[idx]
                trace[b, (rnd - 1) * 16 + 4 * i + 3] = idx
                nxt[i] = acc
            for i in range(4):
                w[i] = nxt[i]
        for i in range(4):
            k10_0 = rk[10, i]
            for tap in range(4):
                shift = np.uint32(24 - 8 * tap)
                idx = (w[(i + tap) & 3] >> shift) & np.uint32(0xFF)
                pos = 4 * i + tap
                kb = (k10_0 >> np.uint32(24 - 8 * tap)) & np.uint32(0xFF)
                cts[b, pos] = sbox[idx] ^ np.uint8(kb)
                trace[b, 144 + pos] = phys[idx]
    return cts, trace


@njit(cache=True, nogil=True)
def guess_count_stats(cts, times, bit_lut, popc16, sum_c, sum_cc, sum_ct):
    """Accumulate distinguisher statistics for all byte positions and guesses.

    ``cts`` is (S, N, 16); ``bit_lut[g, c]`` holds the 16-bit line mask bit
    for ciphertext byte c under guess g.  Updates the (16, 256) sums of the
    per-sample predicted counts, their squares, and their products with the
    times, in place.
    """
    s_n, n_blocks, _ = cts.shape
    n_warps = n_blocks // 32
    for s in range(s_n):
        t = times[s]
        for j in range(16):
            for g in range(256):
                count = 0
                for w in range(n_warps):
                    mask = np.uint16(0)
                    base = w * 32
                    for th in range(32):
                        mask |= bit_lut[g, cts[s, base + th, j]]
                    count += popc16[mask]
                c = np.float64(count)
                sum_c[j, g] += c
                sum_cc[j, g] += c * c
                sum_ct[j, g] += c * t


@njit(cache=True, nogil=True)
def simulate_chunk(
    trace,  # (S, 160, W, 32) uint8 element indices, slot-major
    parts_rows,  # (S, 16) uint8 subtransaction counts per table row
    keys,  # (S,) uint64 per-sample randomness keys
    planes,  # miss bitplanes; -1 disables misses, 0 means always miss
    hierarchical,  # bool: unified second-level MSHRs
    num_sms,
    mshr_capacity,
    h,
    m0h,
    c_issue,
    c_byte,
    c_burst,
    burst_bytes,
    c_fill,
):
    s_n, n_slots, n_warps, n_threads = trace.shape
    warp_time = np.zeros((s_n, n_warps))
    t4_counts = np.zeros((s_n, 16), dtype=np.int32)
    total_txns = np.zeros(s_n, dtype=np.int64)
    missed_total = np.zeros(s_n, dtype=np.int64)
    joined_total = np.zeros(s_n, dtype=np.int64)

    low = np.zeros(n_warps, dtype=np.uint64)
    high = np.zeros(n_warps, dtype=np.uint64)
    miss_lo = np.zeros(n_warps, dtype=np.uint64)
    miss_hi = np.zeros(n_warps, dtype=np.uint64)
    transfer = np.zeros(16)
    tail = np.zeros(16)
    seen = np.zeros((num_sms, 16), dtype=np.uint8)
    alloc_line = np.zeros((n_warps, 16), dtype=np.uint8)
    l2_rank = np.zeros(8, dtype=np.int32)

    for s in range(s_n):
        key = keys[s]
        parts = parts_rows[s]
        uniform = True
        for r in range(16):
            width = 64.0 / parts[r]
            envelope = width if width > burst_bytes else burst_bytes
            transfer[r] = c_byte * width + c_burst * envelope
            tail[r] = (parts[r] - 1.0) * c_fill
            if parts[r] != parts[0]:
                uniform = False

        for slot in range(n_slots):
            slot_txns = 0
            for w in range(n_warps):
                lo = np.uint64(0)
                hi = np.uint64(0)
                for t in range(n_threads):
                    idx = trace[s, slot, w, t]
                    r = idx >> 4
                    g = r * 8 + (((idx & 15) * parts[r]) >> 4)
                    if g < 64:
                        lo |= np.uint64(1) << np.uint64(g)
                    else:
                        hi |= np.uint64(1) << np.uint64(g - 64)
                low[w] = lo
                high[w] = hi
                tc = _popcount64(lo) + _popcount64(hi)
                if uniform:
                    moved = tc * transfer[0]
                else:
                    moved = 0.0
                    for r in range(8):
                        moved += transfer[r] * _POPCNT8[(lo >> np.uint64(8 * r)) & np.uint64(0xFF)]
                        moved += transfer[r + 8] * _POPCNT8[(hi >> np.uint64(8 * r)) & np.uint64(0xFF)]
                base = c_issue * tc + moved
                if planes < 0:
                    base += h * tc
                warp_time[s, w] += base
                slot_txns += tc
            total_txns[s] += slot_txns
            if slot >= 144:
                t4_counts[s, slot - 144] = slot_txns
            if planes < 0:
                continue

            # Miss decisions: granule bit set in all `planes` random words
            for w in range(n_warps):
                mlo = low[w]
                mhi = high[w]
                for p in range(planes):
                    mlo &= _miss_word(key, w, slot, 0, p)
                    mhi &= _miss_word(key, w, slot, 1, p)
                miss_lo[w] = mlo
                miss_hi[w] = mhi
                mc = _popcount64(mlo) + _popcount64(mhi)
                tc = _popcount64(low[w]) + _popcount64(high[w])
                warp_time[s, w] += h * (tc - mc) + m0h * mc
                missed_total[s] += mc

            # Within-SM allocation: lowest-index warp owns a missed line
            for sm in range(num_sms):
                for r in range(16):
                    seen[sm, r] = 0
            for w in range(n_warps):
                sm = w % num_sms
                inflight = 0
                for r in range(16):
                    if r < 8:
                        mrow = (miss_lo[w] >> np.uint64(8 * r)) & np.uint64(0xFF)
                    else:
                        mrow = (miss_hi[w] >> np.uint64(8 * (r - 8))) & np.uint64(0xFF)
                    if mrow != 0 and seen[sm, r] == 0:
                        seen[sm, r] = 1
                        alloc_line[w, r] = 1
                        warp_time[s, w] += tail[r]
                    else:
                        alloc_line[w, r] = 0
                for r in range(16):
                    inflight += seen[sm, r]
                if inflight > mshr_capacity:
                    raise AssertionError("per-SM MSHR occupancy exceeded")

            if hierarchical and num_sms > 1 and n_warps > 1:
                # Rank allocating SMs per 128-byte L2 line (row pairs)
                for l2 in range(8):
                    l2_rank[l2] = 0
                for sm in range(num_sms):
                    for l2 in range(8):
                        if seen[sm, 2 * l2] or seen[sm, 2 * l2 + 1]:
                            rank = l2_rank[l2]
                            l2_rank[l2] += 1
                            if rank > 0:
                                service = m0h - c_issue * rank
                                if service < h:
                                    service = h
                                # apply to the SM's allocating warps on the line
                                for w in range(sm, n_warps, num_sms):
                                    for r in range(2 * l2, 2 * l2 + 2):
                                        if alloc_line[w, r]:
                                            warp_time[s, w] += service - m0h - tail[r]
                                            joined_total[s] += 1

    return warp_time, t4_counts, total_txns, missed_total, joined_total
