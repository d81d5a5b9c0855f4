"""AES-128 with word-oriented lookup tables plus an independent reference path.

Two encryption paths are kept deliberately separate:

* ``reference_encrypt_block`` / ``reference_encrypt_batch`` implement the
  textbook state-matrix algorithm (SubBytes, ShiftRows, MixColumns) straight
  from GF(2^8) arithmetic.  They exist purely as an oracle for tests and never
  touch the lookup tables.
* ``encrypt_block`` / ``encrypt_batch`` implement the word-table form used by
  GPU kernels (four 256x32-bit round tables plus a replicated-S-box table for
  the final round) and additionally record which table elements each lookup
  touched.  That access trace is what the memory simulator consumes.

The final-round table stores the S-box byte replicated into all four byte
lanes, so its per-byte substitution is invertible; the inverse byte table is
what the attacker uses to map a ciphertext byte back to a table index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BLOCK_BYTES = 16
NUM_ROUNDS = 10
LOOKUPS_PER_ROUND = 16
TOTAL_LOOKUPS = NUM_ROUNDS * LOOKUPS_PER_ROUND  # 144 inner-round + 16 final


# ---------------------------------------------------------------------------
# GF(2^8) arithmetic and the S-box, computed rather than pasted.
# ---------------------------------------------------------------------------

def gf_mul(a: int, b: int) -> int:
    """Carry-less multiply modulo the AES polynomial x^8+x^4+x^3+x+1."""
    res = 0
    for _ in range(8):
        if b & 1:
            res ^= a
        hi = a & 0x80
        a = (a << 1) & 0xFF
        if hi:
            a ^= 0x1B
        b >>= 1
    return res


def _gf_inv(a: int) -> int:
    if a == 0:
        return 0
    # a^254 = a^-1 in GF(2^8)
    result = 1
    power = a
    exponent = 254
    while exponent:
        if exponent & 1:
            result = gf_mul(result, power)
        power = gf_mul(power, power)
        exponent >>= 1
    return result


def _affine(b: int) -> int:
    result = 0
    for i in range(8):
        bit = (
            ((b >> i) & 1)
            ^ ((b >> ((i + 4) % 8)) & 1)
            ^ ((b >> ((i + 5) % 8)) & 1)
            ^ ((b >> ((i + 6) % 8)) & 1)
            ^ ((b >> ((i + 7) % 8)) & 1)
            ^ ((0x63 >> i) & 1)
        )
        result |= bit << i
    return result


SBOX = np.array([_affine(_gf_inv(x)) for x in range(256)], dtype=np.uint8)
INV_SBOX = np.zeros(256, dtype=np.uint8)
INV_SBOX[SBOX] = np.arange(256, dtype=np.uint8)

_RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36)


# ---------------------------------------------------------------------------
# Lookup tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TTables:
    """Word tables for rounds 1..9 (t0..t3) and the final round (t4).

    ``inv_t4_byte`` inverts the byte substitution embodied by t4: composing
    it with the t4 byte map is the identity.
    """

    t0: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    t3: np.ndarray
    t4: np.ndarray
    inv_t4_byte: np.ndarray

    def round_table(self, tap: int) -> np.ndarray:
        return (self.t0, self.t1, self.t2, self.t3)[tap]


def make_ttables() -> TTables:
    s = SBOX.astype(np.uint32)
    s2 = np.array([gf_mul(int(x), 2) for x in SBOX], dtype=np.uint32)
    s3 = s ^ s2
    t0 = (s2 << 24) | (s << 16) | (s << 8) | s3
    t1 = (s3 << 24) | (s2 << 16) | (s << 8) | s
    t2 = (s << 24) | (s3 << 16) | (s2 << 8) | s
    t3 = (s << 24) | (s << 16) | (s3 << 8) | s2
    t4 = s * np.uint32(0x01010101)
    return TTables(t0=t0, t1=t1, t2=t2, t3=t3, t4=t4, inv_t4_byte=INV_SBOX.copy())


TTABLES = make_ttables()

# Byte offsets of the five tables inside one contiguous memory region, each
# table being 256 4-byte words (1 KiB).
TABLE_BYTES = 1024
TABLE_BASE = tuple(i * TABLE_BYTES for i in range(5))
TABLE_REGION_BYTES = 5 * TABLE_BYTES


# ---------------------------------------------------------------------------
# Key schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KeySchedule:
    """Expanded AES-128 key: 11 round keys of 16 bytes, round 0 == master."""

    master: bytes
    round_keys: np.ndarray  # (11, 16) uint8

    @property
    def round_words(self) -> np.ndarray:
        """Round keys as (11, 4) big-endian 32-bit words."""
        return self.round_keys.reshape(11, 4, 4).astype(np.uint32) @ np.array(
            [1 << 24, 1 << 16, 1 << 8, 1], dtype=np.uint32
        )


def _schedule_core(word: list[int], rcon: int) -> list[int]:
    rotated = word[1:] + word[:1]
    substituted = [int(SBOX[b]) for b in rotated]
    substituted[0] ^= rcon
    return substituted


def expand_key(master: bytes) -> KeySchedule:
    """Standard AES-128 expansion to 11 round keys (176 bytes)."""
    if len(master) != BLOCK_BYTES:
        raise ValueError(f"master key must be 16 bytes, got {len(master)}")
    words = [list(master[4 * i : 4 * i + 4]) for i in range(4)]
    for i in range(4, 44):
        temp = list(words[i - 1])
        if i % 4 == 0:
            temp = _schedule_core(temp, _RCON[i // 4 - 1])
        words.append([words[i - 4][j] ^ temp[j] for j in range(4)])
    flat = [b for w in words for b in w]
    round_keys = np.array(flat, dtype=np.uint8).reshape(11, 16)
    return KeySchedule(master=bytes(master), round_keys=round_keys)


def invert_schedule(round10_key: bytes) -> bytes:
    """Recover the master key from the final round key by walking the
    expansion backwards."""
    if len(round10_key) != BLOCK_BYTES:
        raise ValueError("round-10 key must be 16 bytes")
    words: dict[int, list[int]] = {}
    for i in range(4):
        words[40 + i] = list(round10_key[4 * i : 4 * i + 4])
    for i in range(43, 3, -1):
        prev = words[i - 1]
        temp = _schedule_core(prev, _RCON[i // 4 - 1]) if i % 4 == 0 else prev
        words[i - 4] = [words[i][j] ^ temp[j] for j in range(4)]
    master = bytes(b for i in range(4) for b in words[i])
    return master


# ---------------------------------------------------------------------------
# Reference implementation (the oracle)
# ---------------------------------------------------------------------------

def _shift_rows(state: np.ndarray) -> np.ndarray:
    # state is (4, 4) with state[r, c] = byte at row r, column c
    out = state.copy()
    for r in range(1, 4):
        out[r] = np.roll(state[r], -r)
    return out


_MIX = np.array(
    [[2, 3, 1, 1], [1, 2, 3, 1], [1, 1, 2, 3], [3, 1, 1, 2]], dtype=np.uint8
)
_GMUL2 = np.array([gf_mul(x, 2) for x in range(256)], dtype=np.uint8)
_GMUL3 = np.array([gf_mul(x, 3) for x in range(256)], dtype=np.uint8)


def _mix_columns(state: np.ndarray) -> np.ndarray:
    a0, a1, a2, a3 = state[0], state[1], state[2], state[3]
    return np.stack(
        [
            _GMUL2[a0] ^ _GMUL3[a1] ^ a2 ^ a3,
            a0 ^ _GMUL2[a1] ^ _GMUL3[a2] ^ a3,
            a0 ^ a1 ^ _GMUL2[a2] ^ _GMUL3[a3],
            _GMUL3[a0] ^ a1 ^ a2 ^ _GMUL2[a3],
        ]
    )


def reference_encrypt_batch(pts: np.ndarray, ks: KeySchedule) -> np.ndarray:
    """Textbook AES-128 over a (N, 16) uint8 batch; used only as an oracle."""
    pts = np.asarray(pts, dtype=np.uint8)
    squeeze = pts.ndim == 1
    if squeeze:
        pts = pts[None, :]
    # FIPS state layout: column-major, state[r, c] = input[r + 4c]
    state = pts.reshape(-1, 4, 4).transpose(0, 2, 1)
    rks = ks.round_keys.reshape(11, 4, 4).transpose(0, 2, 1)
    state = state ^ rks[0]
    for rnd in range(1, 10):
        state = SBOX[state]
        state = np.stack([np.roll(state[:, r, :], -r, axis=1) for r in range(4)], axis=1)
        state = _mix_columns(state.transpose(1, 0, 2)).transpose(1, 0, 2)
        state = state ^ rks[rnd]
    state = SBOX[state]
    state = np.stack([np.roll(state[:, r, :], -r, axis=1) for r in range(4)], axis=1)
    state = state ^ rks[10]
    out = state.transpose(0, 2, 1).reshape(-1, 16)
    return out[0] if squeeze else out


def reference_encrypt_block(pt: bytes, ks: KeySchedule) -> bytes:
    return bytes(reference_encrypt_batch(np.frombuffer(bytes(pt), dtype=np.uint8), ks))


# ---------------------------------------------------------------------------
# Table path with access tracing
# ---------------------------------------------------------------------------

# Static slot metadata: 160 table lookups per block, in issue order.
# Rounds 1..9 contribute 16 lookups each (word i, tap t -> table t), the
# final round contributes 16 lookups into t4, slot 144+j feeding ciphertext
# byte j.
SLOT_TABLE_ID = np.array(
    [tap for _ in range(9) for _ in range(4) for tap in range(4)] + [4] * 16,
    dtype=np.int8,
)
SLOT_ROUND = np.array(
    [rnd for rnd in range(1, 10) for _ in range(16)] + [10] * 16, dtype=np.int8
)


@dataclass
class AccessTrace:
    """Per-block table accesses: one (table_id, element index) per lookup."""

    rounds: list[list[tuple[int, int]]]  # rounds[0] is round 1, ..., rounds[9] is round 10

    def round10_indices(self) -> list[int]:
        return [idx for _, idx in self.rounds[9]]

    def flat(self) -> list[tuple[int, int]]:
        return [entry for rnd in self.rounds for entry in rnd]


def _byte(word: int, pos: int) -> int:
    """Big-endian byte extraction: pos 0 is the most significant byte."""
    return (word >> (24 - 8 * pos)) & 0xFF


def encrypt_block(pt, ks: KeySchedule, tables: TTables = TTABLES, layout=None):
    """Encrypt one block through the word tables, recording the trace.

    ``layout`` optionally remaps final-round table elements (a rotation
    state); the trace then records the physical element actually touched
    while the ciphertext is unchanged.  Returns ``(ciphertext, trace)``.
    """
    pt = bytes(pt)
    if len(pt) != BLOCK_BYTES:
        raise ValueError("plaintext block must be 16 bytes")
    rk = [[int(w) for w in row] for row in ks.round_words]
    w = [int.from_bytes(pt[4 * i : 4 * i + 4], "big") ^ rk[0][i] for i in range(4)]
    phys = None if layout is None else layout.physical_lookup
    rounds: list[list[tuple[int, int]]] = []
    for rnd in range(1, 10):
        accesses: list[tuple[int, int]] = []
        nxt = []
        for i in range(4):
            acc = rk[rnd][i]
            for tap in range(4):
                idx = _byte(w[(i + tap) % 4], tap)
                acc ^= int(tables.round_table(tap)[idx])
                accesses.append((tap, idx))
            nxt.append(acc)
        w = nxt
        rounds.append(accesses)
    accesses = []
    ct = bytearray(16)
    k10 = ks.round_keys[10]
    for i in range(4):
        for tap in range(4):
            idx = _byte(w[(i + tap) % 4], tap)
            pos = 4 * i + tap
            ct[pos] = int(tables.t4[idx]) & 0xFF ^ int(k10[pos])
            accesses.append((4, idx if phys is None else int(phys[idx])))
    rounds.append(accesses)
    return bytes(ct), AccessTrace(rounds=rounds)


def encrypt_batch(pts: np.ndarray, ks: KeySchedule, tables: TTables = TTABLES, layout=None):
    """Vectorised table-path encryption.

    Returns ``(cts, trace)`` where ``cts`` is (N, 16) uint8 and ``trace`` is
    (N, 160) uint8 element indices in slot order (``SLOT_TABLE_ID`` gives the
    table each slot touches).  Final-round entries are physical indices when
    a layout is supplied.
    """
    pts = np.ascontiguousarray(pts, dtype=np.uint8)
    if pts.ndim != 2 or pts.shape[1] != BLOCK_BYTES:
        raise ValueError("pts must be (N, 16) uint8")
    n = pts.shape[0]
    rk = ks.round_words
    words = pts.reshape(n, 4, 4).astype(np.uint32) @ np.array(
        [1 << 24, 1 << 16, 1 << 8, 1], dtype=np.uint32
    )
    words ^= rk[0]
    trace = np.empty((n, TOTAL_LOOKUPS), dtype=np.uint8)
    shifts = np.array([24, 16, 8, 0], dtype=np.uint32)
    for rnd in range(1, 10):
        nxt = np.empty_like(words)
        for i in range(4):
            acc = np.full(n, rk[rnd][i], dtype=np.uint32)
            for tap in range(4):
                idx = ((words[:, (i + tap) % 4] >> shifts[tap]) & 0xFF).astype(np.uint8)
                acc ^= tables.round_table(tap)[idx]
                trace[:, (rnd - 1) * 16 + 4 * i + tap] = idx
            nxt[:, i] = acc
        words = nxt
    cts = np.empty((n, 16), dtype=np.uint8)
    k10 = ks.round_keys[10]
    for i in range(4):
        for tap in range(4):
            idx = ((words[:, (i + tap) % 4] >> shifts[tap]) & 0xFF).astype(np.uint8)
            pos = 4 * i + tap
            cts[:, pos] = SBOX[idx] ^ k10[pos]
            trace[:, 144 + pos] = idx
    if layout is not None:
        trace[:, 144:] = layout.physical_lookup[trace[:, 144:]]
    return cts, trace


# ---------------------------------------------------------------------------
# Attacker-side index recovery
# ---------------------------------------------------------------------------

def last_round_index(ct_byte: int, key_guess: int, inv: np.ndarray = INV_SBOX) -> int:
    """Index the final-round table was read at, assuming ``key_guess`` is the
    final-round key byte for this ciphertext position."""
    return int(inv[(ct_byte ^ key_guess) & 0xFF])


def last_round_indices(ct_bytes: np.ndarray, key_guess: int, inv: np.ndarray = INV_SBOX) -> np.ndarray:
    """Vectorised ``last_round_index`` over any-shaped uint8 array."""
    return inv[np.bitwise_xor(np.asarray(ct_bytes, dtype=np.uint8), np.uint8(key_guess))]
