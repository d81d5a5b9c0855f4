"""Column-wise random rotation of a lookup table's cache-line layout.

The table is viewed as ``l`` lines (rows) of ``m`` elements (columns).  One
rotation cyclically shifts each column by its own random offset, relocating
every element to a different line while keeping the contents a permutation of
the original.  Lookups go through ``translate`` so encryption results are
unchanged; only the physical lines touched move around.

Rotation is applied with a scratch copy: shifting columns strictly in place
would overwrite elements before they are read whenever an offset is nonzero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RotationState:
    """Current column offsets for an m-columns-by-l-lines table."""

    m: int = 16
    l: int = 16
    offsets: tuple[int, ...] = tuple(0 for _ in range(16))
    generation: int = 0

    def __post_init__(self):
        if len(self.offsets) != self.m:
            raise ValueError("need one offset per column")
        if any(not (0 <= o < self.l) for o in self.offsets):
            raise ValueError("offsets must lie in [0, l)")

    @property
    def size(self) -> int:
        return self.m * self.l

    @property
    def physical_lookup(self) -> np.ndarray:
        """Array mapping logical element index -> physical element index."""
        logical = np.arange(self.size)
        col = logical % self.m
        row = logical // self.m
        offs = np.asarray(self.offsets)
        return (((row + offs[col]) % self.l) * self.m + col).astype(
            np.uint8 if self.size <= 256 else np.int64
        )


def identity_state(m: int = 16, l: int = 16) -> RotationState:
    return RotationState(m=m, l=l, offsets=tuple(0 for _ in range(m)))


def translate(logical_index: int, state: RotationState) -> int:
    """Logical -> physical element index under the current offsets."""
    if not 0 <= logical_index < state.size:
        raise ValueError(f"index {logical_index} out of range [0, {state.size})")
    col = logical_index % state.m
    row = logical_index // state.m
    return ((row + state.offsets[col]) % state.l) * state.m + col


def apply_shifts(state: RotationState, table: np.ndarray, shifts) -> tuple[RotationState, np.ndarray]:
    """Shift column i down by shifts[i] lines (deterministic core of rotate).

    Offsets compose modulo l, so the state always maps original logical
    indices to the table's current physical layout.
    """
    shifts = tuple(int(s) % state.l for s in shifts)
    if len(shifts) != state.m:
        raise ValueError("need one shift per column")
    table = np.asarray(table)
    if table.shape[0] != state.size:
        raise ValueError(f"table must have {state.size} elements")
    grid = table.reshape(state.l, state.m)
    out = np.empty_like(grid)
    for col, s in enumerate(shifts):
        out[:, col] = np.roll(grid[:, col], s)
    new_offsets = tuple((o + s) % state.l for o, s in zip(state.offsets, shifts))
    new_state = RotationState(
        m=state.m, l=state.l, offsets=new_offsets, generation=state.generation + 1
    )
    return new_state, out.reshape(table.shape)


def draw_shifts(state: RotationState, rng, unique: bool = True) -> tuple[int, ...]:
    """Fresh per-column shifts in [0, l).

    With ``unique`` (the default, valid when m <= l) the m shifts are sampled
    without replacement, spreading the columns as far apart as the layout
    allows; otherwise they are independent draws.
    """
    if unique:
        if state.m > state.l:
            raise ValueError("unique shifts need m <= l")
        return tuple(int(v) for v in rng.permutation(state.l)[: state.m])
    return tuple(int(rng.integers(0, state.l)) for _ in range(state.m))


def rotate(state: RotationState, table: np.ndarray, rng, unique: bool = True):
    """Draw fresh shifts and apply them; returns (new_state, new_table)."""
    return apply_shifts(state, table, draw_shifts(state, rng, unique=unique))


@dataclass(frozen=True)
class RotationSchedule:
    """Rotate once every ``rotate_every`` encrypted samples; None disables."""

    rotate_every: int | None = None

    def __post_init__(self):
        if self.rotate_every is not None and self.rotate_every < 1:
            raise ValueError("rotate_every must be >= 1 when enabled")

    @property
    def enabled(self) -> bool:
        return self.rotate_every is not None


def should_rotate(sample_counter: int, schedule: RotationSchedule) -> bool:
    if not schedule.enabled:
        return False
    return sample_counter % schedule.rotate_every == 0
