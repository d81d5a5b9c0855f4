"""Column rotation: permutation safety, translation, scheduling."""

import numpy as np
import pytest

from coalsim import aes, rotation


def test_zero_shifts_leave_table_but_bump_generation():
    state = rotation.identity_state()
    table = aes.TTABLES.t4.copy()
    new_state, new_table = rotation.apply_shifts(state, table, (0,) * 16)
    assert np.array_equal(new_table, table)
    assert new_state.generation == 1
    assert new_state.offsets == state.offsets


def test_figure_worked_example_rows_touched_drop():
    # 16-element table, 4 elements per line, 4 lines; seven accesses touch
    # four distinct lines.  Shifting columns by (2, 3, 0, 1) re-maps them
    # onto three.
    state = rotation.identity_state(m=4, l=4)
    accesses = [0, 4, 1, 13, 2, 7, 11]  # (column, row): (0,0),(0,1),(1,0),(1,3),(2,0),(3,1),(3,2)
    rows_before = {idx // 4 for idx in accesses}
    assert len(rows_before) == 4
    shifted, _ = rotation.apply_shifts(state, np.arange(16), (2, 3, 0, 1))
    rows_after = {rotation.translate(idx, shifted) // 4 for idx in accesses}
    assert len(rows_after) == 3


def test_full_cycle_restores_layout():
    state = rotation.identity_state()
    table = aes.TTABLES.t4.copy()
    for _ in range(16):
        state, table = rotation.apply_shifts(state, table, (1,) * 16)
    assert np.array_equal(table, aes.TTABLES.t4)
    assert state.offsets == (0,) * 16
    assert state.generation == 16


def test_translate_examples_and_bijection():
    state = rotation.identity_state()
    assert rotation.translate(0, state) == 0
    assert rotation.translate(255, state) == 255
    shifted = rotation.RotationState(offsets=(1,) + (0,) * 15)
    assert rotation.translate(0, shifted) == 16
    rng = np.random.default_rng(0)
    random_state = rotation.RotationState(offsets=tuple(rng.integers(0, 16, 16)))
    images = {rotation.translate(i, random_state) for i in range(256)}
    assert images == set(range(256))
    with pytest.raises(ValueError):
        rotation.translate(256, state)


def test_rotation_sequence_preserves_multiset():
    rng = np.random.default_rng(42)
    state = rotation.identity_state()
    table = aes.TTABLES.t4.copy()
    reference = np.sort(aes.TTABLES.t4)
    for _ in range(1000):
        state, table = rotation.rotate(state, table, rng)
    assert np.array_equal(np.sort(table), reference)
    phys = state.physical_lookup
    assert len(set(phys.tolist())) == 256
    # offsets compose: the state maps logical content onto the current table
    assert np.array_equal(table[phys], aes.TTABLES.t4)


def test_unique_shifts_are_pairwise_distinct():
    rng = np.random.default_rng(3)
    state = rotation.identity_state()
    for _ in range(50):
        shifts = rotation.draw_shifts(state, rng, unique=True)
        assert len(set(shifts)) == 16


def test_with_replacement_mode_available():
    rng = np.random.default_rng(4)
    shifts = rotation.draw_shifts(rotation.identity_state(), rng, unique=False)
    assert len(shifts) == 16 and all(0 <= s < 16 for s in shifts)


def test_unique_requires_enough_lines():
    state = rotation.RotationState(m=4, l=2, offsets=(0, 0, 0, 0))
    with pytest.raises(ValueError):
        rotation.draw_shifts(state, np.random.default_rng(0), unique=True)


def test_should_rotate_schedule():
    every = rotation.RotationSchedule(rotate_every=1)
    assert all(rotation.should_rotate(i, every) for i in range(10))
    thousand = rotation.RotationSchedule(rotate_every=1000)
    assert not rotation.should_rotate(999, thousand)
    assert rotation.should_rotate(1000, thousand)
    assert not rotation.should_rotate(1001, thousand)
    off = rotation.RotationSchedule(rotate_every=None)
    assert not any(rotation.should_rotate(i, off) for i in (0, 1, 1000))
    with pytest.raises(ValueError):
        rotation.RotationSchedule(rotate_every=0)


def test_state_validation():
    with pytest.raises(ValueError):
        rotation.RotationState(offsets=(0,) * 15)
    with pytest.raises(ValueError):
        rotation.RotationState(offsets=(16,) + (0,) * 15)


def test_rotation_decorrelates_predicted_line_counts():
    # With a fresh layout per sample, the attacker's logical line count only
    # sometimes matches the physical count, and the match probability drops
    # from 1 as soon as a rotation is applied.
    rng = np.random.default_rng(11)
    state = rotation.identity_state()
    match_fractions = []
    for generation in range(3):
        phys = state.physical_lookup
        matches = 0
        trials = 400
        for _ in range(trials):
            logical = rng.integers(0, 256, 32)
            n = len({int(v) >> 4 for v in logical})
            o = len({int(phys[v]) >> 4 for v in logical})
            matches += n == o
        match_fractions.append(matches / trials)
        state, _ = rotation.rotate(state, aes.TTABLES.t4.copy(), rng)
    assert match_fractions[0] == 1.0
    assert match_fractions[1] < 1.0
    assert match_fractions[2] < 1.0
