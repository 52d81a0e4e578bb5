"""Switching-point detection and index computation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchpe.errors import ConfigError, UsageError
from switchpe.switchpoints import (
    EN,
    HI,
    OTHER,
    SPIVariant,
    SPIVector,
    clamp_spi,
    detect_switch_points,
    effective_tags,
    spi,
)

tag_seqs = st.lists(st.sampled_from([HI, EN, OTHER]), min_size=1, max_size=24)


# ---------------------------------------------------------------------------
# effective_tags
# ---------------------------------------------------------------------------


def test_other_inherits_preceding_tag():
    assert effective_tags([HI, OTHER, EN]) == [HI, HI, EN]


def test_leading_other_inherits_first_real_tag():
    assert effective_tags([OTHER, EN]) == [EN, EN]


def test_all_other_falls_back_to_base_language():
    assert effective_tags([OTHER, OTHER]) == [HI, HI]


def test_empty_sequence_rejected():
    with pytest.raises(UsageError):
        effective_tags([])


# ---------------------------------------------------------------------------
# detect_switch_points
# ---------------------------------------------------------------------------


def test_two_changes_detected_in_order():
    points = detect_switch_points([HI, HI, EN, HI])
    assert [(p.position, p.direction) for p in points] == [(2, "HI->EN"), (3, "EN->HI")]


def test_monolingual_has_no_switch_points():
    assert detect_switch_points([HI, HI, HI]) == []


def test_alternating_tags_switch_everywhere():
    points = detect_switch_points([EN, HI, EN, HI])
    assert [(p.position, p.direction) for p in points] == [
        (1, "EN->HI"),
        (2, "HI->EN"),
        (3, "EN->HI"),
    ]


# ---------------------------------------------------------------------------
# spi
# ---------------------------------------------------------------------------


def test_reset_all_restarts_at_every_change():
    assert spi([HI, HI, EN, HI], SPIVariant.RESET_ALL).indices == (0, 1, 0, 0)


def test_base_mixed_restarts_only_on_hi_to_en():
    assert spi([HI, HI, EN, HI], SPIVariant.BASE_MIXED).indices == (0, 1, 0, 1)


@pytest.mark.parametrize("variant", [SPIVariant.RESET_ALL, SPIVariant.BASE_MIXED])
def test_monolingual_counts_plain_positions(variant):
    assert spi([HI, HI, HI, HI], variant).indices == (0, 1, 2, 3)


def test_spi_rejects_unknown_variant():
    with pytest.raises(ConfigError):
        spi([HI, EN], "reset_all")


def test_sentence_starting_in_embedded_language():
    # position 0 is always 0; the later HI->EN change still resets
    assert spi([EN, HI, HI, EN], SPIVariant.BASE_MIXED).indices == (0, 1, 2, 0)


# ---------------------------------------------------------------------------
# clamp_spi
# ---------------------------------------------------------------------------


def test_clamp_caps_at_table_size():
    v = SPIVector(indices=(0, 1, 2, 3), variant=SPIVariant.RESET_ALL)
    assert clamp_spi(v, 3).indices == (0, 1, 2, 2)


def test_clamp_to_one_row_zeroes_everything():
    v = SPIVector(indices=(0, 1, 2, 3), variant=SPIVariant.RESET_ALL)
    assert clamp_spi(v, 1).indices == (0, 0, 0, 0)


def test_clamp_noop_when_cap_is_loose():
    v = SPIVector(indices=(0, 1, 0, 1), variant=SPIVariant.BASE_MIXED)
    assert clamp_spi(v, 64).indices == (0, 1, 0, 1)


def test_clamp_rejects_nonpositive_cap():
    v = SPIVector(indices=(0,), variant=SPIVariant.RESET_ALL)
    with pytest.raises(ConfigError):
        clamp_spi(v, 0)


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(tag_seqs)
def test_variant_lattice(tags):
    reset_all = spi(tags, SPIVariant.RESET_ALL).indices
    base_mixed = spi(tags, SPIVariant.BASE_MIXED).indices
    for i, (a, b) in enumerate(zip(reset_all, base_mixed)):
        assert a <= b <= i


@settings(max_examples=200, deadline=None)
@given(tag_seqs, st.data())
def test_spi_invariant_under_other_resolution(tags, data):
    positions = [i for i, t in enumerate(tags) if t == OTHER]
    if positions:
        pos = data.draw(st.sampled_from(positions))
        replaced = list(tags)
        replaced[pos] = effective_tags(tags)[pos]
    else:
        replaced = tags
    for variant in SPIVariant:
        assert spi(tags, variant).indices == spi(replaced, variant).indices


@settings(max_examples=200, deadline=None)
@given(tag_seqs)
def test_reset_all_zero_count_matches_switch_points(tags):
    indices = spi(tags, SPIVariant.RESET_ALL).indices
    assert sum(1 for i in indices if i == 0) == 1 + len(detect_switch_points(tags))


@settings(max_examples=200, deadline=None)
@given(tag_seqs, st.sampled_from(list(SPIVariant)))
def test_runs_increase_by_one_between_resets(tags, variant):
    indices = spi(tags, variant).indices
    assert indices[0] == 0
    for i in range(1, len(indices)):
        assert indices[i] in (0, indices[i - 1] + 1)


# ---------------------------------------------------------------------------
# naive quadratic reference
# ---------------------------------------------------------------------------


def _naive_effective(tags):
    out = []
    for i in range(len(tags)):
        if tags[i] != OTHER:
            out.append(tags[i])
            continue
        pick = None
        for j in range(i - 1, -1, -1):
            if tags[j] != OTHER:
                pick = tags[j]
                break
        if pick is None:
            for j in range(i + 1, len(tags)):
                if tags[j] != OTHER:
                    pick = tags[j]
                    break
        out.append(pick if pick is not None else HI)
    return out


def _naive_spi(tags, variant):
    eff = _naive_effective(tags)
    resets = {0}
    for i in range(1, len(eff)):
        if eff[i] != eff[i - 1]:
            if variant is SPIVariant.RESET_ALL or (eff[i - 1] == HI and eff[i] == EN):
                resets.add(i)
    out = []
    for i in range(len(eff)):
        for j in range(i, -1, -1):
            if j in resets:
                out.append(i - j)
                break
    return out


def test_matches_naive_reference_on_random_sequences():
    rng = np.random.default_rng(2024)
    alphabet = [HI, EN, OTHER]
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        tags = [alphabet[int(k)] for k in rng.integers(0, 3, size=n)]
        for variant in SPIVariant:
            assert list(spi(tags, variant).indices) == _naive_spi(tags, variant)
