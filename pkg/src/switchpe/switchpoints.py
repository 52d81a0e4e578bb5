"""Switching-point detection and switching-point index computation.

A switching point is a token position where the language changes relative to
the previous token. The switching-point index replaces plain positional
counting with one that restarts at such boundaries: under RESET_ALL it
restarts at every boundary, under BASE_MIXED only when the base language
hands over to the embedded one (HI to EN). OTHER-tagged tokens (hashtags,
punctuation, names) inherit the language of their context so they never
manufacture boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError, UsageError

HI = "HI"
EN = "EN"
OTHER = "OTHER"

BASE_LANGUAGE = HI


class SPIVariant(Enum):
    """How switching points interact with positional counting."""

    RESET_ALL = "reset_all"        # restart at every language change
    BASE_MIXED = "base_mixed"      # restart only on HI -> EN changes


@dataclass(frozen=True)
class SwitchPoint:
    """A language change; position is the second token of the changing bigram."""

    position: int
    direction: str  # "HI->EN" or "EN->HI"


@dataclass(frozen=True)
class SPIVector:
    indices: tuple
    variant: SPIVariant


def effective_tags(tags):
    """Resolve OTHER tags to a binary HI/EN sequence.

    Each OTHER inherits the nearest preceding non-OTHER tag; a leading run of
    OTHERs inherits the first non-OTHER tag; a sentence of only OTHERs falls
    back to the base language.
    """
    tags = list(tags)
    if not tags:
        raise UsageError("effective_tags requires a non-empty tag sequence")
    first_real = next((t for t in tags if t != OTHER), BASE_LANGUAGE)
    out = []
    current = first_real
    for t in tags:
        if t != OTHER:
            current = t
        out.append(current)
    return out


def detect_switch_points(tags):
    """List the language changes in order, after OTHER resolution."""
    eff = effective_tags(tags)
    points = []
    for i in range(1, len(eff)):
        if eff[i] != eff[i - 1]:
            points.append(SwitchPoint(position=i, direction=f"{eff[i - 1]}->{eff[i]}"))
    return points


def spi(tags, variant):
    """Compute the switching-point index vector for a tag sequence.

    Position 0 carries index 0. Every later position carries the previous
    index plus one, except at a reset boundary where it drops back to 0.
    RESET_ALL resets at every language change; BASE_MIXED resets only at
    HI -> EN changes.
    """
    if not isinstance(variant, SPIVariant):
        raise ConfigError(f"unknown SPI variant: {variant!r}")
    eff = effective_tags(tags)
    indices = [0]
    for i in range(1, len(eff)):
        changed = eff[i] != eff[i - 1]
        if variant is SPIVariant.RESET_ALL:
            reset = changed
        else:
            reset = changed and eff[i - 1] == HI and eff[i] == EN
        indices.append(0 if reset else indices[-1] + 1)
    return SPIVector(indices=tuple(indices), variant=variant)


def clamp_spi(v, p_max):
    """Cap every index at p_max - 1 so it can address a p_max-row table."""
    if p_max < 1:
        raise ConfigError(f"position cap must be >= 1, got {p_max}")
    return SPIVector(
        indices=tuple(min(i, p_max - 1) for i in v.indices),
        variant=v.variant,
    )
