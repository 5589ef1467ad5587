"""Treatment protocol notation, parsing, and expansion into dose events.

A protocol string is either "NT" (no treatment) or a sequence of blocks,
each an unsigned count followed by "T" (chemo cycles) or "C" (CAR-T
injections), e.g. "5T2C5T".  Parsing is case-insensitive.  Blocks are laid
out back to back:

  * a chemo block of n cycles occupies n * cycle_days days, dosing on the
    first dosing_days days of each cycle;
  * a CAR-T block of m injections spaced gap days apart occupies m * gap
    days (the last injection is followed by one full gap before the next
    block starts).

So "5T2C5T" doses chemo on days 0-4 of cycles starting at day 0, 28, ...,
112, injects CAR-T at days 140 and 147, and resumes chemo at day 154.
Simultaneous doses are ordered chemo before CAR-T.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

__all__ = [
    "ProtocolError",
    "TMZBlock",
    "CarTBlock",
    "ProtocolSpec",
    "DoseEvent",
    "DoseConfig",
    "parse",
    "format_protocol",
    "expand",
]

KIND_CHEMO = "chemo"
KIND_CART = "cart"


class ProtocolError(ValueError):
    """Malformed protocol notation or inconsistent dose settings."""


@dataclass(frozen=True)
class TMZBlock:
    """n_cycles consecutive chemo cycles."""

    n_cycles: int

    def __post_init__(self) -> None:
        if self.n_cycles < 0:
            raise ProtocolError("chemo cycle count must be >= 0")


@dataclass(frozen=True)
class CarTBlock:
    """n_injections CAR-T injections; dose/gap default from DoseConfig."""

    n_injections: int
    dose_per_injection: float | None = None
    gap: float | None = None

    def __post_init__(self) -> None:
        if self.n_injections < 0:
            raise ProtocolError("injection count must be >= 0")
        if self.dose_per_injection is not None and self.dose_per_injection < 0:
            raise ProtocolError("dose_per_injection must be >= 0")
        if self.gap is not None and self.gap <= 0:
            raise ProtocolError("injection gap must be > 0 days")


@dataclass(frozen=True)
class ProtocolSpec:
    """An ordered tuple of treatment blocks; empty means no treatment."""

    blocks: tuple[TMZBlock | CarTBlock, ...]

    @property
    def n_chemo_cycles(self) -> int:
        return sum(b.n_cycles for b in self.blocks if isinstance(b, TMZBlock))

    @property
    def n_injections(self) -> int:
        return sum(b.n_injections for b in self.blocks if isinstance(b, CarTBlock))


@dataclass(frozen=True)
class DoseEvent:
    """One impulse: chemo adds `amount` to E, CAR-T adds `amount` cells to C."""

    time: float
    kind: str
    amount: float


@dataclass(frozen=True)
class DoseConfig:
    """Dosing conventions shared by every block of a protocol.

    e0 is the efficacy boost per chemo administration (capped at 1 per
    dose); v_per_injection the CAR-T cells per injection, which must be
    set (here or on the block) before a CAR-T block can be expanded.
    """

    e0: float = 1.0
    cycle_days: float = 28.0
    dosing_days: int = 5
    cart_gap: float = 7.0
    v_per_injection: float | None = None

    def __post_init__(self) -> None:
        if not (0 < self.e0 <= 1):
            raise ProtocolError("e0 must lie in (0, 1]")
        if self.cycle_days <= 0:
            raise ProtocolError("cycle_days must be > 0")
        if not (0 < self.dosing_days <= self.cycle_days):
            raise ProtocolError("dosing_days must be in (0, cycle_days]")
        if self.cart_gap <= 0:
            raise ProtocolError("cart_gap must be > 0 days")
        if self.v_per_injection is not None and self.v_per_injection < 0:
            raise ProtocolError("v_per_injection must be >= 0")

    def with_total_cart(self, total: float, n_injections: int) -> "DoseConfig":
        """Split a total CAR-T dose evenly over n_injections."""
        if n_injections <= 0:
            raise ProtocolError("need at least one injection to split a dose")
        if total < 0:
            raise ProtocolError("total CAR-T dose must be >= 0")
        return replace(self, v_per_injection=total / n_injections)


_TOKEN = re.compile(r"(\d+)([TC])")


def parse(text: str) -> ProtocolSpec:
    """Parse protocol notation like "NT", "10T", or "5T2C5T"."""
    if not isinstance(text, str):
        raise ProtocolError(f"protocol must be a string, got {type(text).__name__}")
    s = text.strip().upper()
    if not s:
        raise ProtocolError("empty protocol string")
    if s == "NT":
        return ProtocolSpec(blocks=())
    blocks: list[TMZBlock | CarTBlock] = []
    pos = 0
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if m is None:
            raise ProtocolError(
                f"bad protocol {text!r}: expected <count>T or <count>C "
                f"at position {pos}")
        count = int(m.group(1))
        if m.group(2) == "T":
            blocks.append(TMZBlock(count))
        else:
            blocks.append(CarTBlock(count))
        pos = m.end()
    return ProtocolSpec(blocks=tuple(blocks))


def format_protocol(spec: ProtocolSpec) -> str:
    """Canonical notation for a spec; inverse of `parse` up to case."""
    if not spec.blocks:
        return "NT"
    parts = []
    for b in spec.blocks:
        if isinstance(b, TMZBlock):
            parts.append(f"{b.n_cycles}T")
        else:
            parts.append(f"{b.n_injections}C")
    return "".join(parts)


def expand(spec: ProtocolSpec, dose: DoseConfig | None = None) -> list[DoseEvent]:
    """Lay the blocks out in time and return the sorted dose impulses."""
    dose = dose or DoseConfig()
    events: list[tuple[float, int, float]] = []
    cursor = 0.0
    for block in spec.blocks:
        if isinstance(block, TMZBlock):
            for c in range(block.n_cycles):
                start = cursor + c * dose.cycle_days
                for d in range(dose.dosing_days):
                    events.append((start + d, 0, dose.e0))
            cursor += block.n_cycles * dose.cycle_days
        else:
            gap = block.gap if block.gap is not None else dose.cart_gap
            v = (block.dose_per_injection
                 if block.dose_per_injection is not None
                 else dose.v_per_injection)
            if v is None and block.n_injections > 0:
                raise ProtocolError(
                    "CAR-T block needs a dose: set DoseConfig.v_per_injection "
                    "or the block's dose_per_injection")
            for j in range(block.n_injections):
                events.append((cursor + j * gap, 1, v))
            cursor += block.n_injections * gap
    events.sort(key=lambda e: (e[0], e[1]))
    return [DoseEvent(time=t, kind=KIND_CHEMO if k == 0 else KIND_CART, amount=a)
            for t, k, a in events]
