"""
Unit definitions and conversions
"""

import math
from enum import Enum
from typing import TypeVar

import pint

# Shared pint registry; the application registry keeps our Quantities
# comparable with whatever registry the caller already uses.
ureg = pint.get_application_registry()

E = TypeVar("E", bound="NamedEnum")


class NamedEnum(Enum):
    """Enum mixin adding a friendly ``from_any(enum_member_or_name)`` constructor."""

    @classmethod
    def from_any(cls: type[E], member: "E | str") -> E:
        if isinstance(member, cls):
            return member
        if isinstance(member, str):
            try:
                return cls[member]
            except KeyError as err:
                valid = ", ".join(m.name for m in cls)
                raise ValueError(
                    f"Unknown {cls.__name__} '{member}' (expected one of: {valid})"
                ) from err
        raise TypeError(f"Invalid {cls.__name__} type: {type(member)}")


class FrequencyUnit(NamedEnum):
    Hz = 1.0
    kHz = 1e3
    MHz = 1e6
    GHz = 1e9


class ByteUnit(NamedEnum):
    B = 1
    KB = 1000
    KiB = 1024
    MB = 1000**2
    MiB = 1024**2


def parse_frequency(value: str | float, unit: FrequencyUnit | str = FrequencyUnit.Hz) -> float:
    """
    Frequency in Hz from a number (in ``unit``) or a pint-parsable string.

    >>> parse_frequency("100 MHz")
    100000000.0
    >>> parse_frequency(250, "MHz")
    250000000.0
    """
    if isinstance(value, str):
        try:
            quantity = ureg.Quantity(value)
            if quantity.dimensionless:
                hz = float(quantity.magnitude) * FrequencyUnit.from_any(unit).value
            else:
                hz = float(quantity.to(ureg.hertz).magnitude)
        except (pint.errors.PintError, SyntaxError, TypeError) as err:
            raise ValueError(f"clock={value!r} is not a frequency") from err
    else:
        hz = float(value) * FrequencyUnit.from_any(unit).value
    if not math.isfinite(hz) or hz <= 0:
        raise ValueError(f"clock={value} must be a positive finite frequency")
    return hz


def byte_quantity(n_bytes: int, unit: ByteUnit | str = ByteUnit.B) -> pint.Quantity:
    """A byte count as a pint Quantity, e.g. ``byte_quantity(49152, "KiB")`` → 48 KiB."""
    unit = ByteUnit.from_any(unit)
    return ureg.Quantity(n_bytes / unit.value, _PINT_BYTE_UNITS[unit])


_PINT_BYTE_UNITS = {
    ByteUnit.B: "byte",
    ByteUnit.KB: "kilobyte",
    ByteUnit.KiB: "kibibyte",
    ByteUnit.MB: "megabyte",
    ByteUnit.MiB: "mebibyte",
}
