"""String addresses for cells of a graph with periodic ends.

A core cell is written ``core:<local>``.  A cell in copy ``n`` of the
fundamental domain of end ``E`` is written ``E@n:<local>``.  An oriented edge
pointing against the stored direction carries a ``~`` prefix.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple, Optional

CORE = "core"
REV = "~"


class AddressError(ValueError):
    """Raised for malformed or out-of-range addresses."""


class Parsed(NamedTuple):
    end: Optional[str]
    copy: Optional[int]
    local: str


def core(local: str) -> str:
    return f"{CORE}:{local}"


def at(end: str, copy: int, local: str) -> str:
    if copy < 0:
        raise AddressError(f"negative copy index {copy} for {end}:{local}")
    return f"{end}@{copy}:{local}"


@lru_cache(maxsize=1 << 20)
def parse(addr: str) -> Parsed:
    """Split an unoriented address into ``(end, copy, local)``."""
    if addr.startswith(REV):
        raise AddressError(f"expected an unoriented address, got {addr!r}")
    region, sep, local = addr.partition(":")
    if not sep or not local:
        raise AddressError(f"malformed address {addr!r}")
    if region == CORE:
        return Parsed(None, None, local)
    end, sep, copy = region.partition("@")
    if not sep or not end:
        raise AddressError(f"malformed address {addr!r}")
    try:
        n = int(copy)
    except ValueError as exc:
        raise AddressError(f"malformed copy index in {addr!r}") from exc
    if n < 0:
        raise AddressError(f"negative copy index in {addr!r}")
    return Parsed(end, n, local)


def is_core(addr: str) -> bool:
    return unorient(addr).startswith(CORE + ":")


def is_reversed(o: str) -> bool:
    return o.startswith(REV)


def unorient(o: str) -> str:
    return o[1:] if o.startswith(REV) else o


def reverse(o: str) -> str:
    return o[1:] if o.startswith(REV) else REV + o


def orient(edge: str, forward: bool) -> str:
    return edge if forward else REV + edge


def end_of(addr: str) -> Optional[str]:
    return parse(unorient(addr)).end


def copy_of(addr: str) -> Optional[int]:
    return parse(unorient(addr)).copy


def local_of(addr: str) -> str:
    return parse(unorient(addr)).local


def shift_address(addr: str, k: int) -> str:
    """Move an end address ``k`` copies outward, keeping its orientation."""
    rev = is_reversed(addr)
    p = parse(unorient(addr))
    if p.end is None:
        raise AddressError(f"cannot shift core address {addr!r}")
    n = p.copy + k
    if n < 0:
        raise AddressError(f"shift of {addr!r} by {k} leaves the end")
    return orient(at(p.end, n, p.local), not rev)


def retarget(addr: str, end: str, k: int) -> str:
    """Shift an end address by ``k`` copies and move it into end ``end``."""
    rev = is_reversed(addr)
    p = parse(unorient(addr))
    if p.end is None:
        raise AddressError(f"cannot shift core address {addr!r}")
    n = p.copy + k
    if n < 0:
        raise AddressError(f"shift of {addr!r} by {k} leaves the end")
    return orient(at(end, n, p.local), not rev)


def check_name(name: str, what: str) -> None:
    """Reject local names or end ids that would break address parsing."""
    if not name or any(ch in name for ch in ":@~") or name.strip() != name:
        raise AddressError(f"invalid {what} name {name!r}")
