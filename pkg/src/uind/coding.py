"""Elias-gamma codes and the canonical set encoding."""

from __future__ import annotations


def encode_nat(n: int) -> str:
    """Elias-gamma code of a natural ``n >= 1``."""
    if n < 1:
        raise ValueError(f"Elias-gamma is defined for n >= 1, got {n}")
    body = format(n, "b")
    return "0" * (len(body) - 1) + body


def decode_nat(bits: str, pos: int = 0) -> tuple[int, int]:
    """Decode one gamma codeword starting at ``pos``; return (value, next pos)."""
    zeros = 0
    while pos + zeros < len(bits) and bits[pos + zeros] == "0":
        zeros += 1
    end = pos + 2 * zeros + 1
    if end > len(bits):
        raise ValueError("truncated Elias-gamma codeword")
    return int(bits[pos + zeros:end], 2), end


def encode_symbol(v: int) -> str:
    """Gamma code of a symbol index ``v >= 0`` (shifted by one)."""
    return encode_nat(v + 1)


def encode_set(values) -> str:
    """Canonical encoding of a set of bit strings.

    Elements are deduplicated, sorted lexicographically and each is written as
    ``encode_nat(len + 1)`` followed by its bits. The length is shifted by one
    so that the empty string is a legal member.
    """
    return "".join(encode_nat(len(v) + 1) + v for v in sorted(set(values)))


def decode_set(bits: str) -> set[str]:
    out = set()
    pos = 0
    while pos < len(bits):
        n, pos = decode_nat(bits, pos)
        if pos + n - 1 > len(bits):
            raise ValueError("truncated set element")
        out.add(bits[pos:pos + n - 1])
        pos += n - 1
    return out
