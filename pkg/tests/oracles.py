"""Independent reference implementations used as test oracles.

These are deliberately written from the algorithm definitions rather than by
calling into the code under test (or, for SHA3, into hashlib), so each test
has a second opinion to compare against.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def _rotl64(value: int, offset: int) -> int:
    offset %= 64
    return ((value << offset) | (value >> (64 - offset))) & _MASK64


def _rc_bit(t: int) -> int:
    # LFSR over x^8 + x^6 + x^5 + x^4 + 1, per the Keccak reference.
    if t % 255 == 0:
        return 1
    r = [1, 0, 0, 0, 0, 0, 0, 0]
    for _ in range(t % 255):
        r = [0] + r
        r[0] ^= r[8]
        r[4] ^= r[8]
        r[5] ^= r[8]
        r[6] ^= r[8]
        r = r[:8]
    return r[0]


def _round_constants() -> list[int]:
    constants = []
    for ir in range(24):
        rc = 0
        for j in range(7):
            if _rc_bit(j + 7 * ir):
                rc |= 1 << (2**j - 1)
        constants.append(rc)
    return constants


def _rho_offsets() -> dict[tuple[int, int], int]:
    offsets = {(0, 0): 0}
    x, y = 1, 0
    for t in range(24):
        offsets[(x, y)] = ((t + 1) * (t + 2) // 2) % 64
        x, y = y, (2 * x + 3 * y) % 5
    return offsets


_RC = _round_constants()
_RHO = _rho_offsets()


def _keccak_f1600(lanes: list[int]) -> list[int]:
    a = {(x, y): lanes[x + 5 * y] for x in range(5) for y in range(5)}
    for ir in range(24):
        # theta
        c = {x: a[(x, 0)] ^ a[(x, 1)] ^ a[(x, 2)] ^ a[(x, 3)] ^ a[(x, 4)] for x in range(5)}
        d = {x: c[(x - 1) % 5] ^ _rotl64(c[(x + 1) % 5], 1) for x in range(5)}
        for x in range(5):
            for y in range(5):
                a[(x, y)] ^= d[x]
        # rho + pi
        b = {}
        for x in range(5):
            for y in range(5):
                b[(y, (2 * x + 3 * y) % 5)] = _rotl64(a[(x, y)], _RHO[(x, y)])
        # chi
        for x in range(5):
            for y in range(5):
                a[(x, y)] = b[(x, y)] ^ ((~b[((x + 1) % 5, y)] & _MASK64) & b[((x + 2) % 5, y)])
        # iota
        a[(0, 0)] ^= _RC[ir]
    return [a[(x, y)] for y in range(5) for x in range(5)]


def sha3_256(data: bytes) -> bytes:
    """SHA3-256 built from the sponge definition (rate 1088, pad 0x06)."""
    rate = 136
    padded = bytearray(data)
    pad_len = rate - (len(padded) % rate)
    padded += b"\x06" + b"\x00" * (pad_len - 1)
    padded[-1] |= 0x80

    lanes = [0] * 25
    for block_start in range(0, len(padded), rate):
        block = padded[block_start : block_start + rate]
        for i in range(rate // 8):
            lane = int.from_bytes(block[8 * i : 8 * i + 8], "little")
            # lane index i maps to (x, y) = (i % 5, i // 5)
            lanes[i] ^= lane
        lanes = _keccak_f1600(lanes)

    out = bytearray()
    for i in range(4):
        out += lanes[i].to_bytes(8, "little")
    return bytes(out)


def onion_checksum_oracle(pubkey: bytes, version: int) -> bytes:
    """Tor rend-spec-v3 checksum via the independent SHA3."""
    return sha3_256(b".onion checksum" + pubkey + bytes([version]))[:2]


def jaccard_oracle(a: set, b: set) -> float:
    """Brute-force exact Jaccard similarity."""
    if not a and not b:
        return 1.0
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union
