"""Reference implementation of the TOY_MIX mixer (see docs/toy_mix.md).

Used to cross-check the golden vectors and transcripts produced by the C++
implementation. Keep in sync with the pseudocode in the docs; the docs are
the normative definition.
"""

MASK64 = (1 << 64) - 1
INIT = 0x9E3779B97F4A7C15
PRIME = 0x00000100000001B3
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def _rotl64(x, r):
    return ((x << r) | (x >> (64 - r))) & MASK64


def _absorb(s, data):
    for b in data:
        s = _rotl64(((s ^ b) * PRIME) & MASK64, 17)
    return s


def _absorb_len(s, n):
    return _absorb(s, n.to_bytes(8, "big"))


def toy_mix(key: bytes, data: bytes, out_len: int) -> bytes:
    s = INIT
    s = _absorb_len(s, len(key))
    s = _absorb(s, key)
    s = _absorb_len(s, len(data))
    s = _absorb(s, data)
    out = bytearray()
    for _ in range(out_len):
        s = (s + GAMMA) & MASK64
        t = s
        t ^= t >> 30
        t = (t * MIX1) & MASK64
        t ^= t >> 27
        t = (t * MIX2) & MASK64
        t ^= t >> 31
        out.append(t & 0xFF)
    return bytes(out)


def serialize_context(nonce: bytes, identities, label: str) -> bytes:
    out = bytearray()
    out += len(nonce).to_bytes(4, "big")
    out += nonce
    out += len(identities).to_bytes(4, "big")
    for ident in identities:
        raw = ident.encode()
        out += len(raw).to_bytes(4, "big")
        out += raw
    raw = label.encode()
    out += len(raw).to_bytes(4, "big")
    out += raw
    return bytes(out)


def kdf_derive_toy(long_term: bytes, nonce: bytes, identities, label: str, out_len: int) -> bytes:
    return toy_mix(long_term, serialize_context(nonce, identities, label), out_len)


if __name__ == "__main__":
    vectors = [
        ("empty key, empty data, 16 out", b"", b"", 16),
        ("key 'key', data 'data', 32 out", b"key", b"data", 32),
        ("16x00 key, 16x01 data, 16 out", bytes(16), bytes([1] * 16), 16),
        ("16xff key, 8x00 data, 16 out", bytes([0xFF] * 16), bytes(8), 16),
    ]
    for name, key, data, out_len in vectors:
        print(f"{name}: {toy_mix(key, data, out_len).hex()}")
    drv = kdf_derive_toy(bytes(16), bytes([1] * 16), [], "t", 16)
    print(f"kdf_derive(zero16, ctx(nonce=01x16, ids=[], label='t')): {drv.hex()}")
