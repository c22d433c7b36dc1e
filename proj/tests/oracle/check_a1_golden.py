#!/usr/bin/env python3
"""Independent check of the frozen A1 TOY_MIX transcript.

Recomputes every masked payload from the transcript's recorded key material
using only toy_mix and XOR (see docs/toy_mix.md and docs/formats.md), without
touching the C++ implementation.
"""

import json
import sys

from toy_mix import kdf_derive_toy


def xor(a: bytes, b: bytes) -> bytes:
    assert len(a) == len(b)
    return bytes(x ^ y for x, y in zip(a, b))


def main(path: str) -> int:
    with open(path, "rb") as f:
        lines = [json.loads(line) for line in f.read().splitlines() if line]
    meta = lines[0]["meta"]
    assert meta["kdf"] == "TOY_MIX", "oracle only replays TOY_MIX transcripts"
    out_len = meta["key_bytes"]
    session_key = bytes.fromhex(meta["session_values"]["session_key:0"])
    ltks = {pair: bytes.fromhex(hexval) for pair, hexval in meta["long_term_keys"].items()}

    setups = {}
    checked = 0
    for event in lines[1:]:
        if event["kind"] == "SETUP":
            setup = json.loads(bytes.fromhex(event["payload_hex"]))
            setups[event["receiver"]] = setup
            continue
        setup = setups[event["receiver"]]
        nonce = bytes.fromhex(setup["nonce"])
        pair = "|".join(sorted([event["receiver"], setup["center"]]))
        otk = kdf_derive_toy(ltks[pair], nonce, [], "otk", out_len)
        expected = xor(session_key, otk)
        actual = bytes.fromhex(event["payload_hex"])
        if expected != actual:
            print(f"seq {event['seq']}: payload mismatch", file=sys.stderr)
            return 1
        checked += 1
    if checked == 0:
        print("no masked payloads found", file=sys.stderr)
        return 1
    print(f"recomputed {checked} masked payloads: all match")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1]))
