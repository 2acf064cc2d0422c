#!/usr/bin/env python3
"""Identity denoiser plugin: copies input to output unchanged.

Reference implementation of the denoiser plugin protocol, kept free of
package imports so it doubles as an independent check of the .sarr
format: 16-byte header (magic "SARR", version 1, dtype 0 = f32 LE,
2 reserved bytes, u32 width, u32 height) followed by row-major float32
pixels.

Usage: echo_denoiser.py <input.sarr> <output.sarr>
       echo_denoiser.py --caps
"""
import json
import struct
import sys

HEADER = struct.Struct("<4sBB2sII")


def fail(msg: str) -> "NoReturn":
    print(f"echo_denoiser: {msg}", file=sys.stderr)
    sys.exit(1)


def main(argv):
    if argv == ["--caps"]:
        print(json.dumps({"protocol": 1, "name": "echo"}))
        return 0
    if len(argv) != 2:
        fail("expected <input.sarr> <output.sarr> or --caps")
    in_path, out_path = argv
    with open(in_path, "rb") as f:
        data = f.read()
    if len(data) < HEADER.size:
        fail(f"{in_path}: truncated header")
    magic, version, dtype, _reserved, width, height = HEADER.unpack_from(data)
    if magic != b"SARR":
        fail(f"{in_path}: bad magic {magic!r}")
    if version != 1 or dtype != 0:
        fail(f"{in_path}: unsupported version/dtype {version}/{dtype}")
    if len(data) != HEADER.size + 4 * width * height:
        fail(f"{in_path}: payload length mismatch")
    with open(out_path, "wb") as f:
        f.write(data)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
