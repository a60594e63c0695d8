#!/usr/bin/env python3
"""Writes golden_record.bin and three_points.ply without using the Rust code.

The record encoder below is written from the byte layout alone so that the
golden file checks the Rust encoder against a second implementation.
"""

import math
import struct
from pathlib import Path

HERE = Path(__file__).resolve().parent


def f32(v):
    return struct.unpack("<f", struct.pack("<f", v))[0]


def quantize(v, lo, hi):
    lo, hi, v = f32(lo), f32(hi), f32(v)
    x = (v - lo) / (hi - lo) * 65535.0
    code = math.floor(x + 0.5) if x >= 0 else -math.floor(-x + 0.5)
    return max(0, min(65535, int(code)))


# Shared with golden_record() in tests/codec_golden.rs.
GRID_POS = [(-10.0, 10.0), (-10.0, 10.0), (-10.0, 10.0)]
GRID_LOG_SCALE = (-5.0, 2.0)
GRID_LOG_OPACITY = (-6.0, 0.0)

RECORD = dict(
    id=7,
    parent=3,
    partition=0,
    extent=1.5,
    level=2,
    degree=1,
    children=[15, 16],
    position=(1.25, -3.5, 9.0),
    rotation=(0.5, 0.5, 0.5, 0.5),
    scale=(1.0, 0.5, 0.25),
    log_opacity=-0.5,
    sh=[0.1 * i - 0.55 for i in range(12)],
)


def encode_record(r):
    out = bytearray()
    out += struct.pack("<IIIf", r["id"], r["parent"], r["partition"], r["extent"])
    out += struct.pack("<BBB", r["level"], r["degree"], len(r["children"]))
    for c in r["children"]:
        out += struct.pack("<I", c)
    codes = [quantize(v, *GRID_POS[a]) for a, v in enumerate(r["position"])]
    codes += [quantize(v, -1.0, 1.0) for v in r["rotation"]]
    codes += [quantize(f32(math.log(f32(s))), *GRID_LOG_SCALE) for s in r["scale"]]
    codes.append(quantize(r["log_opacity"], *GRID_LOG_OPACITY))
    n_sh = 3 * (r["degree"] + 1) ** 2
    codes += [quantize(v, -4.0, 4.0) for v in r["sh"][:n_sh]]
    out += struct.pack("<%dH" % len(codes), *codes)
    return bytes(out)


def write_ply(path):
    # Degree-1 SH: f_rest holds 3 coefficients per channel, channel-major.
    props = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    props += ["f_rest_%d" % i for i in range(9)]
    props += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    points = []
    for k in range(3):
        p = dict.fromkeys(props, 0.0)
        p.update(x=float(k), y=2.0 * k, z=-1.0, f_dc_0=0.1 * k, f_dc_1=0.2, f_dc_2=-0.3)
        for i in range(9):
            p["f_rest_%d" % i] = 0.01 * (i + 1) * (k + 1)
        p.update(opacity=0.0, scale_0=math.log(0.5), scale_1=math.log(0.25), scale_2=math.log(0.125))
        p.update(rot_0=2.0, rot_1=0.0, rot_2=0.0, rot_3=0.0)
        points.append(p)
    header = "ply\nformat binary_little_endian 1.0\ncomment three test points\nelement vertex 3\n"
    header += "".join("property float %s\n" % n for n in props)
    header += "end_header\n"
    body = b"".join(struct.pack("<%df" % len(props), *(p[n] for n in props)) for p in points)
    path.write_bytes(header.encode() + body)


if __name__ == "__main__":
    (HERE / "golden_record.bin").write_bytes(encode_record(RECORD))
    write_ply(HERE / "three_points.ply")
