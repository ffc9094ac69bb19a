"""Writes the fuzz corpus seeds under fuzz/corpus/.

The binary seeds are encoded here from the documented layouts, not by the
library, so the replay test also cross-checks the decoders against the docs.
Seeds named ok-* must parse; bad-* must be rejected.
"""

import math
import struct
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fuzz" / "corpus"


def put(target, name, data):
    d = ROOT / target
    d.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    (d / name).write_bytes(data)


def idx_images(count, rows, cols, fill=0, magic=2051):
    return struct.pack(">IIII", magic, count, rows, cols) + bytes([fill]) * (count * rows * cols)


def idx_labels(labels, magic=2049):
    return struct.pack(">II", magic, len(labels)) + bytes(labels)


def f64s(values):
    return b"".join(struct.pack("<d", v) for v in values)


def network(layers):
    """layers: list of (rows, cols, act_code, slope, weights, bias)."""
    p = struct.pack("<I", len(layers))
    for rows, cols, code, slope, w, b in layers:
        p += struct.pack("<IIB", rows, cols, code) + f64s([slope]) + f64s(w) + f64s(b)
    return p


def matrices(shapes, value):
    p = struct.pack("<I", len(shapes))
    for r, c in shapes:
        p += struct.pack("<II", r, c) + f64s([value] * (r * c))
    return p


def params(shapes, value):
    p = struct.pack("<I", len(shapes))
    for r, c in shapes:
        p += struct.pack("<II", r, c) + f64s([value] * (r * c)) + f64s([value] * r) + f64s([value])
    return p


def checkpoint(records, version=1):
    out = b"ECPK" + struct.pack("<HI", version, len(records))
    for tag, payload in records:
        out += struct.pack("<BQ", tag, len(payload)) + payload
    return out


def main():
    put("idx_images", "ok-2x3x3", idx_images(2, 3, 3, 7))
    put("idx_images", "ok-empty", idx_images(0, 28, 28))
    put("idx_images", "bad-magic", idx_images(1, 2, 2, magic=2049))
    put("idx_images", "bad-truncated", idx_images(2, 3, 3)[:-1])
    put("idx_images", "bad-trailing", idx_images(1, 1, 1) + b"\0")

    put("idx_labels", "ok-digits", idx_labels([0, 1, 2, 9]))
    put("idx_labels", "bad-magic", idx_labels([1], magic=2051))
    put("idx_labels", "bad-truncated", idx_labels([1, 2])[:-1])

    put("tabular_csv", "ok-two-rows", "in:x,out:y\n1.5,2\n-3,4.25\n")
    put("tabular_csv", "ok-multi", "in:a, in:b ,out:u,out:v\n0,1,2,3\n1e-3,-0,5,6\n")
    put("tabular_csv", "bad-header-only", "in:x,out:y\n")
    put("tabular_csv", "bad-ragged", "in:x,out:y\n1,2\n3\n")
    put("tabular_csv", "bad-order", "out:y,in:x\n1,2\n")
    put("tabular_csv", "bad-number", "in:x,out:y\n1,abc\n")

    net = network([
        (2, 1, 3, 0.25, [0.5, -1.0], [0.0, 0.1]),
        (1, 2, 0, 0.0, [2.0, 3.0], [-0.5]),
    ])
    shapes = [(2, 1), (1, 2)]
    mask = struct.pack("<I", 2) + struct.pack("<II", 2, 1) + bytes([1, 0]) + struct.pack("<II", 1, 2) + bytes([1, 1])
    optimizer = struct.pack("<Q", 3) + params(shapes, 0.5) + params(shapes, 0.25)
    put("checkpoint", "ok-empty", checkpoint([]))
    put("checkpoint", "ok-network", checkpoint([(1, net)]))
    put("checkpoint", "ok-full", checkpoint([
        (1, net), (2, mask), (3, matrices(shapes, 1.0)), (4, matrices(shapes, -0.5)), (5, optimizer),
    ]))
    put("checkpoint", "bad-version", checkpoint([(1, net)], version=2))
    put("checkpoint", "bad-duplicate", checkpoint([(1, net), (1, net)]))
    put("checkpoint", "bad-unknown-tag", checkpoint([(9, b"")]))
    put("checkpoint", "bad-shape", checkpoint([(1, net), (3, matrices([(2, 2), (1, 2)], 1.0))]))
    put("checkpoint", "bad-nonfinite", checkpoint([(1, network([(1, 1, 0, 0.0, [math.inf], [0.0])]))]))
    put("checkpoint", "bad-hidden-output", checkpoint([(1, network([(1, 1, 2, 0.0, [1.0], [0.0])]))]))

    put("experiment_spec", "ok-minimal", '[dataset]\nsource = "synthetic"\nsamples = 100\n\n[architecture]\nlayers = [68, 8, 1]\n')
    put("experiment_spec", "ok-smoke", (ROOT.parent.parent / "specs" / "smoke.toml").read_text())
    put("experiment_spec", "ok-mnist",
        'strategies = ["ec", "magnitude"]\nratios = [0.5]\n\n[dataset]\nsource = "mnist"\n'
        'images = "a.gz"\nlabels = "b.gz"\nlimit = 100\n\n[architecture]\nlayers = [784, 32, 10]\n')
    put("experiment_spec", "bad-ratio", 'ratios = [2.0]\n[dataset]\nsource = "synthetic"\nsamples = 1\n[architecture]\nlayers = [68, 1]\n')
    put("experiment_spec", "bad-unknown-key", 'seed = 3\n[dataset]\nsource = "synthetic"\nsamples = 1\n[architecture]\nlayers = [68, 1]\n')
    put("experiment_spec", "bad-strategy", 'strategies = ["obd"]\n[dataset]\nsource = "synthetic"\nsamples = 1\n[architecture]\nlayers = [68, 1]\n')

    header = "dataset,noise,arch,strategy,seed,ratio,baseline_loss,loss_after_prune,loss_after_finetune,score_wall_ms\n"
    put("report_csv", "ok-header-only", header)
    put("report_csv", "ok-rows", header
        + "synth,0.01,68-32-1,ec,0,0.5,0.1,0.2,0.15,3.25\n"
        + "synth,0.01,68-32-1,fully_connected,1,0.9,0.1,,,0\n")
    put("report_csv", "bad-header", "dataset,noise\nx,1\n")
    put("report_csv", "bad-number", header + "synth,zero,68-32-1,ec,0,0.5,0.1,0.2,0.15,3\n")


if __name__ == "__main__":
    main()
