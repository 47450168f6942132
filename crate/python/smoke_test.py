"""Smoke test for the mcfse Python extension.

Build and install first, e.g.  maturin develop -m crates/python/Cargo.toml
"""

import math
import os
import tempfile

import mcfse


def main():
    seq = mcfse.Sequence.synth("translate:dx=4,dy=-2,width=96,height=96,frames=5")
    assert (seq.width, seq.height, seq.frame_count) == (96, 96, 5)

    mask = mcfse.LossMask.isolated(96, 96, 5, frames=[2], stride=48, offset=24)
    assert mask.blocks == [(2, 24, 24, 16), (2, 72, 24, 16), (2, 24, 72, 16), (2, 72, 72, 16)]
    corrupted = mcfse.apply_loss(seq, mask)
    assert corrupted.sample(30, 30, 2) == 0

    results = {}
    for name in mcfse.ALGORITHMS:
        config = mcfse.ConcealConfig(name, iterations=40)
        concealed, blocks = mcfse.conceal(corrupted, mask, config)
        assert len(blocks) == 4 and all(b["error"] is None for b in blocks)
        results[config.algorithm] = mcfse.psnr(seq, concealed, mask)

    assert math.isinf(results["DMVE"]), results
    assert not math.isinf(results["TR"]), results
    assert results["MC-FSE"] > 25.0, results

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "seq.y4m")
        seq.write_y4m(path)
        assert mcfse.Sequence.load_y4m(path) == seq

        rows = mcfse.run_experiment(
            sequences=["synth:static:width=64,height=64,frames=3"],
            algorithms=["tr", "fse3d"],
            frames=[1],
            offset=24,
            iterations=20,
            output=os.path.join(tmp, "out"),
        )
        assert [r["algorithm"] for r in rows] == ["TR", "3D-FSE"]
        assert math.isinf(rows[0]["psnr_db"])

    try:
        mcfse.ConcealConfig("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown algorithm accepted")

    for k, v in results.items():
        print(f"{k:7s} {v:8.2f} dB")
    print("smoke test passed")


if __name__ == "__main__":
    main()
