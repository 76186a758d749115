"""End-to-end smoke test of the pykbilmdm extension module."""

import cmath
import math
import tempfile
from pathlib import Path

import pykbilmdm as kb


def main():
    x = kb.phantom(n_p=32, n_f=32, n_fr=24, seed=3)
    assert x.shape == (32, 32, 24), x.shape

    full = kb.to_kspace(x)
    back = kb.to_image(full)
    assert kb.nrmse(x, back) < 1e-12

    mask = kb.cartesian_mask(32, 24, nu=4, rate=6.0, seed=3)
    lines = mask.lines()
    assert len(lines) == 24 and all(len(f) == 32 for f in lines)
    assert all(all(f[14:18]) for f in lines), "navigator lines must be sampled"
    print(f"mask acceleration {mask.acceleration():.2f}")

    sampled = kb.sample(mask, full)
    zf = kb.zero_filled(sampled)
    r = kb.reconstruct(sampled, mask, {"recon.outer_max_iter": 150})
    e_recon, e_zf = kb.nrmse(x, r.images), kb.nrmse(x, zf)
    print(f"nrmse recon {e_recon:.4f} zero-filled {e_zf:.4f} after {r.iterations} steps")
    assert e_recon < e_zf
    assert len(r.objective) == r.iterations + 1
    assert all(0 < g <= 1 for g in r.gammas)

    frames = kb.framewise_nrmse(x, r.images)
    assert [j for j, _ in frames] == list(range(24))
    assert all(math.isfinite(v) for _, v in frames)

    rebuilt = kb.ImageSeries(x.frames())
    assert kb.nrmse(x, rebuilt) == 0.0
    assert isinstance(x.frames()[0][0][0], complex)
    assert cmath.isfinite(x.frames()[5][10][10])

    with tempfile.TemporaryDirectory() as d:
        x.save(str(Path(d) / "x.kblm"))
        mask.save(str(Path(d) / "m.kblmmask"))
        loaded = kb.load(str(Path(d) / "x.kblm"))
        assert isinstance(loaded, kb.ImageSeries) and kb.nrmse(x, loaded) < 1e-6  # stored as f32
        assert kb.SamplingMask.load(str(Path(d) / "m.kblmmask")).lines() == lines

    try:
        kb.reconstruct(sampled, mask, {"recon.zeta": 2.0})
    except ValueError as e:
        assert "recon.zeta" in str(e)
    else:
        raise AssertionError("invalid zeta accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
