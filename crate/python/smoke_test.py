"""Builds the extension module and checks the bindings against known values.

Run from the repository root: python3 python/smoke_test.py
"""

import math
import os
import shutil
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
HERE = ROOT / "python"


def build():
    env = dict(os.environ, PYO3_BUILD_EXTENSION_MODULE="1")
    subprocess.run(
        ["cargo", "build", "--release", "-p", "gexp-python"],
        cwd=ROOT,
        env=env,
        check=True,
    )
    target = Path(os.environ.get("CARGO_TARGET_DIR", ROOT / "target"))
    shutil.copyfile(target / "release" / "libgexp.so", HERE / "gexp.so")


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    build()
    sys.path.insert(0, str(HERE))
    import gexp

    band = gexp.UncertaintySet.interval(1.0, 4.0)
    assert band.dim == 1
    assert band.spectrum_bounds() == (1.0, 4.0)
    close(band.support_function([[2.0]]), 4.0, 1e-12)
    close(band.project([[9.0]])[0][0], 4.0, 1e-12)

    square = gexp.Payoff("square")
    close(gexp.weak_value(square, band, 16), 4.0, 1e-9)
    close(gexp.strong_value(square, band, 16), 4.0, 1e-9)
    close(gexp.pde_value(square, band), 4.0, 1e-4)
    close(gexp.weak_value(gexp.Payoff("neg_square"), band, 16), -1.0, 1e-9)

    call = gexp.Payoff("call", strike=0.0)
    exact = 2.0 / math.sqrt(2.0 * math.pi)
    close(gexp.pde_value(call, band), exact, 1e-3)
    close(gexp.gaussian_value(call, 2.0), exact, 1e-12)
    close(gexp.weak_value(call, band, 64), exact, 5e-2)
    assert gexp.strong_value(call, band, 64) <= gexp.weak_value(call, band, 64) + 1e-9

    lookback = gexp.Payoff("identity", kind="lookback")
    close(lookback.evaluate([[0.0], [1.0], [-0.5]]), 1.0, 0.0)

    hull = gexp.UncertaintySet.hull([[[1.0, 0.0], [0.0, 2.0]], [[3.0, 0.0], [0.0, 1.0]]])
    report = gexp.validate(gexp.Payoff("square", dim=2), hull, 16, paths=2000, seed=3)
    assert report["weak"]["passed"] and report["strong"]["passed"], report

    csv = gexp.converge(str(ROOT / "configs" / "call_d1.cfg"))
    lines = csv.strip().splitlines()
    assert lines[0].startswith("n,weak_value,strong_value")
    assert len(lines) == 8

    for bad in (lambda: gexp.UncertaintySet.interval(2.0, 1.0), lambda: gexp.Payoff("call")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
