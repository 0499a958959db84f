"""Smoke test for the Python extension.

Builds the cdylib (unless PLURICLOSED_LIB points at one), copies it next to a
temporary `pluriclosed.so`, imports it and exercises the main entry points.

    python3 python/smoke_test.py
"""

import math
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def locate_library():
    lib = os.environ.get("PLURICLOSED_LIB")
    if lib:
        return lib
    subprocess.run(
        ["cargo", "build", "--release", "-p", "pluriclosed-py"],
        cwd=ROOT,
        check=True,
    )
    return os.path.join(ROOT, "target", "release", "libpluriclosed_py.so")


def main():
    tmp = tempfile.mkdtemp()
    shutil.copy(locate_library(), os.path.join(tmp, "pluriclosed.so"))
    sys.path.insert(0, tmp)
    import pluriclosed as pc

    ex1 = pc.Instance.catalog("example1")
    report = ex1.validate()
    assert report["skt"] == 1.0 and report["two_step"] == 0.0, report
    rho = ex1.rho()
    assert abs(rho[0][1] - rho[1][0] * -1) < 1e-14
    try:
        ex1.rho(formula="two-step")
        raise AssertionError("two-step formula accepted a 3-step algebra")
    except ValueError:
        pass

    assert not pc.Instance.catalog("example2").is_skt()

    kt4 = pc.Instance.catalog("kt4")
    again = pc.Instance.parse(kt4.to_text())
    assert again.brackets == kt4.brackets == [(0, 1, 3, -1.0)]
    traj = kt4.flow("pcf", t_end=10.0, rtol=1e-10)
    assert traj.status == "completed"
    assert abs(traj.metrics[-1][0][0] - math.sqrt(21.0)) < 1e-5

    a = kt4.flow("pcf", t_end=2.0, samples=20)
    b = kt4.flow("bracket", t_end=2.0, samples=20)
    passed, dev = pc.check_equivalence(a, b, 1e-5)
    assert passed, dev

    found = pc.search(4, 2, 3, seed=1)
    assert len(found) == 3
    for inst in found:
        assert inst.is_skt()
        assert max(inst.seminegativity()) <= 1e-8
    norms = found[0].flow("bracket", t_end=5.0).norm_mu_sq
    assert all(y <= x * (1 + 1e-9) for x, y in zip(norms, norms[1:]))

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
