#!/usr/bin/env python3
"""Smoke test for the netopt_py extension module.

Builds nothing itself: run `cargo build -p netopt-py` first. The script
copies the produced cdylib next to itself under an importable name, then
exercises the bindings end to end.
"""

import math
import pathlib
import shutil
import sys

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def locate_module():
    candidates = []
    for profile in ("debug", "release"):
        for name in ("libnetopt_py.so", "netopt_py.dll", "libnetopt_py.dylib"):
            candidates.append(ROOT / "target" / profile / name)
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("netopt_py cdylib not found; run `cargo build -p netopt-py` first")
    newest = max(built, key=lambda p: p.stat().st_mtime)
    suffix = ".pyd" if newest.suffix == ".dll" else ".so"
    target = HERE / ("netopt_py" + suffix)
    shutil.copy2(newest, target)
    return target


locate_module()
sys.path.insert(0, str(HERE))

import netopt_py as np_ext  # noqa: E402


def check(name, ok, detail=""):
    print(f"{name}: {'ok' if ok else 'FAIL'} {detail}")
    if not ok:
        sys.exit(1)


# scalar closed forms
v = np_ext.bs_call(10.0, 10.0, 0.0, 0.2, 1.0)
check("bs_call atm", abs(v - 0.7965567455405796) < 1e-9, f"value {v:.10f}")
check("bs_call_delta in (0,1)", 0.0 < np_ext.bs_call_delta(10.0, 10.0, 0.0, 0.2, 1.0) < 1.0)
check("asian r->0 limit", abs(np_ext.asian_zero_strike(5.0, 1e-14, 2.0) - 10.0) < 1e-8)
check("time_carry r=0", abs(np_ext.time_carry(0.0, 1.0, 2.0) - 1.0) < 1e-12)
sig_hat = np_ext.adjusted_sigma(0.3, 2.0, 0.1)
check("adjusted_sigma", abs(sig_hat - 0.27235636515782247) < 1e-12, f"value {sig_hat:.6f}")

# path enumeration on the diamond topology
rows, labels = np_ext.enumerate_paths(
    ["A", "B", "C", "D"],
    [("B", "A"), ("A", "C"), ("B", "D"), ("D", "C")],
    "B",
    "C",
)
check(
    "diamond paths",
    labels == [["B", "A", "C"], ["B", "D", "C"]] and rows == [[1.0, 1.0, 1.0, 0.0], [0.0, 1.0, 1.0, 1.0]],
    f"labels {labels}",
)

# network option on the diamond: dual estimators agree
opt = np_ext.NetworkOption(
    s0=[1.0, 1.0, 1.0, 1.0],
    sigma=[0.2, 0.2, 0.2, 0.2],
    rho=[[1.0 if i == j else 0.3 for j in range(4)] for i in range(4)],
    v=rows,
    strike=3.0,
    t1=1.0,
    t2=2.0,
    rate=0.05,
)
direct = opt.price_direct(n_samples=200_000, seed=1)
girsanov = opt.price_girsanov(n_samples=200_000, seed=1)
combined = math.hypot(direct.stderr, girsanov.stderr)
check(
    "dual estimators agree",
    abs(direct.value - girsanov.value) <= 3.0 * combined,
    f"direct {direct.value:.5f} girsanov {girsanov.value:.5f} (+-{combined:.5f})",
)
check("estimate repr", "Estimate(value=" in repr(direct))

d0 = opt.delta(0, n_samples=100_000, seed=2)
check("delta positive", d0.value > 0.0, f"delta {d0.value:.5f}")
bf = opt.bundle_future(n_samples=200_000, seed=3)
check("bundle future ~ 0", abs(bf.value) <= 3.0 * bf.stderr, f"{bf.value:.5f} (+-{bf.stderr:.5f})")

# determinism across calls
check("reproducible", opt.price_direct(50_000, 9).value == opt.price_direct(50_000, 9).value)

# hedged portfolio stays flat at r = 0
stats = np_ext.simulate_hedge(
    s0=10.0,
    strike=10.0,
    sigma=0.2,
    maturity=1.0,
    rate=0.0,
    rebalance_dt=0.01,
    sim_dt=0.001,
    n_paths=200,
    seed=5,
    mu=0.05,
)
pi0 = stats["mean_value"][0]
drift = abs(stats["mean_value"][-1] - pi0) / pi0
check("hedge drift small", drift < 0.05, f"relative drift {drift:.4f}")

# invalid input surfaces as ValueError
try:
    np_ext.NetworkOption([1.0], [0.2], [[1.0]], [[1.0]], -1.0, 1.0, 2.0, 0.0)
    check("invalid strike rejected", False)
except ValueError:
    check("invalid strike rejected", True)

print("smoke test passed")
