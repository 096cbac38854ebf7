"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N [...]: PASS|FAIL`` line; the lines are
also collected into a summary section at the end of the pytest run. Run on its
own with ``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
"""
import json
import math
import sys
import time

import numpy as np
import pytest
from click.testing import CliRunner

from conftest import ACCEPTANCE_RESULTS
from mesoepr.cli import main
from mesoepr.distributions import BinningPolicy, JointDistribution, inference_stats
from mesoepr.fock import (
    FockVector,
    certify,
    dl_bound,
    duan_fock,
    load_default_table,
    min_duan_over_support,
    nbar_lower_bound,
    support_indices,
    tmss_fock,
)
from mesoepr.gaussian import apply_loss, duan_analytic, epsilon_analytic, two_mode_squeezed
from mesoepr.simulate import sample_quadrature_pairs
from mesoepr.steering import (
    DeltaLRParams,
    SchwingerConfig,
    critical_delta,
    delta_j,
    epsilon_delta_gaussian,
    epsilon_delta_general,
    threshold_epsilon,
)

TMSS_EPS = 0.2658


def record(number, name, ok, detail):
    line = f"criterion {number} [{name}]: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    ACCEPTANCE_RESULTS.append(line)
    assert ok, line


def test_criterion_1_threshold_reproduction():
    a, b = critical_delta(0.176), critical_delta(0.42)
    ok = abs(a - 0.633) <= 0.005 and abs(b - 0.40) <= 0.01
    record(1, "threshold reproduction", ok, f"critical_delta(0.176)={a:.5f}, critical_delta(0.42)={b:.5f}")


def test_criterion_2_fock_table_anchor():
    start = time.perf_counter()
    d10 = min_duan_over_support(10)
    elapsed = time.perf_counter() - start
    dim = len(support_indices(10, 10))
    ok = abs(d10 - 0.2228) <= 5e-4 and elapsed < 10 and dim <= 66
    record(2, "Fock-table anchor", ok, f"D_10={d10:.6f}, subspace dim {dim}, {elapsed:.2f} s")


def test_criterion_3_certification_narrative():
    res = certify(0.43)
    d3 = next(r.d_value for r in load_default_table() if r.n0 == 3)
    ok = res.classification.value == "two_way_steerable" and res.n0_min >= 3 and d3 > 0.43
    record(3, "certification narrative", ok,
           f"{res.classification.value}, n0_min={res.n0_min}, D_3={d3:.5f}, nbar_min={res.nbar_min:.5f}")


def test_criterion_4_schwinger_magnitude():
    dj = delta_j(critical_delta(0.176), SchwingerConfig.from_jx(1e11))
    record(4, "Schwinger magnitude", 1.0e5 <= dj <= 2.0e5, f"delta_J={dj:.4e}")


def test_criterion_5_tmss_identity_chain():
    start = time.perf_counter()
    worst = {"eps": 0.0, "duan": 0.0, "fock": 0.0, "dl": 0.0}
    for r in (0.25, 0.5, 1.0):
        s = two_mode_squeezed(r)
        worst["eps"] = max(worst["eps"], abs(epsilon_analytic(s) - 1 / math.cosh(2 * r)))
        worst["duan"] = max(worst["duan"], abs(duan_analytic(s) - math.exp(-2 * r)))
        worst["fock"] = max(worst["fock"], abs(duan_fock(tmss_fock(r, 60)) - math.exp(-2 * r)))
        worst["dl"] = max(worst["dl"], abs(dl_bound(2 * math.sinh(r) ** 2) - math.exp(-2 * r)))
    elapsed = time.perf_counter() - start
    ok = (worst["eps"] <= 1e-12 and worst["duan"] <= 1e-12 and worst["fock"] <= 1e-7
          and worst["dl"] <= 1e-12 and elapsed < 5)
    detail = ", ".join(f"{k} err {v:.1e}" for k, v in worst.items())
    record(5, "TMSS identity chain", ok, f"{detail}, {elapsed:.2f} s")


def test_criterion_6_general_vs_gaussian():
    start = time.perf_counter()
    s = two_mode_squeezed(1.0)
    policy = BinningPolicy.uniform(200)
    stats = []
    for setting in ("X", "P"):
        pairs = sample_quadrature_pairs(s, setting, 10**6, seed=2024)
        stats.append(inference_stats(JointDistribution.from_samples(pairs[:, 0], pairs[:, 1], policy)))
    sigma = math.sqrt(TMSS_EPS)
    errors = {}
    for delta in (0.0, 0.25, 0.5, 1.0):
        general = epsilon_delta_general(*stats, DeltaLRParams.symmetric(delta))
        errors[delta] = abs(general / epsilon_delta_gaussian(sigma, delta) - 1)
    elapsed = time.perf_counter() - start
    ok = max(errors.values()) <= 0.02 and elapsed < 60
    detail = ", ".join(f"delta={d}: {e:.2%}" for d, e in errors.items())
    record(6, "general vs Gaussian", ok, f"{detail}, {elapsed:.1f} s")


def test_criterion_7_end_to_end_pipeline(tmp_path):
    # 200 bins, the resolution of criterion 6; the default 100 bins carry a
    # ~2.5% binning bias at this squeezing (see the Sheppard test)
    start = time.perf_counter()
    runner = CliRunner()
    data = tmp_path / "schwinger.csv"
    res = runner.invoke(main, ["simulate", "schwinger", "--r", "1", "--lo-intensity", "1e6",
                               "--n", "1000000", "--seed", "11", "--output", str(data)])
    assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["analyze", "--input", str(data), "--bins", "200", "--delta", "0:1.6:0.01"])
    assert res.exit_code == 0, res.output
    rep = json.loads(res.stdout)
    elapsed = time.perf_counter() - start
    eps, crit = rep["epsilon"], rep["critical_delta"]
    rel = abs(eps / TMSS_EPS - 1)
    below = [row for row in rep["epsilon_delta"] if row["delta"] < crit - 0.02]
    ok = rel <= 0.02 and all(row["nonlocal"] for row in below) and elapsed < 300
    record(7, "end-to-end pipeline", ok,
           f"epsilon={eps:.5f} ({rel:.2%} off), critical_delta={crit:.4f}, "
           f"{len(below)} deltas below it all nonlocal, jx_mean from {rep['config']['jx_mean_source']}, "
           f"{elapsed:.1f} s")


def test_criterion_8_property_suites():
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    checks = {}

    physical = 0
    for _ in range(1000):
        r, ea, eb, nth = rng.uniform(0, 2.5), rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 5)
        physical += apply_loss(two_mode_squeezed(r), ea, eb, nth).is_physical()
    checks["physicality"] = physical == 1000

    grid = np.linspace(0, 0.99, 100)
    round_trip = max(abs(critical_delta(threshold_epsilon(d)) - d) for d in grid)
    checks["round trip"] = round_trip <= 1e-10

    table = {n0: min_duan_over_support(n0) for n0 in range(1, 7)}
    violations = 0
    for _ in range(1000):
        n0 = int(rng.integers(1, 7))
        amps = np.zeros((n0 + 2, n0 + 2), dtype=complex)
        for i, j in support_indices(n0, n0):
            amps[i, j] = rng.normal() + 1j * rng.normal()
        violations += duan_fock(FockVector.from_unnormalized(amps)) < table[n0] - 1e-9
    checks["variational"] = violations == 0

    thresholds = [threshold_epsilon(d) for d in grid]
    dl = [dl_bound(n) for n in np.linspace(0, 20, 200)]
    dn0 = [r.d_value for r in load_default_table()]
    nb = [nbar_lower_bound(d) for d in np.linspace(0.01, 1, 200)]
    checks["monotone"] = (all(b < a for a, b in zip(thresholds, thresholds[1:]))
                          and all(b < a for a, b in zip(dl, dl[1:]))
                          and all(b < a for a, b in zip(dn0, dn0[1:]))
                          and all(b < a for a, b in zip(nb, nb[1:])))
    elapsed = time.perf_counter() - start
    ok = all(checks.values()) and elapsed < 120
    detail = ", ".join(f"{k} {'ok' if v else 'broken'}" for k, v in checks.items())
    record(8, "property suites", ok, f"{detail}, round-trip err {round_trip:.1e}, {elapsed:.1f} s")


def test_criterion_9_experimental_points_are_annotated_inputs():
    # excluded from acceptance; checked only as inputs that flow through the tools
    from mesoepr.cli import AnalysisConfig, analyze
    from mesoepr.records import reported_values
    values = reported_values()
    eps = [v for v in values if v.kind == "epsilon"]
    ds = [v for v in values if v.kind == "D"]
    crit = {v.value: analyze(AnalysisConfig(summary={"eps": v.value}))["critical_delta"] for v in eps}
    n0 = {v.value: certify(v.value).n0_min for v in ds}
    ok = (sorted(crit) == [0.176, 0.42, 0.71, 0.74, 0.85] and sorted(n0) == [0.2228, 0.43, 0.5, 0.8]
          and all(v.source for v in values))
    record(9, "experimental points (excluded, inputs only)", ok,
           f"{len(eps)} epsilon and {len(ds)} D values with sources; "
           + ", ".join(f"eps {k}: delta_c {c:.3f}" for k, c in sorted(crit.items())))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
