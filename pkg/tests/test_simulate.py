import math
import warnings

import numpy as np
import pytest

from mesoepr import simulate
from mesoepr.distributions import BinningPolicy, JointDistribution, Setting, inference_stats
from mesoepr.errors import NonPhysicalState, RegimeViolation
from mesoepr.gaussian import GaussianTwoModeState, epsilon_analytic, sample_normal, two_mode_squeezed, vacuum
from mesoepr.simulate import (
    CountRecord,
    HomodyneConfig,
    estimate_jx_mean,
    sample_quadrature_pairs,
    sample_quadrature_records,
    schwinger_counts,
    simulate_schwinger_counts,
    spin_outcomes,
)
from mesoepr.steering import SteeringEstimator, records_to_array


def _eps(xx, pp, bins=100):
    policy = BinningPolicy.uniform(bins)
    sx = inference_stats(JointDistribution.from_samples(xx[:, 0], xx[:, 1], policy))
    sp = inference_stats(JointDistribution.from_samples(pp[:, 0], pp[:, 1], policy))
    return math.sqrt(sx.var_inf * sp.var_inf)


def test_vacuum_records_give_unit_epsilon():
    recs = sample_quadrature_records(vacuum(), 10**5, seed=4)
    assert len(recs) == 2 * 10**5
    est = SteeringEstimator().fit(recs)
    assert est.epsilon_ == pytest.approx(1.0, abs=0.01)


def test_tmss_records_epsilon():
    s = two_mode_squeezed(1.0)
    xx = sample_quadrature_pairs(s, "X", 10**6, seed=6)
    pp = sample_quadrature_pairs(s, "P", 10**6, seed=6)
    assert _eps(xx, pp, bins=400) == pytest.approx(1 / math.cosh(2.0), rel=0.01)


def test_quadrature_records_deterministic():
    a = records_to_array(sample_quadrature_records(two_mode_squeezed(0.3), 1000, seed=9))
    b = records_to_array(sample_quadrature_records(two_mode_squeezed(0.3), 1000, seed=9))
    assert a.tobytes() == b.tobytes()


def test_workers_do_not_change_output():
    s = two_mode_squeezed(0.5)
    n = 3 * simulate.BLOCK_SIZE + 17
    serial = sample_quadrature_pairs(s, "P", n, seed=1, workers=1)
    threaded = sample_quadrature_pairs(s, "P", n, seed=1, workers=3)
    assert serial.tobytes() == threaded.tobytes()
    cfg = HomodyneConfig(1e6, shots=n, seed=2)
    assert schwinger_counts(s, cfg).tobytes() == schwinger_counts(s, cfg, workers=4).tobytes()


def test_prefix_stability_across_sizes():
    s = two_mode_squeezed(0.5)
    short = sample_quadrature_pairs(s, "X", 1000, seed=3)
    long = sample_quadrature_pairs(s, "X", 2 * simulate.BLOCK_SIZE, seed=3)
    np.testing.assert_array_equal(short, long[:1000])


def test_vacuum_spin_shot_noise():
    e2 = 1e6
    counts = schwinger_counts(vacuum(), HomodyneConfig(e2, 0.0, 0.0, shots=10**5, seed=1))
    jb = spin_outcomes(counts)[:, 1]
    assert jb.var() == pytest.approx(e2 / 4, rel=0.03)
    assert estimate_jx_mean(counts) == pytest.approx(e2 / 2, rel=1e-3)


def test_counts_are_nonnegative_integers():
    with pytest.warns(UserWarning):
        cfg = HomodyneConfig(100.0, shots=5000, seed=1)
    counts = schwinger_counts(two_mode_squeezed(1.0), cfg)
    assert counts.dtype == np.int64 and counts.min() >= 0


@pytest.mark.parametrize("theta, sign", [(0.0, 1.0), (math.pi / 2, -1.0)])
def test_angle_consistency(theta, sign):
    r, e2, n = 1.0, 1e6, 200_000
    counts = schwinger_counts(two_mode_squeezed(r), HomodyneConfig(e2, theta, theta, shots=n, seed=5))
    quad = spin_outcomes(counts) / (math.sqrt(e2) / 2)
    cov = np.cov(quad.T)
    c, s = math.cosh(2 * r), math.sinh(2 * r)
    se = math.sqrt(2 / n) * c
    assert abs(cov[0, 0] - c) < 4 * se and abs(cov[1, 1] - c) < 4 * se
    assert abs(cov[0, 1] - sign * s) < 4 * se


def test_normalization_bridge_converges_with_lo_intensity():
    s = two_mode_squeezed(1.0)
    n = 50_000  # a single block, so the quadrature draws are shared across E
    deviations = []
    for e2 in (1e4, 1e6, 1e8):
        parts, exact = [], []
        for theta, seed in ((0.0, 21), (math.pi / 2, 22)):
            counts = schwinger_counts(s, HomodyneConfig(e2, theta, theta, shots=n, seed=seed))
            scale = math.sqrt(estimate_jx_mean(counts) / 2)
            parts.append(spin_outcomes(counts) / scale)
            # the infinite-E readout: same stream, quadratures read without rounding
            rng = np.random.default_rng([seed, simulate._SCHWINGER_STREAM, 0])
            mean, cov = s.rotated_marginal(theta, theta)
            exact.append(sample_normal(mean, cov, n, rng))
        deviations.append(abs(_eps(*parts) - _eps(*exact)))
    assert deviations[0] > deviations[1] > deviations[2]
    assert deviations[2] < 1e-3


def test_regime_checks():
    with pytest.raises(RegimeViolation):
        HomodyneConfig(5.0)
    with pytest.warns(UserWarning):
        HomodyneConfig(100.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        HomodyneConfig(1e4)


def test_non_physical_state():
    bad = GaussianTwoModeState(np.zeros(4), 0.1 * np.eye(4))
    with pytest.raises(NonPhysicalState):
        schwinger_counts(bad, HomodyneConfig(1e6, shots=10))
    with pytest.raises(NonPhysicalState):
        sample_quadrature_pairs(bad, Setting.X, 10)


def test_count_records():
    recs = simulate_schwinger_counts(vacuum(), HomodyneConfig(1e4, shots=10, seed=3))
    assert len(recs) == 10 and isinstance(recs[0], CountRecord)
    arr = schwinger_counts(vacuum(), HomodyneConfig(1e4, shots=10, seed=3))
    np.testing.assert_array_equal([[r.spin_a, r.spin_b] for r in recs], spin_outcomes(arr))


def test_loss_raises_simulated_epsilon():
    from mesoepr.gaussian import apply_loss
    s = two_mode_squeezed(1.0)
    lossy = apply_loss(s, 0.5, 0.5)
    e0 = _eps(sample_quadrature_pairs(s, "X", 10**5, 1), sample_quadrature_pairs(s, "P", 10**5, 1))
    e1 = _eps(sample_quadrature_pairs(lossy, "X", 10**5, 1), sample_quadrature_pairs(lossy, "P", 10**5, 1))
    assert e1 > e0
    assert e1 == pytest.approx(epsilon_analytic(lossy), rel=0.03)
