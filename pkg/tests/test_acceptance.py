"""End-to-end acceptance checks, one test (or group of tests) per criterion.

Each check prints a PASS/FAIL line in the "acceptance criteria" section of the
pytest terminal summary. Tolerances are the stated ones; nothing is relaxed.
Criteria 3 and 5 replay full 12-run experiments and take several minutes.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from deepgreedy import cli
from deepgreedy.core import SIM_STREAM, ExperimentConfig, epsilon_value, stream_rng
from deepgreedy.environments import expected_optimal_mean
from deepgreedy.errors import IdxFormatError, IdxRangeError, IdxTruncationError
from deepgreedy.harness import (
    EnvSpec,
    fit_loglog_slope,
    monte_carlo_lemma_check,
    run_replicates,
    run_single,
    simulate_exploration_counts,
)
from deepgreedy.mnist import (
    IdxImageSet,
    IdxLabelSet,
    load_idx_pair,
    parse_idx_images,
    parse_idx_labels,
    serialize_idx_images,
    serialize_idx_labels,
)
from deepgreedy.predictors import MlpModel
from deepgreedy.theory import (
    TheoryParams,
    min_valid_t,
    optimal_exponent,
    regret_lower_bound,
    regret_upper_bound,
)

ZETA2 = math.pi ** 2 / 6


# -- 1. exploration-count lemma --------------------------------------------------


@pytest.mark.criterion(1)
def test_lemma_monte_carlo(capsys, record_property):
    start = time.perf_counter()
    rc = cli.main(["lemma-check", "--k", "2", "--p", "0.3333333", "--t", "1000",
                   "--replicates", "10000"])
    elapsed = time.perf_counter() - start
    out = capsys.readouterr().out
    assert rc == 0, out
    assert "PASS" in out

    res = monte_carlo_lemma_check(2, 0.3333333, 1000, 10_000, stream_rng(0, SIM_STREAM))
    b = res.bound
    floor = b - 4 * math.sqrt(b * (1 - b) / 10_000)
    record_property("detail", f"empirical={res.empirical:.5f} bound={b:.6f} floor={floor:.6f} "
                              f"threshold={res.threshold:.4f} {elapsed:.2f}s")
    assert res.threshold == pytest.approx(37.5, abs=1e-4)
    assert b == pytest.approx(0.999353, abs=1e-6)
    assert res.empirical >= floor
    assert elapsed < 10


# -- 2. regret lower bound on a constant-gap problem --------------------------------


@pytest.mark.criterion(2)
def test_regret_lower_bound_sandwich(record_property):
    replicates, t, K, delta = 10_000, 100, 2, 1.0
    config = ExperimentConfig(total_steps=t, num_actions=K, epsilon_exponent=1.0)
    spec = EnvSpec("gap", gap=delta)
    start = time.perf_counter()
    regrets = np.empty(replicates)
    for r in range(replicates):
        res = run_single(config.with_seed(r), spec, "oracle-eps-greedy")
        regrets[r] = res.history.records[t - 1].instant_regret
    elapsed = time.perf_counter() - start
    mean = regrets.mean()
    margin = 4 * math.sqrt(0.005 / replicates)
    lower = regret_lower_bound(TheoryParams(K, 1.0, delta, [1.0]), t)
    upper = epsilon_value(t, 1.0) * delta
    record_property("detail", f"mean regret at t=100: {mean:.5f} in [{lower - margin:.5f}, "
                              f"{upper + margin:.5f}] {elapsed:.1f}s")
    assert lower == pytest.approx(0.005)
    assert lower - margin <= mean <= upper + margin
    assert elapsed < 30


# -- 3. nonlinear task: network converges, linear methods do not -----------------------

CODEBOOK = ExperimentConfig(total_steps=2000, num_actions=5, noise_sigma=1.0)
_codebook_cache = {}


def codebook_summary(policy):
    if policy not in _codebook_cache:
        _codebook_cache[policy] = run_replicates(CODEBOOK, EnvSpec("codebook"), policy, 12)[0]
    return _codebook_cache[policy]


@pytest.mark.criterion(3)
@pytest.mark.slow
@pytest.mark.parametrize(
    "policy,low,high",
    [
        ("deep-eps-greedy", 6.0, math.inf),
        ("linucb", 4.0, 5.0),
        ("linear", 4.0, 5.0),
        ("random", 4.2, 4.8),
        ("optimal", 7.79175 - 0.15, 7.79175 + 0.15),
    ],
)
def test_codebook_policies(policy, low, high, record_property):
    summary = codebook_summary(policy)
    final = summary.mean_normalized_reward[-1]
    record_property("detail", f"{policy}={final:.3f}")
    assert summary.replicates == 12 and not summary.failures
    assert low <= final <= high


@pytest.mark.slow
def test_deep_regret_shrinks_between_quarter_and_full_horizon():
    regret = codebook_summary("deep-eps-greedy").mean_regret
    assert regret[-1] < regret[len(regret) // 4 - 1]


def test_codebook_optimal_anchor():
    assert expected_optimal_mean(5) == pytest.approx(7.79175, abs=1e-12)


# -- 4. linear control task -----------------------------------------------------------


@pytest.mark.criterion(4)
@pytest.mark.slow
def test_linear_methods_solve_linear_task(record_property):
    config = ExperimentConfig(total_steps=2000, num_actions=5, context_dim=10, noise_sigma=0.1)
    finals = {
        pol: run_replicates(config, EnvSpec("linear"), pol, 12)[0].mean_normalized_reward[-1]
        for pol in ("optimal", "linear", "linucb")
    }
    ratios = {pol: finals[pol] / finals["optimal"] for pol in ("linear", "linucb")}
    record_property("detail", " ".join(f"{k}={v:.3%}" for k, v in ratios.items())
                    + f" of optimal {finals['optimal']:.3f}")
    assert finals["optimal"] > 0
    assert all(r >= 0.95 for r in ratios.values())


# -- 5. regret decays like a power law ----------------------------------------------


@pytest.mark.criterion(5)
@pytest.mark.slow
def test_regret_loglog_slope(record_property):
    config = ExperimentConfig(total_steps=5000, num_actions=5, noise_sigma=0.0)
    summary, _ = run_replicates(config, EnvSpec("codebook"), "deep-eps-greedy", 12)
    slope = fit_loglog_slope(summary.mean_regret, 500, 5000)
    record_property("detail", f"slope={slope:.3f} final regret={summary.mean_regret[-1]:.4f}")
    assert summary.replicates == 12
    assert -1.0 <= slope <= -0.2


# -- 6. backprop against finite differences ------------------------------------------


def finite_difference_gradient(model, X, y, h=1e-6):
    grads = []
    for p in model.params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = model.loss(X, y)
            p[idx] = old - h
            down = model.loss(X, y)
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def relative_error(a, b):
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-7)
    return float(np.max(np.abs(a - b) / scale))


@pytest.mark.criterion(6)
def test_gradient_matches_finite_differences(record_property):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        m = int(rng.integers(1, 9))
        widths = tuple(int(w) for w in rng.integers(1, 9, size=rng.integers(0, 3)))
        model = MlpModel(m, widths, rng=rng)
        for p in model.params:  # nonzero biases exercise every gradient slot
            p += rng.normal(scale=0.1, size=p.shape)
        n = int(rng.integers(1, 12))
        X, y = rng.normal(size=(n, m)), rng.normal(size=n)
        analytic = model.gradient(X, y)
        numeric = finite_difference_gradient(model, X, y)
        worst = max(worst, max(relative_error(a, b) for a, b in zip(analytic, numeric)))
    elapsed = time.perf_counter() - start
    record_property("detail", f"max relative error {worst:.2e} {elapsed:.2f}s")
    assert worst < 1e-5
    assert elapsed < 5


# -- 7. best exploration exponent ------------------------------------------------------

# max_gap 9 is the largest gap of the digit task; it matches the upper-bound example.
THEORY = TheoryParams(num_actions=5, epsilon_exponent=1.0, min_gap=1.0,
                      constants=[1.0] * 5, min_sizes=[3] * 5, max_gap=9.0)


@pytest.mark.criterion(7)
def test_optimal_exponent_is_one_third(record_property):
    start = time.perf_counter()
    best = optimal_exponent(THEORY, 1e12, [0.2, 1 / 3, 0.5, 1.0])
    elapsed = time.perf_counter() - start
    record_property("detail", f"argmin p={best:.4f} {elapsed * 1e3:.1f}ms")
    assert best == 1 / 3
    assert elapsed < 1


# -- 8. lower bound never exceeds upper bound -----------------------------------------


def sandwich_grid(p):
    t0 = min_valid_t(THEORY.with_exponent(p))
    lo = max(t0 * 1.01, 1e3)
    if lo <= 1e12:
        return np.geomspace(lo, 1e12, 20), False
    # t_0 lies beyond 1e12 (p = 1 here): check the 20 points just past t_0 instead
    return np.geomspace(lo, 100 * lo, 20), True


@pytest.mark.criterion(8)
@pytest.mark.parametrize("p", [1.0, 1 / 3])
def test_bounds_sandwich(p, record_property):
    params = THEORY.with_exponent(p)
    grid, shifted = sandwich_grid(p)
    lows = [regret_lower_bound(params, t) for t in grid]
    ups = [regret_upper_bound(params, t) for t in grid]
    note = " (t_0 > 1e12, grid shifted past t_0)" if shifted else ""
    record_property("detail", f"p={p:.4f}: t in [{grid[0]:.3g}, {grid[-1]:.3g}]{note}")
    assert len(grid) == 20
    assert all(lo <= up for lo, up in zip(lows, ups))


# -- 9. starvation for p > 1 -----------------------------------------------------------


@pytest.mark.criterion(9)
def test_starvation(record_property):
    K, t, replicates = 2, 100_000, 1000
    start = time.perf_counter()
    counts = simulate_exploration_counts(K, 2.0, t, replicates, stream_rng(9, SIM_STREAM))
    check = monte_carlo_lemma_check(K, 2.0, t, replicates, stream_rng(10, SIM_STREAM),
                                    threshold=10)
    elapsed = time.perf_counter() - start
    mean_pulls = counts.mean(axis=0)
    # per-arm pulls are a sum of independent Bernoullis, so variance <= mean
    margin = 4 * math.sqrt(ZETA2 / K / replicates)
    record_property("detail", f"mean pulls {np.round(mean_pulls, 3).tolist()} <= "
                              f"{ZETA2 / K + margin:.3f}; P(min >= 10)={check.empirical:.3f} "
                              f"{elapsed:.1f}s")
    assert np.all(mean_pulls <= ZETA2 / K + margin)
    assert check.empirical <= 0.01
    assert elapsed < 10


# -- 10. IDX parsing ----------------------------------------------------------------------


@pytest.mark.criterion(10)
def test_idx_synthetic(tmp_path, record_property):
    rng = np.random.default_rng(10)
    images = IdxImageSet(rng.integers(0, 256, size=(7, 4, 6), dtype=np.uint8))
    labels = IdxLabelSet(rng.integers(0, 10, size=7, dtype=np.uint8))
    (tmp_path / "img").write_bytes(serialize_idx_images(images))
    (tmp_path / "lab").write_bytes(serialize_idx_labels(labels))
    back_img, back_lab = load_idx_pair(tmp_path / "img", tmp_path / "lab")
    np.testing.assert_array_equal(back_img.pixels, images.pixels)
    np.testing.assert_array_equal(back_lab.labels, labels.labels)

    hand = bytes([0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, *range(8)])
    np.testing.assert_array_equal(parse_idx_images(hand).pixels[1], [[4, 5], [6, 7]])

    bad_magic = bytes([0, 0, 8, 1]) + hand[4:]
    with pytest.raises(IdxFormatError) as exc:
        parse_idx_images(bad_magic)
    assert type(exc.value) is IdxFormatError
    with pytest.raises(IdxRangeError):
        parse_idx_labels(bytes([0, 0, 8, 1, 0, 0, 0, 1, 11]))
    with pytest.raises(IdxTruncationError):
        parse_idx_labels(bytes([0, 0, 8, 1, 0, 0, 0, 3, 1, 2]))
    with pytest.raises(IdxTruncationError):
        parse_idx_images(hand[:-1])
    record_property("detail", "synthetic round trip and error cases ok")


MNIST_DIR = os.environ.get("DEEPGREEDY_MNIST_DIR")


@pytest.mark.criterion(10)
@pytest.mark.skipif(not MNIST_DIR, reason="set DEEPGREEDY_MNIST_DIR to check real MNIST files")
def test_idx_real_mnist(record_property):
    root = Path(MNIST_DIR)
    for prefix, expected in (("train", 60000), ("t10k", 10000)):
        images, labels = load_idx_pair(root / f"{prefix}-images-idx3-ubyte",
                                       root / f"{prefix}-labels-idx1-ubyte")
        assert images.count == labels.count == expected
        assert (images.rows, images.cols) == (28, 28)
        assert np.all(np.bincount(labels.labels, minlength=10) > 0)
    record_property("detail", "real MNIST counts 60000/10000, all classes present")


# -- 11. byte-identical output regardless of parallelism --------------------------------


@pytest.mark.criterion(11)
def test_cli_determinism(tmp_path, capsys, record_property):
    config = tmp_path / "exp.cfg"
    config.write_text(
        "# small deep run\n"
        "env = codebook\n"
        "policy = deep-eps-greedy\n"
        "total_steps = 300\n"
        "noise_sigma = 1.0\n"
        "rng_seed = 17\n"
    )
    outputs = {}
    for reps in (1, 3):
        for par in (1, 8):
            out = tmp_path / f"r{reps}_p{par}.csv"
            rc = cli.main(["run", "--config", str(config), "--replicates", str(reps),
                           "--parallelism", str(par), "--out", str(out)])
            assert rc == 0
            outputs[reps, par] = out.read_bytes()
    capsys.readouterr()
    record_property("detail", f"run CSV {len(outputs[1, 1])} bytes, summary CSV "
                              f"{len(outputs[3, 1])} bytes, identical at parallelism 1 and 8")
    assert outputs[1, 1] == outputs[1, 8]
    assert outputs[3, 1] == outputs[3, 8]
    assert outputs[1, 1] != outputs[3, 1]
