"""The eight acceptance criteria, each with its tolerance and runtime limit.

Every test records one PASS/FAIL line, printed in the pytest terminal summary.
"""

import time

import numpy as np
import pytest

from composed_lab import composed_training as ct
from composed_lab import discrete_composed as dc
from composed_lab.relu_net import backprop, init_net
from composed_lab.sanstype import check, corrupt, emit_dataset, generate_example
from composed_lab.sanstype.dataset import DatasetConfig
from composed_lab.spline import (
    StaircaseSpec,
    base_construction,
    spline_norm,
    staircase_std_interpolant,
    theorem_report,
)
from composed_lab.valid_set import ValidSet

from .fixtures import CORRUPTION_FIXTURES, SWAP_MISSING_BOOL


def _random_spec(rng, n, delta=None, integer=True):
    if integer:
        steps = rng.integers(1, 4, n - 1) * rng.choice([-1, 1], n - 1)
        values = np.concatenate([[0], np.cumsum(steps)]).astype(float)
    else:
        values = np.cumsum(rng.uniform(0.1, 2, n) * rng.choice([-1, 1], n))
    lengths = rng.uniform(0.5, 2.0, n)
    if delta is None:
        delta = rng.uniform(0.05, 1.0) * lengths.min()
    return StaircaseSpec.from_values(values, delta, lengths, start=rng.uniform(-5, 5))


def test_1_norm_exactness(record):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 21))
        spec = _random_spec(rng, n, integer=False)
        y = spec.values[:, 0]
        # oracle: sum of absolute steps over the gap, written out directly
        want = sum(abs(b - a) for a, b in zip(y[:-1], y[1:])) / spec.delta if n > 1 else 0.0
        got = spline_norm(staircase_std_interpolant(spec))
        worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
    fig_ok = all(
        spline_norm(staircase_std_interpolant(StaircaseSpec.rounding_staircase(n, d))) == pytest.approx((n - 1) / d, rel=1e-9)
        for n in (2, 5, 10, 20)
        for d in (0.5, 0.1, 0.02)
    )
    spec = StaircaseSpec.rounding_staircase(5, 0.5)
    V = ValidSet.integers(0, 6)
    gaps = [abs(spline_norm(base_construction(spec, V, eps)) - 1.0) for eps in (1e-1, 1e-2, 1e-3, 1e-4)]
    to_one = gaps[-1] <= 1e-3 and all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and fig_ok and to_one and elapsed < 1.0
    record("1 norm exactness", ok, f"max rel err {worst:.1e}, |base norm - 1| {gaps[-1]:.1e}, {elapsed:.2f}s")
    assert ok


def test_2_construction_validity(record):
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    n_adj = n_non = 0
    failures = []
    for i in range(100):
        n = int(rng.integers(2, 16))
        spec = _random_spec(rng, n)
        y = spec.values[:, 0]
        # integers cover every value; dropping some in-between ones mixes adjacent and non-adjacent pairs
        full = np.arange(y.min() - 1, y.max() + 2)
        keep = np.isin(full, y) | (rng.random(len(full)) < 0.5)
        V = ValidSet(full[keep])
        rep = theorem_report(spec, V)
        n_adj += rep["stats"]["I"][0]
        n_non += rep["stats"]["J"][0]
        if rep["grid_match"] != 1.0 or not rep["measured"] <= rep["upper"] + rep["slack"]:
            failures.append(i)
    elapsed = time.perf_counter() - start
    ok = not failures and n_adj > 0 and n_non > 0 and elapsed < 10.0
    record("2 construction validity", ok, f"{100 - len(failures)}/100 specs, I={n_adj} J={n_non}, {elapsed:.2f}s")
    assert ok


def test_3_gap_trend(record):
    start = time.perf_counter()
    deltas = np.array([0.5, 0.1, 0.02, 0.004])
    V = ValidSet.integers(0, 7)
    ratios = []
    for d in deltas:
        rep = theorem_report(StaircaseSpec.from_values(np.arange(1, 7), d), V)
        assert rep["stats"]["J"] == [0]
        ratios.append(rep["ratio"])
    slope = np.polyfit(1 / deltas, ratios, 1)[0]
    elapsed = time.perf_counter() - start
    ok = slope >= 0.5 and all(b > a for a, b in zip(ratios, ratios[1:])) and elapsed < 5.0
    record("3 gap trend", ok, f"ratio slope in 1/delta {slope:.3f}, ratios {np.round(ratios, 2).tolist()}, {elapsed:.2f}s")
    assert ok


def _fd_rel_error(objective, net, h=1e-6):
    _, grad = objective(net)
    theta = net.flatten()
    g = grad.flatten()
    fd = np.zeros_like(theta)
    for j in range(len(theta)):
        up, dn = theta.copy(), theta.copy()
        up[j] += h
        dn[j] -= h
        fd[j] = (objective(net.unflatten(up))[0] - objective(net.unflatten(dn))[0]) / (2 * h)
    return float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12))


def test_4_gradient_fidelity(record):
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    den = ct.pretrain_denoiser(np.arange(0, 6), 0.5, ct.DenoiserConfig(hidden=32, copies=20, seed=1))
    plain, composed = [], []
    for i in range(20):
        net = init_net(1, 8, 1, seed=1000 + i)
        X = rng.uniform(-2, 2, (12, 1))
        Y = rng.uniform(0, 5, (12, 1))
        plain.append(_fd_rel_error(lambda m: backprop(m, X, Y), net))
        net2 = init_net(1, 8, 1, seed=2000 + i).with_affine(0.0, 1.0, 2.5, 2.0)
        composed.append(_fd_rel_error(lambda m: ct.composed_loss(m, den, X, Y, 0.3), net2))
    elapsed = time.perf_counter() - start
    ok = max(plain) <= 1e-4 and max(composed) <= 1e-4 and elapsed < 5.0
    record("4 gradient fidelity", ok, f"max rel err plain {max(plain):.1e}, composed {max(composed):.1e}, {elapsed:.2f}s")
    assert ok


def test_5_reinforce_unbiased(record):
    start = time.perf_counter()
    spaces = [4, 8, 9, 16]
    worst = 0.0
    for i in range(20):  # seed = instance index, fixed before looking at any result
        model, den, X, Y = dc.random_instance(spaces[i % 4], seed=i)
        exact = dc.exact_grad(model, den, X, Y)
        est, err = dc.reinforce_grad(model, den, X, Y, n_samples=100_000, seed=i)
        worst = max(worst, float(dc.z_scores(est, err, exact).max()))
    elapsed = time.perf_counter() - start
    ok = worst <= 3.0 and elapsed < 30.0
    record("5 REINFORCE unbiasedness", ok, f"max |z| {worst:.2f} over 20 instances, {elapsed:.2f}s")
    assert ok


@pytest.mark.slow
def test_6_staircase_composed_vs_standard(record):
    start = time.perf_counter()
    spec = StaircaseSpec.rounding_staircase(5, 0.5)
    wins, c_std, c_comp = 0, [], []
    for seed in range(10):
        arms = ct.run_staircase_experiment(spec, ct.ComposedConfig(seed=seed))["arms"]
        wins += arms["composed"]["em_ood"] >= arms["standard"]["em_ood"]
        c_std.append(arms["standard"]["complexity"])
        c_comp.append(arms["composed"]["complexity"])
    elapsed = time.perf_counter() - start
    med_std, med_comp = float(np.median(c_std)), float(np.median(c_comp))
    ok = wins >= 8 and med_comp < med_std and elapsed < 300.0
    record(
        "6 staircase composed vs standard",
        ok,
        f"OOD EM wins {wins}/10, median C composed {med_comp:.2f} vs standard {med_std:.2f}, {elapsed:.0f}s",
    )
    assert ok


@pytest.mark.slow
def test_7_sanstype_soundness(record, tmp_path):
    start = time.perf_counter()
    bad = sum(check(ex.code, ex.tests).kind != "Correct" for ex in (generate_example(s, 0) for s in range(10_000)))
    fixtures_ok = all(
        check(clean, tests).kind == "Correct"
        and all(check(corrupt(clean, np.random.default_rng(s), kind), tests).kind == want for s in range(5))
        for kind, (clean, tests, want) in CORRUPTION_FIXTURES.items()
    )
    fig2_ok = check(SWAP_MISSING_BOOL["code"], SWAP_MISSING_BOOL["tests"]).kind == "CompileErr"
    cfg = DatasetConfig(seed=3, n_labeled=50, n_unlabeled=200, n_val=20, n_test=20, n_ood=20)
    emit_dataset(tmp_path / "a", cfg)
    emit_dataset(tmp_path / "b", cfg)
    same = all((tmp_path / "a" / f.name).read_bytes() == f.read_bytes() for f in (tmp_path / "b").iterdir())
    elapsed = time.perf_counter() - start
    ok = bad == 0 and fixtures_ok and fig2_ok and same and elapsed < 120.0
    record(
        "7 SansType soundness",
        ok,
        f"{10_000 - bad}/10000 Correct, {len(CORRUPTION_FIXTURES)} corruption fixtures, byte-identical {same}, "
        f"{elapsed:.0f}s",
    )
    assert ok


@pytest.mark.slow
def test_8_test_time_denoiser_protocol(record):
    start = time.perf_counter()
    never_lower = True
    tt_valid, comp_valid = [], []
    for seed in range(10):
        task = dc.make_discrete_task(seed=seed)
        arms = dc.run_discrete_experiment(task, dc.DiscreteConfig(seed=seed))["arms"]
        never_lower &= arms["standard+denoiser"]["valid_rate"] >= arms["standard"]["valid_rate"]
        tt_valid.append(arms["standard+denoiser"]["valid_rate"])
        comp_valid.append(arms["composed"]["valid_rate"])
    elapsed = time.perf_counter() - start
    ok = never_lower and np.median(comp_valid) >= np.median(tt_valid) and elapsed < 300.0
    record(
        "8 test-time denoiser protocol",
        ok,
        f"denoiser never lowers validity {never_lower}, median valid composed {np.median(comp_valid):.2f} "
        f"vs test-time {np.median(tt_valid):.2f}, {elapsed:.0f}s",
    )
    assert ok
