"""Acceptance criteria, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL ...`` line; the lines are
printed together in the terminal summary and also to stdout (visible with
``-s``).
"""

import math
import time

import numpy as np
import pytest
import yaml

from conftest import ACCEPTANCE_LINES
from hdlse import kernels
from hdlse.acquisition import acq_explicit_mi, acq_implicit_mi, implicit_terms
from hdlse.cli import main
from hdlse.domain import Explicit, Implicit, classify
from hdlse.gp import gp_fit_arrays, gp_posterior
from hdlse.runner import ExperimentConfig, run_experiment
from oracles import binary_entropy, implicit_substitution_np
from test_surrogate import central_difference_check


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def random_ensembles(count, seed, max_n=200, max_m=10):
    """Mix of continuous and coarse-grid ensembles so exact ties are common."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        m = int(rng.integers(1, max_m + 1))
        n = int(rng.integers(1, max_n + 1))
        if i % 2:
            passes = rng.integers(-4, 5, size=(m, n)) / 2.0
        else:
            passes = rng.normal(rng.uniform(-3, 3), rng.uniform(0.1, 3), size=(m, n))
        out.append(passes)
    return out


LEVELS = (0.0, 0.5, 0.9, 1.0)
ORACLE_SET = random_ensembles(100, seed=2024)


def test_criterion_1_implicit_oracle():
    worst_score = 0.0
    q_mismatch = 0
    elapsed = 0.0
    for k, passes in enumerate(ORACLE_SET):
        l = LEVELS[k % 4]
        q_ref, marg_ref, _ = implicit_substitution_np(passes, l)
        t0 = time.perf_counter()
        q, _ = kernels.implicit_q(passes, passes.mean(axis=0), l)
        scores = acq_implicit_mi(passes, l).scores
        elapsed += time.perf_counter() - t0
        q_mismatch += int(np.count_nonzero(q != q_ref))
        worst_score = max(worst_score, float(np.max(np.abs(scores - marg_ref))))
    ok = q_mismatch == 0 and worst_score <= 1e-12 and elapsed < 10
    report(1, ok, f"q mismatches={q_mismatch} max|score err|={worst_score:.2e} fast-path time={elapsed:.3f}s")


def test_criterion_2_hard_mode_identity():
    worst_cond = 0.0
    worst_exp = 0.0
    rng = np.random.default_rng(7)
    for k, passes in enumerate(ORACLE_SET):
        _, cond, _ = implicit_terms(passes, LEVELS[k % 4])
        worst_cond = max(worst_cond, float(np.max(np.abs(cond))))
        h = float(rng.choice(passes.ravel())) if k % 2 else float(rng.normal())
        frac = (passes > h).mean(axis=0)
        ref = np.array([binary_entropy(p) for p in frac])
        worst_exp = max(worst_exp, float(np.max(np.abs(acq_explicit_mi(passes, h).scores - ref))))
    ok = worst_cond < 1e-15 and worst_exp <= 1e-12
    report(2, ok, f"max|conditional term|={worst_cond:.1e} max|explicit - H_b|={worst_exp:.1e}")


def test_criterion_3_information_bounds():
    rng = np.random.default_rng(3)
    violations = 0
    for k, passes in enumerate(random_ensembles(1000, seed=99, max_n=60, max_m=20)):
        m = passes.shape[0]
        e = acq_explicit_mi(passes, float(rng.normal())).scores
        i = acq_implicit_mi(passes, float(rng.uniform())).scores
        violations += int(np.sum((e < 0) | (e > math.log(2) + 1e-12)))
        violations += int(np.sum((i < 0) | (i > math.log(m) + 1e-12)))
    report(3, violations == 0, f"bound violations over 1000 ensembles={violations}")


def test_criterion_4_gradient_check():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        d = int(rng.integers(1, 4))
        layers = int(rng.integers(1, 4))
        width = int(rng.integers(2, 9))
        worst = max(worst, central_difference_check(rng, d, layers, width))
    report(4, worst < 1e-4, f"max relative error over 20 networks={worst:.2e}")


DESK = dict(
    benchmark="ackley", dim=2, pool_size=2000, super_fraction=0.2, init_count=6, batch_size=10,
    budget=120, M=50, repetitions=3, seed=0,
    # tune on the initial design only; per-iteration tuning does not fit the runtime limit
    tune_stride=13, tune_epochs=300,
)


@pytest.mark.slow
def test_criterion_5_desk_scale():
    t0 = time.perf_counter()
    finals = {}
    for method in ("exphlse", "random", "imphlse"):
        traces = run_experiment(ExperimentConfig.from_mapping({**DESK, "method": method}))
        finals[method] = float(np.mean([t.records[-1].f1_super for t in traces]))
    elapsed = time.perf_counter() - t0
    exp, rnd, imp = finals["exphlse"], finals["random"], finals["imphlse"]
    ok = exp >= 0.85 and exp >= rnd + 0.05 and imp >= 0.75 and elapsed < 15 * 60
    report(
        5, ok,
        f"exphlse={exp:.3f} (need >=0.85 and >= random+0.05) random={rnd:.3f} "
        f"imphlse={imp:.3f} (need >=0.75) runtime={elapsed:.0f}s",
    )


def test_criterion_6_consistency():
    rng = np.random.default_rng(6)
    mismatches = 0
    for k in range(1000):
        n = int(rng.integers(1, 300))
        values = rng.integers(-5, 6, size=n) / 2.0 if k % 2 else rng.normal(size=n) * 10
        l = float(rng.choice(LEVELS)) if k % 3 == 0 else float(rng.uniform())
        if classify(values, Implicit(l)) != classify(values, Explicit(l * values.max())):
            mismatches += 1
    report(6, mismatches == 0, f"mismatching partitions over 1000 vectors={mismatches}")


@pytest.mark.slow
def test_criterion_7_gp_baseline():
    rng = np.random.default_rng(8)
    x = rng.uniform(-32.768, 32.768, size=(30, 2))
    from hdlse.benchmarks import ackley

    y = ackley(x)
    model = gp_fit_arrays(x, y, restarts=5, seed=0, noise_variance=0.0)
    interp = float(np.max(np.abs(gp_posterior(model, x)[0] - y)))
    cfg = {k: v for k, v in DESK.items() if k not in ("batch_size", "tune_stride", "tune_epochs")}
    traces = run_experiment(ExperimentConfig.from_mapping({**cfg, "method": "straddle"}))
    fractions = []
    for t in traces:
        f = np.array([r.f1_super for r in t.records])
        fractions.append(float(np.mean(np.diff(f) >= 0)))
    mono = float(np.mean(fractions))
    ok = interp <= 1e-6 and mono >= 0.8
    report(7, ok, f"max interpolation error={interp:.1e} monotone step fraction={mono:.3f} (need >=0.8)")


def best_time(fn, repeats=9):
    fn()
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def test_criterion_8_scaling():
    rng = np.random.default_rng(5)
    big = rng.normal(size=(50, 100_000))
    small = big[:, :50_000].copy()
    ratios = {}
    for name, fn in (
        ("explicit", lambda p: acq_explicit_mi(p, 0.3)),
        ("implicit", lambda p: acq_implicit_mi(p, 0.9)),
    ):
        ratios[name] = best_time(lambda: fn(big)) / best_time(lambda: fn(small))
    ok = ratios["explicit"] <= 2.5 and ratios["implicit"] <= 3.0
    report(
        8, ok,
        f"time ratio 100k/50k explicit={ratios['explicit']:.2f} (<=2.5) "
        f"implicit={ratios['implicit']:.2f} (<=3.0) backend={kernels.BACKEND}",
    )


def test_criterion_9_cli_determinism(tmp_path):
    cfg = dict(method="exphlse", benchmark="ackley", dim=2, pool_size=400, budget=20, batch_size=10,
               M=20, epochs=200, repetitions=2, tune_stride=2, tune_epochs=50, seed=4)
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    codes = [main(["run", "--config", str(path), "--out", str(tmp_path / d)]) for d in ("a", "b")]
    same = all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        for f in ("traces.csv", "chosen.csv")
    )
    report(9, codes == [0, 0] and same, f"exit codes={codes} byte-identical traces={same}")
