"""Acceptance suite: one test group per criterion, tagged for the summary report.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import itertools
import math
import os
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import random_feasible, random_orthonormal_batch
from spca.cluster import accuracy, kmeans, kmeans_unit_sphere, nmi
from spca.data import SyntheticSpec, gen_two_wedges
from spca.model import grad_u, grad_vj, lipschitz_constant, objective
from spca.solver import (
    IterateRecord,
    SolverConfig,
    check_sufficient_decrease,
    estimate_rate,
    fit,
    initialize,
    u_step,
    update_u,
    update_v,
)

criterion = pytest.mark.criterion


def random_shape(rng, hi=20, max_rank=4):
    m, n = (int(t) for t in rng.integers(1, hi + 1, size=2))
    r = int(rng.integers(1, min(max_rank, m, n) + 1))
    return m, n, r


@pytest.fixture(scope="module")
def random_runs():
    """100 random fits of 200 iterations each, plus the wall time they took."""
    rng = np.random.default_rng(1)
    runs = []
    start = time.perf_counter()
    for _ in range(100):
        m, n, r = random_shape(rng)
        x = rng.standard_normal((m, n)) * rng.uniform(0.1, 10.0)
        cfg = SolverConfig(rank=r, max_iters=200, stop_tol=0.0, seed=int(rng.integers(2**31)),
                           init=str(rng.choice(["svd_of_data", "random_orthonormal"])))
        runs.append((x, cfg, fit(x, cfg)))
    return runs, time.perf_counter() - start


# --- 1 ------------------------------------------------------------------------


@criterion(1, "feasibility invariant on 100 random fits")
class TestFeasibility:
    def test_recorded_residuals(self, random_runs):
        runs, _ = random_runs
        for _, _, res in runs:
            assert len(res.trace) == 201
            for rec in res.trace:
                assert rec.orth_residual <= 1e-10
                assert rec.worst_column_norm_error <= 1e-12

    def test_replayed_iterates(self, random_runs):
        # replay the updates by hand and measure every iterate directly
        runs, _ = random_runs
        for x, cfg, res in runs:
            u, v = initialize(x, cfg)
            for _ in range(cfg.max_iters):
                u = update_u(x, u, v, res.mu)
                v = update_v(x, u, v, res.lam)
                eye = np.eye(u.shape[1])
                assert math.sqrt(float(np.sum((u.T @ u - eye) ** 2))) <= 1e-10
                assert max(abs(math.sqrt(math.fsum(c * c for c in v[:, j])) - 1.0)
                           for j in range(v.shape[1])) <= 1e-12
            np.testing.assert_array_equal(u, res.u)
            np.testing.assert_array_equal(v, res.v)

    def test_runtime(self, random_runs):
        _, elapsed = random_runs
        print(f"\n100 fits x 200 iterations: {elapsed:.2f} s")
        assert elapsed < 30.0


# --- 2 ------------------------------------------------------------------------


@criterion(2, "sufficient decrease and monotone objective")
class TestSufficientDecrease:
    def test_slack(self, random_runs):
        runs, _ = random_runs
        worst = math.inf
        for x, cfg, res in runs:
            l_c = lipschitz_constant(x, cfg.rank).l_c
            assert res.mu == res.lam == pytest.approx(1.1 * l_c, rel=1e-15)
            slack = check_sufficient_decrease(res.trace, res.mu, res.lam, l_c)
            worst = min(worst, slack)
            assert slack >= -1e-8
        print(f"\nworst slack {worst:.3e}")

    def test_objective_nonincreasing(self, random_runs):
        # increases are allowed only at the level of floating-point rounding in f
        runs, _ = random_runs
        for _, _, res in runs:
            f = np.array([rec.f for rec in res.trace])
            assert np.all(np.diff(f) <= 1e-12 * max(1.0, f[0]))


# --- 3 ------------------------------------------------------------------------


@criterion(3, "vanishing iterate gap on the two-wedge data")
class TestVanishingGap:
    def test_gap_below_tolerance(self):
        ds = gen_two_wedges(SyntheticSpec())
        assert ds.x.shape == (3, 200)
        fit(ds.x, SolverConfig(rank=2, max_iters=10))  # warm imports and caches
        start = time.perf_counter()
        res = fit(ds.x, SolverConfig(rank=2, max_iters=5000, stop_tol=0.0))
        elapsed = time.perf_counter() - start
        hit = next(rec.k for rec in res.trace[1:] if rec.du < 1e-6 and rec.dv < 1e-6)
        print(f"\ndu, dv < 1e-6 from iteration {hit}; 5000 iterations in {elapsed:.2f} s")
        assert hit <= 5000
        assert res.trace[-1].du < 1e-6 and res.trace[-1].dv < 1e-6
        assert elapsed < 1.0

    def test_gap_trend(self):
        # qualitative: both gaps fall orders of magnitude below their peak and stay down
        res = fit(gen_two_wedges(SyntheticSpec()).x, SolverConfig(rank=2, max_iters=5000))
        for name in ("du", "dv"):
            g = np.array([getattr(rec, name) for rec in res.trace[1:]])
            assert g[-1] < 1e-3 * g.max()
            below = int(np.argmax(g < 1e-6))
            assert g[below] < 1e-6 and np.all(g[below:] < 1e-6)


# --- 4 ------------------------------------------------------------------------


@criterion(4, "per-block optimality against sampled candidates")
class TestBlockOptimality:
    def test_update_u(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            m, n, r = random_shape(rng, hi=10)
            x = rng.standard_normal((m, n))
            u0, v0 = random_feasible(rng, m, n, r)
            mu = 1.1 * lipschitz_constant(x, r).l_c
            step = u_step(x, u0, v0, mu)
            ours = float(np.sum(step.u * step.m_k))
            cands = random_orthonormal_batch(rng, 10_000, m, r)
            best = float(np.max(np.einsum("kij,ij->k", cands, step.m_k)))
            assert ours - best >= -1e-9

    def test_update_v(self):
        rng = np.random.default_rng(5)
        t = np.linspace(0.0, 2.0 * np.pi, 100_000, endpoint=False)
        grid = np.stack([np.cos(t), np.sin(t)])
        for _ in range(20):
            m, n = (int(s) for s in rng.integers(2, 12, size=2))
            x = rng.standard_normal((m, n))
            u, v0 = random_feasible(rng, m, n, 2)
            lam = 1.1 * lipschitz_constant(x, 2).l_c
            v = update_v(x, u, v0, lam)
            # the V-subproblem objective per column, up to constants: -<v, q>
            q = 2.0 * u.T @ x + (lam - 2.0) * v0
            margin = np.sum(v * q, axis=0) - np.max(grid.T @ q, axis=0)
            assert np.all(margin >= -1e-8)


# --- 5 ------------------------------------------------------------------------


def central_diff(fun, z, h=1e-5):
    g = np.zeros_like(z)
    for idx in np.ndindex(z.shape):
        zp, zm = z.copy(), z.copy()
        zp[idx] += h
        zm[idx] -= h
        g[idx] = (fun(zp) - fun(zm)) / (2.0 * h)
    return g


@criterion(5, "gradients match central finite differences")
def test_gradients_finite_differences():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        m, n, r = random_shape(rng, hi=8)
        x = rng.standard_normal((m, n))
        u, v = random_feasible(rng, m, n, r)
        fd_u = central_diff(lambda z: objective(x, z, v), u)
        errs = [np.linalg.norm(grad_u(x, u, v) - fd_u) / np.linalg.norm(fd_u)]
        fd_v = central_diff(lambda z: objective(x, u, z), v)
        for j in range(n):
            errs.append(np.linalg.norm(grad_vj(x, u, v, j) - fd_v[:, j]) / np.linalg.norm(fd_v[:, j]))
        worst = max(worst, max(errs))
        assert max(errs) <= 1e-5
    print(f"\nworst relative error {worst:.2e}")


# --- 6 ------------------------------------------------------------------------


@criterion(6, "Lipschitz bound formula")
class TestLipschitzFormula:
    def test_random_shapes(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            m, n = (int(t) for t in rng.integers(1, 60, size=2))
            r = int(rng.integers(1, min(m, n) + 1))
            x = rng.standard_normal((m, n)) * 10.0 ** rng.uniform(-3, 3)
            fro = math.sqrt(math.fsum(float(t) ** 2 for t in x.ravel()))
            expected = 2.0 * (r + n + math.sqrt(r * n) + fro)
            # equal up to the last-bit rounding of the norm accumulation
            assert lipschitz_constant(x, r).l_c == pytest.approx(expected, rel=4e-16, abs=0)

    def test_spot_value(self):
        x = np.zeros((3, 200))
        x[0] = 1.0
        l_c = lipschitz_constant(x, 2).l_c
        assert l_c == 2.0 * (2 + 200 + 20 + math.sqrt(200))
        assert round(l_c, 4) == 472.2843


# --- 7 ------------------------------------------------------------------------


@criterion(7, "spherical clustering beats raw Euclidean k-means on the wedges")
def test_wedge_clustering():
    start = time.perf_counter()
    sph, euc = [], []
    for seed in range(10):
        ds = gen_two_wedges(SyntheticSpec(seed=seed))
        res = fit(ds.x, SolverConfig(rank=2, seed=seed))
        sph.append(accuracy(kmeans_unit_sphere(res.v, 2, seed=seed), ds.truth))
        euc.append(accuracy(kmeans(ds.x.x, 2, seed=seed).labels, ds.truth))
    elapsed = time.perf_counter() - start
    med_s, med_e = float(np.median(sph)), float(np.median(euc))
    print(f"\nmedian accuracy: spherical {med_s:.3f}, Euclidean {med_e:.3f} ({elapsed:.2f} s)")
    assert med_s >= 0.95
    assert med_s - med_e >= 0.15
    assert elapsed < 10.0


# --- 8 ------------------------------------------------------------------------


def partitions(n, max_blocks=4):
    """All labelings of n items with at most ``max_blocks`` blocks, one per set partition."""
    out = []

    def grow(prefix, used):
        if len(prefix) == n:
            out.append(prefix)
            return
        for b in range(min(used + 1, max_blocks)):
            grow(prefix + (b,), max(used, b + 1))

    grow((), 0)
    return np.array(out, dtype=np.int64)


PERMS4 = np.array(list(itertools.permutations(range(4))))


def brute_accuracy(preds, truth):
    """Best matched fraction for each row of ``preds`` over all 4! label maps."""
    n = preds.shape[1]
    table = np.zeros((len(preds), 4, 4), dtype=np.int64)
    rows = np.arange(len(preds))[:, None]
    np.add.at(table, (np.repeat(rows, n, axis=1), preds, np.broadcast_to(truth, preds.shape)), 1)
    matched = table[:, np.arange(4)[None, :], PERMS4].sum(axis=2)
    return matched.max(axis=1) / n


def table_nmi(pred, truth):
    """NMI from an explicit contingency table using natural-log entropies."""
    n = len(pred)
    counts = {}
    for p, t in zip(pred, truth):
        counts[p, t] = counts.get((p, t), 0) + 1
    row, col = {}, {}
    for (p, t), c in counts.items():
        row[p] = row.get(p, 0) + c
        col[t] = col.get(t, 0) + c
    h_p = -math.fsum(c / n * math.log(c / n) for c in row.values())
    h_t = -math.fsum(c / n * math.log(c / n) for c in col.values())
    if h_p == 0.0 or h_t == 0.0:
        return 1.0 if h_p == h_t else 0.0
    mi = math.fsum(c / n * math.log(c * n / (row[p] * col[t])) for (p, t), c in counts.items())
    return mi / math.sqrt(h_p * h_t)


NMI_CASES = [
    ([0, 0, 1, 1], [0, 0, 1, 1], 1.0),
    ([0, 0, 1, 1], [1, 1, 0, 0], 1.0),
    ([0, 1, 0, 1], [0, 0, 1, 1], 0.0),
    ([0, 0, 0, 0], [0, 0, 1, 1], 0.0),
    ([5, 5, 5], [2, 2, 2], 1.0),
    ([0, 0, 1, 2], [0, 0, 1, 1], 1 / math.sqrt(1.5)),
    ([0, 1, 2, 3], [0, 0, 1, 1], 1 / math.sqrt(2)),
    ([0, 0, 1, 1, 2, 2], [0, 0, 1, 1, 2, 2], 1.0),
    ([0, 0, 0, 1, 1, 1], [0, 0, 1, 1, 2, 2], None),
    ([0, 1, 1, 1], [0, 0, 1, 1], None),
    ([0, 1, 2, 0, 1, 2], [0, 0, 0, 1, 1, 1], 0.0),
    ([0, 0, 1, 1, 1], [0, 1, 1, 1, 1], None),
    ([2, 2, 0, 0, 1, 1, 1], [0, 0, 1, 1, 2, 2, 2], 1.0),
    ([0, 1, 0, 1, 0, 1, 0, 1], [0, 0, 0, 0, 1, 1, 1, 1], 0.0),
    ([0, 0, 0, 1, 1, 2, 2, 3], [0, 0, 1, 1, 2, 2, 3, 3], None),
    ([0, 1, 2, 3, 4], [0, 1, 2, 3, 4], 1.0),
    ([0, 0, 0, 0, 0, 1], [0, 0, 0, 0, 1, 1], None),
    ([3, 1, 4, 1, 5, 9, 2, 6], [2, 7, 1, 8, 2, 8, 1, 8], None),
    ([0, 0, 1, 1, 0, 0, 1, 1, 2, 2], [0, 1, 0, 1, 0, 1, 0, 1, 0, 1], None),
    ([1, 1, 1, 2, 2, 2, 3, 3, 3], [1, 1, 2, 2, 2, 3, 3, 3, 1], None),
]


@criterion(8, "accuracy and NMI against independent oracles")
class TestMetricOracles:
    def test_accuracy_all_pairs_small(self):
        for n in range(1, 6):
            parts = partitions(n)
            for truth in parts:
                ref = brute_accuracy(parts, truth)
                for pred, want in zip(parts, ref):
                    assert accuracy(pred, truth) == pytest.approx(want, abs=1e-15)

    @pytest.mark.parametrize("n", range(6, 11))
    def test_accuracy_exhaustive_predictions(self, n):
        parts = partitions(n)
        rng = np.random.default_rng(n)
        truths = [parts[-1], parts[len(parts) // 2]] + [parts[i] for i in rng.integers(len(parts), size=2)]
        for truth in truths:
            ref = brute_accuracy(parts, truth)
            got = np.array([accuracy(p, truth) for p in parts])
            np.testing.assert_allclose(got, ref, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("pred,truth,closed_form", NMI_CASES)
    def test_nmi_table(self, pred, truth, closed_form):
        want = table_nmi(pred, truth)
        if closed_form is not None:
            assert want == pytest.approx(closed_form, abs=1e-15)
        assert nmi(pred, truth) == pytest.approx(want, abs=1e-12)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            kp, kt = (int(t) for t in rng.integers(1, 7, size=2))
            pred = rng.integers(0, kp, n)
            truth = rng.integers(0, kt, n)
            rp = rng.permutation(kp)[pred] + int(rng.integers(0, 100))
            rt = rng.permutation(kt)[truth]
            assert accuracy(rp, rt) == pytest.approx(accuracy(pred, truth), abs=1e-15)
            assert nmi(rp, rt) == pytest.approx(nmi(pred, truth), abs=1e-12)


# --- 9 ------------------------------------------------------------------------


def records(ks, fs):
    return [IterateRecord(int(k), float(f), 1e-3, 1e-3, 0.0, 0.0, 0.0, 0.0) for k, f in zip(ks, fs)]


@criterion(9, "rate estimator recovers known rates")
class TestRateEstimator:
    @pytest.mark.parametrize("rho", [0.3, 0.5, 0.7, 0.8, 0.9])
    def test_geometric(self, rho):
        k = np.arange(300)
        est = estimate_rate(records(k, 1.0 + rho**k))
        assert est.regime == "linear"
        assert abs(est.parameter - rho) <= 1e-3

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
    def test_power_law(self, p):
        k = np.arange(1, 1001, dtype=float)
        est = estimate_rate(records(k, 1.0 + k**-p))
        assert est.regime == "sublinear"
        assert abs(est.parameter + p) <= 5e-2

    def test_synthetic_run_reports_regime(self):
        res = fit(gen_two_wedges(SyntheticSpec()).x, SolverConfig(rank=2, max_iters=5000))
        est = estimate_rate(res.trace)
        print(f"\ntwo-wedge run: regime={est.regime} parameter={est.parameter:.6g} "
              f"over {len(res.trace)} records")
        assert est.regime in ("finite", "linear", "sublinear", "inconclusive")


# --- 10 -----------------------------------------------------------------------


def run_cli(*args, env):
    proc = subprocess.run([sys.executable, "-m", "spca", *args], capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


def snapshot(d: Path):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


@criterion(10, "CLI reruns are byte-identical")
def test_cli_determinism(tmp_path):
    env = dict(os.environ, SOURCE_DATE_EPOCH="1700000000")
    work = tmp_path / "run"

    def pipeline():
        outs = [run_cli("synth", "--seed", "3", "--out", str(work / "synth"), "--plot", env=env)]
        outs.append(run_cli("fit", "--data", str(work / "synth" / "data.csv"), "--rank", "2",
                            "--seed", "3", "--init", "random_orthonormal",
                            "--out-dir", str(work / "fit"), "--plot", env=env))
        outs.append(run_cli("cluster-eval", "--components", str(work / "fit" / "V.csv"), "--k", "2",
                            "--truth", str(work / "synth" / "truth.txt"), "--seed", "3",
                            "--out-dir", str(work / "eval"), "--plot", env=env))
        outs.append(run_cli("trace-rate", "--trace", str(work / "fit" / "trace.csv"),
                            "--out", str(work / "rate.json"), env=env))
        return outs, snapshot(work)

    first_out, first = pipeline()
    shutil.rmtree(work)
    second_out, second = pipeline()
    assert len(first) == 15
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], name
    assert first_out == second_out
