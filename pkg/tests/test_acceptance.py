"""Acceptance suite: one test group per criterion, each at its stated tolerance.

Every check records a pass/fail line that is printed in the session summary.
Criteria that the implementation does not meet stay red; they are marked
``xfail(strict=True)`` so that an unexpected pass is reported as an error.
"""

import math
import time

import numpy as np
import pytest

from _acceptance_log import record
from _oracles import bottleneck_bruteforce, sliced_wasserstein_quadrature, svm_dual_projected_gradient, \
    wasserstein_permutations
from conftest import random_diagram
from perskern import kernels as kn
from perskern import pipeline as pl
from perskern import svm
from perskern.diagrams import PersistenceDiagram, filter_dimension
from perskern.filtrations import WeightedGraph, graph_sublevel_filtration, vietoris_rips
from perskern.linalg import jacobi_eigenvalues
from perskern.metrics import bottleneck, hausdorff, sliced_wasserstein, wasserstein_1d
from perskern.persistence import betti_from_diagram, betti_oracle, compute_diagram

TARGETS = {"pssk": 0.829, "pwgk": 0.819, "swk": 0.841, "pfk": 0.784, "pi": 0.777}
WINDOW = 0.08
FAST_FLOOR = 0.65
FAST_LIMIT_S = 600.0


# ------------------------------------------------------------- criterion 1

def _bench(name, tmp_path_factory):
    cfg = pl.load_config(pl.bundled_config(name))
    cfg.output = str(tmp_path_factory.mktemp(name))
    t0 = time.perf_counter()
    table = pl.run_pipeline(cfg)
    return table, time.perf_counter() - t0


@pytest.fixture(scope="module")
def fast_run(tmp_path_factory):
    return _bench("dynsys-fast", tmp_path_factory)


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    return _bench("dynsys", tmp_path_factory)


def _means(table):
    return {r.kernel: r.mean for r in table.rows}


def test_c1_fast_mode_runtime(fast_run):
    _, seconds = fast_run
    assert record(1, "fast mode runtime", seconds < FAST_LIMIT_S, f"{seconds:.0f} s")


@pytest.mark.xfail(strict=True, reason="PWGK averages 0.633 over the three fast-mode runs")
def test_c1_fast_mode_accuracy(fast_run):
    means = _means(fast_run[0])
    low = {k: round(v, 3) for k, v in means.items() if v < FAST_FLOOR}
    detail = ", ".join(f"{k}={v:.3f}" for k, v in means.items())
    assert record(1, "fast mode every kernel >= 0.65", not low, detail)


@pytest.mark.xfail(strict=True, reason="four kernels land 0.002-0.021 below their windows")
def test_c1_full_accuracy_windows(full_run):
    means = _means(full_run[0])
    out = {k: round(means[k], 3) for k in TARGETS if abs(means[k] - TARGETS[k]) > WINDOW}
    detail = ", ".join(f"{k}={means[k]:.3f} (target {TARGETS[k]})" for k in TARGETS)
    assert record(1, "full mode within +-0.08", not out, detail)


def test_c1_full_swk_top_two(full_run):
    means = _means(full_run[0])
    ranked = sorted(means, key=means.get, reverse=True)
    assert record(1, "SWK in top two", "swk" in ranked[:2], f"ranking {ranked}, {full_run[1]:.0f} s")


# ------------------------------------------------------------- criterion 2

def _split_essential(D, k):
    Dk = filter_dimension(D, k)
    fin = np.isfinite(Dk.deaths)
    return Dk.take(np.flatnonzero(fin)), np.sort(Dk.births[~fin])


def _bottleneck_with_essentials(D, E, k):
    Df, Dinf = _split_essential(D, k)
    Ef, Einf = _split_essential(E, k)
    if len(Dinf) != len(Einf):
        return math.inf
    ess = float(np.max(np.abs(Dinf - Einf))) if len(Dinf) else 0.0
    return max(bottleneck(Df, Ef), ess)


def test_c2_stability():
    rng = np.random.default_rng(2)
    checks = failures = 0
    worst = -math.inf
    for _ in range(200):
        X = rng.random((int(rng.integers(2, 13)), 2))
        DX = compute_diagram(vietoris_rips(X, 2, metric="chebyshev", scale="radius"))
        for delta in (0.01, 0.05):
            Y = X + rng.uniform(-delta, delta, X.shape)
            DY = compute_diagram(vietoris_rips(Y, 2, metric="chebyshev", scale="radius"))
            dH = hausdorff(X, Y, "sup")
            for k in range(3):
                slack = _bottleneck_with_essentials(DX, DY, k) - dH
                worst = max(worst, slack)
                checks += 1
                failures += slack > 1e-9
    assert record(2, "d_B <= d_H + 1e-9", failures == 0,
                  f"{checks} checks, {failures} violations, max d_B - d_H = {worst:.3g}")


# ------------------------------------------------------------- criterion 3

def test_c3_reduction_oracle():
    rng = np.random.default_rng(3)
    bad = total = 0
    for _ in range(100):
        fc = vietoris_rips(rng.random((int(rng.integers(1, 13)), 2)), 2)
        D = compute_diagram(fc)
        for s in rng.choice(np.unique(fc.values), size=5) if len(fc) > 1 else [0.0] * 5:
            want = betti_oracle(fc, s)
            bad += betti_from_diagram(D, s, len(want) - 1) != want
            total += 1
    for _ in range(50):
        n = int(rng.integers(1, 16))
        edges = tuple((u, v, float(rng.uniform(0, 1))) for u in range(n) for v in range(u + 1, n)
                      if rng.random() < 0.35)
        fc = graph_sublevel_filtration(WeightedGraph(n, edges), include_triangles=bool(rng.random() < 0.5))
        D = compute_diagram(fc)
        for s in rng.uniform(0, 1.1, 5):
            want = betti_oracle(fc, s)
            bad += betti_from_diagram(D, s, len(want) - 1) != want
            total += 1
    assert record(3, "Betti counts equal oracle", bad == 0, f"{total} scale checks, {bad} mismatches")


# ------------------------------------------------------------- criterion 4

def test_c4_matching_oracles():
    rng = np.random.default_rng(4)
    bad_b = sum(
        bottleneck(D, E) != bottleneck_bruteforce(D.as_array(), E.as_array())
        for D, E in ((random_diagram(rng, int(rng.integers(0, 6))), random_diagram(rng, int(rng.integers(0, 6))))
                     for _ in range(100))
    )
    bad_w = 0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        a, b = rng.normal(size=n), rng.normal(size=n)
        bad_w += wasserstein_1d(a, b) != wasserstein_permutations(a.tolist(), b.tolist())
    assert record(4, "bottleneck and W1 exact", bad_b == 0 and bad_w == 0,
                  f"bottleneck mismatches {bad_b}/100, W1 mismatches {bad_w}/100")


# ------------------------------------------------------------- criterion 5

SPECS = {
    "pssk": kn.KernelSpec("pssk", {"sigma": 0.1}),
    "pwgk": kn.KernelSpec("pwgk", {"rho": 0.1, "tau": 1, "cw": 1, "p": 1}),
    "swk": kn.KernelSpec("swk", {"eta": 1}),
    "pfk": kn.KernelSpec("pfk", {"sigma": 0.1, "t": 1}),
    "pi": kn.KernelSpec("pi", {"sigma": 0.1}),
}


@pytest.fixture(scope="module")
def suite30():
    rng = np.random.default_rng(5)
    return [random_diagram(rng, int(rng.integers(1, 9))) for _ in range(30)]


@pytest.fixture(scope="module")
def grams30(suite30):
    out = {}
    for kind, spec in SPECS.items():
        if kind == "pi":
            spec = spec.replace(b=kn.fit_pi_cutoff(suite30), bounds=kn.fit_pi_grid(suite30, 0.1))
        out[kind] = (spec, kn.gram(suite30, spec))
    return out


def test_c5_symmetry(suite30, grams30):
    bad = []
    for kind, (spec, G) in grams30.items():
        pair_ok = all(kn.kernel(D, E, spec) == kn.kernel(E, D, spec)
                      for i, D in enumerate(suite30) for E in suite30[i + 1:])
        if not (np.array_equal(G, G.T) and pair_ok):
            bad.append(kind)
    assert record(5, "symmetry bit-exact", not bad, f"asymmetric: {bad}" if bad else "all five kernels")


def test_c5_self_values(suite30, grams30):
    bad = [kind for kind in ("pwgk", "swk", "pfk")
           if not (np.all(np.diag(grams30[kind][1]) == 1.0)
                   and all(kn.kernel(D, D, SPECS[kind]) == 1.0 for D in suite30))]
    assert record(5, "self-values exactly 1", not bad, f"failing: {bad}" if bad else "pwgk, swk, pfk")


def test_c5_pssk_diagonal_vanishing(suite30):
    rng = np.random.default_rng(55)
    worst = 0.0
    for D in suite30:
        t = rng.uniform(0, 1, int(rng.integers(1, 6)))
        flat = PersistenceDiagram(np.ones(len(t), np.int64), t, t)
        worst = max(worst, abs(kn.k_pss(flat, D, 0.1)))
    assert record(5, "PSSK diagonal-vanishing", worst <= 1e-12, f"max |k| = {worst:.2g}")


def _ratio(G):
    ev = jacobi_eigenvalues(G)
    return ev[0] / ev[-1]


@pytest.mark.parametrize("kind", ["pssk", "pwgk", "pi"])
def test_c5_psd(kind, grams30):
    r = _ratio(grams30[kind][1])
    assert record(5, f"{kind} PSD", r >= -1e-8, f"lambda_min/lambda_max = {r:.2e}")


@pytest.mark.xfail(strict=True, reason="the diagonal-augmented Fisher kernel is indefinite on generic diagrams")
def test_c5_psd_pfk(grams30):
    r = _ratio(grams30["pfk"][1])
    assert record(5, "pfk PSD", r >= -1e-8, f"lambda_min/lambda_max = {r:.2e}")


def test_c5_swk_reported(grams30):
    r = _ratio(grams30["swk"][1])
    print(f"swk lambda_min/lambda_max = {r:.2e} (reported only)")


# ------------------------------------------------------------- criterion 6

def test_c6_sw_quadrature():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(20):
        D = random_diagram(rng, int(rng.integers(1, 7)))
        E = random_diagram(rng, int(rng.integers(0, 7)))
        ref = sliced_wasserstein_quadrature(D.as_array(), E.as_array())
        worst = max(worst, abs(sliced_wasserstein(D, E, M=2001) - ref) / ref)
    assert record(6, "M=2001 within 1e-3 relative", worst <= 1e-3, f"max relative error {worst:.2e}")


# ------------------------------------------------------------- criterion 7

def test_c7_pi_mass():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        sigma = float(rng.uniform(0.01, 0.5))
        birth, pers = float(rng.uniform(0, 2)), float(rng.uniform(0.001, 2))
        b = float(rng.uniform(0.1, 2.5))
        bounds = (birth - 6 * sigma, birth + 6 * sigma, pers - 6 * sigma, pers + 6 * sigma)
        D = PersistenceDiagram.from_points([(1, birth, birth + pers)])
        img = kn.persistence_image(D, sigma, pixel=float(rng.uniform(0.2, 1.0)) * sigma, b=b, bounds=bounds)
        worst = max(worst, abs(img.values.sum() - float(kn.pi_weight(pers, b))))
    assert record(7, "pixel sum within 1e-6 of w_b", worst <= 1e-6, f"max error {worst:.2e} over 50 cases")


# ------------------------------------------------------------- criterion 8

def test_c8_svm_oracle():
    rng = np.random.default_rng(8)
    worst_obj = worst_eq = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 9))
        X = rng.normal(size=(n, int(rng.integers(1, 4))))
        G = X @ X.T if rng.random() < 0.5 else np.exp(-((X[:, None] - X[None]) ** 2).sum(-1) / rng.uniform(0.1, 4))
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        y[0], y[1] = 1.0, -1.0
        C = float(10 ** rng.uniform(-2, 2))
        _, ref = svm_dual_projected_gradient(G, y, C)
        m = svm.solve_binary(G, y, C, tol=1e-8)
        worst_obj = max(worst_obj, abs(m.objective - ref))
        worst_eq = max(worst_eq, abs(float(m.alpha @ y)))
    ok = worst_obj <= 1e-6 and worst_eq < 1e-8
    assert record(8, "objective and equality residual", ok,
                  f"max |obj - oracle| = {worst_obj:.2e}, max |sum a_i y_i| = {worst_eq:.2e}")


# ------------------------------------------------------------- criterion 9

def test_c9_sweep_shape(tmp_path):
    cfg = pl.load_config(pl.bundled_config("dynsys-fast"))
    cfg.output = str(tmp_path)
    rows = pl.sweep_conditioning(cfg, "pssk", "sigma", pl.SWEEP_SIGMAS)
    at_1000 = next(r.cv_score for r in rows if r.value == 1000.0)
    best_small = max(r.cv_score for r in rows if r.value <= 10)
    assert len(rows) == 11
    assert record(9, "CV at sigma=1000 below best for sigma<=10", at_1000 < best_small,
                  f"{at_1000:.3f} vs {best_small:.3f}")
