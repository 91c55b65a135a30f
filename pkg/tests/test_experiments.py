import csv
import io

import numpy as np
import pytest
import scipy.linalg as sl
import sympy as sp

from mgcurl.experiments import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    estimate_contraction,
    exact_field,
    exact_load,
    manufactured_convergence,
    run_table,
)
from mgcurl.multigrid import build_multigrid


def dense_top_eigenvalue(hier, k, m):
    A = hier.operators[k].matrix.toarray()
    E = np.column_stack([hier.error(k, e, m) for e in np.eye(len(A))])
    AE = A @ E
    return sl.eigh(0.5 * (AE + AE.T), A, eigvals_only=True)[-1]


@pytest.mark.parametrize("kind", ["edge", "vertex"])
def test_estimate_matches_dense_spectrum(kind, mg_cache):
    hier = mg_cache(1, 1.0, kind)
    lam = dense_top_eigenvalue(hier, 1, 1)
    est = estimate_contraction(hier, 1, 1, seed=0, tol=1e-9, cap=2000)
    assert est.converged
    assert abs(est.rho - lam) <= 1e-6
    assert 0 <= est.rho < 1


def test_vertex_level1_closed_form(mg_cache):
    # one vertex patch and the cell interiors: E = (1 - 1/9)^(2m) on its top eigenspace
    hier = mg_cache(1, 1.0, "vertex")
    for m in (1, 2, 3):
        assert estimate_contraction(hier, 1, m).rho == pytest.approx((8 / 9) ** (2 * m), rel=1e-12)


def test_seed_independence(mg_cache):
    hier = mg_cache(2, 1.0, "vertex")
    a = estimate_contraction(hier, 2, 2, seed=1, tol=1e-8, cap=3000).rho
    b = estimate_contraction(hier, 2, 2, seed=2, tol=1e-8, cap=3000).rho
    assert abs(a - b) <= 1e-4


def test_cap_flags_non_convergence(mg_cache):
    est = estimate_contraction(mg_cache(1, 1.0, "edge"), 1, 1, tol=1e-14, cap=5)
    assert not est.converged and est.iterations == 5
    assert 0 < float(est) < 1


def test_requires_positive_level(mg_cache):
    with pytest.raises(ValueError):
        estimate_contraction(mg_cache(1, 1.0, "edge"), 0, 1)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(alphas=())
    with pytest.raises(ConfigError):
        ExperimentConfig(smoother="face")
    with pytest.raises(ConfigError):
        ExperimentConfig(tol=0.0)
    with pytest.raises(ConfigError):
        ExperimentConfig(levels=(0,))
    with pytest.raises(ConfigError):
        ExperimentConfig(alphas=(1.0, -2.0))
    assert ExperimentConfig(smoother="vertex").damping == pytest.approx(1 / 9)
    assert ExperimentConfig(eta=0.05).damping == 0.05


def test_table_shape_and_order():
    cfg = ExperimentConfig("vertex", alphas=(10.0, 0.1), levels=(1, 2), steps=(2, 1), cap=50)
    report = run_table(cfg)
    keys = [(r.alpha, r.k, r.m) for r in report.rows]
    assert keys == [(a, k, m) for a in (10.0, 0.1) for k in (1, 2) for m in (2, 1)]
    text = report.to_csv()
    reader = csv.reader(io.StringIO(text))
    assert tuple(next(reader)) == CSV_COLUMNS
    assert len(list(reader)) == 8
    md = report.to_markdown()
    assert "| 10 | 1 |" in md and "E-01" in md


def test_full_table_config_has_100_rows():
    cfg = ExperimentConfig()
    assert len(cfg.alphas) * len(cfg.levels) * len(cfg.steps) == 100


def test_deterministic_report_is_reproducible():
    cfg = ExperimentConfig("edge", alphas=(1.0,), levels=(1, 2), steps=(1,), seed=3, deterministic=True)
    assert run_table(cfg).to_csv() == run_table(cfg).to_csv()


def test_parallel_matches_serial():
    base = dict(smoother="vertex", alphas=(0.1, 10.0), levels=(1,), steps=(1, 2), seed=4)
    serial = run_table(ExperimentConfig(**base, deterministic=True))
    parallel = run_table(ExperimentConfig(**base, deterministic=False), workers=2)
    assert [r.rho for r in serial.rows] == [r.rho for r in parallel.rows]


def test_load_is_symbolic_curl_curl():
    x = sp.symbols("x y z")
    g = [sp.sin(sp.pi * t) for t in x]
    u = sp.Matrix([g[1] * g[2], g[2] * g[0], g[0] * g[1]])

    def curl(v):
        return sp.Matrix([
            sp.diff(v[2], x[1]) - sp.diff(v[1], x[2]),
            sp.diff(v[0], x[2]) - sp.diff(v[2], x[0]),
            sp.diff(v[1], x[0]) - sp.diff(v[0], x[1]),
        ])

    alpha = sp.Rational(3, 7)
    f = sp.lambdify(x, list(alpha * curl(curl(u)) + u), "numpy")
    pts = np.random.default_rng(0).uniform(-1, 1, (20, 3))
    ref = np.stack(f(*pts.T), axis=1)
    assert np.allclose(exact_load(3 / 7)(pts), ref, atol=1e-12)
    assert np.allclose(exact_field(np.array([[1.0, 0.3, -0.2]]))[0, 1:], 0.0, atol=1e-15)


def test_manufactured_errors_decrease():
    res = manufactured_convergence(1.0, 3)
    assert res.levels == (1, 2, 3)
    assert all(a > b for a, b in zip(res.errors, res.errors[1:]))
    # frozen: this field is bilinear-in-the-transverse-plane along each
    # component, so the interpolation error is second order on these grids
    assert res.ratios == pytest.approx((4.0491110420713, 4.0097688907072), rel=1e-6)


def test_generic_field_shows_first_order_rate():
    # a field that varies along its own component direction only admits
    # first order L2 convergence; observed ratios 2.92 then 2.35
    x = sp.symbols("x y z")
    g = [sp.sin(sp.pi * t) for t in x]
    u = [sp.cos(sp.pi * x[0] / 2) * g[1] * g[2] * (1 + x[0]), sp.exp(x[1]) * g[2] * g[0], (1 + x[1] * x[2]) * g[0] * g[1]]

    def curl(v):
        return [
            sp.diff(v[2], x[1]) - sp.diff(v[1], x[2]),
            sp.diff(v[0], x[2]) - sp.diff(v[2], x[0]),
            sp.diff(v[1], x[0]) - sp.diff(v[0], x[1]),
        ]

    cc = curl(curl(u))
    U = sp.lambdify(x, u, "numpy")
    F = sp.lambdify(x, [cc[i] + u[i] for i in range(3)], "numpy")

    def wrap(fn):
        return lambda p: np.stack([np.broadcast_to(c, p[:, 0].shape) for c in fn(*p.T)], axis=1)

    res = manufactured_convergence(1.0, 3, exact=wrap(U), load=wrap(F))
    assert res.ratios[0] > res.ratios[1]
    assert abs(res.ratios[-1] - 2.0) < 0.4


def test_manufactured_validation():
    with pytest.raises(ValueError):
        manufactured_convergence(0.0, 2)
    with pytest.raises(ValueError):
        manufactured_convergence(1.0, 0)
    with pytest.raises(ValueError):
        manufactured_convergence(1.0, 1, exact=exact_field)
