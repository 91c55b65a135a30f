"""Acceptance gate: one PASS/FAIL line per criterion.

Criteria 1-4 share the contraction tables, computed once per session. The
level-4 rows are marked ``slow``; deselect them with ``-m "not slow"``.
"""
import subprocess
import sys
import time

import numpy as np
import pytest
import scipy.linalg as sl

from mgcurl.assembly import assemble_operator
from mgcurl.element import gradient_dofs, local_curlcurl_matrix, local_mass_matrix, ReferenceBrick, dof_functional, shape_eval
from mgcurl.experiments import ExperimentConfig, estimate_contraction, manufactured_convergence, run_table
from mgcurl.mesh import build_hierarchy
from mgcurl.multigrid import build_multigrid
from mgcurl.smoothers import DAMPING_BOUND, build_blocks, harmonic_extension, lemma_coarse_check, smoother_max_eigenvalue
from mgcurl.transfer import build_prolongation
from reference_tables import ALPHAS, EDGE, VERTEX
from test_element import gauss5_matrices
from test_smoothers import LEMMA_NORM, _lemma_dense_oracle

REFERENCE = {"edge": EDGE, "vertex": VERTEX}
RUNTIME_BUDGET = 30 * 60.0


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail=""):
        line = f"ACCEPTANCE {number:>4} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


_tables = {}


def contraction_table(kind, levels):
    key = (kind, levels)
    if key not in _tables:
        t0 = time.perf_counter()
        report = run_table(ExperimentConfig(kind, alphas=ALPHAS, levels=levels, steps=(1, 2, 3, 4, 5)))
        _tables[key] = (report, time.perf_counter() - t0)
    return _tables[key]


def deviations(report, kind):
    ref = REFERENCE[kind]
    return [(r, r.rho - ref[r.alpha][r.k][r.m - 1]) for r in report.rows]


def worst(devs):
    r, d = max(devs, key=lambda x: abs(x[1]))
    return f"worst alpha={r.alpha:g} k={r.k} m={r.m}: rho={r.rho:.4f}, diff={d:+.4f}"


# --- 1, 2: table reproduction -------------------------------------------------


def test_criterion_1_edge_table_levels_1_to_3(verdict):
    report, _ = contraction_table("edge", (1, 2, 3))
    devs = deviations(report, "edge")
    bad = sum(abs(d) > 0.02 for _, d in devs)
    anchors = {(1.0, 1, 1): report.lookup(1.0, 1, 1).rho, (0.01, 1, 5): report.lookup(0.01, 1, 5).rho}
    verdict("1a", "edge table k=1..3 within 0.02", bad == 0,
            f"{bad}/{len(devs)} outside; {worst(devs)}; anchors {anchors}")


@pytest.mark.slow
def test_criterion_1_edge_table_level_4(verdict):
    report, seconds = contraction_table("edge", (4,))
    devs = deviations(report, "edge")
    bad = sum(abs(d) > 0.02 for _, d in devs)
    ok = bad == 0 and seconds <= RUNTIME_BUDGET
    verdict("1b", "edge table k=4 within 0.02 and within the runtime budget", ok,
            f"{bad}/{len(devs)} outside; {worst(devs)}; anchor (100,4,1)={report.lookup(100.0, 4, 1).rho:.4f}; "
            f"{seconds:.0f}s")


def _vertex_check(report, levels):
    devs = deviations(report, "vertex")
    bad = sum(abs(d) > 0.01 for _, d in devs)
    spread = max(
        np.ptp([r.rho for r in report.rows if r.m == m]) for m in range(1, 6)
    )
    return bad, spread, devs


def test_criterion_2_vertex_table_levels_1_to_3(verdict):
    report, _ = contraction_table("vertex", (1, 2, 3))
    bad, spread, devs = _vertex_check(report, (1, 2, 3))
    verdict("2a", "vertex table k=1..3 within 0.01, spread over alpha and k <= 0.02",
            bad == 0 and spread <= 0.02, f"{bad}/{len(devs)} outside; {worst(devs)}; spread {spread:.4f}")


@pytest.mark.slow
def test_criterion_2_vertex_table_all_levels(verdict):
    low, _ = contraction_table("vertex", (1, 2, 3))
    high, _ = contraction_table("vertex", (4,))
    from mgcurl.experiments import ContractionReport

    report = ContractionReport(low.rows + high.rows)
    bad, spread, devs = _vertex_check(report, (1, 2, 3, 4))
    verdict("2b", "vertex table k=1..4 within 0.01, spread over alpha and k <= 0.02",
            bad == 0 and spread <= 0.02, f"{bad}/{len(devs)} outside; {worst(devs)}; spread {spread:.4f}")


# --- 3, 4: properties of the tables ---------------------------------------------


def _rows(levels):
    return [r for kind in ("edge", "vertex") for r in contraction_table(kind, levels)[0].rows]


def _monotone_violations(rows):
    by_key = {}
    for r in rows:
        by_key.setdefault((r.smoother, r.alpha, r.k), {})[r.m] = r.rho
    return [(key, m) for key, ms in by_key.items() for m in range(1, 5) if ms[m + 1] > ms[m] + 1e-3]


def test_criterion_3_uniform_convergence(verdict):
    rows = _rows((1, 2, 3))
    top = max(r.rho for r in rows)
    verdict("3a", "every contraction number < 1 (k=1..3)", top < 1 and min(r.rho for r in rows) >= 0,
            f"max {top:.4f}")


@pytest.mark.slow
def test_criterion_3_uniform_convergence_level_4(verdict):
    rows = _rows((4,))
    top = max(r.rho for r in rows)
    verdict("3b", "every contraction number < 1 (k=4)", top < 1, f"max {top:.4f}")


def test_criterion_4_monotone_in_m(verdict):
    bad = _monotone_violations(_rows((1, 2, 3)))
    verdict("4a", "rho(m+1) <= rho(m) + 1e-3 (k=1..3)", not bad, f"violations {bad[:3]}")


@pytest.mark.slow
def test_criterion_4_monotone_in_m_level_4(verdict):
    bad = _monotone_violations(_rows((4,)))
    verdict("4b", "rho(m+1) <= rho(m) + 1e-3 (k=4)", not bad, f"violations {bad[:3]}")


# --- 5-12 -------------------------------------------------------------------------


def test_criterion_5_spectral_bound(verdict):
    H = build_hierarchy(2)
    lams = {}
    for kind, eta in DAMPING_BOUND.items():
        for alpha in (0.01, 1.0, 100.0):
            for k in (1, 2):
                op = assemble_operator(H, k, alpha)
                lams[kind, alpha, k] = smoother_max_eigenvalue(build_blocks(H, op, k, kind, eta), op, iters=200)
    top = max(lams.values())
    verdict(5, "lambda_max(M^-1 A) <= 1 + 1e-8 at the damping bounds", top <= 1 + 1e-8, f"max {top:.6f}")


def test_criterion_6_galerkin(verdict):
    H = build_hierarchy(3)
    errs = []
    for alpha in (0.01, 1.0, 100.0):
        for k in (1, 2, 3):
            P = build_prolongation(H, k).matrix
            A, Ac = assemble_operator(H, k, alpha).matrix, assemble_operator(H, k - 1, alpha).matrix
            errs.append(abs(P.T @ A @ P - Ac).max() / abs(Ac).max())
    verdict(6, "P^T A_k P = A_(k-1) to 1e-12 relative", max(errs) <= 1e-12, f"max {max(errs):.2e}")


def test_criterion_7_element_oracle(verdict):
    errs = []
    for ext in [(1.0, 1.0, 1.0), (0.25, 0.25, 0.25), (0.5, 1.0, 2.0)]:
        M5, K5 = gauss5_matrices(ext)
        errs.append(np.abs(local_mass_matrix(ext) - M5).max() / max(1, np.abs(M5).max()))
        errs.append(np.abs(local_curlcurl_matrix(ext) - K5).max() / max(1, np.abs(K5).max()))
    ext = (0.5, 0.75, 1.0)
    brick = ReferenceBrick(*ext)
    D = np.array([[dof_functional(lambda p: shape_eval(e, p, ext), *brick.edge_geometry(f)) for e in range(12)]
                  for f in range(12)])
    dual = np.abs(D - np.eye(12)).max()
    K = local_curlcurl_matrix(ext)
    rank = np.linalg.matrix_rank(K, tol=1e-10 * np.abs(K).max())
    G = gradient_dofs(ext)
    kernel = np.abs(K @ G.T).max()
    ok = max(errs) <= 1e-12 and dual <= 1e-12 and rank == 5 and np.linalg.matrix_rank(G) == 7 and kernel <= 1e-12
    verdict(7, "element matrices, duality, curl kernel", ok,
            f"quad {max(errs):.1e}, duality {dual:.1e}, rank {rank}, K.grad {kernel:.1e}")


def test_criterion_8_minimum_energy(verdict):
    H = build_hierarchy(1)
    op = assemble_operator(H, 1, 1.0)
    rng = np.random.default_rng(8)
    failures = 0
    for kind in ("edge", "vertex"):
        blocks = build_blocks(H, op, 1, kind)
        for trial in range(100):
            e = trial % blocks.num_entities
            dofs, vals = harmonic_extension(blocks, e, rng.standard_normal(blocks.skeleton.shape[1]))
            w = np.zeros(op.size)
            w[dofs] = vals
            base = op.a_inner(w, w)
            for _ in range(10):
                v = w.copy()
                v[blocks.interior[e]] = rng.standard_normal(blocks.interior.shape[1])
                failures += base > op.a_inner(v, v)
    verdict(8, "harmonic extension has minimal energy (2 x 100 x 10 competitors)", failures == 0,
            f"{failures} failures")


def test_criterion_9_lemma_check(verdict):
    H = build_hierarchy(2)
    worst_rel, smallest = 0.0, np.inf
    for k in (1, 2):
        n = H[k - 1].n
        edges = [(a, p, q) for a in range(n) for p in range(1, n) for q in range(1, n)]
        for a, p, q in edges:
            v = lemma_coarse_check(H, k, (0, a, p, q))
            smallest = min(smallest, v)
            worst_rel = max(worst_rel, abs(v - LEMMA_NORM[k]) / LEMMA_NORM[k])
        a, p, q = edges[0]
        worst_rel = max(worst_rel, abs(_lemma_dense_oracle(H, k, a, p, q) - LEMMA_NORM[k]) / LEMMA_NORM[k])
    verdict(9, "curl of the coarse-edge field is nonzero and matches the frozen oracle",
            smallest > 1e-8 and worst_rel <= 1e-10, f"min {smallest:.6f}, rel dev {worst_rel:.1e}")


def test_criterion_10_manufactured_rate(verdict):
    ratios = {}
    for alpha in (0.1, 1.0, 10.0):
        ratios[alpha] = manufactured_convergence(alpha, 3).ratios
    ok = all(abs(q - 2.0) <= 0.2 for qs in ratios.values() for q in qs)
    detail = ", ".join(f"alpha={a:g}: " + "/".join(f"{q:.3f}" for q in qs) for a, qs in ratios.items())
    verdict(10, "L2 error ratio 2.0 +- 0.2 between consecutive levels", ok, detail)


def test_criterion_11_dense_oracle(verdict):
    diffs = {}
    for kind in ("edge", "vertex"):
        hier = build_multigrid(1, 1.0, kind)
        A = hier.operators[1].matrix.toarray()
        for m in (1, 2):
            E = np.column_stack([hier.error(1, e, m) for e in np.eye(len(A))])
            AE = A @ E
            lam = sl.eigh(0.5 * (AE + AE.T), A, eigvals_only=True)[-1]
            est = estimate_contraction(hier, 1, m, seed=0, tol=1e-9, cap=2000)
            diffs[kind, m] = abs(est.rho - lam)
    top = max(diffs.values())
    verdict(11, "power iteration matches the dense top eigenvalue of E_1 to 1e-6", top <= 1e-6, f"max {top:.1e}")


def test_criterion_12_deterministic_csv(verdict, tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"run{i}.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "mgcurl.cli", "table", "--smoother", "edge", "--alpha", "0.1,10",
             "--levels", "1..2", "--steps", "1..2", "--seed", "11", "--deterministic", "-o", str(path)],
            capture_output=True,
        )
        assert proc.returncode in (0, 3), proc.stderr.decode()
        outs.append(path.read_bytes())
    verdict(12, "deterministic CSV is bitwise identical across runs", outs[0] == outs[1] and len(outs[0]) > 0,
            f"{len(outs[0])} bytes")
