"""Contraction-number sweeps and the manufactured-solution convergence study."""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import assemble_load, evaluate_field
from .element import gauss_points
from .mesh import build_hierarchy
from .multigrid import MultigridHierarchy, build_multigrid, pcg_solve
from .smoothers import DEFAULT_DAMPING, check_damping

__all__ = [
    "ExperimentConfig",
    "ContractionEstimate",
    "ContractionRow",
    "ContractionReport",
    "estimate_contraction",
    "run_table",
    "manufactured_convergence",
    "ConvergenceResult",
    "ConfigError",
    "CSV_COLUMNS",
]

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("smoother", "alpha", "k", "m", "rho", "iters", "seconds", "seed")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    smoother: str = "edge"
    alphas: tuple[float, ...] = (0.01, 0.1, 1.0, 10.0, 100.0)
    levels: tuple[int, ...] = (1, 2, 3, 4)
    steps: tuple[int, ...] = (1, 2, 3, 4, 5)
    eta: float | None = None
    seed: int = 0
    tol: float = 1e-6
    cap: int = 500
    output_format: str = "csv"
    deterministic: bool = True

    def __post_init__(self):
        if self.smoother not in DEFAULT_DAMPING:
            raise ConfigError(f"smoother must be 'edge' or 'vertex', got {self.smoother!r}")
        for name in ("alphas", "levels", "steps"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must not be empty")
        if any(not a > 0 for a in self.alphas):
            raise ConfigError("every alpha must be positive")
        if any(k < 1 for k in self.levels):
            raise ConfigError("levels must be >= 1")
        if any(m < 1 for m in self.steps):
            raise ConfigError("smoothing steps must be >= 1")
        if not self.tol > 0:
            raise ConfigError("tolerance must be positive")
        if self.cap < 1:
            raise ConfigError("iteration cap must be >= 1")
        try:
            check_damping(self.smoother, self.eta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.output_format not in ("csv", "md", "markdown"):
            raise ConfigError(f"unknown output format {self.output_format!r}")

    @property
    def damping(self) -> float:
        return DEFAULT_DAMPING[self.smoother] if self.eta is None else self.eta


@dataclass(frozen=True)
class ContractionEstimate:
    rho: float
    iterations: int
    converged: bool

    def __float__(self) -> float:
        return self.rho


def estimate_contraction(
    hier: MultigridHierarchy,
    k: int,
    m: int,
    seed: int = 0,
    tol: float = 1e-6,
    cap: int = 500,
) -> ContractionEstimate:
    """Energy-norm contraction number of the V-cycle on level ``k``.

    Power iteration ``w <- E_k w`` from a seeded uniform random start,
    normalized in the energy norm each step. ``E_k`` is symmetric positive
    semidefinite in that inner product, so the Rayleigh quotient
    ``a(E_k w, w) / a(w, w)`` increases to its largest eigenvalue, which
    equals ``||E_k||_a``. Stops once the quotient changes by at most
    ``tol`` relative, or after ``cap`` iterations (``converged=False``).
    """
    if k < 1:
        raise ValueError("contraction numbers are defined for k >= 1")
    A = hier.operators[k]
    rng = np.random.default_rng(seed)
    w = rng.uniform(-1.0, 1.0, A.size)
    w /= np.sqrt(A.a_inner(w, w))
    prev = None
    rho = 0.0
    for it in range(1, cap + 1):
        v = hier.error(k, w, m)
        Av = A.apply(v)
        rho = float(Av @ w)
        if prev is not None and abs(rho - prev) <= tol * abs(rho):
            return ContractionEstimate(rho, it, True)
        prev = rho
        norm = np.sqrt(float(Av @ v))
        if norm == 0.0:
            return ContractionEstimate(0.0, it, True)
        w = v / norm
    logger.warning("power iteration hit the cap of %d (k=%d, m=%d)", cap, k, m)
    return ContractionEstimate(rho, cap, False)


@dataclass(frozen=True)
class ContractionRow:
    smoother: str
    alpha: float
    k: int
    m: int
    rho: float
    iters: int
    seconds: float
    seed: int
    converged: bool = True


@dataclass
class ContractionReport:
    rows: list[ContractionRow] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.rows)

    def lookup(self, alpha: float, k: int, m: int) -> ContractionRow:
        for r in self.rows:
            if r.alpha == alpha and r.k == k and r.m == m:
                return r
        raise KeyError((alpha, k, m))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow(
                [r.smoother, repr(r.alpha), r.k, r.m, repr(r.rho), r.iters, f"{r.seconds:.3f}", r.seed]
            )
        return buf.getvalue()

    def to_markdown(self) -> str:
        """Table laid out like the published ones: alpha blocks, k rows, m columns."""
        if not self.rows:
            return ""
        steps = sorted({r.m for r in self.rows})
        lines = [
            f"**{self.rows[0].smoother.capitalize()} based method**",
            "",
            "| alpha | k | " + " | ".join(f"m={m}" for m in steps) + " |",
            "|---|---|" + "---|" * len(steps),
        ]
        alphas = list(dict.fromkeys(r.alpha for r in self.rows))
        for a in alphas:
            levels = sorted({r.k for r in self.rows if r.alpha == a})
            for i, k in enumerate(levels):
                cells = []
                for m in steps:
                    try:
                        row = self.lookup(a, k, m)
                        mark = "" if row.converged else "*"
                        cells.append(f"{row.rho:.2E}{mark}")
                    except KeyError:
                        cells.append("")
                label = f"{a:g}" if i == 0 else ""
                lines.append(f"| {label} | {k} | " + " | ".join(cells) + " |")
        if not self.all_converged:
            lines += ["", "\\* power iteration hit the iteration cap"]
        return "\n".join(lines) + "\n"

    def render(self, output_format: str) -> str:
        return self.to_markdown() if output_format in ("md", "markdown") else self.to_csv()


def _alpha_rows(config: ExperimentConfig, alpha: float) -> list[ContractionRow]:
    hier = build_multigrid(max(config.levels), alpha, config.smoother, config.damping)
    rows = []
    for k in config.levels:
        for m in config.steps:
            t0 = time.perf_counter()
            est = estimate_contraction(hier, k, m, config.seed, config.tol, config.cap)
            seconds = 0.0 if config.deterministic else time.perf_counter() - t0
            logger.info(
                "%s alpha=%g k=%d m=%d rho=%.6f iters=%d", config.smoother, alpha, k, m, est.rho, est.iterations
            )
            rows.append(
                ContractionRow(
                    config.smoother, float(alpha), k, m, est.rho, est.iterations, seconds, config.seed, est.converged
                )
            )
    return rows


def run_table(config: ExperimentConfig, workers: int | None = None) -> ContractionReport:
    """All ``(alpha, k, m)`` rows, alpha-major then k then m.

    In deterministic mode rows are computed serially and the wall-time
    column is written as zero so that repeated runs give identical output.
    Otherwise each alpha runs in its own process.
    """
    if config.deterministic or len(config.alphas) == 1:
        groups = [_alpha_rows(config, a) for a in config.alphas]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(_alpha_rows, [config] * len(config.alphas), config.alphas))
    return ContractionReport([row for g in groups for row in g])


# --- manufactured solution ---------------------------------------------------


def _sine(t):
    return np.sin(np.pi * t)


def exact_field(x: np.ndarray) -> np.ndarray:
    """``(g(y) g(z), g(z) g(x), g(x) g(y))`` with ``g = sin(pi t)``."""
    gx, gy, gz = _sine(x[:, 0]), _sine(x[:, 1]), _sine(x[:, 2])
    return np.stack([gy * gz, gz * gx, gx * gy], axis=1)


def exact_load(alpha: float) -> Callable[[np.ndarray], np.ndarray]:
    # curl curl of the exact field is 2 pi^2 times the field
    scale = 2.0 * np.pi**2 * alpha + 1.0
    return lambda x: scale * exact_field(x)


@dataclass(frozen=True)
class ConvergenceResult:
    levels: tuple[int, ...]
    errors: tuple[float, ...]
    iterations: tuple[int, ...]

    @property
    def ratios(self) -> tuple[float, ...]:
        return tuple(a / b for a, b in zip(self.errors[:-1], self.errors[1:]))


def l2_error(level, coeffs: np.ndarray, exact: Callable[[np.ndarray], np.ndarray], order: int = 4) -> float:
    h = level.h
    pts, wts = gauss_points((h, h, h), order)
    cells = level.cells
    uh = evaluate_field(level, coeffs, cells, pts)
    xq = (level.cell_origin(cells)[:, None, :] + pts[None]).reshape(-1, 3)
    u = np.asarray(exact(xq)).reshape(uh.shape)
    return float(np.sqrt(np.einsum("q,cqa->", wts, (uh - u) ** 2)))


def manufactured_convergence(
    alpha: float,
    max_level: int,
    order: int = 4,
    exact: Callable[[np.ndarray], np.ndarray] | None = None,
    load: Callable[[np.ndarray], np.ndarray] | None = None,
    smoother: str = "vertex",
    rel_tol: float = 1e-10,
    max_iters: int = 200,
) -> ConvergenceResult:
    """L2 errors of the discrete solutions on levels ``1..max_level``.

    Defaults to the trigonometric field whose tangential trace vanishes on
    the box boundary; ``exact`` and ``load`` may replace it. Each level is
    solved by V-cycle preconditioned CG to ``rel_tol``.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if max_level < 1:
        raise ValueError("max_level must be >= 1")
    if exact is None:
        exact, load = exact_field, exact_load(alpha)
    elif load is None:
        raise ValueError("a custom exact field needs its load")
    grids = build_hierarchy(max_level)
    hier = build_multigrid(grids, alpha, smoother)
    levels, errors, iters = [], [], []
    for k in range(1, max_level + 1):
        f = assemble_load(grids, k, load, order).values
        result = pcg_solve(hier, f, rel_tol, max_iters, k=k)
        if not result.converged:
            raise RuntimeError(f"PCG did not converge on level {k} within {max_iters} iterations")
        levels.append(k)
        errors.append(l2_error(grids[k], result.solution, exact, order))
        iters.append(result.iterations)
    return ConvergenceResult(tuple(levels), tuple(errors), tuple(iters))
