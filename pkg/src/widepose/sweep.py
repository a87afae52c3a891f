"""Grid sweep over the loss weights alpha and beta on the toy task."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .losses import LossWeights
from .metrics import summarize
from .toy import ToyData, TrainConfig, predict, train

DEFAULT_GRID = (0.5, 1.0, 2.0)


@dataclass
class SweepResult:
    alphas: tuple[float, ...]
    betas: tuple[float, ...]
    combined: np.ndarray  # (len(alphas), len(betas)); NaN where a cell failed
    errors: dict[tuple[int, int], str] = field(default_factory=dict)

    def cell(self, alpha: float, beta: float) -> float:
        return float(self.combined[self.alphas.index(alpha), self.betas.index(beta)])

    def argmin(self) -> tuple[float, float]:
        i, j = np.unravel_index(np.nanargmin(self.combined), self.combined.shape)
        return self.alphas[i], self.betas[j]


def run_cell(cfg: TrainConfig, train_data: ToyData, test_data: ToyData) -> float:
    """Train one model and return its combined held-out error."""
    model, _ = train(cfg, train_data)
    return summarize(test_data.labels, predict(model, test_data.features)).combined


def _safe_cell(args):
    cfg, train_data, test_data = args
    try:
        return run_cell(cfg, train_data, test_data), None
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        return float("nan"), f"{type(exc).__name__}: {exc}"


def sweep_alpha_beta(
    base: TrainConfig,
    train_data: ToyData,
    test_data: ToyData,
    alphas=DEFAULT_GRID,
    betas=DEFAULT_GRID,
    workers: int = 1,
) -> SweepResult:
    """Every cell uses the same seed and data; only the weights change.

    A failing cell is recorded as NaN with its error message and the rest of
    the grid still runs.
    """
    alphas, betas = tuple(float(a) for a in alphas), tuple(float(b) for b in betas)
    if not alphas or not betas:
        raise ValueError("empty sweep grid")
    jobs = []
    for a in alphas:
        for b in betas:
            w = LossWeights(a, b)
            jobs.append((replace(base, weights=w), train_data, test_data))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_cell, jobs))
    else:
        results = [_safe_cell(j) for j in jobs]

    grid = np.full((len(alphas), len(betas)), np.nan)
    errors = {}
    for k, (value, err) in enumerate(results):
        i, j = divmod(k, len(betas))
        grid[i, j] = value
        if err is not None:
            errors[(i, j)] = err
    return SweepResult(alphas, betas, grid, errors)


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "beta", "combined", "error"])
        for i, a in enumerate(result.alphas):
            for j, b in enumerate(result.betas):
                w.writerow([repr(a), repr(b), repr(float(result.combined[i, j])), result.errors.get((i, j), "")])


def format_sweep(result: SweepResult) -> str:
    head = "alpha\\beta " + " ".join(f"{b:>9g}" for b in result.betas)
    lines = [head]
    for i, a in enumerate(result.alphas):
        cells = " ".join(f"{v:>9.3f}" for v in result.combined[i])
        lines.append(f"{a:>10g} {cells}")
    for (i, j), msg in sorted(result.errors.items()):
        lines.append(f"cell alpha={result.alphas[i]:g} beta={result.betas[j]:g} failed: {msg}")
    return "\n".join(lines)
