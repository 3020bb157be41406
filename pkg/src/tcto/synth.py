"""Synthetic regression data with a known nonlinear feature interaction.

y = sin(x0) + x1 * x2 + noise, with three distractor columns. Constructed
transformations (sin of x0, the x1 * x2 product) recover signal that raw
columns hide from shallow trees, which makes the generator a useful
end-to-end probe.
"""

from __future__ import annotations

import csv

import numpy as np

from .tabular import REGRESSION, Dataset


def synthetic_regression(
    n: int = 500, noise: float = 0.05, seed: int = 0
) -> Dataset:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 4242]))
    x0 = rng.uniform(-3.0, 3.0, size=n)
    x1 = rng.uniform(-2.0, 2.0, size=n)
    x2 = rng.uniform(-2.0, 2.0, size=n)
    rest = rng.normal(0.0, 1.0, size=(n, 3))
    y = np.sin(x0) + x1 * x2 + rng.normal(0.0, noise, size=n)
    return Dataset(
        column_names=("x0", "x1", "x2", "x3", "x4", "x5"),
        columns=(x0, x1, x2, rest[:, 0], rest[:, 1], rest[:, 2]),
        labels=y,
        task=REGRESSION,
    )


def write_csv(d: Dataset, path, label_name: str = "label") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(d.column_names) + [label_name])
        matrix = d.matrix()
        for i in range(d.n_rows):
            writer.writerow(
                [repr(float(v)) for v in matrix[i]] + [repr(float(d.labels[i]))]
            )
