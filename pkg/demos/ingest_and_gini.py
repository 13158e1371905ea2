"""Build a synthetic life-table grid and track the concentration of the
age distribution of deaths over time."""

import numpy as np

from codaboot import gini_coefficient, make_synthetic_grid

grid = make_synthetic_grid(60, seed=4)
print(f"grid: {grid.n_years} years x {grid.n_ages} ages, radix {grid.radix:g}")
print(f"row sums: {grid.deaths.sum(axis=1).min():.6f} .. {grid.deaths.sum(axis=1).max():.6f}")

# Modal age at death, ignoring the infant spike.
modal = 10 + np.argmax(grid.deaths[:, 10:], axis=1)
print(f"modal age: {modal[0]} in {grid.years[0]}, {modal[-1]} in {grid.years[-1]}")

# A falling Gini coefficient means deaths concentrate into a narrower
# age band: the compression of mortality.
for index in (0, grid.n_years // 2, grid.n_years - 1):
    g = gini_coefficient(grid.deaths[index])
    print(f"{grid.years[index]}: gini {g:.4f}")
