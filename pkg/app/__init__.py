# Sobol-Constrained Optimizer
