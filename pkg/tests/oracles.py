"""Independent numerical oracles used by the test suite.

These deliberately avoid the closed forms they check: derivatives come from
central finite differences and trace identities from dense matrix algebra.
"""

import numpy as np


def fd_grad(kern, x, y, h=1e-5):
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        g[i] = (kern.eval(x + e, y) - kern.eval(x - e, y)) / (2 * h)
    return g


def fd_hessian(kern, x, y, h=1e-4):
    d = x.size
    H = np.empty((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        for j in range(d):
            ej = np.zeros(d)
            ej[j] = h
            H[i, j] = (kern.eval(x + ei + ej, y) - kern.eval(x + ei - ej, y)
                       - kern.eval(x - ei + ej, y) + kern.eval(x - ei - ej, y)) / (4 * h * h)
    return H


def fd_directional_second(kern, x, y, v, h=1e-5):
    """(v . grad)^2 k by a second difference along the direction v."""
    return (kern.eval(x + h * v, y) - 2.0 * kern.eval(x, y) + kern.eval(x - h * v, y)) / h**2


def random_kernel_cases(n_cases, seed=0, max_dim=4):
    """Random (x, y, lengthscale, d) tuples with non-degenerate separation."""
    gen = np.random.default_rng(seed)
    cases = []
    while len(cases) < n_cases:
        d = int(gen.integers(1, max_dim + 1))
        ell = float(gen.uniform(0.6, 2.0))
        x = gen.uniform(-1.0, 1.0, size=d)
        y = gen.uniform(-1.0, 1.0, size=d)
        if np.linalg.norm(x - y) < 0.2 * ell:
            continue
        cases.append((x, y, ell))
    return cases


def random_spd_matrix(d, seed):
    gen = np.random.default_rng(seed)
    S = gen.uniform(-1, 1, size=(d, d))
    return S @ S.T + 0.1 * np.eye(d)
