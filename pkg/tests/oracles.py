"""Independent reference implementations used only by the test suite.

These deliberately avoid the production code paths: the Bessel oracle is a
plain ascending power series with compensated summation, and eigenproblem
oracles go through dense diagonalization of explicitly assembled matrices.
"""

from __future__ import annotations

import math

import numpy as np


def bessel_series_oracle(n: int, z: float, tol: float = 1e-17) -> float:
    """Ascending-series J_n(z) with fsum accumulation (use |z| <= 15)."""
    sign = 1.0
    if n < 0:
        n = -n
        if n % 2:
            sign = -sign
    if z < 0:
        z = -z
        if n % 2:
            sign = -sign
    half = 0.5 * z
    term = 1.0
    for k in range(1, n + 1):
        term *= half / k
    terms = [term]
    for k in range(1, 400):
        term *= -(half * half) / (k * (n + k))
        terms.append(term)
        if abs(term) < tol * max(abs(t) for t in terms) * 1e-2 and k > 3:
            break
    return sign * math.fsum(terms)


def lowest_boundary_weight_states(h: np.ndarray, dims: tuple[int, int], ring: int = 2,
                                  threshold: float = 1e-12):
    """Eigenpairs of a window Hamiltonian whose boundary ring holds < threshold.

    Returns (eigenvalues, eigenvectors-as-columns) restricted to interior
    states, i.e. those unaffected by the Dirichlet truncation.
    """
    import scipy.linalg

    vals, vecs = scipy.linalg.eigh(h)
    lx, ly = dims
    mask = np.zeros((lx, ly), dtype=bool)
    mask[:ring, :] = mask[-ring:, :] = True
    mask[:, :ring] = mask[:, -ring:] = True
    flat = mask.ravel()
    keep = []
    for j in range(vals.size):
        p = np.abs(vecs[:, j]) ** 2
        if p[flat].sum() < threshold:
            keep.append(j)
    return vals[keep], vecs[:, keep]
