"""Discretization grids on [0, d] and sampled wave profiles."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

MIN_NODES = 101


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing nodes on [0, d] with first node 0 and last d."""

    nodes: np.ndarray
    kind: str = "uniform"
    gamma: float | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or len(nodes) < MIN_NODES:
            raise ValueError(f"grid needs at least {MIN_NODES} nodes")
        if nodes[0] != 0.0:
            raise ValueError("first node must be exactly 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")

    @property
    def d(self):
        return float(self.nodes[-1])

    @property
    def n(self):
        return len(self.nodes)

    @classmethod
    def uniform(cls, n=1281, d=0.5):
        return cls(np.linspace(0.0, d, n), kind="uniform")

    @classmethod
    def graded(cls, n=2001, gamma=1.5, d=0.5):
        """Power grading toward both endpoints with exponent gamma.

        Resolves the eta^2*log(eta) layer at the left and the
        (d-eta)^(3/2) layer at the right.
        """
        u = np.linspace(0.0, 1.0, n)
        lower = 0.5 * d * (2.0 * u) ** gamma
        upper = d - 0.5 * d * (2.0 * (1.0 - u)) ** gamma
        nodes = np.where(u <= 0.5, lower, upper)
        nodes[0] = 0.0
        nodes[-1] = d
        return cls(nodes, kind="graded", gamma=gamma)


@dataclass(eq=False)
class Profile:
    """Sampled traveling-wave profile phi (and slope) on a grid.

    ``method`` tags the producing solver (kernel | shoot | collocation |
    envelope-min | envelope-max).  ``k`` is the regularization level for
    kernel profiles (endpoint value 1/k); None means the limit object
    with zero endpoints.  ``d2phi`` and ``res_ode3`` carry solver-native
    second derivatives and third-order residuals when the method can
    provide them more accurately than finite differences.
    """

    grid: Grid
    phi: np.ndarray
    dphi: np.ndarray
    method: str
    k: float | None = None
    d2phi: np.ndarray | None = None
    res_ode3: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.dphi = np.asarray(self.dphi, dtype=float)
        n = self.grid.n
        if len(self.phi) != n or len(self.dphi) != n:
            raise ValueError("phi/dphi length must match the grid")
        if not np.all(np.isfinite(self.phi)):
            raise ValueError("phi contains non-finite values")

    @property
    def eta(self):
        return self.grid.nodes

    def interp(self, eta_new):
        """Linear interpolation of phi onto new coordinates."""
        return np.interp(eta_new, self.grid.nodes, self.phi)


def fd_weights(x, x0, deriv):
    """Finite-difference weights for the deriv-th derivative at x0 from nodes x.

    Solves the local Vandermonde system in scaled coordinates; exact for
    polynomials up to degree len(x) - 1.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if deriv >= n:
        raise ValueError("need more nodes than the derivative order")
    h = np.max(np.abs(x - x0))
    if h == 0.0:
        raise ValueError("stencil nodes collapse onto x0")
    t = (x - x0) / h
    a = np.vander(t, n, increasing=True).T  # a[p, j] = t[j]**p
    b = np.zeros(n)
    b[deriv] = factorial(deriv)
    return np.linalg.solve(a, b) / h**deriv


def tabulated_derivative(nodes, values, deriv, width=5):
    """deriv-th derivative of sampled values at every node via sliding stencils."""
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(nodes)
    if width > n:
        raise ValueError("stencil wider than the grid")
    out = np.empty(n)
    half = width // 2
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        w = fd_weights(nodes[lo : lo + width], nodes[i], deriv)
        out[i] = w @ values[lo : lo + width]
    return out
