"""Radial grid, quadrature, and the static energy functionals.

Radially symmetric fields u(r) on a ball of radius r_max are stored as
nodal values on a uniform grid and treated as piecewise linear.  All
integrals carry the surface measure s_area * r^(N-1) dr.  Bilinear
quantities use exact cell moments:

    K(u)       = u^T Q u          consistent (tridiagonal) mass matrix
    |grad u|^2 = u^T S u          stiffness matrix, exact for hats

and the nonlinear term integrates R(u) with a fixed-order Gauss rule
per cell, which is exact whenever R is a polynomial within the (H3)
window (degree q + N - 1 stays well under the rule order).  A lumped
weight vector w (row sums of Q) provides the diagonal quadrature used
for residual norms and function-space representations of covectors.

The combination is what makes the self-similarity identities exact:
dilating a profile by an integer factor keeps every kink on a node, so
the quadratic functionals transform by exactly lambda^N and
lambda^(N-2) at machine precision.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import GridGeometryError

__all__ = [
    "RadialGrid",
    "FunctionalValues",
    "compute_functionals",
    "nonlinear_load",
    "gradient_e_sigma",
    "gradient_j0",
    "static_residual",
    "rescale",
    "rescale_prediction",
    "make_bump",
    "bump_functionals_exact",
    "decay_diagnostic",
    "save_profile",
    "load_profile",
    "grid_from_meta",
]

_RAMP_GAUSS = leggauss(64)  # reference rule for grid-free 1-d integrals


class RadialGrid:
    """Uniform radial mesh with exact P1 moment matrices.

    Node j sits at r_j = j * h, j = 0..n_cells, h = r_max / n_cells.
    The last node carries a Dirichlet pin in every solver, but the
    matrices are assembled over the full ball so partial integration
    identities hold without boundary bookkeeping.
    """

    def __init__(self, r_max: float, n_cells: int, dimension: int = 3, n_gauss: int = 8):
        if not r_max > 0:
            raise ValueError("r_max must be positive")
        if n_cells < 8:
            raise ValueError("need at least 8 cells")
        if int(dimension) != dimension or not 3 <= dimension <= 10:
            raise ValueError("dimension must be an integer in 3..10")
        if n_gauss < 6:
            raise ValueError("quadrature order below exactness threshold")
        self.r_max = float(r_max)
        self.n_cells = int(n_cells)
        self.dimension = int(dimension)
        self.n_gauss = int(n_gauss)
        self.h = self.r_max / self.n_cells
        self.nodes = np.linspace(0.0, self.r_max, self.n_cells + 1)
        n = self.dimension
        self.s_area = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)

        xg, lg = leggauss(self.n_gauss)
        self.gauss_xi = 0.5 * (xg + 1.0)  # reference coords in (0, 1)
        left = self.nodes[:-1][:, None]
        self.gauss_points = left + self.h * self.gauss_xi[None, :]
        self.gauss_weights = (
            0.5 * self.h * lg[None, :] * self.s_area * self.gauss_points ** (n - 1)
        )

        # shell volumes; their total is the ball volume
        rn = self.nodes**n
        self.cell_volumes = self.s_area * np.diff(rn) / n

        # consistent mass: assemble hat products through the same rule
        # (exact: integrand degree n + 1 <= 11 < 2 * n_gauss - 1)
        lam, mu = 1.0 - self.gauss_xi, self.gauss_xi
        m_ll = self.gauss_weights @ (lam * lam)
        m_lr = self.gauss_weights @ (lam * mu)
        m_rr = self.gauss_weights @ (mu * mu)
        self.q_diag = np.zeros(self.n_cells + 1)
        self.q_diag[:-1] += m_ll
        self.q_diag[1:] += m_rr
        self.q_off = m_lr
        self.weights = self.q_diag.copy()
        self.weights[:-1] += m_lr
        self.weights[1:] += m_lr

        # stiffness: hat slopes are +-1/h, so entries are shell volumes / h^2
        v = self.cell_volumes / self.h**2
        self.s_diag = np.zeros(self.n_cells + 1)
        self.s_diag[:-1] += v
        self.s_diag[1:] += v
        self.s_off = -v

        self._mass_chol = None
        self._h1_chol = None

    # -- tridiagonal algebra --

    @staticmethod
    def _tri_apply(diag, off, u):
        out = diag * u
        out[:-1] = out[:-1] + off * u[1:]
        out[1:] = out[1:] + off * u[:-1]
        return out

    def apply_mass(self, u):
        return self._tri_apply(self.q_diag, self.q_off, np.asarray(u))

    def apply_stiffness(self, u):
        return self._tri_apply(self.s_diag, self.s_off, np.asarray(u))

    def inner_mass(self, u, v):
        return np.vdot(v, self.apply_mass(u))

    def inner_h1(self, u, v):
        return np.vdot(v, self.apply_mass(u) + self.apply_stiffness(u))

    def norm_mass(self, u) -> float:
        return math.sqrt(max(float(np.real(self.inner_mass(u, u))), 0.0))

    def norm_h1(self, u) -> float:
        return math.sqrt(max(float(np.real(self.inner_h1(u, u))), 0.0))

    def weighted_norm(self, vals) -> float:
        """Lumped-quadrature norm of pointwise values."""
        v = np.asarray(vals)
        return math.sqrt(float(np.sum(self.weights * np.abs(v) ** 2)))

    # -- Gauss transfer --

    def values_at_gauss(self, u):
        u = np.asarray(u)
        lam, mu = 1.0 - self.gauss_xi, self.gauss_xi
        return u[:-1, None] * lam[None, :] + u[1:, None] * mu[None, :]

    def scatter_gauss(self, vals):
        """Adjoint of values_at_gauss: nodal covector from per-point values."""
        lam, mu = 1.0 - self.gauss_xi, self.gauss_xi
        out = np.zeros(self.n_cells + 1, dtype=np.asarray(vals).dtype)
        out[:-1] += vals @ lam
        out[1:] += vals @ mu
        return out

    def integrate(self, point_values) -> float:
        return float(np.sum(self.gauss_weights * point_values))

    # -- banded solves (Dirichlet pin at the outer node) --

    def _banded(self, diag, off):
        m = self.n_cells  # unknowns 0..n_cells-1
        ab = np.zeros((2, m))
        ab[1, :] = diag[:m]
        ab[0, 1:] = off[: m - 1]
        return cholesky_banded(ab, lower=False)

    def _solve(self, chol, b):
        b = np.asarray(b)
        rhs = b[: self.n_cells]
        if np.iscomplexobj(rhs):
            x = cho_solve_banded((chol, False), rhs.real) + 1j * cho_solve_banded(
                (chol, False), rhs.imag
            )
        else:
            x = cho_solve_banded((chol, False), rhs)
        out = np.zeros(self.n_cells + 1, dtype=x.dtype)
        out[: self.n_cells] = x
        return out

    def mass_solve(self, b):
        """Solve Q x = b on nodes 0..n_cells-1 with x pinned to 0 at the edge."""
        if self._mass_chol is None:
            self._mass_chol = self._banded(self.q_diag, self.q_off)
        return self._solve(self._mass_chol, b)

    def h1_solve(self, b):
        """Solve (Q + S) x = b with the same pin; used as a preconditioner."""
        if self._h1_chol is None:
            self._h1_chol = self._banded(self.q_diag + self.s_diag, self.q_off + self.s_off)
        return self._solve(self._h1_chol, b)

    def dense_mass(self):
        m = np.diag(self.q_diag)
        m += np.diag(self.q_off, 1) + np.diag(self.q_off, -1)
        return m

    def dense_stiffness(self):
        m = np.diag(self.s_diag)
        m += np.diag(self.s_off, 1) + np.diag(self.s_off, -1)
        return m

    def check_field(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_cells + 1,):
            raise GridGeometryError(
                f"field has shape {u.shape}, grid has {self.n_cells + 1} nodes"
            )
        return u

    def describe(self) -> dict:
        return {
            "r_max": self.r_max,
            "n_cells": self.n_cells,
            "dimension": self.dimension,
            "n_gauss": self.n_gauss,
        }


# ---------------------------------------------------------------------------
# Functionals


@dataclass(frozen=True)
class FunctionalValues:
    """Static functionals of a profile; charge-dependent fields need sigma.

    j0 is the frequency-free part of the energy (gradient term plus the
    R-potential).  With a charge sigma attached,

        e_sigma = j0 + (omega_mass^2 k + sigma^2 / k) / 2

    and frequency = sigma / k is the standing-wave frequency the charge
    forces on the profile.  hylomorphic records e_sigma < sigma * omega_mass,
    the strict inequality that keeps minimizing sequences from spreading.
    """

    k: float
    kinetic: float
    potential: float
    j0: float
    sigma: float | None = None
    e_sigma: float | None = None
    frequency: float | None = None
    energy_charge_ratio: float | None = None
    hylomorphic: bool | None = None


def _potential_integral(grid: RadialGrid, model, u) -> float:
    ug = grid.values_at_gauss(u)
    return float(np.sum(grid.gauss_weights * model.r(ug)))


def compute_functionals(grid: RadialGrid, model, u, sigma: float | None = None) -> FunctionalValues:
    u = grid.check_field(u)
    k = float(np.dot(u, grid.apply_mass(u)))
    kinetic = 0.5 * float(np.dot(u, grid.apply_stiffness(u)))
    potential = _potential_integral(grid, model, u)
    j0 = kinetic + potential
    if sigma is None:
        return FunctionalValues(k=k, kinetic=kinetic, potential=potential, j0=j0)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if k <= 0:
        raise ValueError("charge functionals need a nonzero profile")
    om = model.omega
    e_sigma = j0 + 0.5 * (om**2 * k + sigma**2 / k)
    ratio = e_sigma / sigma
    return FunctionalValues(
        k=k,
        kinetic=kinetic,
        potential=potential,
        j0=j0,
        sigma=float(sigma),
        e_sigma=e_sigma,
        frequency=sigma / k,
        energy_charge_ratio=ratio,
        hylomorphic=bool(ratio < om),
    )


def nonlinear_load(grid: RadialGrid, model, u):
    """Covector of the R-potential: d/du_i of sum_g w_g R(u(x_g))."""
    ug = grid.values_at_gauss(u)
    return grid.scatter_gauss(grid.gauss_weights * model.dr(ug))


def gradient_j0(grid: RadialGrid, model, u):
    return grid.apply_stiffness(u) + nonlinear_load(grid, model, u)


def gradient_e_sigma(grid: RadialGrid, model, u, sigma: float):
    """Exact differential of e_sigma as a nodal covector."""
    k = float(np.dot(u, grid.apply_mass(u)))
    if k <= 0:
        raise ValueError("gradient needs a nonzero profile")
    coeff = model.omega**2 - sigma**2 / k**2
    return gradient_j0(grid, model, u) + coeff * grid.apply_mass(u)


def static_residual(grid: RadialGrid, model, u, frequency: float) -> float:
    """Relative strength of the standing-wave equation defect.

    Measures S u + load_R(u) + (omega_mass^2 - frequency^2) Q u, turned
    into function values by dividing out the lumped weights, in the
    weighted norm, relative to the mass norm of u.  The Dirichlet node
    is excluded (it is constrained, not an equation).
    """
    u = grid.check_field(u)
    res = gradient_j0(grid, model, u) + (model.omega**2 - frequency**2) * grid.apply_mass(u)
    vals = res / grid.weights
    vals[-1] = 0.0
    denom = grid.norm_mass(u)
    if denom == 0.0:
        raise ValueError("residual of the zero profile is undefined")
    return grid.weighted_norm(vals) / denom


# ---------------------------------------------------------------------------
# Self-similar rescaling


def rescale(grid: RadialGrid, u, lam: float, allow_truncation: bool = False):
    """Resample the dilation u(r / lam) on the same grid.

    When lam is a positive integer every kink of the dilated profile
    lands on a node and the result is exact; otherwise it is the P1
    interpolant (second order in h).  Dilation beyond the domain edge
    loses mass, so it is refused unless allow_truncation is set.
    """
    u = grid.check_field(u)
    if not lam > 0:
        raise ValueError("scale factor must be positive")
    nz = np.nonzero(u)[0]
    if nz.size == 0:
        return u.copy()
    support = grid.nodes[nz[-1]]
    if lam * support > grid.r_max * (1.0 + 1e-12) and not allow_truncation:
        raise GridGeometryError(
            f"dilated support {lam * support:.6g} exceeds r_max = {grid.r_max:.6g}"
        )
    return np.interp(grid.nodes / lam, grid.nodes, u, right=0.0)


@dataclass(frozen=True)
class RescalePrediction:
    k: float
    kinetic: float
    potential: float
    j0: float


def rescale_prediction(values: FunctionalValues, lam: float, dimension: int) -> RescalePrediction:
    """Exact transformation law of the functionals under dilation by lam."""
    n = dimension
    k = lam**n * values.k
    kin = lam ** (n - 2) * values.kinetic
    pot = lam**n * values.potential
    return RescalePrediction(k=k, kinetic=kin, potential=pot, j0=kin + pot)


# ---------------------------------------------------------------------------
# Plateau bumps


def make_bump(grid: RadialGrid, height: float, r_inner: float, ramp: float):
    """Nodal values of the plateau profile: height inside, linear ramp to 0.

    Aligned breakpoints (r_inner and r_inner + ramp on nodes) make the
    nodal interpolant coincide with the continuum profile.
    """
    if height <= 0 or r_inner <= 0 or ramp <= 0:
        raise ValueError("bump parameters must be positive")
    if r_inner + ramp > grid.r_max * (1.0 + 1e-12):
        raise GridGeometryError(
            f"bump extends to {r_inner + ramp:.6g}, beyond r_max = {grid.r_max:.6g}"
        )
    t = (r_inner + ramp - grid.nodes) / ramp
    return height * np.clip(t, 0.0, 1.0)


def bump_functionals_exact(model, height: float, r_inner: float, ramp: float) -> FunctionalValues:
    """Continuum functionals of the plateau profile, no grid involved.

    The plateau part is closed-form; the ramp integrals use a fixed
    64-point rule, exact for polynomial R and nearly so otherwise.
    Useful for profiles far too wide for any reasonable mesh.
    """
    if height <= 0 or r_inner <= 0 or ramp <= 0:
        raise ValueError("bump parameters must be positive")
    n = model.dimension
    s_area = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
    a, b = r_inner, r_inner + ramp

    k_plateau = s_area * height**2 * a**n / n
    p_plateau = s_area * float(model.r(height)) * a**n / n

    xg, wg = _RAMP_GAUSS
    r = 0.5 * (b - a) * xg + 0.5 * (a + b)
    w = 0.5 * (b - a) * wg * s_area * r ** (n - 1)
    s = height * (b - r) / ramp
    k_ramp = float(np.sum(w * s**2))
    p_ramp = float(np.sum(w * model.r(s)))
    kinetic = 0.5 * (height / ramp) ** 2 * s_area * (b**n - a**n) / n

    k = k_plateau + k_ramp
    potential = p_plateau + p_ramp
    return FunctionalValues(k=k, kinetic=kinetic, potential=potential, j0=kinetic + potential)


def decay_diagnostic(grid: RadialGrid, u, r_start: float | None = None) -> float:
    """sup of |u| r^((N-1)/2) over the outer region, relative to the H1 norm.

    Small values mean the profile has genuinely localized; values of
    order one mean mass is piling up against the artificial boundary.
    """
    u = grid.check_field(u)
    if r_start is None:
        r_start = 0.5 * grid.r_max
    mask = grid.nodes >= r_start
    denom = grid.norm_h1(u)
    if denom == 0.0:
        return 0.0
    tail = np.abs(u[mask]) * grid.nodes[mask] ** ((grid.dimension - 1) / 2.0)
    return float(np.max(tail)) / denom


# ---------------------------------------------------------------------------
# Profile files


def save_profile(path, grid: RadialGrid, columns: dict, meta: dict | None = None):
    """Write nodal columns as CSV with a commented header, atomically.

    Header records the grid so the file is self-describing; extra meta
    pairs (model hash, frequency, charge) are stored as-is.
    """
    names = list(columns)
    arrays = [np.asarray(columns[k], dtype=float) for k in names]
    for name, arr in zip(names, arrays):
        if arr.shape != grid.nodes.shape:
            raise ValueError(f"column {name!r} does not match the grid")
    lines = [
        f"# r_max = {grid.r_max!r}",
        f"# n_cells = {grid.n_cells}",
        f"# dimension = {grid.dimension}",
    ]
    for key, val in (meta or {}).items():
        lines.append(f"# {key} = {val}")
    lines.append("r," + ",".join(names))
    for i, r in enumerate(grid.nodes):
        row = [f"{r:.17g}"] + [f"{arr[i]:.17g}" for arr in arrays]
        lines.append(",".join(row))
    body = "\n".join(lines) + "\n"

    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_profile(path):
    """Read a profile file back: (meta dict, column dict)."""
    meta: dict = {}
    names: list = []
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                meta[key.strip()] = val.strip()
            elif not names:
                names = [tok.strip() for tok in line.split(",")]
            else:
                rows.append([float(tok) for tok in line.split(",")])
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or not names or names[0] != "r":
        raise ValueError(f"{path}: not a profile file")
    columns = {name: data[:, i] for i, name in enumerate(names)}
    return meta, columns


def grid_from_meta(meta: dict) -> RadialGrid:
    try:
        return RadialGrid(
            r_max=float(meta["r_max"]),
            n_cells=int(meta["n_cells"]),
            dimension=int(meta["dimension"]),
        )
    except KeyError as exc:
        raise ValueError(f"profile header lacks {exc}") from exc
