"""Charge-constrained energy minimization and bound-state searches.

Everything here minimizes the reduced energy

    e_sigma(u) = j0(u) + (omega_mass^2 K(u) + sigma^2 / K(u)) / 2

over nonnegative radial profiles at fixed charge sigma; the constraint
K > 0 is enforced by the sigma^2 / K barrier rather than a Lagrange
multiplier, and the standing-wave frequency comes out as sigma / K.
A single projected-descent engine (descend) serves the plain problem,
the basin-restricted problem behind the stability threshold, and the
penalized fixed-K problem used by the threshold curves.  The search
direction is the gradient preconditioned by (Q + S), which keeps the
iteration count essentially mesh-independent.

Minimizers with e_sigma < sigma * omega_mass are the profiles whose
orbits the dynamics module perturbs; certify_local_min backs them with
a second-order check (smallest generalized eigenvalues of the reduced
Hessian on the active set).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import eigh, solve_banded
from scipy.optimize import minimize_scalar

from .errors import BasinExitError, CollapseError, GroundStateNotFound
from .nonlinearity import NonlinearityModel, decompose_negative_set, truncate_model
from .radial import (
    FunctionalValues,
    RadialGrid,
    compute_functionals,
    gradient_e_sigma,
    make_bump,
    nonlinear_load,
    decay_diagnostic,
    rescale,
    static_residual,
)

__all__ = [
    "SolverConfig",
    "DescentResult",
    "StandingWaveResult",
    "LocalMinCertificate",
    "MultiplicityResult",
    "descend",
    "minimize_energy",
    "find_ground_state",
    "find_bound_state_in_basin",
    "find_multiple_states",
    "certify_local_min",
    "initial_profiles",
]


@dataclass(frozen=True)
class SolverConfig:
    grad_tol: float = 1e-7          # relative KKT residual target
    max_iterations: int = 4000
    armijo_c: float = 1e-4
    max_backtracks: int = 60
    collapse_floor: float = 1e-10   # K below floor * sigma / omega aborts
    basin_veto_limit: int = 40
    multistart_charges: tuple = (0.1, 0.3, 1.0, 3.0, 10.0)


@dataclass(frozen=True)
class DescentResult:
    u: np.ndarray
    value: float
    residual: float
    iterations: int
    converged: bool
    energies: tuple
    stalled: bool = False


class FixedChargeObjective:
    """e_sigma as a descent objective; raises CollapseError near K = 0."""

    def __init__(self, grid, model, sigma):
        self.grid = grid
        self.model = model
        self.sigma = float(sigma)
        self.k_floor = SolverConfig.collapse_floor * self.sigma / model.omega

    def value(self, u) -> float:
        g = self.grid
        k = float(np.dot(u, g.apply_mass(u)))
        if k < self.k_floor:
            raise CollapseError(f"charge concentration collapsed: K = {k:.3e}")
        kin = 0.5 * float(np.dot(u, g.apply_stiffness(u)))
        with np.errstate(over="ignore", invalid="ignore"):
            pot = float(np.sum(g.gauss_weights * self.model.r(g.values_at_gauss(u))))
        om = self.model.omega
        return kin + pot + 0.5 * (om**2 * k + self.sigma**2 / k)

    def grad_cov(self, u):
        return gradient_e_sigma(self.grid, self.model, u, self.sigma)


def _kkt_residual(grid, u, grad_cov) -> float:
    """Weighted norm of the projected first-order conditions.

    Where u is clamped at zero only a negative derivative counts; the
    Dirichlet node never does.
    """
    res = np.where(u > 0.0, grad_cov, np.minimum(grad_cov, 0.0))
    vals = res / grid.weights
    vals[-1] = 0.0
    return grid.weighted_norm(vals)


def _dilation_probe(grid, objective, u, e):
    """Line-minimize the objective along exact dilations of u.

    Large droplets leave gradient descent with one badly conditioned
    direction: shuffling charge between bulk and the 1/K term.  That
    direction is almost exactly a rescale, so a bounded 1-D search
    along it is cheap and kills the stall.  Returns (v, ev) or None.
    """
    def phi(lam):
        v = rescale(grid, u, float(lam), allow_truncation=True)
        return objective.value(v)

    r = minimize_scalar(phi, bounds=(0.9, 1.1), method="bounded", options={"xatol": 1e-9})
    if not (r.success and math.isfinite(r.fun) and r.fun < e - 1e-11 * (1.0 + abs(e))):
        return None
    v = rescale(grid, u, float(r.x), allow_truncation=True)
    v[-1] = 0.0
    return v, float(r.fun)


def descend(grid, objective, u0, config: SolverConfig | None = None, accept_hook=None) -> DescentResult:
    """Projected, preconditioned descent with a Barzilai-Borwein step.

    Candidates are clipped to u >= 0 with the outer node pinned.  A step
    is accepted on sufficient decrease measured in the lumped norm; the
    optional accept_hook can veto candidates (the basin-restricted
    search uses it), and too many consecutive vetoes abort the descent.
    """
    cfg = config or SolverConfig()
    u = grid.check_field(u0).copy()
    u = np.maximum(u, 0.0)
    u[-1] = 0.0
    if accept_hook is not None and not accept_hook(u):
        raise ValueError("starting profile rejected by the acceptance hook")

    e = objective.value(u)
    energies = [e]
    g = objective.grad_cov(u)
    res0 = _kkt_residual(grid, u, g)
    tol = cfg.grad_tol * (1.0 + grid.norm_mass(u))
    step = 1.0
    prev_u = None
    prev_d = None
    vetoes = 0
    rescues = 0
    cooldown_end = 0
    converged = res0 <= tol
    stalled = False
    iterations = 0

    while not converged and iterations < cfg.max_iterations:
        d = grid.h1_solve(g)
        d[-1] = 0.0
        if prev_u is not None:
            su = u - prev_u
            sy = d - prev_d
            num = float(np.sum(grid.weights * su * su))
            den = float(np.sum(grid.weights * su * sy))
            if den > 0 and num > 0:
                step = min(max(num / den, 1e-6), 1e6)
        accepted = False
        t = step
        for _ in range(cfg.max_backtracks):
            v = np.maximum(u - t * d, 0.0)
            v[-1] = 0.0
            dist2 = float(np.sum(grid.weights * (v - u) ** 2))
            if dist2 == 0.0:
                break
            if accept_hook is not None and not accept_hook(v):
                vetoes += 1
                if vetoes >= cfg.basin_veto_limit:
                    raise BasinExitError(
                        "descent kept leaving the binding region",
                        diagnostics={"iterations": iterations, "value": e},
                    )
                t *= 0.5
                continue
            ev = objective.value(v)
            if math.isfinite(ev) and ev <= e - (cfg.armijo_c / t) * dist2:
                prev_u, prev_d = u, d
                u, e = v, ev
                vetoes = 0
                accepted = True
                break
            t *= 0.5
        iterations += 1
        # Progress frozen at float noise for a whole window means BB is
        # grinding on an ill-conditioned direction; probe it directly.
        slow = (
            accepted
            and iterations >= cooldown_end
            and len(energies) >= 60
            and energies[-60] - e <= 1e-11 * (1.0 + abs(e))
        )
        if not accepted or slow:
            probe = _dilation_probe(grid, objective, u, e) if rescues < 40 else None
            if probe is not None and (accept_hook is None or accept_hook(probe[0])):
                u, e = probe
                prev_u = prev_d = None
                step = 1.0
                rescues += 1
                cooldown_end = iterations + 60
            else:
                stalled = True
                break
        energies.append(e)
        g = objective.grad_cov(u)
        tol = cfg.grad_tol * (1.0 + grid.norm_mass(u))
        converged = _kkt_residual(grid, u, g) <= tol

    return DescentResult(
        u=u,
        value=e,
        residual=_kkt_residual(grid, u, g),
        iterations=iterations,
        converged=bool(converged),
        energies=tuple(energies),
        stalled=stalled,
    )


def _hessian_bands(grid, model, u, sigma):
    """Tridiagonal part of the e_sigma Hessian and its rank-one charge tail."""
    k = float(np.dot(u, grid.apply_mass(u)))
    ug = grid.values_at_gauss(u)
    c = grid.gauss_weights * model.d2r(ug)
    lam, mu = 1.0 - grid.gauss_xi, grid.gauss_xi
    coeff = model.omega**2 - (sigma / k) ** 2
    diag = grid.s_diag + coeff * grid.q_diag
    off = grid.s_off + coeff * grid.q_off
    diag = diag.copy()
    diag[:-1] += c @ (lam * lam)
    diag[1:] += c @ (mu * mu)
    off = off + c @ (lam * mu)
    return diag, off, grid.apply_mass(u), 4.0 * sigma**2 / k**3


def _tri_solve_pinned(diag, off, b):
    m = len(diag) - 1  # the outer node stays pinned
    ab = np.zeros((3, m))
    ab[0, 1:] = off[: m - 1]
    ab[1, :] = diag[:m]
    ab[2, :-1] = off[: m - 1]
    x = solve_banded((1, 1), ab, np.asarray(b)[:m])
    out = np.zeros(len(diag))
    out[:m] = x
    return out


def _newton_rescue(grid, objective, dres: DescentResult, cfg, accept_hook=None) -> DescentResult:
    """Finish a near-converged descent with damped Newton steps.

    Very large droplets leave the first-order engine a small factor
    above tolerance on a nearly singular direction.  The stationarity
    system is tridiagonal plus a rank-one charge term, so each Newton
    step costs two banded solves (Sherman-Morrison); steps are accepted
    only when the KKT residual drops.  Failure of any kind returns the
    original result unchanged.
    """
    u = dres.u.copy()
    try:
        e = objective.value(u)
    except CollapseError:
        return dres
    g = objective.grad_cov(u)
    res = _kkt_residual(grid, u, g)
    res_in = res
    for _ in range(12):
        if res <= cfg.grad_tol * (1.0 + grid.norm_mass(u)):
            break
        try:
            diag, off, qu, c1 = _hessian_bands(grid, objective.model, u, objective.sigma)
            hinv_g = _tri_solve_pinned(diag, off, g)
            hinv_qu = _tri_solve_pinned(diag, off, qu)
        except Exception:
            return dres
        denom = 1.0 + c1 * float(np.dot(qu, hinv_qu))
        if denom == 0.0 or not math.isfinite(denom):
            return dres
        step = hinv_g - (c1 * float(np.dot(qu, hinv_g)) / denom) * hinv_qu
        if not np.all(np.isfinite(step)):
            return dres
        improved = False
        t = 1.0
        for _ in range(5):
            v = np.maximum(u - t * step, 0.0)
            v[-1] = 0.0
            try:
                ev = objective.value(v)
            except CollapseError:
                t *= 0.5
                continue
            if not math.isfinite(ev):
                t *= 0.5
                continue
            gv = objective.grad_cov(v)
            rv = _kkt_residual(grid, v, gv)
            if rv < res:
                u, e, g, res = v, ev, gv, rv
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    if (
        res <= cfg.grad_tol * (1.0 + grid.norm_mass(u))
        and res < res_in
        and (accept_hook is None or accept_hook(u))
    ):
        return DescentResult(
            u=u,
            value=e,
            residual=res,
            iterations=dres.iterations,
            converged=True,
            energies=dres.energies + (e,),
            stalled=False,
        )
    return dres


# ---------------------------------------------------------------------------
# Standing-wave solves


@dataclass(frozen=True)
class StandingWaveResult:
    """A profile with its charge, frequency, and solve diagnostics."""

    u: np.ndarray = field(repr=False)
    sigma: float
    values: FunctionalValues
    frequency: float
    residual: float
    iterations: int
    converged: bool
    origin: str = ""
    energies: tuple = field(default=(), repr=False)

    @property
    def hylomorphic(self) -> bool:
        return bool(self.values.hylomorphic)


def _finish(grid, model, sigma, dres: DescentResult, origin: str) -> StandingWaveResult:
    vals = compute_functionals(grid, model, dres.u, sigma=sigma)
    freq = vals.frequency
    return StandingWaveResult(
        u=dres.u,
        sigma=float(sigma),
        values=vals,
        frequency=freq,
        residual=static_residual(grid, model, dres.u, freq),
        iterations=dres.iterations,
        converged=dres.converged,
        origin=origin,
        energies=dres.energies,
    )


def minimize_energy(
    grid: RadialGrid,
    model: NonlinearityModel,
    u0,
    sigma: float,
    config: SolverConfig | None = None,
    accept_hook=None,
    origin: str = "user",
) -> StandingWaveResult:
    """Descend e_sigma from a given profile."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    obj = FixedChargeObjective(grid, model, sigma)
    dres = descend(grid, obj, u0, config=config, accept_hook=accept_hook)
    if not dres.converged:
        dres = _newton_rescue(grid, obj, dres, config or SolverConfig(), accept_hook)
    return _finish(grid, model, sigma, dres, origin)


def _amplitude_levels(model, s_scan_max=8.0):
    spec = model.r_spec
    if hasattr(spec, "centers"):
        return list(spec.centers)
    xs = np.geomspace(1e-3 * s_scan_max, s_scan_max, 800)
    rv = model.r(xs)
    i = int(np.argmin(rv))
    if rv[i] >= 0.0:
        return [1.0]  # nothing to bind to; callers will fail hylomorphy
    s = float(xs[i])
    return [s, 1.4 * s]


def _ramp_width(grid, model, s_level: float) -> float:
    # Balance the two wall costs of a linear ramp from s_level down to 0:
    # gradient part ~ s^2/(2L), potential part ~ L * mean of F along the ramp.
    # A hard-capped narrow ramp prices deep-well plateaus out of the basin.
    t = (np.arange(1, 33) - 0.5) / 32.0
    f_band = float(np.mean(model.f(s_level * t)))
    if f_band <= 0.0:
        return max(grid.h * 4.0, min(1.0, 0.1 * grid.r_max))
    width = math.sqrt(0.5 * s_level**2 / f_band)
    return min(max(width, grid.h * 4.0), 0.2 * grid.r_max)


def initial_profiles(grid, model, sigma, config: SolverConfig | None = None, s_scan_max=8.0):
    """Plateau-bump catalog whose charges bracket sigma / omega_mass.

    For each amplitude level the plateau radius is chosen so K lands on
    a geometric ladder around sigma / omega_mass, the charge scale a
    minimizer wants when its frequency sits inside the mass gap.
    """
    cfg = config or SolverConfig()
    n = grid.dimension
    k_scale = sigma / model.omega
    out = []
    for s_level in _amplitude_levels(model, s_scan_max):
        ramp = _ramp_width(grid, model, s_level)
        for factor in cfg.multistart_charges:
            k_target = factor * k_scale
            r_in = (k_target * n / (grid.s_area * s_level**2)) ** (1.0 / n)
            if r_in < grid.h or r_in + ramp > grid.r_max:
                continue
            u = make_bump(grid, s_level, r_in, ramp)
            out.append((f"bump(s={s_level:.3g}, K~{k_target:.3g})", u))
    return out


def find_ground_state(
    grid: RadialGrid,
    model: NonlinearityModel,
    sigma: float,
    config: SolverConfig | None = None,
    s_scan_max: float = 8.0,
) -> StandingWaveResult:
    """Multistart minimization of e_sigma; only a binding profile counts.

    The winner must converge and satisfy e_sigma < sigma * omega_mass
    strictly; otherwise every candidate is a spreading or free-field
    configuration and GroundStateNotFound carries the best of them.
    """
    cfg = config or SolverConfig()
    starts = initial_profiles(grid, model, sigma, cfg, s_scan_max)
    if not starts:
        raise ValueError("no feasible starting profile on this grid")
    # Scout every start on a small iteration budget and spend the full
    # budget only on the leaders; spreading starts otherwise burn the
    # whole budget without ever binding.
    scout_cfg = replace(cfg, max_iterations=min(cfg.max_iterations, 1200))
    scouted = []
    for label, u0 in starts:
        try:
            scouted.append(minimize_energy(grid, model, u0, sigma, config=scout_cfg, origin=label))
        except CollapseError:
            continue
    scouted.sort(key=lambda r: r.values.e_sigma)
    best = None
    best_any = None
    for rank, res in enumerate(scouted):
        if rank < 3 and not res.converged and cfg.max_iterations > scout_cfg.max_iterations:
            try:
                res = minimize_energy(grid, model, res.u, sigma, config=cfg, origin=res.origin)
            except CollapseError:
                pass
        if best_any is None or res.values.e_sigma < best_any.values.e_sigma:
            best_any = res
        if res.converged and res.hylomorphic:
            if best is None or res.values.e_sigma < best.values.e_sigma:
                best = res
    if best is not None:
        return best
    diag = {"n_starts": len(starts), "free_field_line": sigma * model.omega}
    if best_any is not None:
        diag["best_e_sigma"] = best_any.values.e_sigma
        diag["best_converged"] = best_any.converged
        diag["spread"] = decay_diagnostic(grid, best_any.u)
    raise GroundStateNotFound(
        f"no binding minimizer at sigma = {sigma:.6g}: "
        f"best energy {diag.get('best_e_sigma', float('nan')):.6g} vs "
        f"free-field line {sigma * model.omega:.6g}",
        best_local=best_any,
        diagnostics=diag,
    )


def find_bound_state_in_basin(
    grid: RadialGrid,
    model: NonlinearityModel,
    sigma: float,
    u0=None,
    config: SolverConfig | None = None,
    s_scan_max: float = 8.0,
) -> StandingWaveResult:
    """Minimize e_sigma without leaving the region j0 < 0.

    Steps whose candidate has j0 >= 0 are vetoed, so the descent can
    only stop inside the region or abort with BasinExitError when the
    minimum sits on its boundary.  Starting profiles must already have
    j0 < 0; with u0 = None the bump catalog is filtered for that.
    """

    def inside(u):
        vals = compute_functionals(grid, model, u)
        return vals.j0 < 0.0

    if u0 is not None:
        if not inside(np.asarray(u0)):
            raise ValueError("starting profile has j0 >= 0")
        return minimize_energy(
            grid, model, u0, sigma, config=config, accept_hook=inside, origin="warm"
        )

    starts = [(lab, u) for lab, u in initial_profiles(grid, model, sigma, config, s_scan_max) if inside(u)]
    if not starts:
        raise BasinExitError("no starting profile with j0 < 0 on this grid")
    best = None
    last_exit = None
    for label, u0 in starts:
        try:
            res = minimize_energy(
                grid, model, u0, sigma, config=config, accept_hook=inside, origin=label
            )
        except (BasinExitError, CollapseError) as exc:
            last_exit = exc
            continue
        if res.converged and (best is None or res.values.e_sigma < best.values.e_sigma):
            best = res
    if best is None:
        if isinstance(last_exit, BasinExitError):
            raise last_exit
        raise BasinExitError("no basin-restricted descent converged")
    return best


# ---------------------------------------------------------------------------
# Multiplicity


@dataclass(frozen=True)
class MultiplicityResult:
    """Distinct bound states, one per negativity interval that yielded one."""

    states: tuple
    failures: tuple  # (interval_index, reason) pairs
    intervals: tuple

    @property
    def count(self) -> int:
        return len(self.states)


def find_multiple_states(
    grid: RadialGrid,
    model: NonlinearityModel,
    sigma: float,
    config: SolverConfig | None = None,
    s_scan_max: float = 8.0,
) -> MultiplicityResult:
    """One bound state per negativity interval of R, by truncation.

    For interval i the model is replaced above eta_i by a monotone
    continuation, the modified energy is minimized, and the result is
    kept when its amplitude stays inside the truncation window (below
    eta_i, and above xi_i for i >= 2 so the state genuinely uses well
    i).  Inside the window the modified and original models coincide,
    so the state is re-certified against the original model verbatim.
    Near-duplicate profiles are dropped.
    """
    dec = decompose_negative_set(model, s_scan_max=s_scan_max)
    states = []
    failures = []
    for i in range(1, dec.count + 1):
        xi, eta = dec.intervals[i - 1]
        if not math.isfinite(eta):
            failures.append((i, "unbounded negativity interval"))
            continue
        try:
            trunc = truncate_model(model, i, decomposition=dec, s_scan_max=s_scan_max)
        except Exception as exc:
            failures.append((i, f"truncation failed: {exc}"))
            continue
        try:
            res = find_ground_state(grid, trunc, sigma, config=config, s_scan_max=eta)
        except GroundStateNotFound as exc:
            failures.append((i, f"no binding minimizer: {exc}"))
            continue
        amp = float(np.max(res.u))
        if amp >= eta:
            failures.append((i, f"amplitude {amp:.4g} reached the truncation level {eta:.4g}"))
            continue
        if i >= 2 and amp <= xi:
            failures.append((i, f"amplitude {amp:.4g} never entered well {i}"))
            continue
        # inside the window the truncation is the identity, so the state
        # solves the original problem; re-evaluate to make that explicit
        final = StandingWaveResult(
            u=res.u,
            sigma=res.sigma,
            values=compute_functionals(grid, model, res.u, sigma=sigma),
            frequency=res.frequency,
            residual=static_residual(grid, model, res.u, res.frequency),
            iterations=res.iterations,
            converged=res.converged,
            origin=f"well {i}: {res.origin}",
            energies=res.energies,
        )
        duplicate = False
        for other in states:
            diff = grid.norm_mass(final.u - other.u)
            scale = max(grid.norm_mass(final.u), grid.norm_mass(other.u))
            if diff <= 1e-2 * scale:
                duplicate = True
                failures.append((i, "duplicate of an earlier state"))
                break
        if not duplicate:
            states.append(final)
    return MultiplicityResult(states=tuple(states), failures=tuple(failures), intervals=dec.intervals)


# ---------------------------------------------------------------------------
# Second-order certification


@dataclass(frozen=True)
class LocalMinCertificate:
    certified: bool
    smallest_eigenvalues: tuple
    n_free: int
    tolerance: float


def _curvature_matrix(grid, model, u):
    """Tridiagonal Gauss assembly of the R'' term of the Hessian."""
    ug = grid.values_at_gauss(u)
    wgt = grid.gauss_weights * model.d2r(ug)
    lam, mu = 1.0 - grid.gauss_xi, grid.gauss_xi
    d_ll = wgt @ (lam * lam)
    d_lr = wgt @ (lam * mu)
    d_rr = wgt @ (mu * mu)
    diag = np.zeros(grid.n_cells + 1)
    diag[:-1] += d_ll
    diag[1:] += d_rr
    return diag, d_lr


def certify_local_min(
    grid: RadialGrid,
    model: NonlinearityModel,
    u,
    sigma: float,
    n_eigenvalues: int = 4,
    tolerance: float | None = None,
) -> LocalMinCertificate:
    """Check second-order optimality on the active set.

    Assembles the full Hessian of e_sigma (including the rank-one term
    from the 1/K barrier), restricts it to nodes where u is strictly
    positive, and solves the generalized eigenproblem against the mass
    matrix.  Certified means the smallest eigenvalues clear a small
    negative tolerance that absorbs roundoff.
    """
    u = grid.check_field(u)
    k = float(np.dot(u, grid.apply_mass(u)))
    if k <= 0:
        raise ValueError("cannot certify the zero profile")
    if tolerance is None:
        tolerance = -1e-8 * max(1.0, model.omega**2)

    c_diag, c_off = _curvature_matrix(grid, model, u)
    coeff = model.omega**2 - sigma**2 / k**2
    diag = grid.s_diag + c_diag + coeff * grid.q_diag
    off = grid.s_off + c_off + coeff * grid.q_off
    qu = grid.apply_mass(u)

    free = (u > 1e-12 * float(np.max(u))) & (np.arange(u.size) < grid.n_cells)
    idx = np.nonzero(free)[0]
    if idx.size == 0:
        raise ValueError("no free nodes to certify")
    nf = idx.size

    h = np.zeros((nf, nf))
    q = np.zeros((nf, nf))
    pos = {j: a for a, j in enumerate(idx)}
    for a, j in enumerate(idx):
        h[a, a] = diag[j]
        q[a, a] = grid.q_diag[j]
        if j + 1 in pos:
            b = pos[j + 1]
            h[a, b] = h[b, a] = off[j]
            q[a, b] = q[b, a] = grid.q_off[j]
    h += (4.0 * sigma**2 / k**3) * np.outer(qu[idx], qu[idx])

    m = min(n_eigenvalues, nf)
    vals = eigh(h, q, eigvals_only=True, subset_by_index=[0, m - 1])
    return LocalMinCertificate(
        certified=bool(vals[0] >= tolerance),
        smallest_eigenvalues=tuple(float(v) for v in vals),
        n_free=nf,
        tolerance=float(tolerance),
    )
