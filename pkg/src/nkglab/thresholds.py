"""Charge thresholds and the constrained-minimization curves behind them.

Two charges organize the static picture.  Above sigma_g the energy
admits a binding minimizer (the ratio e_sigma / sigma drops below the
mass omega); above sigma_b the minimizer also beats every profile on
the boundary j0 = 0, which is what the orbital stability argument
needs.  Both are driven by the curve

    j(k) = |inf { j0(u) : K(u) = k }|,    positive once k > kbar,

and by kbar itself, the charge concentration where binding first pays.
The fixed-K minimizations run through the shared descent engine with an
augmented-Lagrangian penalty; everything downstream consumes the curve:

    phi(k)  = omega k - sqrt(2 k j(k))    upper bounds for sigma_g,
    boundary value for sigma_b            (omega^2 kbar + sigma^2/kbar)/2,
    frequency ratios 2 j(k)/(k - kbar)    the small-frequency condition.

Estimates are honest brackets: upper ends come from explicit profiles
(rigorous up to quadrature), lower ends from a mass-gap inequality and
from where the solver stopped finding negativity (heuristic, recorded
as such).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BasinExitError, CollapseError, GroundStateNotFound
from .minimize import SolverConfig, descend, find_bound_state_in_basin, find_ground_state
from .nonlinearity import NonlinearityModel
from .radial import (
    RadialGrid,
    bump_functionals_exact,
    compute_functionals,
    gradient_j0,
    make_bump,
    rescale,
)

__all__ = [
    "ConstrainedPoint",
    "KbarEstimate",
    "SigmaGEstimate",
    "SigmaBEstimate",
    "SmallFrequencyReport",
    "BumpBound",
    "ThresholdReport",
    "constrained_j0_minimum",
    "estimate_kbar",
    "estimate_sigma_g",
    "estimate_sigma_b",
    "check_small_frequency",
    "bump_upper_bounds",
    "make_threshold_report",
]


# ---------------------------------------------------------------------------
# Fixed-charge-concentration minimization (augmented Lagrangian)


class _PenalizedObjective:
    """j0 + mu (K - k) + rho/2 (K - k)^2 for the inner descent."""

    def __init__(self, grid, model, k_target, mu, rho):
        self.grid = grid
        self.model = model
        self.k_target = k_target
        self.mu = mu
        self.rho = rho

    def value(self, u) -> float:
        g = self.grid
        k = float(np.dot(u, g.apply_mass(u)))
        kin = 0.5 * float(np.dot(u, g.apply_stiffness(u)))
        with np.errstate(over="ignore", invalid="ignore"):
            pot = float(np.sum(g.gauss_weights * self.model.r(g.values_at_gauss(u))))
        gap = k - self.k_target
        return kin + pot + self.mu * gap + 0.5 * self.rho * gap * gap

    def grad_cov(self, u):
        k = float(np.dot(u, self.grid.apply_mass(u)))
        lam = self.mu + self.rho * (k - self.k_target)
        return gradient_j0(self.grid, self.model, u) + (2.0 * lam) * self.grid.apply_mass(u)


@dataclass(frozen=True)
class ConstrainedSolve:
    u: np.ndarray
    j0: float
    k: float
    converged: bool
    outer_iterations: int


def _density_level(model, s_scan_max) -> float:
    """Amplitude with the best binding energy per unit charge."""
    spec = model.r_spec
    if hasattr(spec, "centers"):
        cs = np.array(spec.centers)
        return float(cs[np.argmin(model.r(cs) / cs**2)])
    xs = np.geomspace(1e-3 * s_scan_max, s_scan_max, 600)
    ratio = model.r(xs) / xs**2
    i = int(np.argmin(ratio))
    return float(xs[i]) if ratio[i] < 0 else 1.0


def constrained_j0_minimum(
    grid: RadialGrid,
    model: NonlinearityModel,
    k_target: float,
    u0=None,
    config: SolverConfig | None = None,
    k_tol: float = 1e-6,
    max_outer: int = 12,
) -> ConstrainedSolve:
    """Minimize j0 at fixed charge concentration K = k_target.

    Classic augmented Lagrangian: inner unconstrained descents, the
    multiplier absorbs the constraint force, the penalty weight only
    escalates when the constraint gap stalls.
    """
    if not k_target > 0:
        raise ValueError("k_target must be positive")
    cfg = config or SolverConfig()
    n = grid.dimension
    if u0 is None:
        s = _density_level(model, 0.75 * np.max(grid.nodes))
        ramp = max(4.0 * grid.h, min(1.0, 0.1 * grid.r_max))
        r_in = (k_target * n / (grid.s_area * s**2)) ** (1.0 / n)
        r_in = min(max(r_in, 2.0 * grid.h), grid.r_max - ramp - grid.h)
        u = make_bump(grid, s, r_in, ramp)
    else:
        u = grid.check_field(u0).copy()
    # match the requested concentration before the first inner solve
    k_now = float(np.dot(u, grid.apply_mass(u)))
    if k_now > 0:
        u *= math.sqrt(k_target / k_now)

    mu = 0.0
    rho = 10.0 * model.omega**2 / k_target
    rho_cap = rho * 1e6
    gap_prev = math.inf
    converged = False
    outer = 0
    for outer in range(1, max_outer + 1):
        obj = _PenalizedObjective(grid, model, k_target, mu, rho)
        res = descend(grid, obj, u, config=cfg)
        u = res.u
        k_now = float(np.dot(u, grid.apply_mass(u)))
        gap = k_now - k_target
        if abs(gap) <= k_tol * k_target and res.converged:
            converged = True
            break
        mu += rho * gap
        if abs(gap) > 0.25 * abs(gap_prev) and rho < rho_cap:
            rho *= 10.0
        gap_prev = gap
        if k_now < 1e-8 * k_target:
            # the penalty lost the profile entirely; rebuild and lean harder
            s = _density_level(model, 0.75 * grid.r_max)
            ramp = max(4.0 * grid.h, min(1.0, 0.1 * grid.r_max))
            r_in = (k_target * n / (grid.s_area * s**2)) ** (1.0 / n)
            r_in = min(max(r_in, 2.0 * grid.h), grid.r_max - ramp - grid.h)
            u = make_bump(grid, s, r_in, ramp)
            mu = 0.0
            rho = min(rho * 10.0, rho_cap)
    vals = compute_functionals(grid, model, u)
    return ConstrainedSolve(u=u, j0=vals.j0, k=k_now, converged=converged, outer_iterations=outer)


# ---------------------------------------------------------------------------
# kbar and the j(k) curve


@dataclass(frozen=True)
class ConstrainedPoint:
    k: float
    j: float              # |inf j0| at this k, 0.0 when no negativity was found
    attained: bool        # True when the constrained minimum is strictly negative
    phi: float | None     # omega k - sqrt(2 k j), only meaningful when attained
    source: str = "none"  # "solver", "bump", or "none"


@dataclass(frozen=True)
class KbarEstimate:
    """Bracket for the onset of binding at fixed concentration.

    hi is backed by a profile with j0 < 0 (a grid minimizer or an
    explicit wide plateau evaluated in closed form); lo only says
    neither source produced one below it, so it is trustworthy exactly
    to the extent the search is.
    """

    lo: float
    hi: float
    points: tuple
    refinements: int

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


class _BumpFamily:
    """Self-similar plateau family, tabulated once per model.

    Proportional-ramp bumps dilate exactly (K and the potential scale by
    lambda^n, the gradient term by lambda^(n-2)), so the unit-radius
    functionals over an amplitude ladder answer, in closed form, whether
    some family member binds at any prescribed K.  Members can be far
    wider than any mesh, which is the entire point: binding at small
    concentration lives at amplitudes and radii no fixed grid reaches.
    """

    def __init__(self, model, s_scan_max=8.0, n_levels=400):
        self.n = model.dimension
        levels = np.geomspace(1e-14, s_scan_max, n_levels)
        rows = []
        for s in levels:
            vals = bump_functionals_exact(model, float(s), 1.0, 1.0)
            if vals.potential < 0:
                rows.append((float(s), vals.k, vals.kinetic, vals.potential))
        self.rows = rows

    def witness(self, k: float):
        """Best (most negative) j0 over the family at K = k.

        A member only counts when its j0 clears the roundoff of its own
        two terms; near the binding onset the optimum balances them at
        comparable size, so the test must scale with the terms rather
        than with k (|j0| itself falls like k^3 for subcritical powers
        and any fixed relative-to-k floor would fake a positive kbar).
        """
        best = None
        for s, k1, kin1, pot1 in self.rows:
            lam = (k / k1) ** (1.0 / self.n)
            t_kin = lam ** (self.n - 2) * kin1
            t_pot = lam**self.n * pot1
            j0 = t_kin + t_pot
            if j0 < -1e-10 * (t_kin + abs(t_pot)) and (best is None or j0 < best[0]):
                best = (j0, s, lam)
        return best


def _probe(grid, model, k, warm, cfg, bumps=None, margin_factor=1e-6, bool_only=False) -> tuple:
    margin = margin_factor * model.omega**2 * k
    if bumps is not None and bool_only:
        hit = bumps.witness(k)
        if hit is not None:
            j = -hit[0]
            phi = model.omega * k - math.sqrt(2.0 * k * j)
            return ConstrainedPoint(k=float(k), j=j, attained=True, phi=phi, source="bump"), warm
    u0 = None
    if warm is not None:
        k_prev = float(np.dot(warm, grid.apply_mass(warm)))
        if k_prev > 0:
            lam = (k / k_prev) ** (1.0 / grid.dimension)
            u0 = rescale(grid, warm, lam, allow_truncation=True)
    sol = constrained_j0_minimum(grid, model, k, u0=u0, config=cfg)
    j = -sol.j0 if (sol.converged and sol.j0 < -margin) else 0.0
    source = "solver" if j > 0 else "none"
    if bumps is not None:
        hit = bumps.witness(k)
        if hit is not None and -hit[0] > j:
            j = -hit[0]
            source = "bump"
    attained = j > 0
    phi = model.omega * k - math.sqrt(2.0 * k * j) if attained else None
    return ConstrainedPoint(k=float(k), j=float(j), attained=attained, phi=phi, source=source), sol.u


def estimate_kbar(
    grid: RadialGrid,
    model: NonlinearityModel,
    sigma_ref: float = 1.0,
    n_points: int = 24,
    config: SolverConfig | None = None,
    refine_steps: int = 6,
    k_span: tuple = (1e-3, 1e3),
    extension_cap: float = 1e6,
) -> KbarEstimate:
    """Bracket kbar by scanning the constrained curve on a geometric ladder.

    The ladder is centered on sigma_ref / omega, extends upward decade
    by decade while no negativity shows up, and the final bracket is
    tightened by bisection on the negativity predicate (sound because
    dilation makes negativity monotone in k).
    """
    cfg = config or SolverConfig()
    base = sigma_ref / model.omega
    k_lo, k_hi = k_span[0] * base, k_span[1] * base
    ks = list(np.geomspace(k_lo, k_hi, n_points))
    spacing = (k_hi / k_lo) ** (1.0 / (n_points - 1))
    bumps = _BumpFamily(model)

    points = []
    warm = None
    for k in ks:
        pt, u = _probe(grid, model, k, warm, cfg, bumps=bumps)
        points.append(pt)
        if pt.source == "solver":
            warm = u

    while not any(p.attained for p in points) and ks[-1] * spacing <= extension_cap * base:
        k = ks[-1] * spacing
        while k <= min(ks[-1] * 10.0, extension_cap * base) * (1.0 + 1e-12):
            pt, u = _probe(grid, model, k, warm, cfg, bumps=bumps)
            points.append(pt)
            ks.append(k)
            if pt.attained:
                if pt.source == "solver":
                    warm = u
                break
            k *= spacing

    attained = [p for p in points if p.attained]
    if not attained:
        return KbarEstimate(lo=ks[-1], hi=math.inf, points=tuple(points), refinements=0)

    hi = min(p.k for p in attained)
    below = [p.k for p in points if not p.attained and p.k < hi]
    lo = max(below) if below else 0.0

    steps = 0
    for _ in range(refine_steps):
        if lo <= 0.0:
            mid = 0.5 * hi
        else:
            mid = math.sqrt(lo * hi)
            if not mid < hi * (1.0 - 1e-12):
                break
        pt, u = _probe(grid, model, mid, warm, cfg, bumps=bumps, bool_only=True)
        steps += 1
        if pt.attained:
            hi = mid
            if pt.source == "solver":
                warm = u
        else:
            lo = mid
    return KbarEstimate(lo=float(lo), hi=float(hi), points=tuple(points), refinements=steps)


# ---------------------------------------------------------------------------
# sigma_g


@dataclass(frozen=True)
class SigmaGEstimate:
    lo: float
    hi: float
    witness_k: float
    gap_coefficient: float
    solver_lo: float = 0.0   # largest charge where the full search found no binding
    n_probes: int = 0

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _mass_gap_coefficient(model, s_scan_max=8.0) -> float:
    """1 - sqrt(gamma), gamma = sup 2 |R_-| / (omega^2 s^2) <= 1 under (H1)."""
    xs = np.geomspace(1e-6 * s_scan_max, s_scan_max, 4000)
    gamma = float(np.max(2.0 * np.maximum(-model.r(xs), 0.0) / (model.omega**2 * xs**2)))
    gamma = min(max(gamma, 0.0), 1.0)
    return 1.0 - math.sqrt(gamma)


def _bump_phi_scan(model, levels, radii) -> list:
    """phi evaluated on the analytic bump family; grid-free."""
    out = []
    for s in levels:
        for r_in in radii:
            vals = bump_functionals_exact(model, s, r_in, r_in)
            if vals.j0 < 0:
                phi = model.omega * vals.k - math.sqrt(2.0 * vals.k * (-vals.j0))
                out.append((phi, vals.k, s, r_in))
    return out


def _binding_probe(grid, model, sigma, cfg, s_scan_max) -> bool:
    """Does the full multistart search bind at this charge?"""
    try:
        find_ground_state(grid, model, sigma, config=cfg, s_scan_max=s_scan_max)
    except (GroundStateNotFound, CollapseError, ValueError):
        return False
    return True


def estimate_sigma_g(
    grid: RadialGrid,
    model: NonlinearityModel,
    kbar: KbarEstimate,
    config: SolverConfig | None = None,
    near_factors: tuple = (1.3, 1.1, 1.03, 1.01),
    s_scan_max: float = 8.0,
    probe_steps: int = 0,
) -> SigmaGEstimate:
    """Bracket the binding threshold from the phi curve.

    Every attained sample of the constrained curve, an analytic bump
    family, and a few fresh solves just above kbar give upper bounds on
    sigma_g (any admissible profile does).  The lower end combines the
    kbar bracket with the mass-gap inequality phi(k) >= c_gap omega k;
    it degenerates to zero exactly in the regimes where the threshold
    itself vanishes.

    With probe_steps > 0 the bracket is sharpened by direct searches: a
    found minimizer at charge s proves sigma_g <= s, a certified miss
    raises the heuristic lower end (solver_lo) the same way the sigma_b
    bisection does.  Every probe is a full multistart solve, so this is
    opt-in.
    """
    cfg = config or SolverConfig()
    candidates = [(p.phi, p.k) for p in kbar.points if p.attained]
    bumps = _BumpFamily(model)

    if math.isfinite(kbar.hi):
        warm = None
        for f in near_factors:
            k = kbar.hi * f
            pt, u = _probe(grid, model, k, warm, cfg, bumps=bumps)
            if pt.attained:
                candidates.append((pt.phi, pt.k))
                if pt.source == "solver":
                    warm = u

    levels = [_density_level(model, s_scan_max)]
    spec = model.r_spec
    if hasattr(spec, "centers"):
        levels = list(spec.centers)
    radii = np.geomspace(0.5, 2e4, 240)
    candidates += [(phi, k) for phi, k, _, _ in _bump_phi_scan(model, levels, radii)]

    if math.isfinite(kbar.hi):
        candidates.append((model.omega * kbar.hi, kbar.hi))  # phi(kbar) itself
    if not candidates:
        return SigmaGEstimate(lo=0.0, hi=math.inf, witness_k=math.nan, gap_coefficient=0.0)

    hi, witness_k = min(candidates, key=lambda t: t[0])
    c_gap = _mass_gap_coefficient(model, s_scan_max)
    solver_lo = 0.0
    probes = 0
    if probe_steps > 0 and math.isfinite(hi) and hi > 0:
        floor = 0.3 * hi
        s = 0.95 * hi
        while probes < probe_steps and s > floor:
            probes += 1
            if _binding_probe(grid, model, s, cfg, s_scan_max):
                hi = s
                s *= 0.7
            else:
                solver_lo = s
                break
        while probes < probe_steps and solver_lo > 0.0 and hi - solver_lo > 0.01 * hi:
            mid = 0.5 * (solver_lo + hi)
            probes += 1
            if _binding_probe(grid, model, mid, cfg, s_scan_max):
                hi = mid
            else:
                solver_lo = mid
    lo = max(c_gap * model.omega * kbar.lo, solver_lo)
    lo = min(max(lo, 0.0), hi)
    return SigmaGEstimate(
        lo=float(lo),
        hi=float(hi),
        witness_k=float(witness_k),
        gap_coefficient=c_gap,
        solver_lo=float(solver_lo),
        n_probes=probes,
    )


# ---------------------------------------------------------------------------
# sigma_b


@dataclass(frozen=True)
class SigmaBEstimate:
    lo: float
    hi: float
    boundary_kbar: float
    n_probes: int


def estimate_sigma_b(
    grid: RadialGrid,
    model: NonlinearityModel,
    kbar: KbarEstimate,
    sigma_start: float,
    config: SolverConfig | None = None,
    rel_width: float = 1e-3,
    floor_factor: float = 1e-3,
) -> SigmaBEstimate:
    """Bracket the stability threshold by bisecting its defining predicate.

    The predicate at charge sigma: the basin-restricted minimum of
    e_sigma beats the boundary value (omega^2 kbar + sigma^2 / kbar)/2.
    It holds for large charges and fails below sigma_b.  Probes are
    warm-started along the descent, and never observing a failure down
    to the floor reports the bracket [0, smallest probe].
    """
    cfg = config or SolverConfig()
    if not sigma_start > 0:
        raise ValueError("sigma_start must be positive")
    if not math.isfinite(kbar.hi) or kbar.hi <= 0:
        raise ValueError("sigma_b needs a finite positive kbar bracket")
    k_mid = kbar.midpoint
    if k_mid <= 0:
        # binding at arbitrarily small concentration: the boundary value
        # blows up and the predicate holds for every charge
        return SigmaBEstimate(lo=0.0, hi=0.0, boundary_kbar=0.0, n_probes=0)

    om = model.omega
    state = {"warm": None, "count": 0}

    def predicate(sigma: float) -> bool:
        state["count"] += 1
        rhs = 0.5 * (om**2 * k_mid + sigma**2 / k_mid)
        try:
            if state["warm"] is not None:
                res = find_bound_state_in_basin(grid, model, sigma, u0=state["warm"], config=cfg)
            else:
                res = find_bound_state_in_basin(grid, model, sigma, config=cfg)
        except (BasinExitError, CollapseError):
            return False
        if res.converged:
            state["warm"] = res.u
        return res.values.e_sigma < rhs

    sigma = float(sigma_start)
    tries = 0
    while not predicate(sigma):
        sigma *= 2.0
        tries += 1
        if tries > 6:
            return SigmaBEstimate(
                lo=sigma_start, hi=math.inf, boundary_kbar=k_mid, n_probes=state["count"]
            )

    hi = sigma
    floor = floor_factor * sigma_start
    lo = 0.0
    while hi * 0.5 > floor:
        s = hi * 0.5
        if predicate(s):
            hi = s
        else:
            lo = s
            break
    if lo == 0.0:
        return SigmaBEstimate(lo=0.0, hi=hi, boundary_kbar=k_mid, n_probes=state["count"])

    while hi - lo > rel_width * sigma_start:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return SigmaBEstimate(lo=float(lo), hi=float(hi), boundary_kbar=k_mid, n_probes=state["count"])


# ---------------------------------------------------------------------------
# Small-frequency condition


@dataclass(frozen=True)
class SmallFrequencyReport:
    """Does 2 |j0| / (K - kbar) reach omega^2 over admissible profiles?

    Reaching it means constrained states exist with frequencies down to
    the bottom of the mass gap; the sup is approached by wide plateaus
    at amplitudes where the full potential nearly vanishes.
    """

    sup_ratio: float
    omega_sq: float
    margin: float
    witness: dict

    @property
    def holds(self) -> bool:
        return self.sup_ratio >= self.omega_sq * (1.0 - self.margin)


def check_small_frequency(
    model: NonlinearityModel,
    kbar: KbarEstimate,
    margin: float = 1e-3,
    s_scan_max: float = 8.0,
) -> SmallFrequencyReport:
    k_ref = kbar.midpoint if math.isfinite(kbar.hi) else 0.0
    best = 0.0
    witness: dict = {}

    # curve samples
    for p in kbar.points:
        if p.attained and p.k > k_ref and p.k - k_ref > 1e-12 * p.k:
            ratio = 2.0 * p.j / (p.k - k_ref)
            if ratio > best:
                best, witness = ratio, {"kind": "curve", "k": p.k}

    # analytic plateau families at binding-density and zero-potential levels
    levels = set()
    spec = model.r_spec
    if hasattr(spec, "centers"):
        levels.update(float(c) for c in spec.centers)
    levels.add(_density_level(model, s_scan_max))
    xs = np.geomspace(1e-3 * s_scan_max, s_scan_max, 2000)
    with np.errstate(divide="ignore"):
        fr = model.f(xs) / xs**2
    i = int(np.argmin(fr))
    if fr[i] < 0.45 * model.omega**2:
        levels.add(float(xs[i]))

    # thin ramps: the plateau must dominate or the ratio is diluted below
    # the pointwise density sup it is supposed to approach
    radii = np.geomspace(1.0, 1e5, 260)
    for s in levels:
        for r_in in radii:
            vals = bump_functionals_exact(model, s, r_in, max(1.0, 1e-3 * r_in))
            if vals.j0 < 0 and vals.k > k_ref * (1.0 + 1e-9) + 1e-12:
                ratio = 2.0 * (-vals.j0) / (vals.k - k_ref)
                if ratio > best:
                    best, witness = ratio, {"kind": "bump", "amplitude": s, "radius": float(r_in)}

    return SmallFrequencyReport(
        sup_ratio=float(best), omega_sq=model.omega**2, margin=margin, witness=witness
    )


# ---------------------------------------------------------------------------
# Analytic bump bounds for the vanishing-threshold regime


@dataclass(frozen=True)
class BumpBound:
    amplitude: float
    radius: float
    k: float
    j0: float
    sigma_bound: float


def bump_upper_bounds(
    model: NonlinearityModel,
    amplitudes: tuple = (0.2, 0.1, 0.04),
    radii=None,
) -> tuple:
    """Upper bounds on sigma_g from explicit wide plateaus, one per amplitude.

    For each amplitude the radius minimizing phi over the family is
    selected.  Profiles are evaluated in closed form, so radii far
    beyond any reasonable mesh are fair game; in the regime where R is
    negative with a subcritical power near zero the bounds decrease
    with the amplitude, exhibiting the collapse of the threshold.
    """
    if radii is None:
        radii = np.geomspace(0.5, 1e5, 400)
    out = []
    for s in amplitudes:
        best = None
        for r_in in radii:
            vals = bump_functionals_exact(model, s, r_in, r_in)
            if vals.j0 >= 0:
                continue
            phi = model.omega * vals.k - math.sqrt(2.0 * vals.k * (-vals.j0))
            if best is None or phi < best.sigma_bound:
                best = BumpBound(
                    amplitude=float(s), radius=float(r_in),
                    k=vals.k, j0=vals.j0, sigma_bound=float(phi),
                )
        if best is None:
            best = BumpBound(
                amplitude=float(s), radius=math.nan, k=math.nan,
                j0=math.nan, sigma_bound=math.inf,
            )
        out.append(best)
    return tuple(out)


# ---------------------------------------------------------------------------
# Orchestrator


@dataclass(frozen=True)
class ThresholdReport:
    kbar: KbarEstimate
    sigma_g: SigmaGEstimate
    sigma_b: SigmaBEstimate | None
    small_frequency: SmallFrequencyReport
    bump_bounds: tuple


def make_threshold_report(
    grid: RadialGrid,
    model: NonlinearityModel,
    sigma_ref: float = 1.0,
    config: SolverConfig | None = None,
    include_sigma_b: bool = True,
    s_scan_max: float = 8.0,
    bump_amplitudes: tuple = (0.2, 0.1, 0.04),
    sigma_g_probes: int = 8,
) -> ThresholdReport:
    """Run the full threshold battery on one model."""
    cfg = config or SolverConfig()
    kbar = estimate_kbar(grid, model, sigma_ref=sigma_ref, config=cfg)
    sg = estimate_sigma_g(
        grid, model, kbar, config=cfg, s_scan_max=s_scan_max, probe_steps=sigma_g_probes
    )
    sb = None
    if include_sigma_b and math.isfinite(kbar.hi):
        if kbar.midpoint <= 0:
            sb = SigmaBEstimate(lo=0.0, hi=0.0, boundary_kbar=0.0, n_probes=0)
        else:
            start = max(2.0 * sg.hi, model.omega * kbar.hi) if math.isfinite(sg.hi) else model.omega * kbar.hi
            sb = estimate_sigma_b(grid, model, kbar, sigma_start=start, config=cfg)
    sf = check_small_frequency(model, kbar, s_scan_max=s_scan_max)
    bounds = bump_upper_bounds(model, amplitudes=bump_amplitudes)
    return ThresholdReport(kbar=kbar, sigma_g=sg, sigma_b=sb, small_frequency=sf, bump_bounds=bounds)
