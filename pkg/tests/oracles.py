"""Independent reference computations the tests compare against.

Everything here deliberately avoids the package's quadrature and
assembly routines: profiles are integrated with adaptive quadrature,
the standing-wave equation is solved by shooting on the radial ODE,
and derivatives come from finite differences.
"""
import math

import numpy as np
from scipy.integrate import quad, solve_ivp


def sphere_area(n):
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def plateau_profile(s_level, r_inner, ramp):
    def u(r):
        if r <= r_inner:
            return s_level
        if r >= r_inner + ramp:
            return 0.0
        return s_level * (r_inner + ramp - r) / ramp

    return u


def plateau_values_quad(model, s_level, r_inner, ramp):
    """(K, kinetic, potential) of a plateau bump by adaptive quadrature."""
    n = model.dimension
    area = sphere_area(n)
    u = plateau_profile(s_level, r_inner, ramp)
    slope = s_level / ramp
    pts = (r_inner, r_inner + ramp)

    k_int, _ = quad(lambda r: u(r) ** 2 * r ** (n - 1), 0.0, r_inner + ramp, points=pts, limit=200)
    kin_int, _ = quad(lambda r: slope**2 * r ** (n - 1), r_inner, r_inner + ramp, limit=200)
    pot_int, _ = quad(
        lambda r: float(model.r(u(r))) * r ** (n - 1), 0.0, r_inner + ramp, points=pts, limit=200
    )
    return area * k_int, 0.5 * area * kin_int, area * pot_int


def directional_derivative(value, u, v, eps):
    """Central finite difference of a scalar functional along v."""
    return (value(u + eps * v) - value(u - eps * v)) / (2.0 * eps)


def shoot_profile(model, frequency, n_nodes=0, r_end=50.0, n_scan=400, s_hi=8.0):
    """Radial standing-wave profile with n_nodes sign changes, by shooting.

    Integrates u'' + (N-1)/r u' = F'(|u|) sgn u - frequency^2 u outward
    from u(0) = a, u'(0) = 0 and bisects the initial amplitude on the
    crossing count.  Returns a callable evaluating the profile, with the
    far tail grafted onto the linearized decay once the shot trajectory
    stops tracking the connecting orbit.
    """
    om2 = frequency**2
    n = model.dimension

    def rhs(r, y):
        u, w = y
        sign = 1.0 if u >= 0.0 else -1.0
        force = (model.omega**2 - om2) * u + float(model.dr(abs(u))) * sign
        if r < 1e-12:
            return (w, force / n)
        return (w, force - (n - 1.0) / r * w)

    def integrate(a, escape):
        ev_cross = lambda r, y: y[0]
        ev_cross.terminal = False
        ev_esc = lambda r, y: abs(y[0]) - escape
        ev_esc.terminal = True
        sol = solve_ivp(
            rhs,
            (0.0, r_end),
            (a, 0.0),
            method="RK45",
            rtol=1e-10,
            atol=1e-12,
            events=(ev_cross, ev_esc),
            dense_output=True,
        )
        return len(sol.t_events[0]), sol

    escape = 5.0 * s_hi
    lo = hi = None
    for a in np.geomspace(1e-3, s_hi, n_scan):
        m, _ = integrate(float(a), escape)
        if m <= n_nodes:
            lo = float(a)
        elif lo is not None:
            hi = float(a)
            break
    if hi is None:
        raise RuntimeError(f"no amplitude bracket for a {n_nodes}-node profile")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        m, _ = integrate(mid, escape)
        if m >= n_nodes + 1:
            hi = mid
        else:
            lo = mid
    _, sol = integrate(lo, escape)

    kappa = math.sqrt(max(model.omega**2 - om2, 0.0))
    rs = np.linspace(0.0, min(sol.t[-1], r_end), 6000)
    us = sol.sol(rs)[0]
    peak = int(np.argmax(np.abs(us)))
    j = peak + int(np.argmin(np.abs(us[peak:])))
    r_cut, u_cut = float(rs[j]), float(us[j])

    def eval_on(r_nodes):
        r_nodes = np.asarray(r_nodes, dtype=float)
        out = np.empty_like(r_nodes)
        inside = r_nodes <= r_cut
        out[inside] = sol.sol(r_nodes[inside])[0]
        rr = np.maximum(r_nodes[~inside], 1e-12)
        out[~inside] = u_cut * (r_cut / rr) ** ((n - 1) / 2.0) * np.exp(-kappa * (rr - r_cut))
        return out

    eval_on.amplitude = float(lo)
    eval_on.r_cut = r_cut
    return eval_on


def fd_hessian_columns(grad, u, columns, eps):
    """Hessian columns of a functional from central differences of its gradient."""
    cols = []
    for i in columns:
        e = np.zeros_like(u)
        e[i] = eps
        cols.append((grad(u + e) - grad(u - e)) / (2.0 * eps))
    return np.array(cols).T
