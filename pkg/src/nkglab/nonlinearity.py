"""Scalar-field nonlinearities and their structural checks.

The field potential is split as

    F(s) = (1/2) Omega^2 s^2 + R(s),        s = |psi| >= 0,

with R carrying everything beyond the free Klein-Gordon mass term.  All
solver behavior downstream (existence of solitons, charge thresholds,
multiplicity of bound states) is driven by a handful of structural
properties of R:

  (H0)  R(0) = R'(0) = R''(0) = 0          R is a genuine perturbation
  (H1)  R(s) >= -(1/2) Omega^2 s^2         F stays nonnegative
  (H2)  R(s0) < 0 for some s0              binding is possible at all
  (H3)  |R''(s)| <= c1 s^(p-2) + c2 s^(q-2), 2 < p <= q < 2N/(N-2)

plus two optional conditions that control the small-charge regime:

  (NC)  R < 0 near 0 and |R(s)|/s^(2+eps) does not vanish for some
        0 < eps < 4/N  (soliton threshold sigma_g collapses to 0)
  (ZC)  F(s1) = 0 for some s1 > 0           (stability threshold
        sigma_b collapses to 0)

This module owns the model representations (polynomial R, sums of
smooth compactly supported wells, truncated models), pointwise
evaluation, the condition checker, the decomposition of {R < 0} into
maximal intervals, and the truncation construction used by the
multiplicity pipeline.
"""

from __future__ import annotations

import hashlib
import json
import math
from configparser import ConfigParser
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import minimize_scalar

from .errors import (
    ConstructionError,
    DecompositionError,
    ModelDomainError,
    ModelRangeError,
    ConfigError,
)

__all__ = [
    "PolynomialR",
    "WellsR",
    "TruncatedR",
    "NonlinearityModel",
    "Evaluation",
    "ConditionReport",
    "NegativeSetDecomposition",
    "evaluate",
    "check_conditions",
    "decompose_negative_set",
    "truncate_model",
    "load_model_file",
    "parse_model_text",
    "model_to_text",
    "model_hash",
]


def _as_array(s):
    a = np.asarray(s, dtype=float)
    if np.any(a < 0):
        raise ModelDomainError("nonlinearity evaluated at negative amplitude")
    return a


# ---------------------------------------------------------------------------
# R-term representations


@dataclass(frozen=True)
class PolynomialR:
    """R(s) = sum_k c_k s^k with c_0 = c_1 = c_2 = 0.

    Coefficients are ascending in the power.  The cubic-and-up
    restriction makes (H0) structural rather than numerical.
    """

    coefficients: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.coefficients)
        if len(c) < 4:
            raise ValueError("polynomial R needs at least a cubic term slot")
        if any(x != 0.0 for x in c[:3]):
            raise ValueError("constant, linear and quadratic coefficients must vanish")
        object.__setattr__(self, "coefficients", c)

    def r(self, s):
        return npoly.polyval(np.asarray(s, dtype=float), self.coefficients)

    def dr(self, s):
        return npoly.polyval(np.asarray(s, dtype=float), npoly.polyder(self.coefficients))

    def d2r(self, s):
        return npoly.polyval(np.asarray(s, dtype=float), npoly.polyder(self.coefficients, 2))

    def dr_over_s(self, s):
        # R'(s)/s is itself a polynomial because R' starts at s^2.
        d = npoly.polyder(self.coefficients)
        return npoly.polyval(np.asarray(s, dtype=float), tuple(d[1:]))

    def describe(self) -> dict:
        return {"kind": "polynomial", "coefficients": list(self.coefficients)}


def _bump(t):
    """C^2 bump (1 - t^2)^3 on |t| < 1, zero outside."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    y = np.zeros_like(t)
    u = 1.0 - t[inside] ** 2
    y[inside] = u**3
    return y


def _dbump(t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    y = np.zeros_like(t)
    ti = t[inside]
    y[inside] = -6.0 * ti * (1.0 - ti**2) ** 2
    return y


def _d2bump(t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    y = np.zeros_like(t)
    ti = t[inside]
    y[inside] = 6.0 * (1.0 - ti**2) * (5.0 * ti**2 - 1.0)
    return y


@dataclass(frozen=True)
class WellsR:
    """R(s) = -sum_i d_i s^2 B((s - c_i)/w_i), B(t) = (1-t^2)^3 1_{|t|<1}.

    Each well is a smooth, compactly supported dip.  The s^2 prefactor
    keeps the (H1) test linear in the depth: the model satisfies (H1)
    iff every pointwise sum of d_i B(...) stays <= Omega^2/2, and a
    single well with depth exactly Omega^2/2 realizes (ZC) at its
    center.  Supports must stay away from s = 0 so (H0) is structural.
    """

    centers: tuple
    widths: tuple
    depths: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.centers)
        w = tuple(float(x) for x in self.widths)
        d = tuple(float(x) for x in self.depths)
        if not (len(c) == len(w) == len(d)) or not c:
            raise ValueError("centers, widths, depths must be nonempty and equal length")
        if any(x <= 0 for x in w) or any(x <= 0 for x in d):
            raise ValueError("widths and depths must be positive")
        order = sorted(range(len(c)), key=lambda i: c[i])
        c = tuple(c[i] for i in order)
        w = tuple(w[i] for i in order)
        d = tuple(d[i] for i in order)
        for ci, wi in zip(c, w):
            if ci - wi <= 0:
                raise ValueError("well support must not reach s = 0")
        for i in range(len(c) - 1):
            if c[i] + w[i] >= c[i + 1] - w[i + 1]:
                raise ValueError("well supports must be disjoint")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", w)
        object.__setattr__(self, "depths", d)

    def r(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, w, d in zip(self.centers, self.widths, self.depths):
            out -= d * s**2 * _bump((s - c) / w)
        return out

    def dr(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, w, d in zip(self.centers, self.widths, self.depths):
            t = (s - c) / w
            out -= d * (2.0 * s * _bump(t) + s**2 * _dbump(t) / w)
        return out

    def d2r(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, w, d in zip(self.centers, self.widths, self.depths):
            t = (s - c) / w
            out -= d * (2.0 * _bump(t) + 4.0 * s * _dbump(t) / w + s**2 * _d2bump(t) / w**2)
        return out

    def dr_over_s(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, w, d in zip(self.centers, self.widths, self.depths):
            t = (s - c) / w
            out -= d * (2.0 * _bump(t) + s * _dbump(t) / w)
        return out

    def describe(self) -> dict:
        return {
            "kind": "wells",
            "centers": list(self.centers),
            "widths": list(self.widths),
            "depths": list(self.depths),
        }


# smoothstep with two vanishing derivatives at both ends
_SSTEP = np.array([1.0, 0.0, 0.0, -10.0, 15.0, -6.0])  # S(t), ascending coeffs
_SSTEP_D = npoly.polyder(_SSTEP)


@dataclass(frozen=True)
class TruncatedR:
    """Base R below a cut level eta, monotone C^2 continuation above.

    The continuation is built on the slope: on a band [eta, eta + w] the
    derivative blends the second-order Taylor slope of R at eta into a
    nonnegative power-law tail slope

        g_tail(s) = c_t ((s - eta + L)/L)^(p-1),   c_t >= 0,

    via the quintic smoothstep, and the value is the exact integral of
    that slope.  Both slope branches are nonnegative on the band (the
    band is shrunk when R''(eta) < 0 would let the Taylor slope dip),
    so R' >= 0 holds everywhere above eta by construction, which is
    what the amplitude bound for solutions of the truncated model
    needs.  The tail grows like s^p so the (H3) cap is untouched.
    """

    base: object
    eta: float
    p_exponent: float
    band_width: float = 0.0  # 0 means: pick the default at build time

    # derived, filled in __post_init__
    _w: float = field(default=0.0, repr=False, compare=False)
    _r0: float = field(default=0.0, repr=False, compare=False)
    _r1: float = field(default=0.0, repr=False, compare=False)
    _r2: float = field(default=0.0, repr=False, compare=False)
    _ct: float = field(default=0.0, repr=False, compare=False)
    _L: float = field(default=1.0, repr=False, compare=False)
    _it_coeffs: tuple = field(default=(), repr=False, compare=False)
    _il_bcoeffs: tuple = field(default=(), repr=False, compare=False)
    _f_band_end: float = field(default=0.0, repr=False, compare=False)

    def __post_init__(self):
        eta = float(self.eta)
        if not (eta > 0 and math.isfinite(eta)):
            raise ConstructionError("truncation level must be positive and finite")
        r0 = float(self.base.r(eta))
        r1 = float(self.base.dr(eta))
        r2 = float(self.base.d2r(eta))
        slope_floor = 1e-9 * max(1.0, abs(r2) * eta)
        if r1 < -slope_floor:
            raise ConstructionError(
                f"R'({eta:.6g}) = {r1:.3e} < 0: not a right endpoint of the negative set"
            )
        r1 = max(r1, 0.0)
        if r1 <= slope_floor and r2 < -slope_floor:
            raise ConstructionError(
                "degenerate junction: zero slope with negative curvature admits no "
                "monotone C^2 continuation"
            )
        w = self.band_width if self.band_width > 0 else 0.5 * max(eta, 1.0)
        if r2 < 0 and r1 > 0:
            w = min(w, 0.5 * r1 / (-r2))  # keeps the Taylor slope >= r1/2 on the band
        L = max(eta, 1.0)
        ct = max(r1 + r2 * w, 0.0)

        # band value: integral of S(t) gT + (1 - S(t)) g_tail from eta
        taylor = np.array([r1, r2 * w])  # gT as a polynomial in t = (s - eta)/w
        it_poly = npoly.polymul(_SSTEP, taylor)
        it_int = npoly.polyint(it_poly)  # vanishes at t = 0
        a = L / w
        one_minus_s_in_x = np.array([0.0, 0.0, 0.0, 10.0 * a**3, -15.0 * a**4, 6.0 * a**5])
        # substitute x = u - 1 to get ascending coefficients in u
        shift = np.array([-1.0, 1.0])
        b = np.zeros(1)
        xpow = np.array([1.0])
        for coef in one_minus_s_in_x:
            b = npoly.polyadd(b, coef * xpow)
            xpow = npoly.polymul(xpow, shift)
        object.__setattr__(self, "_w", float(w))
        object.__setattr__(self, "_r0", r0)
        object.__setattr__(self, "_r1", r1)
        object.__setattr__(self, "_r2", r2)
        object.__setattr__(self, "_ct", float(ct))
        object.__setattr__(self, "_L", float(L))
        object.__setattr__(self, "_it_coeffs", tuple(it_int))
        object.__setattr__(self, "_il_bcoeffs", tuple(b))
        object.__setattr__(self, "_f_band_end", float(self._band_value(np.array([eta + w]))[0]))

    # -- band helpers (t in [0, 1], u = (s - eta + L)/L) --

    def _band_value(self, s):
        t = (s - self.eta) / self._w
        u = (s - self.eta + self._L) / self._L
        it = self._w * npoly.polyval(t, self._it_coeffs)
        p = self.p_exponent
        il = np.zeros_like(u)
        for j, bj in enumerate(self._il_bcoeffs):
            if bj != 0.0:
                il += bj * (u ** (j + p) - 1.0) / (j + p)
        il *= self._ct * self._L
        return self._r0 + it + il

    def _band_slope(self, s):
        t = (s - self.eta) / self._w
        u = (s - self.eta + self._L) / self._L
        S = npoly.polyval(t, _SSTEP)
        gT = self._r1 + self._r2 * (s - self.eta)
        gL = self._ct * u ** (self.p_exponent - 1.0)
        return S * gT + (1.0 - S) * gL

    def _band_curv(self, s):
        t = (s - self.eta) / self._w
        u = (s - self.eta + self._L) / self._L
        S = npoly.polyval(t, _SSTEP)
        dS = npoly.polyval(t, _SSTEP_D) / self._w
        gT = self._r1 + self._r2 * (s - self.eta)
        gL = self._ct * u ** (self.p_exponent - 1.0)
        dgL = self._ct * (self.p_exponent - 1.0) / self._L * u ** (self.p_exponent - 2.0)
        return dS * (gT - gL) + S * self._r2 + (1.0 - S) * dgL

    def _tail_value(self, s):
        u = (s - self.eta + self._L) / self._L
        uw = 1.0 + self._w / self._L
        p = self.p_exponent
        return self._f_band_end + self._ct * self._L / p * (u**p - uw**p)

    def _piecewise(self, s, below, band, tail):
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        out = np.empty_like(s)
        m0 = s <= self.eta
        m1 = (s > self.eta) & (s <= self.eta + self._w)
        m2 = s > self.eta + self._w
        if m0.any():
            out[m0] = below(s[m0])
        if m1.any():
            out[m1] = band(s[m1])
        if m2.any():
            out[m2] = tail(s[m2])
        return out[0] if scalar else out

    def r(self, s):
        return self._piecewise(s, self.base.r, self._band_value, self._tail_value)

    def dr(self, s):
        return self._piecewise(
            s,
            self.base.dr,
            self._band_slope,
            lambda x: self._ct * ((x - self.eta + self._L) / self._L) ** (self.p_exponent - 1.0),
        )

    def d2r(self, s):
        return self._piecewise(
            s,
            self.base.d2r,
            self._band_curv,
            lambda x: self._ct
            * (self.p_exponent - 1.0)
            / self._L
            * ((x - self.eta + self._L) / self._L) ** (self.p_exponent - 2.0),
        )

    def dr_over_s(self, s):
        return self._piecewise(
            s,
            self.base.dr_over_s,
            lambda x: self._band_slope(x) / x,
            lambda x: self._ct
            * ((x - self.eta + self._L) / self._L) ** (self.p_exponent - 1.0)
            / x,
        )

    def describe(self) -> dict:
        return {
            "kind": "truncated",
            "base": self.base.describe(),
            "eta": self.eta,
            "band_width": self._w,
        }


# ---------------------------------------------------------------------------
# Model


@dataclass(frozen=True)
class NonlinearityModel:
    """Potential data: F(s) = (1/2) omega^2 s^2 + R(s) in spatial dimension N.

    p_exponent and q_exponent declare the (H3) growth window; they must
    satisfy 2 < p <= q < 2N/(N-2).  s_eval_max, when set, bounds the
    amplitudes the model promises to evaluate.
    """

    omega: float
    dimension: int
    r_spec: object
    p_exponent: float
    q_exponent: float
    s_eval_max: float | None = None

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        n = self.dimension
        if int(n) != n or n < 3:
            raise ValueError("dimension must be an integer >= 3")
        object.__setattr__(self, "dimension", int(n))
        crit = 2.0 * n / (n - 2.0)
        p, q = float(self.p_exponent), float(self.q_exponent)
        if not (2.0 < p <= q < crit):
            raise ValueError(
                f"growth exponents must satisfy 2 < p <= q < {crit:.6g}, got p={p}, q={q}"
            )

    # -- pointwise accessors (vectorized, s >= 0) --

    def _check(self, s):
        a = _as_array(s)
        if self.s_eval_max is not None and np.any(a > self.s_eval_max):
            raise ModelRangeError(
                f"amplitude beyond declared range s <= {self.s_eval_max:.6g}"
            )
        return a

    def r(self, s):
        return self.r_spec.r(self._check(s))

    def dr(self, s):
        return self.r_spec.dr(self._check(s))

    def d2r(self, s):
        return self.r_spec.d2r(self._check(s))

    def f(self, s):
        a = self._check(s)
        return 0.5 * self.omega**2 * a**2 + self.r_spec.r(a)

    def df(self, s):
        a = self._check(s)
        return self.omega**2 * a + self.r_spec.dr(a)

    def df_over_s(self, s):
        """F'(s)/s with the removable singularity filled: -> omega^2 at 0."""
        a = self._check(s)
        return self.omega**2 + self.r_spec.dr_over_s(a)

    def describe(self) -> dict:
        return {
            "omega": self.omega,
            "dimension": self.dimension,
            "p_exponent": self.p_exponent,
            "q_exponent": self.q_exponent,
            "r": self.r_spec.describe(),
        }


class Evaluation(NamedTuple):
    r: np.ndarray
    dr: np.ndarray
    d2r: np.ndarray
    f: np.ndarray
    df: np.ndarray


def evaluate(model: NonlinearityModel, s) -> Evaluation:
    """Evaluate (R, R', R'', F, F') at amplitudes s >= 0 (vectorized)."""
    a = model._check(s)
    r = model.r_spec.r(a)
    dr = model.r_spec.dr(a)
    d2r = model.r_spec.d2r(a)
    f = 0.5 * model.omega**2 * a**2 + r
    df = model.omega**2 * a + dr
    return Evaluation(r, dr, d2r, f, df)


# ---------------------------------------------------------------------------
# Condition checker


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of the structural checks with witnesses.

    nc_status and zc_status are one of "holds" / "fails" /
    "undetermined"; the booleans cover (H0) through (H3).  Witnesses
    record where each verdict was decided so failures are actionable.
    """

    h0_ok: bool
    h0_values: tuple
    h1_ok: bool
    h1_witness_s: float
    h1_margin: float
    h2_ok: bool
    h2_witness_s: float | None
    h2_value: float
    h3_ok: bool
    h3_c1: float
    h3_c2: float
    h3_witness_s: float
    nc_status: str
    nc_exponent: float | None
    nc_epsilon: float | None
    nc_alpha: float | None
    nc_fit_residual: float | None
    zc_status: str
    zc_witness_s: float | None
    zc_f_min_ratio: float
    coercivity_c1: float | None
    coercivity_delta: float | None
    s_scan_max: float

    @property
    def hypotheses_ok(self) -> bool:
        return self.h0_ok and self.h1_ok and self.h2_ok and self.h3_ok


def check_conditions(
    model: NonlinearityModel,
    s_scan_max: float = 8.0,
    samples: int = 4000,
) -> ConditionReport:
    """Check (H0)-(H3), (NC), (ZC) by dense scans plus local refinement.

    The (NC) verdict fits the exponent of log|R| against log s on a
    geometric grid near zero and compares it with 2 + 4/N; a sloppy fit
    (max residual above 0.15 decades, or a slope within 0.05 of the
    critical value) returns "undetermined" rather than guessing.  (ZC)
    is decided on F(s)/s^2, whose infimum over s > 0 is zero exactly
    when F has a positive root.
    """
    om2 = model.omega**2
    n = model.dimension
    xs = np.linspace(0.0, s_scan_max, samples + 1)[1:]
    gs = np.geomspace(1e-8 * s_scan_max, s_scan_max, samples // 2)
    allpts = np.concatenate([xs, gs])
    rv = model.r(allpts)

    # (H0): direct evaluation at zero
    r0 = float(model.r(0.0))
    dr0 = float(model.dr(0.0))
    d2r0 = float(model.d2r(0.0))
    tol0 = 1e-12 * max(1.0, om2)
    h0_ok = abs(r0) <= tol0 and abs(dr0) <= tol0 and abs(d2r0) <= tol0

    # (H1): min of (R + om2 s^2/2)/s^2 over the scan
    h1_ratio = (rv + 0.5 * om2 * allpts**2) / allpts**2
    i1 = int(np.argmin(h1_ratio))
    h1_margin = float(h1_ratio[i1])
    h1_ok = h1_margin >= -1e-9 * om2

    # (H2): any strictly negative value
    i2 = int(np.argmin(rv))
    h2_value = float(rv[i2])
    scale_r = float(np.max(np.abs(rv))) or 1.0
    h2_ok = h2_value < -1e-12 * scale_r
    h2_witness = float(allpts[i2]) if h2_ok else None

    # (H3): boundedness of |R''| / (s^(p-2) + s^(q-2)); blow-up at either
    # end of the scan flags a violation of the declared exponents
    hs = np.geomspace(1e-6 * s_scan_max, s_scan_max, 400)
    ratio3 = np.abs(model.d2r(hs)) / (hs ** (model.p_exponent - 2.0) + hs ** (model.q_exponent - 2.0))
    med = float(np.median(ratio3)) or 1.0
    c_fit = float(np.max(ratio3))
    i3 = int(np.argmax(ratio3))
    dec = len(hs) // 6
    low_blowup = float(np.max(ratio3[:dec])) > 20.0 * med and ratio3[0] > 2.0 * ratio3[dec]
    tail = ratio3[-dec:]
    high_blowup = float(tail[-1]) > 20.0 * med and bool(np.all(np.diff(tail) > 0))
    h3_ok = not (low_blowup or high_blowup)

    # (NC)
    nc_status, nc_exp, nc_eps, nc_alpha, nc_res = _check_nc(model, s_scan_max)

    # (ZC) on F/s^2
    fr = (0.5 * om2 * allpts**2 + rv) / allpts**2
    order = np.argsort(allpts)
    s_sorted, fr_sorted = allpts[order], fr[order]
    iz = int(np.argmin(fr_sorted))
    lo = s_sorted[max(iz - 1, 0)]
    hi = s_sorted[min(iz + 1, len(s_sorted) - 1)]
    if hi > lo:
        res = minimize_scalar(
            lambda s: float(model.f(s) / s**2), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-12},
        )
        z_s, z_val = float(res.x), float(res.fun)
        if z_val > fr_sorted[iz]:
            z_s, z_val = float(s_sorted[iz]), float(fr_sorted[iz])
    else:
        z_s, z_val = float(s_sorted[iz]), float(fr_sorted[iz])
    zc_holds = z_val <= 1e-9 * om2
    zc_status = "holds" if zc_holds else "fails"
    zc_witness = z_s if zc_holds else None

    # near-zero coercivity F >= c1 s^2 on (0, delta]
    delta = 0.5 * z_s if zc_holds else 0.5 * s_scan_max
    mask = (s_sorted > 0) & (s_sorted <= delta)
    if mask.any():
        c1 = float(np.min(fr_sorted[mask]))
        coer_c1, coer_delta = (c1, delta) if c1 > 0 else (None, None)
    else:
        coer_c1, coer_delta = None, None

    return ConditionReport(
        h0_ok=h0_ok,
        h0_values=(r0, dr0, d2r0),
        h1_ok=h1_ok,
        h1_witness_s=float(allpts[i1]),
        h1_margin=h1_margin,
        h2_ok=h2_ok,
        h2_witness_s=h2_witness,
        h2_value=h2_value,
        h3_ok=h3_ok,
        h3_c1=c_fit,
        h3_c2=c_fit,
        h3_witness_s=float(hs[i3]),
        nc_status=nc_status,
        nc_exponent=nc_exp,
        nc_epsilon=nc_eps,
        nc_alpha=nc_alpha,
        nc_fit_residual=nc_res,
        zc_status=zc_status,
        zc_witness_s=zc_witness,
        zc_f_min_ratio=z_val,
        coercivity_c1=coer_c1,
        coercivity_delta=coer_delta,
        s_scan_max=s_scan_max,
    )


def _check_nc(model, s_scan_max):
    """Fit the near-zero exponent of |R| and compare with 2 + 4/N."""
    crit = 2.0 + 4.0 / model.dimension
    probe = np.geomspace(1e-8 * s_scan_max, 0.05 * s_scan_max, 200)
    rv = model.r(probe)
    if rv[0] >= 0.0:
        # no negativity at the bottom of the scan: (NC) needs R < 0 on (0, alpha)
        return "fails", None, None, None, None
    neg = rv < 0.0
    stop = int(np.argmax(~neg)) if (~neg).any() else len(probe)
    alpha = float(probe[stop - 1])
    hi = alpha / 2.0
    fit_s = np.geomspace(max(1e-8 * s_scan_max, 1e-4 * hi), hi, 80)
    fit_r = np.abs(model.r(fit_s))
    if np.any(fit_r <= 0.0):
        return "fails", None, None, alpha, None
    slope, intercept = np.polyfit(np.log(fit_s), np.log(fit_r), 1)
    resid = float(np.max(np.abs(np.log(fit_r) - (slope * np.log(fit_s) + intercept))))
    resid /= math.log(10.0)  # decades
    if resid > 0.15:
        return "undetermined", float(slope), None, alpha, resid
    if abs(slope - crit) < 0.05:
        return "undetermined", float(slope), None, alpha, resid
    if slope < crit:
        eps = float(slope) - 2.0
        if eps <= 0:
            return "undetermined", float(slope), None, alpha, resid
        return "holds", float(slope), eps, alpha, resid
    return "fails", float(slope), None, alpha, resid


# ---------------------------------------------------------------------------
# Negative set decomposition


@dataclass(frozen=True)
class NegativeSetDecomposition:
    """Maximal open intervals (xi_i, eta_i) where R < 0, left to right.

    eta of the last interval may be math.inf when R is still negative
    at the end of the scan.  count == 0 means R >= 0 on the whole scan.
    """

    intervals: tuple
    s_scan_max: float
    root_tol: float

    @property
    def count(self) -> int:
        return len(self.intervals)


def _bisect_boundary(fn, lo, hi, want_negative_left, tol):
    """Boundary of {R < 0} inside [lo, hi] by predicate bisection.

    want_negative_left = True finds sup{s: R < 0} given R(lo) < 0 <= R(hi);
    False finds inf{s: R < 0} given R(lo) >= 0 > R(hi).
    """
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if (fn(mid) < 0.0) == want_negative_left:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def decompose_negative_set(
    model: NonlinearityModel,
    s_scan_max: float = 8.0,
    root_tol: float = 1e-10,
    samples: int = 4096,
    max_intervals: int = 64,
) -> NegativeSetDecomposition:
    """Scan R on a dense grid and refine interval endpoints by bisection.

    Endpoints are resolved to root_tol.  Sub-resolution structure
    (wells narrower than the scan step) is invisible by design; raise
    the sample count for pathological models.
    """
    xs = np.linspace(0.0, s_scan_max, samples + 1)[1:]
    rv = model.r(xs)
    neg = rv < 0.0
    fn = lambda s: float(model.r(s))

    intervals = []
    i = 0
    while i < len(xs):
        if not neg[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(xs) and neg[j + 1]:
            j += 1
        # left endpoint
        if i == 0:
            # negative at the first sample: decide between xi = 0 and a root
            deep = np.geomspace(1e-12 * s_scan_max, xs[0], 64)
            dv = model.r(deep)
            if np.all(dv < 0.0):
                xi = 0.0
            else:
                k = int(np.nonzero(dv >= 0.0)[0][-1])
                xi = _bisect_boundary(fn, deep[k], xs[0], False, root_tol)
        else:
            xi = _bisect_boundary(fn, xs[i - 1], xs[i], False, root_tol)
        # right endpoint
        if j == len(xs) - 1:
            eta = math.inf
        else:
            eta = _bisect_boundary(fn, xs[j], xs[j + 1], True, root_tol)
        intervals.append((float(xi), float(eta)))
        if len(intervals) > max_intervals:
            raise DecompositionError(
                f"more than {max_intervals} negativity intervals in [0, {s_scan_max}]"
            )
        i = j + 1

    return NegativeSetDecomposition(
        intervals=tuple(intervals), s_scan_max=s_scan_max, root_tol=root_tol
    )


def truncate_model(
    model: NonlinearityModel,
    cut_index: int,
    decomposition: NegativeSetDecomposition | None = None,
    band_width: float = 0.0,
    s_scan_max: float = 8.0,
) -> NonlinearityModel:
    """Replace R above eta_{cut_index} with a monotone C^2 continuation.

    The returned model agrees with the original on [0, eta_i] and has
    R' >= 0 beyond, so any solution of its static equation with
    frequency inside the mass gap obeys the amplitude bound
    ||u||_inf <= eta_i.  Wells models take a fast path: dropping the
    wells above the cut is already the exact truncation.
    """
    dec = decomposition or decompose_negative_set(model, s_scan_max=s_scan_max)
    if not 1 <= cut_index <= dec.count:
        raise ValueError(f"cut_index must be in 1..{dec.count}")
    eta = dec.intervals[cut_index - 1][1]
    if not math.isfinite(eta):
        raise ConstructionError("cannot truncate at an unbounded negativity interval")

    spec = model.r_spec
    if isinstance(spec, WellsR) and cut_index <= len(spec.centers):
        keep = [i for i, c in enumerate(spec.centers) if c - spec.widths[i] < eta]
        new_spec: object = WellsR(
            centers=tuple(spec.centers[i] for i in keep),
            widths=tuple(spec.widths[i] for i in keep),
            depths=tuple(spec.depths[i] for i in keep),
        )
    else:
        new_spec = TruncatedR(
            base=spec, eta=float(eta), p_exponent=model.p_exponent, band_width=band_width
        )
        # sanity: slope stays nonnegative across the band
        probe = np.linspace(eta, eta + new_spec._w, 257)
        if np.min(new_spec.dr(probe)) < -1e-12:
            raise ConstructionError("continuation slope went negative on the band")

    return NonlinearityModel(
        omega=model.omega,
        dimension=model.dimension,
        r_spec=new_spec,
        p_exponent=model.p_exponent,
        q_exponent=model.q_exponent,
        s_eval_max=model.s_eval_max,
    )


# ---------------------------------------------------------------------------
# Model files


def parse_model_text(text: str, origin: str = "<string>") -> NonlinearityModel:
    """Parse the sectioned key = value model format.

    Required: [model] with kind, omega, dimension, p_exponent,
    q_exponent, plus a [polynomial] or [wells] section matching the
    kind.  kind = truncated wraps a base section and needs [truncated]
    with cut_index (and optionally band_width, s_scan_max).
    """
    cp = ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=origin)
    except Exception as exc:
        raise ConfigError(f"{origin}: {exc}") from exc
    if not cp.has_section("model"):
        raise ConfigError(f"{origin}: missing [model] section")
    m = cp["model"]
    try:
        kind = m.get("kind", "").strip()
        omega = m.getfloat("omega")
        dimension = m.getint("dimension", 3)
        p = m.getfloat("p_exponent")
        q = m.getfloat("q_exponent")
        s_max = m.getfloat("s_eval_max", fallback=None)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{origin}: bad [model] values: {exc}") from exc
    if omega is None or p is None or q is None:
        raise ConfigError(f"{origin}: [model] needs omega, p_exponent, q_exponent")

    def floats(section, key):
        raw = cp.get(section, key, fallback=None)
        if raw is None:
            raise ConfigError(f"{origin}: [{section}] needs {key}")
        try:
            return tuple(float(tok) for tok in raw.replace(",", " ").split())
        except ValueError as exc:
            raise ConfigError(f"{origin}: [{section}] {key}: {exc}") from exc

    def base_spec(base_kind):
        if base_kind == "polynomial":
            return PolynomialR(coefficients=floats("polynomial", "coefficients"))
        if base_kind == "wells":
            return WellsR(
                centers=floats("wells", "centers"),
                widths=floats("wells", "widths"),
                depths=floats("wells", "depths"),
            )
        raise ConfigError(f"{origin}: unknown model kind '{base_kind}'")

    try:
        if kind in ("polynomial", "wells"):
            spec = base_spec(kind)
            model = NonlinearityModel(
                omega=omega, dimension=dimension, r_spec=spec,
                p_exponent=p, q_exponent=q, s_eval_max=s_max,
            )
        elif kind == "truncated":
            if not cp.has_section("truncated"):
                raise ConfigError(f"{origin}: kind = truncated needs a [truncated] section")
            t = cp["truncated"]
            base = NonlinearityModel(
                omega=omega, dimension=dimension,
                r_spec=base_spec(t.get("base_kind", "").strip()),
                p_exponent=p, q_exponent=q, s_eval_max=s_max,
            )
            model = truncate_model(
                base,
                cut_index=t.getint("cut_index"),
                band_width=t.getfloat("band_width", 0.0),
                s_scan_max=t.getfloat("s_scan_max", 8.0),
            )
        else:
            raise ConfigError(f"{origin}: unknown model kind '{kind}'")
    except (ValueError, ConstructionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{origin}: {exc}") from exc
    return model


def load_model_file(path) -> NonlinearityModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model_text(fh.read(), origin=str(path))


def model_to_text(model: NonlinearityModel) -> str:
    """Serialize a model back to the file format (polynomial/wells only)."""
    d = model.describe()
    lines = [
        "[model]",
        f"kind = {d['r']['kind']}",
        f"omega = {model.omega!r}",
        f"dimension = {model.dimension}",
        f"p_exponent = {model.p_exponent!r}",
        f"q_exponent = {model.q_exponent!r}",
    ]
    if model.s_eval_max is not None:
        lines.append(f"s_eval_max = {model.s_eval_max!r}")
    spec = d["r"]
    if spec["kind"] == "polynomial":
        lines += ["", "[polynomial]", "coefficients = " + " ".join(repr(c) for c in spec["coefficients"])]
    elif spec["kind"] == "wells":
        lines += [
            "",
            "[wells]",
            "centers = " + " ".join(repr(c) for c in spec["centers"]),
            "widths = " + " ".join(repr(c) for c in spec["widths"]),
            "depths = " + " ".join(repr(c) for c in spec["depths"]),
        ]
    else:
        raise ValueError("only polynomial and wells models serialize to files")
    return "\n".join(lines) + "\n"


def model_hash(model: NonlinearityModel) -> str:
    """Stable 12-hex digest of the model parameters."""
    blob = json.dumps(model.describe(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
