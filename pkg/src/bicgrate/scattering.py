"""Driven problem: a unit plane wave incident on the double array.

The two cylinders of one period sit at (0, -h) (the "left" or lower one) and
(a, h) (the "right" or upper one).  In the thin-cylinder limit each acts as a
line source whose strength is fixed by the self-consistent field on its axis,
which leads to a 2x2 linear system with the lattice sums as coefficients.
"""
from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np
from scipy.optimize import brentq

from .bound_states import (
    _edge_grid, dpsi_pm_I, find_continuum_I, psi_pm_I,
)
from .channels import TWO_PI, BlochPoint, open_channels
from .errors import NoRoot, SingularSystem
from .lattice_sums import DEFAULT_TOL, ArrayConfig, delta0, exp_window, lattice_sums

DET_GUARD = 1e-8


class Direction(Enum):
    FROM_BELOW = "below"
    FROM_ABOVE = "above"


class Family(Enum):
    PSI_PLUS = "plus"
    PSI_MINUS = "minus"


@dataclass
class ScatteringSolution:
    cfg: ArrayConfig
    pt: BlochPoint
    direction: Direction
    e_left: complex
    e_right: complex
    refl: dict = field(default_factory=dict)
    trans: dict = field(default_factory=dict)
    flux_error: float = 0.0
    window: int = 0

    def incident(self, x, z):
        kz = math.sqrt(self.pt.k ** 2 - self.pt.kx ** 2)
        s = 1 if self.direction is Direction.FROM_BELOW else -1
        return np.exp(1j * (self.pt.kx * x + s * kz * z))


@dataclass(frozen=True)
class Resonance:
    h: float
    k_r: float
    gamma: float
    family: Family
    gamma_fd: float = math.nan


def _modal_amplitudes(pt, cfg, e_left, e_right, ms):
    """R_m and T_m for a field scattered from below (incident along +z)."""
    h, a = cfg.h, cfg.a
    d0 = delta0(pt.k, cfg)
    out_r, out_t = {}, {}
    for m in ms:
        kxm = pt.kx + TWO_PI * m
        kzm = math.sqrt(pt.k ** 2 - kxm ** 2)
        pre = 2j * math.pi * d0 / kzm
        ph = np.exp(-1j * a * kxm)
        out_r[m] = complex(pre * (e_right * ph * np.exp(1j * h * kzm)
                                  + e_left * np.exp(-1j * h * kzm)))
        out_t[m] = complex(pre * (e_right * ph * np.exp(-1j * h * kzm)
                                  + e_left * np.exp(1j * h * kzm)))
    return out_r, out_t


def flux_balance(pt, refl, trans):
    """sum_open (k_z,m / k_z,0)(|R_m|^2 + |delta_m0 + T_m|^2) - 1."""
    kz0 = math.sqrt(pt.k ** 2 - pt.kx ** 2)
    terms = []
    for m in refl:
        kzm = math.sqrt(pt.k ** 2 - (pt.kx + TWO_PI * m) ** 2)
        t = trans[m] + (1.0 if m == 0 else 0.0)
        terms.append(kzm / kz0 * (abs(refl[m]) ** 2 + abs(t) ** 2))
    return math.fsum(terms) - 1.0


def _solve_below(cfg, pt, tol):
    h = cfg.require_h()
    ms = open_channels(pt)
    if 0 not in ms:
        raise ValueError("the zero-order channel must be open")
    d0 = delta0(pt.k, cfg)
    kz = math.sqrt(pt.k ** 2 - pt.kx ** 2)
    inc_right = np.exp(1j * (cfg.a * pt.kx + h * kz))
    inc_left = np.exp(-1j * h * kz)
    if d0 == 0:
        refl = {m: 0j for m in ms}
        return complex(inc_left), complex(inc_right), refl, dict(refl), 0
    s = lattice_sums(pt, cfg, tol)
    mat = np.array([[s.phi0, s.phi_plus], [s.phi_minus, s.phi0]])
    det = s.phi0 ** 2 - s.phi_plus * s.phi_minus
    if abs(det) < DET_GUARD * np.sum(np.abs(mat) ** 2):
        raise SingularSystem("|det| = %.3g: (h, k) is at a bound state" % abs(det))
    rhs = 1j / (TWO_PI * d0) * np.array([inc_right, inc_left])
    e_right, e_left = np.linalg.solve(mat, rhs)
    refl, trans = _modal_amplitudes(pt, cfg, e_left, e_right, ms)
    M, _ = exp_window(pt.k, pt.kx, 2 * h, tol)
    return complex(e_left), complex(e_right), refl, trans, M


def solve(cfg, pt, direction=Direction.FROM_BELOW, tol=DEFAULT_TOL):
    """Cylinder fields and all open-channel amplitudes.

    Incidence from above is reduced to incidence from below: the map
    r -> (a, 0) - r sends the array onto itself and the downward wave at kx
    onto an upward wave at -kx.
    """
    if direction is Direction.FROM_BELOW:
        el, er, refl, trans, M = _solve_below(cfg, pt, tol)
    else:
        mirrored = BlochPoint(pt.k, -pt.kx)
        gl, gr, rr, tt, M = _solve_below(cfg, mirrored, tol)
        ph = np.exp(1j * pt.kx * cfg.a)
        el, er = complex(ph * gr), complex(ph * gl)
        refl = {-m: complex(v * np.exp(2j * math.pi * m * cfg.a)) for m, v in rr.items()}
        trans = {-m: complex(v * np.exp(2j * math.pi * m * cfg.a)) for m, v in tt.items()}
    refl = dict(sorted(refl.items()))
    trans = dict(sorted(trans.items()))
    return ScatteringSolution(cfg, pt, direction, el, er, refl, trans,
                              flux_balance(pt, refl, trans), M)


def specular(cfg, pt, tol=DEFAULT_TOL):
    """|R_0|^2."""
    return abs(solve(cfg, pt, tol=tol).refl[0]) ** 2


# --------------------------------------------------------------------------
# closed forms for a = 0 and one open channel

def closed_form(cfg, pt, tol=DEFAULT_TOL):
    """(R_0, E_top, E_bottom) from the even/odd decomposition at a = 0.

    Each of the two parts sees only one of psi_+-, so R_0 splits as
    -c^2/(c^2 + i k_z psi_+/2) + s^2/(s^2 + i k_z psi_-/2), c = cos(h k_z).
    The cylinder fields use the same source normalization as ``solve``
    (scattered amplitude 2 pi i delta0 E / k_z per line source).
    """
    if cfg.a != 0:
        raise ValueError("closed form requires a = 0")
    h = cfg.require_h()
    kz = math.sqrt(pt.k ** 2 - pt.kx ** 2)
    pp, pm = psi_pm_I(cfg, pt, tol)
    c, s = math.cos(h * kz), math.sin(h * kz)
    den_p = c * c + 0.5j * kz * pp
    den_m = s * s + 0.5j * kz * pm
    r0 = -c * c / den_p + s * s / den_m
    pre = 1j * kz / (4 * math.pi * delta0(pt.k, cfg))
    e_top = pre * (c / den_p + 1j * s / den_m)
    e_bottom = pre * (c / den_p - 1j * s / den_m)
    return complex(r0), complex(e_top), complex(e_bottom)


@dataclass(frozen=True)
class BicLinearization:
    """Local data at a bound state of the psi_+ family (a = 0, n odd)."""
    n: int
    h: float
    k: float
    kx: float
    kz: float
    dk_plus: float
    dh_plus: float
    psi_minus: float
    delta0: float

    @property
    def half(self):
        return (self.n + 1) // 2

    def xi(self, dh, dk):
        return (-1) ** self.half * (self.h * self.k / self.kz * dk + self.kz * dh)

    def eta(self, dh, dk):
        return 0.5 * self.kz * (self.dk_plus * dk + self.dh_plus * dh)

    def background(self):
        """Smooth part 1/(1 + i k_z psi_-/2) of R_0 at the bound state."""
        return 1.0 / (1.0 + 0.5j * self.kz * self.psi_minus)

    def r0_principal(self, dh, dk):
        x, e = self.xi(dh, dk), self.eta(dh, dk)
        return complex(self.background() - x * x / (x * x + 1j * e))

    def field_principal(self, dh, dk, sign=+1):
        x, e = self.xi(dh, dk), self.eta(dh, dk)
        pre = 1j * self.kz / (4 * math.pi * self.delta0)
        s = (-1) ** (self.half + 1)
        return complex(pre * (sign * 1j * s * self.background() + x / (x * x + 1j * e)))

    def amplification_constant(self):
        """Limit of E_top * dh along psi_+ = 0."""
        slope = 1 - self.h * self.k / self.kz ** 2 * self.dh_plus / self.dk_plus
        return complex((-1) ** self.half * 1j / (4 * math.pi * self.delta0 * slope))


def linearize_bic(cfg_base, kx, n, tol=DEFAULT_TOL):
    """Bound state of index n (odd) in one open channel at a = 0, with the
    partial derivatives of psi_+ needed for its neighbourhood."""
    if n % 2 == 0:
        raise ValueError("the psi_+ family has odd n")
    cb = ArrayConfig(cfg_base.R, cfg_base.eps_c, 0.0)
    recs = [r for r in find_continuum_I(cb, 0.0, kx, n, tol) if r.indices == (n,)]
    if not recs:
        raise NoRoot("no bound state with n=%d" % n)
    r = recs[0]
    cfg = ArrayConfig(cb.R, cb.eps_c, 0.0, r.h)
    pt = BlochPoint(r.k, kx)
    (dk, dh), _ = dpsi_pm_I(cfg, pt, tol)
    _, pm = psi_pm_I(cfg, pt, tol)
    kz = math.sqrt(r.k ** 2 - kx ** 2)
    return BicLinearization(n, r.h, r.k, kx, kz, dk, dh, pm, delta0(r.k, cfg))


# --------------------------------------------------------------------------
# resonances

def _psi_family(cfg, kx, family, tol):
    idx = 0 if family is Family.PSI_PLUS else 1

    def f(k):
        return psi_pm_I(cfg, BlochPoint(k, kx), tol)[idx]

    return f


def resonance_at(cfg, kx, family=Family.PSI_PLUS, near=None, bracket=None,
                 tol=DEFAULT_TOL):
    """Resonance position k_r (psi_family(h, k_r) = 0) and half-width.

    Gamma = -2 c^2/(k_z d_k psi) with c = cos(h k_z) for the psi_+ family and
    sin(h k_z) for psi_-.  A centered difference (step 1e-6 k_r) of psi is
    kept alongside as a cross-check.
    """
    h = cfg.require_h()
    f = _psi_family(cfg, kx, family, tol)
    lo, hi = bracket if bracket else (abs(kx), TWO_PI - abs(kx))
    # stay strictly inside the one-channel interval
    edge = 1e-9 * TWO_PI
    lo, hi = max(lo, abs(kx) + edge), min(hi, TWO_PI - abs(kx) - edge)
    pts = _edge_grid(lo, hi, n_uniform=200)
    vals = []
    for p in pts:
        try:
            vals.append(f(p))
        except ArithmeticError:
            vals.append(math.nan)
    roots = []
    for i in range(len(pts) - 1):
        v0, v1 = vals[i], vals[i + 1]
        if math.isfinite(v0) and math.isfinite(v1) and v0 * v1 < 0:
            roots.append(brentq(f, pts[i], pts[i + 1], xtol=1e-15,
                                rtol=4 * np.finfo(float).eps))
    if not roots:
        raise NoRoot("psi_%s(h=%.6g, .) has no root" % (family.value, h))
    k_r = min(roots, key=lambda r: abs(r - near)) if near is not None else roots[-1]
    pt = BlochPoint(k_r, kx)
    kz = math.sqrt(k_r ** 2 - kx ** 2)
    plus, minus = dpsi_pm_I(cfg, pt, tol)
    if family is Family.PSI_PLUS:
        weight, dk = math.cos(h * kz) ** 2, plus[0]
    else:
        weight, dk = math.sin(h * kz) ** 2, minus[0]
    step = 1e-6 * k_r
    dk_fd = (f(k_r + step) - f(k_r - step)) / (2 * step)
    gamma = -2 * weight / (kz * dk)
    gamma_fd = -2 * weight / (kz * dk_fd)
    return Resonance(h, k_r, gamma, family, gamma_fd)


@dataclass(frozen=True)
class AmplificationSample:
    delta_h: float
    k: float
    field_abs: float
    gamma: float
    predicted_abs: float


def amplification_sweep(cfg_base, kx, n, delta_h_list, family=Family.PSI_PLUS,
                        tol=DEFAULT_TOL):
    """|E| on the upper cylinder along psi_+ = 0 as h approaches the n-th
    bound state, with the 1/dh prediction from the local linearization."""
    if family is not Family.PSI_PLUS:
        raise ValueError("amplification is traced along the psi_+ family")
    lin = linearize_bic(cfg_base, kx, n, tol)
    const = abs(lin.amplification_constant())
    out = []
    for dh in delta_h_list:
        if dh == 0:
            raise ValueError("delta_h must be nonzero")
        cfg = ArrayConfig(cfg_base.R, cfg_base.eps_c, 0.0, lin.h + dh)
        # the curve psi_+ = 0 passes through the bound state with finite slope
        guess = lin.k - lin.dh_plus / lin.dk_plus * dh
        width = max(50 * abs(dh) * (1 + abs(lin.dh_plus / lin.dk_plus)), 1e-9)
        lo = max(abs(kx) + 1e-12, guess - width)
        hi = min(TWO_PI - abs(kx) - 1e-12, guess + width)
        res = resonance_at(cfg, kx, family, near=guess, bracket=(lo, hi), tol=tol)
        sol = solve(cfg, BlochPoint(res.k_r, kx), tol=tol)
        out.append(AmplificationSample(dh, res.k_r, abs(sol.e_right), res.gamma,
                                       const / abs(dh)))
    return out


__all__ = [
    "Direction", "Family", "ScatteringSolution", "Resonance", "solve", "specular",
    "flux_balance", "closed_form", "BicLinearization", "linearize_bic",
    "resonance_at", "amplification_sweep", "AmplificationSample",
]
