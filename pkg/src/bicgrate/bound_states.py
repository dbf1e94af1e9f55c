"""Search for bound states below and inside the radiation continuum.

Regions handled here:

* below the continuum (all channels closed): roots of psi_plus / psi_minus;
* one open channel: the families psi_n(k) = 0 with h = n*pi/(2*k_z);
* two open channels: psi_n(k) = 0 with h = n*pi/(2*k_{z,-1}) plus the
  quantization phi_n(kx) = l*pi;
* three or four open channels: integer (diophantine) parametrization.

Every psi_n is strictly decreasing in k, so roots are bracketed on a grid
that is refined geometrically toward the diffraction thresholds and then
polished by plain bisection.
"""
from dataclasses import dataclass, field, asdict
from enum import Enum
import math

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import zeta

from .channels import TWO_PI, BlochPoint, RegionKind, RegionTag, classify, open_channels
from .errors import DegenerateTriple, GateFailed, NoBracket, NoRoot
from .lattice_sums import (
    DEFAULT_TOL, ArrayConfig, _closed_cos_sin, delta0, exp_window, lattice_sums,
    phi_star, regularized_closed_sum_vec, window_for,
)


class Symmetry(Enum):
    SYMMETRIC = "symmetric"
    SKEW = "skew-symmetric"
    UNCLASSIFIED = "unclassified"


@dataclass
class BoundStateRecord:
    region: RegionTag
    kx: float
    k: float
    h: float
    a: float
    residual_delta: float
    symmetry: Symmetry
    indices: tuple | None = None
    approx_k: float | None = None
    family: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["region"] = self.region.label
        d["symmetry"] = self.symmetry.value
        d["indices"] = list(self.indices) if self.indices is not None else None
        return d


@dataclass(frozen=True)
class ExistenceGate:
    holds: bool
    lhs: float
    rhs: float
    bound_kind: str
    precheck: bool | None = None


# --------------------------------------------------------------------------
# root finding helpers

def bisect_decreasing(f, lo, hi, f_lo=None, f_hi=None, xtol=1e-12):
    """Root of a decreasing function with f(lo) > 0 > f(hi).

    Halves until the bracket is below ``xtol`` and then keeps going until the
    midpoint no longer moves, so the result is as tight as floating point
    allows.  Returns (root, f(root)).
    """
    if f_lo is None:
        f_lo = f(lo)
    if f_hi is None:
        f_hi = f(hi)
    if not (f_lo > 0 > f_hi):
        raise NoBracket("no sign change on [%.17g, %.17g]" % (lo, hi))
    best = (lo, f_lo) if abs(f_lo) < abs(f_hi) else (hi, f_hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if abs(fm) < abs(best[1]):
            best = (mid, fm)
        if fm == 0:
            break
        if fm > 0:
            lo = mid
        else:
            hi = mid
    return best


def _edge_grid(lo, hi, n_uniform=24, n_edge=28, depth=12):
    """Interior sample points, dense near both ends (geometric to 10**-depth)."""
    width = hi - lo
    t = list(np.linspace(0, 1, n_uniform + 2)[1:-1])
    e = np.logspace(-depth, -1.3, n_edge)
    t += list(e) + list(1 - e)
    return sorted(lo + width * np.array(t))


def _first_sign_change(f, pts):
    """First consecutive pair (p_i, p_{i+1}) with f > 0 then f <= 0.

    Scans from the left; returns (lo, hi, f_lo, f_hi) or None."""
    prev = None
    for p in pts:
        try:
            v = f(p)
        except ArithmeticError:
            continue
        if not math.isfinite(v):
            continue
        if prev is not None and prev[1] > 0 >= v:
            return prev[0], p, prev[1], v
        prev = (p, v)
    return None


def _symmetry_from_ratio(a, ratio):
    """Classify by E(a, h) = +-exp(i a kx) E(-h) when a is 0 or 1/2."""
    if a not in (0.0, 0.5):
        return Symmetry.UNCLASSIFIED
    return Symmetry.SYMMETRIC if ratio.real > 0 else Symmetry.SKEW


def cylinder_fields(pt, cfg, tol=DEFAULT_TOL):
    """Nontrivial solution (E_plus, E_minus) of the homogeneous system with
    E_minus = 1, taken from the better conditioned of its two rows."""
    s = lattice_sums(pt, cfg, tol)
    if abs(s.phi0) >= abs(s.phi_plus):
        e_plus = -s.phi_plus / s.phi0
    else:
        e_plus = -s.phi0 / s.phi_minus
    return complex(e_plus), 1.0 + 0j


# --------------------------------------------------------------------------
# below the continuum

def psi_pm_below(cfg, pt, tol=DEFAULT_TOL):
    """(psi_plus, psi_minus) = phi_star -+ sqrt(phi_c**2 + phi_s**2)."""
    h = cfg.require_h()
    ps = phi_star(pt, cfg, tol)
    pc, pss = _closed_cos_sin(pt, h, cfg.a, tol)
    rho = math.hypot(pc, pss)
    return ps - rho, ps + rho


def approx_k_plus(cfg, kx):
    """Leading-order root of psi_plus: kx - 8 pi^2 delta0(kx)^2 / kx."""
    d = delta0(kx, cfg)
    return kx - 8 * math.pi ** 2 * d * d / kx


def _below_root(cfg, kx, which, tol):
    idx = 0 if which == "plus" else 1

    def f(k):
        return psi_pm_below(cfg, BlochPoint(k, kx), tol)[idx]

    br = _first_sign_change(f, _edge_grid(0.0, kx))
    if br is None:
        raise NoBracket("psi_%s has no sign change on (0, kx)" % which)
    return bisect_decreasing(f, *br[:2], f_lo=br[2], f_hi=br[3])


def find_below(cfg, kx, tol=DEFAULT_TOL):
    """Bound states with all channels closed at fixed (a, h, kx)."""
    h = cfg.require_h()
    kx = abs(kx)
    if not 0 < kx <= math.pi:
        raise ValueError("kx must lie in (0, pi]")
    out = []
    for which in ("plus", "minus"):
        try:
            k, res = _below_root(cfg, kx, which, tol)
        except NoBracket:
            if which == "plus":
                raise
            continue
        pt = BlochPoint(k, kx)
        s = lattice_sums(pt, cfg, tol)
        delta = s.phi0 ** 2 - s.phi_plus * s.phi_minus
        e_plus, _ = cylinder_fields(pt, cfg, tol)
        ratio = e_plus * np.exp(-1j * cfg.a * kx)
        out.append(BoundStateRecord(
            region=RegionTag(RegionKind.BELOW, 0), kx=kx, k=k, h=h, a=cfg.a,
            residual_delta=abs(delta), symmetry=_symmetry_from_ratio(cfg.a, ratio),
            approx_k=approx_k_plus(cfg, kx) if which == "plus" else None,
            family=which, extra={"psi_residual": abs(res)}))
    return out


# --------------------------------------------------------------------------
# closed forms of psi_n (one and two open channels)

def _psi_n_generic(n, k, kx, a, cfg, region, derivative=False, tol=DEFAULT_TOL):
    """Vectorized psi_n in continuum I (region=1) or II (region=2).

    psi_n = 1/(2 pi delta0) + sum_open 1/(2 pi (|m|+1)) + ln(2 pi R)/pi
            + sum_closed [1/(2 pi (|m|+1)) - (1 - s_m exp(-n pi q_m/kappa))/q_m]
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    kx = np.broadcast_to(np.asarray(kx, dtype=float), k.shape)
    if region == 1:
        kappa2 = k * k - kx * kx
        const = 0.5
    else:
        kappa2 = k * k - (TWO_PI - kx) ** 2
        const = 0.75
    if np.any(kappa2 <= 0):
        raise ValueError("k below the lower threshold of the region")
    kappa = np.sqrt(kappa2)
    M = window_for(float(k.max()), float(np.abs(kx).max()), tol)
    ms = np.arange(-M, M + 1)
    d = (kx[:, None] + TWO_PI * ms[None, :]) ** 2 - k[:, None] ** 2
    closed = d > 0
    q = np.sqrt(np.where(closed, d, 1.0))
    if region == 1:
        sgn = (-1.0) ** n * np.cos(TWO_PI * a * ms)
    else:
        sgn = (-1.0) ** (n + np.rint(2 * a * (ms + 1)).astype(int))
    t = n * math.pi * q / kappa[:, None]
    ex = np.where(closed, sgn[None, :] * np.exp(-t), 0.0)
    coupling = (k * cfg.R) ** 2 * (cfg.eps_c - 1.0)
    if not derivative:
        reg, _ = regularized_closed_sum_vec(k, kx, M)
        val = 2.0 / (math.pi * coupling) + reg + const / math.pi \
            + math.log(TWO_PI * cfg.R) / math.pi + np.sum(ex / q, axis=1)
        return val
    # d/dk, summed as -(k/q^3)(1 - s e^{-t}(1 + n pi (q/kappa + q^3/kappa^3)))
    r = q / kappa[:, None]
    inner = np.where(closed, 1.0 - ex * (1.0 + n * math.pi * (r + r ** 3)), 0.0)
    head = -np.sum(k[:, None] / q ** 3 * inner, axis=1)
    # tail beyond the window: 1/q^3 pairs ~ 2/(2 pi m)^3
    head -= 2 * k / TWO_PI ** 3 * zeta(3, M + 1)
    return -4.0 / (math.pi * coupling * k) + head


def psi_n_I(n, k, kx, a, cfg, tol=DEFAULT_TOL):
    """psi_n for one open channel, k in (kx, 2 pi - kx)."""
    return float(_psi_n_generic(n, k, abs(kx), a, cfg, 1, tol=tol)[0])


def dpsi_n_I_dk(n, k, kx, a, cfg, tol=DEFAULT_TOL):
    return float(_psi_n_generic(n, k, abs(kx), a, cfg, 1, derivative=True, tol=tol)[0])


def psi_n_II(n, k, kx, a, cfg, tol=DEFAULT_TOL):
    """psi_n for two open channels, k in (2 pi - kx, 2 pi + kx)."""
    return float(_psi_n_generic(n, k, abs(kx), a, cfg, 2, tol=tol)[0])


def dpsi_n_II_dk(n, k, kx, a, cfg, tol=DEFAULT_TOL):
    return float(_psi_n_generic(n, k, abs(kx), a, cfg, 2, derivative=True, tol=tol)[0])


def psi_infinity(k, kx, cfg, tol=DEFAULT_TOL):
    """Pointwise n -> infinity limit of psi_n in continuum II."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    kx = np.broadcast_to(np.asarray(abs(kx) if np.isscalar(kx) else np.abs(kx),
                                    dtype=float), k.shape)
    M = window_for(float(k.max()), float(kx.max()), tol)
    reg, _ = regularized_closed_sum_vec(k, kx, M)
    coupling = (k * cfg.R) ** 2 * (cfg.eps_c - 1.0)
    val = 2.0 / (math.pi * coupling) + reg + (0.75 + math.log(TWO_PI * cfg.R)) / math.pi
    return float(val[0]) if val.size == 1 else val


def dpsi_infinity_dkx(k, kx, M=4000):
    """Analytic kx-derivative of psi_infinity (positive on the domain)."""
    m = np.arange(1, M + 1)
    a = TWO_PI * m + kx
    b = TWO_PI * m + TWO_PI - kx
    head = np.sum(a / (a * a - k * k) ** 1.5 - b / (b * b - k * k) ** 1.5)
    return float(head)


# --------------------------------------------------------------------------
# general psi_+- inside the continuum (used by scattering)

def psi_pm_I(cfg, pt, tol=DEFAULT_TOL):
    """psi_+- = phi_star +- (sin(2 h k_z)/k_z - phi_c) with one open channel."""
    h = cfg.require_h()
    kz = math.sqrt(pt.k ** 2 - pt.kx ** 2)
    ps = phi_star(pt, cfg, tol)
    pc, _ = _closed_cos_sin(pt, h, cfg.a, tol)
    w = math.sin(2 * h * kz) / kz - pc
    return ps + w, ps - w


def psi_pm_II(cfg, pt, tol=DEFAULT_TOL):
    """psi_+- = phi_star -+ phi_c with two open channels."""
    h = cfg.require_h()
    ps = phi_star(pt, cfg, tol)
    pc, _ = _closed_cos_sin(pt, h, cfg.a, tol)
    return ps - pc, ps + pc


def dpsi_pm_I(cfg, pt, tol=DEFAULT_TOL):
    """Analytic partial derivatives of psi_+- (one open channel).

    Returns ((dk psi_plus, dh psi_plus), (dk psi_minus, dh psi_minus))."""
    h = cfg.require_h()
    k, kx = pt.k, pt.kx
    kz = math.sqrt(k * k - kx * kx)
    M, _ = exp_window(k, kx, 2 * h, tol)
    Mr = window_for(k, abs(kx), tol)
    ms = np.arange(-max(M, Mr), max(M, Mr) + 1)
    d = (kx + TWO_PI * ms) ** 2 - k * k
    cl = d > 0
    q = np.sqrt(d[cl])
    cosm = np.cos(TWO_PI * cfg.a * ms[cl])
    e = np.exp(-2 * h * q)
    coupling = (k * cfg.R) ** 2 * (cfg.eps_c - 1.0)
    dstar = -4.0 / (math.pi * coupling * k) - np.sum(k / q ** 3) \
        - 2 * k / TWO_PI ** 3 * float(zeta(3, ms[-1] + 1))
    s2, c2 = math.sin(2 * h * kz), math.cos(2 * h * kz)
    dsin_k = (k / kz) * (2 * h * c2 / kz - s2 / kz ** 2)
    dsin_h = 2 * c2
    dpc_k = float(np.sum(e * cosm * (k / q) * (2 * h / q + 1 / q ** 2)))
    dpc_h = float(np.sum(-2 * e * cosm))
    plus = (dstar + dsin_k - dpc_k, dsin_h - dpc_h)
    minus = (dstar - dsin_k + dpc_k, -dsin_h + dpc_h)
    return plus, minus


# --------------------------------------------------------------------------
# root solves for psi_n (vectorized over kx)

def _interval(region, kx):
    if region == 1:
        return kx, TWO_PI - kx
    return TWO_PI - kx, TWO_PI + kx


def solve_psi_n(n, kx, a, cfg, region, tol=DEFAULT_TOL, iters=64):
    """Roots k_n(kx) of psi_n for an array of kx; NaN where none exists."""
    kx = np.atleast_1d(np.asarray(kx, dtype=float))
    lo_edge, hi_edge = _interval(region, kx)
    width = hi_edge - lo_edge
    e = np.logspace(-12, -1.3, 28)
    ts = np.concatenate([e, np.linspace(0.05, 0.95, 37), 1 - e[::-1]])
    vals = np.empty((kx.size, ts.size))
    for j, t in enumerate(ts):
        kk = lo_edge + width * t
        vals[:, j] = _psi_n_generic(n, kk, kx, a, cfg, region, tol=tol)
    lo = np.full(kx.size, np.nan)
    hi = np.full(kx.size, np.nan)
    for i in range(kx.size):
        v = vals[i]
        idx = np.nonzero((v[:-1] > 0) & (v[1:] <= 0))[0]
        if idx.size:
            j = idx[0]
            lo[i] = lo_edge[i] + width[i] * ts[j]
            hi[i] = lo_edge[i] + width[i] * ts[j + 1]
    ok = np.isfinite(lo)
    if not ok.any():
        return lo
    a_lo, a_hi, kk = lo[ok], hi[ok], kx[ok]
    for _ in range(iters):
        mid = 0.5 * (a_lo + a_hi)
        fm = _psi_n_generic(n, mid, kk, a, cfg, region, tol=tol)
        pos = fm > 0
        a_lo = np.where(pos, mid, a_lo)
        a_hi = np.where(pos, a_hi, mid)
    out = np.full(kx.size, np.nan)
    out[ok] = 0.5 * (a_lo + a_hi)
    return out


def _polish(n, kx, a, cfg, region, k0, tol):
    """Scalar bisection to full precision around a vectorized estimate."""
    lo_edge, hi_edge = _interval(region, kx)

    def f(k):
        return float(_psi_n_generic(n, k, kx, a, cfg, region, tol=tol)[0])

    step = max(1e-12, 1e-9 * k0)
    lo, hi = max(lo_edge + 1e-15, k0 - step), min(hi_edge - 1e-15, k0 + step)
    flo, fhi = f(lo), f(hi)
    if not (flo > 0 > fhi):
        return k0, f(k0)
    return bisect_decreasing(f, lo, hi, flo, fhi)


# --------------------------------------------------------------------------
# continuum I

def in_set_L(a, kx):
    return kx == 0 or a in (0.0, 0.5)


def approx_continuum_I(n, kx, a, cfg):
    """Leading-order (k_n, h_n); None when (-1)^n cos(2 pi a) == 1."""
    s = (-1) ** n * math.cos(TWO_PI * a)
    if abs(1 - s) < 1e-12:
        return None
    thr = TWO_PI - kx
    d = delta0(thr, cfg)
    k = math.sqrt(thr ** 2 - 4 * math.pi ** 2 * (1 - s) ** 2 * d * d)
    if abs(s + 1) < 1e-12:
        k_lead = thr - 8 * math.pi ** 2 * d * d / thr
        h_lead = n * math.pi / (4 * math.sqrt(math.pi * (math.pi - kx))) * \
            (1 + 2 * math.pi * d * d / (math.pi - kx))
        return k_lead, h_lead
    return k, n * math.pi / (2 * math.sqrt(k * k - kx * kx))


def find_continuum_I(cfg_base, a, kx, n_max, tol=DEFAULT_TOL, check_gate=True):
    """Bound states with one open channel for n = 1..n_max."""
    kx = abs(kx)
    if not 0 <= kx < math.pi:
        raise ValueError("kx must lie in [0, pi)")
    if not in_set_L(a, kx):
        raise NoRoot("phi_s vanishes only for kx = 0 or a in {0, 1/2}")
    if check_gate and kx > 0:
        gate = existence_gate_I(kx, cfg_base)
        if not gate.holds:
            raise GateFailed("existence inequality violated: %.6g <= %.6g"
                             % (gate.lhs, gate.rhs), gate)
    out = []
    for n in range(1, n_max + 1):
        k0 = solve_psi_n(n, kx, a, cfg_base, 1, tol)[0]
        if not math.isfinite(k0):
            continue
        k, res = _polish(n, kx, a, cfg_base, 1, k0, tol)
        kz = math.sqrt(k * k - kx * kx)
        h = n * math.pi / (2 * kz)
        cfg = ArrayConfig(cfg_base.R, cfg_base.eps_c, a, h)
        pt = BlochPoint(k, kx)
        s = lattice_sums(pt, cfg, tol)
        delta = s.phi0 ** 2 - s.phi_plus * s.phi_minus
        if a in (0.0, 0.5):
            sym = Symmetry.SYMMETRIC if n % 2 == 1 else Symmetry.SKEW
        else:
            sym = Symmetry.UNCLASSIFIED
        approx = approx_continuum_I(n, kx, a, cfg_base)
        out.append(BoundStateRecord(
            region=RegionTag(RegionKind.CONTINUUM, 1), kx=kx, k=k, h=h, a=a,
            residual_delta=abs(delta), symmetry=sym, indices=(n,),
            approx_k=approx[0] if approx else None,
            family="plus" if n % 2 else "minus",
            extra={"psi_residual": abs(res),
                   "approx_h": approx[1] if approx else None,
                   "sin_2hkz": abs(math.sin(2 * h * kz))}))
    if not out:
        raise NoRoot("no psi_n has a root for n <= %d" % n_max)
    return out


# --------------------------------------------------------------------------
# existence gates and their closed-form constants

def _series(f, coeffs, M=2000):
    """sum_{m>=1} f(m) with the tail from the large-m expansion
    sum_j coeffs[j] / m**j."""
    m = np.arange(1, M + 1, dtype=float)
    head = math.fsum(f(m))
    tail = sum(c * float(zeta(j, M + 1)) for j, c in coeffs.items())
    return head + tail


def gate_series_I(kx):
    """sum_m 1/sqrt(4 pi^2 m^2 - 4 pi m kx) + 1/sqrt(... + ...) - 1/(pi m)."""
    p = math.pi

    def f(m):
        return (1 / np.sqrt(4 * p * p * m * m - 4 * p * m * kx)
                + 1 / np.sqrt(4 * p * p * m * m + 4 * p * m * kx) - 1 / (p * m))

    x = kx
    coeffs = {3: 3 * x * x / (8 * p ** 3), 5: 35 * x ** 4 / (128 * p ** 5)}
    return _series(f, coeffs, M=20000)


def existence_gate_I(kx, cfg):
    """Positivity of the psi_n limit at k -> kx+ (one open channel)."""
    if kx == 0:
        return ExistenceGate(True, math.inf, 0.0, "continuum-I", True)
    lhs = 2.0 / (math.pi * cfg.R ** 2 * (cfg.eps_c - 1) * kx * kx)
    rhs = gate_series_I(kx) + (0.5 - math.log(TWO_PI * cfg.R)) / math.pi
    pre = cfg.R * math.sqrt(cfg.eps_c - 1) < \
        GATE_C_I * (math.pi - kx) ** 0.25 / (kx * kx)
    return ExistenceGate(lhs > rhs, lhs, rhs, "continuum-I", pre)


def s_constant():
    """sum_m 1/sqrt(m(m+1)) - (1/(m+1) + 1/(m+2))/2."""
    coeffs = {2: 1.0, 3: -17 / 8, 4: 67 / 16, 5: -1053 / 128, 6: 4161 / 256,
              7: -33049 / 1024}
    return _series(lambda m: 1 / np.sqrt(m * (m + 1)) - 0.5 * (1 / (m + 1) + 1 / (m + 2)),
                   coeffs)


def gate_series_II(kx):
    p = math.pi
    b = (TWO_PI - kx) ** 2

    def f(m):
        return (1 / np.sqrt((TWO_PI * m + kx) ** 2 - b)
                + 1 / np.sqrt((TWO_PI * (m + 1) - kx) ** 2 - b)
                - 1 / (p * np.sqrt(m * (m + 1))))

    x = kx
    coeffs = {
        3: 5 / (8 * p) - x / p ** 2 + 3 * x * x / (8 * p ** 3),
        4: -15 / (16 * p) + 3 * x / (2 * p ** 2) - 9 * x * x / (16 * p ** 3),
        5: (269 / (128 * p) - 19 * x / (4 * p ** 2) + 63 * x * x / (16 * p ** 3)
            - 25 * x ** 3 / (16 * p ** 4) + 35 * x ** 4 / (128 * p ** 5)),
    }
    return _series(f, coeffs, M=20000)


def existence_gate_II(kx, cfg):
    """Positivity of the psi_n limit at k -> (2 pi - kx)+ (two open channels)."""
    if not 0 < kx <= math.pi:
        raise ValueError("kx must lie in (0, pi]")
    lhs = 2.0 / (math.pi * cfg.R ** 2 * (cfg.eps_c - 1) * (TWO_PI - kx) ** 2)
    rhs = gate_series_II(kx) + (S_CONST - 0.75 - math.log(TWO_PI * cfg.R)) / math.pi
    if kx >= math.pi:
        pre = True
    else:
        pre = cfg.R * math.sqrt(cfg.eps_c - 1) < \
            GATE_C_II * kx ** 0.25 / math.sqrt(math.pi - kx)
    return ExistenceGate(lhs > rhs, lhs, rhs, "continuum-II", pre)


def _min_on_unit(g):
    """Minimum of g on [0, 1]: dense scan, then bounded refinement."""
    t = np.linspace(0, 1, 2001)
    v = np.array([g(x) for x in t])
    i = int(np.argmin(v))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, t.size - 1)]
    res = minimize_scalar(g, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return min(float(res.fun), float(v[i]), g(0.0), g(1.0))


def gate_constant_I():
    def g(t):
        a, b = math.sqrt(1 + t), math.sqrt(1 - t)
        return (1 + a + b) / (a * (1 + math.sqrt(1 - t * t)) * (2 + a + b))
    return math.pi ** 0.75 * math.sqrt(2) * _min_on_unit(g) ** -0.5


def gate_constant_II():
    def g(t):
        r = math.sqrt(3 - t)
        return (2 - t) ** 2 / r * (r / (1 + math.sqrt(t)) - math.sqrt(t) / (math.sqrt(2) + r))
    return 2 ** 1.25 * math.pi ** -0.75 * _min_on_unit(g) ** -0.5


S_CONST = s_constant()
GATE_C_I = gate_constant_I()
GATE_C_II = gate_constant_II()


# --------------------------------------------------------------------------
# continuum II

def approx_continuum_II_odd(n, kx, cfg):
    """Leading-order (k, h) of the odd family at given kx."""
    thr = TWO_PI + kx
    d = delta0(thr, cfg)
    k = thr - 8 * math.pi ** 2 * d * d / thr
    h = n * math.pi / (2 * math.sqrt(TWO_PI * kx)) * (1 + math.pi * d * d / kx)
    return k, h


def approx_kx_II(n_odd, l, cfg):
    """Leading-order quantized kx for odd family index n_odd and integer l."""
    r = l / n_odd
    u = cfg.R ** 4 * (cfg.eps_c - 1) ** 2
    return (math.pi / (2 * r * r - 1)
            + math.pi ** 5 * (r * r - 1) * (4 * r * r - 1) ** 4
            / (4 * (2 * r * r - 1) ** 5) * u)


def phase_n(n, kx, a, cfg, tol=DEFAULT_TOL):
    """phi_n(kx) = n pi sqrt((k_n^2 - kx^2)/(k_n^2 - (2 pi - kx)^2))."""
    kx = np.atleast_1d(np.asarray(kx, dtype=float))
    k = solve_psi_n(n, kx, a, cfg, 2, tol)
    return n * math.pi * np.sqrt((k * k - kx * kx) / (k * k - (TWO_PI - kx) ** 2)), k


def phase_infinity(kx, cfg, tol=DEFAULT_TOL):
    """phi_inf(kx) from the root k_inf of psi_infinity."""
    k = k_infinity(kx, cfg, tol)
    return math.sqrt((k * k - kx * kx) / (k * k - (TWO_PI - kx) ** 2))


def k_infinity(kx, cfg, tol=DEFAULT_TOL):
    lo, hi = TWO_PI - kx, TWO_PI + kx

    def f(k):
        return psi_infinity(k, kx, cfg, tol)

    br = _first_sign_change(f, _edge_grid(lo, hi))
    if br is None:
        raise NoRoot("psi_infinity has no root at kx=%.6g" % kx)
    return bisect_decreasing(f, *br[:2], f_lo=br[2], f_hi=br[3])[0]


def _kx_for_phase(n, l, a, cfg, lo, hi, tol):
    """Bisection in kx for phi_n(kx) = l pi (phi_n decreasing in kx)."""

    def g(x):
        v = phase_n(n, x, a, cfg, tol)[0][0]
        return v / math.pi - l

    glo, ghi = g(lo), g(hi)
    if not (glo > 0 > ghi):
        raise NoBracket("phi_n - l pi has no sign change")
    return brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def two_channel_residuals(cfg, pt, tol=DEFAULT_TOL):
    """Residuals of the two real equations for two open channels."""
    h = cfg.require_h()
    k, kx = pt.k, pt.kx
    kz = math.sqrt(k * k - kx * kx)
    kz1 = math.sqrt(k * k - (TWO_PI - abs(kx)) ** 2)
    pp, pm = psi_pm_II(cfg, pt, tol)
    c2a = math.cos(TWO_PI * cfg.a)
    c0, c1 = math.cos(2 * h * kz), math.cos(2 * h * kz1)
    r1 = 2 * (1 - c2a * c0 * c1) / (kz * kz1) - pp * pm
    r2 = pp * ((1 - c0) / kz + (1 - c2a * c1) / kz1) + pm * ((1 + c0) / kz + (1 + c2a * c1) / kz1)
    return r1, r2


def parity_ok_II(a, n, l):
    """Mode matching in both open channels: (-1)^l == (-1)^n cos(2 pi a)."""
    return (-1) ** l == (-1) ** n * (1 if a == 0 else -1)


def _record_II(n, l, kx, k, a, cfg_base, tol):
    kz1 = math.sqrt(k * k - (TWO_PI - kx) ** 2)
    h = n * math.pi / (2 * kz1)
    cfg = ArrayConfig(cfg_base.R, cfg_base.eps_c, a, h)
    pt = BlochPoint(k, kx)
    s = lattice_sums(pt, cfg, tol)
    delta = s.phi0 ** 2 - s.phi_plus * s.phi_minus
    r1, r2 = two_channel_residuals(cfg, pt, tol)
    sign = (-1) ** (n + int(round(2 * a)) + 1)
    sym = Symmetry.SYMMETRIC if sign > 0 else Symmetry.SKEW
    approx = None
    if n % 2 == 1:
        approx = approx_continuum_II_odd(n, kx, cfg_base)[0]
    return BoundStateRecord(
        region=RegionTag(RegionKind.CONTINUUM, 2), kx=kx, k=k, h=h, a=a,
        residual_delta=abs(delta), symmetry=sym, indices=(n, l), approx_k=approx,
        family="plus" if (n % 2 == 1) == (a == 0) else "minus",
        extra={"system_residual": max(abs(r1), abs(r2)),
               "phase_l": 2 * h * math.sqrt(k * k - kx * kx) / math.pi})


def phase_crossings(n, a, cfg, l_max, n_grid=2048, kx_lo=1e-3, kx_hi=None, tol=DEFAULT_TOL):
    """All kx in (kx_lo, kx_hi) with phi_n(kx) = l pi, n < l <= l_max.

    Returns a list of (l, kx) sorted by l.
    """
    if kx_hi is None:
        kx_hi = math.pi - 1e-9
    grid = np.linspace(kx_lo, kx_hi, n_grid)
    ph, _ = phase_n(n, grid, a, cfg, tol)
    y = ph / math.pi
    found = {}
    for i in range(n_grid - 1):
        y0, y1 = y[i], y[i + 1]
        if not (math.isfinite(y0) and math.isfinite(y1)):
            continue
        lo_l, hi_l = sorted((y0, y1))
        for l in range(max(n + 1, math.floor(lo_l) + 1), min(l_max, math.ceil(hi_l) - 1) + 1):
            if l in found or not lo_l < l < hi_l:
                continue
            if y0 > y1:
                found[l] = _kx_for_phase(n, l, a, cfg, grid[i], grid[i + 1], tol)
    return sorted(found.items())


def find_continuum_II(cfg_base, a, n_max, l_max, n_grid=2048, tol=DEFAULT_TOL,
                      check_gate=True, kx_range=None):
    """Bound states with two open channels, indexed by (n, l)."""
    if a not in (0.0, 0.5):
        raise NoRoot("two open channels require a in {0, 1/2}")
    lo, hi = kx_range if kx_range else (1e-3, math.pi - 1e-9)
    if check_gate:
        gate = existence_gate_II(hi, cfg_base)
        if not gate.holds:
            raise GateFailed("existence inequality violated: %.6g <= %.6g"
                             % (gate.lhs, gate.rhs), gate)
    out = []
    for n in range(1, n_max + 1):
        for l, kx in phase_crossings(n, a, cfg_base, l_max, n_grid, lo, hi, tol):
            if not parity_ok_II(a, n, l):
                continue
            k0 = solve_psi_n(n, kx, a, cfg_base, 2, tol)[0]
            k, _ = _polish(n, kx, a, cfg_base, 2, k0, tol)
            out.append(_record_II(n, l, kx, k, a, cfg_base, tol))
        if a == 0 and (kx_range is None or kx_range[1] >= math.pi):
            k0 = solve_psi_n(n, math.pi, 0.0, cfg_base, 2, tol)[0]
            if math.isfinite(k0):
                k, _ = _polish(n, math.pi, 0.0, cfg_base, 2, k0, tol)
                out.append(_record_II(n, n, math.pi, k, 0.0, cfg_base, tol))
    out.sort(key=lambda r: (r.indices[0], r.indices[1], r.kx))
    if not out:
        raise NoRoot("no continuum-II records for n <= %d, l <= %d" % (n_max, l_max))
    return out


def enumerate_kx_II(n, alpha, beta, cfg, a=0.0, tol=DEFAULT_TOL):
    """All quantized kx^{n,l} (any l > n) inside (alpha, beta)."""
    ph, _ = phase_n(n, np.array([alpha, beta]), a, cfg, tol)
    if not np.all(np.isfinite(ph)):
        raise NoRoot("k_n(kx) missing at the interval ends")
    l_hi = math.ceil(ph[0] / math.pi) - 1
    l_lo = max(n + 1, math.floor(ph[1] / math.pi) + 1)
    return [_kx_for_phase(n, l, a, cfg, alpha, beta, tol) for l in range(l_lo, l_hi + 1)]


# --------------------------------------------------------------------------
# three and four open channels

@dataclass
class DiophantineSolution:
    ns: tuple
    kx: float
    h: float
    k: float
    channels: int
    sin_residual: float
    a: float | None = None
    curve_constant: complex | None = None
    parity_ok: bool = False


def diophantine_point(ns):
    """(kx, h, k) at which 2 h k_{z,m} = n_m pi for channels 0, -1, 1."""
    n0, n1, n2 = ns[:3]
    D = 2 * n0 * n0 - n1 * n1 - n2 * n2
    if D == 0:
        raise DegenerateTriple("2 n0^2 == n1^2 + n2^2 for %r" % (ns,))
    if D < 0:
        raise DegenerateTriple("2 n0^2 < n1^2 + n2^2 for %r" % (ns,))
    kx = (n1 * n1 - n2 * n2) * math.pi / D
    h = math.sqrt(D) / (4 * math.sqrt(2))
    k = math.pi * math.sqrt(8 * n0 * n0 * D + (n1 * n1 - n2 * n2) ** 2) / D
    return kx, h, k


def _channel_order(count):
    return [0, -1, 1, -2][:count]


def curve_constant(ns, a, tol=DEFAULT_TOL):
    """X = 2/(k^2 R^2 (eps_c-1)) + ln(2 pi R) that makes the determinant vanish.

    The determinant depends on (R, eps_c) only through X, entering phi0 as
    i X / pi.  Both roots of the quadratic are returned (complex in general);
    a bound state needs a real root.
    """
    kx, h, k = diophantine_point(ns)
    pt = BlochPoint(k, kx)
    ref = ArrayConfig(0.1, 2.0, a, h)
    s = lattice_sums(pt, ref, tol)
    x_ref = 2 / (k * k * ref.R ** 2 * (ref.eps_c - 1)) + math.log(TWO_PI * ref.R)
    base = s.phi0 - 1j * x_ref / math.pi
    root = np.sqrt(complex(s.phi_plus * s.phi_minus))
    return [(r - base) * math.pi / 1j for r in (root, -root)]


def eps_on_curve(C, k, R):
    """eps_c on the curve 2/(k^2 R^2 (eps_c-1)) + ln(2 pi R) = C."""
    rhs = C - math.log(TWO_PI * R)
    if rhs <= 0:
        raise ValueError("no positive eps_c - 1 for this R")
    return 1 + 2 / (k * k * R * R * rhs)


def diophantine_N(channel_count, search_bound, tol=DEFAULT_TOL):
    """Integer tuples for 3 or 4 open channels with the implied (kx, h, k)."""
    if channel_count not in (3, 4):
        raise ValueError("channel_count must be 3 or 4")
    if search_bound < 2:
        raise ValueError("search_bound must be >= 2")
    out = []
    B = search_bound
    for n0 in range(1, B + 1):
        for n1 in range(1, n0 + 1):
            for n2 in range(1, n1 + 1):
                if channel_count == 3:
                    if not n0 > n1 >= n2:
                        continue
                    tuples = [(n0, n1, n2)]
                else:
                    if not n0 >= n1 > n2:
                        continue
                    tuples = []
                    for n3 in range(1, n2 + 1):
                        if 3 * n1 * n1 + n2 * n2 == 3 * n0 * n0 + n3 * n3:
                            tuples.append((n0, n1, n2, n3))
                for ns in tuples:
                    if 2 * n0 * n0 == n1 * n1 + n2 * n2:
                        continue
                    sol = _diophantine_solution(ns, channel_count, tol)
                    if sol is not None:
                        out.append(sol)
    return out


def _diophantine_solution(ns, count, tol):
    kx, h, k = diophantine_point(ns)
    pt = BlochPoint(k, kx)
    tag = classify(pt)
    if tag.count != count:
        return None
    res = 0.0
    for m, n in zip(_channel_order(count), ns):
        kzm = math.sqrt(max(k * k - (kx + TWO_PI * m) ** 2, 0.0))
        res = max(res, abs(2 * h * kzm / math.pi - n))
    sol = DiophantineSolution(ns, kx, h, k, tag.count, res)
    # mode matching across channels forces exp(2 pi i a) = +-1 consistently
    signs = [(-1) ** n for n in ns]
    for a in (0.0, 0.5):
        e = 1 if a == 0 else -1
        want = [signs[0], signs[1] * e, signs[2] * e] + ([signs[3]] if count == 4 else [])
        if all(w == signs[0] for w in want):
            sol.a = a
            sol.parity_ok = True
            break
    a = sol.a if sol.a is not None else 0.0
    roots = curve_constant(ns, a, tol)
    sol.curve_constant = min(roots, key=lambda c: abs(c.imag))
    if sol.a is None:
        sol.a = a
    return sol
