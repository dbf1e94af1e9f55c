"""Channel sums for the double array in the thin-cylinder limit.

All sums run over diffraction channels m.  The self-interaction sum ``phi0``
converges only algebraically; its tail is summed from the large-m expansion

    1/q_m + 1/q_{-m} = sum_j c_j(k, kx) / (2*pi*m)**j,   j = 1, 3, 5, ...

and Hurwitz zeta values.  Sums carrying ``exp(-2*h*q_m)`` are truncated with a
geometric tail bound.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import zeta

from .channels import TWO_PI, kz_values, open_channels
from .errors import ThresholdSingularity

EULER_GAMMA = 0.57721566490153286061
THRESHOLD_GUARD = 1e-9
DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class ArrayConfig:
    """Geometry and material of the double array (period = 1).

    ``eps_c == 1`` is accepted as the uncoupled limit (delta0 = 0).
    ``h`` may be None for searches where the spacing is an output.
    """

    R: float
    eps_c: float
    a: float = 0.0
    h: float | None = None

    def __post_init__(self):
        if not 0 < self.R < 0.5:
            raise ValueError("R must lie in (0, 1/2)")
        if self.eps_c < 1:
            raise ValueError("eps_c must be >= 1")
        if not 0 <= self.a <= 0.5:
            raise ValueError("a must lie in [0, 1/2]")
        if self.h is not None and not self.h > self.R:
            raise ValueError("h must exceed R (non-overlapping cylinders)")

    def with_h(self, h):
        return ArrayConfig(self.R, self.eps_c, self.a, h)

    def with_a(self, a):
        return ArrayConfig(self.R, self.eps_c, a, self.h)

    def require_h(self):
        if self.h is None:
            raise ValueError("this operation needs the spacing h")
        return self.h


@dataclass(frozen=True)
class LatticeSums:
    phi0: complex
    phi_plus: complex
    phi_minus: complex
    phi_star: float
    phi_c: float
    phi_s: float
    delta0: float
    trunc_error: float


def delta0(k, cfg):
    """Coupling strength (k R / 2)^2 (eps_c - 1) of one thin cylinder."""
    return (0.5 * k * cfg.R) ** 2 * (cfg.eps_c - 1.0)


def _check_thresholds(k, kx):
    for m in open_channels_raw(k, kx, pad=1):
        if math.sqrt(abs(k * k - (kx + TWO_PI * m) ** 2)) < THRESHOLD_GUARD:
            raise ThresholdSingularity(
                "channel %d is at threshold (k=%.17g, kx=%.17g)" % (m, k, kx))


def open_channels_raw(k, kx, pad=0):
    lo = math.floor((-k - kx) / TWO_PI) - pad
    hi = math.ceil((k - kx) / TWO_PI) + pad
    return range(lo, hi + 1)


# coefficients of u**j in 1/q_m + 1/q_{-m} with u = 1/(2 pi m)
def _tail_coeffs(k, kx):
    k2, x2 = k * k, kx * kx
    c3 = k2 + 2 * x2
    c5 = (3 * k2 * k2 + 24 * k2 * x2 + 8 * x2 * x2) / 4
    c7 = (5 * k2 ** 3 + 90 * k2 * k2 * x2 + 120 * k2 * x2 * x2 + 16 * x2 ** 3) / 8
    c9 = (35 * k2 ** 4 + 1120 * k2 ** 3 * x2 + 3360 * k2 ** 2 * x2 ** 2
          + 1792 * k2 * x2 ** 3 + 128 * x2 ** 4) / 64
    return c3, c5, c7, c9


def regularized_closed_sum(k, kx, tol=DEFAULT_TOL, exclude=None):
    """Sum over closed channels of 1/(2 pi (|m|+1)) - 1/q_m.

    Returns ``(value, M, err)`` where ``M`` is the explicit window and ``err``
    bounds the discarded part of the tail expansion.  Channels listed in
    ``exclude`` are skipped as well (they must lie inside the window).
    """
    c3, c5, c7, c9 = _tail_coeffs(k, kx)
    M = max(32, int(4 * (k + abs(kx)) / math.pi) + 8)
    while True:
        err = 2 * c9 / TWO_PI ** 9 * float(zeta(9, M + 1))
        if err < tol or M > 1 << 20:
            break
        M *= 2
    ms = np.arange(-M, M + 1)
    d = (kx + TWO_PI * ms) ** 2 - k * k
    closed = d > 0
    if exclude is not None:
        for m in exclude:
            closed[m + M] = False
    q = np.sqrt(d[closed])
    terms = 1.0 / (TWO_PI * (np.abs(ms[closed]) + 1)) - 1.0 / q
    head = math.fsum(terms)
    tail = -1.0 / (math.pi * (M + 1))
    for c, j in ((c3, 3), (c5, 5), (c7, 7)):
        tail -= c / TWO_PI ** j * float(zeta(j, M + 1))
    return head + tail, M, err


def phi_star(pt, cfg, tol=DEFAULT_TOL):
    """Imaginary part of phi0."""
    return phi0(pt, cfg, tol).imag


def phi0(pt, cfg, tol=DEFAULT_TOL):
    return _phi0_with_error(pt, cfg, tol)[0]


def _phi0_with_error(pt, cfg, tol):
    k, kx = pt.k, pt.kx
    _check_thresholds(k, kx)
    d0 = delta0(k, cfg)
    reg, _, err = regularized_closed_sum(k, kx, tol)
    ops = open_channels(pt)
    re = math.fsum(1.0 / math.sqrt(k * k - (kx + TWO_PI * m) ** 2) for m in ops)
    im = reg + math.fsum(1.0 / (TWO_PI * (abs(m) + 1)) for m in ops)
    im += (1.0 / d0 + 2.0 * math.log(TWO_PI * cfg.R)) / TWO_PI if d0 > 0 else math.inf
    return complex(re, im), err


def exp_window(k, kx, depth, tol=DEFAULT_TOL):
    """Smallest symmetric window M so that the closed-channel tail of a sum
    weighted by exp(-depth*q_m)/q_m is below ``tol``.  Returns (M, bound)."""
    if depth <= 0:
        raise ValueError("depth must be positive")
    ratio = 1.0 - math.exp(-TWO_PI * depth)
    M = int((k + abs(kx)) / TWO_PI) + 2
    while True:
        qm = min(_q(k, kx, M + 1), _q(k, kx, -M - 1))
        bound = 2 * math.exp(-depth * qm) / (qm * ratio)
        if bound < tol:
            return M, bound
        M += max(1, M // 4)


def _q(k, kx, m):
    d = (kx + TWO_PI * m) ** 2 - k * k
    return math.sqrt(d) if d > 0 else 0.0


def phi_pm(pt, cfg, sign=+1, tol=DEFAULT_TOL):
    """Inter-array sum with phase exp(i(+-a(kx+2 pi m) + 2 h k_z))/k_z."""
    h = cfg.require_h()
    _check_thresholds(pt.k, pt.kx)
    M, _ = exp_window(pt.k, pt.kx, 2 * h, tol)
    ms = np.arange(-M, M + 1)
    kz = kz_values(pt.k, pt.kx, ms)
    terms = np.exp(1j * (sign * cfg.a * (pt.kx + TWO_PI * ms) + 2 * h * kz)) / kz
    return complex(np.sum(terms))


def phi_aux(pt, cfg, tol=DEFAULT_TOL):
    """(phi_star, phi_c, phi_s): Im phi0 and the closed-channel cos/sin sums."""
    h = cfg.require_h()
    ps = phi_star(pt, cfg, tol)
    pc, pss = _closed_cos_sin(pt, h, cfg.a, tol)
    return ps, pc, pss


def _closed_cos_sin(pt, h, a, tol):
    M, _ = exp_window(pt.k, pt.kx, 2 * h, tol)
    ms = np.arange(-M, M + 1)
    d = (pt.kx + TWO_PI * ms) ** 2 - pt.k ** 2
    cl = d > 0
    q = np.sqrt(d[cl])
    w = np.exp(-2 * h * q) / q
    ang = TWO_PI * a * ms[cl]
    return float(np.sum(w * np.cos(ang))), float(np.sum(w * np.sin(ang)))


def lattice_sums(pt, cfg, tol=DEFAULT_TOL):
    """All sums at one Bloch point."""
    h = cfg.require_h()
    p0, err0 = _phi0_with_error(pt, cfg, tol)
    pp = phi_pm(pt, cfg, +1, tol)
    pm = phi_pm(pt, cfg, -1, tol)
    pc, pss = _closed_cos_sin(pt, h, cfg.a, tol)
    _, berr = exp_window(pt.k, pt.kx, 2 * h, tol)
    return LatticeSums(p0, pp, pm, p0.imag, pc, pss, delta0(pt.k, cfg),
                       max(err0, berr))


def determinant(pt, cfg, tol=DEFAULT_TOL):
    """phi0**2 - phi_plus*phi_minus; zero exactly at bound states."""
    s = lattice_sums(pt, cfg, tol)
    return s.phi0 ** 2 - s.phi_plus * s.phi_minus


def c_sequence(pt, h, m):
    """c_m = exp(-2 h q_{-m})/q_{-m} - exp(-2 h q_m)/q_m for m >= 1."""
    if m < 1:
        raise ValueError("m must be >= 1")
    qa, qb = _q(pt.k, pt.kx, -m), _q(pt.k, pt.kx, m)
    if qa <= 0 or qb <= 0:
        raise ValueError("channels +-%d must be closed" % m)
    return math.exp(-2 * h * qa) / qa - math.exp(-2 * h * qb) / qb


def regularized_closed_sum_vec(k, kx, M):
    """Vectorized ``regularized_closed_sum`` over arrays of (k, kx) with a
    fixed window M; returns (values, tail_error_bound)."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    kx = np.broadcast_to(np.asarray(kx, dtype=float), k.shape)
    ms = np.arange(-M, M + 1)
    d = (kx[:, None] + TWO_PI * ms[None, :]) ** 2 - k[:, None] ** 2
    closed = d > 0
    q = np.sqrt(np.where(closed, d, 1.0))
    terms = np.where(closed, 1.0 / (TWO_PI * (np.abs(ms) + 1)) - 1.0 / q, 0.0)
    c3, c5, c7, c9 = _tail_coeffs(k, kx)
    tail = -1.0 / (math.pi * (M + 1)) - (c3 / TWO_PI ** 3 * zeta(3, M + 1)
                                         + c5 / TWO_PI ** 5 * zeta(5, M + 1)
                                         + c7 / TWO_PI ** 7 * zeta(7, M + 1))
    err = 2 * c9 / TWO_PI ** 9 * zeta(9, M + 1)
    return terms.sum(axis=1) + tail, err


def window_for(k_max, kx_max, tol=DEFAULT_TOL):
    """Window M for which the vectorized regularized sum meets ``tol``."""
    return regularized_closed_sum(k_max, kx_max, tol)[1]
