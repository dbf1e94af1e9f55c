"""Brute-force reference evaluations used to validate the fast channel sums.

The lattice sums of Hankel functions converge only conditionally on the real
k axis.  They are evaluated at k*(1 + i*eta), where the terms decay like
exp(-eta*k*|m|), and the results are extrapolated to eta -> 0.  Nothing here
shares code with ``lattice_sums`` apart from the Hankel routine itself.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import hankel1

from .errors import ExtrapolationDiverged

DEFAULT_ETA = (1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4)
ENVELOPE_DEPTH = 36.0   # exp(-36) ~ 2e-16 at the truncation edge


@dataclass
class RegularizedSum:
    eta_sequence: tuple
    values: list = field(default_factory=list)
    extrapolated: complex = 0j
    residual: float = math.inf


def richardson(etas, values):
    """Polynomial extrapolation to eta = 0 (Neville's scheme)."""
    x = list(etas)
    p = [complex(v) for v in values]
    n = len(x)
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            p[i] = (x[i - j] * p[i] - x[i] * p[i - 1]) / (x[i - j] - x[i])
    return p[-1]


def threshold_distance(k, kx):
    """Relative distance |k - |kx + 2 pi m|| / k to the nearest threshold."""
    m0 = round((k - kx) / (2 * np.pi))
    m1 = round((-k - kx) / (2 * np.pi))
    d = min(abs(k - abs(kx + 2 * np.pi * m)) for m in (m0 - 1, m0, m0 + 1, m1 - 1, m1, m1 + 1))
    return d / k


def auto_levels(k, kx, base=DEFAULT_ETA):
    """Shrink the eta schedule near a threshold, where the regularized sum
    has a branch point at eta ~ (relative threshold distance)."""
    scale = min(1.0, 5.0 * threshold_distance(k, kx))
    return tuple(e * scale for e in base)


def _window(k, eta):
    return int(max(10.0 / eta, ENVELOPE_DEPTH / (eta * k))) + 1


def _extrapolate(func, k, eta_levels, max_residual):
    """Extrapolate over ``eta_levels``; the residual is the change in the
    extrapolated value when every level is halved once more."""
    etas = tuple(sorted(eta_levels, reverse=True))
    out = RegularizedSum(etas)
    for eta in etas:
        out.values.append(func(k * (1 + 1j * eta), _window(k, eta)))
    out.extrapolated = richardson(etas, out.values)
    extra = etas[-1] / 2
    shifted = richardson(etas[1:] + (extra,),
                         out.values[1:] + [func(k * (1 + 1j * extra), _window(k, extra))])
    out.residual = abs(out.extrapolated - shifted)
    if not math.isfinite(out.residual) or out.residual > max_residual:
        raise ExtrapolationDiverged(
            "eta extrapolation residual %.3g exceeds %.3g" % (out.residual, max_residual))
    return out


def hankel_sum_direct(pt, r_offset, eta_levels=None, max_residual=1e-4,
                      detail=False):
    """(1/2) sum_m exp(i m kx) H0(k |r - m e_x|) for r off the lattice."""
    x, z = r_offset
    if eta_levels is None:
        eta_levels = auto_levels(pt.k, pt.kx)

    def partial(kappa, M):
        m = np.arange(-M, M + 1)
        dist = np.hypot(x - m, z)
        return 0.5 * np.sum(np.exp(1j * m * pt.kx) * hankel1(0, kappa * dist))

    out = _extrapolate(partial, pt.k, eta_levels, max_residual)
    return out if detail else out.extrapolated


def hankel_diag_direct(pt, eta_levels=None, max_residual=1e-4, detail=False):
    """(1/2) sum_{m != 0} exp(i m kx) H0(k |m|)."""
    if eta_levels is None:
        eta_levels = auto_levels(pt.k, pt.kx)

    def partial(kappa, M):
        m = np.arange(1, M + 1)
        h = hankel1(0, kappa * m)
        return 0.5 * np.sum(2 * np.cos(m * pt.kx) * h)

    out = _extrapolate(partial, pt.k, eta_levels, max_residual)
    return out if detail else out.extrapolated


def fd_derivative(f, x, step):
    """Centered difference (f(x+s) - f(x-s)) / 2s."""
    return (f(x + step) - f(x - step)) / (2.0 * step)


def fd_derivative5(f, x, step):
    """Five-point centered difference, error O(step**4)."""
    return (-f(x + 2 * step) + 8 * f(x + step) - 8 * f(x - step)
            + f(x - 2 * step)) / (12.0 * step)


def channel_form_direct(k, kx, x, z, M):
    """Plain truncated channel sum sum_m exp(i(x(kx+2 pi m) + |z| k_z))/k_z.

    Written with numpy's complex sqrt on k**2 - p**2 + 0j, an independent
    route to the branch choice used by the library.
    """
    m = np.arange(-M, M + 1)
    p = kx + 2 * np.pi * m
    kz = np.sqrt(k * k - p * p + 0j)
    return complex(np.sum(np.exp(1j * (x * p + abs(z) * kz)) / kz))


def diag_identity_rhs(k, kx, M=200000):
    """Right side of the on-axis identity with the convergent regulator
    1/(2 pi i (|m|+1)), summed by brute force with an Euler-Maclaurin tail."""
    m = np.arange(-M, M + 1)
    p = kx + 2 * np.pi * m
    kz = np.sqrt(k * k - p * p + 0j)
    s = np.sum(1.0 / kz - 1.0 / (2j * np.pi * (np.abs(m) + 1)))
    # pair summand ~ -i/(pi m (m+1)) at large m -> tail -i/(pi (M+1))
    s -= 1j / (np.pi * (M + 1))
    return complex(s) - 0.5 - 1j / np.pi * (EULER + math.log(k / (4 * np.pi)) - 0.5)


EULER = 0.57721566490153286061


def fit_lorentzian(k, y, steps=50):
    """Least-squares fit of y ~ A/((k-k0)^2 + G^2) + C.

    The start comes from a parabola through 1/y at the three samples around
    the maximum (exact for a pure Lorentzian), followed by Gauss-Newton.
    Returns (k0, |G|, A, C).
    """
    k = np.asarray(k, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.clip(np.argmax(y), 1, len(k) - 2))
    c2, c1, c0 = np.polyfit(k[i - 1:i + 2], 1 / y[i - 1:i + 2], 2)
    k0 = -c1 / (2 * c2)
    A = 1 / c2
    G2 = max((c0 - c1 * c1 / (4 * c2)) * A, (k[1] - k[0]) ** 2)
    p = np.array([k0, math.sqrt(G2), A, 0.0])
    for _ in range(steps):
        d = (k - p[0]) ** 2 + p[1] ** 2
        r = p[2] / d + p[3] - y
        J = np.column_stack([2 * p[2] * (k - p[0]) / d ** 2,
                             -2 * p[2] * p[1] / d ** 2,
                             1 / d, np.ones_like(k)])
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        p = p + step
        if np.all(np.abs(step) <= 1e-15 * (1 + np.abs(p))):
            break
    return float(p[0]), abs(float(p[1])), float(p[2]), float(p[3])


def axis_value_from_ring(field_fn, center, rho, k, d0, R, n_angles=64):
    """Recover the on-axis value E_c of a thin cylinder from its ring average.

    Off the axis the field is a smooth Helmholtz solution plus the cylinder's
    own monopole i pi d0 E_c H0(k rho).  The ring average of the smooth part
    is J0(k rho) times its centre value, and the centre value differs from
    E_c by the self-interaction of the finite cross-section,
    i pi d0 E_c (1 + (2i/pi)(gamma + ln(kR/2) - 1/2)).  Solving for E_c gives
    an estimate that is exact in the thin-cylinder model for every rho.
    """
    from scipy.special import j0
    t = np.arange(n_angles) * (2 * np.pi / n_angles)
    xs = center[0] + rho * np.cos(t)
    zs = center[1] + rho * np.sin(t)
    avg = np.mean(field_fn(xs, zs))
    self_term = 1 + 2j / np.pi * (EULER + np.log(k * R / 2) - 0.5)
    denom = j0(k * rho) * (1 - 1j * np.pi * d0 * self_term) + 1j * np.pi * d0 * hankel1(0, k * rho)
    return complex(avg / denom)


def determinant_direct(k, kx, R, eps_c, a, h, eta_levels=None):
    """phi0^2 - phi_plus*phi_minus assembled from direct Hankel sums.

    phi0 carries the thin-cylinder self term; phi_+- are the array sums seen
    from the other array at horizontal offsets -+a and vertical gap 2h.
    """
    from .channels import BlochPoint
    pt = BlochPoint(k, kx)
    d0 = 0.25 * (k * R) ** 2 * (eps_c - 1)
    diag = hankel_diag_direct(pt, eta_levels)
    p0 = 1j / (2 * np.pi * d0) + diag + 0.5 + 1j / np.pi * (EULER + math.log(k * R / 2) - 0.5)
    pp = hankel_sum_direct(pt, (a, 2 * h), eta_levels)
    pm = hankel_sum_direct(pt, (-a, 2 * h), eta_levels)
    return complex(p0 * p0 - pp * pm)
