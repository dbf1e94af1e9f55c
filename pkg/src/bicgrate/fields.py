"""Field maps E(x, z) off the cylinders.

Every field here is a superposition of two periodic line-source arrays,

    S(X, Z) = sum_m exp(i (kx + 2 pi m) X + i k_{z,m} |Z|) / k_{z,m},

centred on (0, -h) and (a, h), plus the incident wave for scattering
solutions.  Far from a source line the channel sum converges geometrically.
Close to it the terms decay only like 1/|m|, so the leading two orders of
the large-|m| behaviour are subtracted and added back in closed form
(a logarithm and a dilogarithm).
"""
from dataclasses import dataclass, field
import csv
import json
import math

import numpy as np
from scipy.special import spence

from .bound_states import cylinder_fields
from .channels import TWO_PI, BlochPoint
from .errors import InsideScatterer
from .lattice_sums import ArrayConfig, _check_thresholds, delta0, exp_window

NEAR_LINE = 0.05          # |Z| below which the subtracted sum is used
NEAR_WINDOW = 2000        # window of the subtracted sum (error ~ 1/M^2)


@dataclass(frozen=True)
class GridSpec:
    x_range: tuple = (0.0, 1.0)
    z_range: tuple | None = None
    nx: int = 256
    nz: int = 512
    x_endpoint: bool = False

    def axes(self, h):
        zr = self.z_range if self.z_range is not None else (-h - 2.0, h + 2.0)
        x = np.linspace(self.x_range[0], self.x_range[1], self.nx, endpoint=self.x_endpoint)
        z = np.linspace(zr[0], zr[1], self.nz)
        return x, z


@dataclass
class FieldGrid:
    x: np.ndarray
    z: np.ndarray
    values: np.ndarray          # shape (nx, nz); NaN inside cylinders
    inside: np.ndarray
    meta: dict = field(default_factory=dict)

    def bloch_residual(self):
        """max |E(x+1, z) - exp(i kx) E(x, z)| over sampled pairs."""
        kx = self.meta["kx"]
        step = self.x[1] - self.x[0] if self.x.size > 1 else 1.0
        shift = int(round(1.0 / step))
        if shift <= 0 or shift >= self.x.size or abs(shift * step - 1) > 1e-12:
            return None
        a = self.values[shift:]
        b = np.exp(1j * kx) * self.values[:-shift]
        ok = np.isfinite(a) & np.isfinite(b)
        return float(np.max(np.abs(a[ok] - b[ok]))) if ok.any() else None


# --------------------------------------------------------------------------
# channel sums

def _li2(w):
    return spence(1.0 - w)


def _far_sum(k, kx, X, Z, tol):
    """Plain channel sum; every |Z| must be bounded away from 0."""
    zmin = float(np.min(np.abs(Z)))
    M, _ = exp_window(k, kx, zmin, tol)
    ms = np.arange(-M, M + 1)
    kxm = kx + TWO_PI * ms
    d = k * k - kxm * kxm
    kzm = np.where(d >= 0, np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))
    ph = np.exp(1j * (np.outer(X, kxm) + np.outer(np.abs(Z), kzm)))
    return ph @ (1.0 / kzm), M


def _near_sum(k, kx, X, Z, M=NEAR_WINDOW):
    """Channel sum with the log and dilog parts of the tail done exactly.

    For |m| -> inf, 1/q_m = 1/(2 pi |m|) - sgn(m) kx / (2 pi m)^2 + O(m^-3),
    and exp(-q_m |Z|) ~ exp(-|kx + 2 pi m| |Z|); both leading pieces sum in
    closed form over m >= 1 and m <= -1.
    """
    X = np.asarray(X, dtype=float)
    aZ = np.abs(np.asarray(Z, dtype=float))
    w = np.exp(TWO_PI * (1j * X - aZ))      # m >= 1
    v = np.exp(TWO_PI * (-1j * X - aZ))     # m <= -1
    ep = np.exp(kx * (1j * X - aZ))
    em = np.exp(kx * (1j * X + aZ))
    comp = (ep * (-np.log1p(-w) / TWO_PI - kx * _li2(w) / TWO_PI ** 2)
            + em * (-np.log1p(-v) / TWO_PI + kx * _li2(v) / TWO_PI ** 2)) / 1j
    ms = np.concatenate([np.arange(-M, 0), np.arange(1, M + 1)])
    kxm = kx + TWO_PI * ms
    d = k * k - kxm * kxm
    kzm = np.where(d >= 0, np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))
    am = np.abs(ms)
    coef = (1.0 / (TWO_PI * am) - np.sign(ms) * kx / (TWO_PI * am) ** 2) / 1j
    total = np.empty(X.shape, dtype=complex)
    # chunked to bound memory
    step = max(1, 2_000_000 // ms.size)
    for s in range(0, X.size, step):
        xs, zs = X[s:s + step], aZ[s:s + step]
        ph = np.exp(1j * np.outer(xs, kxm))
        exact = ph * np.exp(1j * np.outer(zs, kzm)) / kzm
        approx = ph * np.exp(-np.outer(zs, np.abs(kxm))) * coef
        total[s:s + step] = np.sum(exact - approx, axis=1)
    d0 = k * k - kx * kx
    kz0 = math.sqrt(d0) if d0 >= 0 else 1j * math.sqrt(-d0)
    m0 = np.exp(1j * (kx * X + kz0 * aZ)) / kz0
    return m0 + comp + total


def array_sum(k, kx, X, Z, tol=1e-12):
    """S(X, Z) for flat arrays of offsets from one source of the array."""
    _check_thresholds(k, kx)
    X = np.asarray(X, dtype=float).ravel()
    Z = np.asarray(Z, dtype=float).ravel()
    out = np.empty(X.shape, dtype=complex)
    near = np.abs(Z) < NEAR_LINE
    if near.any():
        out[near] = _near_sum(k, kx, X[near], Z[near])
    far = ~near
    if far.any():
        # group by |Z| so each group gets its own window
        aZ = np.abs(Z[far])
        idx = np.nonzero(far)[0]
        order = np.argsort(aZ)
        for chunk in np.array_split(order, max(1, order.size // 4096 + 1)):
            if chunk.size:
                vals, _ = _far_sum(k, kx, X[idx[chunk]], Z[idx[chunk]], tol)
                out[idx[chunk]] = vals
    return out


def inside_mask(x, z, cfg):
    """True where (x, z) lies within R of a cylinder axis (either array)."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    dx1 = x - np.round(x)
    dx2 = (x - cfg.a) - np.round(x - cfg.a)
    return (np.hypot(dx1, z + cfg.h) < cfg.R) | (np.hypot(dx2, z - cfg.h) < cfg.R)


def source_field(pt, cfg, e_left, e_right, x, z, tol=1e-12):
    """Scattered field 2 pi i delta0 (E_right S(x-a, z-h) + E_left S(x, z+h))."""
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    d0 = delta0(pt.k, cfg)
    s_right = array_sum(pt.k, pt.kx, x - cfg.a, z - cfg.h, tol)
    s_left = array_sum(pt.k, pt.kx, x, z + cfg.h, tol)
    return 2j * math.pi * d0 * (e_right * s_right + e_left * s_left)


def field_at(pt, cfg, e_left, e_right, x, z, incident=None, tol=1e-12):
    """Field at one point; raises InsideScatterer within a cylinder."""
    if inside_mask(x, z, cfg):
        raise InsideScatterer("(%.6g, %.6g) is inside a cylinder" % (x, z))
    val = source_field(pt, cfg, e_left, e_right, [x], [z], tol)[0]
    if incident is not None:
        val += incident(x, z)
    return complex(val)


def _fill(pt, cfg, e_left, e_right, grid, incident, meta, tol):
    grid = grid or GridSpec()
    x, z = grid.axes(cfg.h)
    X, Z = np.meshgrid(x, z, indexing="ij")
    mask = inside_mask(X, Z, cfg)
    vals = np.full(X.shape, np.nan + 0j)
    ok = ~mask
    v = source_field(pt, cfg, e_left, e_right, X[ok], Z[ok], tol)
    if incident is not None:
        v = v + incident(X[ok], Z[ok])
    vals[ok] = v
    M, _ = exp_window(pt.k, pt.kx, max(NEAR_LINE, 1e-3), tol)
    meta = dict(meta, kx=pt.kx, k=pt.k, R=cfg.R, eps_c=cfg.eps_c, a=cfg.a, h=cfg.h,
                e_left=[e_left.real, e_left.imag], e_right=[e_right.real, e_right.imag],
                tol=tol, window_far=M, window_near=NEAR_WINDOW, near_line=NEAR_LINE)
    return FieldGrid(x, z, vals, mask, meta)


def bound_field(record, cfg_base, grid=None, tol=1e-12):
    """Eigenfield of a bound state normalized by E(0, -h) = 1."""
    cfg = ArrayConfig(cfg_base.R, cfg_base.eps_c, record.a, record.h)
    pt = BlochPoint(record.k, record.kx)
    e_right, e_left = cylinder_fields(pt, cfg, tol)
    meta = {"kind": "bound", "record": record.to_dict()}
    return _fill(pt, cfg, e_left, e_right, grid, None, meta, tol)


def scattering_field(sol, grid=None, tol=1e-12):
    """Incident wave plus the field radiated by both cylinder arrays."""
    meta = {"kind": "scattering", "direction": sol.direction.value,
            "flux_error": sol.flux_error}
    return _fill(sol.pt, sol.cfg, sol.e_left, sol.e_right, grid, sol.incident, meta, tol)


def open_channel_amplitudes(pt, cfg, e_left, e_right, side=+1):
    """Coefficients of the open channels of the radiated field for |z| > h.

    side=+1 gives the upward waves above the array, -1 the downward ones
    below.  They all vanish for a bound state in the continuum.
    """
    d0 = delta0(pt.k, cfg)
    out = {}
    m_lo = math.ceil((-pt.k - pt.kx) / TWO_PI)
    m_hi = math.floor((pt.k - pt.kx) / TWO_PI)
    for m in range(m_lo, m_hi + 1):
        kxm = pt.kx + TWO_PI * m
        if pt.k * pt.k < kxm * kxm:
            continue
        kzm = math.sqrt(pt.k * pt.k - kxm * kxm)
        ph = np.exp(-1j * cfg.a * kxm)
        out[m] = complex(2j * math.pi * d0 / kzm * (
            e_right * ph * np.exp(-1j * side * cfg.h * kzm)
            + e_left * np.exp(1j * side * cfg.h * kzm)))
    return out


# --------------------------------------------------------------------------
# export

def export_csv(grid, path):
    """Write ``x,z,re,im,abs`` rows, z varying fastest, 17 significant digits.

    Samples inside a cylinder are written as ``nan``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "z", "re", "im", "abs"])
        for i, xv in enumerate(grid.x):
            for j, zv in enumerate(grid.z):
                e = grid.values[i, j]
                w.writerow([_fmt(xv), _fmt(zv), _fmt(e.real), _fmt(e.imag), _fmt(abs(e))])


def _fmt(v):
    v = float(v)
    return "nan" if math.isnan(v) else "%.17g" % v


def export_sidecar(grid, path, extra=None):
    meta = dict(grid.meta)
    meta.update({"nx": int(grid.x.size), "nz": int(grid.z.size),
                 "x_range": [float(grid.x[0]), float(grid.x[-1])],
                 "z_range": [float(grid.z[0]), float(grid.z[-1])],
                 "inside_count": int(grid.inside.sum())})
    if extra:
        meta.update(extra)
    with open(path, "w") as fh:
        json.dump(_jsonable(meta), fh, indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "value") and hasattr(obj, "name"):
        return obj.value
    return obj


__all__ = ["GridSpec", "FieldGrid", "array_sum", "inside_mask", "source_field",
           "field_at", "bound_field", "scattering_field", "open_channel_amplitudes",
           "export_csv", "export_sidecar"]
