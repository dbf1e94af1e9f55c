"""Diffraction-channel bookkeeping for a grating of unit period.

Channel ``m`` carries the in-plane wavenumber ``kx + 2*pi*m``.  It is open
(propagating) when ``k**2 >= (kx + 2*pi*m)**2`` and closed (evanescent)
otherwise, in which case ``k_z = i*q`` with ``q > 0``.
"""
from dataclasses import dataclass
from enum import Enum
import math

import numpy as np

TWO_PI = 2.0 * math.pi


def reduce_kx(kx):
    """Map a Bloch wavenumber to the interval (-pi, pi]."""
    r = math.remainder(kx, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


@dataclass(frozen=True)
class BlochPoint:
    """Spectral pair (k, kx).  ``kx`` is reduced on construction."""

    k: float
    kx: float

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("k must be positive, got %r" % (self.k,))
        object.__setattr__(self, "k", float(self.k))
        object.__setattr__(self, "kx", reduce_kx(float(self.kx)))

    def canonical(self):
        """Same point with kx folded to [0, pi] (the determinant is even in kx)."""
        return BlochPoint(self.k, abs(self.kx))


@dataclass(frozen=True)
class ChannelWavenumber:
    m: int
    value: complex
    is_open: bool
    q: float | None = None


class RegionKind(Enum):
    BELOW = "below"
    CONTINUUM = "continuum"


@dataclass(frozen=True)
class RegionTag:
    kind: RegionKind
    count: int = 0

    @property
    def label(self):
        if self.kind is RegionKind.BELOW:
            return "below"
        return "continuum-%d" % self.count


def kz_values(k, kx, ms):
    """Vectorized k_{z,m} on the principal branch (closed channels -> i*q)."""
    ms = np.asarray(ms)
    d = k * k - (kx + TWO_PI * ms) ** 2
    out = np.empty(ms.shape, dtype=complex)
    pos = d >= 0
    out[pos] = np.sqrt(d[pos])
    out[~pos] = 1j * np.sqrt(-d[~pos])
    return out


def channel_wavenumber(pt, m):
    d = pt.k * pt.k - (pt.kx + TWO_PI * m) ** 2
    if d >= 0:
        return ChannelWavenumber(m, complex(math.sqrt(d), 0.0), True)
    q = math.sqrt(-d)
    return ChannelWavenumber(m, complex(0.0, q), False, q)


def open_channels(pt):
    """Sorted indices m with k**2 >= (kx + 2*pi*m)**2."""
    lo = math.ceil((-pt.k - pt.kx) / TWO_PI) - 1
    hi = math.floor((pt.k - pt.kx) / TWO_PI) + 1
    return [m for m in range(lo, hi + 1)
            if pt.k * pt.k >= (pt.kx + TWO_PI * m) ** 2]


def thresholds(kx, n_max):
    """Threshold energies E_0 <= E_-1 <= E_1 <= E_-2 <= ... up to |n| = n_max."""
    return [e for _, e in threshold_table(kx, n_max)]


def threshold_table(kx, n_max):
    """Labelled thresholds as (signed index, energy) pairs in ascending order."""
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    a = abs(reduce_kx(kx))
    rows = [(0, a * a)]
    for n in range(1, n_max + 1):
        rows.append((-n, (TWO_PI * n - a) ** 2))
        rows.append((n, (TWO_PI * n + a) ** 2))
    return rows


def classify(pt):
    count = len(open_channels(pt))
    if count == 0:
        return RegionTag(RegionKind.BELOW, 0)
    return RegionTag(RegionKind.CONTINUUM, count)
