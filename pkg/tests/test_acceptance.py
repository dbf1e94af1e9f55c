"""Acceptance criteria 1-10.

Each test evaluates every part of one criterion at the stated tolerance,
records a single PASS/FAIL line (shown in the terminal summary) and then
asserts.  Parts that cannot be met are left failing; see the decisions
ledger for the analysis.
"""
import math
import time

import numpy as np
import pytest

from bicgrate.bound_states import (
    GATE_C_I, GATE_C_II, S_CONST, approx_k_plus, approx_kx_II, curve_constant,
    diophantine_point, dpsi_n_I_dk, dpsi_n_II_dk, enumerate_kx_II, eps_on_curve,
    find_below, find_continuum_II, phase_crossings, phase_infinity, psi_n_I, psi_n_II,
    psi_pm_below, two_channel_residuals,
)
from bicgrate.channels import TWO_PI, BlochPoint, classify
from bicgrate.fields import GridSpec, bound_field
from bicgrate.lattice_sums import ArrayConfig, c_sequence, delta0, determinant, phi0
from bicgrate.oracles import (
    EULER, diag_identity_rhs, fd_derivative5, fit_lorentzian, hankel_diag_direct,
    hankel_sum_direct,
)
from bicgrate.fields import array_sum
from bicgrate.scattering import (
    Direction, Family, amplification_sweep, resonance_at, solve, specular,
)
from bicgrate.errors import SingularSystem, ThresholdSingularity
from conftest import report


# --------------------------------------------------------------------------
# 1. lattice-sum identities against the regularized direct Hankel sums

def test_criterion_01_lattice_identities():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_off, worst_diag = 0.0, 0.0
    for _ in range(5):
        k = rng.uniform(0.5, 12.0)
        kx = rng.uniform(-math.pi, math.pi)
        x = rng.uniform(-0.5, 0.5)
        z = rng.uniform(0.05, 1.5) * rng.choice([-1.0, 1.0])
        direct = hankel_sum_direct(BlochPoint(k, kx), (x, z))
        worst_off = max(worst_off, abs(direct - array_sum(k, kx, [x], [z])[0]))
    cfg = ArrayConfig(0.1, 1.5)
    for _ in range(10):
        k = rng.uniform(0.5, 12.0)
        kx = rng.uniform(-math.pi, math.pi)
        pt = BlochPoint(k, kx)
        # library on-axis sum: phi0 minus its self and coupling terms
        lib = phi0(pt, cfg) - 1j / (TWO_PI * delta0(k, cfg)) - 0.5 \
            - 1j / math.pi * (EULER + math.log(k * cfg.R / 2) - 0.5)
        worst_diag = max(worst_diag, abs(hankel_diag_direct(pt) - lib),
                         abs(diag_identity_rhs(k, kx) - lib))
    elapsed = time.perf_counter() - t0
    ok = worst_off < 1e-6 and worst_diag < 1e-6 and elapsed < 30
    report(1, ok, "off-lattice %.2e, on-axis %.2e, %.1f s" % (worst_off, worst_diag, elapsed))
    assert ok


# --------------------------------------------------------------------------
# 2. bound state below the continuum

def _k_plus(R):
    cfg = ArrayConfig(R, 1.5, 0.0, 1.0)
    rec = [r for r in find_below(cfg, math.pi) if r.family == "plus"][0]
    return rec, cfg


def test_criterion_02_below_continuum():
    rec, cfg = _k_plus(0.1)
    psi = psi_pm_below(cfg, BlochPoint(rec.k, math.pi))[0]
    approx = approx_k_plus(cfg, math.pi)
    # stated baseline: pi - 8 pi delta0(pi)^2
    d = (0.5 * math.pi * 0.1) ** 2 * 0.5
    baseline = math.pi - 8 * math.pi * d * d
    rel = abs(rec.k - approx) / approx
    rec2, cfg2 = _k_plus(0.05)
    gap1 = abs(rec.k - approx)
    gap2 = abs(rec2.k - approx_k_plus(cfg2, math.pi))
    parts = {
        "residual": abs(psi) < 1e-10,
        "baseline": abs(approx - 3.13777) < 5e-6 and abs(baseline - approx) < 1e-12,
        "within 0.1%": rel < 1e-3,
        "halving R": gap1 / gap2 >= 4,
    }
    ok = all(parts.values())
    report(2, ok, "k+=%.8f approx=%.6f rel=%.3f%% |psi+|=%.1e gap ratio=%.1f failed=%s"
           % (rec.k, approx, 100 * rel, abs(psi), gap1 / gap2,
              [p for p, v in parts.items() if not v]))
    assert ok


# --------------------------------------------------------------------------
# 3. one open channel, kx = 0

def _decoupling(rec, cfg_base):
    from bicgrate.bound_states import cylinder_fields
    cfg = ArrayConfig(cfg_base.R, cfg_base.eps_c, rec.a, rec.h)
    pt = BlochPoint(rec.k, rec.kx)
    e_plus, e_minus = cylinder_fields(pt, cfg)
    kz = math.sqrt(rec.k ** 2 - rec.kx ** 2)
    up = abs(np.exp(1j * rec.h * kz) * e_minus + np.exp(-1j * rec.h * kz) * e_plus)
    down = abs(np.exp(-1j * rec.h * kz) * e_minus + np.exp(1j * rec.h * kz) * e_plus)
    return max(up, down)


def _field_checks(rec, cfg_base):
    """(z-parity residual, max |E| lies within 2R of a cylinder axis)."""
    h = rec.h
    grid = GridSpec(x_range=(-0.5, 0.5), nx=100, z_range=(-h - 1.0, h + 1.0), nz=201)
    g = bound_field(rec, cfg_base, grid)
    v = g.values
    sign = 1 if rec.indices[0] % 2 == 1 else -1
    mirror = v[:, ::-1]
    ok = np.isfinite(v) & np.isfinite(mirror)
    parity = float(np.max(np.abs(v[ok] - sign * mirror[ok])) / np.nanmax(np.abs(v)))
    A = np.abs(v)
    i, j = np.unravel_index(np.nanargmax(A), A.shape)
    x, z = g.x[i], g.z[j]
    dist = min(math.hypot(x, z + h), math.hypot(x, z - h))
    return parity, dist < 2 * cfg_base.R, (x, z, float(A[i, j]))


def test_criterion_03_continuum_one(c1_records, base_cfg):
    d2pi = delta0(TWO_PI, base_cfg)
    h_unit = 0.25 * (1 + 2 * d2pi ** 2)
    k_ref = TWO_PI - 4 * math.pi * d2pi ** 2
    assert abs(h_unit - 0.25122) < 1e-5 and abs(k_ref - 6.25259) < 1e-5
    found = {r.indices[0]: r for r in c1_records}
    parts = {"records n=1..4": sorted(found) == [1, 2, 3, 4]}
    notes = []
    for n, r in sorted(found.items()):
        dh = abs(r.h - n * h_unit) / (n * h_unit)
        dk = abs(r.k - k_ref) / k_ref
        dec = _decoupling(r, base_cfg)
        parity, hot, peak = _field_checks(r, base_cfg)
        parts["h%d within 1%%" % n] = dh < 1e-2
        parts["k%d within 0.1%%" % n] = dk < 1e-3
        parts["det%d" % n] = r.residual_delta < 1e-8
        parts["decoupling%d" % n] = dec < 1e-8
        parts["z-parity%d" % n] = parity < 1e-8
        parts["hot spot%d" % n] = hot
        notes.append("n=%d k=%.6f(%.2f%%) h=%.6f(%.2f%%) |det|=%.1e dec=%.1e peak=(%.2f,%.2f)"
                     % (n, r.k, 100 * dk, r.h, 100 * dh, r.residual_delta, dec,
                        peak[0], peak[1]))
    ok = all(parts.values())
    report(3, ok, "; ".join(notes) + " failed=%s" % [p for p, v in parts.items() if not v])
    assert ok


# --------------------------------------------------------------------------
# 4. existence-gate constants

def test_criterion_04_gate_constants():
    parts = {
        "C (one channel)": abs(GATE_C_I - 5.846) <= 1e-3,
        "C (two channels)": abs(GATE_C_II - 2.016) <= 1e-3,
        "s": abs(S_CONST - 0.691) <= 1e-3,
    }
    ok = all(parts.values())
    report(4, ok, "C1=%.6f C2=%.6f s=%.6f" % (GATE_C_I, GATE_C_II, S_CONST))
    assert ok


# --------------------------------------------------------------------------
# 5. flux conservation

def _random_case(rng, region):
    while True:
        kx = rng.uniform(-math.pi, math.pi)
        a = abs(kx)
        lo, hi = (a, TWO_PI - a) if region == 1 else (TWO_PI - a, TWO_PI + a)
        if hi - lo < 1e-3:
            continue
        k = rng.uniform(lo + 1e-6 * (hi - lo), hi - 1e-6 * (hi - lo))
        R = rng.uniform(0.02, 0.3)
        cfg = ArrayConfig(R, rng.uniform(1.1, 5.0), rng.uniform(0, 0.5),
                          rng.uniform(R + 0.05, 2.0))
        return cfg, BlochPoint(k, kx)


def test_criterion_05_flux():
    rng = np.random.default_rng(505)
    worst, n = 0.0, 0
    while n < 1000:
        cfg, pt = _random_case(rng, 1 + n % 2)
        direction = Direction.FROM_BELOW if (n // 2) % 2 == 0 else Direction.FROM_ABOVE
        try:
            sol = solve(cfg, pt, direction)
        except (SingularSystem, ThresholdSingularity):
            continue
        assert len(sol.refl) == 1 + n % 2
        worst = max(worst, abs(sol.flux_error))
        n += 1
    ok = worst < 1e-10
    report(5, ok, "max |flux error| = %.2e over %d solves" % (worst, n))
    assert ok


# --------------------------------------------------------------------------
# 6. Breit-Wigner line shape near the n = 1 bound state

def test_criterion_06_breit_wigner(bic_linearization, base_cfg):
    lin = bic_linearization
    kx = lin.kx
    fits = []
    for dh in (-0.02, 0.02):
        cfg = ArrayConfig(base_cfg.R, base_cfg.eps_c, 0.0, lin.h + dh)
        res = resonance_at(cfg, kx, Family.PSI_PLUS, near=lin.k)
        ks = res.k_r + res.gamma * np.linspace(-6, 6, 61)
        y = [specular(cfg, BlochPoint(k, kx)) for k in ks]
        k0, G, _, _ = fit_lorentzian(ks, y)
        fits.append((dh, res.gamma, G, abs(G - res.gamma) / res.gamma))
    steps = np.logspace(-2, -3, 10)
    mono = True
    gammas = {}
    for s in (-1, 1):
        g = []
        for dh in s * steps:
            cfg = ArrayConfig(base_cfg.R, base_cfg.eps_c, 0.0, lin.h + dh)
            g.append(resonance_at(cfg, kx, Family.PSI_PLUS, near=lin.k,
                                  bracket=(lin.k - 0.05, lin.k + 0.05)).gamma)
        gammas[s] = g
        mono &= all(b < a for a, b in zip(g, g[1:])) and g[-1] < 0.05 * g[0]
    ok = all(f[3] < 0.05 for f in fits) and mono
    report(6, ok, "fit/closed-form: %s; gamma(1e-2)=%.2e -> gamma(1e-3)=%.2e monotone=%s"
           % (", ".join("dh=%+.2f %.2f%%" % (f[0], 100 * f[3]) for f in fits),
              gammas[1][0], gammas[1][-1], mono))
    assert ok


# --------------------------------------------------------------------------
# 7. near-field amplification and the principal-part approximation

def test_criterion_07_amplification(bic_linearization, base_cfg):
    lin = bic_linearization
    kx = lin.kx
    dhs = np.logspace(-4, -2, 9)
    slopes = []
    for s in (-1, 1):
        samples = amplification_sweep(base_cfg, kx, 1, list(s * dhs))
        e = np.array([p.field_abs for p in samples])
        slopes.append(np.polyfit(np.log(dhs), np.log(e), 1)[0])
    worst = 0.0
    grid = np.linspace(-1e-3, 1e-3, 9)
    for dh in grid:
        for dk in grid:
            if dh == 0 and dk == 0:
                continue
            cfg = ArrayConfig(base_cfg.R, base_cfg.eps_c, 0.0, lin.h + dh)
            try:
                exact = solve(cfg, BlochPoint(lin.k + dk, kx)).refl[0]
            except SingularSystem:
                continue
            approx = lin.r0_principal(dh, dk)
            worst = max(worst, abs(approx - exact) / abs(exact))
    ok = all(abs(sl + 1) <= 0.1 for sl in slopes) and worst < 0.05
    report(7, ok, "slopes %s, principal part max rel err %.2e"
           % (["%.4f" % s for s in slopes], worst))
    assert ok


# --------------------------------------------------------------------------
# 8. two open channels

def test_criterion_08_continuum_two(base_cfg):
    baseline = approx_kx_II(3, 4, base_cfg)
    recs = find_continuum_II(base_cfg, 0.0, 3, 4)
    hit = [r for r in recs if r.indices == (3, 4)]
    # the unconstrained crossing phi_3 = 4 pi, used to report why no record exists
    cross = dict(phase_crossings(3, 0.0, base_cfg, 4))
    notes = ["baseline kx=%.5f" % baseline]
    parts = {"baseline value": abs(baseline - 1.2483) < 1e-4, "record exists": bool(hit)}
    if hit:
        r = hit[0]
        parts["kx within 2%"] = abs(r.kx - baseline) / baseline < 0.02
        parts["system residual"] = r.extra["system_residual"] < 1e-8
        notes.append("record kx=%.6f res=%.1e" % (r.kx, r.extra["system_residual"]))
    elif 4 in cross:
        kx = cross[4]
        from bicgrate.bound_states import solve_psi_n
        k = solve_psi_n(3, kx, 0.0, base_cfg, 2)[0]
        h = 3 * math.pi / (2 * math.sqrt(k * k - (TWO_PI - kx) ** 2))
        r1, r2 = two_channel_residuals(ArrayConfig(0.1, 1.5, 0.0, h), BlochPoint(k, kx))
        notes.append("crossing kx=%.6f (%.2f%%) has system residual %.2e"
                     % (kx, 100 * abs(kx - baseline) / baseline, max(abs(r1), abs(r2))))
    # odd family index 2n+1 = 21
    counts = [len(enumerate_kx_II(21, 0.5, 1.5, base_cfg)) / 21]
    target = phase_infinity(0.5, base_cfg) - phase_infinity(1.5, base_cfg)
    parts["slope test"] = abs(counts[-1] - target) <= 0.1 * abs(target)
    notes.append("count/(2n+1) at 21 = %.4f vs %.4f" % (counts[-1], target))
    ok = all(parts.values())
    report(8, ok, "; ".join(notes) + " failed=%s" % [p for p, v in parts.items() if not v])
    assert ok


# --------------------------------------------------------------------------
# 9. monotonicity and the c_m ratio bound

def test_criterion_09_monotonicity():
    rng = np.random.default_rng(909)
    worst_rel, all_neg = 0.0, True
    for region in (1, 2):
        for _ in range(100):
            n = int(rng.integers(1, 7))
            cfg = ArrayConfig(rng.uniform(0.02, 0.3), rng.uniform(1.1, 5.0))
            if region == 1:
                kx = rng.uniform(0, 0.95 * math.pi)
                lo, hi = kx, TWO_PI - kx
                a = rng.uniform(0, 0.5)
                f, df = psi_n_I, dpsi_n_I_dk
            else:
                kx = rng.uniform(0.05 * math.pi, math.pi)
                lo, hi = TWO_PI - kx, TWO_PI + kx
                a = float(rng.choice([0.0, 0.5]))
                f, df = psi_n_II, dpsi_n_II_dk
            k = rng.uniform(lo + 0.02 * (hi - lo), hi - 0.02 * (hi - lo))
            an = df(n, k, kx, a, cfg)
            fd = fd_derivative5(lambda x: f(n, x, kx, a, cfg), k, 1e-2 * min(k - lo, hi - k))
            all_neg &= an < 0
            worst_rel = max(worst_rel, abs(an - fd) / abs(an))
    ratio_ok = True
    for _ in range(20):
        kx = rng.uniform(0, math.pi)
        k = rng.uniform(kx, TWO_PI - kx)
        h = rng.uniform(0.1, 1.0)
        pt = BlochPoint(k, kx)
        for m in range(1, 51):
            if c_sequence(pt, h, m + 1) > math.exp(-4 * math.pi * h) * c_sequence(pt, h, m):
                ratio_ok = False
    ok = all_neg and worst_rel < 1e-6 and ratio_ok
    report(9, ok, "all negative=%s, analytic vs difference %.2e, c_m ratio bound=%s"
           % (all_neg, worst_rel, ratio_ok))
    assert ok


# --------------------------------------------------------------------------
# 10. three and four open channels

def _count_open(k, kx):
    return sum(1 for m in range(-20, 21) if k * k >= (kx + TWO_PI * m) ** 2)


def test_criterion_10_diophantine():
    kx, h, k = diophantine_point((3, 2, 1))
    n_open = _count_open(k, kx)
    parts = {"(3,2,1) three channels": n_open == 3 and classify(BlochPoint(k, kx)).count == 3}
    n0, n1, n2, n3 = 2, 2, 1, 1
    parts["(2,2,1,1) constraint"] = 3 * n1 ** 2 + n2 ** 2 == 3 * n0 ** 2 + n3 ** 2
    notes = ["(3,2,1): kx=%.5f h=%.5f k=%.5f open=%d" % (kx, h, k, n_open)]
    best = None
    for a in (0.0, 0.5):
        for c in curve_constant((3, 2, 1), a):
            if best is None or abs(c.imag) < abs(best[1].imag):
                best = (a, c)
    a, c = best
    real_root = abs(c.imag) < 1e-9
    det = math.nan
    if real_root:
        R = 0.1
        eps = eps_on_curve(c.real, k, R)
        det = abs(determinant(BlochPoint(k, kx), ArrayConfig(R, eps, a, h)))
    parts["(R, eps_c) with |det| < 1e-8"] = real_root and det < 1e-8
    notes.append("curve constant (a=%g) = %.4f%+.4fi, |det|=%s" % (a, c.real, c.imag, det))
    ok = all(parts.values())
    report(10, ok, "; ".join(notes) + " failed=%s" % [p for p, v in parts.items() if not v])
    assert ok
