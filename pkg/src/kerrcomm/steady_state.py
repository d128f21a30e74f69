"""Self-consistent steady-state mean fields and operating-point construction.

The stationary amplitudes solve, with q = (g_c|c|^2 - g_m|m|^2)/omega_b and
Delta_k = 2 K0 |m|^2,

    [kappa_m + i(Delta_m + g_m q + Delta_k) + g_am^2/(kappa_a + i Delta_a)] <m> = E_m
    [kappa_c + i(Delta_c - g_c q)] <c> = E_c
    <a> = -i g_am <m> / (kappa_a + i Delta_a),   <p> = 0.

Full complex denominators are kept throughout (the decay-free form that
drops the kappas is reported as a per-branch deviation diagnostic, not
used for solving).  Two independent solution methods ship:

* polynomial: |<m>|^2 and |<c>|^2 obey a bivariate polynomial system; the
  optical variable is eliminated exactly (Sylvester resultant) and the
  remaining univariate polynomial is solved by companion-matrix roots,
  enumerating every branch including unstable ones;
* damped fixed-point iteration from several starting corners, which finds
  the attracting branches and serves as the cross-check oracle.

Every returned branch is Newton-polished to a relative residual of the
five stationary relations below RESIDUAL_TOL.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .core import OperatingPoint, SystemParams, occupations, to_angular
from .dynamics import build_drift, is_stable

RESIDUAL_TOL = 1e-10          # relative, all five stationary relations
CROSS_CHECK_TOL = 1e-8        # relative agreement in |m|^2 between methods
_DEDUPE_TOL = 1e-6
_IMAG_TOL = 1e-7


class NoSteadyStateError(RuntimeError):
    """No real non-negative branch found (inconsistent parameters)."""


@dataclass(frozen=True)
class MeanFields:
    a_ss: complex
    m_ss: complex
    c_ss: complex
    q_ss: float
    p_ss: float = 0.0


@dataclass(frozen=True)
class Branch:
    fields: MeanFields
    stable: bool
    residual: float             # max relative residual of the 5 relations
    decay_free_rel_dev: float   # |m|^2 deviation from the decay-free form


@dataclass(frozen=True)
class BranchSet:
    branches: tuple
    selected: int

    @property
    def selected_branch(self) -> Branch:
        return self.branches[self.selected]


def kerr_shift(K0, m_magnitude_sq):
    """Kerr frequency shift 2*K0*|<m>|^2 (same units as K0, sign of K0)."""
    if m_magnitude_sq < 0.0:
        raise ValueError("magnon population |<m>|^2 must be >= 0")
    return 2.0 * K0 * m_magnitude_sq


# ---------------------------------------------------------------------------
# normalized scalar problem
#
# Everything below works in units of omega_b (ratios of ordinary
# frequencies; the 2*pi factors cancel identically in x, y, q).
# x = |<m>|^2, y = |<c>|^2.


class _Scaled:
    """Normalized parameter bundle plus amplitude maps."""

    def __init__(self, p: SystemParams, drive_scale: float = 1.0):
        wb = p.omega_b
        if wb <= 0.0:
            raise ValueError("omega_b must be positive for the mean-field solve")
        if p.g_am > 0.0 and p.delta_a == 0.0:
            raise ValueError(
                "delta_a = 0 with g_am != 0: the eliminated-photon expression "
                "is singular; physical mode rejects this point")
        self.km = p.kappa_m / wb
        self.ka = p.kappa_a / wb
        self.kc = p.kappa_c / wb
        self.Dm = p.delta_m / wb
        self.Da = p.delta_a / wb
        self.Dc = p.delta_c / wb
        self.gam = p.g_am / wb
        self.gm = p.g_m / wb
        self.gc = p.g_c / wb
        self.K0 = p.K0 / wb
        self.Em = drive_scale * p.E_m / wb
        self.Ec = p.E_c / wb
        den_a = self.ka ** 2 + self.Da ** 2
        if self.gam > 0.0:
            self.ra = self.gam ** 2 * self.ka / den_a
            self.ia = self.gam ** 2 * self.Da / den_a
        else:
            self.ra = 0.0
            self.ia = 0.0
        self.x_scale = self.Em ** 2 / max((self.km + self.ra) ** 2, 1e-30) \
            if self.Em > 0.0 else 1.0
        self.y_scale = self.Ec ** 2 / max(self.kc ** 2, 1e-30) \
            if self.Ec > 0.0 else 1.0

    def q_of(self, x, y):
        return self.gc * y - self.gm * x

    def m_denominator(self, x, y):
        q = self.q_of(x, y)
        den = complex(self.km, self.Dm + self.gm * q + 2.0 * self.K0 * x)
        if self.gam > 0.0:
            den += self.gam ** 2 / complex(self.ka, self.Da)
        return den

    def c_denominator(self, x, y):
        q = self.q_of(x, y)
        return complex(self.kc, self.Dc - self.gc * q)

    def amplitude_map(self, x, y):
        """One pass of the self-consistency map (x, y) -> (|m|^2, |c|^2)."""
        xn = abs(self.Em / self.m_denominator(x, y)) ** 2 if self.Em > 0.0 else 0.0
        yn = abs(self.Ec / self.c_denominator(x, y)) ** 2 if self.Ec > 0.0 else 0.0
        return xn, yn


def _conv2(a, b):
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            if a[i, j] != 0.0:
                out[i:i + b.shape[0], j:j + b.shape[1]] += a[i, j] * b
    return out


def _build_polys(s: _Scaled):
    """Bivariate coefficient grids C[i, j] (x^i y^j) of the two relations.

    P1: x |m-denominator|^2 - Em^2 = 0, P2: y |c-denominator|^2 - Ec^2 = 0,
    with x, y measured in x_scale/y_scale units.
    """
    sx, sy = s.x_scale, s.y_scale
    # magnon: imaginary part is linear in (x, y)
    L = np.zeros((2, 2))
    L[0, 0] = s.Dm - s.ia
    L[1, 0] = (2.0 * s.K0 - s.gm ** 2) * sx
    L[0, 1] = s.gm * s.gc * sy
    B1 = _conv2(L, L)
    B1[0, 0] += (s.km + s.ra) ** 2
    C1 = np.zeros((B1.shape[0] + 1, B1.shape[1]))
    C1[1:, :] = sx * B1
    C1[0, 0] -= s.Em ** 2
    # cavity
    M = np.zeros((2, 2))
    M[0, 0] = s.Dc
    M[1, 0] = s.gc * s.gm * sx
    M[0, 1] = -s.gc ** 2 * sy
    B2 = _conv2(M, M)
    B2[0, 0] += s.kc ** 2
    C2 = np.zeros((B2.shape[0], B2.shape[1] + 1))
    C2[:, 1:] = sy * B2
    C2[0, 0] -= s.Ec ** 2
    return C1, C2


def _poly_degree(coeffs, tol=1e-14):
    m = np.abs(coeffs).max()
    if m == 0.0:
        return 0
    d = len(coeffs) - 1
    while d > 0 and abs(coeffs[d]) <= tol * m:
        d -= 1
    return d


def _real_nonneg_roots(coeffs):
    """Real roots >= 0 of a 1-D coefficient array (ascending powers)."""
    m = np.abs(coeffs).max()
    if m == 0.0:
        return []
    d = _poly_degree(coeffs)
    if d == 0:
        return []
    c = np.asarray(coeffs[:d + 1], float) / m
    roots = np.roots(c[::-1])  # companion-matrix eigenvalues
    out = []
    for r in roots:
        if abs(r.imag) <= _IMAG_TOL * max(1.0, abs(r.real)) and r.real > -1e-9:
            out.append(max(r.real, 0.0))
    return out


def _sylvester_det_x(C1, C2):
    """Resultant of P1, P2 with respect to y: a polynomial in x.

    Sylvester-matrix entries are polynomials in x; the determinant is
    expanded recursively with dense polynomial arithmetic (matrix order
    is at most 5 here).
    """
    def col(C, j):
        c = C[:, j]
        return c[:_poly_degree(c) + 1].copy() if np.any(c) else np.zeros(1)

    m1 = np.abs(C1).max() or 1.0
    m2 = np.abs(C2).max() or 1.0
    n1 = _ydeg(C1)
    n2 = _ydeg(C2)
    N = n1 + n2
    S = [[np.zeros(1) for _ in range(N)] for _ in range(N)]
    for r in range(n2):
        for k in range(n1 + 1):
            S[r][r + k] = col(C1, n1 - k) / m1
    for r in range(n1):
        for k in range(n2 + 1):
            S[n2 + r][r + k] = col(C2, n2 - k) / m2
    return _polydet(S)


def _ydeg(C, tol=1e-14):
    m = np.abs(C).max()
    d = C.shape[1] - 1
    while d > 0 and np.abs(C[:, d]).max() <= tol * m:
        d -= 1
    return d


def _polydet(S):
    n = len(S)
    if n == 1:
        return S[0][0]
    acc = np.zeros(1)
    for i in range(n):
        if not np.any(S[i][0]):
            continue
        minor = [[S[r][c] for c in range(1, n)] for r in range(n) if r != i]
        term = npoly.polymul(S[i][0], _polydet(minor))
        acc = npoly.polyadd(acc, -term if i % 2 else term)
    return acc


def _newton_polish(s: _Scaled, x, y, max_iter=40):
    """Newton on F(x,y) = (x,y) - amplitude_map(x,y), forward differences."""
    for _ in range(max_iter):
        fx, fy = s.amplitude_map(x, y)
        F = np.array([x - fx, y - fy])
        nrm = abs(F[0]) / max(abs(x), s.x_scale * 1e-12, 1e-300) \
            + abs(F[1]) / max(abs(y), s.y_scale * 1e-12, 1e-300)
        if nrm < 1e-14:
            break
        J = np.eye(2)
        hx = 1e-7 * max(abs(x), s.x_scale * 1e-9, 1e-250)
        hy = 1e-7 * max(abs(y), s.y_scale * 1e-9, 1e-250)
        gx, gy = s.amplitude_map(x + hx, y)
        J[0, 0] -= (gx - fx) / hx
        J[1, 0] -= (gy - fy) / hx
        gx, gy = s.amplitude_map(x, y + hy)
        J[0, 1] -= (gx - fx) / hy
        J[1, 1] -= (gy - fy) / hy
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            break
        x = max(x - step[0], 0.0)
        y = max(y - step[1], 0.0)
    return x, y


def _map_residual(s: _Scaled, x, y):
    fx, fy = s.amplitude_map(x, y)
    rx = abs(x - fx) / max(x, s.x_scale * 1e-9, 1e-300)
    ry = abs(y - fy) / max(y, s.y_scale * 1e-9, 1e-300)
    return max(rx, ry)


def _solve_poly_branches(s: _Scaled):
    """All (x, y) branches by exact elimination + companion-matrix roots."""
    C1, C2 = _build_polys(s)
    coupled = s.gm > 0.0 and s.gc > 0.0
    pairs = []
    if not coupled:
        # the two relations decouple; enumerate the cross product
        ys = _real_nonneg_roots(C2[0, :]) if s.Ec > 0.0 else [0.0]
        xs = _real_nonneg_roots(C1[:, 0]) if s.Em > 0.0 else [0.0]
        pairs = [(x, y) for x in xs for y in ys]
    else:
        res = _sylvester_det_x(C1, C2)
        for x in _real_nonneg_roots(res):
            c2_at_x = np.array([npoly.polyval(x, C2[:, j])
                                for j in range(C2.shape[1])])
            for y in _real_nonneg_roots(c2_at_x):
                v1 = npoly.polyval2d(x, y, C1)
                if abs(v1) <= 1e-4 * max(s.Em ** 2, 1e-300):
                    pairs.append((x, y))
    out = []
    for x, y in pairs:
        x, y = _newton_polish(s, x * s.x_scale, y * s.y_scale)
        if _map_residual(s, x, y) > 1e-9:
            continue  # spurious elimination artifact
        out.append((x, y))
    return _dedupe(out)


def _dedupe(pairs):
    res = []
    for x, y in sorted(pairs):
        dup = False
        for a, b in res:
            if abs(x - a) <= _DEDUPE_TOL * max(a, 1e-300) and \
               abs(y - b) <= _DEDUPE_TOL * max(b, 1e-300):
                dup = True
                break
        if not dup:
            res.append((x, y))
    return res


def _damped_iteration(s: _Scaled, x0, y0, alpha=0.35, max_iter=50000):
    x, y = x0, y0
    for _ in range(max_iter):
        fx, fy = s.amplitude_map(x, y)
        xn = (1.0 - alpha) * x + alpha * fx
        yn = (1.0 - alpha) * y + alpha * fy
        done = (abs(xn - x) <= 1e-14 * max(xn, 1e-300) and
                abs(yn - y) <= 1e-14 * max(yn, 1e-300))
        x, y = xn, yn
        if done:
            break
    return _newton_polish(s, x, y)


def _solve_fixed_point_branches(s: _Scaled):
    """Attracting branches by damped iteration from the four corners."""
    starts = [(0.0, 0.0), (s.x_scale, s.y_scale),
              (s.x_scale, 0.0), (0.0, s.y_scale)]
    found = []
    for x0, y0 in starts:
        for alpha in (0.35, 0.1):
            x, y = _damped_iteration(s, x0, y0, alpha=alpha)
            if _map_residual(s, x, y) < 1e-9:
                found.append((x, y))
                break
    return _dedupe(found)


# ---------------------------------------------------------------------------
# public API


def _fields_from_xy(p: SystemParams, s: _Scaled, x, y) -> MeanFields:
    m = s.Em / s.m_denominator(x, y) if s.Em > 0.0 else 0.0j
    c = s.Ec / s.c_denominator(x, y) if s.Ec > 0.0 else 0.0j
    a = -1j * s.gam * m / complex(s.ka, s.Da) if s.gam > 0.0 else 0.0j
    q = s.q_of(abs(m) ** 2, abs(c) ** 2)
    return MeanFields(a_ss=complex(a), m_ss=complex(m), c_ss=complex(c),
                      q_ss=float(q), p_ss=0.0)


def steady_state_residual(params: SystemParams, flds: MeanFields) -> float:
    """Max relative residual of the five stationary relations."""
    s = _Scaled(params)
    a = flds.a_ss
    m = flds.m_ss
    c = flds.c_ss
    q = flds.q_ss
    tiny = 1e-300
    # photon mode
    lhs = complex(s.ka, s.Da) * a + 1j * s.gam * m
    r1 = abs(lhs) / (abs(a) * (s.ka + abs(s.Da)) + s.gam * abs(m) + tiny) \
        if (abs(a) + s.gam * abs(m)) > 0.0 else 0.0
    # cavity mode
    lhs = complex(s.kc, s.Dc - s.gc * q) * c - s.Ec
    r2 = abs(lhs) / (abs(c) * (s.kc + abs(s.Dc - s.gc * q)) + s.Ec + tiny) \
        if (abs(c) + s.Ec) > 0.0 else 0.0
    # momentum
    r3 = abs(flds.p_ss)
    # displacement
    bal = s.gc * abs(c) ** 2 - s.gm * abs(m) ** 2
    r4 = abs(q - bal) / (abs(q) + abs(s.gc) * abs(c) ** 2
                         + abs(s.gm) * abs(m) ** 2 + tiny) \
        if (abs(q) + abs(bal)) > 0.0 else 0.0
    # magnon mode (non-eliminated form, photon amplitude explicit)
    dk = 2.0 * s.K0 * abs(m) ** 2
    lhs = complex(s.km, s.Dm + s.gm * q + dk) * m + 1j * s.gam * a - s.Em
    scale = abs(m) * (s.km + abs(s.Dm + s.gm * q + dk)) \
        + s.gam * abs(a) + s.Em + tiny
    r5 = abs(lhs) / scale if (abs(m) + s.Em) > 0.0 else 0.0
    return max(r1, r2, r3, r4, r5)


def _decay_free_dev(s: _Scaled, x, y):
    """Relative |m|^2 deviation from the decay-free eliminated form."""
    if s.Em == 0.0 or x == 0.0:
        return 0.0
    q = s.q_of(x, y)
    dm_eff = s.Dm + s.gm * q
    dk = 2.0 * s.K0 * x
    den = s.gam ** 2 - (dm_eff + dk) * s.Da
    if den == 0.0 or s.Da == 0.0:
        return math.inf
    m_approx = 1j * s.Em * s.Da / den
    return abs(x - abs(m_approx) ** 2) / x


def solve_mean_fields(params: SystemParams, cross_check: bool = False,
                      drive_scale: float = 1.0) -> BranchSet:
    """Enumerate all steady-state branches and select the adiabatic one.

    Branch enumeration is by the polynomial/elimination method; with
    cross_check=True the damped fixed-point method is run as well and any
    disagreement beyond CROSS_CHECK_TOL raises.  Branch selection follows a
    drive ramp: the branch continuously connected to the undriven solution
    as E_m ramps from zero (experimental adiabatic switch-on).

    drive_scale multiplies E_m (used internally by the ramp; leave at 1).
    """
    s = _Scaled(params, drive_scale)
    pairs = _solve_poly_branches(s)
    if not pairs:
        raise NoSteadyStateError(
            "no real non-negative steady-state branch found")
    if cross_check:
        fp = _solve_fixed_point_branches(s)
        for xf, yf in fp:
            best = min(abs(xf - x) / max(x, xf, 1e-300) for x, _ in pairs)
            if best > CROSS_CHECK_TOL:
                raise RuntimeError(
                    "mean-field cross-check failed: fixed point found "
                    f"|m|^2 = {xf:.12e}, nearest polynomial branch differs "
                    f"by {best:.3e} (> {CROSS_CHECK_TOL:g} relative)")
    branches = []
    for x, y in pairs:
        flds = _fields_from_xy(params, s, x, y)
        op = operating_point_from_fields(params, flds)
        stab = is_stable(build_drift(op), omega_b=op.omega_b)
        branches.append(Branch(
            fields=flds,
            stable=stab.stable,
            residual=steady_state_residual(params, flds),
            decay_free_rel_dev=_decay_free_dev(s, x, y),
        ))
    selected = _select_by_ramp(params, s, pairs) if len(pairs) > 1 else 0
    return BranchSet(branches=tuple(branches), selected=selected)


def _select_by_ramp(params, s_full, pairs, steps=60):
    """Index of the branch reached by adiabatically ramping E_m from zero."""
    x, y = 0.0, 0.0
    for t in np.linspace(1.0 / steps, 1.0, steps):
        st = _Scaled(params, drive_scale=t)
        x, y = _damped_iteration(st, x, y, alpha=0.3, max_iter=20000)
    rel = [abs(x - xb) / max(xb, x, 1e-300) for xb, _ in pairs]
    return int(np.argmin(rel))


def operating_point_from_fields(params: SystemParams,
                                flds: MeanFields) -> OperatingPoint:
    """Linearization point from a steady-state branch.

    Uses the magnitude convention G_m = sqrt(2) g_m |<m>|,
    G_c = sqrt(2) g_c |<c>| (steady-state phases absorbed into local
    rotations) and evaluates occupations at the bare mode frequencies.
    """
    q = flds.q_ss
    m_sq = abs(flds.m_ss) ** 2
    n_a, n_m, n_b, n_c = occupations(
        params.temperature, params.omega_a, params.omega_m,
        params.omega_b, params.omega_c)
    return OperatingPoint(
        delta_a=to_angular(params.delta_a),
        delta_m_eff=to_angular(params.delta_m + params.g_m * q),
        delta_c_eff=to_angular(params.delta_c - params.g_c * q),
        delta_k=kerr_shift(to_angular(params.K0), m_sq),
        G_m=math.sqrt(2.0) * to_angular(params.g_m) * abs(flds.m_ss),
        G_c=math.sqrt(2.0) * to_angular(params.g_c) * abs(flds.c_ss),
        g_am=to_angular(params.g_am),
        kappa_a=to_angular(params.kappa_a),
        kappa_m=to_angular(params.kappa_m),
        kappa_c=to_angular(params.kappa_c),
        gamma_b=to_angular(params.gamma_b),
        omega_b=to_angular(params.omega_b),
        n_a=n_a, n_m=n_m, n_b=n_b, n_c=n_c,
    )


def operating_point_direct(omega_b, *, delta_a, delta_m_eff, delta_c_eff,
                           delta_k, G_m, G_c, g_am, kappa_a, kappa_m,
                           kappa_c, gamma_b, n_a=0.0, n_m=0.0, n_b=0.0,
                           n_c=0.0) -> OperatingPoint:
    """Operating point from effective quantities, bypassing the mean-field solve.

    omega_b is ordinary (Hz); every other rate/detuning argument is a ratio
    in units of omega_b, matching the way scan figures are labelled.
    Occupations are taken verbatim.
    """
    wb = to_angular(omega_b)
    return OperatingPoint(
        delta_a=delta_a * wb,
        delta_m_eff=delta_m_eff * wb,
        delta_c_eff=delta_c_eff * wb,
        delta_k=delta_k * wb,
        G_m=G_m * wb, G_c=G_c * wb, g_am=g_am * wb,
        kappa_a=kappa_a * wb, kappa_m=kappa_m * wb, kappa_c=kappa_c * wb,
        gamma_b=gamma_b * wb, omega_b=wb,
        n_a=n_a, n_m=n_m, n_b=n_b, n_c=n_c,
    )


def decay_free_magnon_amplitude(params: SystemParams,
                                flds: MeanFields) -> complex:
    """Magnon amplitude in the decay-free eliminated form, for comparison."""
    s = _Scaled(params)
    x = abs(flds.m_ss) ** 2
    q = flds.q_ss
    dk = 2.0 * s.K0 * x
    den = s.gam ** 2 - (s.Dm + s.gm * q + dk) * s.Da
    if den == 0.0:
        return complex(math.inf, 0.0)
    return 1j * s.Em * s.Da / den
