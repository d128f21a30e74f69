"""Parameter-scan engine: 1D/2D grids, paired Kerr signs, locus extraction.

All scan coordinates and fixed rates are in units of omega_b (the way scan
figures are labelled); temperature is in kelvin and mode frequencies, when
occupations are derived thermally, in Hz.  Grid points are independent work
items executed in contiguous chunks (optionally across threads); results are
gathered in axis-major order so identical specs produce identical tables
regardless of the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .core import occupations
from .dynamics import STABILITY_EPS_FACTOR
from .entanglement import EN_ZERO_TOL, ModePair, contrast_ratio

KERR_SIGNS = {"+": 1.0, "0": 0.0, "-": -1.0}

_RATE_KEYS = ("delta_a", "delta_m_eff", "delta_c_eff", "g_am", "G_m", "G_c",
              "kappa_a", "kappa_m", "kappa_c", "gamma_b")
_OCC_KEYS = ("n_a", "n_m", "n_b", "n_c")
_THERMAL_KEYS = ("temperature", "omega_a", "omega_m", "omega_b", "omega_c")
_AXIS_ONLY = ("delta_k", "temperature", "G_c_over_g_am")

_VEC_INDEX = {
    "delta_a": _kernels.P_DELTA_A,
    "delta_m_eff": _kernels.P_DELTA_M,
    "delta_c_eff": _kernels.P_DELTA_C,
    "delta_k": _kernels.P_DELTA_K,
    "g_am": _kernels.P_G_AM,
    "G_m": _kernels.P_G_M,
    "G_c": _kernels.P_G_C,
    "kappa_a": _kernels.P_KAPPA_A,
    "kappa_m": _kernels.P_KAPPA_M,
    "kappa_c": _kernels.P_KAPPA_C,
    "gamma_b": _kernels.P_GAMMA_B,
    "n_a": _kernels.P_N_A,
    "n_m": _kernels.P_N_M,
    "n_b": _kernels.P_N_B,
    "n_c": _kernels.P_N_C,
}

ORACLE_TOL = 1e-8  # max-abs covariance agreement, production vs Kronecker


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    num: int

    def __post_init__(self):
        if self.name not in _VEC_INDEX and self.name not in _AXIS_ONLY:
            raise ValueError(f"unknown sweep parameter {self.name!r}")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ValueError("axis range must be finite")
        if self.num < 2:
            raise ValueError(f"axis needs at least 2 points, got {self.num}")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)


@dataclass(frozen=True)
class SweepSpec:
    axis1: Axis
    axis2: Axis | None
    fixed: dict
    pairs: tuple
    kerr_signs: tuple = ("0",)
    kerr_magnitude: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(
            p if isinstance(p, ModePair) else ModePair(*p) for p in self.pairs))
        object.__setattr__(self, "kerr_signs", tuple(self.kerr_signs))
        if not self.pairs:
            raise ValueError("at least one mode pair is required")
        axes = [self.axis1] + ([self.axis2] if self.axis2 else [])
        names = [a.name for a in axes]
        if len(set(names)) != len(names):
            raise ValueError("axis1 and axis2 must sweep different parameters")
        if "delta_k" in names:
            if self.kerr_signs != ("axis",):
                raise ValueError(
                    "sweeping delta_k directly requires kerr_signs == ('axis',)")
        else:
            if not self.kerr_signs or \
                    any(s not in KERR_SIGNS for s in self.kerr_signs):
                raise ValueError(
                    f"kerr_signs must be drawn from {sorted(KERR_SIGNS)}")
            if len(set(self.kerr_signs)) != len(self.kerr_signs):
                raise ValueError("duplicate kerr signs")
            if self.kerr_magnitude < 0.0 or not math.isfinite(self.kerr_magnitude):
                raise ValueError("kerr_magnitude must be finite and >= 0")
        _validate_fixed(self.fixed, names)


def _validate_fixed(fixed, axis_names):
    known = set(_RATE_KEYS) | set(_OCC_KEYS) | set(_THERMAL_KEYS)
    for key in fixed:
        if key not in known:
            raise ValueError(f"unknown fixed parameter {key!r}")
        if key in axis_names:
            raise ValueError(f"{key!r} is both fixed and swept")
    for key in _RATE_KEYS:
        if key not in axis_names and key not in fixed:
            raise ValueError(f"missing fixed parameter {key!r}")
    has_occ = any(k in fixed for k in _OCC_KEYS)
    thermal = "temperature" in axis_names or "temperature" in fixed
    if has_occ and thermal:
        raise ValueError("give either explicit occupations or a temperature, not both")
    if not has_occ and not thermal:
        raise ValueError("occupations missing: give n_a..n_c or temperature "
                         "plus mode frequencies")
    if thermal:
        for key in ("omega_a", "omega_m", "omega_b", "omega_c"):
            if key not in fixed:
                raise ValueError(f"temperature-based occupations need {key!r} (Hz)")
    if has_occ:
        for key in _OCC_KEYS:
            if key not in fixed:
                raise ValueError(f"missing occupation {key!r}")


@dataclass
class SweepResult:
    spec: SweepSpec
    axis1_values: np.ndarray
    axis2_values: np.ndarray | None
    signs: tuple
    pair_labels: tuple
    en: np.ndarray            # (n1, n2, nsign, npair), NaN where unstable
    stable: np.ndarray        # (n1, n2, nsign) bool
    margin: np.ndarray        # stability margin, units of omega_b
    lyap_residual: np.ndarray
    chi: np.ndarray           # (n1, n2, npair), NaN where undefined
    oracle_max_dev: float = field(default=math.nan)


def _base_vector(fixed):
    base = np.zeros(_kernels.N_PARAMS)
    for key in _RATE_KEYS:
        if key in fixed:
            base[_VEC_INDEX[key]] = fixed[key]
    for key in _OCC_KEYS:
        if key in fixed:
            base[_VEC_INDEX[key]] = fixed[key]
    return base


def _thermal_occ(fixed, temperature):
    return occupations(temperature, fixed["omega_a"], fixed["omega_m"],
                       fixed["omega_b"], fixed["omega_c"])


def _apply_axis(vec, fixed, name, value):
    """Returns the temperature override if this axis is thermal, else None."""
    if name == "temperature":
        return value
    if name == "G_c_over_g_am":
        vec[_kernels.P_G_C] = value * vec[_kernels.P_G_AM]
        return None
    vec[_VEC_INDEX[name]] = value
    return None


def _build_params(spec: SweepSpec):
    v1 = spec.axis1.values()
    v2 = spec.axis2.values() if spec.axis2 else np.zeros(1)
    n1, n2, ns = len(v1), len(v2), len(spec.kerr_signs)
    base = _base_vector(spec.fixed)
    thermal = "temperature" in spec.fixed or spec.axis1.name == "temperature" \
        or (spec.axis2 and spec.axis2.name == "temperature")
    if thermal and "temperature" in spec.fixed:
        occ = _thermal_occ(spec.fixed, spec.fixed["temperature"])
        base[_kernels.P_N_A:_kernels.P_N_C + 1] = occ
    params = np.empty((n1 * n2 * ns, _kernels.N_PARAMS))
    idx = 0
    for i1 in range(n1):
        for i2 in range(n2):
            vec0 = base.copy()
            temp = _apply_axis(vec0, spec.fixed, spec.axis1.name, v1[i1])
            if spec.axis2:
                t2 = _apply_axis(vec0, spec.fixed, spec.axis2.name, v2[i2])
                temp = t2 if t2 is not None else temp
            if temp is not None:
                vec0[_kernels.P_N_A:_kernels.P_N_C + 1] = \
                    _thermal_occ(spec.fixed, temp)
            for sign in spec.kerr_signs:
                vec = vec0.copy()
                if sign != "axis":
                    vec[_kernels.P_DELTA_K] = \
                        KERR_SIGNS[sign] * spec.kerr_magnitude
                params[idx] = vec
                idx += 1
    return params, v1, (spec.axis2.values() if spec.axis2 else None)


def _eval_chunk_numpy(params, pair_rows, eps_stab, zero_tol,
                      out_en, out_stable, out_margin, out_resid,
                      solver="schur", oracle=False):
    """Per-point loop on the numpy lane; SciPy Schur solve is production."""
    max_dev = 0.0
    for t in range(params.shape[0]):
        A = _kernels.drift_from_vec(params[t])
        d = _kernels.diffusion_from_vec(params[t])
        ev = np.linalg.eigvals(A)
        margin = -float(ev.real.max())
        out_margin[t] = margin
        if margin <= eps_stab:
            out_stable[t] = 0
            out_resid[t] = np.nan
            out_en[t, :] = np.nan
            continue
        out_stable[t] = 1
        D = np.diag(d)
        if solver == "schur":
            V = scipy.linalg.solve_continuous_lyapunov(A, -D)
            V = 0.5 * (V + V.T)
        else:
            V = _kernels.lyap_spectral(A, D, 2)
        out_resid[t] = _kernels.lyap_residual(A, V, D)
        if oracle:
            Vk = _kernels.lyap_kron(A, D)
            max_dev = max(max_dev, float(np.abs(V - Vk).max()))
        for pp in range(pair_rows.shape[0]):
            r0, r1 = pair_rows[pp]
            idx = [r0, r0 + 1, r1, r1 + 1]
            out_en[t, pp] = _kernels.logneg_closed(
                np.ascontiguousarray(V[np.ix_(idx, idx)]), zero_tol)
    return max_dev


def run_sweep(spec: SweepSpec, threads: int = 1, oracle: bool = False,
              eps_factor: float = STABILITY_EPS_FACTOR) -> SweepResult:
    """Evaluate the grid; unstable points are marked, never interpolated.

    With oracle=True every stable point's covariance is recomputed by the
    Kronecker solver and compared to the production solve; disagreement
    beyond ORACLE_TOL raises RuntimeError.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    params, v1, v2 = _build_params(spec)
    n1 = len(v1)
    n2 = len(v2) if v2 is not None else 1
    ns = len(spec.kerr_signs)
    n_pts = params.shape[0]
    pair_rows = np.array([p.rows() for p in spec.pairs], dtype=np.int64)
    n_pairs = len(spec.pairs)

    en = np.empty((n_pts, n_pairs))
    stable = np.zeros(n_pts, dtype=np.uint8)
    margin = np.empty(n_pts)
    resid = np.empty(n_pts)
    eps = eps_factor  # normalized units, omega_b = 1

    use_kernel = _kernels.NUMBA_ENABLED and not oracle

    def work(lo, hi):
        if use_kernel:
            _kernels.grid_eval(params[lo:hi], pair_rows, eps, EN_ZERO_TOL, 2,
                               en[lo:hi], stable[lo:hi], margin[lo:hi],
                               resid[lo:hi])
            return 0.0
        solver = "spectral" if _kernels.NUMBA_ENABLED else "schur"
        return _eval_chunk_numpy(params[lo:hi], pair_rows, eps, EN_ZERO_TOL,
                                 en[lo:hi], stable[lo:hi], margin[lo:hi],
                                 resid[lo:hi], solver=solver, oracle=oracle)

    bounds = np.linspace(0, n_pts, min(threads, n_pts) + 1).astype(int)
    if threads == 1 or len(bounds) <= 2:
        devs = [work(0, n_pts)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(work, bounds[i], bounds[i + 1])
                       for i in range(len(bounds) - 1)]
            devs = [f.result() for f in futures]
    oracle_dev = max(devs) if oracle else math.nan
    if oracle and oracle_dev > ORACLE_TOL:
        raise RuntimeError(
            f"Lyapunov oracle disagreement {oracle_dev:.3e} > {ORACLE_TOL:g}")

    en = en.reshape(n1, n2, ns, n_pairs)
    stable = stable.reshape(n1, n2, ns).astype(bool)
    margin = margin.reshape(n1, n2, ns)
    resid = resid.reshape(n1, n2, ns)
    chi = _contrast_grid(spec, en, stable)
    return SweepResult(
        spec=spec, axis1_values=v1, axis2_values=v2,
        signs=spec.kerr_signs, pair_labels=tuple(p.label for p in spec.pairs),
        en=en, stable=stable, margin=margin, lyap_residual=resid, chi=chi,
        oracle_max_dev=oracle_dev)


def _contrast_grid(spec, en, stable):
    n1, n2, _, n_pairs = en.shape
    chi = np.full((n1, n2, n_pairs), np.nan)
    if "+" not in spec.kerr_signs or "-" not in spec.kerr_signs:
        return chi
    kp = spec.kerr_signs.index("+")
    km = spec.kerr_signs.index("-")
    for i1 in range(n1):
        for i2 in range(n2):
            if not (stable[i1, i2, kp] and stable[i1, i2, km]):
                continue
            for pp in range(n_pairs):
                ep = en[i1, i2, kp, pp]
                em = en[i1, i2, km, pp]
                if np.isnan(ep) or np.isnan(em) or (ep == 0.0 and em == 0.0):
                    continue
                chi[i1, i2, pp] = contrast_ratio(ep, em)
    return chi


# ---------------------------------------------------------------------------
# optimal-detuning locus


@dataclass
class LocusFit:
    coefficients: tuple       # (c2, c1, c0) of dm*(dk), omega_b units
    delta_k_values: np.ndarray
    peak_positions: np.ndarray  # NaN where no entangled point (locus gap)
    gaps: int


def _parabolic_refine(x, y, k):
    h = x[1] - x[0]
    y0, y1, y2 = y[k - 1], y[k], y[k + 1]
    den = y0 - 2.0 * y1 + y2
    if den >= 0.0:  # flat or non-concave sample, keep the grid point
        return x[k]
    return x[k] + 0.5 * h * (y0 - y2) / den


def optimal_locus(pair, delta_k_values, fixed, delta_m_range=(-2.0, 0.0),
                  delta_m_num=400, threads: int = 1) -> LocusFit:
    """Quadratic fit of the entanglement-maximizing detuning vs Kerr shift.

    For each delta_k the argmax of E_N over delta_m_eff is located on the
    grid and refined with a 3-point parabola; delta_k values without any
    entangled stable point are reported as gaps and excluded from the
    least-squares quadratic fit.
    """
    pair = pair if isinstance(pair, ModePair) else ModePair(*pair)
    dks = np.asarray(delta_k_values, dtype=float)
    if dks.size < 3:
        raise ValueError("need at least 3 delta_k values for a quadratic fit")
    spec = SweepSpec(
        axis1=Axis("delta_k", float(dks[0]), float(dks[-1]), dks.size),
        axis2=Axis("delta_m_eff", float(delta_m_range[0]),
                   float(delta_m_range[1]), delta_m_num),
        fixed=fixed, pairs=(pair,), kerr_signs=("axis",))
    if not np.allclose(spec.axis1.values(), dks):
        raise ValueError("delta_k_values must be uniformly spaced")
    result = run_sweep(spec, threads=threads)
    dms = result.axis2_values
    peaks = np.full(dks.size, np.nan)
    for ik in range(dks.size):
        en_row = result.en[ik, :, 0, 0]
        y = np.where(np.isnan(en_row), -np.inf, en_row)
        if not np.any(y > 0.0):
            continue
        k = int(np.argmax(y))
        if 0 < k < len(dms) - 1 and np.isfinite(y[k - 1]) and np.isfinite(y[k + 1]):
            peaks[ik] = _parabolic_refine(dms, y, k)
        else:
            peaks[ik] = dms[k]
    ok = np.isfinite(peaks)
    if ok.sum() < 3:
        raise RuntimeError("not enough entangled delta_k points to fit a locus")
    c2, c1, c0 = np.polyfit(dks[ok], peaks[ok], 2)
    return LocusFit(coefficients=(float(c2), float(c1), float(c0)),
                    delta_k_values=dks, peak_positions=peaks,
                    gaps=int((~ok).sum()))


# ---------------------------------------------------------------------------
# flat-file export

_FLOAT_FMT = "%.16e"  # >= 12 significant digits, exact round-trip


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return _FLOAT_FMT % x


def export_table(result: SweepResult, path):
    """Comma-separated table, one row per grid point per Kerr sign.

    Axis-major deterministic row order; unstable points leave their E_N
    cells empty, undefined contrast ratios likewise.
    """
    spec = result.spec
    two_d = result.axis2_values is not None
    cols = [spec.axis1.name]
    if two_d:
        cols.append(spec.axis2.name)
    cols += ["kerr_sign", "stable"]
    cols += [f"EN_{lab}" for lab in result.pair_labels]
    cols += [f"chi_{lab}" for lab in result.pair_labels]
    n1, n2, ns, npair = result.en.shape
    lines = [",".join(cols)]
    for i1 in range(n1):
        for i2 in range(n2):
            for k, sign in enumerate(result.signs):
                row = [_fmt(result.axis1_values[i1])]
                if two_d:
                    row.append(_fmt(result.axis2_values[i2]))
                row.append(sign)
                st = bool(result.stable[i1, i2, k])
                row.append("1" if st else "0")
                for pp in range(npair):
                    v = result.en[i1, i2, k, pp]
                    row.append(_fmt(None if not st else float(v)))
                for pp in range(npair):
                    v = result.chi[i1, i2, pp]
                    row.append(_fmt(float(v)))
                lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_table(path):
    """Parse an exported table back into (column_names, list of row dicts).

    Numeric cells come back as floats, empty cells as None, the sign column
    as its literal string.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        row = {}
        for name, cell in zip(header, cells):
            if name == "kerr_sign":
                row[name] = cell
            elif cell == "":
                row[name] = None
            else:
                row[name] = float(cell)
        rows.append(row)
    return header, rows
