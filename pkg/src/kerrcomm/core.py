"""Units, physical constants, parameter records and thermal occupation.

Conventions used throughout the package:

* User-facing frequencies are ordinary frequencies in Hz (the numbers quoted
  as "omega/2pi" in the lab).  Everything internal is angular (rad/s).  The
  conversion happens exactly once, when an :class:`OperatingPoint` is built.
* Decay rates are half-linewidths, i.e. the kappa appearing in a
  (kappa + i*Delta) Langevin denominator.
* Vacuum quadrature variance is 1/2 (X = (a + a^dag)/sqrt(2)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields, replace

# CODATA 2018
HBAR = 1.054571817e-34  # J s
KB = 1.380649e-23       # J/K (exact)

# Mechanical quality factors below this trigger a Markovian-validity warning.
MIN_QUALITY_FACTOR = 50.0

TWO_PI = 2.0 * math.pi


def to_angular(f):
    """Ordinary frequency (Hz) to angular frequency (rad/s)."""
    if not math.isfinite(f):
        raise ValueError(f"frequency must be finite, got {f!r}")
    return TWO_PI * f


def thermal_occupation(omega, temperature):
    """Mean thermal occupation 1/(exp(hbar*omega/kB*T) - 1).

    omega is angular (rad/s) and must be positive; temperature is in kelvin
    and may be zero, in which case the occupation is exactly 0.
    """
    if omega <= 0.0:
        raise ValueError(f"thermal occupation needs omega > 0, got {omega!r}")
    if temperature < 0.0:
        raise ValueError(f"temperature must be >= 0, got {temperature!r}")
    if temperature == 0.0:
        return 0.0
    x = HBAR * omega / (KB * temperature)
    if x > 700.0:  # exp would overflow; occupation is 0 to double precision
        return 0.0
    return 1.0 / math.expm1(x)


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the device, all ordinary frequencies in Hz.

    omega_* are mode frequencies, kappa_*/gamma_b half-linewidth decay
    rates, g_am the photon-magnon coupling, g_m/g_c the single-quantum
    magnomechanical/optomechanical couplings, K0 the (signed) Kerr
    coefficient, E_m/E_c drive amplitudes, w_m/w_c drive frequencies and
    temperature the common bath temperature in kelvin.
    """

    omega_a: float
    omega_m: float
    omega_c: float
    omega_b: float
    kappa_a: float
    kappa_m: float
    kappa_c: float
    gamma_b: float
    g_am: float
    g_m: float
    g_c: float
    K0: float
    E_m: float
    E_c: float
    w_m: float
    w_c: float
    temperature: float = 0.0

    def __post_init__(self):
        for name in ("omega_a", "omega_m", "omega_c", "omega_b",
                     "kappa_a", "kappa_m", "kappa_c", "gamma_b",
                     "g_am", "g_m", "g_c", "E_m", "E_c", "w_m", "w_c",
                     "temperature"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            if v < 0.0:
                raise ValueError(f"{name} must be >= 0, got {v!r}")
        if not math.isfinite(self.K0):
            raise ValueError(f"K0 must be finite, got {self.K0!r}")
        if self.gamma_b > 0.0 and self.omega_b / self.gamma_b < MIN_QUALITY_FACTOR:
            warnings.warn(
                "mechanical quality factor omega_b/gamma_b = "
                f"{self.omega_b / self.gamma_b:.3g} is low; the Markovian "
                "treatment of the mechanical noise assumes omega_b >> gamma_b",
                stacklevel=2)

    # drive-frame detunings, still in Hz
    @property
    def delta_a(self):
        return self.omega_a - self.w_m

    @property
    def delta_m(self):
        return self.omega_m - self.w_m

    @property
    def delta_c(self):
        return self.omega_c - self.w_c


@dataclass(frozen=True)
class OperatingPoint:
    """Linearization point, everything angular (rad/s) except occupations.

    delta_m_eff and delta_c_eff are the displacement-shifted effective
    detunings, delta_k the Kerr shift 2*K0*|<m>|^2, and G_m/G_c the
    drive-enhanced couplings (real, non-negative: the steady-state phases
    are absorbed into local quadrature rotations).
    """

    delta_a: float
    delta_m_eff: float
    delta_c_eff: float
    delta_k: float
    G_m: float
    G_c: float
    g_am: float
    kappa_a: float
    kappa_m: float
    kappa_c: float
    gamma_b: float
    omega_b: float
    n_a: float = 0.0
    n_m: float = 0.0
    n_b: float = 0.0
    n_c: float = 0.0

    def __post_init__(self):
        for name in ("G_m", "G_c", "g_am", "kappa_a", "kappa_m", "kappa_c",
                     "gamma_b", "n_a", "n_m", "n_b", "n_c"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if not math.isfinite(self.omega_b) or self.omega_b <= 0.0:
            raise ValueError(f"omega_b must be positive, got {self.omega_b!r}")
        for name in ("delta_a", "delta_m_eff", "delta_c_eff", "delta_k"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")

    def normalized(self) -> "OperatingPoint":
        """Same point with all rates in units of omega_b (omega_b becomes 1).

        The steady-state covariance matrix is invariant under this uniform
        rescaling; it keeps the drift-matrix entries O(1) for the eigenvalue
        and Lyapunov work.
        """
        s = 1.0 / self.omega_b
        kw = {f.name: getattr(self, f.name) * s for f in fields(self)
              if f.name not in ("n_a", "n_m", "n_b", "n_c")}
        kw.update(n_a=self.n_a, n_m=self.n_m, n_b=self.n_b, n_c=self.n_c)
        return replace(self, **kw)


def occupations(temperature, omega_a, omega_m, omega_b, omega_c):
    """Thermal occupations (n_a, n_m, n_b, n_c) at the bare mode frequencies.

    Frequencies are ordinary (Hz); occupations are evaluated at the bare
    mode frequencies, not at drive-shifted ones.
    """
    return tuple(thermal_occupation(to_angular(f), temperature)
                 for f in (omega_a, omega_m, omega_b, omega_c))
