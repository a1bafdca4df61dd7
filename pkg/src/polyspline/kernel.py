"""Generalized covariance of the scale-invariant (IRF(1)) Gaussian prior.

The kernel is

    k_f(tau) = tau**2 * (ln(tau) - b) + c,

with ``b`` and ``c`` derived from the low-frequency cutoff ``omega0`` of the
power-law spectral density S(w) = |w|**-(n+2)::

    b(tau) = sin(omega0*tau)/(omega0*tau) - ln(omega0) - gamma - Cin(omega0*tau)
    c(tau) = cos(omega0*tau) / omega0**2

where ``Cin(x)`` here denotes the integral of (cos(w) - 1)/w over [0, x]
(a nonpositive quantity for small x).  In the default ``ConstantBC`` mode
both are frozen at tau = 0.

The closed form equals *twice* the cutoff covariance integral
``int_{omega0}^inf cos(w*tau)/w**3 dw``; the factor 2 is an overall scale that
cancels against sigma2 in the predictor.

Internally the kernel is split as ``k_f = c_const + shape(tau)`` so that
solvers can keep the huge, nearly constant part ``c_const ~ 1/omega0**2``
separate from the informative part.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError

#: Euler-Mascheroni constant to 20 significant digits.
EULER_GAMMA = 0.57721566490153286061

#: Below this separation the kernel is replaced by its zero-distance value.
TAU_EPS = 1e-10

#: Default ratio between the cutoff period 2*pi/omega0 and the data diameter.
DEFAULT_MARGIN = 600.0

_CIN_TERM_TOL = 1e-15
_CIN_MAX_TERMS = 64
# beyond this the alternating series loses digits to cancellation
_CIN_SERIES_MAX = 8.0


class BCMode(str, enum.Enum):
    """How the constants ``b`` and ``c`` are evaluated."""

    CONSTANT = "ConstantBC"
    EXACT = "ExactBC"

    @classmethod
    def parse(cls, value: "BCMode | str") -> "BCMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for mode in cls:
            if key in (mode.value.lower(), mode.name.lower()):
                return mode
        raise DomainError(f"unknown kernel mode {value!r}; expected ConstantBC or ExactBC")


def _check_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return arr


def _check_omega0(omega0):
    omega0 = float(omega0)
    if not math.isfinite(omega0) or omega0 <= 0:
        raise DomainError(f"omega0 must be a positive finite number, got {omega0!r}")
    return omega0


def _cin_array(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    small = x <= _CIN_SERIES_MAX
    if np.any(small):
        xs = x[small]
        x2 = xs * xs
        term = -x2 / 4.0
        total = term.copy()
        for m in range(1, _CIN_MAX_TERMS):
            # ratio of consecutive terms (-1)^m x^(2m) / (2m (2m)!)
            term = term * (-x2) * (2 * m) / ((2 * m + 2) ** 2 * (2 * m + 1))
            total += term
            if np.max(np.abs(term)) < _CIN_TERM_TOL:
                break
        out[small] = total
    large = ~small
    if np.any(large):
        xl = x[large]
        _, ci = special.sici(xl)
        out[large] = ci - EULER_GAMMA - np.log(xl)
    return out


def cin_integral(x):
    """Integral of ``(cos(w) - 1) / w`` over ``[0, x]``.

    Evaluated by the alternating power series
    ``sum_{m>=1} (-1)^m x^(2m) / (2m (2m)!)``, truncated once a term drops
    below 1e-15 (at most 64 terms).  Arguments above 8 fall back to
    ``Ci(x) - gamma - ln(x)``.  Accepts scalars or arrays.
    """
    arr = _check_finite("x", x)
    if np.any(arr < 0):
        raise DomainError(f"cin_integral requires x >= 0, got {x!r}")
    out = _cin_array(np.atleast_1d(arr).astype(float))
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def _b_array(tau: np.ndarray, omega0: float) -> np.ndarray:
    x = omega0 * tau
    sinc = np.ones_like(x)
    nz = x > 0
    sinc[nz] = np.sin(x[nz]) / x[nz]
    return sinc - math.log(omega0) - EULER_GAMMA - _cin_array(x)


def _c_array(tau: np.ndarray, omega0: float) -> np.ndarray:
    return np.cos(omega0 * tau) / omega0**2


def _scalar_or_array(arr, out):
    if np.ndim(arr) == 0:
        return float(out[0])
    return out.reshape(np.shape(arr))


def _check_tau(tau):
    arr = _check_finite("tau", tau)
    if np.any(arr < 0):
        raise DomainError(f"tau must be nonnegative, got {tau!r}")
    return arr


def b_of_tau(tau, omega0):
    """The log-offset ``b(tau)``; ``b(0) = 1 - ln(omega0) - gamma``."""
    arr = _check_tau(tau)
    omega0 = _check_omega0(omega0)
    return _scalar_or_array(arr, _b_array(np.atleast_1d(arr).astype(float), omega0))


def c_of_tau(tau, omega0):
    """The constant term ``c(tau) = cos(omega0*tau) / omega0**2``."""
    arr = _check_tau(tau)
    omega0 = _check_omega0(omega0)
    return _scalar_or_array(arr, _c_array(np.atleast_1d(arr).astype(float), omega0))


@dataclass(frozen=True)
class KernelParams:
    """Complete kernel configuration.

    ``b_const`` and ``c_const`` are derived from ``omega0`` and cannot be
    passed in.  The spectral amplitude is fixed to 1; rescale ``sigma2``
    instead, only the ratio of the two matters.
    """

    omega0: float
    sigma2: float = 0.0
    mode: BCMode = BCMode.CONSTANT
    b_const: float = field(init=False)
    c_const: float = field(init=False)

    def __post_init__(self):
        omega0 = _check_omega0(self.omega0)
        sigma2 = float(self.sigma2)
        if not math.isfinite(sigma2) or sigma2 < 0:
            raise DomainError(f"sigma2 must be a nonnegative finite number, got {self.sigma2!r}")
        object.__setattr__(self, "omega0", omega0)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "mode", BCMode.parse(self.mode))
        object.__setattr__(self, "b_const", 1.0 - math.log(omega0) - EULER_GAMMA)
        object.__setattr__(self, "c_const", 1.0 / omega0**2)

    def with_sigma2(self, sigma2: float) -> "KernelParams":
        return KernelParams(self.omega0, sigma2, self.mode)

    @property
    def critical_distance(self) -> float:
        """Distance ``e**b`` at which the log factor of the kernel vanishes."""
        return math.exp(self.b_const)


def make_kernel_params(omega0: float, sigma2: float = 0.0, mode: BCMode | str = BCMode.CONSTANT) -> KernelParams:
    return KernelParams(omega0, sigma2, mode)


def shape_values(tau: np.ndarray, params: KernelParams) -> np.ndarray:
    """Return ``k_f(tau) - c_const`` for an array of distances.

    No validation; callers pass nonnegative finite arrays.
    """
    tau = np.asarray(tau, dtype=float)
    out = np.zeros_like(tau)
    far = tau >= TAU_EPS
    t = tau[far]
    if params.mode is BCMode.CONSTANT:
        out[far] = t * t * (np.log(t) - params.b_const)
    else:
        w = params.omega0
        # c(tau) - c(0) written without cancellation
        dc = -2.0 * np.sin(0.5 * w * tau) ** 2 / w**2
        out[:] = dc
        out[far] += t * t * (np.log(t) - _b_array(t, w))
    return out


def kernel_values(tau, params: KernelParams) -> np.ndarray:
    """Vectorized generalized covariance ``k_f(tau)``."""
    return params.c_const + shape_values(tau, params)


def kernel_eval(tau, params: KernelParams):
    """Generalized covariance at distance ``tau`` (scalar or array).

    Distances below ``TAU_EPS`` return ``c`` (``c_const`` in ConstantBC,
    ``c(tau)`` in ExactBC).
    """
    arr = _check_tau(tau)
    out = kernel_values(np.atleast_1d(arr).astype(float), params)
    return _scalar_or_array(arr, out)


def spectral_density(omega, n: int | None = None, a: float = 1.0) -> float:
    """Power-law spectral density ``a * ||omega||**-(n+2)``.

    ``n`` defaults to the length of ``omega``.
    """
    w = np.atleast_1d(_check_finite("omega", omega)).astype(float)
    if n is None:
        n = w.size
    if int(n) != n or n < 1:
        raise DomainError(f"dimension n must be a positive integer, got {n!r}")
    sq = float(np.sum(w * w))
    if sq == 0.0:
        raise DomainError("spectral density is singular at omega = 0; respect the omega0 cutoff")
    return a * sq ** (-(n + 2) / 2.0)


def period(omega0: float) -> float:
    """Period ``2*pi/omega0`` of the slowest retained oscillation."""
    return 2.0 * math.pi / _check_omega0(omega0)


def suggest_omega0(domain_diameter: float, margin: float = DEFAULT_MARGIN) -> float:
    """Cutoff whose period is ``margin`` times the data diameter."""
    d = float(domain_diameter)
    m = float(margin)
    if not (math.isfinite(d) and d > 0):
        raise DomainError(f"domain diameter must be positive, got {domain_diameter!r}")
    if not (math.isfinite(m) and m > 0):
        raise DomainError(f"margin must be positive, got {margin!r}")
    return 2.0 * math.pi / (m * d)
