"""Numerical checks of the spectral construction behind the kernel.

* :func:`quadrature_covariance` integrates the cutoff covariance
  ``int_{omega0}^{omega_max} cos(w*tau)/w**3 dw`` directly; twice its value
  must match the ExactBC closed form.
* :func:`sample_realization` draws the truncated canonical expansion
  ``F(x) = sum_j sqrt(S(w_j) dw) (vR_j cos(w_j x) - vI_j sin(w_j x))`` on a
  midpoint frequency grid, and :func:`empirical_variogram` checks its second
  moments.
* :func:`cross_section_ratio` compares the 2-D covariance integral on the
  line ``tau_2 = 0`` with the 1-D one; the ratio is ``B(1/2, 3/2) = pi/2``.
* :func:`finite_candidate_map` is the MAP choice among finitely many
  candidate functions with Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigError, ConvergenceError, DomainError
from .model import TrainingSet

_MAX_SEGMENTS = 200_000
_QUAD_LIMIT = 100


# ---------------------------------------------------------------------------
# adaptive quadrature of oscillatory, w**-3 weighted integrands
# ---------------------------------------------------------------------------

def _breakpoints(lo, hi, tau):
    """Geometric steps away from the cutoff spike, then half periods."""
    half = math.pi / tau if tau > 0 else math.inf
    pts = [lo]
    x = lo
    while 2.0 * x < min(hi, half):
        x *= 2.0
        pts.append(x)
    if half < hi:
        j = math.floor(x / half) + 1
        count = math.ceil(hi / half) - j
        if count + len(pts) > _MAX_SEGMENTS:
            raise ConvergenceError(
                f"oscillatory integral needs more than {_MAX_SEGMENTS} subintervals "
                f"(tau={tau}, upper limit {hi:.3g})"
            )
        pts.extend(half * np.arange(j, j + count))
    if pts[-1] < hi:
        pts.append(hi)
    return np.asarray(pts, dtype=float)


def _oscillatory_integral(func, lo, hi, tau, abs_tol, envelope, pure_cosine=False):
    """Integrate ``func`` over ``[lo, hi]`` (``hi`` may be infinite).

    ``|func(w)| <= envelope * w**-3`` bounds the discarded tail beyond the
    truncation point ``Omega``: ``envelope / (2 Omega**2)``.  When ``func`` is
    exactly ``envelope * cos(w*tau) / w**3``, integrating by parts gives the
    sharper ``2 envelope / (tau Omega**3)``.
    """
    tail = 0.0
    if math.isinf(hi):
        omega_cut = math.sqrt(envelope / abs_tol)
        tail = envelope / (2.0 * omega_cut**2)
        if pure_cosine:
            cube = (4.0 * envelope / (tau * abs_tol)) ** (1.0 / 3.0)
            if cube < omega_cut:
                omega_cut = cube
                tail = 2.0 * envelope / (tau * omega_cut**3)
        if omega_cut < 2.0 * lo:
            omega_cut = 2.0 * lo
            tail = envelope / (2.0 * omega_cut**2)
            if pure_cosine:
                tail = min(tail, 2.0 * envelope / (tau * omega_cut**3))
        hi = omega_cut
    pts = _breakpoints(lo, hi, tau)
    budget = (abs_tol - tail) / (len(pts) - 1)
    total = 0.0
    err_total = tail
    for a, b in zip(pts[:-1], pts[1:]):
        val, err, *_ = integrate.quad(func, a, b, epsabs=budget, epsrel=0.0,
                                      limit=_QUAD_LIMIT, full_output=1)
        total += val
        err_total += err
    if not err_total <= abs_tol:
        raise ConvergenceError(
            f"quadrature error estimate {err_total:.3g} exceeds target {abs_tol:.3g}"
        )
    return total, err_total


def _check_positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")
    return value


def quadrature_covariance(tau: float, omega0: float, tol: float = 1e-10,
                          omega_max: float = math.inf) -> float:
    """Covariance ``int_{omega0}^{omega_max} cos(w*tau) / w**3 dw``.

    The absolute error target is ``tol / (2 omega0**2)``, i.e. ``tol``
    relative to the zero-lag value.  At ``tau = 0`` the result is analytic.
    Raises :class:`ConvergenceError` if the target cannot be met.
    """
    tau = float(tau)
    if not math.isfinite(tau) or tau < 0:
        raise DomainError(f"tau must be nonnegative and finite, got {tau!r}")
    omega0 = _check_positive("omega0", omega0)
    tol = _check_positive("tol", tol)
    omega_max = float(omega_max)
    if not omega_max > omega0:
        raise DomainError(f"omega_max must exceed omega0, got {omega_max!r}")
    tail_at_max = 0.0 if math.isinf(omega_max) else 1.0 / (2.0 * omega_max**2)
    if tau == 0.0:
        return 1.0 / (2.0 * omega0**2) - tail_at_max
    abs_tol = tol / (2.0 * omega0**2)
    value, _ = _oscillatory_integral(lambda w: math.cos(w * tau) / w**3,
                                     omega0, omega_max, tau, abs_tol, 1.0, pure_cosine=True)
    return value


# ---------------------------------------------------------------------------
# truncated-spectrum sampler
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralConfig:
    """Frequency grid for the 1-D sampler.

    Cells are ``[omega0 + j*dw, omega0 + (j+1)*dw]`` for
    ``j = 0 .. n_cells-1``, sampled at their midpoints.  ``delta_omega`` and
    ``omega_max`` default to ``omega0/10`` and ``1000*omega0``.
    """

    omega0: float
    omega_max: float | None = None
    delta_omega: float | None = None
    n: int = 1
    seed: int = 0
    n_cells: int = field(init=False)

    def __post_init__(self):
        try:
            omega0 = _check_positive("omega0", self.omega0)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        omega_max = 1000.0 * omega0 if self.omega_max is None else float(self.omega_max)
        dw = omega0 / 10.0 if self.delta_omega is None else float(self.delta_omega)
        if not (math.isfinite(omega_max) and omega_max > omega0):
            raise ConfigError(f"omega_max ({omega_max}) must exceed omega0 ({omega0})")
        if not (math.isfinite(dw) and 0 < dw <= omega_max - omega0):
            raise ConfigError(
                f"delta_omega ({dw}) must lie in (0, omega_max - omega0 = {omega_max - omega0}]"
            )
        if self.n != 1:
            raise ConfigError(f"the sampler is one-dimensional, got n={self.n}")
        if int(self.seed) != self.seed:
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        n_cells = int(math.floor((omega_max - omega0) / dw + 1e-9))
        object.__setattr__(self, "omega0", omega0)
        object.__setattr__(self, "omega_max", omega_max)
        object.__setattr__(self, "delta_omega", dw)
        object.__setattr__(self, "seed", int(self.seed) % 2**64)
        object.__setattr__(self, "n_cells", n_cells)

    @property
    def frequencies(self) -> np.ndarray:
        return self.omega0 + (np.arange(self.n_cells) + 0.5) * self.delta_omega

    @property
    def amplitudes(self) -> np.ndarray:
        """``sqrt(S(w_j) dw)`` with ``S(w) = w**-3``."""
        w = self.frequencies
        return np.sqrt(self.delta_omega / w**3)

    @property
    def discrete_variance(self) -> float:
        """Pointwise variance of a realization, ``sum_j S(w_j) dw``."""
        return float(np.sum(self.amplitudes**2))

    @property
    def tail_variance_fraction(self) -> float:
        """Spectral mass above ``omega_max`` relative to the total above ``omega0``."""
        return (self.omega0 / self.omega_max) ** 2


@dataclass(frozen=True)
class Realization:
    grid_xs: np.ndarray
    values: np.ndarray
    config: SpectralConfig


def _grid(grid_xs):
    x = np.asarray(grid_xs, dtype=float).ravel()
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise ConfigError("grid must be a non-empty vector of finite values")
    return x


def _draw(config, basis_cos, basis_sin):
    rng = np.random.default_rng(config.seed)
    v = rng.standard_normal((2, config.n_cells))
    amp = config.amplitudes
    return (v[0] * amp) @ basis_cos - (v[1] * amp) @ basis_sin


def _bases(config, x):
    phase = np.outer(config.frequencies, x)
    return np.cos(phase), np.sin(phase)


def sample_realization(config: SpectralConfig, grid_xs) -> Realization:
    """One seeded draw of the truncated-spectrum field on ``grid_xs``."""
    x = _grid(grid_xs)
    values = _draw(config, *_bases(config, x))
    x.setflags(write=False)
    values.setflags(write=False)
    return Realization(x, values, config)


def sample_realizations(config: SpectralConfig, grid_xs, count: int) -> list[Realization]:
    """``count`` realizations with seeds ``config.seed + i``.

    Each one is identical to ``sample_realization`` with that seed.
    """
    if count < 1:
        raise ConfigError(f"count must be positive, got {count}")
    x = _grid(grid_xs)
    x.setflags(write=False)
    bases = _bases(config, x)
    out = []
    for i in range(count):
        cfg = replace(config, seed=(config.seed + i) % 2**64)
        values = _draw(cfg, *bases)
        values.setflags(write=False)
        out.append(Realization(x, values, cfg))
    return out


def _lag_offsets(grid, lags):
    if grid.size < 2:
        raise ConfigError("variogram needs a grid with at least two points")
    steps = np.diff(grid)
    h = steps[0]
    if h <= 0 or not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise ConfigError("variogram needs a uniform increasing grid")
    offsets = []
    for lag in np.atleast_1d(np.asarray(lags, dtype=float)):
        m = lag / h
        mi = int(round(m))
        if lag < 0 or abs(m - mi) > 1e-9 * max(1.0, abs(m)) or mi >= grid.size:
            raise ConfigError(f"lag {lag} is not representable on the grid (spacing {h})")
        offsets.append(mi)
    return offsets


def variogram_samples(realizations: Sequence[Realization], lags) -> np.ndarray:
    """Per-realization grid averages of ``(F(x+lag) - F(x))**2``.

    Rows are realizations, columns lags; rows are i.i.d., so their column
    means and standard errors give the Monte Carlo estimate.
    """
    if not realizations:
        raise ConfigError("no realizations given")
    grid = realizations[0].grid_xs
    for r in realizations:
        if not np.array_equal(r.grid_xs, grid):
            raise ConfigError("all realizations must share one grid")
    offsets = _lag_offsets(grid, lags)
    vals = np.vstack([r.values for r in realizations])
    out = np.empty((vals.shape[0], len(offsets)))
    for j, m in enumerate(offsets):
        if m == 0:
            out[:, j] = 0.0
        else:
            d = vals[:, m:] - vals[:, :-m]
            out[:, j] = np.mean(d * d, axis=1)
    return out


def empirical_variogram(realizations: Sequence[Realization], lags) -> np.ndarray:
    """Sample mean of ``(F(x+lag) - F(x))**2`` over realizations and grid pairs."""
    return variogram_samples(realizations, lags).mean(axis=0)


# ---------------------------------------------------------------------------
# dimensional cross-section
# ---------------------------------------------------------------------------

def beta_half(n: int) -> float:
    """``B(1/2, (n+1)/2)`` by the half-integer Gamma recurrence."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    # ratio Gamma((n+1)/2) / Gamma((n+2)/2), stepping n -> n+2
    ratio = 2.0 / math.sqrt(math.pi) if n % 2 else math.sqrt(math.pi) / 2.0
    for m in range(2 - n % 2, n, 2):
        ratio *= (m + 1) / (m + 2)
    return math.sqrt(math.pi) * ratio


def _axis_inner(w1):
    # int_0^inf dw2 / (w1^2 + w2^2)^2
    val, _ = integrate.quad(lambda w2: 1.0 / (w1 * w1 + w2 * w2) ** 2, 0.0, math.inf,
                            epsabs=0.0, epsrel=1e-12, limit=_QUAD_LIMIT)
    return val


def _radial_inner(r, tau):
    # int_0^{2 pi} cos(r tau cos(theta)) dtheta
    val, _ = integrate.quad(lambda t: math.cos(r * tau * math.cos(t)), 0.0, math.pi,
                            epsabs=0.0, epsrel=1e-12, limit=_QUAD_LIMIT)
    return 2.0 * val


def cross_section_ratio(tau: float, omega0: float, tol: float = 1e-4, geometry: str = "axis") -> float:
    """Ratio of the 2-D covariance at ``(tau, 0)`` to the 1-D covariance at ``tau``.

    The 2-D covariance is ``(1/2) * integral over the retained frequencies
    of cos(w1*tau) / ||w||**4``, evaluated by nested adaptive quadrature.
    With ``geometry="axis"`` the cutoff removes ``|w1| < omega0`` (the
    retained coordinate; the inner integral over ``w2`` runs over the whole
    line) and the ratio is ``B(1/2, 3/2) = pi/2``.  ``geometry="radial"``
    removes the disc ``||w|| < omega0`` instead; that adds spectral mass near
    the origin and the ratio tends to ``pi`` for ``omega0*tau << 1``.
    """
    tau = _check_positive("tau", tau)
    omega0 = _check_positive("omega0", omega0)
    tol = _check_positive("tol", tol)
    scale = 1.0 / (2.0 * omega0**2)
    denom = quadrature_covariance(tau, omega0, tol=tol)
    if geometry == "axis":
        # (1/2) * 2 (both signs of w1) * 2 (both signs of w2)
        func = lambda w: 2.0 * math.cos(w * tau) * _axis_inner(w)
        envelope = math.pi / 2.0
    elif geometry == "radial":
        func = lambda r: 0.5 * _radial_inner(r, tau) / r**3
        envelope = math.pi
    else:
        raise DomainError(f"geometry must be 'axis' or 'radial', got {geometry!r}")
    numer, _ = _oscillatory_integral(func, omega0, math.inf, tau, tol * scale * envelope, envelope)
    return numer / denom


# ---------------------------------------------------------------------------
# finite candidate MAP
# ---------------------------------------------------------------------------

def candidate_log_scores(candidates: Sequence[Callable], priors, data: TrainingSet, sigma2: float) -> np.ndarray:
    """``ln p_j - SSE_j / (2 sigma2)`` for every candidate."""
    if len(candidates) == 0:
        raise DomainError("candidate list is empty")
    priors = np.asarray(priors, dtype=float).ravel()
    if priors.size != len(candidates):
        raise DomainError(f"{len(candidates)} candidates but {priors.size} priors")
    if not np.all(np.isfinite(priors)) or np.any(priors <= 0):
        raise DomainError("priors must be positive and finite")
    sigma2 = _check_positive("sigma2", sigma2)
    scores = np.empty(len(candidates))
    for j, f in enumerate(candidates):
        fx = np.array([float(f(x)) for x in data.xs])
        u = data.ys - fx
        scores[j] = math.log(priors[j]) - float(np.sum(u * u)) / (2.0 * sigma2)
    return scores


def finite_candidate_map(candidates: Sequence[Callable], priors, data: TrainingSet, sigma2: float) -> int:
    """Index of the most probable candidate; ties go to the lowest index.

    Candidates are called with one input vector (a 1-D array) at a time.
    """
    return int(np.argmax(candidate_log_scores(candidates, priors, data, sigma2)))
