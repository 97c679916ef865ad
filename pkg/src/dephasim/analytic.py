"""Closed-form signal models.

The inhomogeneous (shot-to-shot light shift) channel produces a fringe whose
contrast decays algebraically and whose phase chirps:

    w(t) = (-1)**n * alpha(x) * cos(delta_prime * x + kappa(x)),  x = t - 2*n*tau
    alpha(x) = [1 + 0.95*(x/T2*)**2]**(-3/2)
    kappa(x) = -3*arctan(0.97*x/T2*)

These are the magnitude and phase of the characteristic function of the
shifted-Gamma light-shift distribution with scale eta = T2*/0.97; the literal
constants 0.95 and 0.97 are two-decimal roundings of e**(2/3) - 1 and its
square root (the 1/e point of the envelope defines T2*).  The exact
characteristic-function forms are exposed separately for oracle tests.

The homogeneous (per-shot drift) channel leaves a Gaussian visibility decay:

    V(t) = C0 * exp(-(1/2) * (t/2n)**2 * sigma_sig**2),   t = 2*n*tau

with 1/e time T2' = 2*sqrt(2)*n/sigma_sig -- coherence prolonged linearly in
the number of refocusing pulses.

Auxiliary models: Rabi oscillation of the measured state fraction and the
exponential trap-lifetime decay used to calibrate the qubit readout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "FringeModelParams",
    "VisibilityModelParams",
    "RelaxationModelParams",
    "envelope_alpha",
    "envelope_kappa",
    "envelope_alpha_exact",
    "envelope_kappa_exact",
    "fringe_inhomogeneous",
    "visibility_spin_echo",
    "visibility_cpmg",
    "homogeneous_factor",
    "t2_prime",
    "rabi_fraction",
    "rabi_period",
    "rabi_pi_half_time",
    "t1_fraction",
    "fraction_from_w",
    "w_from_fraction",
    "MODEL_NAMES",
]

#: Names the fit module and CLI accept for model selection.
MODEL_NAMES = ("ramsey", "echo_fringe", "cpmg_fringe", "visibility", "rabi", "t1")


@dataclass(frozen=True)
class FringeModelParams:
    """Carrier and envelope of the inhomogeneous fringe.

    delta_prime is the net carrier detuning (set detuning minus magnetic
    shift minus the light-shift distribution onset), rad/s.  t2_star may be
    ``math.inf`` to disable the envelope (pure cosine fringe).
    include_kappa toggles the phase chirp; the envelope keeps its shape.
    """

    delta_prime: float
    t2_star: float
    n: int
    tau: float = 0.0
    include_kappa: bool = True

    def __post_init__(self):
        if not self.t2_star > 0:
            raise DomainError(f"t2_star must be positive, got {self.t2_star}")
        if self.n < 0:
            raise DomainError(f"pulse count must be >= 0, got {self.n}")
        if self.n >= 1 and not self.tau > 0:
            raise DomainError(f"tau must be positive for n >= 1, got {self.tau}")


@dataclass(frozen=True)
class VisibilityModelParams:
    """Gaussian visibility-decay parameters."""

    c0: float
    sigma_sig: float
    n: int

    def __post_init__(self):
        if not 0.0 <= self.c0 <= 1.0:
            raise DomainError(f"c0 must lie in [0, 1], got {self.c0}")
        if self.sigma_sig < 0:
            raise DomainError(f"sigma_sig must be >= 0, got {self.sigma_sig}")
        if self.n < 1:
            raise DomainError(f"visibility model needs n >= 1, got {self.n}")


@dataclass(frozen=True)
class RelaxationModelParams:
    """Exponential relaxation of the measured fraction toward equilibrium."""

    t1: float
    amplitude: float
    equilibrium: float

    def __post_init__(self):
        if not self.t1 > 0:
            raise DomainError(f"t1 must be positive, got {self.t1}")


def _scalar_or_array(x, out):
    return float(out) if np.ndim(x) == 0 else out


def envelope_alpha(x, t2_star: float):
    """Fringe-contrast envelope [1 + 0.95*(x/T2*)**2]**(-3/2)."""
    if not t2_star > 0:
        raise DomainError(f"t2_star must be positive, got {t2_star}")
    r = np.asarray(x, dtype=float) / t2_star
    return _scalar_or_array(x, (1.0 + 0.95 * r**2) ** -1.5)


def envelope_kappa(x, t2_star: float):
    """Fringe phase chirp -3*arctan(0.97*x/T2*)."""
    if not t2_star > 0:
        raise DomainError(f"t2_star must be positive, got {t2_star}")
    r = np.asarray(x, dtype=float) / t2_star
    return _scalar_or_array(x, -3.0 * np.arctan(0.97 * r))


def envelope_alpha_exact(x, eta: float):
    """Exact envelope: magnitude (1 + (x/eta)**2)**(-3/2) of the Gamma characteristic function."""
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")
    r = np.asarray(x, dtype=float) / eta
    return _scalar_or_array(x, (1.0 + r**2) ** -1.5)


def envelope_kappa_exact(x, eta: float):
    """Exact phase: -3*arctan(x/eta) of the Gamma characteristic function."""
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")
    r = np.asarray(x, dtype=float) / eta
    return _scalar_or_array(x, -3.0 * np.arctan(r))


def fringe_inhomogeneous(t, params: FringeModelParams):
    """Ensemble-averaged fringe under the shifted-Gamma light-shift law.

    Returns (-1)**n * alpha(x) * cos(delta_prime*x + kappa(x)) with
    x = t - 2*n*tau.  For n = 0 this is the Ramsey fringe; readout times
    before the last refocusing pulse (or negative times for n = 0) are
    rejected.
    """
    t_arr = np.asarray(t, dtype=float)
    earliest = (2 * params.n - 1) * params.tau if params.n >= 1 else 0.0
    if np.any(t_arr < earliest):
        raise DomainError(
            f"readout time violates t >= {earliest} (minimum given: {t_arr.min()})"
        )
    x = t_arr - 2 * params.n * params.tau
    phase = params.delta_prime * x
    if params.include_kappa:
        phase = phase + envelope_kappa(x, params.t2_star)
    out = (-1.0) ** params.n * envelope_alpha(x, params.t2_star) * np.cos(phase)
    return _scalar_or_array(t, out)


def visibility_cpmg(t, params: VisibilityModelParams):
    """Gaussian visibility decay C0 * exp(-(1/2)*(t/2n)**2 * sigma_sig**2)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("total time t must be >= 0")
    exponent = -0.5 * (t_arr / (2 * params.n)) ** 2 * params.sigma_sig**2
    return _scalar_or_array(t, params.c0 * np.exp(exponent))


def visibility_spin_echo(t, c0: float, sigma_sig: float):
    """Single-echo visibility decay; the n = 1 case of visibility_cpmg."""
    return visibility_cpmg(t, VisibilityModelParams(c0=c0, sigma_sig=sigma_sig, n=1))


def homogeneous_factor(tau: float, sigmas) -> float:
    """Ensemble-averaged fringe reduction exp(-(1/2)*tau**2*sum(sigma_i**2)).

    This is the mean of cos(tau * sum_i +-jump_i) over independent Gaussian
    jumps with standard deviations sigma_i: the visibility left at the echo
    time by homogeneous noise.
    """
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau}")
    arr = np.asarray(sigmas, dtype=float)
    if np.any(arr < 0):
        raise DomainError("all sigma_i must be >= 0")
    return float(np.exp(-0.5 * tau**2 * np.sum(arr**2)))


def t2_prime(n: int, sigma_sig: float) -> float:
    """Coherence 1/e time 2*sqrt(2)*n/sigma_sig of the Gaussian decay.

    sigma_sig = 0 means no homogeneous decay at all; that limit is signaled
    distinctly by returning ``math.inf``.
    """
    if n < 1:
        raise DomainError(f"t2_prime requires n >= 1, got {n}")
    if sigma_sig < 0:
        raise DomainError(f"sigma_sig must be >= 0, got {sigma_sig}")
    if sigma_sig == 0:
        return math.inf
    return 2.0 * math.sqrt(2.0) * n / sigma_sig


def rabi_fraction(t, omega_r: float, contrast: float, offset: float):
    """Driven-oscillation model offset + contrast*cos(omega_r*t).

    The measured fraction starts at its extremum at t = 0 (the qubit is
    prepared in the bright state of the readout), so the model carries no
    free phase.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("pulse duration must be >= 0")
    return _scalar_or_array(t, offset + contrast * np.cos(omega_r * t_arr))


def rabi_period(omega_r: float) -> float:
    """Oscillation period 2*pi/omega_r."""
    if not omega_r > 0:
        raise DomainError(f"omega_r must be positive, got {omega_r}")
    return 2.0 * math.pi / omega_r


def rabi_pi_half_time(omega_r: float) -> float:
    """Quarter-period pulse duration (pi/2)/omega_r."""
    return 0.25 * rabi_period(omega_r)


def t1_fraction(t, params: RelaxationModelParams):
    """Relaxation model equilibrium + amplitude*exp(-t/T1)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("trapping time must be >= 0")
    out = params.equilibrium + params.amplitude * np.exp(-t_arr / params.t1)
    return _scalar_or_array(t, out)


_W_TOLERANCE = 1e-9


def fraction_from_w(w, invert: bool = False):
    """Map the fringe observable w in [-1, 1] to a measured fraction in [0, 1].

    Default convention: fraction = (1 - w)/2, i.e. w = -1 is the state that
    survives readout with fraction 1.  ``invert=True`` selects the opposite
    convention (1 + w)/2; the measurement only fixes the convention up to
    this flip.  Values outside [-1, 1] (beyond float fuzz) are rejected.
    """
    arr = np.asarray(w, dtype=float)
    if np.any(np.abs(arr) > 1.0 + _W_TOLERANCE):
        bad = arr[np.abs(arr) > 1.0 + _W_TOLERANCE]
        raise DomainError(f"w outside [-1, 1]: {bad.flat[0]}")
    arr = np.clip(arr, -1.0, 1.0)
    out = (1.0 + arr) / 2.0 if invert else (1.0 - arr) / 2.0
    return _scalar_or_array(w, out)


def w_from_fraction(fraction, invert: bool = False):
    """Inverse of fraction_from_w."""
    arr = np.asarray(fraction, dtype=float)
    if np.any((arr < -_W_TOLERANCE) | (arr > 1.0 + _W_TOLERANCE)):
        raise DomainError("fraction outside [0, 1]")
    arr = np.clip(arr, 0.0, 1.0)
    out = 2.0 * arr - 1.0 if invert else 1.0 - 2.0 * arr
    return _scalar_or_array(fraction, out)
