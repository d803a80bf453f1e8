"""Effective array parameters produced by two periodic-driving schemes.

Both maps are algebraic results of a rotating-wave approximation. Loss and
collective pump are not touched by the drive and are passed through from the
base parameters unchanged.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from .model import ModelParams

TAIL_TOL = 1e-15
IMAG_TOL = 1e-12
RWA_RATIO = 10.0


class RWAWarning(UserWarning):
    """Carrier frequencies are not well separated from the couplings."""


class TruncationError(RuntimeError):
    pass


def _bessel_tail(x: float, n_max: int) -> float:
    """Upper bound on ``sum_{|n| > n_max} |J_n(x)|^2`` from ``|J_n(x)| <= (|x|/2)^n / n!``."""
    half = abs(x) / 2
    if half == 0:
        return 0.0
    n = n_max + 1
    if half >= n:  # bound not yet decreasing
        return math.inf
    first = math.exp(2 * (n * math.log(half) - math.lgamma(n + 1)))
    ratio = (half / (n + 1)) ** 2
    return 2 * first / (1 - ratio)


def _orders(eta: float, n_max: int, auto: bool) -> int:
    while _bessel_tail(eta, n_max) > TAIL_TOL:
        if not auto:
            raise TruncationError(
                f"Bessel truncation n_max={n_max} too small for eta={eta}; increase n_max"
            )
        n_max *= 2
    return n_max


def f_function(eta: float, delta_phi: float, n_max: int = 40, auto_increase: bool = True) -> float:
    """``F(eta, dphi) = sum_n J_{-n-1}(eta) J_n(eta) exp(-i (n + 1/2) dphi)``, which is real."""
    n_max = _orders(eta, n_max, auto_increase)
    n = np.arange(-n_max, n_max + 1)
    terms = jv(-n - 1, eta) * jv(n, eta) * np.exp(-1j * (n + 0.5) * delta_phi)
    total = terms.sum()
    if abs(total.imag) > IMAG_TOL:
        raise ArithmeticError(f"F has imaginary part {total.imag:.2e}")
    return float(total.real)


def hopping_factor(eta: float, delta_phi: float, n_max: int = 40, auto_increase: bool = True) -> float:
    """``sum_n J_n(eta)^2 exp(-i n dphi)``, which is real."""
    n_max = _orders(eta, n_max, auto_increase)
    n = np.arange(-n_max, n_max + 1)
    total = np.sum(jv(n, eta) ** 2 * np.exp(-1j * n * delta_phi))
    if abs(total.imag) > IMAG_TOL:
        raise ArithmeticError(f"hopping factor has imaginary part {total.imag:.2e}")
    return float(total.real)


@dataclass(frozen=True)
class LocalDriveSpec:
    j_c: float
    eta: float
    delta_phi: float
    n_max: int = 40
    omega_r: float | None = None

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        for name in ("j_c", "eta", "delta_phi"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class CouplingDriveSpec:
    a0: float
    a1: float
    a2: float
    a3: float
    phi_d: float
    delta_omega: float | None = None
    omega_0: float | None = None

    def __post_init__(self):
        for name in ("a0", "a1", "a2", "a3", "phi_d"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class DriveMap:
    """Effective couplings as produced by a drive map; ``hop`` may be negative or zero."""

    hop: float
    phi: float
    g_s: float
    g_c: float
    note: str = ""

    def fragment(self) -> dict:
        """Parameter fragment with ``hop > 0``; a negative hop is folded into ``phi + pi``."""
        if self.hop == 0:
            raise ValueError("the drive switches the hopping off; cannot express hop > 0")
        hop, phi = self.hop, self.phi
        if hop < 0:
            hop, phi = -hop, phi + math.pi
        phi = math.remainder(phi, 2 * math.pi)
        return {"hop": hop, "phi": phi, "g_s": self.g_s, "g_c": self.g_c}

    def to_params(self, base: ModelParams | None = None) -> ModelParams:
        base = base or ModelParams()
        return base.replace(**self.fragment())


def local_drive_map(spec: LocalDriveSpec) -> DriveMap:
    """Couplings generated by modulating every resonator frequency at twice its value.

    ``J = -J_c sum_n J_n(eta)^2 exp(-i n dphi)``, ``phi = dphi / 2``,
    ``g_s = J_c J_{-1}(2 eta)`` and ``g_c = -J_c F(eta, dphi)``.
    """
    if spec.omega_r is not None and spec.omega_r < RWA_RATIO * abs(spec.j_c):
        warnings.warn(
            f"omega_r={spec.omega_r} is not much larger than J_c={spec.j_c}", RWAWarning, stacklevel=2
        )
    hop = -spec.j_c * hopping_factor(spec.eta, spec.delta_phi, spec.n_max)
    g_s = spec.j_c * float(jv(-1, 2 * spec.eta))
    g_c = -spec.j_c * f_function(spec.eta, spec.delta_phi, spec.n_max)
    note = "site phases exp(i j dphi / 2) absorbed by a gauge transformation"
    return DriveMap(hop, spec.delta_phi / 2, g_s, g_c, note)


def coupling_drive_map(spec: CouplingDriveSpec) -> DriveMap:
    """Couplings from multi-tone modulation: ``J = A3/2, phi = phi_d, g_s = A1/2, g_c = A2/2``."""
    amps = max(abs(spec.a0), abs(spec.a1), abs(spec.a2), abs(spec.a3))
    for name in ("delta_omega", "omega_0"):
        carrier = getattr(spec, name)
        if carrier is not None and abs(carrier) < RWA_RATIO * amps:
            warnings.warn(f"{name}={carrier} is not much larger than the tone amplitudes", RWAWarning, stacklevel=2)
    return DriveMap(spec.a3 / 2, spec.phi_d, spec.a1 / 2, spec.a2 / 2)
