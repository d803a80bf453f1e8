"""Amplifier figures of merit: gain, added noise and output quadratures.

A coherent drive of unit amplitude enters at site 0. Loss ports are in
vacuum; the collective pump acts through its decomposed channels as an
amplifying reservoir. ``n_add -> 1`` is the quantum limit in this convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .greens import (
    FiniteGreen,
    GreenError,
    finite_green,
    oriented_hoppings,
    semi_infinite_green,
    spectral_split,
    surface_green,
)
from .model import ModelParams, build_dynamical_matrix, build_pump_matrix, pump_decomposition

NOISE_CAP = 1e12
GAIN_FLOOR = 1e-30


def _check_site(G: FiniteGreen, j: int):
    if not 0 <= j < G.n_sites:
        raise ValueError(f"site {j} outside chain of {G.n_sites} sites")


def output_amplitude(G: FiniteGreen, j: int) -> tuple[complex, complex]:
    """Signal and idler output coefficients at site ``j`` per unit drive amplitude.

    The idler multiplies ``conj(alpha)`` and sits at ``-omega``.
    """
    _check_site(G, j)
    gamma = G.params.gamma
    signal = (1.0 if j == 0 else 0.0) - 1j * gamma * G.normal(j, 0)
    idler = -1j * gamma * G.anomalous(j, 0)
    return complex(signal), complex(idler)


def gain(G: FiniteGreen, j: int) -> float:
    """Gain ``gamma^2 |G_{j,0}|^2`` of the finite chain."""
    _check_site(G, j)
    return float(G.params.gamma**2 * abs(G.normal(j, 0)) ** 2)


def semi_infinite_gain(params: ModelParams, omega: float, j: int) -> float:
    block = semi_infinite_green(params, omega, j, 0)
    return float(params.gamma**2 * abs(block[0, 0]) ** 2)


def in_canonical_family(params: ModelParams, tol: float = 1e-12) -> bool:
    J = params.hop
    return (
        abs(params.delta) < tol
        and abs(params.phi - math.pi / 2) < tol
        and abs(params.g_s - J) < tol
        and abs(params.g_c - J) < tol
        and params.pump == 0
    )


def closed_form_gain(params: ModelParams, omega: float, j: int) -> float:
    """Semi-infinite gain for ``delta=0, phi=pi/2, g_s=g_c=J, P=0``.

    ``gamma^2 4^(j-1) J^(2j) / [omega^2 + (gamma/2 - J)^2]^(j+1)``
    """
    if not in_canonical_family(params):
        raise ValueError("closed-form gain only holds for delta=0, phi=pi/2, g_s=g_c=J, P=0")
    if j < 1:
        raise ValueError("closed-form gain needs j >= 1")
    J, gamma = params.hop, params.gamma
    return gamma**2 * 4.0 ** (j - 1) * J ** (2 * j) / (omega**2 + (gamma / 2 - J) ** 2) ** (j + 1)


@dataclass(frozen=True)
class AmplifierPoint:
    site: int
    omega: float
    gain: float
    n_amp: float
    n_add: float

    @property
    def capped(self) -> bool:
        return not self.n_add <= NOISE_CAP

    @property
    def n_add_reported(self) -> float:
        return min(self.n_add, NOISE_CAP)


def added_noise(G: FiniteGreen, pump_matrix: np.ndarray | None, j: int) -> AmplifierPoint:
    """Noise photons at site ``j`` and the noise referred to the input.

    ``n_amp = gamma^2 sum_l |G_{j,N+l}|^2 + gamma sum_{l,l'} P_{l',l} conj(G_{j,l}) G_{j,l'}``
    and ``n_add = n_amp / gain``; ``n_add`` is infinite when the gain is below 1e-30.
    """
    _check_site(G, j)
    n = G.n_sites
    gamma = G.params.gamma
    row = G.matrix[j]
    normal, anomalous = row[:n], row[n:]
    n_amp = gamma**2 * float(np.sum(np.abs(anomalous) ** 2))
    if pump_matrix is not None and np.any(pump_matrix):
        n_amp += gamma * float(np.real(np.conj(normal) @ (pump_matrix.T @ normal)))
    g = gain(G, j)
    n_add = n_amp / g if g > GAIN_FLOOR else math.inf
    return AmplifierPoint(j, G.omega, g, n_amp, n_add)


def amplifier_point(params: ModelParams, omega: float, j: int, cond_limit: float | None = None) -> AmplifierPoint:
    """Convenience wrapper building the open chain, its Green's function and pump matrix."""
    H = build_dynamical_matrix(params, "open")
    kwargs = {} if cond_limit is None else {"cond_limit": cond_limit}
    G = finite_green(H, omega, **kwargs)
    return added_noise(G, build_pump_matrix(params, "open"), j)


def semi_infinite_noise(params: ModelParams, j: int, omega: float, max_terms: int = 100_000) -> float:
    """``gamma^2 sum_{l>=0} |G_{j,N+l}|^2`` of the semi-infinite chain (no pump).

    Terms with ``l <= j`` are summed directly. For ``l = j + d`` the block is
    ``M T_b^d G00`` with a fixed matrix ``M``, so the tail is a double
    geometric series in the backward eigenvalues.
    """
    if params.pump != 0:
        raise ValueError("semi-infinite noise is only available without collective pump")
    if j < 0:
        raise ValueError("site must be non-negative")
    surface = surface_green(params, omega)
    S = surface.G00
    forward, backward = oriented_hoppings(params)
    t_f, t_b = S @ forward, S @ backward
    head = sum(abs(semi_infinite_green(params, omega, j, l, surface)[0, 1]) ** 2 for l in range(j + 1))

    split = spectral_split(t_b)
    mus = split.lambdas
    if max(abs(m) for m in mus) >= 1:
        raise GreenError(
            f"backward transfer eigenvalue {max(mus, key=abs):.4g} has |mu| >= 1; tail diverges"
        )
    mp = np.linalg.matrix_power
    M = np.eye(2, dtype=complex)
    for r in range(j):
        M = M + mp(t_f, j - r) @ mp(t_b, j - r)
    coeffs = [(M @ q @ S)[0, 1] for q in split.projectors]
    tail = 0j
    for a, ca in zip(mus, coeffs):
        for b, cb in zip(mus, coeffs):
            x = a * np.conj(b)
            tail += ca * np.conj(cb) * x / (1 - x)
    return float(params.gamma**2 * (head + tail.real))


@dataclass(frozen=True)
class QuadratureState:
    site: int
    omega: float
    theta: float
    mean_x: complex
    mean_p: complex
    var_x: float
    var_p: float

    def classify(self) -> str:
        if self.var_p < 1:
            return "p-squeezed"
        if self.var_x < 1:
            return "x-squeezed"
        return "unsqueezed"


def _input_coefficients(G: FiniteGreen, pump_matrix: np.ndarray | None, j: int):
    """Coefficients of the vacuum input annihilators in ``a_out_j(w)`` and ``a_out_j^dag(-w)``."""
    n = G.n_sites
    gamma = G.params.gamma
    m = G.matrix
    a_loss = -1j * gamma * m[j, :n]
    a_loss[j] += 1.0
    b_loss = -1j * gamma * m[n + j, :n]
    a_parts, b_parts = [a_loss], [b_loss]
    if pump_matrix is not None and np.any(pump_matrix):
        rates, rotation = pump_decomposition(pump_matrix)
        weights = np.sqrt(np.clip(rates, 0.0, None))
        a_parts.append(1j * np.sqrt(gamma) * weights * (rotation @ m[j, n:]))
        b_parts.append(1j * np.sqrt(gamma) * weights * (rotation @ m[n + j, n:]))
    return np.concatenate(a_parts), np.concatenate(b_parts)


def quadrature_state(
    G: FiniteGreen, pump_matrix: np.ndarray | None, j: int, theta: float = math.pi / 4
) -> QuadratureState:
    """Output quadratures ``X = a e^{i theta} + a^dag e^{-i theta}``, ``P = i a e^{i theta} - i a^dag e^{-i theta}``.

    Means are per unit drive amplitude; ``var_x``/``var_p`` are the standard
    deviations ``Delta X``/``Delta P`` of the fluctuations (vacuum gives 1).
    """
    _check_site(G, j)
    n = G.n_sites
    gamma = G.params.gamma
    rot = np.exp(1j * theta)
    direct = 1.0 if j == 0 else 0.0
    g_sig, g_idl = G.matrix[j, 0], G.matrix[n + j, 0]
    mean_x = -1j * gamma * (g_sig * rot + g_idl / rot) + direct * rot
    mean_p = gamma * (g_sig * rot - g_idl / rot) + 1j * direct * rot

    a, b = _input_coefficients(G, pump_matrix, j)
    var_x = math.sqrt(float(np.sum(np.abs(rot * a + b / rot) ** 2)))
    var_p = math.sqrt(float(np.sum(np.abs(rot * a - b / rot) ** 2)))
    return QuadratureState(j, G.omega, float(theta), complex(mean_x), complex(mean_p), var_x, var_p)


@dataclass(frozen=True)
class SqueezingTrajectory:
    site: int
    omegas: np.ndarray
    var_x: np.ndarray
    var_p: np.ndarray
    classes: tuple


def squeezing_trajectory(
    params: ModelParams,
    sites: Sequence[int],
    omega_grid: Sequence[float],
    theta: float = math.pi / 4,
    cond_limit: float | None = None,
) -> list[SqueezingTrajectory]:
    """Quadrature deviations along a frequency grid for each requested site."""
    H = build_dynamical_matrix(params, "open")
    pump = build_pump_matrix(params, "open")
    omegas = np.asarray(omega_grid, dtype=float)
    table = {j: ([], []) for j in sites}
    kwargs = {} if cond_limit is None else {"cond_limit": cond_limit}
    for w in omegas:
        G = finite_green(H, w, **kwargs)
        for j in sites:
            q = quadrature_state(G, pump, j, theta)
            if q.var_x * q.var_p < 1 - 1e-9:
                raise ArithmeticError(f"uncertainty product {q.var_x * q.var_p} below 1 at site {j}, omega {w}")
            table[j][0].append(q.var_x)
            table[j][1].append(q.var_p)
    out = []
    for j in sites:
        vx, vp = np.array(table[j][0]), np.array(table[j][1])
        classes = tuple(
            "p-squeezed" if p < 1 else "x-squeezed" if x < 1 else "unsqueezed" for x, p in zip(vx, vp)
        )
        out.append(SqueezingTrajectory(j, omegas, vx, vp, classes))
    return out
