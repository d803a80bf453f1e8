"""Matrices of the parametric oscillator array.

Site ``j`` couples to ``j + 1`` through the coherent hopping
``J exp(i phi) a_{j+1}^dag a_j + h.c.``, single- and two-mode squeezing
``g_s`` and ``g_c``, local loss ``gamma`` and a nearest-neighbour collective
pump ``P``. The Langevin generator acts on the Nambu vector
``[a_0, ..., a_{N-1}, a_0^dag, ..., a_{N-1}^dag]`` and reads::

    H_nh = [[ Jm + i Gamma,        K                  ],
            [ -K^*,               -Jm^* + i Gamma^*   ]]

with ``Jm[j+1, j] = J exp(i phi)`` (the excitation hops towards larger ``j``),
``Gamma = (4P - gamma)/2 on site, P on bonds`` and ``K = g_s on site, g_c on
bonds``. All energies are in units of the hopping ``J``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Literal, NamedTuple

import numpy as np

Boundary = Literal["open", "periodic"]
BOUNDARIES = ("open", "periodic")

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class UnphysicalPumpWarning(UserWarning):
    """A collective pump rate came out negative."""


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of one array, in units of the hopping."""

    delta: float = 0.0
    hop: float = 1.0
    phi: float = math.pi / 2
    g_s: float = 1.0
    g_c: float = 1.0
    gamma: float = 4.0
    pump: float = 0.0
    n_sites: int = 12
    energy_scale: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "n_sites":
                continue
            if not math.isfinite(value):
                raise ValueError(f"{f.name} must be finite, got {value!r}")
        if self.hop <= 0:
            raise ValueError(f"hop must be positive, got {self.hop}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.pump < 0:
            raise ValueError(f"pump must be non-negative, got {self.pump}")
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise ValueError(f"n_sites must be an integer >= 2, got {self.n_sites}")
        object.__setattr__(self, "n_sites", int(self.n_sites))

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def normalized(self) -> "ModelParams":
        """Rescale every energy so that ``hop == 1``; the factor goes to ``energy_scale``."""
        s = self.hop
        if s == 1.0:
            return self
        return replace(
            self,
            delta=self.delta / s,
            hop=1.0,
            g_s=self.g_s / s,
            g_c=self.g_c / s,
            gamma=self.gamma / s,
            pump=self.pump / s,
            energy_scale=self.energy_scale * s,
        )

    def to_dict(self) -> dict:
        return asdict(self)


PARAM_NAMES = tuple(f.name for f in fields(ModelParams) if f.name != "energy_scale")


def params_from_config(config: dict) -> tuple[ModelParams, str]:
    """Build parameters from a JSON-like mapping; missing keys take the defaults.

    Returns the parameters and the boundary string.
    """
    config = dict(config)
    boundary = config.pop("boundary", "open")
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
    unknown = set(config) - set(PARAM_NAMES) - {"energy_scale"}
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    return ModelParams(**config), boundary


def load_config(path: str | Path) -> tuple[ModelParams, str]:
    with open(path) as fh:
        return params_from_config(json.load(fh))


@dataclass(frozen=True)
class DisorderOffsets:
    """On-site energy shifts ``w_j`` of one disorder realization."""

    offsets: np.ndarray
    seed: int = 0
    realization_index: int = 0
    strength: float = 0.0

    def __post_init__(self):
        offsets = np.array(self.offsets, dtype=float)
        offsets.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        if self.strength < 0:
            raise ValueError("disorder strength must be non-negative")
        if np.any(np.abs(offsets) > self.strength * (1 + 1e-12)):
            raise ValueError("disorder offsets exceed the stated strength")


@dataclass(frozen=True)
class DynamicalMatrix:
    entries: np.ndarray
    boundary: str
    params: ModelParams
    disorder: DisorderOffsets | None = None

    @property
    def n_sites(self) -> int:
        return self.entries.shape[0] // 2

    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return the ``(A, K, B, D)`` N x N blocks of ``[[A, K], [B, D]]``."""
        n = self.n_sites
        e = self.entries
        return e[:n, :n], e[:n, n:], e[n:, :n], e[n:, n:]

    def site_block(self, j: int, l: int) -> np.ndarray:
        """2x2 Nambu block coupling site ``l`` into site ``j``."""
        n = self.n_sites
        e = self.entries
        return np.array([[e[j, l], e[j, n + l]], [e[n + j, l], e[n + j, n + l]]])


def _bonds(n: int, boundary: str) -> list[tuple[int, int]]:
    bonds = [(j, j + 1) for j in range(n - 1)]
    if boundary == "periodic":
        bonds.append((n - 1, 0))
    return bonds


def _check_boundary(boundary: str):
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")


def coupling_blocks(
    params: ModelParams,
    boundary: Boundary = "open",
    onsite: np.ndarray | None = None,
    hop_offsets: np.ndarray | None = None,
    gamma_offsets: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return the coherent hopping ``Jm`` (with on-site energies), ``Gamma`` and ``K``."""
    _check_boundary(boundary)
    n = params.n_sites
    bonds = _bonds(n, boundary)
    onsite = np.full(n, params.delta) if onsite is None else np.asarray(onsite, float)
    hops = np.full(len(bonds), params.hop)
    if hop_offsets is not None:
        hops = hops + np.asarray(hop_offsets, float)
    gammas = np.full(n, params.gamma)
    if gamma_offsets is not None:
        gammas = gammas + np.asarray(gamma_offsets, float)

    coherent = np.diag(onsite).astype(complex)
    gamma_mat = np.diag((4 * params.pump - gammas) / 2)
    squeeze = np.diag(np.full(n, params.g_s, dtype=float))
    forward = np.exp(1j * params.phi)
    for (j, l), t in zip(bonds, hops):
        coherent[l, j] += t * forward
        coherent[j, l] += t * np.conj(forward)
        gamma_mat[j, l] += params.pump
        gamma_mat[l, j] += params.pump
        squeeze[j, l] += params.g_c
        squeeze[l, j] += params.g_c
    return coherent, gamma_mat, squeeze


def build_dynamical_matrix(
    params: ModelParams,
    boundary: Boundary = "open",
    disorder: DisorderOffsets | None = None,
    *,
    hop_offsets: np.ndarray | None = None,
    gamma_offsets: np.ndarray | None = None,
) -> DynamicalMatrix:
    """Assemble the 2N x 2N non-Hermitian dynamical matrix.

    ``disorder`` shifts the on-site energy ``delta -> delta + w_j`` (entering
    as ``+w_j`` in the particle block and ``-w_j`` in the hole block).
    ``hop_offsets`` and ``gamma_offsets`` perturb bond hoppings and local
    losses; both default to clean values.
    """
    n = params.n_sites
    onsite = np.full(n, params.delta)
    if disorder is not None:
        if disorder.offsets.shape != (n,):
            raise ValueError(
                f"disorder has {disorder.offsets.shape[0]} offsets for {n} sites"
            )
        onsite = onsite + disorder.offsets
    for name, arr, size in (
        ("hop_offsets", hop_offsets, len(_bonds(n, boundary))),
        ("gamma_offsets", gamma_offsets, n),
    ):
        if arr is not None and np.shape(arr) != (size,):
            raise ValueError(f"{name} must have length {size}")

    coherent, gamma_mat, squeeze = coupling_blocks(
        params, boundary, onsite, hop_offsets, gamma_offsets
    )
    upper = coherent + 1j * gamma_mat
    lower = -np.conj(coherent) + 1j * np.conj(gamma_mat)
    entries = np.block([[upper, squeeze], [-np.conj(squeeze), lower]])
    if not np.all(np.isfinite(entries)):
        raise ValueError("dynamical matrix has non-finite entries")
    entries.setflags(write=False)
    return DynamicalMatrix(entries, boundary, params, disorder)


def build_pump_matrix(params: ModelParams, boundary: Boundary = "open") -> np.ndarray:
    """Collective pump rates ``P_jl = 2P (2 delta_jl + delta_{j,l+1} + delta_{j,l-1})``."""
    _check_boundary(boundary)
    n = params.n_sites
    mat = np.diag(np.full(n, 4 * params.pump))
    for j, l in _bonds(n, boundary):
        mat[j, l] += 2 * params.pump
        mat[l, j] += 2 * params.pump
    return mat


class PumpModes(NamedTuple):
    rates: np.ndarray
    rotation: np.ndarray


def pump_decomposition(pump_matrix: np.ndarray, tol: float = 1e-10) -> PumpModes:
    """Diagonalize the pump matrix as ``P_jl = sum_m rates_m conj(R_mj) R_ml``.

    Rates are sorted in descending order. Rates below ``-tol`` raise an
    :class:`UnphysicalPumpWarning` but are returned unchanged.
    """
    mat = np.asarray(pump_matrix)
    if not np.allclose(mat, mat.conj().T, atol=1e-14):
        raise ValueError("pump matrix must be Hermitian")
    rates, vecs = np.linalg.eigh(mat)
    order = np.argsort(rates)[::-1]
    rates = rates[order]
    rotation = vecs[:, order].T
    if np.any(rates < -tol):
        warnings.warn(
            f"pump matrix has negative collective rate {rates.min():.3e}",
            UnphysicalPumpWarning,
            stacklevel=2,
        )
    return PumpModes(rates, rotation)


@dataclass(frozen=True)
class BlochMatrix:
    """``H(k) = f0 + fx sx + fy sy + fz sz`` together with its coefficients."""

    k: float
    f0: complex
    fx: complex
    fy: complex
    fz: complex
    matrix: np.ndarray = field(repr=False)


def bloch_coefficients(params: ModelParams, k):
    """Return ``f0, fy, fz`` and their k-derivatives; ``k`` may be an array."""
    J, phi, P = params.hop, params.phi, params.pump
    k = np.asarray(k, dtype=float)
    f0 = -2 * J * np.sin(k) * np.sin(phi) - 0.5j * params.gamma + 4j * P * np.cos(k / 2) ** 2
    fy = 1j * (params.g_s + 2 * params.g_c * np.cos(k))
    fz = params.delta + 2 * J * np.cos(k) * np.cos(phi) + 0j
    df0 = -2 * J * np.cos(k) * np.sin(phi) - 2j * P * np.sin(k)
    dfy = -2j * params.g_c * np.sin(k)
    dfz = -2 * J * np.sin(k) * np.cos(phi) + 0j
    return (f0, fy, fz), (df0, dfy, dfz)


def bloch_matrix(params: ModelParams, k: float) -> BlochMatrix:
    """Momentum-space dynamical matrix.

    Uses ``H(k) = sum_r H_{j, j+r} exp(-i k r)``; with this convention the
    periodic chain of ``N`` sites has eigenvalues ``E(k_m)``, ``k_m = 2 pi m / N``.
    """
    if not -math.pi - 1e-12 <= k <= math.pi + 1e-12:
        raise ValueError(f"k must lie in [-pi, pi], got {k}")
    (f0, fy, fz), _ = bloch_coefficients(params, k)
    f0, fy, fz = complex(f0), complex(fy), complex(fz)
    matrix = f0 * np.eye(2) + fy * PAULI_Y + fz * PAULI_Z
    return BlochMatrix(k, f0, 0j, fy, fz, matrix)


@dataclass(frozen=True)
class DoubledMatrix:
    omega: float
    entries: np.ndarray

    @property
    def tau_z(self) -> np.ndarray:
        half = self.entries.shape[0] // 2
        return np.diag(np.r_[np.ones(half), -np.ones(half)])


def build_doubled_matrix(H, omega: float) -> DoubledMatrix:
    """Hermitian chiral matrix ``[[0, omega - H], [omega - H^dag, 0]]``."""
    if not math.isfinite(omega):
        raise ValueError("omega must be finite")
    if isinstance(H, DynamicalMatrix):
        h = H.entries
    elif isinstance(H, BlochMatrix):
        h = H.matrix
    else:
        h = np.asarray(H, dtype=complex)
    shifted = omega * np.eye(h.shape[0]) - h
    zero = np.zeros_like(shifted)
    entries = np.block([[zero, shifted], [shifted.conj().T, zero]])
    entries.setflags(write=False)
    return DoubledMatrix(float(omega), entries)
