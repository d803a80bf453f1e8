"""Singular spectra of ``omega - H``, zero-mode counting and stability."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import DynamicalMatrix, ModelParams, build_doubled_matrix, build_dynamical_matrix

logger = logging.getLogger(__name__)

ZERO_MODE_THRESHOLD = 1e-2
STABILITY_EPSILON = 1e-9


class SpectrumError(RuntimeError):
    """SVD or eigensolver failure, or a violated consistency check."""


@dataclass(frozen=True)
class SingularSpectrum:
    omega: float
    values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    periodic: bool = False

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.values) @ self.right_vectors.conj().T


def singular_spectrum(H: DynamicalMatrix, omega: float, check: bool = True) -> SingularSpectrum:
    """SVD of ``omega - H`` with values in ascending order.

    With ``check`` on, the reconstruction and the chiral pairing against the
    doubled matrix are both verified.
    """
    h = H.entries
    shifted = omega * np.eye(h.shape[0]) - h
    try:
        u, s, vh = np.linalg.svd(shifted)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"SVD did not converge at omega={omega}") from exc
    order = np.argsort(s)
    s, u, v = s[order], u[:, order], vh.conj().T[:, order]
    spec = SingularSpectrum(float(omega), s, u, v, periodic=H.boundary == "periodic")
    if spec.periodic:
        logger.info("singular spectrum requested for a periodic chain")
    if check:
        scale = max(np.linalg.norm(shifted), 1e-300)
        err = np.linalg.norm(spec.reconstruct() - shifted) / scale
        if err > 1e-10:
            raise SpectrumError(f"SVD reconstruction error {err:.2e}")
        check_chiral_pairing(H, omega, s)
    return spec


def check_chiral_pairing(H: DynamicalMatrix, omega: float, values: np.ndarray, rtol: float = 1e-9):
    """Compare the doubled-matrix eigenvalues with ``+-values``."""
    eig = np.linalg.eigvalsh(build_doubled_matrix(H, omega).entries)
    paired = np.sort(np.concatenate([-values, values]))
    scale = max(values.max(initial=0.0), 1.0)
    err = np.abs(eig - paired).max()
    if err > rtol * scale:
        raise SpectrumError(f"chiral pairing mismatch {err:.2e}")
    return err


def zero_mode_census(spec: SingularSpectrum, threshold: float = ZERO_MODE_THRESHOLD) -> tuple[int, float]:
    """Count singular values below ``threshold``; also return the smallest one above it."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    values = spec.values
    count = int(np.count_nonzero(values < threshold))
    gap = float(values[count]) if count < values.size else float("inf")
    return count, gap


@dataclass(frozen=True)
class StabilityReport:
    max_im_eigenvalue: float
    stable: bool
    spectrum: np.ndarray
    epsilon: float = STABILITY_EPSILON


def stability_report(H: DynamicalMatrix, epsilon: float = STABILITY_EPSILON) -> StabilityReport:
    """Largest imaginary part of the double-precision eigenvalues of ``H``.

    Long non-reciprocal chains are strongly non-normal, so rounding-level
    perturbations can push eigenvalues far from their exact-arithmetic
    positions. The verdict is that of the perturbed (physical) matrix.
    """
    try:
        eig = np.linalg.eigvals(H.entries)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError("eigensolver failed") from exc
    top = float(eig.imag.max())
    return StabilityReport(top, top < epsilon, eig, epsilon)


def stability_onset(params: ModelParams, sizes: Sequence[int], epsilon: float = STABILITY_EPSILON):
    """First size in ``sizes`` whose open chain is unstable, or ``None``.

    Also returns the list of ``(N, max Im eigenvalue)`` pairs.
    """
    record = []
    onset = None
    for n in sizes:
        rep = stability_report(build_dynamical_matrix(params.replace(n_sites=n)), epsilon)
        record.append((n, rep.max_im_eigenvalue))
        if onset is None and not rep.stable:
            onset = n
    return onset, record


def splitting_decay_fit(
    params: ModelParams,
    omega: float,
    sizes: Sequence[int],
    floor: float = 1e-13,
    require_stable: bool = True,
) -> tuple[float, float, float]:
    """Fit ``log(min singular value) = slope * N + intercept``.

    Returns ``(slope, intercept, r2)``. Values below ``floor`` are dropped
    with a warning since they sit at the numerical noise level.
    """
    sizes = sorted(set(int(n) for n in sizes))
    if len(sizes) < 4:
        raise ValueError("splitting_decay_fit needs at least four sizes")
    xs, ys = [], []
    for n in sizes:
        H = build_dynamical_matrix(params.replace(n_sites=n))
        if require_stable and not stability_report(H).stable:
            raise ValueError(f"chain of {n} sites is dynamically unstable")
        smallest = singular_spectrum(H, omega, check=False).values[0]
        if smallest <= floor:
            warnings.warn(f"N={n}: smallest singular value {smallest:.1e} below floor, skipped")
            continue
        xs.append(n)
        ys.append(np.log(smallest))
    if len(xs) < 2:
        raise ValueError("too few sizes left after removing values below the floor")
    xs, ys = np.array(xs, float), np.array(ys)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    total = np.sum((ys - ys.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / total if total > 0 else 1.0
    return float(slope), float(intercept), float(r2)
