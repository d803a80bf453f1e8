"""Seeded on-site disorder ensembles.

Offsets come from numpy's Philox counter-based generator keyed by
``(seed, realization)``; site ``j`` takes the ``j``-th 64-bit output of that
stream. The same key therefore always gives the same vector, and each
realization uses the same uniforms at every disorder strength.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import DisorderOffsets, ModelParams, build_dynamical_matrix
from .spectral import SpectrumError, singular_spectrum

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class EnsembleSpec:
    base_params: ModelParams
    strength: float
    n_realizations: int = 100
    seed: int = 0
    omega: float = 0.0

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be at least 1")
        if self.strength < 0:
            raise ValueError("disorder strength must be non-negative")


def uniform_stream(seed: int, realization: int, n: int) -> np.ndarray:
    """``n`` doubles in [0, 1) from the Philox stream keyed by ``(seed, realization)``."""
    bitgen = np.random.Philox(key=np.array([seed & _MASK64, realization & _MASK64], dtype=np.uint64))
    raw = np.asarray(bitgen.random_raw(n), dtype=np.uint64)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def sample_offsets(spec: EnsembleSpec, realization: int) -> DisorderOffsets:
    if not 0 <= realization < spec.n_realizations:
        raise ValueError(f"realization {realization} outside [0, {spec.n_realizations})")
    u = uniform_stream(spec.seed, realization, spec.base_params.n_sites)
    offsets = spec.strength * (2.0 * u - 1.0)
    return DisorderOffsets(offsets, spec.seed, realization, spec.strength)


def _realization_values(spec: EnsembleSpec, r: int):
    H = build_dynamical_matrix(spec.base_params, "open", sample_offsets(spec, r))
    try:
        return singular_spectrum(H, spec.omega, check=False).values
    except SpectrumError as exc:
        logger.warning("realization %d failed: %s", r, exc)
        return None


@dataclass(frozen=True)
class EnsembleResult:
    spec: EnsembleSpec
    mean_values: np.ndarray
    values: np.ndarray  # (n_ok, 2N), rows in realization order
    realizations: np.ndarray
    n_failed: int

    @property
    def min_sv(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def second_sv(self) -> np.ndarray:
        return self.values[:, 1]


def ensemble_spectrum(spec: EnsembleSpec, threads: int | None = None) -> EnsembleResult:
    """Sorted singular spectra of every realization and their index-wise mean."""
    indices = range(spec.n_realizations)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda r: _realization_values(spec, r), indices))
    ok = [(r, v) for r, v in zip(indices, results) if v is not None]
    if not ok:
        raise SpectrumError("every realization failed")
    values = np.array([v for _, v in ok])
    return EnsembleResult(
        spec, values.mean(axis=0), values, np.array([r for r, _ in ok]), len(results) - len(ok)
    )


@dataclass(frozen=True)
class SplittingCurve:
    strengths: np.ndarray
    lowest_pair_mean: np.ndarray
    second_pair_mean: np.ndarray
    lowest_pair_stderr: np.ndarray
    second_pair_stderr: np.ndarray
    n_ok: np.ndarray


def _stderr(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0


def splitting_curve(
    base_params: ModelParams,
    omega: float,
    strengths: Sequence[float],
    n_realizations: int = 100,
    seed: int = 0,
    threads: int | None = None,
) -> SplittingCurve:
    """Mean smallest and second-smallest singular values against disorder strength."""
    strengths = np.asarray(strengths, dtype=float)
    if np.any(np.diff(strengths) < 0):
        raise ValueError("strengths must be sorted ascending")
    low, second, low_err, second_err, n_ok = [], [], [], [], []
    for w in strengths:
        res = ensemble_spectrum(EnsembleSpec(base_params, float(w), n_realizations, seed, omega), threads)
        low.append(res.min_sv.mean())
        second.append(res.second_sv.mean())
        low_err.append(_stderr(res.min_sv))
        second_err.append(_stderr(res.second_sv))
        n_ok.append(res.values.shape[0])
    return SplittingCurve(
        strengths, np.array(low), np.array(second), np.array(low_err), np.array(second_err), np.array(n_ok)
    )
