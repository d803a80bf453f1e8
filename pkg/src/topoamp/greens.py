"""Finite and semi-infinite Green's functions of the dissipative chain.

Two-by-two objects live in the Nambu basis of one site, ``(a_j, a_j^dag)``.
``v_plus`` is the block ``H_{j+1, j}`` that carries an excitation one site to
the right and ``v_minus = H_{j, j+1}`` carries it back. The surface Green's
function of the chain starting at site 0 then obeys::

    G00 = g00 [1 + v_minus G00 v_plus G00]

and propagation away from the edge is governed by ``G00 v_plus``.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import DynamicalMatrix, ModelParams, build_dynamical_matrix

COND_LIMIT = 1e12
N_MAX = 512


class GreenError(RuntimeError):
    pass


class IllConditionedError(GreenError):
    def __init__(self, message: str, cond: float):
        super().__init__(message)
        self.cond = cond


class SurfaceConvergenceError(GreenError):
    def __init__(self, message: str, last_delta: float = math.nan):
        super().__init__(message)
        self.last_delta = last_delta


class DefectiveSplitError(GreenError):
    """The 2x2 matrix has (numerically) coincident eigenvalues."""


@dataclass(frozen=True)
class FiniteGreen:
    omega: float
    matrix: np.ndarray
    params: ModelParams
    cond: float
    residual: float

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0] // 2

    def normal(self, j: int, l: int) -> complex:
        return self.matrix[j, l]

    def anomalous(self, j: int, l: int) -> complex:
        return self.matrix[j, self.n_sites + l]

    def block(self, j: int, l: int) -> np.ndarray:
        n = self.n_sites
        m = self.matrix
        return np.array([[m[j, l], m[j, n + l]], [m[n + j, l], m[n + j, n + l]]])


def finite_green(H: DynamicalMatrix, omega: float, cond_limit: float = COND_LIMIT) -> FiniteGreen:
    """Exact ``(omega - H)^-1``; refuses matrices with condition number above ``cond_limit``.

    ``cond_limit=math.inf`` disables the check.

    Amplifying chains are exponentially non-normal, so the absolute residual
    ``max|(omega - H) G - 1|`` grows with the condition number even when the
    large entries are accurate. A warning is raised only if the residual is
    also large relative to ``max|omega - H| * max|G|``.
    """
    shifted = omega * np.eye(H.entries.shape[0]) - H.entries
    cond = float(np.linalg.cond(shifted))
    if cond_limit < math.inf and not cond < cond_limit:
        raise IllConditionedError(
            f"omega - H is near singular at omega={omega} (condition number {cond:.2e})", cond
        )
    try:
        inv = np.linalg.inv(shifted)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError(f"omega - H is singular at omega={omega}", cond) from exc
    residual = float(np.abs(shifted @ inv - np.eye(shifted.shape[0])).max())
    backward = residual / (np.abs(shifted).max() * np.abs(inv).max())
    if residual > 1e-9 and backward > 1e-12:
        warnings.warn(f"inverse residual {residual:.1e} (cond {cond:.1e})", stacklevel=2)
    inv.setflags(write=False)
    return FiniteGreen(float(omega), inv, H.params, cond, residual)


def bare_site_green(params: ModelParams, omega: float) -> np.ndarray:
    """Green's function of one isolated site."""
    damp = 0.5j * (params.gamma - 4 * params.pump)
    m = np.array(
        [[omega - params.delta + damp, -params.g_s], [params.g_s, omega + params.delta + damp]]
    )
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if abs(det) < 1e-300:
        raise GreenError(f"isolated site is resonant at omega={omega}")
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det


def hopping_matrices(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Forward and backward Nambu hopping blocks ``(v_plus, v_minus)``."""
    J, phi, P, gc = params.hop, params.phi, params.pump, params.g_c
    v_plus = np.array([[J * np.exp(1j * phi) + 1j * P, gc], [-gc, -J * np.exp(-1j * phi) + 1j * P]])
    v_minus = np.array([[J * np.exp(-1j * phi) + 1j * P, gc], [-gc, -J * np.exp(1j * phi) + 1j * P]])
    return v_plus, v_minus


@functools.lru_cache(maxsize=256)
def transfer_direction(params: ModelParams) -> str:
    """Which of ``v_plus``/``v_minus`` moves an excitation to larger site index.

    Read off the assembled dynamical matrix so that the semi-infinite formulas
    always agree with the finite chain. Returns ``"plus"`` or ``"minus"``.
    """
    H = build_dynamical_matrix(params.replace(n_sites=3))
    v_plus, v_minus = hopping_matrices(params)
    down = H.site_block(1, 0)
    if np.allclose(down, v_plus, atol=1e-14) and np.allclose(H.site_block(0, 1), v_minus, atol=1e-14):
        return "plus"
    if np.allclose(down, v_minus, atol=1e-14) and np.allclose(H.site_block(0, 1), v_plus, atol=1e-14):
        return "minus"
    raise GreenError("hopping blocks do not match the dynamical matrix")


def oriented_hoppings(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(forward, backward)`` hopping blocks."""
    v_plus, v_minus = hopping_matrices(params)
    if transfer_direction(params) == "plus":
        return v_plus, v_minus
    return v_minus, v_plus


@dataclass(frozen=True)
class SurfaceGreen:
    omega: float
    g00: np.ndarray
    G00: np.ndarray
    v_plus: np.ndarray
    v_minus: np.ndarray
    residual: float
    solver: str
    steps: int

    @property
    def forward_transfer(self) -> np.ndarray:
        return self.G00 @ self.v_plus

    @property
    def backward_transfer(self) -> np.ndarray:
        return self.G00 @ self.v_minus


def surface_residual(g00, G00, forward, backward) -> float:
    return float(np.linalg.norm(G00 - g00 @ (np.eye(2) + backward @ G00 @ forward @ G00)))


def surface_green(
    params: ModelParams,
    omega: float,
    solver: str = "finite_size_limit",
    *,
    tol: float = 1e-11,
    n_max: int = N_MAX,
    mixing: float = 0.5,
    max_iter: int = 100_000,
) -> SurfaceGreen:
    """Edge Green's function of the semi-infinite chain.

    ``finite_size_limit`` grows the chain one site at a time,
    ``S <- (g00^-1 - v_back S v_fwd)^-1``, which is exactly the (0, 0) block of
    the finite-chain inverse, until successive sizes differ by less than
    ``tol``. ``fixed_point`` iterates the nonlinear surface equation with
    damping; it can land on an unphysical root, so compare it with the former.

    The result is the steady-state response only for a dynamically stable
    chain. For unstable chains the recursion passes through finite-size
    resonances and may settle on a non-causal root.
    """
    g00 = bare_site_green(params, omega)
    forward, backward = oriented_hoppings(params)
    v_plus, v_minus = hopping_matrices(params)
    if solver == "finite_size_limit":
        g_inv = np.linalg.inv(g00)
        S = g00
        delta = math.inf
        for n in range(2, n_max + 1):
            try:
                new = np.linalg.inv(g_inv - backward @ S @ forward)
            except np.linalg.LinAlgError as exc:
                raise SurfaceConvergenceError(f"singular recursion step at N={n}", delta) from exc
            if not np.all(np.isfinite(new)):
                raise SurfaceConvergenceError(f"recursion overflowed at N={n}", delta)
            delta = float(np.linalg.norm(new - S))
            S = new
            if delta < tol * max(1.0, np.linalg.norm(S)):
                residual = surface_residual(g00, S, forward, backward)
                if residual < 1e-10 * max(1.0, np.linalg.norm(S)) ** 3:
                    return SurfaceGreen(float(omega), g00, S, v_plus, v_minus, residual, solver, n)
        raise SurfaceConvergenceError(
            f"edge Green's function not converged by N={n_max} (last change {delta:.2e})", delta
        )
    if solver == "fixed_point":
        G = g00.copy()
        delta = math.inf
        for it in range(1, max_iter + 1):
            target = g00 @ (np.eye(2) + backward @ G @ forward @ G)
            new = (1 - mixing) * G + mixing * target
            if not np.all(np.isfinite(new)):
                break
            delta = float(np.linalg.norm(new - G))
            G = new
            if delta < 1e-12:
                residual = surface_residual(g00, G, forward, backward)
                return SurfaceGreen(float(omega), g00, G, v_plus, v_minus, residual, solver, it)
        raise SurfaceConvergenceError(
            f"fixed-point iteration diverged or stalled (last change {delta:.2e}); "
            "use solver='finite_size_limit'",
            delta,
        )
    raise ValueError(f"unknown solver {solver!r}")


@dataclass(frozen=True)
class SpectralSplit:
    lambdas: tuple[complex, complex]
    projectors: tuple[np.ndarray, np.ndarray]
    zetas: tuple[complex, complex]

    def power(self, n: int) -> np.ndarray:
        if n == 0:
            return np.eye(2, dtype=complex)
        (lp, lm), (pp, pm) = self.lambdas, self.projectors
        return lp**n * pp + lm**n * pm


def _log(lam: complex) -> complex:
    if lam == 0:
        return complex(-math.inf, 0.0)
    return complex(np.log(lam))


def spectral_split(m: np.ndarray, tol: float = 1e-12) -> SpectralSplit:
    """Eigenvalues and spectral projectors of a 2x2 matrix, larger ``|lambda|`` first."""
    m = np.asarray(m, dtype=complex)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = np.sqrt(tr * tr - 4 * det)
    # pick the sign that avoids cancellation, then get the other root from det
    big = (tr + disc) / 2 if abs(tr + disc) >= abs(tr - disc) else (tr - disc) / 2
    small = det / big if big != 0 else 0j
    if abs(small) < 1e-15 * max(abs(big), np.abs(m).max()):
        small = 0j  # rank-deficient to working precision
    if abs(big - small) <= tol * max(1.0, abs(big)):
        raise DefectiveSplitError(f"coincident eigenvalues {big:.6g}, {small:.6g}")
    eye = np.eye(2)
    p_big = (m - small * eye) / (big - small)
    p_small = -(m - big * eye) / (big - small)
    scale = max(1.0, np.abs(p_big).max()) ** 2
    checks = (
        np.abs(p_big @ p_big - p_big).max(),
        np.abs(p_small @ p_small - p_small).max(),
        np.abs(p_big @ p_small).max(),
        np.abs(p_big + p_small - eye).max(),
    )
    recon = np.abs(big * p_big + small * p_small - m).max() / max(1.0, np.abs(m).max())
    if max(checks) > 1e-10 * scale or recon > 1e-10 * scale:
        raise DefectiveSplitError(f"projector algebra violated ({max(checks):.1e})")
    return SpectralSplit((complex(big), complex(small)), (p_big, p_small), (_log(big), _log(small)))


def coherence_lengths(params: ModelParams, omega: float, surface: SurfaceGreen | None = None):
    """Inverse coherence lengths ``(zeta_plus, zeta_minus)`` of forward propagation.

    ``Re zeta > 0`` means the corresponding component grows away from the edge.
    A zero eigenvalue gives ``-inf`` real part.
    """
    surface = surface or surface_green(params, omega)
    split = spectral_split(surface.G00 @ oriented_hoppings(params)[0])
    return split.zetas


def _geometric(x: complex, n: int) -> complex:
    if n <= 0:
        return 0j
    if abs(1 - x) < 1e-14:
        return complex(n)
    return (1 - x**n) / (1 - x)


def semi_infinite_green(
    params: ModelParams,
    omega: float,
    j: int,
    l: int,
    surface: SurfaceGreen | None = None,
) -> np.ndarray:
    """Nambu block ``G_{j,l}`` of the semi-infinite chain.

    ``G_{j,l} = T_f^{j-l} G00`` (or ``T_b^{l-j} G00``) plus
    ``sum_{r=0}^{min(j,l)-1} T_f^{j-r} T_b^{l-r} G00``, with forward and
    backward transfer objects ``T = G00 v``. Powers are evaluated through the
    spectral split; a defective transfer matrix falls back to explicit powers.
    """
    if j < 0 or l < 0:
        raise ValueError("site indices must be non-negative")
    surface = surface or surface_green(params, omega)
    S = surface.G00
    forward, backward = oriented_hoppings(params)
    t_f, t_b = S @ forward, S @ backward
    try:
        sf, sb = spectral_split(t_f), spectral_split(t_b)
    except DefectiveSplitError:
        warnings.warn("defective transfer matrix; using explicit matrix powers", stacklevel=2)
        mp = np.linalg.matrix_power
        lead = mp(t_f, j - l) if j >= l else mp(t_b, l - j)
        total = lead @ S
        for r in range(min(j, l)):
            total = total + mp(t_f, j - r) @ mp(t_b, l - r) @ S
        return total

    lead = sf.power(j - l) if j >= l else sb.power(l - j)
    total = lead @ S
    m = min(j, l)
    if m > 0:
        dj, dl = j - m + 1, l - m + 1
        for lam, p in zip(sf.lambdas, sf.projectors):
            for mu, q in zip(sb.lambdas, sb.projectors):
                coeff = lam**dj * mu**dl * _geometric(lam * mu, m)
                if coeff != 0:
                    total = total + coeff * (p @ q @ S)
    return total
