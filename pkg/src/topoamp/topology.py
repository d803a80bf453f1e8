"""Winding numbers of the Bloch dynamical matrix and phase diagrams."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import numpy as np

from .model import ModelParams, bloch_coefficients, build_dynamical_matrix
from .spectral import stability_report

MAX_GRID = 2**20
TRACE_MAX_GRID = 2**16
SENTINEL = -9999
SWEEPABLE = ("gamma", "pump", "omega", "delta")


class GapClosingError(RuntimeError):
    """``omega`` lies on (or numerically at) a Bloch eigenvalue loop."""

    def __init__(self, message: str, k: float | None = None, distance: float | None = None):
        super().__init__(message)
        self.k = k
        self.distance = distance


class WindingConvergenceError(RuntimeError):
    pass


def _k_grid(n_k: int) -> np.ndarray:
    return -math.pi + 2 * math.pi * np.arange(n_k) / n_k


def _shifted_bloch(params: ModelParams, omega: float, k: np.ndarray):
    """Return ``omega - H(k)`` and its k-derivative as (n, 2, 2) stacks."""
    (f0, fy, fz), (df0, dfy, dfz) = bloch_coefficients(params, k)
    # f0 + fy sy + fz sz  =  [[f0 + fz, -i fy], [i fy, f0 - fz]]
    h = np.empty(k.shape + (2, 2), dtype=complex)
    h[..., 0, 0] = f0 + fz
    h[..., 0, 1] = -1j * fy
    h[..., 1, 0] = 1j * fy
    h[..., 1, 1] = f0 - fz
    dh = np.empty_like(h)
    dh[..., 0, 0] = df0 + dfz
    dh[..., 0, 1] = -1j * dfy
    dh[..., 1, 0] = 1j * dfy
    dh[..., 1, 1] = df0 - dfz
    eye = np.eye(2)
    return omega * eye - h, -dh


def _check_gap(params, omega, k, tol=1e-10):
    (f0, fy, fz), _ = bloch_coefficients(params, k)
    root = np.sqrt(fz**2 + fy**2)
    dist = np.minimum(np.abs(omega - f0 - root), np.abs(omega - f0 + root))
    i = int(np.argmin(dist))
    if dist[i] < tol:
        raise GapClosingError(
            f"gap closes at k={k[i]:.6g} (|omega - E(k)| = {dist[i]:.2e})", float(k[i]), float(dist[i])
        )
    return float(dist[i])


def _trace_integral(params, omega, n_k):
    k = _k_grid(n_k)
    _check_gap(params, omega, k)
    m, dm = _shifted_bloch(params, omega, k)
    zero = np.zeros_like(m)
    mh = np.conj(np.swapaxes(m, -1, -2))
    dmh = np.conj(np.swapaxes(dm, -1, -2))
    doubled = np.block([[zero, m], [mh, zero]])
    ddoubled = np.block([[zero, dm], [dmh, zero]])
    prod = np.linalg.solve(doubled, ddoubled)
    tau = np.array([1, 1, -1, -1])
    integrand = np.einsum("nii,i->n", prod, tau)
    # trapezoid rule on a periodic grid; the overall minus sign makes the
    # result count anticlockwise windings of det(omega - H(k)).
    return -(integrand.mean() * 2 * math.pi) / (4j * math.pi)


def _settle(fn, params, omega, n_k, cap, tol=1e-3):
    raw = fn(params, omega, n_k)
    while True:
        close = abs(raw.real - round(raw.real)) < tol and abs(raw.imag) < tol
        if n_k >= cap:
            break
        refined = fn(params, omega, 2 * n_k)
        n_k *= 2
        stable_step = abs(refined - raw) < tol
        raw = refined
        if close and stable_step:
            break
    return raw


def winding_trace(params: ModelParams, omega: float, n_k: int = 1024, max_n_k: int = TRACE_MAX_GRID) -> float:
    """Winding ``W1(omega)`` from the chiral trace formula over the doubled Bloch matrix.

    The integrand uses analytic k-derivatives and the trapezoid rule; the grid is
    doubled until the value is within 1e-3 of an integer and stops changing.
    Returns the raw real value.
    """
    if n_k < 64:
        raise ValueError("n_k must be at least 64")
    return float(_settle(_trace_integral, params, omega, n_k, max_n_k).real)


def _reduced_integral(params, omega, n_k):
    k = _k_grid(n_k)
    _check_gap(params, omega, k)
    m, dm = _shifted_bloch(params, omega, k)
    integrand = np.trace(np.linalg.solve(m, dm), axis1=-2, axis2=-1)
    return integrand.mean() * 2 * math.pi / (2j * math.pi)


def winding_trace_reduced(params: ModelParams, omega: float, n_k: int = 1024, max_n_k: int = TRACE_MAX_GRID) -> float:
    """Same invariant from ``(1/2 pi i) int tr[(omega - H)^-1 d_k (omega - H)]``."""
    if n_k < 64:
        raise ValueError("n_k must be at least 64")
    return float(_settle(_reduced_integral, params, omega, n_k, max_n_k).real)


@dataclass(frozen=True)
class BandPath:
    params: ModelParams
    k_grid: np.ndarray
    e_plus: np.ndarray
    e_minus: np.ndarray
    swapped: bool


def band_path(params: ModelParams, omega: float = 0.0, n_k: int = 1024) -> BandPath:
    """Track ``E+-(k) = f0 +- sqrt(fz^2 + fy^2)`` continuously across the zone.

    Each square root is matched to the nearest of the two candidates at the next
    k point, using a first-order prediction from the analytic derivative so that
    branches pass straight through band crossings. Labels are fixed at k = 0,
    where ``e_plus`` uses the principal root. ``omega`` is accepted for
    interface symmetry; the bands do not depend on it.
    """
    if n_k < 64:
        raise ValueError("n_k must be at least 64")
    k = _k_grid(n_k)
    (f0, fy, fz), (_, dfy, dfz) = bloch_coefficients(params, k)
    root = np.sqrt(fz**2 + fy**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(root != 0, (fz * dfz + fy * dfy) / root, 0.0)
    h = 2 * math.pi / n_k
    guess = root + h * slope
    nxt = np.roll(root, -1)
    flips = np.abs(nxt + guess) < np.abs(nxt - guess)
    parity = np.concatenate([[False], np.cumsum(flips[:-1]) % 2 == 1])
    parity ^= parity[n_k // 2]  # k = 0 keeps the principal root
    tracked = np.where(parity, -root, root)
    # the step from the last grid point back to k = -pi closes the loop
    swapped = bool(flips[-1] ^ parity[-1] ^ parity[0])
    return BandPath(params, k, f0 + tracked, f0 - tracked, swapped)


def _loop_winding(values: np.ndarray, omega: float):
    z = omega - values
    closed = np.append(z, z[0])
    steps = np.angle(closed[1:] / closed[:-1])
    return steps.sum() / (2 * math.pi), np.abs(steps).max(), np.abs(z).min()


@dataclass(frozen=True)
class BandWindings:
    w_plus: int
    w_minus: int
    swapped: bool
    n_k: int


def band_windings(params: ModelParams, omega: float, n_k: int = 1024, max_n_k: int = MAX_GRID) -> BandWindings:
    """Windings of ``omega - E+-(k)``; refines until both are integers.

    If the two branches exchange over one period the combined loop is wound
    once, split as evenly as possible between them, and ``swapped`` is set.
    """
    while True:
        path = band_path(params, omega, n_k)
        dist = float(min(np.abs(omega - path.e_plus).min(), np.abs(omega - path.e_minus).min()))
        if dist < 1e-8:
            raise GapClosingError(f"omega={omega} lies on a band loop", distance=dist)
        speed = max(np.abs(np.diff(path.e_plus)).max(), np.abs(np.diff(path.e_minus)).max()) * n_k
        if speed / max_n_k > dist * math.pi / 4:
            raise WindingConvergenceError(
                f"band winding needs more than {max_n_k} points; min |omega - E(k)| = {dist:.2e}"
            )
        if path.swapped:
            raw, max_step, _ = _loop_winding(np.concatenate([path.e_plus, path.e_minus]), omega)
        else:
            rp, sp, _ = _loop_winding(path.e_plus, omega)
            rm, sm, _ = _loop_winding(path.e_minus, omega)
            raw, max_step = np.array([rp, rm]), max(sp, sm)
        raw = np.atleast_1d(raw)
        integral = np.all(np.abs(raw - np.round(raw)) < 1e-3)
        if integral and max_step < math.pi / 4:
            break
        if n_k >= max_n_k:
            raise WindingConvergenceError(
                f"band winding not converged at n_k={n_k}; min |omega - E(k)| = {dist:.2e}"
            )
        n_k *= 2
    if path.swapped:
        total = int(round(raw[0]))
        w_plus = -((-total) // 2)
        return BandWindings(w_plus, total - w_plus, True, n_k)
    return BandWindings(int(round(raw[0])), int(round(raw[1])), False, n_k)


def winding_band(path: BandPath, omega: float, branch: str) -> int:
    """Integer winding of ``omega - E_branch(k)`` for ``branch`` in {"plus", "minus"}."""
    if branch not in ("plus", "minus"):
        raise ValueError("branch must be 'plus' or 'minus'")
    res = band_windings(path.params, omega, path.k_grid.size)
    return res.w_plus if branch == "plus" else res.w_minus


@dataclass(frozen=True)
class SweepSpec:
    name: str
    start: float
    stop: float
    num: int

    @classmethod
    def parse(cls, text: str) -> "SweepSpec":
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError(f"sweep must look like name:start:stop:num, got {text!r}")
        name, start, stop, num = parts
        if name not in SWEEPABLE:
            raise ValueError(f"cannot sweep {name!r}; choose from {SWEEPABLE}")
        spec = cls(name, float(start), float(stop), int(num))
        if spec.num < 1:
            raise ValueError("sweep needs at least one point")
        return spec

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)

    def __str__(self):
        return f"{self.name}:{self.start!r}:{self.stop!r}:{self.num}"


@dataclass(frozen=True)
class PhaseDiagramGrid:
    """Arrays are indexed ``[ix, iy]``. Failed points hold ``SENTINEL`` / NaN."""

    axis_x: SweepSpec
    axis_y: SweepSpec
    w1_raw: np.ndarray
    w1: np.ndarray
    w_plus: np.ndarray
    w_minus: np.ndarray
    stable: np.ndarray
    max_im_eig: np.ndarray
    errors: tuple

    COLUMNS = ("x_name", "x_value", "y_name", "y_value", "w1_raw", "w1", "w_plus", "w_minus", "stable", "max_im_eig")

    def rows(self):
        xs, ys = self.axis_x.values(), self.axis_y.values()
        for ix, x in enumerate(xs):
            for iy, y in enumerate(ys):
                yield (
                    self.axis_x.name, x, self.axis_y.name, y,
                    self.w1_raw[ix, iy], int(self.w1[ix, iy]), int(self.w_plus[ix, iy]),
                    int(self.w_minus[ix, iy]), int(self.stable[ix, iy]), self.max_im_eig[ix, iy],
                )


def _point(params, omega, n_k):
    out = {"w1_raw": math.nan, "w1": SENTINEL, "w_plus": SENTINEL, "w_minus": SENTINEL, "error": None}
    try:
        raw = winding_trace(params, omega, n_k)
        out["w1_raw"] = raw
        if abs(raw - round(raw)) < 1e-3:
            out["w1"] = int(round(raw))
        bw = band_windings(params, omega, n_k)
        out["w_plus"], out["w_minus"] = bw.w_plus, bw.w_minus
    except (GapClosingError, WindingConvergenceError, np.linalg.LinAlgError) as exc:
        out["error"] = str(exc)
    return out


def phase_diagram(
    params: ModelParams,
    sweep_x: SweepSpec,
    sweep_y: SweepSpec,
    n_k: int = 1024,
    threads: int | None = None,
) -> PhaseDiagramGrid:
    """Scan two of ``gamma, pump, omega, delta``.

    Stability is evaluated for the open chain of ``params.n_sites`` sites.
    Point failures are kept in the grid as sentinels.
    """
    if sweep_x.name == sweep_y.name:
        raise ValueError("sweep axes must differ")
    xs, ys = sweep_x.values(), sweep_y.values()
    tasks = []
    for x in xs:
        for y in ys:
            values = {sweep_x.name: x, sweep_y.name: y}
            omega = values.pop("omega", 0.0)
            tasks.append((params.replace(**values), float(omega)))

    stab_cache: dict[ModelParams, tuple[bool, float]] = {}
    for p, _ in tasks:
        if p not in stab_cache:
            stab_cache[p] = None

    def stab(p):
        rep = stability_report(build_dynamical_matrix(p, "open"))
        return rep.stable, rep.max_im_eigenvalue

    with ThreadPoolExecutor(max_workers=threads) as pool:
        keys = list(stab_cache)
        for p, res in zip(keys, pool.map(stab, keys)):
            stab_cache[p] = res
        points = list(pool.map(lambda t: _point(t[0], t[1], n_k), tasks))

    shape = (xs.size, ys.size)
    w1_raw = np.full(shape, math.nan)
    w1, wp, wm = (np.full(shape, SENTINEL, dtype=int) for _ in range(3))
    stable = np.zeros(shape, dtype=bool)
    max_im = np.full(shape, math.nan)
    errors = []
    for idx, ((p, omega), pt) in enumerate(zip(tasks, points)):
        ix, iy = divmod(idx, ys.size)
        w1_raw[ix, iy] = pt["w1_raw"]
        w1[ix, iy], wp[ix, iy], wm[ix, iy] = pt["w1"], pt["w_plus"], pt["w_minus"]
        stable[ix, iy], max_im[ix, iy] = stab_cache[p]
        if pt["error"]:
            errors.append((ix, iy, pt["error"]))
    return PhaseDiagramGrid(sweep_x, sweep_y, w1_raw, w1, wp, wm, stable, max_im, tuple(errors))

