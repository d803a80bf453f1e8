"""Fast self-checks against closed forms and independent oracles.

Each check returns ``(name, passed, detail)``. The whole suite runs in a few
seconds; the slower ensemble and grid reproductions live in the test suite.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import jv

from .disorder import EnsembleSpec, sample_offsets
from .floquet import f_function, hopping_factor
from .greens import coherence_lengths, finite_green, semi_infinite_green, spectral_split, surface_green
from .model import ModelParams, build_doubled_matrix, build_dynamical_matrix
from .observables import amplifier_point, closed_form_gain, gain, quadrature_state, semi_infinite_gain
from .spectral import singular_spectrum, stability_report
from .topology import band_windings, winding_trace

CANONICAL = ModelParams()
DOUBLE_HN = ModelParams(pump=0.75, g_s=0.1, g_c=0.1)


def _gain_closed_form():
    H = build_dynamical_matrix(CANONICAL)
    worst = 0.0
    for w in np.linspace(-2, 2, 41):
        ref = closed_form_gain(CANONICAL, w, 8)
        worst = max(worst, abs(gain(finite_green(H, w), 8) - ref) / ref)
    semi = semi_infinite_gain(CANONICAL, 0.0, 8)
    ok = worst < 0.05 and abs(semi - 262144) / 262144 < 1e-6
    return ok, f"max rel. deviation {worst:.2e} for |omega|<=2, semi-infinite G_8(0)={semi:.10g}"


def _surface():
    s = surface_green(CANONICAL, 0.0)
    ref = np.array([[2j, 1], [-1, 2j]]) / -3
    err = np.abs(s.G00 - ref).max()
    return err < 1e-10 and s.residual < 1e-10, f"entry error {err:.1e}, residual {s.residual:.1e}"


def _transfer():
    s = surface_green(CANONICAL, 0.0)
    split = spectral_split(s.forward_transfer)
    lam_err = max(abs(split.lambdas[0] - 2), abs(split.lambdas[1]))
    proj_err = np.abs(split.projectors[0] - 0.5 * np.array([[1, -1j], [1j, 1]])).max()
    zeta = coherence_lengths(CANONICAL, 0.0)[0]
    near = abs(coherence_lengths(CANONICAL.replace(gamma=2.0001), 0.0)[0])
    ok = lam_err < 1e-10 and proj_err < 1e-10 and abs(zeta - math.log(2)) < 1e-10 and near > 10
    return ok, f"lambda err {lam_err:.1e}, projector err {proj_err:.1e}, |zeta+| at gamma=2.0001: {near:.2f}"


def _windings():
    cases = [(CANONICAL, 0.0, 1), (DOUBLE_HN, 0.0, 2), (CANONICAL.replace(phi=0.0), 0.5, 0)]
    details, ok = [], True
    for p, w, expected in cases:
        w1 = round(winding_trace(p, w))
        bw = band_windings(p, w)
        ok &= w1 == expected == bw.w_plus + bw.w_minus
        details.append(f"W1={w1} (W+={bw.w_plus}, W-={bw.w_minus})")
    return ok, "; ".join(details)


def _stability():
    obc = stability_report(build_dynamical_matrix(CANONICAL, "open")).stable
    pbc = stability_report(build_dynamical_matrix(CANONICAL, "periodic")).stable
    small = stability_report(build_dynamical_matrix(DOUBLE_HN.replace(n_sites=12))).stable
    large = stability_report(build_dynamical_matrix(DOUBLE_HN.replace(n_sites=60))).stable
    ok = obc and not pbc and small and not large
    return ok, f"canonical OBC stable={obc}, PBC stable={pbc}; double HN N=12 stable={small}, N=60 stable={large}"


def _chiral_pairing():
    rng = np.random.default_rng(7)
    for _ in range(5):
        p = ModelParams(
            delta=rng.normal(), phi=rng.uniform(0, math.pi), g_s=rng.uniform(0, 2), g_c=rng.uniform(0, 2),
            gamma=rng.uniform(0, 6), pump=rng.uniform(0, 1), n_sites=int(rng.integers(2, 20)),
        )
        H = build_dynamical_matrix(p)
        w = rng.normal()
        D = build_doubled_matrix(H, w)
        tz = D.tau_z
        if not np.array_equal(tz @ D.entries @ tz, -D.entries):
            return False, "chiral anticommutation not exact"
        singular_spectrum(H, w)  # raises on a pairing mismatch
    return True, "anticommutation exact, SVD/eigen pairing within 1e-9"


def _green_agreement():
    N = 40
    G = finite_green(build_dynamical_matrix(CANONICAL.replace(n_sites=N)), 0.3, cond_limit=math.inf)
    err = max(
        np.abs(semi_infinite_green(CANONICAL, 0.3, j, l) - G.block(j, l)).max() / np.abs(G.block(j, l)).max()
        for j in range(8) for l in range(8)
    )
    return err < 1e-6, f"max relative block error {err:.1e} (N={N}, j,l<8)"


def _noise():
    p = CANONICAL.replace(gamma=2.2)
    best = min(amplifier_point(p, w, 11, cond_limit=math.inf).n_add for w in np.linspace(-0.2, 0.2, 9))
    return best < 1.2, f"min n_add at gamma=2.2, last site: {best:.4f}"


def _squeezing():
    q = quadrature_state(finite_green(build_dynamical_matrix(CANONICAL), 0.0), None, 11)
    ok = q.var_p < 1 < 100 < q.var_x
    return ok, f"var_x={q.var_x:.4g}, var_p={q.var_p:.4g}"


def _bessel():
    n = np.arange(-60, 61)
    identity = abs(np.sum(jv(n, 2.3) ** 2) - 1)
    dc = abs(hopping_factor(1.7, 0.0) - 1)
    f = f_function(0.9, math.pi)
    return identity < 1e-12 and dc < 1e-12, f"|sum J_n^2 - 1| = {identity:.1e}, F(0.9, pi) = {f:.3e}"


def _determinism():
    spec = EnsembleSpec(CANONICAL.replace(n_sites=50), 0.2, 10, seed=12345)
    a = sample_offsets(spec, 3).offsets
    b = sample_offsets(spec, 3).offsets
    c = sample_offsets(spec, 4).offsets
    ok = np.array_equal(a, b) and not np.array_equal(a, c) and np.all(np.abs(a) <= 0.2)
    return ok, "same key reproduces, different realization differs"


CHECKS = (
    ("closed-form gain", _gain_closed_form),
    ("surface Green's function", _surface),
    ("transfer eigenvalues", _transfer),
    ("winding numbers", _windings),
    ("stability dichotomy", _stability),
    ("chiral pairing", _chiral_pairing),
    ("finite vs semi-infinite", _green_agreement),
    ("noise near quantum limit", _noise),
    ("squeezing", _squeezing),
    ("Bessel maps", _bessel),
    ("disorder determinism", _determinism),
)


def run_checks():
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
