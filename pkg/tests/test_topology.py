import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topoamp.model import ModelParams, bloch_matrix
from topoamp.topology import (
    SENTINEL,
    GapClosingError,
    SweepSpec,
    WindingConvergenceError,
    band_path,
    band_windings,
    phase_diagram,
    winding_band,
    winding_trace,
    winding_trace_reduced,
)


@pytest.mark.parametrize(
    "overrides, omega, w1, wp, wm",
    [
        ({}, 0.0, 1, 1, 0),
        ({}, 1.5, 1, 1, 0),
        ({"gamma": 3.0}, 0.7, 1, 1, 0),
        ({"pump": 0.75, "g_s": 0.1, "g_c": 0.1}, 0.0, 2, 1, 1),
        ({"phi": 0.0}, 0.5, 0, 0, 0),
        ({"gamma": 1.0}, 0.0, 0, 1, -1),
        ({"delta": 5.0}, 0.0, 0, 0, 0),
    ],
)
def test_known_windings(overrides, omega, w1, wp, wm):
    p = ModelParams(**overrides)
    assert winding_trace(p, omega) == pytest.approx(w1, abs=1e-9)
    bw = band_windings(p, omega)
    assert (bw.w_plus, bw.w_minus) == (wp, wm)


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-1, 1), st.floats(0, math.pi), st.floats(0, 1.5), st.floats(0, 1.5), st.floats(0, 6),
    st.floats(0, 1), st.floats(-2, 2),
)
def test_trace_matches_band_sum(delta, phi, g_s, g_c, gamma, pump, omega):
    p = ModelParams(delta=delta, phi=phi, g_s=g_s, g_c=g_c, gamma=gamma, pump=pump)
    try:
        raw = winding_trace(p, omega, max_n_k=2**14)
        bw = band_windings(p, omega, max_n_k=2**16)
    except (GapClosingError, WindingConvergenceError):
        return
    assert raw == pytest.approx(round(raw), abs=1e-6)
    assert round(raw) == bw.w_plus + bw.w_minus
    assert winding_trace_reduced(p, omega, max_n_k=2**14) == pytest.approx(raw, abs=1e-6)


def test_gap_closing_is_reported(canonical):
    p = canonical.replace(gamma=2.0)
    with pytest.raises(GapClosingError) as info:
        winding_trace(p, 0.0)
    assert info.value.distance < 1e-10
    with pytest.raises(GapClosingError):
        band_windings(p, 0.0)


def test_grid_limit(canonical):
    with pytest.raises(WindingConvergenceError):
        band_windings(canonical.replace(gamma=2.0 + 1e-7), 0.0, n_k=64, max_n_k=128)
    with pytest.raises(ValueError):
        winding_trace(canonical, 0.0, n_k=8)


def test_band_path_labels_and_continuity(double_hn):
    path = band_path(double_hn, 0.0, 512)
    k0 = np.argmin(np.abs(path.k_grid))
    b = bloch_matrix(double_hn, 0.0)
    assert path.e_plus[k0] == pytest.approx(b.f0 + np.sqrt(b.fz**2 + b.fy**2))
    assert np.abs(np.diff(path.e_plus)).max() < 0.1
    assert not path.swapped
    assert winding_band(path, 0.0, "plus") == 1
    with pytest.raises(ValueError):
        winding_band(path, 0.0, "upper")


def test_bands_solve_the_bloch_eigenproblem(generic):
    path = band_path(generic, 0.0, 128)
    for i in range(0, 128, 17):
        eig = np.linalg.eigvals(bloch_matrix(generic, path.k_grid[i]).matrix)
        pair = np.array([path.e_plus[i], path.e_minus[i]])
        assert np.abs(eig[:, None] - pair[None, :]).min(axis=1).max() < 1e-12


def test_sweep_spec_parsing():
    s = SweepSpec.parse("gamma:0:6:13")
    assert s.values()[1] == pytest.approx(0.5)
    assert SweepSpec.parse(str(s)) == s
    for bad in ("gamma:0:6", "hop:0:1:3", "gamma:0:1:0"):
        with pytest.raises(ValueError):
            SweepSpec.parse(bad)


def test_phase_diagram_grid(canonical):
    grid = phase_diagram(canonical, SweepSpec.parse("gamma:1:5:5"), SweepSpec.parse("omega:-1:1:3"), 256, 2)
    assert grid.w1.shape == (5, 3)
    np.testing.assert_array_equal(grid.w1[:, 0], [0, 1, 1, 1, 1])
    assert grid.w1[1, 1] == SENTINEL and math.isnan(grid.w1_raw[1, 1])
    assert [e[:2] for e in grid.errors] == [(1, 1)]
    np.testing.assert_array_equal(grid.w_minus[0], -1)
    np.testing.assert_array_equal(grid.stable[:, 0], [False, False, True, True, True])
    rows = list(grid.rows())
    assert len(rows) == 15 and len(rows[0]) == len(grid.COLUMNS)
    assert rows[4][:4] == ("gamma", 2.0, "omega", 0.0)


def test_phase_diagram_thread_invariant(canonical):
    sx, sy = SweepSpec.parse("pump:0:1:3"), SweepSpec.parse("delta:-0.5:0.5:3")
    a = phase_diagram(canonical, sx, sy, 128, 1)
    b = phase_diagram(canonical, sx, sy, 128, 4)
    np.testing.assert_array_equal(a.w1_raw, b.w1_raw)
    np.testing.assert_array_equal(a.max_im_eig, b.max_im_eig)
    with pytest.raises(ValueError):
        phase_diagram(canonical, sx, sx)
