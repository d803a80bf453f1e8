import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topoamp.model import ModelParams, build_dynamical_matrix
from topoamp.spectral import (
    SpectrumError,
    check_chiral_pairing,
    singular_spectrum,
    splitting_decay_fit,
    stability_onset,
    stability_report,
    zero_mode_census,
)


def test_ascending_and_reconstructs(generic):
    H = build_dynamical_matrix(generic)
    spec = singular_spectrum(H, 0.4)
    assert np.all(np.diff(spec.values) >= 0)
    np.testing.assert_allclose(spec.reconstruct(), 0.4 * np.eye(2 * generic.n_sites) - H.entries, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(-2, 2), st.floats(0, 3), st.floats(0, 2), st.floats(0, 2), st.floats(0, 6), st.integers(2, 14),
    st.floats(-4, 4),
)
def test_chiral_pairing_property(delta, phi, g_s, g_c, gamma, n, omega):
    p = ModelParams(delta=delta, phi=phi, g_s=g_s, g_c=g_c, gamma=gamma, n_sites=n)
    H = build_dynamical_matrix(p)
    spec = singular_spectrum(H, omega, check=False)
    assert check_chiral_pairing(H, omega, spec.values) <= 1e-9 * max(1, spec.values.max())


def test_pairing_mismatch_detected(canonical):
    H = build_dynamical_matrix(canonical)
    good = singular_spectrum(H, 0.0).values
    with pytest.raises(SpectrumError):
        check_chiral_pairing(H, 0.0, good * 1.01)


def test_canonical_has_one_zero_mode(canonical):
    count, gap = zero_mode_census(singular_spectrum(build_dynamical_matrix(canonical), 0.0))
    assert count == 1
    assert gap > 0.5


def test_double_hatano_nelson_has_two_zero_modes(double_hn):
    count, _ = zero_mode_census(singular_spectrum(build_dynamical_matrix(double_hn.replace(n_sites=30)), 0.0))
    assert count == 2


def test_trivial_phase_has_no_zero_mode(canonical):
    spec = singular_spectrum(build_dynamical_matrix(canonical.replace(delta=5.0)), 0.0)
    assert zero_mode_census(spec) == (0, pytest.approx(2.4177071898, rel=1e-8))
    with pytest.raises(ValueError):
        zero_mode_census(spec, 0.0)


def test_canonical_splitting_decays_like_two_to_minus_n(canonical):
    slope, _, r2 = splitting_decay_fit(canonical, 0.0, range(6, 13))
    assert slope == pytest.approx(-math.log(2), abs=0.02)
    assert r2 > 0.999


def test_hermitian_gapped_minimum_matches_band_edge():
    p = ModelParams(delta=3.0, phi=0.0, g_s=0, g_c=0, gamma=0)
    for n in range(6, 13):
        smallest = singular_spectrum(build_dynamical_matrix(p.replace(n_sites=n)), 0.0).values[0]
        # open tight-binding chain: |Delta + 2 cos(pi m / (N + 1))|, minimum at m = N
        assert smallest == pytest.approx(3 + 2 * math.cos(math.pi * n / (n + 1)), abs=1e-12)


def test_splitting_fit_rejects_unstable_and_short(double_hn):
    with pytest.raises(ValueError):
        splitting_decay_fit(double_hn, 0.0, [10, 11, 12])
    with pytest.raises(ValueError):
        splitting_decay_fit(double_hn, 0.0, [12, 20, 60, 70])


def test_stability_dichotomy(canonical):
    assert stability_report(build_dynamical_matrix(canonical, "open")).stable
    rep = stability_report(build_dynamical_matrix(canonical, "periodic"))
    assert not rep.stable and rep.max_im_eigenvalue > 0.9


def test_open_canonical_spectrum_clusters(canonical):
    # exact spectrum is {-i, -3i}; rounding spreads the highly degenerate values by ~0.1
    rep = stability_report(build_dynamical_matrix(canonical))
    dist = np.minimum(np.abs(rep.spectrum + 1j), np.abs(rep.spectrum + 3j))
    assert dist.max() < 0.2
    assert rep.max_im_eigenvalue < -0.8


def test_double_hn_onset(double_hn):
    onset, record = stability_onset(double_hn, range(12, 61, 4))
    assert onset is not None and 40 <= onset <= 60
    assert dict(record)[12] == pytest.approx(-0.4, abs=1e-9)
