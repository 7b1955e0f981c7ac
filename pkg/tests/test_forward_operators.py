import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risense.forward import (NoiseDescriptor, PhaseBook, aggregate_direct, derive_rng, path_factor,
                             snr_of, synthesize_noise, variance_for_snr)
from risense.geometry import (Pose, ReceiverPose, angular_roi, discretize_roi_cartesian, doa_roi,
                              make_uniform_linear_panel, unit_vectors)
from risense.operators import (FarFieldWarning, MeasurementSet, assemble_dedicated, assemble_shared,
                               assemble_single, incidence_matrix, measure, steering_row)
from risense.geometry import SphericalDirection
from risense.spectral import rank_bound

LAM = 0.01


def test_phase_book_quantization():
    rng = derive_rng(3)
    book = PhaseBook.random(50, 8, rng, bits=1)
    assert set(np.unique(book.phases)) <= {0.0, np.pi}
    with pytest.raises(ValueError):
        PhaseBook(np.full((2, 2), 0.3), bits=1)
    with pytest.raises(ValueError):
        PhaseBook(np.full((2, 2), 7.0))


def test_derive_rng_is_stream_independent():
    a = derive_rng(5, 1, 2).random(3)
    derive_rng(5, 9).random(100)
    np.testing.assert_array_equal(a, derive_rng(5, 1, 2).random(3))
    assert not np.allclose(a, derive_rng(5, 1, 3).random(3))


def test_path_factor():
    assert path_factor(2.0, 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        path_factor(0.0, 1.0)


def test_noise_statistics_and_snr_helpers():
    n = synthesize_noise(NoiseDescriptor(4.0, seed=1), 200_000)
    assert np.mean(np.abs(n) ** 2) == pytest.approx(4.0, rel=0.02)
    assert abs(np.mean(n.real * n.imag)) < 0.05
    var = variance_for_snr(10.0, 20.0)
    assert var == pytest.approx(0.1)
    assert snr_of(np.sqrt(10.0) * np.array([1.0]), var) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        NoiseDescriptor(-1.0)


def test_steering_row_matches_definition():
    panel = make_uniform_linear_panel(6, 0.004, LAM)
    d = SphericalDirection(0.4, 0.0)
    expected = np.exp(2j * np.pi * panel.local_positions[:, 0] * np.sin(0.4) / LAM)
    np.testing.assert_allclose(steering_row(panel, d), expected)


def _direct_vs_factored(n, spacing, mult, seed):
    rng = np.random.default_rng(seed)
    panel = make_uniform_linear_panel(n, spacing, LAM)
    scale = mult * 2 * panel.aperture ** 2 / LAM
    theta, phi = rng.uniform(0, 1.2, 2), rng.uniform(0, 2 * np.pi, 2)
    r_i = scale * rng.uniform(1, 2, 2)
    amps = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    rec = ReceiverPose.from_panel(panel, scale * rng.uniform(1, 2), 0.5, 1.0)
    book = PhaseBook.random(4, n, rng)
    op = assemble_single(panel, book, angular_roi(theta, phi), rec)
    factored = op.matrix @ (amps * path_factor(r_i, LAM))
    pos = panel.reference + r_i[:, None] * unit_vectors(theta, phi)
    direct = np.array([aggregate_direct(panel, pos, amps, row, rec) for row in book.phases])
    return np.linalg.norm(factored - direct) / np.linalg.norm(direct)


def test_factored_model_converges_to_direct_sum_as_one_over_r():
    near = np.mean([_direct_vs_factored(8, LAM / 2, 100, s) for s in range(5)])
    far = np.mean([_direct_vs_factored(8, LAM / 2, 10_000, s) for s in range(5)])
    assert near < 1e-2
    # leading error is the quadratic (Fresnel) phase term, first order in 1/r
    assert 50 < near / far < 200


def test_direct_sum_single_element_is_exact_product():
    panel = make_uniform_linear_panel(1, 0.01, LAM)
    src, rx = np.array([[3.0, 0.0, 4.0]]), ReceiverPose([0.0, 0.0, 2.0])
    val = aggregate_direct(panel, src, [2.0], [0.0], rx)
    assert val == pytest.approx(2.0 * path_factor(5.0, LAM) * path_factor(2.0, LAM))


def test_far_field_warning():
    panel = make_uniform_linear_panel(50, 0.01, LAM)
    rec = ReceiverPose.from_panel(panel, 1.0, 0.0, 0.0)
    book = PhaseBook.random(3, 50, derive_rng(0))
    with pytest.warns(FarFieldWarning):
        assemble_single(panel, book, doa_roi([0.0, 0.2]), rec)


def _cartesian_system(k, n, t, seed=0):
    roi = discretize_roi_cartesian((-2, -2), 1.0, (4, 4))
    panels, recs, books = [], [], []
    for i in range(k):
        a = 2 * np.pi * i / k + 0.3
        pose = Pose.facing([20 * np.cos(a), 20 * np.sin(a), 0.0], [0, 0, 0])
        p = make_uniform_linear_panel(n, LAM, LAM, pose, name=f"p{i}")
        panels.append(p)
        recs.append(ReceiverPose.from_panel(p, 10.0, 0.5, 0.0))
        books.append(PhaseBook.random(t, n, derive_rng(seed, i)))
    return roi, panels, recs, books


def test_dedicated_stacks_and_shared_sums_blocks():
    roi, panels, recs, books = _cartesian_system(3, 4, 5)
    ded = assemble_dedicated(panels, recs, books, roi)
    assert ded.shape == (15, 16)
    shared_rx = ReceiverPose([0.0, 0.0, 15.0])
    sh = assemble_shared(panels, books, roi, shared_rx)
    singles = [assemble_dedicated([p], [shared_rx], [b], roi).matrix for p, b in zip(panels, books)]
    np.testing.assert_allclose(sh.matrix, sum(singles), rtol=1e-12)
    with pytest.raises(ValueError):
        assemble_shared(panels, [books[0], books[1], PhaseBook.random(6, 4, derive_rng(1))], roi, shared_rx)


def test_operator_is_read_only():
    roi, panels, recs, books = _cartesian_system(1, 4, 5)
    op = assemble_dedicated(panels, recs, books, roi)
    with pytest.raises(ValueError):
        op.matrix[0, 0] = 0


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 6), st.integers(1, 8), st.integers(0, 10_000))
def test_measured_rank_never_exceeds_bound(k, n, t, seed):
    roi, panels, recs, books = _cartesian_system(k, n, t, seed)
    ded = assemble_dedicated(panels, recs, books, roi)
    bound = rank_bound("dedicated", roi.size, [t] * k, [n] * k)
    assert np.linalg.matrix_rank(ded.matrix) <= bound
    sh = assemble_shared(panels, books, roi, ReceiverPose([0.0, 0.0, 15.0]))
    assert np.linalg.matrix_rank(sh.matrix) <= rank_bound("shared", roi.size, t, [n] * k)


def test_measure_magnitude_and_noise_determinism():
    roi, panels, recs, books = _cartesian_system(2, 6, 10)
    op = assemble_dedicated(panels, recs, books, roi)
    roi = roi.with_field(np.arange(16) % 3)
    clean = measure(op, roi)
    np.testing.assert_allclose(clean.values, op.matrix @ roi.field)
    noisy = measure(op, roi, NoiseDescriptor(1e-3, seed=4), magnitude_only=True)
    again = measure(op, roi, NoiseDescriptor(1e-3, seed=4), magnitude_only=True)
    assert noisy.magnitude_only and np.all(noisy.values >= 0)
    np.testing.assert_array_equal(noisy.values, again.values)
    with pytest.raises(ValueError):
        MeasurementSet(np.array([-1.0]), magnitude_only=True)


def test_incidence_matrix_shape():
    panel = make_uniform_linear_panel(5, LAM, LAM)
    assert incidence_matrix(panel, doa_roi(np.linspace(-0.5, 0.5, 7))).shape == (5, 7)
