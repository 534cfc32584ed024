import numpy as np
import pytest

from symotflow.data import (
    DEFAULT_PARAMS,
    DatasetSpec,
    KINDS,
    MalformedFileError,
    generate,
    load,
    save,
)


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            DatasetSpec(kind="spiral")

    def test_nonpositive_n(self):
        with pytest.raises(ValueError):
            DatasetSpec(kind="moons", n=0)

    def test_negative_noise(self):
        with pytest.raises(ValueError):
            DatasetSpec(kind="moons", noise=-0.1)


class TestGeometry:
    def test_noise_free_moons_lie_on_the_two_arcs(self):
        pts = generate(DatasetSpec(kind="moons", n=400, noise=0.0, seed=3))
        # each point is on a unit circle around (0, 0) or around (1, 0.5)
        r_top = np.hypot(pts[:, 0], pts[:, 1])
        r_bot = np.hypot(pts[:, 0] - 1.0, pts[:, 1] - 0.5)
        on_arc = np.minimum(np.abs(r_top - 1.0), np.abs(r_bot - 1.0))
        assert np.max(on_arc) < 1e-12

    def test_noise_free_circles_have_exact_radii(self):
        pts = generate(DatasetSpec(kind="circles", n=400, noise=0.0, seed=3))
        r = np.hypot(pts[:, 0], pts[:, 1])
        off = np.minimum(np.abs(r - 1.0), np.abs(r - 0.5))
        assert np.max(off) < 1e-12
        # both rings are populated
        assert np.sum(np.abs(r - 1.0) < 1e-9) == 200
        assert np.sum(np.abs(r - 0.5) < 1e-9) == 200

    def test_eight_gauss_clusters_sit_on_the_ring(self):
        spec = DatasetSpec(kind="eight_gauss_a", n=4000, seed=1)
        pts = generate(spec)
        p = DEFAULT_PARAMS["eight_gauss_a"]
        angles = p["angle_offset"] + 2.0 * np.pi * np.arange(8) / 8.0
        centers = p["radius"] * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        d = np.min(np.linalg.norm(pts[:, None, :] - centers[None], axis=2), axis=1)
        # 5 sigma covers essentially every draw at std 0.2
        assert np.max(d) < 5 * p["std"] * np.sqrt(2) + 1e-9
        # every cluster is hit
        nearest = np.argmin(np.linalg.norm(pts[:, None, :] - centers[None], axis=2), axis=1)
        assert set(nearest) == set(range(8))

    def test_linear_gauss_centers_are_collinear(self):
        spec = DatasetSpec(kind="linear_gauss_b", n=5000, seed=2)
        pts = generate(spec)
        p = DEFAULT_PARAMS["linear_gauss_b"]
        start, end = np.asarray(p["start"]), np.asarray(p["end"])
        direction = (end - start) / np.linalg.norm(end - start)
        normal = np.array([-direction[1], direction[0]])
        off_line = (pts - start) @ normal
        # residual across the line is pure component noise at std 0.3
        assert np.max(np.abs(off_line)) < 6 * p["std"]
        assert np.std(off_line) == pytest.approx(p["std"], rel=0.1)

    def test_gauss_pair_sample_mean_converges(self):
        pts = generate(DatasetSpec(kind="gauss_pair_a", n=20000, seed=4))
        np.testing.assert_allclose(pts.mean(axis=0), [-3.0, -3.0], atol=0.03)
        np.testing.assert_allclose(pts.std(axis=0), [1.0, 1.0], atol=0.03)

    def test_gauss_pair_b_uses_smaller_covariance(self):
        pts = generate(DatasetSpec(kind="gauss_pair_b", n=20000, seed=4))
        np.testing.assert_allclose(pts.mean(axis=0), [3.0, 3.0], atol=0.03)
        np.testing.assert_allclose(pts.std(axis=0), np.sqrt(0.5), atol=0.03)

    def test_param_override_moves_the_distribution(self):
        spec = DatasetSpec(kind="gauss_pair_a", n=5000, seed=0, params={"mean": (10.0, 0.0)})
        pts = generate(spec)
        assert pts[:, 0].mean() == pytest.approx(10.0, abs=0.1)

    def test_noise_variance_scales_quadratically(self):
        # radial residual variance of circles == noise^2 (per coordinate)
        for noise in (0.01, 0.05, 0.1):
            pts = generate(DatasetSpec(kind="circles", n=20000, noise=noise, seed=8))
            r = np.hypot(pts[:, 0], pts[:, 1])
            resid = np.minimum(np.abs(r - 1.0), np.abs(r - 0.5))
            assert np.var(resid) + np.mean(resid) ** 2 == pytest.approx(noise**2, rel=0.1)


class TestDeterminism:
    def test_same_spec_is_bit_identical(self):
        for kind in KINDS:
            a = generate(DatasetSpec(kind=kind, n=100, seed=7))
            b = generate(DatasetSpec(kind=kind, n=100, seed=7))
            np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self):
        a = generate(DatasetSpec(kind="moons", n=100, seed=0))
        b = generate(DatasetSpec(kind="moons", n=100, seed=1))
        assert not np.array_equal(a, b)

    def test_streams_are_independent_across_kinds(self):
        # generating A before B must not perturb B's draws
        a_then_b = (
            generate(DatasetSpec(kind="moons", n=50, seed=0)),
            generate(DatasetSpec(kind="circles", n=50, seed=0)),
        )
        b_then_a = (
            generate(DatasetSpec(kind="circles", n=50, seed=0)),
            generate(DatasetSpec(kind="moons", n=50, seed=0)),
        )
        np.testing.assert_array_equal(a_then_b[0], b_then_a[1])
        np.testing.assert_array_equal(a_then_b[1], b_then_a[0])

    def test_all_kinds_produce_finite_n_by_2(self):
        for kind in KINDS:
            pts = generate(DatasetSpec(kind=kind, n=33, seed=5))
            assert pts.shape == (33, 2)
            assert np.all(np.isfinite(pts))


class TestPersistence:
    def test_save_load_roundtrip_is_exact(self, tmp_path):
        pts = generate(DatasetSpec(kind="moons", n=50, seed=1))
        path = tmp_path / "pts.csv"
        save(path, pts)
        np.testing.assert_array_equal(load(path), pts)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n")
        with pytest.raises(MalformedFileError):
            load(path)

    def test_wrong_column_count_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1\n1.0,2.0,3.0\n")
        with pytest.raises(MalformedFileError):
            load(path)

    def test_non_numeric_value_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1\n1.0,abc\n")
        with pytest.raises(MalformedFileError):
            load(path)

    def test_missing_file_raises_io_error(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load(tmp_path / "nope.csv")

    def test_save_rejects_wrong_shape(self, tmp_path):
        with pytest.raises(MalformedFileError):
            save(tmp_path / "x.csv", np.zeros((3, 3)))

    def test_empty_dataset_roundtrips(self, tmp_path):
        path = tmp_path / "empty.csv"
        save(path, np.zeros((0, 2)))
        out = load(path)
        assert out.shape == (0, 2)
