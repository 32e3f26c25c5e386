import numpy as np
import pytest

from linestitch.errors import ValidationError
from linestitch.geometry import apply_homography_batch
from linestitch.synth import (
    SceneSpec,
    generate,
    render_pair,
    single_plane_scene,
    two_plane_scene,
)


def test_same_seed_bit_identical():
    scene = single_plane_scene(seed=42, n_points=30, n_lines=12, noise_sigma=1.0, outlier_fraction=0.1)
    cs1, gt1 = generate(scene)
    cs2, gt2 = generate(scene)
    assert np.array_equal(cs1.points, cs2.points)
    assert np.array_equal(cs1.lines, cs2.lines)
    assert np.array_equal(gt1.outlier_indices, gt2.outlier_indices)


def test_different_seeds_differ():
    cs1, _ = generate(single_plane_scene(seed=1, n_points=10))
    cs2, _ = generate(single_plane_scene(seed=2, n_points=10))
    assert not np.array_equal(cs1.points, cs2.points)


def test_noise_free_points_satisfy_ground_truth():
    scene = single_plane_scene(seed=7, n_points=25, n_lines=10)
    cs, gt = generate(scene)
    H = gt.homographies[0]
    mapped = apply_homography_batch(H, cs.points[:, 0:2])
    assert np.abs(mapped - cs.points[:, 2:4]).max() < 1e-9
    for row in cs.lines:
        for sl in ((0, 2), (2, 4)):
            tgt = row[sl[0]:sl[1]]
            # endpoints were mapped endpoint-wise
        assert np.abs(apply_homography_batch(H, row[0:2].reshape(1, 2)) - row[4:6]).max() < 1e-9
        assert np.abs(apply_homography_batch(H, row[2:4].reshape(1, 2)) - row[6:8]).max() < 1e-9


def test_outlier_count_exact():
    scene = single_plane_scene(seed=9, n_points=40, outlier_fraction=0.3)
    cs, gt = generate(scene)
    assert len(gt.outlier_indices) == round(0.3 * 40)
    clean = np.delete(np.arange(40), gt.outlier_indices)
    assert np.array_equal(cs.points[clean], gt.clean_points[clean])
    assert not np.array_equal(cs.points[gt.outlier_indices], gt.clean_points[gt.outlier_indices])


def test_two_plane_regions_respected():
    H_a = np.eye(3)
    H_b = np.eye(3)
    H_b[0, 2] = 50.0
    scene = two_plane_scene(seed=3, H_left=H_a, H_right=H_b, n_points=30, image_size=(320, 240))
    cs, gt = generate(scene)
    left = gt.point_plane == 0
    assert np.all(cs.points[left, 0] <= 160.0)
    assert np.all(cs.points[~left, 0] >= 160.0)
    assert np.abs(cs.points[left, 2] - cs.points[left, 0]).max() < 1e-12
    assert np.abs(cs.points[~left, 2] - cs.points[~left, 0] - 50.0).max() < 1e-9


def test_noise_calibration_rayleigh_mean():
    sigma = 1.5
    errs = []
    for seed in range(50):
        scene = single_plane_scene(seed=seed, n_points=40, noise_sigma=sigma)
        cs, gt = generate(scene)
        errs.append(np.linalg.norm(cs.points[:, 2:4] - gt.clean_points[:, 2:4], axis=1).mean())
    mean_err = np.mean(errs)
    expected = sigma * np.sqrt(np.pi / 2.0)
    assert abs(mean_err - expected) / expected < 0.10


def test_empty_region_raises():
    spec = SceneSpec(seed=1, planes=[(np.eye(3), (10.0, 10.0, 10.0, 50.0))])
    with pytest.raises(ValidationError):
        generate(spec)


class TestRenderPair:
    def test_identity_pair_is_identical(self):
        scene = single_plane_scene(seed=5, H=np.eye(3), image_size=(64, 48))
        tgt, ref = render_pair(scene)
        assert tgt.shape == (48, 64, 3)
        assert np.array_equal(tgt, ref)

    def test_translation_shifts_content(self):
        H = np.eye(3)
        H[0, 2] = 10.0  # reference x = target x + 10
        scene = single_plane_scene(seed=5, H=H, image_size=(64, 48))
        tgt, ref = render_pair(scene)
        assert np.array_equal(ref[:, 10:], tgt[:, :-10])

    def test_deterministic(self):
        scene = single_plane_scene(seed=6, image_size=(40, 30))
        a = render_pair(scene)
        b = render_pair(scene)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_checker_texture(self):
        scene = single_plane_scene(seed=6, H=np.eye(3), image_size=(40, 30))
        tgt, _ = render_pair(scene, texture="checker")
        assert set(np.unique(tgt)) <= {0, 255}
