import numpy as np
import pytest

from scribbletrain.data import SamplePool, extract_training_crop

UNLABELED = 255


def _ramp_volume(nz=40, ny=8, nx=8):
    return np.arange(nz, dtype=np.float32)[:, None, None] * np.ones((ny, nx), np.float32)


class TestExtractCrop:
    def test_interior_plane_takes_four_below_and_above(self):
        crop = extract_training_crop(_ramp_volume(), 4)
        assert crop.shape[0] == 9
        assert [int(p[0, 0]) for p in crop] == [0, 1, 2, 3, 4, 5, 6, 7, 8]

    def test_border_plane_replicates_edge(self):
        crop = extract_training_crop(_ramp_volume(), 0)
        assert [int(p[0, 0]) for p in crop] == [0, 0, 0, 0, 0, 1, 2, 3, 4]

    def test_top_border_replicates_last_plane(self):
        crop = extract_training_crop(_ramp_volume(nz=10), 9)
        assert [int(p[0, 0]) for p in crop] == [5, 6, 7, 8, 9, 9, 9, 9, 9]

    def test_crop_extent_equals_in_slices(self):
        for in_slices in (1, 5, 8, 9):
            assert extract_training_crop(_ramp_volume(), 20, in_slices).shape[0] == in_slices

    def test_eight_slices_are_four_below_three_above(self):
        crop = extract_training_crop(_ramp_volume(), 10, in_slices=8)
        assert [int(p[0, 0]) for p in crop] == [6, 7, 8, 9, 10, 11, 12, 13]

    def test_out_of_range_plane(self):
        with pytest.raises(IndexError):
            extract_training_crop(_ramp_volume(nz=5), 5)


class TestSamplePool:
    def _targets(self, nz=40):
        target = np.full((nz, 8, 8), UNLABELED, dtype=np.uint8)
        target[0] = 0
        target[10] = 1
        target[10, :2] = 3
        target[20] = 2
        return target

    def test_samples_cover_annotated_planes_only(self):
        gray = _ramp_volume()
        pool = SamplePool([gray], [self._targets()])
        assert [(s.volume_id, s.z) for s in pool.samples] == [(0, 0), (0, 10), (0, 20)]

    def test_fetch_pairs_crop_with_target_plane(self):
        gray = _ramp_volume()
        targets = self._targets()
        pool = SamplePool([gray], [targets])
        crop, plane = pool.fetch(1)
        assert crop.shape == (9, 8, 8)
        assert int(crop[4, 0, 0]) == 10
        assert np.array_equal(plane, targets[10])

    def test_class_weights_inverse_frequency_mean_one(self):
        pool = SamplePool([_ramp_volume()], [self._targets()])
        weights = pool.class_weights()
        counts = np.array([64, 48, 64, 16], dtype=float)  # labels 0,1,2,3 over 3 planes
        expected = (1.0 / counts) / (1.0 / counts).mean()
        assert np.allclose(weights, expected)

    def test_dense_mode_rejects_partial_planes(self):
        target = np.full((5, 8, 8), UNLABELED, dtype=np.uint8)
        target[1] = 1
        target[1, 0, 0] = UNLABELED
        with pytest.raises(ValueError, match="dense"):
            SamplePool([_ramp_volume(nz=5)], [target])

    def test_scribble_mode_accepts_partial_planes(self):
        target = np.full((5, 8, 8), UNLABELED, dtype=np.uint8)
        target[1, 0, 0] = 1
        pool = SamplePool([_ramp_volume(nz=5)], [target], dense_targets=False)
        assert len(pool) == 1

    def test_no_annotated_planes_rejected(self):
        target = np.full((5, 8, 8), UNLABELED, dtype=np.uint8)
        with pytest.raises(ValueError, match="annotated"):
            SamplePool([_ramp_volume(nz=5)], [target], dense_targets=False)
