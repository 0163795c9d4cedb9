import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scribbleseg.morphology import (
    StructuringElement,
    close_bone_label,
    close_mask,
    dilate,
    erode,
)
from scribbleseg.volumes import BACKGROUND, BONE, CORRODED_SCREW, SCREW, UNLABELED

DISK1 = StructuringElement("disk", 1)
DISK2 = StructuringElement("disk", 2)
SQUARE1 = StructuringElement("square", 1)

masks_3x3 = arrays(np.bool_, shape=(3, 3), elements=st.booleans())


def all_3x3_masks():
    for bits in range(512):
        yield np.array([(bits >> k) & 1 for k in range(9)], dtype=bool).reshape(3, 3)


class TestStructuringElement:
    def test_disk_radius_one_is_plus_shape(self):
        offs = {tuple(o) for o in DISK1.offsets()}
        assert offs == {(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)}

    def test_square_radius_one_is_full_block(self):
        assert len(SQUARE1.offsets()) == 9

    def test_symmetric_and_contains_origin(self):
        for se in (DISK1, DISK2, SQUARE1, StructuringElement("square", 3)):
            offs = {tuple(o) for o in se.offsets()}
            assert (0, 0) in offs
            assert all((-dy, -dx) in offs for dy, dx in offs)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            StructuringElement("ball", 1)
        with pytest.raises(ValueError):
            StructuringElement("disk", 0)


class TestDilate:
    def test_empty_stays_empty(self):
        assert not dilate(np.zeros((4, 4), dtype=bool), DISK1).any()

    def test_single_pixel_becomes_plus(self):
        mask = np.zeros((5, 5), dtype=bool)
        mask[2, 2] = True
        out = dilate(mask, DISK1)
        expected = np.zeros((5, 5), dtype=bool)
        for dy, dx in ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)):
            expected[2 + dy, 2 + dx] = True
        assert np.array_equal(out, expected)

    def test_full_stays_full(self):
        assert dilate(np.ones((3, 3), dtype=bool), DISK2).all()


class TestErode:
    def test_full_square_keeps_interior_only(self):
        # border pixels erode against virtual background
        out = erode(np.ones((4, 4), dtype=bool), SQUARE1)
        expected = np.zeros((4, 4), dtype=bool)
        expected[1:3, 1:3] = True
        assert np.array_equal(out, expected)

    def test_empty_stays_empty(self):
        assert not erode(np.zeros((4, 4), dtype=bool), SQUARE1).any()

    def test_dilate_then_erode_covers_seed_pixel(self):
        mask = np.zeros((7, 7), dtype=bool)
        mask[3, 3] = True
        closed = erode(dilate(mask, DISK1), DISK1)
        assert closed[3, 3]


class TestCloseMask:
    def test_interior_hole_filled(self):
        # 5x5 solid square with one unset interior pixel closes to the full square
        mask = np.ones((5, 5), dtype=bool)
        mask[2, 2] = False
        out = close_mask(mask, DISK1)
        assert np.array_equal(out, np.ones((5, 5), dtype=bool))

    def test_solid_rectangle_unchanged(self):
        mask = np.zeros((8, 9), dtype=bool)
        mask[2:6, 3:8] = True
        assert np.array_equal(close_mask(mask, DISK2), mask)

    def test_border_touching_rectangle_unchanged(self):
        mask = np.ones((4, 6), dtype=bool)
        assert np.array_equal(close_mask(mask, DISK2), mask)

    @settings(max_examples=100, deadline=None)
    @given(mask=masks_3x3)
    def test_idempotent(self, mask):
        once = close_mask(mask, DISK1)
        assert np.array_equal(close_mask(once, DISK1), once)

    @settings(max_examples=100, deadline=None)
    @given(m1=masks_3x3, m2=masks_3x3)
    def test_monotone(self, m1, m2):
        small = m1 & m2
        big = m1 | m2
        assert not (close_mask(small, DISK1) & ~close_mask(big, DISK1)).any()

    @settings(max_examples=100, deadline=None)
    @given(mask=arrays(np.bool_, shape=(6, 7), elements=st.booleans()))
    def test_extensive(self, mask):
        assert not (mask & ~close_mask(mask, DISK2)).any()


class TestDualityBruteForce:
    def test_all_512_masks_disk_radius_one(self):
        # complement flips the outside value too, so the matched erosion pads
        # the complement with set pixels before applying the public operator
        r = DISK1.radius
        for mask in all_3x3_masks():
            comp = ~mask
            padded = np.pad(comp, r, constant_values=True)
            eroded = erode(padded, DISK1)[r:-r, r:-r]
            assert np.array_equal(dilate(mask, DISK1), ~eroded), mask

    def test_anti_extensivity_of_erosion(self):
        for mask in all_3x3_masks():
            assert not (erode(mask, DISK1) & ~mask).any()


class TestCloseBoneLabel:
    def test_background_hole_inside_bone_becomes_bone(self):
        plane = np.full((7, 7), BACKGROUND, dtype=np.uint8)
        plane[1:6, 1:6] = BONE
        plane[3, 3] = BACKGROUND
        out = close_bone_label(plane, DISK1)
        assert out[3, 3] == BONE
        # oracle: the closing of the bone mask alone says exactly which pixels fill
        filled = close_mask(plane == BONE, DISK1)
        assert np.array_equal(out == BONE, filled | (plane == BONE))

    def test_screw_pixels_protected(self):
        plane = np.full((7, 7), BACKGROUND, dtype=np.uint8)
        plane[1:6, 1:6] = BONE
        plane[3, 3] = SCREW
        plane[3, 4] = CORRODED_SCREW
        out = close_bone_label(plane, DISK1)
        assert out[3, 3] == SCREW
        assert out[3, 4] == CORRODED_SCREW

    def test_no_bone_leaves_slice_unchanged(self):
        plane = np.full((5, 5), BACKGROUND, dtype=np.uint8)
        plane[2, 2] = SCREW
        assert np.array_equal(close_bone_label(plane, DISK2), plane)

    def test_unlabeled_input_rejected(self):
        plane = np.full((3, 3), UNLABELED, dtype=np.uint8)
        with pytest.raises(ValueError, match="dense"):
            close_bone_label(plane, DISK1)

    @settings(max_examples=50, deadline=None)
    @given(plane=arrays(np.uint8, shape=(6, 6), elements=st.integers(0, 3)))
    def test_only_background_changes_and_only_to_bone(self, plane):
        out = close_bone_label(plane, DISK1)
        changed = out != plane
        assert np.isin(plane[changed], [BACKGROUND]).all()
        assert (out[changed] == BONE).all()
        # bone never removed
        assert not ((plane == BONE) & (out != BONE)).any()
