import numpy as np
import pytest
from PIL import Image

from salgraph.errors import DataError
from salgraph.volume import (
    VideoVolume,
    load_frame_sequence,
    load_ground_truth,
    rgb_to_lab,
)

from helpers import write_frames, write_masks


def test_load_frame_sequence_dims(tmp_path):
    frames = np.zeros((3, 4, 4, 3), dtype=np.uint8)
    frames[:, 1, 2] = (255, 0, 0)
    write_frames(tmp_path, frames)
    vol = load_frame_sequence(tmp_path)
    assert (vol.frames, vol.height, vol.width, vol.channels) == (3, 4, 4, 3)
    assert vol.data.dtype == np.float32
    assert vol.data[0, 1, 2, 0] == pytest.approx(1.0)


def test_values_scaled_to_unit_interval(tmp_path):
    frames = np.full((1, 2, 2, 3), 51, dtype=np.uint8)
    write_frames(tmp_path, frames)
    vol = load_frame_sequence(tmp_path)
    assert np.allclose(vol.data, 51 / 255.0)


def test_empty_directory_error(tmp_path):
    with pytest.raises(DataError, match="no frames matched"):
        load_frame_sequence(tmp_path)


def test_missing_directory_error(tmp_path):
    with pytest.raises(DataError, match="missing directory"):
        load_frame_sequence(tmp_path / "nope")


def test_mixed_dimensions_error(tmp_path):
    Image.fromarray(np.zeros((4, 4, 3), np.uint8), "RGB").save(tmp_path / "a.png")
    Image.fromarray(np.zeros((5, 4, 3), np.uint8), "RGB").save(tmp_path / "b.png")
    with pytest.raises(DataError, match="inconsistent frame size"):
        load_frame_sequence(tmp_path)


def test_undecodable_image_error(tmp_path):
    (tmp_path / "bad.png").write_bytes(b"not a png at all")
    with pytest.raises(DataError, match="undecodable"):
        load_frame_sequence(tmp_path)


def test_high_bit_depth_rejected(tmp_path):
    deep = Image.fromarray(np.zeros((4, 4), dtype=np.uint16))
    deep.save(tmp_path / "frame0.png")
    with pytest.raises(DataError, match="bit depth"):
        load_frame_sequence(tmp_path)


def test_natural_filename_sort(tmp_path):
    # frame2 must come before frame10
    for name, value in [("frame10.png", 10), ("frame2.png", 2), ("frame1.png", 1)]:
        Image.fromarray(np.full((2, 2, 3), value, np.uint8), "RGB").save(tmp_path / name)
    vol = load_frame_sequence(tmp_path)
    order = [int(round(vol.data[f, 0, 0, 0] * 255)) for f in range(3)]
    assert order == [1, 2, 10]


# LAB expectations frozen from an independent standard sRGB->XYZ->LAB chain
# (D65 reference white).
_LAB_CASES = [
    ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
    ((1.0, 1.0, 1.0), (100.0, 0.0, 0.0)),
    ((1.0, 0.0, 0.0), (53.2406, 80.0923, 67.2028)),
]


@pytest.mark.parametrize("rgb,expected", _LAB_CASES)
def test_rgb_to_lab_reference_pixels(rgb, expected):
    vol = VideoVolume(np.full((1, 1, 1, 3), rgb, dtype=np.float32))
    lab = rgb_to_lab(vol).data[0, 0, 0]
    assert lab[0] == pytest.approx(expected[0], abs=0.01)
    assert lab[1] == pytest.approx(expected[1], abs=0.01)
    assert lab[2] == pytest.approx(expected[2], abs=0.01)


def test_rgb_to_lab_requires_three_channels():
    vol = VideoVolume(np.zeros((1, 2, 2, 4), dtype=np.float32))
    with pytest.raises(DataError, match="3 channels"):
        rgb_to_lab(vol)


def test_gray_ramp_monotone_lightness():
    ramp = np.linspace(0.0, 1.0, 32, dtype=np.float32)
    vol = VideoVolume(np.tile(ramp[None, None, :, None], (1, 1, 1, 3)))
    lab = rgb_to_lab(vol).data[0, 0]
    assert (np.diff(lab[:, 0]) > 0).all()
    assert np.abs(lab[:, 1]).max() < 0.01
    assert np.abs(lab[:, 2]).max() < 0.01


def test_rgb_to_lab_is_pixel_local():
    rng = np.random.default_rng(7)
    data = rng.random((4, 3, 3, 3)).astype(np.float32)
    lab = rgb_to_lab(VideoVolume(data)).data
    perm = [2, 0, 3, 1]
    lab_perm = rgb_to_lab(VideoVolume(data[perm])).data
    assert np.array_equal(lab[perm], lab_perm)


def test_lab_value_ranges():
    rng = np.random.default_rng(11)
    vol = VideoVolume(rng.random((2, 8, 8, 3)).astype(np.float32))
    lab = rgb_to_lab(vol).data
    assert lab[..., 0].min() >= 0.0 and lab[..., 0].max() <= 100.0
    assert lab[..., 1:].min() >= -128.0 and lab[..., 1:].max() <= 127.0


def test_ground_truth_threshold_rule(tmp_path):
    mask = np.zeros((2, 3), dtype=np.uint8)
    mask[0, 0] = 200  # -> 1
    mask[1, 1] = 100  # -> 0
    Image.fromarray(mask, "L").save(tmp_path / "m0.png")
    gt = load_ground_truth(tmp_path, (1, 2, 3))
    assert gt.data[0, 0, 0] == 1
    assert gt.data[0, 1, 1] == 0


def test_ground_truth_all_black(tmp_path):
    write_masks(tmp_path, np.zeros((3, 4, 4), dtype=np.uint8))
    gt = load_ground_truth(tmp_path, (3, 4, 4))
    assert gt.positive_count == 0


def test_ground_truth_count_mismatch(tmp_path):
    write_masks(tmp_path, np.zeros((2, 4, 4), dtype=np.uint8))
    with pytest.raises(DataError, match="count mismatch"):
        load_ground_truth(tmp_path, (3, 4, 4))


def test_ground_truth_size_mismatch(tmp_path):
    write_masks(tmp_path, np.zeros((3, 5, 4), dtype=np.uint8))
    with pytest.raises(DataError, match="size mismatch"):
        load_ground_truth(tmp_path, (3, 4, 4))
