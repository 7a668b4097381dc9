import numpy as np
import pytest
from skimage import color as skcolor

from dagdiffuse.color import lab_to_rgb, rgb_to_lab
from dagdiffuse.errors import ChannelMismatch


def test_black_and_white():
    assert np.allclose(rgb_to_lab(np.zeros(3)), 0.0, atol=1e-12)
    white = rgb_to_lab(np.ones(3))
    assert white[0] == pytest.approx(100.0, abs=1e-9)
    assert np.allclose(white[1:], 0.0, atol=1e-9)


def test_matches_reference_oracle(rng):
    img = rng.uniform(size=(16, 16, 3))
    ref = skcolor.rgb2lab(img, illuminant="D65", observer="2")
    assert np.max(np.abs(rgb_to_lab(img) - ref)) <= 1e-2
    back = skcolor.lab2rgb(ref, illuminant="D65", observer="2")
    assert np.max(np.abs(lab_to_rgb(ref) - back)) <= 1e-3


def test_round_trip(rng):
    img = rng.uniform(size=(32, 32, 3))
    assert np.max(np.abs(lab_to_rgb(rgb_to_lab(img)) - img)) <= 1e-3


def test_out_of_gamut_clamped():
    out = lab_to_rgb(np.array([50.0, 120.0, -120.0]))
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_channel_mismatch():
    with pytest.raises(ChannelMismatch):
        rgb_to_lab(np.zeros((4, 4, 2)))
    with pytest.raises(ChannelMismatch):
        lab_to_rgb(np.zeros(4))
