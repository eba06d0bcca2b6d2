import numpy as np
import pytest

import spoofkit as sk
from spoofkit.errors import FormatError


def test_new_canvas_black_white():
    black = sk.new_canvas(3, 4, 5, sk.InitMode.BLACK)
    assert black.shape == (3, 4, 5)
    assert black.dtype == np.float32
    assert np.all(black == 0.0)
    white = sk.new_canvas(1, 2, 2, sk.InitMode.WHITE)
    assert np.all(white == 1.0)


def test_new_canvas_uniform_deterministic():
    a = sk.new_canvas(1, 4, 4, sk.InitMode.UNIFORM_RANDOM, rng_seed=7)
    b = sk.new_canvas(1, 4, 4, sk.InitMode.UNIFORM_RANDOM, rng_seed=7)
    assert a.tobytes() == b.tobytes()
    assert np.all((a >= 0.0) & (a < 1.0))
    c = sk.new_canvas(1, 4, 4, sk.InitMode.UNIFORM_RANDOM, rng_seed=8)
    assert a.tobytes() != c.tobytes()


@pytest.mark.parametrize("dims", [(0, 4, 4), (1, 0, 4), (1, 4, 0)])
def test_new_canvas_zero_dimension(dims):
    with pytest.raises(ValueError):
        sk.new_canvas(*dims, sk.InitMode.BLACK)


def test_init_mode_from_string():
    assert sk.InitMode.from_string("black") is sk.InitMode.BLACK
    assert sk.InitMode.from_string("uniform") is sk.InitMode.UNIFORM_RANDOM
    with pytest.raises(ValueError):
        sk.InitMode.from_string("plaid")


def test_canvas_is_read_only():
    canvas = sk.new_canvas(1, 2, 2, sk.InitMode.BLACK)
    with pytest.raises(ValueError):
        canvas[0, 0, 0] = 0.5


def test_apply_proposal_copies():
    img = sk.new_canvas(3, 4, 4, sk.InitMode.BLACK)
    out = sk.apply_proposal(img, sk.PixelProposal(row=1, col=2, channel=0, value=0.75))
    assert out[0, 1, 2] == np.float32(0.75)
    assert img[0, 1, 2] == 0.0  # original untouched
    assert np.count_nonzero(out) == 1


def test_apply_proposal_out_of_bounds():
    img = sk.new_canvas(1, 2, 2, sk.InitMode.BLACK)
    with pytest.raises(IndexError):
        sk.apply_proposal(img, sk.PixelProposal(2, 0, 0, 0.5))
    with pytest.raises(ValueError):
        sk.apply_proposal(img, sk.PixelProposal(0, 0, 0, 1.5))


def test_changed_location_ratio_counts_spatial_locations():
    a = sk.new_canvas(3, 4, 4, sk.InitMode.BLACK)
    b = sk.apply_proposal(a, sk.PixelProposal(0, 0, 0, 0.9))
    b = sk.apply_proposal(b, sk.PixelProposal(0, 0, 1, 0.9))  # same location, other channel
    b = sk.apply_proposal(b, sk.PixelProposal(3, 3, 2, 0.1))
    assert sk.changed_location_ratio(a, b) == pytest.approx(2 / 16)


def test_changed_location_ratio_tolerance_boundary():
    a = np.zeros((1, 2, 2), dtype=np.float32)
    b = a.copy()
    b[0, 0, 0] = 1e-9  # exactly at tolerance: not a change
    assert sk.changed_location_ratio(a, b) == 0.0
    b[0, 0, 0] = 3e-9
    assert sk.changed_location_ratio(a, b) == pytest.approx(1 / 4)


def test_changed_location_ratio_shape_mismatch():
    with pytest.raises(ValueError):
        sk.changed_location_ratio(np.zeros((1, 2, 2)), np.zeros((1, 3, 3)))


def test_as_image_validates():
    with pytest.raises(ValueError):
        sk.as_image(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        sk.as_image(np.full((1, 2, 2), np.nan))
    with pytest.raises(ValueError):
        sk.as_image(np.full((1, 2, 2), 1.5))


def test_quantize_projects_to_255_grid():
    img = sk.as_image(np.array([[[0.0, 0.4]], [[0.5, 1.0]], [[0.123, 0.9]]], dtype=np.float32))
    q = sk.quantize(img)
    scaled = np.asarray(q, dtype=np.float64) * 255.0
    assert np.allclose(scaled, np.rint(scaled), atol=1e-6)
    # idempotent
    assert sk.quantize(q).tobytes() == q.tobytes()


@pytest.mark.parametrize("channels", [1, 3])
def test_png_round_trip_is_quantization(channels):
    rng = np.random.default_rng(5)
    img = sk.as_image(rng.random((channels, 9, 7), dtype=np.float32))
    back = sk.decode_png(sk.encode_png(img))
    assert back.shape == img.shape
    assert back.tobytes() == sk.quantize(img).tobytes()


def test_png_file_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    img = sk.as_image(rng.random((1, 5, 5), dtype=np.float32))
    path = tmp_path / "img.png"
    sk.save_png(img, path)
    assert sk.load_png(path).tobytes() == sk.quantize(img).tobytes()


def test_decode_png_rejects_garbage():
    with pytest.raises(FormatError):
        sk.decode_png(b"not a png at all")


def test_decode_png_rejects_unsupported_mode(tmp_path):
    from PIL import Image

    path = tmp_path / "p.png"
    Image.new("P", (4, 4)).save(path)
    with pytest.raises(FormatError):
        sk.decode_png(path.read_bytes())
