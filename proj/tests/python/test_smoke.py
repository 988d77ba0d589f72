import numpy as np
import pytest

import phantomqa


def test_class_names():
    names = phantomqa.class_names()
    assert names == ["AGP", "NPS", "OoP", "TTF", "TaS"]


def test_published_param_counts():
    counts = phantomqa.published_param_counts(256)
    assert counts["total"] == 28_481_861
    assert counts["dense"] == 8_454_144
    assert counts["conv_stack"] == 20_024_384
    assert counts["dense_fraction"] == pytest.approx(0.2968, abs=5e-5)


def test_desk_param_counts():
    counts = phantomqa.desk_param_counts()
    assert counts["total"] == 163_437


def test_generate_slices():
    series = phantomqa.generate_slices(seed=42, resolution_px=32, slice_thickness_mm=40.0)
    hu = series["hu"]
    assert hu.dtype == np.int16
    n = hu.shape[0]
    assert hu.shape == (n, 32, 32) and n > 5
    assert len(series["labels"]) == n
    assert set(series["labels"]) <= set(phantomqa.class_names())
    # The scan runs past both phantom ends.
    assert series["labels"][0] == "OoP" and series["labels"][-1] == "OoP"
    assert all(a < b for a, b in zip(series["z_mm"], series["z_mm"][1:]))

    # Same seed reproduces the series bit for bit; another seed does not.
    again = phantomqa.generate_slices(seed=42, resolution_px=32, slice_thickness_mm=40.0)
    assert np.array_equal(hu, again["hu"])
    other = phantomqa.generate_slices(seed=43, resolution_px=32, slice_thickness_mm=40.0)
    assert not np.array_equal(hu, other["hu"])


def test_window_and_downsample():
    img = np.array([[-1024, 1187], [-2000, 3000]], dtype=np.int16)
    win = phantomqa.window_hu(img)
    assert win.dtype == np.uint8
    assert win.tolist() == [[0, 255], [0, 255]]

    blocks = np.array([[1, 1, 10, 10], [1, 1, 10, 10]], dtype=np.int16)
    down = phantomqa.downsample(blocks)
    assert down.dtype == np.int16
    assert down.tolist() == [[1, 10]]


def test_stack_axial():
    volume = np.stack(
        [np.full((4, 4), v, dtype=np.uint8) for v in (10, 20, 30)]
    )
    mid = phantomqa.stack_axial(volume, 1)
    assert mid.shape == (3, 4, 4)
    assert mid[0, 0, 0] == 10 and mid[1, 0, 0] == 20 and mid[2, 0, 0] == 30
    first = phantomqa.stack_axial(volume, 0)
    assert first[0, 0, 0] == 10 and first[1, 0, 0] == 10 and first[2, 0, 0] == 20


def test_metrics_from_confusion():
    cm = np.zeros((5, 5), dtype=np.int64)
    for k in range(5):
        cm[k, k] = 10
    perfect = phantomqa.metrics_from_confusion(cm)
    assert perfect["accuracy"] == 1.0
    assert perfect["precision"] == [1.0] * 5

    cm[0, 1] = 10  # half the AGP slices misread as NPS
    mixed = phantomqa.metrics_from_confusion(cm)
    assert mixed["accuracy"] == pytest.approx(50 / 60)
    assert mixed["recall"][0] == pytest.approx(0.5)

    empty = phantomqa.metrics_from_confusion(np.zeros((5, 5), dtype=np.int64))
    assert empty["accuracy"] is None

    with pytest.raises(ValueError):
        phantomqa.metrics_from_confusion(np.zeros((4, 4), dtype=np.int64))
