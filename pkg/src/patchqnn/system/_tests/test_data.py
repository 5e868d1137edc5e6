import math

import numpy as np
import pytest

from patchqnn.system.data import (IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
                                  PatchConfig, PreparedDataset, RawDataset,
                                  avg_pool_2x2, extract_patches,
                                  extract_patches_batch, load_idx, normalize,
                                  prepare, zero_bias)
from patchqnn.utils.exceptions import (CountMismatchError, DataFormatError,
                                       MagicNumberError, TruncatedPayloadError)


def _write_idx(path, magic, dims, payload):
    header = np.array([magic, *dims], dtype=">u4").tobytes()
    path.write_bytes(header + np.asarray(payload, dtype=np.uint8).tobytes())
    return str(path)


@pytest.fixture
def idx_pair(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(2, 28, 28), dtype=np.uint8)
    labels = np.array([7, 1], dtype=np.uint8)
    img = _write_idx(tmp_path / "images.idx", IDX_IMAGES_MAGIC, (2, 28, 28), images)
    lab = _write_idx(tmp_path / "labels.idx", IDX_LABELS_MAGIC, (2,), labels)
    return img, lab, images, labels


def test_load_idx(idx_pair):
    img, lab, images, labels = idx_pair
    raw = load_idx(img, lab)
    assert len(raw) == 2
    assert raw.labels[0] == 7
    np.testing.assert_array_equal(raw.images, images)


def test_load_idx_bad_magic(tmp_path, idx_pair):
    _, lab, images, _ = idx_pair
    bad = _write_idx(tmp_path / "bad.idx", 0x00000802, (2, 28, 28), images)
    with pytest.raises(MagicNumberError) as info:
        load_idx(bad, lab)
    assert info.value.offset == 0
    assert info.value.path == bad


def test_load_idx_truncated(tmp_path, idx_pair):
    _, lab, images, _ = idx_pair
    short = _write_idx(tmp_path / "short.idx", IDX_IMAGES_MAGIC, (2, 28, 28), images.ravel()[:-10])
    with pytest.raises(TruncatedPayloadError):
        load_idx(short, lab)
    header_only = tmp_path / "header.idx"
    header_only.write_bytes(b"\x00\x00\x08")
    with pytest.raises(TruncatedPayloadError):
        load_idx(str(header_only), lab)


def test_load_idx_count_mismatch(tmp_path):
    images = np.zeros((3, 28, 28), dtype=np.uint8)
    img = _write_idx(tmp_path / "i.idx", IDX_IMAGES_MAGIC, (3, 28, 28), images)
    lab = _write_idx(tmp_path / "l.idx", IDX_LABELS_MAGIC, (2,), [1, 2])
    with pytest.raises(CountMismatchError, match="count mismatch"):
        load_idx(img, lab)


def test_load_idx_rejects_non_digit_label(tmp_path):
    img = _write_idx(tmp_path / "i.idx", IDX_IMAGES_MAGIC, (1, 28, 28), np.zeros(784))
    lab = _write_idx(tmp_path / "l.idx", IDX_LABELS_MAGIC, (1,), [12])
    with pytest.raises(DataFormatError):
        load_idx(img, lab)


def test_avg_pool():
    assert not np.any(avg_pool_2x2(np.zeros((28, 28))))
    np.testing.assert_array_equal(avg_pool_2x2(np.full((28, 28), 100.0)), np.full((14, 14), 100.0))
    block = np.array([[0, 255], [255, 0]], dtype=float)
    assert avg_pool_2x2(block)[0, 0] == pytest.approx(127.5)
    assert avg_pool_2x2(np.zeros((5, 28, 28))).shape == (5, 14, 14)
    with pytest.raises(ValueError):
        avg_pool_2x2(np.zeros((27, 28)))


def test_avg_pool_block_layout():
    image = np.arange(16, dtype=float).reshape(4, 4)
    np.testing.assert_allclose(avg_pool_2x2(image), [[2.5, 4.5], [10.5, 12.5]])


def test_normalize():
    np.testing.assert_allclose(normalize(np.array([255.0, 0.0, 51.0])),
                               [math.pi / 4, 0.0, math.pi / 20], rtol=1e-12)
    with pytest.raises(ValueError):
        normalize(np.array([256.0]))
    with pytest.raises(ValueError):
        normalize(np.array([-1.0]))


def test_prepare(idx_pair):
    img, lab, images, labels = idx_pair
    prepared = prepare(load_idx(img, lab))
    assert prepared.images.shape == (2, 14, 14)
    assert prepared.labels.dtype == np.int64
    assert prepared.images.max() <= math.pi / 4
    np.testing.assert_allclose(prepared.images[1], avg_pool_2x2(images[1].astype(float)) / 255 * math.pi / 4)


def test_raw_dataset_validation():
    with pytest.raises(ValueError):
        RawDataset(np.zeros((2, 4, 4)), np.zeros(3))
    with pytest.raises(ValueError):
        RawDataset(np.zeros((1, 4, 4)), np.array([10]))


@pytest.mark.parametrize("D,L", [(6, 2), (3, 3), (2, 4)])
def test_patch_grid(D, L):
    cfg = PatchConfig(14, 8, D)
    assert cfg.L == L
    assert cfg.n_qc == L * L
    corners = cfg.corners()
    assert corners.shape == (L * L, 2)
    assert corners[-1].tolist() == [14 - 8, 14 - 8]


def test_patch_corners_reference():
    assert PatchConfig(14, 8, 6).corners().tolist() == [[0, 0], [0, 6], [6, 0], [6, 6]]
    assert PatchConfig.from_n_qc(9).D == 3
    with pytest.raises(ValueError):
        PatchConfig(14, 8, 4)
    with pytest.raises(ValueError):
        PatchConfig(4, 8, 1)


def test_extract_patches_constant_image():
    cfg = PatchConfig(14, 8, 6)
    patches = extract_patches(np.full((14, 14), 0.3), zero_bias(14), cfg)
    assert patches.shape == (4, 64)
    np.testing.assert_array_equal(patches, 0.3)


def test_extract_patches_layout_and_bias():
    cfg = PatchConfig(14, 8, 3)
    rng = np.random.default_rng(1)
    image = rng.uniform(0, 1, (14, 14))
    bias = rng.normal(size=(14, 14))
    patches = extract_patches(image, bias, cfg)
    for p, (r, c) in enumerate(cfg.corners()):
        np.testing.assert_array_equal(patches[p], (image + bias)[r:r + 8, c:c + 8].ravel())
    batch = extract_patches_batch(np.stack([image, image]), bias, cfg)
    np.testing.assert_array_equal(batch[1], patches)
    with pytest.raises(ValueError):
        extract_patches(image, np.zeros((13, 13)), cfg)


def test_pixel_index_and_coverage():
    cfg = PatchConfig(14, 8, 6)
    idx = cfg.pixel_index()
    assert idx.shape == (4, 64)
    assert idx[1, 0] == 6
    assert idx[2, 0] == 6 * 14
    cov = cfg.coverage()
    assert cov[0, 0] == 1
    assert cov[7, 7] == 4
    assert cov.sum() == 4 * 64
    uncovered = PatchConfig(5, 2, 3).coverage()
    assert not uncovered[2].any() and not uncovered[:, 2].any()


def test_prepared_dataset_views():
    ds = PreparedDataset(np.zeros((5, 4, 4)), np.arange(5))
    assert len(ds.head(3)) == 3
    assert ds.head(None) is ds
    assert ds.subset([4, 0]).labels.tolist() == [4, 0]
    assert [len(lab) for _, lab in ds.blocks(2)] == [2, 2, 1]
    with pytest.raises(ValueError):
        PreparedDataset(np.full((1, 4, 4), np.nan), [0])
