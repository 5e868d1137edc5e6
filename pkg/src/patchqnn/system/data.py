r"""
patchqnn.system.data
====================

MNIST ingestion and patch featurisation.

The pipeline is

1. :pyfunc:`load_idx` - parse an IDX image/label file pair into a
   :pyclass:`RawDataset` of 8-bit grids;
2. :pyfunc:`avg_pool_2x2` - downsample every image by non-overlapping
   :math:`2\times 2` averaging (28 -> 14);
3. :pyfunc:`normalize` - map pixel values linearly from [0, 255] to
   radians in :math:`[0, \pi/4]`;
4. :pyfunc:`extract_patches` - add the positional bias grid
   :math:`b'` and cut the image into :math:`n_{qc}=L^2` overlapping
   :math:`P\times P` patches with stride :math:`D`.

Patch :math:`p = kL + j` covers rows :math:`[Dk, Dk+P)` and columns
:math:`[Dj, Dj+P)`; its entries are flattened row-major.

Steps 2 and 3 are bundled by :pyfunc:`prepare`, whose output
(:pyclass:`PreparedDataset`) is what the trainer consumes. Dataset order is
never changed here; shuffling belongs to the trainer.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from patchqnn.utils.constants import Constants
from patchqnn.utils.exceptions import (CountMismatchError, DataFormatError,
                                       MagicNumberError, TruncatedPayloadError)
from patchqnn.utils.log_config import logger

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class RawDataset:
    """
    Unprocessed MNIST images and labels.

    Parameters
    ----------
    images : numpy.ndarray, shape (N, H, W), uint8
        Pixel grids with values in [0, 255].
    labels : numpy.ndarray, shape (N,), uint8
        Class indices in [0, 9].
    """
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images)
        self.labels = np.asarray(self.labels)
        if self.images.ndim != 3:
            raise ValueError(f"Images must be a (N, H, W) array, got shape {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"Image count {self.images.shape[0]} differs from label count {self.labels.shape[0]}"
            )
        if self.images.size and (self.images.min() < 0 or self.images.max() > Constants.PIXEL_MAX):
            raise ValueError("Pixel values must lie in [0, 255]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= Constants.N_CLASS):
            raise ValueError(f"Labels must lie in [0, {Constants.N_CLASS - 1}]")

    def __len__(self) -> int:
        return int(self.labels.shape[0])


@dataclass(frozen=True)
class PatchConfig:
    r"""
    Patch geometry on an :math:`M\times M` image.

    Parameters
    ----------
    M : int
        Image side after pooling.
    P : int
        Patch side.
    D : int
        Stride.

    Raises
    ------
    ValueError
        If :math:`M-P` is negative or not divisible by :math:`D`.
    """
    M: int = Constants.IMAGE_SIDE
    P: int = Constants.PATCH_SIDE
    D: int = Constants.STRIDE_BY_NQC[4]

    def __post_init__(self):
        if self.M < 1 or self.P < 1 or self.D < 1:
            raise ValueError(f"M, P and D must be positive, got M={self.M}, P={self.P}, D={self.D}")
        if self.P > self.M:
            raise ValueError(f"Patch side P={self.P} exceeds image side M={self.M}")
        if (self.M - self.P) % self.D != 0:
            raise ValueError(
                f"(M - P) = {self.M - self.P} is not divisible by the stride D={self.D}"
            )

    @property
    def L(self) -> int:
        """Patches per row."""
        return (self.M - self.P) // self.D + 1

    @property
    def n_qc(self) -> int:
        """Number of patches, and hence of QNNs."""
        return self.L * self.L

    @property
    def n_features(self) -> int:
        return self.P * self.P

    @classmethod
    def from_n_qc(cls, n_qc: int, M: int = Constants.IMAGE_SIDE, P: int = Constants.PATCH_SIDE) -> "PatchConfig":
        """Reference geometry for *n_qc* patches (strides 6, 3, 2 for 4, 9, 16)."""
        return cls(M, P, Constants.get_stride(n_qc))

    def corners(self) -> np.ndarray:
        """Top-left ``(row, col)`` of every patch, shape (n_qc, 2), ordered p = kL + j."""
        k, j = np.divmod(np.arange(self.n_qc), self.L)
        return np.stack([self.D * k, self.D * j], axis=1)

    def pixel_index(self) -> np.ndarray:
        """Flat pixel index ``h*M + w`` of every patch entry, shape (n_qc, P*P)."""
        grid = np.arange(self.M * self.M).reshape(self.M, self.M)
        return _windows(grid, self).astype(np.int64)

    def coverage(self) -> np.ndarray:
        """Number of patches containing each pixel, shape (M, M)."""
        counts = np.bincount(self.pixel_index().ravel(), minlength=self.M * self.M)
        return counts.reshape(self.M, self.M)


@dataclass
class PreparedDataset:
    """
    Pooled and normalised images ready for patch extraction.

    Parameters
    ----------
    images : numpy.ndarray, shape (N, M, M), float64
        Angles in radians.
    labels : numpy.ndarray, shape (N,), int64
        Class indices.
    """
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.images = np.ascontiguousarray(self.images, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.images.ndim != 3 or self.images.shape[1] != self.images.shape[2]:
            raise ValueError(f"Images must be a (N, M, M) array, got shape {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"Image count {self.images.shape[0]} differs from label count {self.labels.shape[0]}"
            )
        if not np.all(np.isfinite(self.images)):
            raise ValueError("Prepared images contain non-finite values")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def M(self) -> int:
        return int(self.images.shape[1])

    def subset(self, indices) -> "PreparedDataset":
        """Samples at *indices*, in the given order."""
        indices = np.asarray(indices, dtype=np.int64)
        return PreparedDataset(self.images[indices], self.labels[indices])

    def head(self, n: Optional[int]) -> "PreparedDataset":
        """First *n* samples (all of them when *n* is None)."""
        if n is None or n >= len(self):
            return self
        return PreparedDataset(self.images[:n], self.labels[:n])

    def blocks(self, size: int) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """Consecutive ``(images, labels)`` blocks of at most *size* samples."""
        for lo in range(0, len(self), size):
            yield self.images[lo:lo + size], self.labels[lo:lo + size]


def _read_bytes(path: str) -> bytes:
    if not os.path.exists(path):
        raise FileNotFoundError(f"IDX file not found: {path}")
    with open(path, "rb") as fh:
        return fh.read()


def _parse_idx(path: str, magic: int, ndim: int) -> np.ndarray:
    buf = _read_bytes(path)
    header = 4 * (1 + ndim)
    if len(buf) < header:
        raise TruncatedPayloadError(
            f"IDX header needs {header} bytes, file has {len(buf)}", path=path, offset=len(buf)
        )
    found, *dims = np.frombuffer(buf, dtype=">u4", count=1 + ndim).tolist()
    if found != magic:
        raise MagicNumberError(
            f"Bad IDX magic number 0x{found:08x}, expected 0x{magic:08x}", path=path, offset=0
        )
    expected = int(np.prod(dims, dtype=np.int64))
    if len(buf) - header < expected:
        raise TruncatedPayloadError(
            f"IDX payload truncated: header promises {expected} bytes for dims {dims}, "
            f"found {len(buf) - header}",
            path=path, offset=len(buf),
        )
    return np.frombuffer(buf, dtype=np.uint8, count=expected, offset=header).reshape(dims)


def load_idx(image_path: str, label_path: str) -> RawDataset:
    """
    Parse an IDX image file and its label file.

    Parameters
    ----------
    image_path : str
        IDX3 file (magic ``0x00000803``): count, rows, cols, then pixels.
    label_path : str
        IDX1 file (magic ``0x00000801``): count, then labels.

    Returns
    -------
    RawDataset

    Raises
    ------
    MagicNumberError
        Wrong magic number in either file.
    TruncatedPayloadError
        Header or payload shorter than announced.
    CountMismatchError
        Image and label counts differ.
    """
    images = _parse_idx(image_path, IDX_IMAGES_MAGIC, 3)
    labels = _parse_idx(label_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"Image/label count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels",
            path=label_path, offset=4,
        )
    if labels.size and labels.max() >= Constants.N_CLASS:
        bad = int(np.argmax(labels >= Constants.N_CLASS))
        raise DataFormatError(
            f"Label {int(labels[bad])} at index {bad} is not a digit class",
            path=label_path, offset=8 + bad,
        )
    logger.debug(f"Loaded {images.shape[0]} images of shape {images.shape[1:]} from {image_path}")
    return RawDataset(images, labels)


def avg_pool_2x2(image: np.ndarray) -> np.ndarray:
    """
    Non-overlapping 2x2 mean pooling over the last two axes.

    Works on a single ``(H, W)`` image or a ``(N, H, W)`` stack.

    Raises
    ------
    ValueError
        If either side is odd.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[-2:]
    if h % 2 or w % 2:
        raise ValueError(f"2x2 pooling needs even sides, got {h}x{w}")
    blocks = image.reshape(image.shape[:-2] + (h // 2, 2, w // 2, 2))
    return blocks.mean(axis=(-3, -1))


def normalize(pooled: np.ndarray) -> np.ndarray:
    r"""
    Map pixel intensities in [0, 255] to angles :math:`v/255\cdot\pi/4`.

    Raises
    ------
    ValueError
        If any value lies outside [0, 255].
    """
    pooled = np.asarray(pooled, dtype=np.float64)
    if pooled.size and (pooled.min() < 0.0 or pooled.max() > Constants.PIXEL_MAX):
        raise ValueError(
            f"Pixel values must lie in [0, 255], got range [{pooled.min()}, {pooled.max()}]"
        )
    return pooled / Constants.PIXEL_MAX * Constants.ANGLE_RANGE


def prepare(raw: RawDataset) -> PreparedDataset:
    """Pool then normalise every image of *raw*."""
    return PreparedDataset(normalize(avg_pool_2x2(raw.images)), raw.labels.astype(np.int64))


def zero_bias(M: int) -> np.ndarray:
    """Positional bias grid :math:`b'` at its initial value."""
    return np.zeros((M, M), dtype=np.float64)


def _windows(grid: np.ndarray, cfg: PatchConfig) -> np.ndarray:
    # (..., M, M) -> (..., n_qc, P*P); patch p = k*L + j, row-major inside.
    win = sliding_window_view(grid, (cfg.P, cfg.P), axis=(-2, -1))
    win = win[..., ::cfg.D, ::cfg.D, :, :]
    return win.reshape(grid.shape[:-2] + (cfg.n_qc, cfg.n_features))


def _check_geometry(images: np.ndarray, bias: np.ndarray, cfg: PatchConfig) -> None:
    if images.shape[-2:] != (cfg.M, cfg.M):
        raise ValueError(f"Image shape {images.shape[-2:]} does not match M={cfg.M}")
    if bias.shape != (cfg.M, cfg.M):
        raise ValueError(f"Bias shape {bias.shape} does not match M={cfg.M}")


def extract_patches(image: np.ndarray, bias: np.ndarray, cfg: PatchConfig) -> np.ndarray:
    r"""
    Patch features of one image with the positional bias applied.

    Parameters
    ----------
    image : numpy.ndarray, shape (M, M)
        Normalised image :math:`x'`.
    bias : numpy.ndarray, shape (M, M)
        Bias grid :math:`b'`.
    cfg : PatchConfig
        Geometry.

    Returns
    -------
    numpy.ndarray, shape (n_qc, P*P)
        Row ``p = kL + j`` holds :math:`x'+b'` over rows :math:`[Dk, Dk+P)`
        and columns :math:`[Dj, Dj+P)`, flattened row-major.

    Examples
    --------
    >>> cfg = PatchConfig(14, 8, 6)
    >>> extract_patches(np.zeros((14, 14)), zero_bias(14), cfg).shape
    (4, 64)
    """
    image = np.asarray(image, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    _check_geometry(image, bias, cfg)
    return np.ascontiguousarray(_windows(image + bias, cfg))


def extract_patches_batch(images: np.ndarray, bias: np.ndarray, cfg: PatchConfig) -> np.ndarray:
    """:pyfunc:`extract_patches` over a ``(B, M, M)`` stack; returns (B, n_qc, P*P)."""
    images = np.asarray(images, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if images.ndim != 3:
        raise ValueError(f"Expected a (B, M, M) stack, got shape {images.shape}")
    _check_geometry(images, bias, cfg)
    return np.ascontiguousarray(_windows(images + bias, cfg))
