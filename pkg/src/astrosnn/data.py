"""Dataset loading, edge filtering, and rate encoding.

IDX files are parsed with strict header validation (big-endian, unsigned
byte payload) and may be gzip-compressed; compression is detected from the
file's own magic bytes, not its name. Images are converted to spike
rasters by Bernoulli sampling per timestep at a rate proportional to
pixel intensity.
"""

from __future__ import annotations

import gzip
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractViolationError, DataFormatError

IDX_DTYPE_UBYTE = 0x08
GZIP_MAGIC = b"\x1f\x8b"


@dataclass
class ImageSample:
    """One image with its class label. Pixels are intensities in [0, 255]."""

    pixels: np.ndarray
    label: int


@dataclass
class EncoderConfig:
    """Rate-coding parameters.

    A pixel of full intensity (255) fires at max_rate_hz; intermediate
    intensities scale linearly. Presentation lasts duration_ms simulated
    at dt_ms resolution.
    """

    max_rate_hz: float = 128.0
    duration_ms: float = 250.0
    dt_ms: float = 1.0

    @property
    def intensity_scale(self) -> float:
        """Firing rate in Hz contributed by one intensity unit."""
        return self.max_rate_hz / 255.0

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_ms / self.dt_ms))

    def validate(self) -> None:
        if self.max_rate_hz < 0:
            raise ConfigError(f"max_rate_hz must be >= 0, got {self.max_rate_hz}")
        if self.duration_ms <= 0 or self.dt_ms <= 0:
            raise ConfigError(
                f"duration_ms and dt_ms must be > 0, got {self.duration_ms}, {self.dt_ms}"
            )
        # Bernoulli approximation breaks down when more than one spike
        # would be expected per step.
        p_max = self.max_rate_hz * self.dt_ms / 1000.0
        if p_max > 1.0:
            raise ConfigError(
                f"max_rate_hz * dt_ms = {p_max:.3f} spikes/step exceeds 1; "
                "lower the rate or shrink the step"
            )


def _read_file_bytes(path: str) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
        rest = fh.read()
    raw = head + rest
    if head == GZIP_MAGIC:
        try:
            return gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise DataFormatError(f"{path}: gzip stream is corrupt: {exc}") from exc
    return raw


def load_idx(path: str) -> np.ndarray:
    """Parse an IDX file into an ndarray of uint8.

    Accepts 1-D payloads (labels) and 3-D payloads (image stacks).
    Raises DataFormatError naming the byte offset of the first
    inconsistency. Gzip-compressed files are decompressed transparently.
    """
    buf = _read_file_bytes(path)
    if len(buf) < 4:
        raise DataFormatError(f"{path}: file too short for IDX magic at byte 0 (got {len(buf)} bytes)")
    if buf[0] != 0 or buf[1] != 0:
        raise DataFormatError(f"{path}: bad IDX magic at byte 0: expected 0x0000, got 0x{buf[0]:02x}{buf[1]:02x}")
    dtype_code = buf[2]
    if dtype_code != IDX_DTYPE_UBYTE:
        raise DataFormatError(f"{path}: unsupported dtype code 0x{dtype_code:02x} at byte 2 (only unsigned byte 0x08)")
    ndim = buf[3]
    if ndim not in (1, 3):
        raise DataFormatError(f"{path}: unsupported dimension count {ndim} at byte 3 (expected 1 or 3)")
    header_len = 4 + 4 * ndim
    if len(buf) < header_len:
        raise DataFormatError(f"{path}: truncated header at byte {len(buf)}: need {header_len} bytes for {ndim} dims")
    dims = tuple(int.from_bytes(buf[4 + 4 * i : 8 + 4 * i], "big") for i in range(ndim))
    n_items = 1
    for d in dims:
        n_items *= d
    if len(buf) - header_len < n_items:
        raise DataFormatError(
            f"{path}: truncated payload at byte {len(buf)}: header promises {n_items} bytes from offset {header_len}"
        )
    if len(buf) - header_len > n_items:
        raise DataFormatError(
            f"{path}: {len(buf) - header_len - n_items} trailing bytes after payload at byte {header_len + n_items}"
        )
    arr = np.frombuffer(buf, dtype=np.uint8, offset=header_len)
    return arr.reshape(dims).copy()


def write_idx(arr: np.ndarray, path: str, compress: bool | None = None) -> None:
    """Serialize a uint8 array of 1 or 3 dimensions as an IDX file.

    compress=None infers gzip from a ".gz" suffix. Parsing the result
    with load_idx reproduces the array, and re-serializing a parsed file
    reproduces its uncompressed bytes.
    """
    if arr.dtype != np.uint8:
        raise ContractViolationError(f"write_idx requires uint8 data, got {arr.dtype}")
    if arr.ndim not in (1, 3):
        raise ContractViolationError(f"write_idx requires 1 or 3 dimensions, got {arr.ndim}")
    header = bytes([0, 0, IDX_DTYPE_UBYTE, arr.ndim])
    for d in arr.shape:
        header += int(d).to_bytes(4, "big")
    payload = header + np.ascontiguousarray(arr).tobytes()
    if compress is None:
        compress = path.endswith(".gz")
    if compress:
        # mtime pinned so identical arrays produce identical files.
        payload = gzip.compress(payload, 9, mtime=0)
    with open(path, "wb") as fh:
        fh.write(payload)


def load_image_file(path: str) -> np.ndarray:
    """load_idx restricted to image stacks of shape (N, 28, 28)."""
    arr = load_idx(path)
    if arr.ndim != 3:
        raise DataFormatError(f"{path}: expected a 3-D image stack, got {arr.ndim} dims")
    if arr.shape[1:] != (28, 28):
        raise DataFormatError(f"{path}: expected 28x28 images, got {arr.shape[1]}x{arr.shape[2]}")
    return arr


def load_label_file(path: str) -> np.ndarray:
    """load_idx restricted to label vectors."""
    arr = load_idx(path)
    if arr.ndim != 1:
        raise DataFormatError(f"{path}: expected a 1-D label vector, got {arr.ndim} dims")
    return arr


def load_dataset(images_path: str, labels_path: str) -> tuple[np.ndarray, np.ndarray]:
    """Load a matched (images, labels) pair, checking the counts agree."""
    images = load_image_file(images_path)
    labels = load_label_file(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"image count {images.shape[0]} ({images_path}) does not match label count {labels.shape[0]} ({labels_path})"
        )
    return images, labels


# 3x3 edge kernels, applied as correlation. Only the gradient magnitude
# is used, so the sign convention is immaterial.
_SOBEL_GX = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_GY = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])


def sobel_filter(image: np.ndarray) -> np.ndarray:
    """Gradient-magnitude edge map rescaled to [0, 255].

    The image border is zero-padded. A constant image has zero gradient
    interior but nonzero response at the border, which is the intended
    behavior for centered digit data. All-zero responses stay all zero.
    """
    if image.ndim != 2:
        raise ContractViolationError(f"sobel_filter expects a 2-D image, got {image.ndim} dims")
    img = np.asarray(image, dtype=np.float64)
    padded = np.pad(img, 1, mode="constant", constant_values=0.0)
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    h, w = img.shape
    for di in range(3):
        for dj in range(3):
            window = padded[di : di + h, dj : dj + w]
            gx += _SOBEL_GX[di, dj] * window
            gy += _SOBEL_GY[di, dj] * window
    mag = np.sqrt(gx * gx + gy * gy)
    peak = mag.max()
    if peak > 0.0:
        mag *= 255.0 / peak
    return mag


def poisson_encode(image: np.ndarray, config: EncoderConfig, rng: np.random.Generator) -> np.ndarray:
    """Encode an image as a boolean spike raster of shape (steps, pixels).

    Each pixel spikes independently per step with probability
    rate * dt, rate = intensity / 255 * max_rate_hz. Zero pixels never
    spike. The raster depends only on the supplied rng stream, so
    per-sample derived streams make encoding order-independent.
    """
    config.validate()
    flat = np.asarray(image, dtype=np.float64).reshape(-1)
    if flat.size == 0:
        raise ContractViolationError("poisson_encode got an empty image")
    if flat.min() < 0.0 or flat.max() > 255.0:
        raise ContractViolationError(
            f"pixel intensities must lie in [0, 255], got range [{flat.min()}, {flat.max()}]"
        )
    p_spike = flat / 255.0 * config.max_rate_hz * config.dt_ms / 1000.0
    raster = rng.random((config.n_steps, flat.size)) < p_spike[None, :]
    return raster


STANDARD_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass
class DatasetBundle:
    """Preprocessed train/test split ready for encoding.

    Images are flattened float64 rows in [0, 255]; edge filtering, when
    requested, has already been applied.
    """

    name: str
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray

    @property
    def n_pixels(self) -> int:
        return self.train_x.shape[1]


def _resolve_standard_file(data_dir: str, stem: str) -> str:
    plain = os.path.join(data_dir, stem)
    gz = plain + ".gz"
    if os.path.exists(plain):
        return plain
    if os.path.exists(gz):
        return gz
    raise DataFormatError(f"missing dataset file {plain} (also tried {gz})")


def preprocess_images(images: np.ndarray, use_sobel: bool) -> np.ndarray:
    """Flatten an image stack to float64 rows, optionally edge-filtered."""
    if use_sobel:
        out = np.empty((images.shape[0], images.shape[1] * images.shape[2]))
        for i in range(images.shape[0]):
            out[i] = sobel_filter(images[i]).reshape(-1)
        return out
    return np.asarray(images, dtype=np.float64).reshape(images.shape[0], -1)


def load_standard_dataset(
    data_dir: str,
    name: str,
    train_limit: int | None = None,
    test_limit: int | None = None,
    use_sobel: bool = False,
) -> DatasetBundle:
    """Load the four conventionally named IDX files under data_dir.

    Both supported datasets ship with identical file names, so the
    directory choice selects the dataset and `name` only labels the
    bundle in downstream records.
    """
    train = load_dataset(
        _resolve_standard_file(data_dir, STANDARD_FILES["train_images"]),
        _resolve_standard_file(data_dir, STANDARD_FILES["train_labels"]),
    )
    test = load_dataset(
        _resolve_standard_file(data_dir, STANDARD_FILES["test_images"]),
        _resolve_standard_file(data_dir, STANDARD_FILES["test_labels"]),
    )
    train_images, train_y = train
    test_images, test_y = test
    if train_limit is not None:
        train_images, train_y = train_images[:train_limit], train_y[:train_limit]
    if test_limit is not None:
        test_images, test_y = test_images[:test_limit], test_y[:test_limit]
    return DatasetBundle(
        name=name,
        train_x=preprocess_images(train_images, use_sobel),
        train_y=train_y.astype(np.int64),
        test_x=preprocess_images(test_images, use_sobel),
        test_y=test_y.astype(np.int64),
    )
