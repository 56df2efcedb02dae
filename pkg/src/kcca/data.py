"""Validated sample matrices, deterministic file formats, and paired-view data.

Every solver in this package consumes plain float64 numpy arrays with one
sample per row. :func:`data_matrix` is the validation gate: it rejects empty
or non-finite input and returns a read-only copy, so matrices are safe to
share between threads once constructed.

Two on-disk formats are supported. The binary format is bit-exact across
runs and platforms: the magic bytes ``KCM1``, then the row and column counts
as unsigned 64-bit little-endian integers, then the values as IEEE-754
64-bit little-endian floats in row-major order. The CSV format is plain
comma-separated text, no header, one sample per line, with values written at
17 significant digits so that float64 round-trips are value-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

BINARY_MAGIC = b"KCM1"
_HEADER = struct.Struct("<QQ")


def data_matrix(values) -> np.ndarray:
    """Validate and freeze a 2-d float64 sample matrix.

    Parameters
    ----------
    values : array-like
        Anything convertible to a 2-d float array with at least one row and
        one column and no NaN/Inf entries.

    Returns
    -------
    np.ndarray
        A read-only, C-contiguous float64 copy.
    """
    arr = np.array(values, dtype=np.float64, order="C")
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {arr.shape}")
    n, d = arr.shape
    if n < 1 or d < 1:
        raise ValueError(f"matrix must have at least one row and one column, got {n}x{d}")
    if not np.all(np.isfinite(arr)):
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise ValueError(f"non-finite value {arr[i, j]!r} at row {i + 1}, column {j + 1}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ViewPair:
    """Two sample matrices paired by row index."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", data_matrix(self.x))
        object.__setattr__(self, "y", data_matrix(self.y))
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"views must have the same number of rows, got {self.x.shape[0]} and {self.y.shape[0]}"
            )

    @property
    def n(self) -> int:
        return self.x.shape[0]


def read_matrix(path, fmt: str = "binary") -> np.ndarray:
    """Load a matrix file written by :func:`write_matrix`."""
    if fmt == "binary":
        return _read_binary(path)
    if fmt == "csv":
        return _read_csv(path)
    raise ValueError(f"unknown matrix format {fmt!r} (expected 'csv' or 'binary')")


def write_matrix(m, path, fmt: str = "binary") -> None:
    """Write a matrix so that :func:`read_matrix` recovers it exactly."""
    arr = data_matrix(m)
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(_HEADER.pack(*arr.shape))
            fh.write(arr.astype("<f8").tobytes())
    elif fmt == "csv":
        np.savetxt(path, arr, fmt="%.17g", delimiter=",")
    else:
        raise ValueError(f"unknown matrix format {fmt!r} (expected 'csv' or 'binary')")


def detect_format(path) -> str:
    """Sniff whether a file is in the binary or CSV matrix format."""
    with open(path, "rb") as fh:
        return "binary" if fh.read(4) == BINARY_MAGIC else "csv"


def _read_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != BINARY_MAGIC:
        raise ValueError(f"{path}: bad magic bytes, not a KCM1 matrix file")
    if len(buf) < 4 + _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    rows, cols = _HEADER.unpack_from(buf, 4)
    expected = 4 + _HEADER.size + rows * cols * 8
    if len(buf) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {rows}x{cols} values, found {len(buf)}")
    flat = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=4 + _HEADER.size)
    try:
        return data_matrix(flat.reshape(rows, cols))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def _read_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise ValueError(f"{path}: row {lineno} has {len(fields)} fields, expected {width}")
            try:
                row = np.array(fields, dtype=np.float64)
            except ValueError:
                bad = next(j for j, f in enumerate(fields) if not _parses_as_float(f))
                raise ValueError(
                    f"{path}: row {lineno}, column {bad + 1}: cannot parse {fields[bad]!r}"
                ) from None
            if not np.all(np.isfinite(row)):
                j = int(np.flatnonzero(~np.isfinite(row))[0])
                raise ValueError(
                    f"{path}: row {lineno}, column {j + 1}: non-finite value {fields[j]!r}"
                )
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    return data_matrix(np.vstack(rows))


def _parses_as_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def split_image_views(images, width: int, height: int) -> ViewPair:
    """Split row-major images into left-half and right-half views.

    Each row of ``images`` is one ``height`` x ``width`` image stored
    row-major; pixel (r, c) sits at flat index ``r * width + c``. View x
    keeps the left ``width // 2`` columns of every image row, view y the
    right half, both in the original row-major order.
    """
    images = data_matrix(images)
    if width < 2 or width % 2 != 0:
        raise ValueError(f"image width must be even and >= 2, got {width}")
    if height < 1:
        raise ValueError(f"image height must be >= 1, got {height}")
    if images.shape[1] != width * height:
        raise ValueError(
            f"images have {images.shape[1]} columns, expected width*height = {width * height}"
        )
    col = np.arange(width * height) % width
    left = col < width // 2
    return ViewPair(images[:, left], images[:, ~left])


def split_image_permutation(width: int, height: int) -> np.ndarray:
    """Column order produced by concatenating the two split views.

    ``np.hstack([pair.x, pair.y])[:, np.argsort(perm)]`` recovers the input.
    """
    col = np.arange(width * height) % width
    left = col < width // 2
    return np.concatenate([np.flatnonzero(left), np.flatnonzero(~left)])


def make_synthetic_pair(n, dx, dy, l_true, noise, seed):
    """Generate a paired dataset with a shared Gaussian latent factor.

    Draws ``z_i ~ N(0, I)`` in ``l_true`` dimensions and mixes it through
    fixed matrices with orthonormal columns: ``x_i = A_x z_i + noise * e_i``
    and ``y_i = A_y z_i + noise * e_i'`` with isotropic standard-normal
    noise. With this normalization the population covariances are
    ``A A' + noise^2 I`` per view and ``A_x A_y'`` across views, so the
    population canonical correlations are ``1 / (1 + noise^2)`` for each of
    the ``l_true`` shared directions and zero beyond.

    Returns
    -------
    (ViewPair, np.ndarray)
        The sampled pair and the ``l_true`` population canonical
        correlations.
    """
    if l_true < 1 or l_true > min(dx, dy):
        raise ValueError(f"l_true must be in [1, min(dx, dy)], got {l_true}")
    if noise < 0:
        raise ValueError(f"noise must be nonnegative, got {noise}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    ax = np.linalg.qr(rng.standard_normal((dx, l_true)))[0]
    ay = np.linalg.qr(rng.standard_normal((dy, l_true)))[0]
    z = rng.standard_normal((n, l_true))
    x = z @ ax.T + noise * rng.standard_normal((n, dx))
    y = z @ ay.T + noise * rng.standard_normal((n, dy))
    truth = np.full(l_true, 1.0 / (1.0 + noise**2))
    return ViewPair(x, y), truth


def make_bump_images(n, width: int, height: int, n_bumps: int = 3, noise: float = 0.05, seed=0) -> np.ndarray:
    """Sample row-major images made of random Gaussian bumps.

    The bump positions, radii, and amplitudes are shared by the left and
    right halves of each image, so splitting the images into half views
    yields a nonlinearly related pair; useful for desk-scale benchmarks.
    """
    if n < 1 or width < 2 or height < 1 or n_bumps < 1:
        raise ValueError("n, width, height, n_bumps must all be positive (width >= 2)")
    rng = np.random.default_rng(seed)
    rr, cc = np.meshgrid(np.arange(height, dtype=float), np.arange(width, dtype=float), indexing="ij")
    r0 = rng.uniform(0, height - 1, size=(n, n_bumps))
    c0 = rng.uniform(0, width - 1, size=(n, n_bumps))
    rad = rng.uniform(min(width, height) / 6.0, min(width, height) / 2.5, size=(n, n_bumps))
    amp = rng.uniform(0.5, 1.5, size=(n, n_bumps))
    d2 = (rr[None, None] - r0[..., None, None]) ** 2 + (cc[None, None] - c0[..., None, None]) ** 2
    imgs = np.sum(amp[..., None, None] * np.exp(-d2 / (2.0 * rad[..., None, None] ** 2)), axis=1)
    imgs += noise * rng.standard_normal(imgs.shape)
    return data_matrix(imgs.reshape(n, width * height))


def subset_indices(n_total: int, n: int, seed) -> np.ndarray:
    """Seeded sample of ``n`` distinct row indices, in increasing order."""
    if not 1 <= n <= n_total:
        raise ValueError(f"subset size must be in [1, {n_total}], got {n}")
    idx = np.random.default_rng(seed).choice(n_total, size=n, replace=False)
    idx.sort()
    return idx
