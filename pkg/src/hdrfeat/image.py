"""Image containers and file I/O for LDR and HDR captures.

Every image is held as float32.  LDR files (8-bit PGM/PPM/PNG) are
normalized to [0, 1] by dividing by the format maximum; HDR files
(Radiance RGBE ``.hdr`` and PFM) keep their radiance values verbatim.

Supported formats
-----------------
* PGM / PPM, binary (P5/P6) and ASCII (P2/P3)
* PNG through Pillow
* PFM (``Pf`` grayscale, ``PF`` color), either endianness on read;
  written little-endian with scale ``-1.0``
* Radiance RGBE, flat and run-length encoded scanlines
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError

#: ITU-R BT.601 luma weights.
BT601_WEIGHTS = (0.299, 0.587, 0.114)


class DynamicRange(str, enum.Enum):
    LDR = "ldr"
    HDR = "hdr"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    arr.setflags(write=False)
    return arr


def _first_pixel(bad: np.ndarray) -> int:
    """Row-major pixel index of the first flagged sample (any channel)."""
    per_pixel = bad.reshape(bad.shape[0] * bad.shape[1], -1).any(axis=1)
    return int(np.flatnonzero(per_pixel)[0])


def _check_range(data: np.ndarray, dynamic_range: DynamicRange) -> None:
    if data.size == 0:
        raise DataError("image must be at least 1x1")
    bad = ~np.isfinite(data)
    if bad.any():
        raise DataError(f"non-finite sample at flat index {_first_pixel(bad)}")
    if dynamic_range is DynamicRange.LDR:
        if data.min() < 0.0 or data.max() > 1.0:
            raise DataError("LDR samples must lie in [0, 1]")
    elif data.min() < 0.0:
        raise DataError(f"negative HDR sample at flat index {_first_pixel(data < 0)}")


@dataclass(frozen=True)
class FloatImage:
    """Single-channel float32 raster, row-major ``(height, width)``.

    Immutable: ``data`` is a read-only array.  ``np.asarray(img)`` returns
    the pixel array, so a FloatImage can be passed anywhere an array is
    accepted.
    """

    data: np.ndarray
    dynamic_range: DynamicRange = DynamicRange.LDR

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise DataError(f"FloatImage needs a 2-D array, got shape {data.shape}")
        dr = DynamicRange(self.dynamic_range)
        data = _freeze(data)
        _check_range(data, dr)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dynamic_range", dr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)


@dataclass(frozen=True)
class RgbImage:
    """Three-channel float32 raster of shape ``(height, width, 3)``."""

    data: np.ndarray
    dynamic_range: DynamicRange = DynamicRange.LDR

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or data.shape[2] != 3:
            raise DataError(f"RgbImage needs shape (h, w, 3), got {data.shape}")
        dr = DynamicRange(self.dynamic_range)
        data = _freeze(data)
        _check_range(data, dr)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dynamic_range", dr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def to_luminance(img: RgbImage, weights=BT601_WEIGHTS) -> FloatImage:
    """Weighted channel sum ``wr*R + wg*G + wb*B``.

    Gray pixels (R == G == B) are passed through unchanged so that
    single-channel sources survive a load/convert round trip bit-exactly.
    """
    wr, wg, wb = (float(w) for w in weights)
    rgb = img.data
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = (wr * r.astype(np.float64) + wg * g.astype(np.float64)
         + wb * b.astype(np.float64)).astype(np.float32)
    gray = (r == g) & (g == b)
    y = np.where(gray, r, y)
    # rounding can push a weighted sum a hair past the channel extremes
    y = np.clip(y, rgb.min(axis=2), rgb.max(axis=2))
    return FloatImage(y, img.dynamic_range)


# ---------------------------------------------------------------------------
# Netpbm

_PNM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _pnm_header(buf: bytes) -> tuple[bytes, int, int, int, int]:
    pos = 0
    fields = []
    for _ in range(4):
        m = _PNM_TOKEN.match(buf, pos)
        if m is None:
            raise FormatError("truncated PNM header")
        fields.append(m.group(1))
        pos = m.end()
    magic, w, h, maxval = fields
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise FormatError("malformed PNM header") from exc
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise FormatError(f"invalid PNM geometry {w}x{h} maxval {maxval}")
    return magic, w, h, maxval, pos + 1  # one whitespace byte ends the header


def _read_pnm(buf: bytes) -> tuple[np.ndarray, int]:
    magic, w, h, maxval, start = _pnm_header(buf)
    channels = 1 if magic in (b"P2", b"P5") else 3
    count = w * h * channels
    if magic in (b"P5", b"P6"):
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = np.frombuffer(buf, dtype=dtype, count=-1, offset=start)
        if raw.size < count:
            raise DataError("PNM pixel data is truncated")
        values = raw[:count].astype(np.int64)
    else:
        tokens = buf[start - 1:].split()
        if len(tokens) < count:
            raise DataError("PNM pixel data is truncated")
        values = np.array([int(t) for t in tokens[:count]], dtype=np.int64)
    if values.max(initial=0) > maxval:
        raise DataError("PNM sample exceeds maxval")
    return values.reshape(h, w, channels), maxval


def _write_pnm(path: Path, values: np.ndarray) -> None:
    h, w = values.shape[:2]
    magic = b"P5" if values.ndim == 2 else b"P6"
    with open(path, "wb") as fh:
        fh.write(b"%s\n%d %d\n255\n" % (magic, w, h))
        fh.write(np.ascontiguousarray(values, dtype=np.uint8).tobytes())


def save_pgm(path, data) -> None:
    """Write an 8-bit grayscale PGM.  Float input in [0, 1] is scaled by 255."""
    arr = np.asarray(data)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(np.asarray(arr, dtype=np.float64) * 255.0), 0, 255)
    _write_pnm(Path(path), arr.astype(np.uint8))


def save_ppm(path, data) -> None:
    """Write an 8-bit PPM from an ``(h, w, 3)`` array (uint8, or float in [0, 1])."""
    arr = np.asarray(data)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DataError("PPM needs an (h, w, 3) array")
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(np.asarray(arr, dtype=np.float64) * 255.0), 0, 255)
    _write_pnm(Path(path), arr.astype(np.uint8))


def read_pgm_u8(path) -> np.ndarray:
    """Raw integer samples of a single-channel PGM (used for masks)."""
    values, _ = _read_pnm(Path(path).read_bytes())
    if values.shape[2] != 1:
        raise FormatError(f"{path}: expected a single-channel PGM")
    return values[..., 0]


# ---------------------------------------------------------------------------
# PFM

def _read_pfm(buf: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    for _ in range(4):
        m = _PNM_TOKEN.match(buf, pos)
        if m is None:
            raise FormatError("truncated PFM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic, w, h, scale = tokens
    channels = {b"Pf": 1, b"PF": 3}[magic]
    try:
        w, h, scale = int(w), int(h), float(scale)
    except ValueError as exc:
        raise FormatError("malformed PFM header") from exc
    if w < 1 or h < 1 or scale == 0.0:
        raise FormatError("invalid PFM header")
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    count = w * h * channels
    if (len(buf) - pos - 1) // 4 < count:
        raise DataError("PFM pixel data is truncated")
    raw = np.frombuffer(buf, dtype=dtype, count=count, offset=pos + 1)
    # PFM scanlines run bottom-to-top
    return raw.astype(np.float32).reshape(h, w, channels)[::-1]


def save_pfm(path, img) -> None:
    """Write a FloatImage/RgbImage/array as little-endian PFM (scale -1.0)."""
    arr = np.asarray(img.data if hasattr(img, "data") else img, dtype=np.float32)
    if arr.ndim == 2:
        magic = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"PF"
    else:
        raise DataError(f"cannot write shape {arr.shape} as PFM")
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"%s\n%d %d\n-1.0\n" % (magic, w, h))
        fh.write(np.ascontiguousarray(arr[::-1], dtype="<f4").tobytes())


# ---------------------------------------------------------------------------
# Radiance RGBE

_RGBE_SIZE = re.compile(rb"-Y\s+(\d+)\s+\+X\s+(\d+)")


def _rle_decode_channel(buf: bytes, pos: int, width: int, out: np.ndarray) -> int:
    x = 0
    while x < width:
        if pos >= len(buf):
            raise DataError("RGBE scanline is truncated")
        count = buf[pos]
        pos += 1
        if count > 128:
            count -= 128
            if x + count > width or pos >= len(buf):
                raise DataError("RGBE run overflows scanline")
            out[x:x + count] = buf[pos]
            pos += 1
        else:
            if count == 0 or x + count > width or pos + count > len(buf):
                raise DataError("corrupt RGBE scanline")
            out[x:x + count] = np.frombuffer(buf, np.uint8, count, pos)
            pos += count
        x += count
    return pos


def _read_rgbe(buf: bytes) -> np.ndarray:
    if not (buf.startswith(b"#?RADIANCE") or buf.startswith(b"#?RGBE")):
        raise FormatError("missing Radiance signature")
    end = buf.find(b"\n\n")
    if end < 0:
        raise FormatError("unterminated Radiance header")
    header = buf[:end]
    fmt = re.search(rb"FORMAT=(\S+)", header)
    if fmt and fmt.group(1) != b"32-bit_rle_rgbe":
        raise FormatError(f"unsupported Radiance pixel format {fmt.group(1)!r}")
    line_end = buf.find(b"\n", end + 2)
    m = _RGBE_SIZE.fullmatch(buf[end + 2:line_end].strip())
    if m is None:
        raise FormatError("only '-Y h +X w' Radiance orientation is supported")
    h, w = int(m.group(1)), int(m.group(2))
    pos = line_end + 1
    rgbe = np.empty((h, w, 4), dtype=np.uint8)
    for y in range(h):
        head = buf[pos:pos + 4]
        if (8 <= w < 32768 and len(head) == 4 and head[0] == 2 and head[1] == 2
                and not head[2] & 0x80):
            if (head[2] << 8 | head[3]) != w:
                raise DataError(f"RGBE scanline {y} width mismatch")
            pos += 4
            for c in range(4):
                pos = _rle_decode_channel(buf, pos, w, rgbe[y, :, c])
        else:
            if pos + 4 * w > len(buf):
                raise DataError("RGBE pixel data is truncated")
            block = np.frombuffer(buf, np.uint8, 4 * w, pos).reshape(w, 4)
            rgbe[y] = block
            pos += 4 * w
    mant = rgbe[..., :3].astype(np.float64)
    exp = rgbe[..., 3].astype(np.int32)
    scale = np.ldexp(1.0, exp - (128 + 8))
    rgb = np.where(exp[..., None] == 0, 0.0, (mant + 0.5) * scale[..., None])
    return rgb.astype(np.float32)


def _float_to_rgbe(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    v = rgb.max(axis=2)
    mant, exp = np.frexp(v)
    small = v < 1e-32
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(small, 0.0, mant * 256.0 / np.where(small, 1.0, v))
    out = np.zeros(rgb.shape[:2] + (4,), dtype=np.uint8)
    out[..., :3] = np.clip(np.floor(rgb * scale[..., None]), 0, 255).astype(np.uint8)
    out[..., 3] = np.where(small, 0, exp + 128).astype(np.uint8)
    return out


def _rle_encode_channel(data: np.ndarray) -> bytes:
    out = bytearray()
    n = len(data)
    i = 0
    while i < n:
        run = 1
        while i + run < n and run < 127 and data[i + run] == data[i]:
            run += 1
        if run >= 4:
            out += bytes((128 + run, int(data[i])))
            i += run
            continue
        start = i
        while i < n and i - start < 128:
            if i + 3 < n and data[i] == data[i + 1] == data[i + 2] == data[i + 3]:
                break
            i += 1
        out.append(i - start)
        out += bytes(int(b) for b in data[start:i])
    return bytes(out)


def save_rgbe(path, img, rle: bool = True) -> None:
    """Write a Radiance ``.hdr`` file.  Grayscale input is replicated to RGB."""
    arr = np.asarray(img.data if hasattr(img, "data") else img, dtype=np.float64)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DataError(f"cannot write shape {arr.shape} as RGBE")
    h, w = arr.shape[:2]
    rgbe = _float_to_rgbe(arr)
    body = bytearray()
    use_rle = rle and 8 <= w < 32768
    for y in range(h):
        if use_rle:
            body += bytes((2, 2, w >> 8, w & 0xFF))
            for c in range(4):
                body += _rle_encode_channel(rgbe[y, :, c])
        else:
            body += rgbe[y].tobytes()
    with open(path, "wb") as fh:
        fh.write(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n")
        fh.write(b"-Y %d +X %d\n" % (h, w))
        fh.write(bytes(body))


# ---------------------------------------------------------------------------

def _to_rgb(values: np.ndarray) -> np.ndarray:
    if values.shape[2] == 1:
        values = np.repeat(values, 3, axis=2)
    return values


def load_image(path) -> RgbImage:
    """Load an LDR or HDR image file into an :class:`RgbImage`.

    The format is chosen from the file's magic bytes, not its extension.

    Raises
    ------
    OSError
        The file cannot be read.
    FormatError
        Unknown or unsupported format.
    DataError
        Truncated data, or a NaN/Inf/negative HDR sample (the message names
        the flat pixel index).
    """
    path = Path(path)
    buf = path.read_bytes()
    magic = buf[:2]
    if magic in (b"P2", b"P3", b"P5", b"P6"):
        values, maxval = _read_pnm(buf)
        rgb = _to_rgb(values.astype(np.float64) / float(maxval))
        return RgbImage(rgb, DynamicRange.LDR)
    if magic in (b"Pf", b"PF"):
        rgb = _to_rgb(_read_pfm(buf))
        return RgbImage(rgb, DynamicRange.HDR)
    if buf.startswith(b"#?"):
        return RgbImage(_read_rgbe(buf), DynamicRange.HDR)
    if buf.startswith(b"\x89PNG\r\n\x1a\n"):
        return _load_png(path)
    raise FormatError(f"{path}: unsupported image format")


def _load_png(path: Path) -> RgbImage:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
            rgb = np.repeat(np.clip(arr, 0, 1)[..., None], 3, axis=2)
        else:
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return RgbImage(rgb, DynamicRange.LDR)


def load_luminance(path, weights=BT601_WEIGHTS) -> FloatImage:
    """``to_luminance(load_image(path))``."""
    return to_luminance(load_image(path), weights)


def as_array(img) -> np.ndarray:
    """2-D float64 view of a FloatImage or array-like."""
    arr = np.asarray(img.data if isinstance(img, (FloatImage, RgbImage)) else img,
                     dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"expected a single-channel image, got shape {arr.shape}")
    return arr


def luminance_heatmap(lum, path) -> None:
    """Save a luminance map as a blue-to-red heat-map PPM."""
    arr = as_array(lum)
    lo, hi = arr.min(), arr.max()
    t = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
    # piecewise-linear "jet"
    r = np.clip(1.5 - np.abs(4.0 * t - 3.0), 0, 1)
    g = np.clip(1.5 - np.abs(4.0 * t - 2.0), 0, 1)
    b = np.clip(1.5 - np.abs(4.0 * t - 1.0), 0, 1)
    save_ppm(path, np.stack([r, g, b], axis=2))


__all__ = [
    "BT601_WEIGHTS", "DynamicRange", "FloatImage", "RgbImage", "as_array",
    "load_image", "load_luminance", "luminance_heatmap", "read_pgm_u8",
    "save_pfm", "save_pgm", "save_ppm", "save_rgbe", "to_luminance",
]
