"""Binary netpbm files: P5 (gray) for label maps, P6 (RGB) for images."""
import typing as t
from pathlib import Path

import numpy as np

from ..exceptions import FormatError, StencilIOError
from .label_map import LabelMap


MAXVAL = 255
_CHANNELS = {b'P5': 1, b'P6': 3}


def _header(magic: bytes, width: int, height: int) -> bytes:
    return b'%s\n%d %d\n%d\n' % (magic, width, height, MAXVAL)


def encode_netpbm(pixels: np.ndarray) -> bytes:
    """Encode an H x W (P5) or H x W x 3 (P6) uint8 array."""
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8:
        raise FormatError(f'Pixels must be uint8, got {pixels.dtype}.')
    if pixels.ndim == 2:
        magic = b'P5'
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = b'P6'
    else:
        raise FormatError(f'Cannot encode an array of shape {pixels.shape}.')
    height, width = pixels.shape[:2]
    return _header(magic, width, height) + np.ascontiguousarray(pixels).tobytes()


def decode_netpbm(data: bytes) -> np.ndarray:
    """Decode a binary P5/P6 file. Comments between header fields are skipped.

    :raises FormatError: On an unknown magic (including ASCII P2/P3), maxval != 255
        or a truncated payload.
    """
    magic = data[:2]
    if magic not in _CHANNELS:
        raise FormatError(f'Unsupported netpbm magic {magic!r}; only binary P5/P6 are read.')

    fields: t.List[int] = []
    position = 2
    while len(fields) < 3:
        while position < len(data) and data[position:position + 1].isspace():
            position += 1
        if data[position:position + 1] == b'#':
            while position < len(data) and data[position:position + 1] != b'\n':
                position += 1
            continue
        start = position
        while position < len(data) and data[position:position + 1].isdigit():
            position += 1
        if start == position:
            raise FormatError('Truncated or malformed netpbm header.')
        fields.append(int(data[start:position]))
    # Exactly one whitespace byte separates the header from the payload.
    position += 1

    width, height, maxval = fields
    if maxval != MAXVAL:
        raise FormatError(f'maxval must be {MAXVAL}, got {maxval}.')
    if width < 1 or height < 1:
        raise FormatError(f'Invalid extents {width}x{height}.')

    channels = _CHANNELS[magic]
    expected = width * height * channels
    payload = data[position:position + expected]
    if len(payload) < expected:
        raise FormatError(f'Truncated payload: expected {expected} bytes, got {len(payload)}.')

    pixels = np.frombuffer(payload, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return pixels.reshape(shape).copy()


def read_netpbm(path: t.Union[str, Path]) -> np.ndarray:
    try:
        with open(path, 'rb') as netpbm_file:
            data = netpbm_file.read()
    except OSError as ex:
        raise StencilIOError(f'Cannot read {path}: {ex}') from ex
    try:
        return decode_netpbm(data)
    except FormatError as ex:
        raise FormatError(f'{path}: {ex.message}') from ex


def write_netpbm(pixels: np.ndarray, path: t.Union[str, Path]):
    data = encode_netpbm(pixels)
    try:
        with open(path, 'wb') as netpbm_file:
            netpbm_file.write(data)
    except OSError as ex:
        raise StencilIOError(f'Cannot write {path}: {ex}') from ex


def load_label_map(path: t.Union[str, Path]) -> LabelMap:
    pixels = read_netpbm(path)
    if pixels.ndim != 2:
        raise FormatError(f'{path}: label maps must be P5 (gray), got an RGB file.')
    return LabelMap(pixels)


def save_label_map(label_map: LabelMap, path: t.Union[str, Path]):
    write_netpbm(label_map.ids, path)


def to_pixels(image: np.ndarray) -> np.ndarray:
    """Map values in [-1, 1] to bytes: round((v + 1) * 127.5), clamped."""
    return np.clip(np.round((np.asarray(image, dtype=np.float64) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def from_pixels(pixels: np.ndarray) -> np.ndarray:
    return pixels.astype(np.float64) / 127.5 - 1.0


def save_image(image: np.ndarray, path: t.Union[str, Path]):
    """Write an H x W x 3 image in [-1, 1] as P6 (or H x W as P5)."""
    write_netpbm(to_pixels(image), path)


def load_image(path: t.Union[str, Path]) -> np.ndarray:
    return from_pixels(read_netpbm(path))
