"""Checkpoint files.

Layout: b"FSN1", uint32 LE version, uint64 LE header length, UTF-8 JSON header
{"config", "text_encoder", "manifest": [{"name", "shape"}], "optimizer"}, then
the float64 LE arrays of the manifest, back to back.
"""
import json
import logging
import struct
import typing as t
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import FormatError, StencilIOError
from ..tensor import AdamState
from .config import DenoiserConfig
from .unet import Denoiser


logger = logging.getLogger(__name__)

MAGIC = b'FSN1'
VERSION = 1
_PREAMBLE = struct.Struct('<4sIQ')
_M, _V = 'adam.m.', 'adam.v.'


@dataclass
class Checkpoint:
    config: DenoiserConfig
    text_encoder: t.Dict[str, int]
    state: 'OrderedDict[str, np.ndarray]'
    optimizer: t.Optional[AdamState] = None

    def build(self) -> Denoiser:
        model = Denoiser(self.config)
        model.load_state_dict(self.state)
        return model


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    arrays = OrderedDict(checkpoint.state)
    optimizer = None
    if checkpoint.optimizer is not None:
        optimizer = {'step': checkpoint.optimizer.step}
        for name in checkpoint.state:
            if name in checkpoint.optimizer.m:
                arrays[_M + name] = checkpoint.optimizer.m[name]
                arrays[_V + name] = checkpoint.optimizer.v[name]

    header = json.dumps({
        'config': checkpoint.config.to_json(),
        'text_encoder': checkpoint.text_encoder,
        'manifest': [{'name': name, 'shape': list(np.shape(array))} for name, array in arrays.items()],
        'optimizer': optimizer
    }, sort_keys=True).encode('utf-8')

    payload = b''.join(np.ascontiguousarray(array, dtype='<f8').tobytes() for array in arrays.values())
    return _PREAMBLE.pack(MAGIC, VERSION, len(header)) + header + payload


def decode_checkpoint(data: bytes) -> Checkpoint:
    """:raises FormatError: On a bad magic, unknown version, malformed header or truncated data."""
    if len(data) < _PREAMBLE.size:
        raise FormatError('Checkpoint is shorter than its preamble.')
    magic, version, header_length = _PREAMBLE.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f'Not a checkpoint (magic {magic!r}).')
    if version != VERSION:
        raise FormatError(f'Unsupported checkpoint version {version}.')

    start = _PREAMBLE.size
    try:
        header = json.loads(data[start:start + header_length].decode('utf-8'))
        config = DenoiserConfig.from_json(header['config'])
        manifest = [(entry['name'], tuple(entry['shape'])) for entry in header['manifest']]
        text_encoder = header['text_encoder']
        optimizer_header = header['optimizer']
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as ex:
        raise FormatError(f'Malformed checkpoint header: {ex}') from ex

    offset = start + header_length
    arrays: 'OrderedDict[str, np.ndarray]' = OrderedDict()
    for name, shape in manifest:
        count = int(np.prod(shape, dtype=int))
        end = offset + 8 * count
        if end > len(data):
            raise FormatError(f'Checkpoint data ends inside "{name}".')
        arrays[name] = np.frombuffer(data[offset:end], dtype='<f8').astype(np.float64).reshape(shape)
        offset = end
    if offset != len(data):
        raise FormatError(f'{len(data) - offset} trailing bytes after the checkpoint data.')

    state = OrderedDict((name, array) for name, array in arrays.items() if not name.startswith((_M, _V)))
    optimizer = None
    if optimizer_header is not None:
        optimizer = AdamState(
            step=int(optimizer_header['step']),
            m={name[len(_M):]: array for name, array in arrays.items() if name.startswith(_M)},
            v={name[len(_V):]: array for name, array in arrays.items() if name.startswith(_V)}
        )
    return Checkpoint(config=config, text_encoder=text_encoder, state=state, optimizer=optimizer)


def save_checkpoint(
    path: t.Union[str, Path],
    model: Denoiser,
    text_encoder: t.Mapping[str, int],
    optimizer: AdamState = None
) -> Path:
    path = Path(path)
    data = encode_checkpoint(Checkpoint(model.config, dict(text_encoder), model.state_dict(), optimizer))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as ex:
        raise StencilIOError(f'Cannot write checkpoint {path}: {ex}') from ex
    logger.info('Saved checkpoint %s (%d parameters).', path, model.parameter_count())
    return path


def load_checkpoint(path: t.Union[str, Path]) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as ex:
        raise StencilIOError(f'Cannot read checkpoint {path}: {ex}') from ex
    try:
        return decode_checkpoint(data)
    except FormatError as ex:
        raise FormatError(f'{path}: {ex.message}') from ex
