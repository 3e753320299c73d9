#  serialization.py - this file is part of the infantcry_tools package.
#  Copyright (C) 2024- infantcry_tools developers
#
#  This program is free software: you can redistribute it and/or modify
#  it under the terms of the GNU General Public License as published by
#  the Free Software Foundation, either version 3 of the License, or
#  (at your option) any later version.
#
#  This program is distributed in the hope that it will be useful,
#  but WITHOUT ANY WARRANTY; without even the implied warranty of
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
#  GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License
#  along with this program. If not, see <https://www.gnu.org/licenses/>.


import logging
import os
import struct
import zlib
from collections import OrderedDict
import numpy as np
from ..common import defines
from ..common.exceptions import (InfantCryError, IoError, BadMagic, VersionMismatch, ChecksumMismatch,
                                 CorruptHeader)
from ..compression.int8 import QuantizedTensor
from ..compression.quantization import QuantizedModel
from .architectures import ModelConfig, build_model

logger = logging.getLogger(__name__)


def serialize_model(model):
    """Encode a model into the ICNM container.

    Layout (little endian): magic "ICNM", u32 version, u32 config length,
    config text, u32 tensor count, tensor records, u32 CRC32 of everything
    before it. A tensor record is u16 name length, name, u8 dtype tag
    (0 float32, 1 int8), u8 ndim, u32 dims, f64 scale (int8 only), payload.

    Parameters
    ----------
    model : Model
        float or quantized model

    Returns
    -------
    bytes
        container bytes
    """
    config = model.config.to_text().encode("utf-8")
    state = model.state_dict()
    chunks = [defines.ICNM_MAGIC, struct.pack("<II", defines.ICNM_VERSION, len(config)), config,
              struct.pack("<I", len(state))]
    for name, tensor in state.items():
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw_name)))
        chunks.append(raw_name)
        if isinstance(tensor, QuantizedTensor):
            chunks.append(struct.pack("<BB", defines.DTYPE_I8, len(tensor.shape)))
            chunks.append(struct.pack("<{:d}I".format(len(tensor.shape)), *tensor.shape))
            chunks.append(struct.pack("<d", tensor.scale))
            chunks.append(np.ascontiguousarray(tensor.values, dtype="i1").tobytes())
        else:
            chunks.append(struct.pack("<BB", defines.DTYPE_F32, tensor.ndim))
            chunks.append(struct.pack("<{:d}I".format(tensor.ndim), *tensor.shape))
            chunks.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    body = b"".join(chunks)

    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


class _Reader(object):

    def __init__(self, data, offset):
        self.data = data
        self.offset = offset

    def take(self, n):
        if n < 0 or self.offset + n > len(self.data):
            raise CorruptHeader("Container ends inside a record at byte {}.".format(self.offset))
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def deserialize_model(data):
    """Decode ICNM bytes into a model (quantized when any tensor is int8).

    Raises
    ------
    BadMagic
        wrong leading bytes
    ChecksumMismatch
        CRC32 does not match the content
    VersionMismatch
        unknown container version
    CorruptHeader
        structurally invalid content
    """
    if len(data) < 4 or data[:4] != defines.ICNM_MAGIC:
        raise BadMagic("Not an ICNM model file.")
    if len(data) < 16:
        raise CorruptHeader("Container is only {} bytes long.".format(len(data)))
    (crc, ) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc:
        raise ChecksumMismatch("Model file checksum does not match its content.")

    reader = _Reader(data[:-4], 4)
    version, config_len = reader.unpack("<II")
    if version != defines.ICNM_VERSION:
        raise VersionMismatch("Model file version {} is not supported (expected {}).".format(
            version, defines.ICNM_VERSION))
    try:
        config = ModelConfig.from_text(reader.take(config_len).decode("utf-8"))
    except (InfantCryError, UnicodeDecodeError) as e:
        raise CorruptHeader("Bad model config block: {}".format(e))

    (n_tensors, ) = reader.unpack("<I")
    state = OrderedDict()
    for _ in range(n_tensors):
        (name_len, ) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8", errors="replace")
        tag, ndim = reader.unpack("<BB")
        shape = reader.unpack("<{:d}I".format(ndim))
        count = int(np.prod(shape, dtype=np.int64))
        if tag == defines.DTYPE_I8:
            (scale, ) = reader.unpack("<d")
            values = np.frombuffer(reader.take(count), dtype="i1").reshape(shape).copy()
            state[name] = QuantizedTensor(values, scale)
        elif tag == defines.DTYPE_F32:
            state[name] = np.frombuffer(reader.take(4 * count), dtype="<f4").reshape(shape).astype(np.float32)
        else:
            raise CorruptHeader("Unknown dtype tag {} for tensor {}.".format(tag, name))
    if reader.offset != len(reader.data):
        raise CorruptHeader("{} trailing bytes after the last tensor.".format(len(reader.data) - reader.offset))

    model = build_model(config)
    try:
        model.load_state_dict(state)
    except (InfantCryError, KeyError) as e:
        raise CorruptHeader("Tensors do not match the {} config: {}".format(config.arch, e))
    if any(isinstance(t, QuantizedTensor) for t in state.values()):
        model = QuantizedModel.from_model(model)

    return model


def save_model(model, path):
    """Write a model to `path` in the ICNM container."""
    data = serialize_model(model)
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise IoError("Cannot write model to {}: {}".format(path, e))
    logger.info("Saved %s model (%d bytes) to %s", model.config.arch, len(data), path)

    return len(data)


def load_model(path):
    """Read a model written by `save_model`."""
    if not os.path.isfile(path):
        raise IoError("Model file {} not found.".format(path))
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise IoError("Cannot read model from {}: {}".format(path, e))

    return deserialize_model(data)


def model_size(model):
    """Parameter count and container size in bytes.

    Returns
    -------
    dict
        `param_count` and `serialized_bytes`
    """
    return {"param_count": model.param_count(), "serialized_bytes": len(serialize_model(model))}
