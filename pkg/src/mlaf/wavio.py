"""Minimal RIFF/WAVE reader for PCM and IEEE-float files.

Only what the simulations need: the first channel, scaled to floats in
[-1, 1). Errors carry the byte offset where decoding went wrong.
"""

import struct

import numpy as np

from .errors import WavFormatError

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


def _decode(raw, fmt_tag, bits, channels, offset):
    width = bits // 8
    frame = width * channels
    n = len(raw) // frame
    raw = raw[: n * frame]
    if fmt_tag == WAVE_FORMAT_IEEE_FLOAT:
        if bits not in (32, 64):
            raise WavFormatError(f"unsupported float sample width {bits}", offset)
        data = np.frombuffer(raw, dtype=f"<f{width}").astype(np.float64)
        return data.reshape(n, channels)[:, 0]
    if bits == 8:
        data = np.frombuffer(raw, dtype=np.uint8).astype(np.float64)
        return (data.reshape(n, channels)[:, 0] - 128.0) / 128.0
    if bits == 16:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64)
        return data.reshape(n, channels)[:, 0] / 32768.0
    if bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(n, channels, 3)[:, 0, :].astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v & 0x800000, v - (1 << 24), v)
        return v.astype(np.float64) / float(1 << 23)
    if bits == 32:
        data = np.frombuffer(raw, dtype="<i4").astype(np.float64)
        return data.reshape(n, channels)[:, 0] / float(1 << 31)
    raise WavFormatError(f"unsupported PCM sample width {bits}", offset)


def read_wav(path):
    """Read a WAV file.

    Returns
    -------
    rate : int
        Sample rate in Hz (recorded, never resampled).
    samples : ndarray of float64
        First channel, unit-scale.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12:
        raise WavFormatError("file too short for a RIFF header", len(blob))
    riff, _, wave = struct.unpack_from("<4sI4s", blob, 0)
    if riff != b"RIFF":
        raise WavFormatError("missing RIFF signature", 0)
    if wave != b"WAVE":
        raise WavFormatError("RIFF form type is not WAVE", 8)

    fmt = None
    pos = 12
    while pos + 8 <= len(blob):
        cid, size = struct.unpack_from("<4sI", blob, pos)
        body = pos + 8
        if cid == b"fmt ":
            if size < 16 or body + size > len(blob):
                raise WavFormatError("truncated fmt chunk", pos)
            tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", blob, body)
            if tag == WAVE_FORMAT_EXTENSIBLE:
                if size < 40:
                    raise WavFormatError("truncated extensible fmt chunk", pos)
                tag = struct.unpack_from("<H", blob, body + 24)[0]
            if tag not in (WAVE_FORMAT_PCM, WAVE_FORMAT_IEEE_FLOAT):
                raise WavFormatError(f"unsupported codec 0x{tag:04x}", body)
            if channels < 1 or bits % 8:
                raise WavFormatError(f"invalid layout: {channels} channels, {bits} bits", body)
            fmt = (tag, channels, rate, bits)
        elif cid == b"data":
            if fmt is None:
                raise WavFormatError("data chunk before fmt chunk", pos)
            if body + size > len(blob):
                raise WavFormatError(
                    f"data chunk declares {size} bytes, only {len(blob) - body} present", pos)
            tag, channels, rate, bits = fmt
            return rate, _decode(blob[body:body + size], tag, bits, channels, body)
        pos = body + size + (size & 1)
    if fmt is None:
        raise WavFormatError("no fmt chunk", pos)
    raise WavFormatError("no data chunk", pos)
