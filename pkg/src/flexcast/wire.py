"""Binary frames for sending envelopes or their surface models to a grid operator.

Layout (little-endian):

    magic        4s   b"FLXE"
    version      u8
    model_id     u8   0 raw envelope, 1 2D-ND, 2 2D-SND, 3 3D-GMM
    p_min        f64
    p_max        f64
    step         f64
    n_leads      u16
    offsets      u32 * n_leads   (minutes)
    param_count  u16
    params       f64 * param_count
    crc32        u32  over every preceding byte (zlib polynomial)
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from flexcast.approx.surfaces import Gmm3D, Normal2DSum, SkewNormal2DSum
from flexcast.envelope import FlexibilityEnvelope, LeadTimeGrid, PowerGrid

MAGIC = b"FLXE"
VERSION = 1
RAW, ND, SND, GMM = 0, 1, 2, 3
MODEL_NAMES = {RAW: "raw", ND: "2D-ND", SND: "2D-SND", GMM: "3D-GMM"}
RAW_PARAMETERS = 53 * 22

_HEAD = struct.Struct("<4sBB3dH")
_U16 = struct.Struct("<H")
_CRC = struct.Struct("<I")


class WireError(ValueError):
    pass


class BadMagicError(WireError):
    pass


class BadVersionError(WireError):
    pass


class ChecksumError(WireError):
    pass


class TruncatedFrameError(WireError):
    pass


class MalformedFrameError(WireError):
    """Frame is complete and checksummed but its contents are inconsistent."""


def frame_length(n_leads: int, n_params: int) -> int:
    return 6 + 24 + 2 + 4 * n_leads + 2 + 8 * n_params + 4


def _payload(obj) -> tuple[int, np.ndarray]:
    if isinstance(obj, FlexibilityEnvelope):
        return RAW, obj.durations
    if isinstance(obj, (Normal2DSum, SkewNormal2DSum, Gmm3D)):
        return obj.model_id, obj.params
    raise TypeError(f"cannot encode {type(obj).__name__}")


def encode(obj) -> bytes:
    model_id, params = _payload(obj)
    pg, lg = obj.power_grid, obj.lead_grid
    flat = np.ascontiguousarray(params, dtype="<f8").ravel()
    if len(flat) > 0xFFFF:
        raise WireError(f"{len(flat)} parameters overflow the 16-bit count")
    if lg.size > 0xFFFF:
        raise WireError("too many lead offsets for the 16-bit count")
    body = bytearray(_HEAD.pack(MAGIC, VERSION, model_id, pg.p_min, pg.p_max, pg.step, lg.size))
    body += np.asarray(lg.offsets, dtype="<u4").tobytes()
    body += _U16.pack(len(flat))
    body += flat.tobytes()
    body += _CRC.pack(zlib.crc32(body))
    return bytes(body)


def decode(frame: bytes, horizon: int = 1440):
    """Inverse of :func:`encode`. The horizon is not on the wire and defaults to 24 h."""
    frame = bytes(frame)
    if len(frame) < 4 and MAGIC.startswith(frame):
        raise TruncatedFrameError("frame ends inside the magic")
    if frame[:4] != MAGIC:
        raise BadMagicError("frame does not start with FLXE")
    if len(frame) < 5:
        raise TruncatedFrameError("frame ends inside the header")
    if frame[4] != VERSION:
        raise BadVersionError(f"unsupported frame version {frame[4]}")
    if len(frame) < _HEAD.size:
        raise TruncatedFrameError("frame ends inside the header")
    _, _, model_id, p_min, p_max, step, n_leads = _HEAD.unpack_from(frame)
    pos = _HEAD.size + 4 * n_leads
    if len(frame) < pos + 2:
        raise TruncatedFrameError("frame ends inside the lead offsets")
    (n_params,) = _U16.unpack_from(frame, pos)
    expected = frame_length(n_leads, n_params)
    if len(frame) < expected:
        raise TruncatedFrameError(f"frame has {len(frame)} bytes, header announces {expected}")
    if len(frame) > expected:
        raise MalformedFrameError(f"{len(frame) - expected} trailing bytes after the checksum")
    (crc,) = _CRC.unpack_from(frame, expected - 4)
    if zlib.crc32(frame[: expected - 4]) != crc:
        raise ChecksumError("CRC-32 mismatch")

    offsets = np.frombuffer(frame, dtype="<u4", count=n_leads, offset=_HEAD.size)
    params = np.frombuffer(frame, dtype="<f8", count=n_params, offset=pos + 2).astype(float)
    try:
        pg = PowerGrid(p_min, p_max, step)
        lg = LeadTimeGrid(tuple(int(o) for o in offsets), horizon)
    except ValueError as exc:
        raise MalformedFrameError(f"invalid grid descriptor: {exc}") from exc
    if model_id == RAW:
        _expect(n_params, lg.size * pg.size, model_id)
        return FlexibilityEnvelope(pg, lg, params.reshape(lg.size, pg.size))
    if model_id == ND:
        _expect(n_params, 6 * lg.size, model_id)
        return Normal2DSum(pg, lg, params.reshape(lg.size, 6))
    if model_id == SND:
        _expect(n_params, 8 * lg.size, model_id)
        return SkewNormal2DSum(pg, lg, params.reshape(lg.size, 8))
    if model_id == GMM:
        if n_params == 0 or n_params % 5:
            raise MalformedFrameError(f"3D-GMM needs a positive multiple of 5 parameters, got {n_params}")
        return Gmm3D(pg, lg, params.reshape(-1, 5))
    raise MalformedFrameError(f"unknown model id {model_id}")


def _expect(got: int, want: int, model_id: int) -> None:
    if got != want:
        raise MalformedFrameError(f"{MODEL_NAMES[model_id]} on this grid needs {want} parameters, got {got}")


def compression_factor(model_id: int, lead_grid: LeadTimeGrid | None = None, power_grid: PowerGrid | None = None,
                       K: int = 18) -> float:
    """Raw envelope parameter count divided by the model's parameter count."""
    lg = lead_grid or LeadTimeGrid()
    pg = power_grid or PowerGrid()
    raw = lg.size * pg.size
    counts = {RAW: raw, ND: 6 * lg.size, SND: 8 * lg.size, GMM: 5 * K}
    if model_id not in counts:
        raise WireError(f"unknown model id {model_id}")
    return raw / counts[model_id]


def hexdump(frame: bytes, width: int = 16) -> str:
    lines = []
    for off in range(0, len(frame), width):
        chunk = frame[off : off + width]
        hexpart = " ".join(f"{b:02x}" for b in chunk)
        text = "".join(chr(b) if 32 <= b < 127 else "." for b in chunk)
        lines.append(f"{off:08x}  {hexpart:<{width * 3}} {text}")
    return "\n".join(lines)
