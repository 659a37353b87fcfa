"""Minimal PNG codec for 8-bit RGB images.

Encoding always uses filter type 0 and one fixed zlib level, so a given
pixel buffer maps to exactly one byte sequence; golden-file tests depend on
that. Decoding accepts any non-interlaced 8-bit RGB PNG (all five standard
scanline filters) and raises PngError on anything malformed.
"""

from __future__ import annotations

import struct
import zlib
from binascii import crc32

_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_ZLIB_LEVEL = 6  # frozen: changing this invalidates every golden


class PngError(ValueError):
    pass


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", crc32(tag + payload) & 0xFFFFFFFF)
    )


def encode_rgb(width: int, height: int, pixels: bytes) -> bytes:
    """Encode a row-major RGB byte buffer (3 bytes per pixel) as PNG."""
    if width <= 0 or height <= 0:
        raise PngError("image dimensions must be positive")
    if len(pixels) != width * height * 3:
        raise PngError(
            f"pixel buffer holds {len(pixels)} bytes, expected {width * height * 3}"
        )
    stride = width * 3
    raw = b"".join(
        b"\x00" + pixels[y * stride : (y + 1) * stride] for y in range(height)
    )
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    return (
        _SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(raw, _ZLIB_LEVEL))
        + _chunk(b"IEND", b"")
    )


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def decode_rgb(data: bytes) -> tuple[int, int, bytes]:
    """Decode a PNG into (width, height, RGB bytes); PngError when malformed."""
    if not data.startswith(_SIGNATURE):
        raise PngError("missing PNG signature")
    pos = len(_SIGNATURE)
    width = height = None
    idat = bytearray()
    ended = False
    while pos < len(data):
        if pos + 8 > len(data):
            raise PngError("truncated chunk header")
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        body_end = pos + 8 + length
        if body_end + 4 > len(data):
            raise PngError(f"truncated {tag!r} chunk")
        payload = data[pos + 8 : body_end]
        (crc,) = struct.unpack(">I", data[body_end : body_end + 4])
        if crc != (crc32(tag + payload) & 0xFFFFFFFF):
            raise PngError(f"bad CRC in {tag!r} chunk")
        if tag == b"IHDR":
            if length != 13:
                raise PngError("IHDR must be 13 bytes")
            width, height, depth, color, comp, filt, interlace = struct.unpack(
                ">IIBBBBB", payload
            )
            if depth != 8 or color != 2:
                raise PngError("only 8-bit RGB (color type 2) is supported")
            if comp != 0 or filt != 0:
                raise PngError("unsupported compression or filter method")
            if interlace != 0:
                raise PngError("interlaced PNGs are not supported")
        elif tag == b"IDAT":
            idat.extend(payload)
        elif tag == b"IEND":
            ended = True
            break
        pos = body_end + 4
    if width is None:
        raise PngError("missing IHDR chunk")
    if not ended:
        raise PngError("missing IEND chunk")
    if not idat:
        raise PngError("missing IDAT data")
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise PngError(f"corrupt IDAT stream: {exc}") from None

    stride = width * 3
    if len(raw) != (stride + 1) * height:
        raise PngError("decompressed data does not match image dimensions")
    out = bytearray(stride * height)
    prev = bytearray(stride)
    for y in range(height):
        line_start = y * (stride + 1)
        ftype = raw[line_start]
        line = bytearray(raw[line_start + 1 : line_start + 1 + stride])
        if ftype == 0:
            pass
        elif ftype == 1:
            for i in range(3, stride):
                line[i] = (line[i] + line[i - 3]) & 0xFF
        elif ftype == 2:
            for i in range(stride):
                line[i] = (line[i] + prev[i]) & 0xFF
        elif ftype == 3:
            for i in range(stride):
                left = line[i - 3] if i >= 3 else 0
                line[i] = (line[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:
            for i in range(stride):
                left = line[i - 3] if i >= 3 else 0
                up_left = prev[i - 3] if i >= 3 else 0
                line[i] = (line[i] + _paeth(left, prev[i], up_left)) & 0xFF
        else:
            raise PngError(f"unknown scanline filter {ftype}")
        out[y * stride : (y + 1) * stride] = line
        prev = line
    return width, height, bytes(out)
