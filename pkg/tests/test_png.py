import random
import struct
import zlib
from zlib import crc32

import pytest

from spinstack.png import PngError, decode_rgb, encode_rgb


def chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", crc32(tag + payload) & 0xFFFFFFFF)
    )


SIGNATURE = b"\x89PNG\r\n\x1a\n"


def build_png(width, height, raw, depth=8, color=2, interlace=0):
    ihdr = struct.pack(">IIBBBBB", width, height, depth, color, 0, 0, interlace)
    return (
        SIGNATURE
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", zlib.compress(raw))
        + chunk(b"IEND", b"")
    )


def paeth(a, b, c):
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def forward_filter(ftype, line, prev):
    """Apply a PNG scanline filter the way an encoder would."""
    out = bytearray(line)
    if ftype == 0:
        return out
    if ftype == 1:
        for i in range(len(line) - 1, 2, -1):
            out[i] = (line[i] - line[i - 3]) & 0xFF
        return out
    if ftype == 2:
        for i in range(len(line)):
            out[i] = (line[i] - prev[i]) & 0xFF
        return out
    if ftype == 3:
        for i in range(len(line)):
            left = line[i - 3] if i >= 3 else 0
            out[i] = (line[i] - ((left + prev[i]) >> 1)) & 0xFF
        return out
    if ftype == 4:
        for i in range(len(line)):
            left = line[i - 3] if i >= 3 else 0
            up_left = prev[i - 3] if i >= 3 else 0
            out[i] = (line[i] - paeth(left, prev[i], up_left)) & 0xFF
        return out
    raise AssertionError(ftype)


def random_pixels(rng, width, height):
    return bytes(rng.randrange(256) for _ in range(width * height * 3))


@pytest.mark.parametrize("width,height", [(1, 1), (3, 2), (16, 16), (31, 7)])
def test_round_trip(width, height):
    rng = random.Random(width * 100 + height)
    pixels = random_pixels(rng, width, height)
    w, h, out = decode_rgb(encode_rgb(width, height, pixels))
    assert (w, h) == (width, height)
    assert out == pixels


def test_encode_is_deterministic():
    rng = random.Random(5)
    pixels = random_pixels(rng, 20, 10)
    assert encode_rgb(20, 10, pixels) == encode_rgb(20, 10, pixels)


def test_encode_rejects_bad_buffer():
    with pytest.raises(PngError):
        encode_rgb(2, 2, b"\x00" * 11)
    with pytest.raises(PngError):
        encode_rgb(0, 2, b"")
    with pytest.raises(PngError):
        encode_rgb(2, -1, b"")


@pytest.mark.parametrize("ftype", [0, 1, 2, 3, 4])
def test_decoder_inverts_every_filter(ftype):
    rng = random.Random(40 + ftype)
    width, height = 5, 4
    stride = width * 3
    pixels = random_pixels(rng, width, height)
    raw = bytearray()
    prev = bytearray(stride)
    for y in range(height):
        line = pixels[y * stride : (y + 1) * stride]
        raw.append(ftype)
        raw.extend(forward_filter(ftype, line, prev))
        prev = bytearray(line)
    w, h, out = decode_rgb(build_png(width, height, bytes(raw)))
    assert (w, h) == (width, height)
    assert out == pixels


def test_decoder_mixed_filters_per_row():
    rng = random.Random(77)
    width, height = 4, 5
    stride = width * 3
    pixels = random_pixels(rng, width, height)
    raw = bytearray()
    prev = bytearray(stride)
    for y in range(height):
        line = pixels[y * stride : (y + 1) * stride]
        ftype = y % 5
        raw.append(ftype)
        raw.extend(forward_filter(ftype, line, prev))
        prev = bytearray(line)
    _, _, out = decode_rgb(build_png(width, height, bytes(raw)))
    assert out == pixels


def test_rejects_bad_signature():
    good = encode_rgb(1, 1, b"\x01\x02\x03")
    with pytest.raises(PngError):
        decode_rgb(b"JUNK" + good[4:])


def test_rejects_bad_crc():
    good = bytearray(encode_rgb(2, 2, bytes(range(12))))
    good[-5] ^= 0xFF  # corrupt the IEND CRC
    with pytest.raises(PngError):
        decode_rgb(bytes(good))


def test_rejects_truncation():
    good = encode_rgb(4, 4, bytes(48))
    for cut in (10, len(good) // 2, len(good) - 3):
        with pytest.raises(PngError):
            decode_rgb(good[:cut])


def test_rejects_non_rgb_color_type():
    raw = bytes([0, 7]) * 1  # grayscale-ish single scanline
    png = build_png(1, 1, raw, color=0)
    with pytest.raises(PngError):
        decode_rgb(png)


def test_rejects_16_bit_depth():
    png = build_png(1, 1, b"\x00" + b"\x00" * 6, depth=16)
    with pytest.raises(PngError):
        decode_rgb(png)


def test_rejects_interlaced():
    png = build_png(1, 1, b"\x00\x01\x02\x03", interlace=1)
    with pytest.raises(PngError):
        decode_rgb(png)


def test_rejects_unknown_filter_type():
    png = build_png(1, 1, b"\x09\x01\x02\x03")
    with pytest.raises(PngError):
        decode_rgb(png)


def test_rejects_wrong_data_length():
    png = build_png(2, 2, b"\x00" + b"\x00" * 6)  # one row short
    with pytest.raises(PngError):
        decode_rgb(png)


def test_rejects_corrupt_zlib_stream():
    ihdr = struct.pack(">IIBBBBB", 1, 1, 8, 2, 0, 0, 0)
    png = (
        SIGNATURE
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", b"not zlib data")
        + chunk(b"IEND", b"")
    )
    with pytest.raises(PngError):
        decode_rgb(png)


def test_rejects_missing_chunks():
    ihdr = struct.pack(">IIBBBBB", 1, 1, 8, 2, 0, 0, 0)
    with pytest.raises(PngError):
        decode_rgb(SIGNATURE + chunk(b"IHDR", ihdr) + chunk(b"IEND", b""))
    raw = zlib.compress(b"\x00\x01\x02\x03")
    with pytest.raises(PngError):
        decode_rgb(SIGNATURE + chunk(b"IDAT", raw) + chunk(b"IEND", b""))


def test_ancillary_chunks_are_skipped():
    good = encode_rgb(1, 1, b"\x09\x08\x07")
    ihdr_end = 8 + 12 + 13  # signature + IHDR chunk
    spliced = good[:ihdr_end] + chunk(b"tEXt", b"k\x00v") + good[ihdr_end:]
    w, h, out = decode_rgb(spliced)
    assert (w, h, out) == (1, 1, b"\x09\x08\x07")
