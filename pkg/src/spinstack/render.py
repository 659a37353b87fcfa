"""Deterministic software rendering of voxel shapes.

Exposed cube faces are projected with a perspective camera (on +Z, up +Y,
distance = distance_factor x bounding radius), snapped to a 16-subpixel
integer grid and rasterized with integer edge functions against an integer
depth buffer. No anti-aliasing, no lighting model: faces take one of three
flat brightness levels keyed to the dominant axis of their world normal
(top brightest, side medium, front darkest) with one-pixel black edges.
All arithmetic past projection is integer, so identical inputs give
byte-identical images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import png
from .font import draw_text
from .geometry import CameraRig, Polycube, Pose

_SUB = 16          # subpixel resolution (1/16 px)
_IZ_ONE = 1 << 32  # inverse-depth fixed-point scale

MAX_CELLS_PER_AXIS = 64


class ObjectTooLargeError(ValueError):
    pass


class ImageSizeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class RasterImage:
    """An RGB8 image as immutable row-major bytes."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if len(self.pixels) != self.width * self.height * 3:
            raise ValueError("pixel buffer does not match width x height x 3")

    def to_array(self) -> np.ndarray:
        return (
            np.frombuffer(self.pixels, dtype=np.uint8)
            .reshape(self.height, self.width, 3)
            .copy()
        )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        h, w, c = arr.shape
        if c != 3:
            raise ValueError("expected an (H, W, 3) array")
        return cls(w, h, arr.tobytes())

    def crop(self, x: int, y: int, width: int, height: int) -> "RasterImage":
        arr = self.to_array()[y : y + height, x : x + width]
        return RasterImage.from_array(arr)


@dataclass(frozen=True)
class RenderSettings:
    width: int = 256
    height: int = 256
    background: tuple[int, int, int] = (255, 255, 255)
    face_top: tuple[int, int, int] = (235, 235, 235)
    face_side: tuple[int, int, int] = (178, 178, 178)
    face_front: tuple[int, int, int] = (118, 118, 118)
    edge_color: tuple[int, int, int] = (0, 0, 0)
    banner_height: int = 16
    banner_background: tuple[int, int, int] = (224, 224, 224)
    banner_text: tuple[int, int, int] = (0, 0, 0)


DEFAULT_SETTINGS = RenderSettings()
DEFAULT_RIG = CameraRig()

# Unit-cube faces: (outward normal, 4 corner offsets ordered CCW from outside).
_FACES: tuple[tuple[tuple[int, int, int], tuple[tuple[int, int, int], ...]], ...] = (
    ((1, 0, 0), ((1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1))),
    ((-1, 0, 0), ((0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0))),
    ((0, 1, 0), ((0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0))),
    ((0, -1, 0), ((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1))),
    ((0, 0, 1), ((0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1))),
    ((0, 0, -1), ((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0))),
)


def bounding_radius(shape: Polycube) -> float:
    """Largest corner distance from the cell-center centroid; rotation-invariant."""
    cells = np.array(shape.sorted_cells(), dtype=np.float64)
    centroid = cells.mean(axis=0) + 0.5
    corners = cells[:, None, :] + _CORNER_OFFSETS[None, :, :]
    return float(np.sqrt(((corners - centroid) ** 2).sum(axis=2)).max())


_CORNER_OFFSETS = np.array(
    [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=np.float64
)


def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _fill_quad(pix, zbuf, quad, izs, fill, edge_color, width, height):
    """Rasterize one convex quad with border and depth test; all-integer."""
    sq = _edge(quad[0][0], quad[0][1], quad[1][0], quad[1][1], quad[2][0], quad[2][1])
    sq += _edge(quad[0][0], quad[0][1], quad[2][0], quad[2][1], quad[3][0], quad[3][1])
    if sq == 0:
        return
    if sq < 0:
        quad = quad[::-1]
        izs = izs[::-1]

    xs = [p[0] for p in quad]
    ys = [p[1] for p in quad]
    cx0 = max(0, (min(xs) + _SUB // 2 - 1) // _SUB)
    cx1 = min(width - 1, (max(xs) - _SUB // 2) // _SUB)
    cy0 = max(0, (min(ys) + _SUB // 2 - 1) // _SUB)
    cy1 = min(height - 1, (max(ys) - _SUB // 2) // _SUB)
    if cx0 > cx1 or cy0 > cy1:
        return

    px = (np.arange(cx0, cx1 + 1, dtype=np.int64) * _SUB + _SUB // 2)[None, :]
    py = (np.arange(cy0, cy1 + 1, dtype=np.int64) * _SUB + _SUB // 2)[:, None]

    # Border: within one pixel of any quad edge (distance scaled by edge length).
    border = np.zeros((cy1 - cy0 + 1, cx1 - cx0 + 1), dtype=bool)
    for j in range(4):
        a = quad[j]
        b = quad[(j + 1) % 4]
        d = _edge(a[0], a[1], b[0], b[1], px, py)
        length = math.isqrt((b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2)
        border |= d < length * _SUB

    for tri, tri_iz in (((0, 1, 2), (0, 1, 2)), ((0, 2, 3), (0, 2, 3))):
        i0, i1, i2 = tri
        v0, v1, v2 = quad[i0], quad[i1], quad[i2]
        area2 = _edge(v0[0], v0[1], v1[0], v1[1], v2[0], v2[1])
        if area2 <= 0:
            continue
        w0 = _edge(v1[0], v1[1], v2[0], v2[1], px, py)
        w1 = _edge(v2[0], v2[1], v0[0], v0[1], px, py)
        w2 = _edge(v0[0], v0[1], v1[0], v1[1], px, py)
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue
        iz = (w0 * izs[i0] + w1 * izs[i1] + w2 * izs[i2]) // area2
        zslice = zbuf[cy0 : cy1 + 1, cx0 : cx1 + 1]
        win = inside & (iz > zslice)
        if not win.any():
            continue
        zslice[win] = iz[win]
        pslice = pix[cy0 : cy1 + 1, cx0 : cx1 + 1]
        for channel in range(3):
            plane = pslice[:, :, channel]
            plane[win & border] = edge_color[channel]
            plane[win & ~border] = fill[channel]


def render(
    shape: Polycube,
    pose: Pose,
    rig: CameraRig = DEFAULT_RIG,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> RasterImage:
    """Render a polycube at a pose; same inputs always give the same bytes."""
    dims = shape.dims()
    if max(dims) > MAX_CELLS_PER_AXIS:
        raise ObjectTooLargeError(
            f"object spans {max(dims)} cells on one axis; the limit is {MAX_CELLS_PER_AXIS}"
        )
    cells = shape.sorted_cells()
    cellset = shape.cells
    centroid = np.array(cells, dtype=np.float64).mean(axis=0) + 0.5
    radius = bounding_radius(shape)
    distance = rig.distance_factor * radius
    focal = (settings.height / 2.0) / math.tan(math.radians(rig.fov_deg) / 2.0)
    cx, cy = settings.width / 2.0, settings.height / 2.0
    rot = pose.to_matrix()

    pix = np.empty((settings.height, settings.width, 3), dtype=np.uint8)
    pix[:, :] = np.array(settings.background, dtype=np.uint8)
    zbuf = np.zeros((settings.height, settings.width), dtype=np.int64)

    palette = {
        1: np.array(settings.face_top, dtype=np.uint8),
        0: np.array(settings.face_side, dtype=np.uint8),
        2: np.array(settings.face_front, dtype=np.uint8),
    }

    for cell in cells:
        x, y, z = cell
        for normal, corners in _FACES:
            if (x + normal[0], y + normal[1], z + normal[2]) in cellset:
                continue  # internal face
            n_world = rot @ np.array(normal, dtype=np.float64)
            world = np.array(
                [(x + c[0], y + c[1], z + c[2]) for c in corners], dtype=np.float64
            )
            world = (world - centroid) @ rot.T
            center = world.mean(axis=0)
            if n_world[0] * (0 - center[0]) + n_world[1] * (0 - center[1]) + n_world[2] * (
                distance - center[2]
            ) <= 0:
                continue  # back-facing

            zv = distance - world[:, 2]
            if (zv <= 1e-9).any():
                continue
            sx = cx + focal * world[:, 0] / zv
            sy = cy - focal * world[:, 1] / zv
            quad = tuple(
                (
                    int(math.floor(sx[i] * _SUB + 0.5)),
                    int(math.floor(sy[i] * _SUB + 0.5)),
                )
                for i in range(4)
            )
            izs = tuple(int(_IZ_ONE / zv[i] + 0.5) for i in range(4))

            a = np.abs(n_world)
            if a[1] >= a[0] and a[1] >= a[2]:
                dom = 1
            elif a[0] >= a[2]:
                dom = 0
            else:
                dom = 2
            _fill_quad(
                pix, zbuf, quad, izs, palette[dom],
                settings.edge_color, settings.width, settings.height,
            )

    return RasterImage.from_array(pix)


@dataclass(frozen=True)
class SnapshotGrid:
    """An ordered strip of (image, label) cells, composed into one labeled image."""

    cells: tuple[tuple[RasterImage, str], ...]

    def compose(self, settings: RenderSettings = DEFAULT_SETTINGS) -> RasterImage:
        return compose_grid(self.cells, settings)


def compose_grid(
    cells: Sequence[tuple[RasterImage, str]],
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> RasterImage:
    """Lay out cells in one row, each under a fixed-height label banner."""
    if not cells:
        raise ValueError("a grid needs at least one cell")
    w0, h0 = cells[0][0].width, cells[0][0].height
    for img, _ in cells:
        if img.width != w0 or img.height != h0:
            raise ImageSizeMismatch("all grid cells must share one resolution")
    bh = settings.banner_height
    columns = []
    for img, label in cells:
        banner = np.empty((bh, w0, 3), dtype=np.uint8)
        banner[:, :] = np.array(settings.banner_background, dtype=np.uint8)
        draw_text(banner, 3, 1, label, color=settings.banner_text, scale=2)
        columns.append(np.vstack([banner, img.to_array()]))
    return RasterImage.from_array(np.hstack(columns))


def grid_cells(
    grid: RasterImage,
    settings: RenderSettings = DEFAULT_SETTINGS,
) -> list[RasterImage]:
    """Split a composed grid back into banner-free cell images."""
    cw = settings.width
    if grid.width % cw != 0:
        raise ValueError("grid width is not a multiple of the cell width")
    n = grid.width // cw
    bh = settings.banner_height
    arr = grid.to_array()
    return [
        RasterImage.from_array(arr[bh:, i * cw : (i + 1) * cw]) for i in range(n)
    ]


def image_diff(a: RasterImage, b: RasterImage) -> float:
    """Mean absolute per-channel difference, normalized to [0, 1]."""
    if a.width != b.width or a.height != b.height:
        raise ImageSizeMismatch("images must share dimensions to be compared")
    x = np.frombuffer(a.pixels, dtype=np.uint8).astype(np.int16)
    y = np.frombuffer(b.pixels, dtype=np.uint8).astype(np.int16)
    return float(np.abs(x - y).mean() / 255.0)


def encode_png(img: RasterImage) -> bytes:
    return png.encode_rgb(img.width, img.height, img.pixels)


def decode_png(data: bytes) -> RasterImage:
    w, h, pixels = png.decode_rgb(data)
    return RasterImage(w, h, pixels)
