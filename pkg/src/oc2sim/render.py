"""Headless rendering to portable pixmaps.

World-to-pixel transform (documented for oracle tests): with ``scale`` pixels
per world unit and an image of ``Hpx = round(arena_height * scale)`` rows,

    px = floor(x * scale)
    py = Hpx - 1 - floor(y * scale)

so pixel (px, py) covers the world point ((px + 0.5) / scale,
(Hpx - 1 - py + 0.5) / scale) at its centre, and row 0 is the top of the
arena.  All drawing tests a pixel's world centre point, so output is a pure
function of the inputs.
"""

import numpy as np

from .errors import ParameterError
from .field import ScalarField
from .world import World

DEFAULT_SCALE = 0.5

GOAL_TINT = (40, 70, 160)
PUCK_COLOR = (200, 40, 40)
ROBOT_COLOR = (40, 170, 60)
TICK_COLOR = (0, 0, 0)
ARROW_COLOR = (180, 30, 30)
ARROW_BASE_COLOR = (20, 20, 20)


def world_to_pixel(x: float, y: float, scale: float, height_px: int):
    """The documented transform; returns (px, py)."""
    return int(np.floor(x * scale)), height_px - 1 - int(np.floor(y * scale))


def _field_background(fld: ScalarField, scale: float):
    wpx = int(round(fld.arena_width * scale))
    hpx = int(round(fld.arena_height * scale))
    if wpx < 1 or hpx < 1:
        raise ParameterError(f"scale {scale} yields an empty image")
    px = np.arange(wpx)
    py = np.arange(hpx)
    wx = (px + 0.5) / scale
    wy = (hpx - 1 - py + 0.5) / scale
    ix = np.clip(np.floor(wx / fld.cell_size).astype(np.int64), 0, fld.grid_width - 1)
    iy = np.clip(np.floor(wy / fld.cell_size).astype(np.int64), 0, fld.grid_height - 1)
    cells = fld.values[np.ix_(iy, ix)]
    gray = np.rint(cells * 255.0).astype(np.uint8)
    img = np.stack([gray, gray, gray], axis=-1)
    img[cells == 0.0] = GOAL_TINT
    return img


def _fill_disc(img, scale, x, y, r, color):
    hpx, wpx = img.shape[:2]
    px0 = max(int(np.floor((x - r) * scale)) - 1, 0)
    px1 = min(int(np.ceil((x + r) * scale)) + 1, wpx - 1)
    py0 = max(hpx - 1 - (int(np.ceil((y + r) * scale)) + 1), 0)
    py1 = min(hpx - 1 - (int(np.floor((y - r) * scale)) - 1), hpx - 1)
    if px0 > px1 or py0 > py1:
        return
    wxs = (np.arange(px0, px1 + 1) + 0.5) / scale
    wys = (hpx - 1 - np.arange(py0, py1 + 1) + 0.5) / scale
    dx = wxs[None, :] - x
    dy = wys[:, None] - y
    mask = dx * dx + dy * dy <= r * r
    img[py0:py1 + 1, px0:px1 + 1][mask] = color


def _draw_line(img, x0, y0, x1, y1, color):
    """Bresenham segment in pixel coordinates, clipped to the image."""
    hpx, wpx = img.shape[:2]
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        if 0 <= x < wpx and 0 <= y < hpx:
            img[y, x] = color
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def render_frame(world: World, fld: ScalarField, scale: float = DEFAULT_SCALE):
    """One frame: grayscale field (goal cells tinted), pucks as red discs,
    robots as green discs with a black heading tick.  Returns (H, W, 3)
    uint8; identical inputs give identical bytes."""
    img = _field_background(fld, scale)
    hpx = img.shape[0]
    for i in range(world.n_pucks):
        _fill_disc(img, scale, float(world.puck_xy[i, 0]),
                   float(world.puck_xy[i, 1]), float(world.puck_radius[i]),
                   PUCK_COLOR)
    for i in range(world.n_robots):
        x = float(world.robot_xy[i, 0])
        y = float(world.robot_xy[i, 1])
        r = float(world.robot_radius[i])
        th = float(world.robot_theta[i])
        _fill_disc(img, scale, x, y, r, ROBOT_COLOR)
        cx, cy = world_to_pixel(x, y, scale, hpx)
        tx, ty = world_to_pixel(x + 0.9 * r * np.cos(th),
                                y + 0.9 * r * np.sin(th), scale, hpx)
        _draw_line(img, cx, cy, tx, ty, TICK_COLOR)
    return img


def render_flow(vectors, fld: ScalarField, scale: float = DEFAULT_SCALE,
                arrow_scale: float = 1.0):
    """Flow vectors as arrows over the field background.

    Each vector draws a dark dot at its base pixel and a line to the tip
    pixel, where tip = world_to_pixel(x + dx * arrow_scale,
    y + dy * arrow_scale); arrow length is proportional to displacement.
    Zero-magnitude vectors leave only the dot.
    """
    if not vectors:
        raise ParameterError("flow rendering needs at least one vector")
    img = _field_background(fld, scale)
    hpx = img.shape[0]
    for v in vectors:
        bx, by = world_to_pixel(v.x, v.y, scale, hpx)
        tx, ty = world_to_pixel(v.x + v.dx * arrow_scale,
                                v.y + v.dy * arrow_scale, scale, hpx)
        _draw_line(img, bx, by, tx, ty, ARROW_COLOR)
        if 0 <= bx < img.shape[1] and 0 <= by < hpx:
            img[by, bx] = ARROW_BASE_COLOR
    return img


def write_ppm(img, path) -> None:
    """Save an (H, W, 3) uint8 image as binary PPM (P6)."""
    arr = np.ascontiguousarray(img, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.size == 0:
        raise ParameterError("image must be a non-empty (H, W, 3) array")
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_ppm(path):
    """Load a binary PPM (P6, maxval 255) as an (H, W, 3) uint8 array."""
    from .field import _read_pgm_tokens
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] != b"P6":
        raise ParameterError(f"{path}: not a binary PPM (P6) file")
    tokens, start = _read_pgm_tokens(raw, 3, path)
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ParameterError(f"{path}: unsupported maxval {maxval}")
    data = raw[start:start + w * h * 3]
    if len(data) != w * h * 3:
        raise ParameterError(f"{path}: truncated pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy()
