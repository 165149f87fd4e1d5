"""Scalar guidance fields.

A field is a uniform grid of values in [0, 1] laid over the arena.  Cell
``(ix, iy)`` has its centre at ``((ix + 0.5) * cell_size, (iy + 0.5) *
cell_size)`` in world units, with y increasing upward (``values[iy, ix]``).
Zero-valued cells form the goal region; values grow with distance from it.

PGM files store rows top-down, so loading and saving flip the row order to
keep the in-memory layout y-up.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import FieldFormatError, ParameterError

DEFAULT_CELL_SIZE = 4.0


@dataclass(frozen=True)
class ScalarField:
    """Immutable grid of scalar values in [0, 1] plus its world-unit cell size."""

    values: np.ndarray
    cell_size: float

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ParameterError("field values must be a non-empty 2-D grid")
        if not (self.cell_size > 0.0):
            raise ParameterError(f"cell_size must be positive, got {self.cell_size}")
        if float(vals.min()) < 0.0 or float(vals.max()) > 1.0:
            raise ParameterError("field values must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "cell_size", float(self.cell_size))

    @property
    def grid_width(self) -> int:
        return self.values.shape[1]

    @property
    def grid_height(self) -> int:
        return self.values.shape[0]

    @property
    def arena_width(self) -> float:
        return self.grid_width * self.cell_size

    @property
    def arena_height(self) -> float:
        return self.grid_height * self.cell_size

    def sample(self, x: float, y: float, mode: str = "bilinear") -> float:
        return sample(self, x, y, mode)

    def zero_cells(self):
        """(ys, xs) index arrays of exactly-zero cells, row-major order."""
        ys, xs = np.nonzero(self.values == 0.0)
        return ys.astype(np.int64), xs.astype(np.int64)


@dataclass(frozen=True)
class GoalDistanceMap:
    """Per-cell world-unit distance to the nearest zero-valued (goal) cell."""

    distances: np.ndarray
    cell_size: float

    def __post_init__(self):
        d = np.ascontiguousarray(self.distances, dtype=np.float64)
        d.setflags(write=False)
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "cell_size", float(self.cell_size))

    def lookup(self, x: float, y: float) -> float:
        """Distance stored for the cell containing (x, y), clamped to the grid."""
        h, w = self.distances.shape
        ix = min(max(int(np.floor(x / self.cell_size)), 0), w - 1)
        iy = min(max(int(np.floor(y / self.cell_size)), 0), h - 1)
        return float(self.distances[iy, ix])


def _interp_flag(mode: str) -> int:
    if mode == "bilinear":
        return 0
    if mode == "nearest":
        return 1
    raise ParameterError(f"unknown interpolation mode {mode!r}")


def sample(fld: ScalarField, x: float, y: float, mode: str = "bilinear") -> float:
    """Field value at a continuous world point.

    Bilinear blends the four nearest cell centres; nearest returns the value
    of the containing cell.  Points outside the grid clamp to the border, so
    the result always lies within the range of the stored values.
    """
    return float(
        kernels.sample_field(fld.values, fld.cell_size, float(x), float(y), _interp_flag(mode))
    )


def _grid_cells(extent: float, cell_size: float, name: str) -> int:
    if not (extent > 0.0):
        raise ParameterError(f"{name} must be positive, got {extent}")
    cells = int(round(extent / cell_size))
    if cells < 1 or abs(cells * cell_size - extent) > 1e-9 * max(1.0, extent):
        raise ParameterError(
            f"{name}={extent} is not a whole number of cells at cell_size={cell_size}"
        )
    return cells


def _check_segment(seg, width, height):
    (ax, ay), (bx, by) = seg
    for px, py in ((ax, ay), (bx, by)):
        if not (0.0 <= px <= width and 0.0 <= py <= height):
            raise ParameterError(f"segment endpoint ({px}, {py}) lies outside the arena")
    return float(ax), float(ay), float(bx), float(by)


def _ramp_field(width, height, segments, goal_halfwidth, falloff, cell_size):
    if not (goal_halfwidth > 0.0):
        raise ParameterError(f"goal_halfwidth must be positive, got {goal_halfwidth}")
    if not (falloff > 0.0):
        raise ParameterError(f"falloff must be positive, got {falloff}")
    w = _grid_cells(float(width), float(cell_size), "width")
    h = _grid_cells(float(height), float(cell_size), "height")
    segs = np.array(
        [_check_segment(s, float(width), float(height)) for s in segments],
        dtype=np.float64,
    ).reshape(len(segments), 4)
    vals = kernels.ramp_field_values(
        h, w, float(cell_size), segs, float(goal_halfwidth), float(falloff)
    )
    return ScalarField(values=vals, cell_size=float(cell_size))


def generate_line_field(width, height, segment, goal_halfwidth, falloff,
                        cell_size=DEFAULT_CELL_SIZE) -> ScalarField:
    """Line-shape field: zero within ``goal_halfwidth`` of the segment, rising
    linearly to 1 over ``falloff`` and clamping there."""
    return _ramp_field(width, height, [segment], goal_halfwidth, falloff, cell_size)


def generate_l_field(width, height, segment_a, segment_b, goal_halfwidth, falloff,
                     cell_size=DEFAULT_CELL_SIZE) -> ScalarField:
    """L-shape field from two segments; each cell takes the smaller of the two
    single-segment distances, so the result equals the cellwise minimum of the
    two line fields."""
    return _ramp_field(width, height, [segment_a, segment_b], goal_halfwidth, falloff, cell_size)


def field_from_array(pixels, cell_size) -> ScalarField:
    """Field from an (H, W) uint8 grid (y-up row order); values are pixel/255."""
    px = np.asarray(pixels)
    if px.ndim != 2 or px.size == 0:
        raise FieldFormatError("pixel grid must be non-empty and 2-D")
    return ScalarField(values=px.astype(np.float64) / 255.0, cell_size=float(cell_size))


def _read_pgm_tokens(raw: bytes, count: int, path) -> tuple:
    """First ``count`` whitespace-separated header tokens after the magic,
    skipping '#' comments; returns (tokens, offset past final separator)."""
    tokens = []
    i = 2  # past the 2-byte magic
    n = len(raw)
    while len(tokens) < count:
        while i < n and raw[i : i + 1].isspace():
            i += 1
        if i < n and raw[i : i + 1] == b"#":
            while i < n and raw[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < n and not raw[j : j + 1].isspace():
            j += 1
        if j == i:
            raise FieldFormatError(f"{path}: truncated header")
        tokens.append(raw[i:j])
        i = j
    if i >= n:
        raise FieldFormatError(f"{path}: missing pixel data")
    return tokens, i + 1  # exactly one whitespace byte separates header and data


def load_field(path, cell_size=DEFAULT_CELL_SIZE) -> ScalarField:
    """Load a binary greyscale PGM (P5, maxval 255) as a field.

    File rows run top-down; they are flipped so row 0 of the result is the
    bottom of the arena.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] != b"P5":
        raise FieldFormatError(f"{path}: not a binary PGM (P5) file")
    tokens, start = _read_pgm_tokens(raw, 3, path)
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FieldFormatError(f"{path}: non-numeric header fields") from None
    if w < 1 or h < 1:
        raise FieldFormatError(f"{path}: empty image ({w}x{h})")
    if maxval != 255:
        raise FieldFormatError(f"{path}: unsupported maxval {maxval} (must be 255)")
    data = raw[start : start + w * h]
    if len(data) != w * h:
        raise FieldFormatError(f"{path}: expected {w * h} pixel bytes, got {len(data)}")
    px = np.frombuffer(data, dtype=np.uint8).reshape(h, w)
    return field_from_array(px[::-1], cell_size)


def write_field(fld: ScalarField, path) -> None:
    """Save a field as binary PGM (P5); values quantise to round(v * 255).

    Row order is flipped so the top of the arena is the top of the image;
    ``load_field`` inverts this exactly, so save/load round-trips the
    quantised grid.
    """
    px = np.rint(fld.values * 255.0).astype(np.uint8)
    header = f"P5\n{fld.grid_width} {fld.grid_height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(px[::-1].tobytes())


def goal_distance_map(fld: ScalarField) -> GoalDistanceMap:
    """Exact Euclidean distance from every cell centre to the nearest
    zero-valued cell centre, in world units.  Zero cells map to 0."""
    feature = (fld.values == 0.0).astype(np.uint8)
    if not feature.any():
        raise ParameterError("field has no zero-valued cells; no goal region")
    cells = kernels.distance_map_cells(feature)
    return GoalDistanceMap(distances=cells * fld.cell_size, cell_size=fld.cell_size)
