"""Scalar fields: validation, sampling oracles, generators, PGM IO, and the
goal distance map against a brute-force scan."""

import numpy as np
import pytest

from oc2sim.errors import FieldFormatError, ParameterError
from oc2sim.field import (GoalDistanceMap, ScalarField, field_from_array,
                          generate_l_field, generate_line_field,
                          goal_distance_map, load_field, sample, write_field)

from conftest import make_grid


# ---------------------------------------------------------------------------
# reference implementations (independent of the kernels)
# ---------------------------------------------------------------------------

def bilinear_reference(values, cell_size, x, y):
    """Textbook weighted-corner bilinear blend over cell centres, with the
    query point clamped onto the grid of centres."""
    h, w = values.shape
    gx = min(max(x / cell_size - 0.5, 0.0), w - 1.0)
    gy = min(max(y / cell_size - 0.5, 0.0), h - 1.0)
    x0, y0 = int(np.floor(gx)), int(np.floor(gy))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    tx, ty = gx - x0, gy - y0
    top = values[y0, x0] * (1.0 - tx) + values[y0, x1] * tx
    bot = values[y1, x0] * (1.0 - tx) + values[y1, x1] * tx
    return top * (1.0 - ty) + bot * ty


def segment_distance_reference(p, a, b):
    p, a, b = (np.asarray(v, dtype=np.float64) for v in (p, a, b))
    ab = b - a
    l2 = float(ab @ ab)
    t = 0.0 if l2 == 0.0 else float(np.clip(((p - a) @ ab) / l2, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def brute_distance_cells(feature):
    """O(cells x features) scan: distance in cell units to the nearest
    feature cell."""
    h, w = feature.shape
    ys, xs = np.nonzero(feature)
    out = np.empty((h, w), dtype=np.float64)
    for iy in range(h):
        for ix in range(w):
            d2 = (ys - iy) ** 2 + (xs - ix) ** 2
            out[iy, ix] = np.sqrt(float(d2.min()))
    return out


# ---------------------------------------------------------------------------
# ScalarField validation and views
# ---------------------------------------------------------------------------

def test_field_rejects_non_2d_values():
    with pytest.raises(ParameterError):
        ScalarField(values=np.zeros(5), cell_size=1.0)


def test_field_rejects_out_of_range_values():
    with pytest.raises(ParameterError):
        ScalarField(values=np.array([[0.2, 1.2]]), cell_size=1.0)
    with pytest.raises(ParameterError):
        ScalarField(values=np.array([[-0.1, 0.5]]), cell_size=1.0)


def test_field_rejects_bad_cell_size():
    with pytest.raises(ParameterError):
        ScalarField(values=np.zeros((2, 2)), cell_size=0.0)


def test_field_values_are_immutable():
    fld = ScalarField(values=np.zeros((2, 3)), cell_size=2.0)
    with pytest.raises(ValueError):
        fld.values[0, 0] = 1.0


def test_field_dimension_properties():
    fld = ScalarField(values=np.zeros((3, 5)), cell_size=2.0)
    assert fld.grid_width == 5
    assert fld.grid_height == 3
    assert fld.arena_width == 10.0
    assert fld.arena_height == 6.0


def test_zero_cells_row_major_order():
    vals = np.full((3, 3), 0.5)
    vals[0, 2] = 0.0
    vals[2, 1] = 0.0
    fld = ScalarField(values=vals, cell_size=1.0)
    ys, xs = fld.zero_cells()
    assert ys.tolist() == [0, 2]
    assert xs.tolist() == [2, 1]


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_bilinear_matches_reference_on_random_points():
    rs = np.random.RandomState(42)
    for _ in range(20):
        h, w = rs.randint(2, 12, size=2)
        cell = float(rs.choice([0.5, 1.0, 4.0]))
        fld = ScalarField(values=rs.rand(h, w), cell_size=cell)
        for _ in range(50):
            # Include points well outside the arena to exercise the clamp.
            x = float(rs.uniform(-2 * cell, (w + 2) * cell))
            y = float(rs.uniform(-2 * cell, (h + 2) * cell))
            want = bilinear_reference(fld.values, cell, x, y)
            assert sample(fld, x, y) == pytest.approx(want, abs=1e-12)


def test_bilinear_is_exact_at_cell_centres():
    rs = np.random.RandomState(3)
    fld = ScalarField(values=rs.rand(4, 6), cell_size=2.0)
    for iy in range(4):
        for ix in range(6):
            x, y = (ix + 0.5) * 2.0, (iy + 0.5) * 2.0
            assert sample(fld, x, y) == fld.values[iy, ix]


def test_nearest_returns_containing_cell():
    vals = np.arange(12, dtype=np.float64).reshape(3, 4) / 11.0
    fld = ScalarField(values=vals, cell_size=2.0)
    assert sample(fld, 0.1, 0.1, mode="nearest") == vals[0, 0]
    assert sample(fld, 1.999, 0.1, mode="nearest") == vals[0, 0]
    assert sample(fld, 2.0, 0.1, mode="nearest") == vals[0, 1]  # boundary: right cell
    assert sample(fld, 7.5, 5.5, mode="nearest") == vals[2, 3]
    # Outside points clamp to the border cell.
    assert sample(fld, -5.0, 100.0, mode="nearest") == vals[2, 0]


def test_sample_clamps_to_value_range():
    rs = np.random.RandomState(8)
    fld = ScalarField(values=rs.rand(5, 5), cell_size=1.0)
    lo, hi = fld.values.min(), fld.values.max()
    for x, y in [(-3.0, -3.0), (10.0, 2.0), (2.5, 99.0)]:
        v = sample(fld, x, y)
        assert lo - 1e-15 <= v <= hi + 1e-15


def test_sample_unknown_mode_raises():
    fld = ScalarField(values=np.zeros((2, 2)), cell_size=1.0)
    with pytest.raises(ParameterError):
        sample(fld, 0.0, 0.0, mode="cubic")


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def test_line_field_matches_closed_form_ramp():
    seg = ((50.0, 100.0), (150.0, 100.0))
    halfwidth, falloff, cell = 20.0, 80.0, 4.0
    fld = generate_line_field(200.0, 200.0, seg, halfwidth, falloff, cell)
    for iy in range(0, fld.grid_height, 3):
        for ix in range(0, fld.grid_width, 3):
            centre = ((ix + 0.5) * cell, (iy + 0.5) * cell)
            d = segment_distance_reference(centre, *seg)
            want = float(np.clip((d - halfwidth) / falloff, 0.0, 1.0))
            assert fld.values[iy, ix] == pytest.approx(want, abs=1e-12)


def test_line_field_goal_band_is_exactly_zero():
    fld = generate_line_field(200.0, 200.0, ((50.0, 100.0), (150.0, 100.0)),
                              20.0, 80.0, 4.0)
    seg = ((50.0, 100.0), (150.0, 100.0))
    ys, xs = fld.zero_cells()
    assert ys.shape[0] > 0
    for iy, ix in zip(ys.tolist(), xs.tolist()):
        centre = ((ix + 0.5) * 4.0, (iy + 0.5) * 4.0)
        assert segment_distance_reference(centre, *seg) <= 20.0 + 1e-9


def test_l_field_is_cellwise_min_of_line_fields():
    seg_a = ((50.0, 100.0), (150.0, 100.0))
    seg_b = ((50.0, 100.0), (50.0, 160.0))
    kw = dict(goal_halfwidth=20.0, falloff=80.0, cell_size=4.0)
    both = generate_l_field(200.0, 200.0, seg_a, seg_b, **kw)
    fa = generate_line_field(200.0, 200.0, seg_a, **kw)
    fb = generate_line_field(200.0, 200.0, seg_b, **kw)
    assert np.array_equal(both.values, np.minimum(fa.values, fb.values))


def test_generator_rejects_bad_parameters():
    seg = ((10.0, 10.0), (90.0, 10.0))
    with pytest.raises(ParameterError):
        generate_line_field(100.0, 100.0, seg, 0.0, 80.0, 4.0)
    with pytest.raises(ParameterError):
        generate_line_field(100.0, 100.0, seg, 20.0, 0.0, 4.0)
    with pytest.raises(ParameterError):  # endpoint outside the arena
        generate_line_field(100.0, 100.0, ((10.0, 10.0), (110.0, 10.0)),
                            20.0, 80.0, 4.0)
    with pytest.raises(ParameterError):  # extent not a whole number of cells
        generate_line_field(101.0, 100.0, seg, 20.0, 80.0, 4.0)


def test_field_from_array_scales_pixels():
    px = np.array([[0, 51], [255, 102]], dtype=np.uint8)
    fld = field_from_array(px, cell_size=3.0)
    assert np.array_equal(fld.values, px / 255.0)
    with pytest.raises(FieldFormatError):
        field_from_array(np.zeros(4, dtype=np.uint8), cell_size=1.0)


# ---------------------------------------------------------------------------
# PGM round trip
# ---------------------------------------------------------------------------

def test_pgm_round_trip_preserves_quantised_grid(tmp_path):
    rs = np.random.RandomState(5)
    px = rs.randint(0, 256, size=(7, 9), dtype=np.uint8).astype(np.uint8)
    fld = field_from_array(px, cell_size=4.0)
    path = tmp_path / "field.pgm"
    write_field(fld, path)
    back = load_field(path, cell_size=4.0)
    assert np.array_equal(back.values, fld.values)


def test_pgm_rows_are_written_top_down(tmp_path):
    px = np.zeros((2, 2), dtype=np.uint8)
    px[0, :] = 10   # bottom row of the arena
    px[1, :] = 200  # top row of the arena
    fld = field_from_array(px, cell_size=1.0)
    path = tmp_path / "f.pgm"
    write_field(fld, path)
    raw = path.read_bytes()
    data = raw[len(b"P5\n2 2\n255\n"):]
    assert list(data) == [200, 200, 10, 10]


def test_pgm_header_comments_are_skipped(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 # another\n2\n255\n" + bytes([1, 2, 3, 4]))
    fld = load_field(path, cell_size=1.0)
    assert fld.grid_width == 2 and fld.grid_height == 2
    # file rows are top-down, memory rows are bottom-up
    assert np.array_equal(np.rint(fld.values * 255).astype(int),
                          [[3, 4], [1, 2]])


@pytest.mark.parametrize("raw, message_part", [
    (b"P6\n2 2\n255\n" + bytes(12), "not a binary PGM"),
    (b"P5\n2 2\n254\n" + bytes(4), "maxval"),
    (b"P5\n2 2\n255\n" + bytes(3), "pixel bytes"),
    (b"P5\nx 2\n255\n" + bytes(4), "non-numeric"),
    (b"P5\n0 2\n255\n", "empty image"),
    (b"P5\n2 2", "truncated header"),
])
def test_pgm_malformed_files_raise(tmp_path, raw, message_part):
    path = tmp_path / "bad.pgm"
    path.write_bytes(raw)
    with pytest.raises(FieldFormatError, match=message_part):
        load_field(path)


# ---------------------------------------------------------------------------
# goal distance map
# ---------------------------------------------------------------------------

def test_distance_map_matches_brute_force_exactly():
    rs = np.random.RandomState(11)
    for _ in range(25):
        h, w = rs.randint(2, 24, size=2)
        vals = make_grid(rs, h, w)
        cell = float(rs.choice([1.0, 2.0, 4.0]))
        fld = ScalarField(values=vals, cell_size=cell)
        dmap = goal_distance_map(fld)
        brute = brute_distance_cells(fld.values == 0.0) * cell
        assert np.array_equal(dmap.distances, brute)


def test_distance_map_three_four_five():
    vals = np.full((6, 6), 0.5)
    vals[0, 0] = 0.0
    fld = ScalarField(values=vals, cell_size=2.0)
    dmap = goal_distance_map(fld)
    assert dmap.distances[0, 0] == 0.0
    assert dmap.distances[4, 3] == 5.0 * 2.0   # 3-4-5 triangle, in world units
    assert dmap.distances[3, 4] == 5.0 * 2.0


def test_distance_map_requires_a_goal():
    fld = ScalarField(values=np.full((3, 3), 0.5), cell_size=1.0)
    with pytest.raises(ParameterError):
        goal_distance_map(fld)


def test_distance_lookup_clamps_to_grid():
    d = np.array([[0.0, 1.0], [2.0, 3.0]])
    dmap = GoalDistanceMap(distances=d, cell_size=2.0)
    assert dmap.lookup(0.5, 0.5) == 0.0
    assert dmap.lookup(3.9, 3.9) == 3.0
    assert dmap.lookup(-10.0, 100.0) == 2.0   # clamps to column 0, top row
