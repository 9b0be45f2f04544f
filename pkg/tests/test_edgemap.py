"""Edge-map pipeline tests against scalar oracles."""

import numpy as np
import pytest

from edgeage.edgemap import (
    BLACK, GREEN, RED, WHITE,
    CLASS_CONTOUR, CLASS_EXTERIOR, CLASS_INTERIOR, CLASS_NONE,
    BoundingBox, EdgeMap, LandmarkSet,
    admissible_colors_only, canny, colorize_interior_canny, compose_edge_map,
    decolorize, edge_map_from_soft, expand_roi, face_polygon,
    filter_interior_canny, load_landmarks, points_in_polygon,
    rasterize_landmark_contour, save_landmarks,
)
from edgeage.errors import ContractError, DataError

from oracles import point_in_polygon, reference_canny, reference_rasterize


def mask_to_set(mask):
    ys, xs = np.nonzero(np.asarray(mask))
    return set(zip(xs.tolist(), ys.tolist()))


def toy_landmarks(cx=32.0, cy=34.0, a=22.0, b=26.0):
    """Ellipse-parameterized 68-point face used across edge-map tests."""
    pts = np.zeros((68, 2))
    theta = np.deg2rad(np.linspace(200.0, -20.0, 17))
    pts[0:17, 0] = cx + a * np.cos(theta)
    pts[0:17, 1] = cy + b * np.sin(theta)
    pts[17:22, 0] = np.linspace(cx - 0.7 * a, cx - 0.15 * a, 5)
    pts[17:22, 1] = cy - 0.45 * b - 1.5 * np.sin(np.linspace(0, np.pi, 5))
    pts[22:27, 0] = np.linspace(cx + 0.15 * a, cx + 0.7 * a, 5)
    pts[22:27, 1] = cy - 0.45 * b - 1.5 * np.sin(np.linspace(0, np.pi, 5))
    pts[27:31, 0] = cx
    pts[27:31, 1] = np.linspace(cy - 0.25 * b, cy + 0.05 * b, 4)
    base_t = np.linspace(0, 2 * np.pi, 5, endpoint=False)
    pts[31:36, 0] = cx + 0.12 * a * np.cos(base_t)
    pts[31:36, 1] = cy + 0.16 * b + 0.06 * b * np.sin(base_t)
    eye_t = np.linspace(0, 2 * np.pi, 6, endpoint=False)
    pts[36:42, 0] = cx - 0.4 * a + 0.16 * a * np.cos(eye_t)
    pts[36:42, 1] = cy - 0.25 * b + 0.08 * b * np.sin(eye_t)
    pts[42:48, 0] = cx + 0.4 * a + 0.16 * a * np.cos(eye_t)
    pts[42:48, 1] = cy - 0.25 * b + 0.08 * b * np.sin(eye_t)
    mouth_t = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    pts[48:60, 0] = cx + 0.28 * a * np.cos(mouth_t)
    pts[48:60, 1] = cy + 0.5 * b + 0.1 * b * np.sin(mouth_t)
    inner_t = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    pts[60:68, 0] = cx + 0.16 * a * np.cos(inner_t)
    pts[60:68, 1] = cy + 0.5 * b + 0.04 * b * np.sin(inner_t)
    return LandmarkSet(pts)


# -- expand_roi -----------------------------------------------------------------


def test_expand_roi_center_scaling():
    big = BoundingBox(0, 0, 1000, 1000)
    out = expand_roi(BoundingBox(100, 100, 40, 40), 1.5, big)
    assert (out.x, out.y, out.w, out.h) == (90, 90, 60, 60)


def test_expand_roi_identity():
    big = BoundingBox(0, 0, 1000, 1000)
    out = expand_roi(BoundingBox(13, 27, 41, 33), 1.0, big)
    assert (out.x, out.y, out.w, out.h) == (13, 27, 41, 33)


def test_expand_roi_clips_at_border():
    out = expand_roi(BoundingBox(0, 0, 40, 40), 1.5, BoundingBox(0, 0, 100, 100))
    assert (out.x, out.y, out.w, out.h) == (0, 0, 50, 50)


def test_expand_roi_monotone_in_factor():
    big = BoundingBox(0, 0, 10000, 10000)
    box = BoundingBox(400, 380, 37, 53)
    prev = expand_roi(box, 1.0, big)
    for factor in (1.2, 1.5, 2.0, 3.0):
        cur = expand_roi(box, factor, big)
        assert cur.x <= prev.x and cur.y <= prev.y
        assert cur.x + cur.w >= prev.x + prev.w and cur.y + cur.h >= prev.y + prev.h
        prev = cur


def test_expand_roi_rejects_bad_inputs():
    big = BoundingBox(0, 0, 100, 100)
    with pytest.raises(ContractError):
        expand_roi(BoundingBox(10, 10, 5, 5), 0.5, big)
    with pytest.raises(DataError):
        expand_roi(BoundingBox(500, 500, 10, 10), 1.5, big)


# -- canny ----------------------------------------------------------------------


def test_canny_constant_image_is_empty():
    assert not canny(np.full((16, 16), 137, np.uint8)).any()


def test_canny_vertical_step_single_line():
    img = np.zeros((16, 16), np.uint8)
    img[:, 8:] = 255
    mask = canny(img, 1.0, 20.0, 60.0)
    got = mask_to_set(mask)
    assert got == reference_canny(img.tolist(), 1.0, 20.0, 60.0)
    cols = {x for x, _ in got}
    assert len(cols) == 1  # a single 1-px vertical response line
    assert len(got) == 16


def test_canny_circle_ring_matches_oracle():
    yy, xx = np.mgrid[0:32, 0:32]
    img = (((xx - 16) ** 2 + (yy - 16) ** 2) <= 100).astype(np.uint8) * 255
    got = mask_to_set(canny(img))
    assert got == reference_canny(img.tolist())
    assert got, "circle must produce edges"
    for x, y in got:  # closed 8-connected ring: every pixel has 2+ ring neighbors
        neighbors = sum(
            1 for dx in (-1, 0, 1) for dy in (-1, 0, 1)
            if (dx or dy) and (x + dx, y + dy) in got
        )
        assert neighbors >= 2


def test_canny_random_images_match_oracle():
    rng = np.random.default_rng(21)
    for _ in range(15):
        h, w = rng.integers(8, 33, size=2)
        img = rng.integers(0, 256, size=(h, w)).astype(np.uint8)
        assert mask_to_set(canny(img)) == reference_canny(img.tolist())


def test_canny_invariant_to_constant_shift():
    rng = np.random.default_rng(22)
    for _ in range(8):
        img = rng.integers(0, 200, size=(20, 20)).astype(np.uint8)
        shifted = (img + 55).astype(np.uint8)
        np.testing.assert_array_equal(canny(img), canny(shifted))


def test_canny_threshold_contract():
    with pytest.raises(ContractError):
        canny(np.zeros((8, 8), np.uint8), 1.0, 60.0, 20.0)


# -- rasterization ----------------------------------------------------------------


def test_rasterize_degenerate_points_single_pixel():
    lm = LandmarkSet(np.full((68, 2), 10.0))
    mask = rasterize_landmark_contour(lm, (32, 32))
    assert mask_to_set(mask) == {(10, 10)}


def test_rasterize_diagonal_jaw_segment():
    pts = np.full((68, 2), 30.0)
    pts[0] = (0.0, 0.0)
    pts[1] = (3.0, 3.0)
    mask = rasterize_landmark_contour(LandmarkSet(pts), (40, 40))
    assert {(0, 0), (1, 1), (2, 2), (3, 3)} <= mask_to_set(mask)


def test_rasterize_matches_reference_on_toy_face():
    lm = toy_landmarks()
    got = mask_to_set(rasterize_landmark_contour(lm, (64, 64)))
    ref = reference_rasterize(lm.points.tolist(), (64, 64))
    assert got == ref


def test_rasterize_reversal_invariance():
    lm = toy_landmarks()
    reversed_pts = lm.points.copy()
    for first, last in [(0, 16), (17, 21), (22, 26), (27, 30), (31, 35), (36, 41), (42, 47), (48, 59), (60, 67)]:
        reversed_pts[first:last + 1] = reversed_pts[first:last + 1][::-1]
    a = rasterize_landmark_contour(lm, (64, 64))
    b = rasterize_landmark_contour(LandmarkSet(reversed_pts), (64, 64))
    np.testing.assert_array_equal(a, b)


def test_rasterize_clamps_out_of_range():
    pts = np.full((68, 2), 5.0)
    pts[0] = (-10.0, -10.0)
    pts[1] = (100.0, 100.0)
    mask = rasterize_landmark_contour(LandmarkSet(pts), (16, 16))
    got = mask_to_set(mask)
    assert (0, 0) in got and (15, 15) in got


# -- polygon & composition ---------------------------------------------------------


def test_points_in_polygon_matches_scalar():
    rng = np.random.default_rng(23)
    poly = face_polygon(toy_landmarks())
    xs = rng.integers(0, 64, 300)
    ys = rng.integers(0, 64, 300)
    got = points_in_polygon(poly, xs, ys)
    for x, y, flag in zip(xs.tolist(), ys.tolist(), got.tolist()):
        assert flag == point_in_polygon(poly.tolist(), float(x), float(y))


def make_toy_edge():
    lm = toy_landmarks()
    contour = rasterize_landmark_contour(lm, (64, 64))
    img = np.full((64, 64), 200, np.uint8)
    img[30:40, 25:27] = 40   # interior stroke (inside face)
    img[5:12, 55:57] = 40    # exterior stroke (outside polygon)
    cmask = canny(img)
    return compose_edge_map(cmask, contour, face_polygon(lm)), lm


def test_compose_contour_only():
    lm = toy_landmarks()
    contour = rasterize_landmark_contour(lm, (64, 64))
    edge = compose_edge_map(np.zeros((64, 64), np.uint8), contour, face_polygon(lm))
    assert mask_to_set(edge.pixels.any(axis=2)) == mask_to_set(contour)
    assert set(np.unique(edge.classes)) <= {CLASS_NONE, CLASS_CONTOUR}


def test_compose_contour_wins_on_overlap():
    contour = np.zeros((8, 8), np.uint8)
    contour[4, 4] = 255
    cmask = contour.copy()
    edge = compose_edge_map(cmask, contour, np.array([[0, 0], [8, 0], [8, 8], [0, 8]], float))
    assert edge.classes[4, 4] == CLASS_CONTOUR


def test_compose_interior_exterior_partition_matches_oracle():
    edge, lm = make_toy_edge()
    poly = face_polygon(lm).tolist()
    ys, xs = np.nonzero((edge.classes == CLASS_INTERIOR) | (edge.classes == CLASS_EXTERIOR))
    assert len(ys) > 0
    for x, y in zip(xs.tolist(), ys.tolist()):
        expect = CLASS_INTERIOR if point_in_polygon(poly, float(x), float(y)) else CLASS_EXTERIOR
        assert edge.classes[y, x] == expect
    assert (edge.classes == CLASS_INTERIOR).sum() > 0
    assert (edge.classes == CLASS_EXTERIOR).sum() > 0


# -- coloring -----------------------------------------------------------------------


def test_colorize_no_interior_is_identity():
    contour = np.zeros((8, 8), np.uint8)
    contour[2, 2:6] = 255
    edge = compose_edge_map(np.zeros((8, 8), np.uint8), contour, np.array([[0, 0], [1, 0], [1, 1]], float))
    out = colorize_interior_canny(edge, RED)
    np.testing.assert_array_equal(out.pixels, edge.pixels)


def test_colorize_single_interior_pixel():
    edge, _ = make_toy_edge()
    out = colorize_interior_canny(edge, RED)
    interior = edge.classes == CLASS_INTERIOR
    assert (out.pixels[interior] == np.array(RED, np.uint8)).all()
    other = (edge.classes != CLASS_NONE) & ~interior
    assert (out.pixels[other] == np.array(WHITE, np.uint8)).all()
    assert admissible_colors_only(out)


def test_colorize_rejects_bad_color():
    edge, _ = make_toy_edge()
    with pytest.raises(ContractError):
        colorize_interior_canny(edge, (0, 0, 255))


def test_decolorize_round_trip():
    edge, _ = make_toy_edge()
    for color in (RED, GREEN):
        back = decolorize(colorize_interior_canny(edge, color))
        np.testing.assert_array_equal(back.pixels, edge.pixels)  # composed maps are all white
        np.testing.assert_array_equal(back.classes, edge.classes)


def test_decolorize_idempotent_through_colorize():
    edge, _ = make_toy_edge()
    direct = decolorize(edge)
    via = decolorize(colorize_interior_canny(edge, GREEN))
    np.testing.assert_array_equal(direct.pixels, via.pixels)


def test_filter_interior_canny():
    edge, _ = make_toy_edge()
    out = filter_interior_canny(edge)
    assert (out.classes == CLASS_INTERIOR).sum() == 0
    kept = (edge.classes == CLASS_CONTOUR) | (edge.classes == CLASS_EXTERIOR)
    np.testing.assert_array_equal(out.classes[kept], edge.classes[kept])
    assert (out.pixels[edge.classes == CLASS_INTERIOR] == 0).all()


def test_filter_contour_only_unchanged():
    lm = toy_landmarks()
    contour = rasterize_landmark_contour(lm, (64, 64))
    edge = compose_edge_map(np.zeros((64, 64), np.uint8), contour, face_polygon(lm))
    out = filter_interior_canny(edge)
    np.testing.assert_array_equal(out.pixels, edge.pixels)


def test_color_closure_random_sequences():
    rng = np.random.default_rng(24)
    edge, _ = make_toy_edge()
    ops = [
        lambda e: colorize_interior_canny(e, RED),
        lambda e: colorize_interior_canny(e, GREEN),
        decolorize,
        filter_interior_canny,
    ]
    cur = edge
    for _ in range(200):
        cur = ops[rng.integers(0, len(ops))](cur)
        assert admissible_colors_only(cur)


# -- binarization of generated maps ---------------------------------------------


def test_soft_edge_binarization_matches_threshold_oracle():
    rng = np.random.default_rng(25)
    soft = rng.uniform(-1.0, 1.0, size=(3, 16, 16))
    poly = np.array([[2.0, 2.0], [13.0, 2.0], [13.0, 13.0], [2.0, 13.0]])
    edge = edge_map_from_soft(soft, poly)
    for y in range(16):
        for x in range(16):
            expect = max((soft[c, y, x] + 1.0) / 2.0 for c in range(3)) >= 0.5
            assert bool(edge.pixels[y, x].any()) == expect
            if expect:
                assert tuple(edge.pixels[y, x]) == WHITE
    assert admissible_colors_only(edge)


# -- landmark file I/O -----------------------------------------------------------


def test_landmark_file_round_trip(tmp_path):
    lm = toy_landmarks()
    path = tmp_path / "face.landmarks.txt"
    save_landmarks(lm, path)
    text = path.read_text()
    path.write_text("# header comment\n\n" + text)
    back = load_landmarks(path)
    np.testing.assert_allclose(back.points, lm.points, atol=1e-3)


def test_landmark_file_count_error(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("\n".join("1.0 2.0" for _ in range(67)))
    with pytest.raises(DataError, match="68"):
        load_landmarks(path)


def test_landmark_clamping_warns(tmp_path, caplog):
    pts = np.full((68, 2), 10.0)
    pts[5] = (999.0, 999.0)
    path = tmp_path / "face.txt"
    save_landmarks(LandmarkSet(pts), path)
    with caplog.at_level("WARNING"):
        lm = load_landmarks(path, image_size=(64, 64))
    assert lm.points[5, 0] == 63.0
    assert any("clamped" in r.message for r in caplog.records)
