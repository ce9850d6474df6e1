import os

import numpy as np
import pytest

from morphoheat.errors import ArgumentError
from morphoheat.geometry import (BackgroundGrid, boundary_integral, build_slice, connected_components,
                                 count_holes, euler_characteristic, volume_integral, write_vtk)
from morphoheat.levelset import field_from_expression, scenario

UNIT_CIRCLE = field_from_expression("x1**2 + x2**2 - 1 + 0*t", 2)
GROWING = field_from_expression("x1**2 + x2**2 - t", 2, (0.0, 1.0))


@pytest.fixture(scope="module")
def disk():
    return build_slice(UNIT_CIRCLE, BackgroundGrid(2, 2.0, 201), 0.3)


def test_grid_validation():
    with pytest.raises(ArgumentError):
        BackgroundGrid(2, 1.0, 15)
    with pytest.raises(ArgumentError):
        BackgroundGrid(4, 1.0, 33)
    g = BackgroundGrid(2, 1.0, 17)
    assert g.h == pytest.approx(0.125)
    assert g.points.min() == -1.0 and g.points.max() == 1.0


def test_disk_volume_perimeter_components(disk):
    assert abs(disk.volume - np.pi) < 1e-3
    assert abs(disk.area - 2 * np.pi) < 1e-3
    assert disk.n_components == 1
    assert count_holes(disk) == 0
    assert euler_characteristic(disk) == 1


def test_volume_integrals(disk):
    assert abs(volume_integral(disk, lambda p: np.ones(len(p))) - np.pi) < 1e-2
    assert volume_integral(disk, 0.0) == 0.0
    assert abs(volume_integral(disk, lambda p: p[:, 0])) < 1e-3


def test_boundary_integrals(disk):
    assert abs(boundary_integral(disk, 1.0) - 2 * np.pi) < 1e-3
    assert abs(boundary_integral(disk, lambda p: p[:, 1])) < 1e-3
    s = build_slice(GROWING, BackgroundGrid(2, 1.0, 201), 0.25)
    assert boundary_integral(s, 1.0) == pytest.approx(2 * np.pi * 0.5, abs=1e-3)


def test_facet_vertices_on_zero_level(disk):
    v = disk.facet_vertices.reshape(-1, 2)
    assert np.max(np.abs(UNIT_CIRCLE.eval(v, 0.3))) < 1e-8


def test_ball_facets_on_zero_level():
    f = field_from_expression("x1**2 + x2**2 + x3**2 - 0.5 + 0*t", 3)
    s = build_slice(f, BackgroundGrid(3, 1.0, 33), 0.0)
    v = s.facet_vertices.reshape(-1, 3)
    assert np.max(np.abs(f.eval(v, 0.0))) < 1e-8
    r = np.sqrt(0.5)
    assert s.volume == pytest.approx(4 / 3 * np.pi * r ** 3, rel=1e-2)
    assert s.area == pytest.approx(4 * np.pi * r ** 2, rel=1e-2)


def test_disk_of_radius_sqrt_t_converges_at_second_order():
    t = 0.3
    vol_err, per_err = [], []
    for n in (33, 65, 129, 257):
        s = build_slice(GROWING, BackgroundGrid(2, 1.0, n), t)
        vol_err.append(abs(s.volume - np.pi * t))
        per_err.append(abs(s.area - 2 * np.pi * np.sqrt(t)))
    # least-squares slope over the four levels absorbs the grid-alignment wobble
    h = 2.0 / (np.array([33, 65, 129, 257]) - 1)
    p_vol = np.polyfit(np.log(h), np.log(vol_err), 1)[0]
    p_per = np.polyfit(np.log(h), np.log(per_err), 1)[0]
    assert p_vol >= 1.9 and p_per >= 1.9, (p_vol, p_per)


def test_split_has_two_components():
    s = build_slice(scenario("split2d"), BackgroundGrid(2, 1.0, 129), 0.25)
    assert connected_components(s)[0] == 2


def test_merge_component_counts():
    f = scenario("merge2d")
    g = BackgroundGrid(2, 1.0, 129)
    assert build_slice(f, g, -0.25).n_components == 2
    assert build_slice(f, g, 0.25).n_components == 1


def test_island_create_slices():
    f = scenario("island2d-create")
    g = BackgroundGrid(2, 1.0, 129)
    assert build_slice(f, g, 0.0).n_active <= 1
    s = build_slice(f, g, 0.25)
    assert s.n_components == 1
    assert s.volume == pytest.approx(np.pi * 0.25, abs=1e-3)


def test_hole_create_has_bounded_complement():
    f = scenario("hole2d-create")
    g = BackgroundGrid(2, 1.0, 129)
    assert count_holes(build_slice(f, g, -0.25)) == 0
    s = build_slice(f, g, 0.25)
    assert count_holes(s) == 1
    assert euler_characteristic(s) == 0


def test_empty_slice():
    s = build_slice(scenario("island2d-create"), BackgroundGrid(2, 1.0, 65), 0.0)
    g = BackgroundGrid(2, 1.0, 64)
    e = build_slice(field_from_expression("1 + x1**2 + 0*t", 2), g, 0.0)
    assert e.empty and e.n_components == 0 and e.volume == 0.0 and e.area == 0.0
    assert volume_integral(e, 1.0) == 0.0 and boundary_integral(e, 1.0) == 0.0
    assert s.n_active <= 1


def test_labels_partition_active_nodes(disk):
    s = build_slice(scenario("split2d"), BackgroundGrid(2, 1.0, 65), 0.25)
    assert np.all((s.labels > 0) == s.active)
    # lowest node index of each component comes in label order
    firsts = [np.flatnonzero(s.labels == k)[0] for k in range(1, s.n_components + 1)]
    assert firsts == sorted(firsts)


def test_weights_are_bounded_by_adjacent_cells(disk):
    # each node can collect shares of at most its 2^dim adjacent cells
    h2 = disk.grid.h ** 2
    assert np.all(disk.weights >= 0) and np.all(disk.weights <= 4 * h2 * (1 + 1e-12))
    interior = disk.phi < -0.1
    np.testing.assert_allclose(disk.weights[interior], h2)
    assert np.all(disk.weights[~disk.active] == 0)


def test_cut_fractions_in_range(disk):
    th = disk.theta[np.isfinite(disk.theta)]
    assert th.size and np.all(th >= 1e-3) and np.all(th <= 1.0)


def test_dimension_mismatch():
    with pytest.raises(ArgumentError):
        build_slice(UNIT_CIRCLE, BackgroundGrid(3, 1.0, 17), 0.0)


def test_3d_split_components():
    f = scenario("split3d")
    g = BackgroundGrid(3, 1.0, 33)
    assert build_slice(f, g, -0.25).n_components == 1
    assert build_slice(f, g, 0.25).n_components == 2


def test_write_vtk(tmp_path, disk):
    s = build_slice(UNIT_CIRCLE, BackgroundGrid(2, 2.0, 17), 0.0)
    p = os.path.join(tmp_path, "s.vtk")
    write_vtk(p, s, {"u": np.arange(s.grid.size, dtype=float)})
    text = open(p).read()
    assert "DIMENSIONS 17 17 1" in text and "SCALARS u double 1" in text
    assert text.count("\n") > 3 * 17 * 17
