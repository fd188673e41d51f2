import numpy as np
import pytest

from bandedge import bands as bd
from bandedge import discrete as dc
from bandedge.errors import NotAttained, OddTorus

MODEL = dc.DiatomicModel(0.0, 2.0)


def test_fiber_entries():
    f = dc.fiber(MODEL, [0.0, 0.0])
    assert np.allclose(f.matrix, [[0.0, 2.0], [2.0, 2.0]])
    assert np.allclose(dc.fiber(MODEL, [np.pi / 2, np.pi / 2]).matrix,
                       [[0.0, 0.0], [0.0, 2.0]])
    assert np.allclose(dc.fiber(MODEL, [np.pi, 0.0]).matrix,
                       [[0.0, 0.0], [0.0, 2.0]])


def test_lambda_pm_worked_values():
    lm, lp = dc.lambda_pm(MODEL, [0.0, 0.0])
    assert lm == pytest.approx(1 - np.sqrt(5), abs=1e-14)
    assert lp == pytest.approx(1 + np.sqrt(5), abs=1e-14)
    assert dc.lambda_pm(MODEL, [np.pi / 2, np.pi / 2]) == (0.0, 2.0)
    lm0, lp0 = dc.lambda_pm(dc.DiatomicModel(0.0, 0.0), [0.0, 0.0])
    assert (lm0, lp0) == (-2.0, 2.0)


def test_lambda_pm_matches_fiber_eigenvalues():
    rng = np.random.default_rng(8)
    for _ in range(10_000):
        k = rng.uniform(-np.pi, np.pi, size=2)
        lm, lp = dc.lambda_pm(MODEL, k)
        ev = np.linalg.eigvalsh(dc.fiber(MODEL, k).matrix)
        assert abs(lm - ev[0]) < 1e-14 and abs(lp - ev[1]) < 1e-14


def test_band_edges_gapped():
    edges = dc.band_edges(MODEL)
    assert edges == pytest.approx(
        (1 - np.sqrt(5), 0.0, 2.0, 1 + np.sqrt(5)), abs=1e-14
    )


def test_band_edges_touching():
    edges = dc.band_edges(dc.DiatomicModel(1.0, 1.0))
    assert edges == pytest.approx((-1.0, 1.0, 1.0, 3.0), abs=1e-14)


def test_band_edges_ordering():
    edges = dc.band_edges(dc.DiatomicModel(5.0, -1.0))
    assert edges[1] == -1.0 and edges[2] == 5.0


def test_gap_empty_iff_equal_potentials():
    for v0, v1 in ((0.0, 2.0), (1.0, 1.0), (-0.5, 0.25)):
        edges = dc.band_edges(dc.DiatomicModel(v0, v1))
        assert (edges[2] - edges[1] > 0) == (v0 != v1)


def test_edge_attainment_on_dense_grid():
    grid = dc.grid_adapter(MODEL, 256)
    edges = dc.band_edges(MODEL)
    assert abs(float(np.max(grid.values[:, :, 0])) - edges[1]) < 1e-12
    assert abs(float(np.min(grid.values[:, :, 1])) - edges[2]) < 1e-12


# -- level set descriptors -------------------------------------------------------

def test_level_lines_gap_edge():
    desc = dc.level_lines(MODEL, 0.0)
    assert desc.kind == "lines" and not desc.isolated
    assert len(desc.lines) == 2


def test_level_lines_outer_edge():
    desc = dc.level_lines(MODEL, 1 - np.sqrt(5))
    assert desc.kind == "points" and desc.isolated
    assert np.allclose(desc.points[0], [0.0, 0.0])


def test_level_lines_not_attained():
    with pytest.raises(NotAttained):
        dc.level_lines(MODEL, 10.0)


def test_level_lines_interior_curve():
    desc = dc.level_lines(MODEL, -0.5)
    assert desc.kind == "curve" and not desc.isolated
    assert 0 < desc.c_squared < 4


# -- torus spectra -----------------------------------------------------------------

def test_torus_two_routes_small():
    a, b = dc.torus_spectrum(MODEL, 2)
    expect = np.sort([1 - np.sqrt(5), 0.0, 2.0, 1 + np.sqrt(5)])
    assert np.allclose(a, expect, atol=1e-12)
    assert np.allclose(a, b, atol=1e-12)


def test_torus_routes_agree():
    for L in (2, 4, 8, 16):
        a, b = dc.torus_spectrum(MODEL, L)
        assert len(a) == L * L
        assert np.max(np.abs(a - b)) < 1e-10


def test_torus_within_bands():
    edges = dc.band_edges(MODEL)
    a, _ = dc.torus_spectrum(MODEL, 8)
    inside = ((a >= edges[0] - 1e-12) & (a <= edges[1] + 1e-12)) | \
             ((a >= edges[2] - 1e-12) & (a <= edges[3] + 1e-12))
    assert np.all(inside)


def test_torus_bipartite_symmetry():
    a, _ = dc.torus_spectrum(dc.DiatomicModel(0.0, 0.0), 4)
    assert np.max(np.abs(np.sort(a) + np.sort(-a)[::-1])) < 1e-12


def test_torus_rejects_odd():
    with pytest.raises(OddTorus):
        dc.torus_spectrum(MODEL, 3)


# -- grid adapter into the band machinery ---------------------------------------------

def test_adapter_max_of_lower_band_extended():
    grid = dc.grid_adapter(MODEL, 200)
    rep = bd.locate_extrema(grid, 1, "max", eps=1e-9)
    assert rep.value == pytest.approx(0.0, abs=1e-12)
    assert rep.classification == "extended"


def test_adapter_min_of_lower_band_isolated():
    grid = dc.grid_adapter(MODEL, 200)
    rep = bd.locate_extrema(grid, 1, "min", eps=1e-9)
    assert rep.value == pytest.approx(1 - np.sqrt(5), abs=1e-10)
    assert rep.classification == "isolated"
    assert np.linalg.norm(rep.points[0]) < 1e-6


def test_adapter_min_of_upper_band_extended():
    grid = dc.grid_adapter(MODEL, 200)
    rep = bd.locate_extrema(grid, 2, "min", eps=1e-9)
    assert rep.value == pytest.approx(2.0, abs=1e-12)
    assert rep.classification == "extended"


def test_level_lines_traced_on_grid():
    grid = dc.grid_adapter(MODEL, 128)
    clusters = bd.level_set(grid, 1, 0.0, eps=1e-9)
    # The eps-level nodes trace k1 +/- k2 = (2p+1) pi.
    for cluster in clusters:
        for (i, j) in cluster.nodes:
            k = grid.kvec(i, j)
            s = (k[0] + k[1]) / np.pi
            d = (k[0] - k[1]) / np.pi
            ok_plus = abs(s - round(s)) < 1e-9 and round(s) % 2 == 1
            ok_minus = abs(d - round(d)) < 1e-9 and round(d) % 2 == 1
            assert ok_plus or ok_minus


def test_hessian_oracle_matches_finite_difference():
    k = np.array([0.3, -0.8])
    oracle = dc.lambda_pm_hessian(MODEL, k, "+")
    h = 1e-4
    fn = lambda kk: dc.lambda_pm(MODEL, kk)[1]
    fd = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            ei = np.eye(2)[i] * h
            ej = np.eye(2)[j] * h
            fd[i, j] = (fn(k + ei + ej) - fn(k + ei - ej)
                        - fn(k - ei + ej) + fn(k - ei - ej)) / (4 * h * h)
    assert np.max(np.abs(fd - oracle)) < 1e-6
