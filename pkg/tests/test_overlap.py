import math

import numpy as np
import pytest

from macroreal.instruments import ComplexLattice, Grid1D
from macroreal.overlap import (
    OutcomeDistribution,
    bhattacharyya,
    cell_overlap,
    coherent_delta_overlap,
    coherent_x_exact,
    coherent_x_overlap,
    delta_limit_curve,
    fock_overlap,
    husimi,
    quadrature_overlap_analytic,
    quadrature_overlap_numeric,
    ring_overlap,
)

IDEAL_DELTA = 2.0 * math.sqrt(2.0) / 3.0


def gaussian_distribution(mean, var, grid):
    xs = grid.points
    vals = np.exp(-((xs - mean) ** 2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)
    return OutcomeDistribution(xs, grid.weights, vals)


def test_bhattacharyya_identical_and_disjoint():
    grid = Grid1D(-10.0, 10.0, 2001)
    p = gaussian_distribution(0.0, 1.0, grid)
    assert abs(bhattacharyya(p, p) - 1.0) < 1e-8
    left = gaussian_distribution(-6.0, 0.01, grid)
    right = gaussian_distribution(6.0, 0.01, grid)
    assert bhattacharyya(left, right) < 1e-8


def test_bhattacharyya_shifted_gaussians():
    # equal-variance Gaussians overlap at exp(-dmu^2 / (8 v))
    grid = Grid1D(-12.0, 14.0, 4001)
    p = gaussian_distribution(0.0, 1.0, grid)
    q = gaussian_distribution(2.0, 1.0, grid)
    assert abs(bhattacharyya(p, q) - math.exp(-0.5)) < 1e-4


def test_bhattacharyya_rejects_mismatched_grids():
    p = gaussian_distribution(0.0, 1.0, Grid1D(-5.0, 5.0, 101))
    q = gaussian_distribution(0.0, 1.0, Grid1D(-5.0, 5.0, 201))
    with pytest.raises(ValueError):
        bhattacharyya(p, q)


def test_outcome_distribution_validate():
    grid = Grid1D(-8.0, 8.0, 1601)
    gaussian_distribution(0.0, 1.0, grid).validate()
    bad = OutcomeDistribution(grid.points, grid.weights, np.zeros(grid.n))
    with pytest.raises(ValueError):
        bad.validate()


def test_husimi_vacuum_closed_form():
    lattice = ComplexLattice.square(5.0, 0.25)
    rho = np.zeros((20, 20), dtype=complex)
    rho[0, 0] = 1.0
    dist = husimi(rho, lattice)
    expected = np.exp(-np.abs(lattice.points) ** 2) / math.pi
    assert np.max(np.abs(dist.values - expected)) < 1e-8
    assert abs(dist.mass - 1.0) < 1e-4


def test_coherent_delta_overlap_near_ideal():
    res = coherent_delta_overlap(1.0)
    assert abs(res.value - IDEAL_DELTA) < 2e-3
    # frozen regression at default dim and lattice
    assert abs(res.value - 0.9428090627) < 1e-7
    assert res.meta["reference_mass"] == pytest.approx(1.0, abs=1e-4)


def test_coherent_delta_overlap_displacement_covariance():
    v0 = coherent_delta_overlap(0.0).value
    v1 = coherent_delta_overlap(1.0).value
    assert abs(v0 - v1) < 2e-3


def test_coherent_delta_overlap_refinement_stable():
    res = coherent_delta_overlap(1.0, refine=True)
    assert res.error_estimate is not None
    assert res.error_estimate < 5e-4


def test_coherent_x_exact_frozen_values():
    assert coherent_x_exact(1.0) == pytest.approx(0.9898464008, abs=1e-9)
    assert coherent_x_exact(0.03) == pytest.approx(0.6710737721, abs=1e-9)
    assert coherent_x_exact(1e-4) == pytest.approx(0.1681540639, abs=1e-9)
    with pytest.raises(ValueError):
        coherent_x_exact(0.0)


def test_coherent_x_numeric_matches_exact():
    for delta_sq in (1.0, 0.03):
        res = coherent_x_overlap(delta_sq)
        assert abs(res.value - res.meta["exact"]) < 1e-6


def test_coherent_x_numeric_translation_covariant():
    res = coherent_x_overlap(0.25, gamma=1.5 + 0.5j)
    assert abs(res.value - coherent_x_exact(0.25)) < 1e-6


def test_quadrature_analytic_endpoints():
    assert quadrature_overlap_analytic("XX", t=0.0) == pytest.approx(1.0)
    # the long-time limit of the XX case lands on the 8/9 variance ratio
    assert quadrature_overlap_analytic("XX", t=1e8) ** 4 == pytest.approx(
        8.0 / 9.0, abs=1e-6
    )
    assert quadrature_overlap_analytic("PX", t=1e8) == pytest.approx(1.0, abs=1e-6)
    assert quadrature_overlap_analytic("XP", t=0.0) == pytest.approx(
        quadrature_overlap_analytic("XP", t=7.0)
    )
    for t in (0.0, 1.0, 5.0):
        assert quadrature_overlap_analytic("PP", t=t) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        quadrature_overlap_analytic("XY")


@pytest.mark.parametrize(
    "case,kwargs",
    [
        ("XX", {"delta": 1.0, "sigma": 2.0, "t": 1.0}),
        ("PX", {"kappa": 2.0, "sigma": 1.0, "t": 0.0}),
        ("XP", {"delta": 2.0, "kappa": 1.0, "sigma": 1.0, "t": 5.0}),
        ("PP", {"kappa": 2.0, "sigma": 2.0, "t": 1.0}),
    ],
)
def test_quadrature_numeric_matches_analytic(case, kwargs):
    res = quadrature_overlap_numeric(case, **kwargs)
    assert abs(res.value - res.meta["analytic"]) < 1e-6


def test_quadrature_numeric_xp_time_independent():
    values = [quadrature_overlap_numeric("XP", t=t).value for t in (0.0, 1.0, 10.0)]
    assert max(values) - min(values) < 1e-4


def test_fock_overlap_vacuum_inside_first_bin():
    res = fock_overlap("2m^2", 0.0)
    assert abs(res.value - 1.0) < 1e-6


def test_fock_overlap_coarser_bins_less_invasive_at_gamma_two():
    fine = fock_overlap("2m^2", 2.0).value
    mid = fock_overlap("10m^2", 2.0).value
    coarse = fock_overlap("100m^2", 2.0).value
    assert coarse >= mid >= fine
    assert coarse > 0.999


def test_fock_overlap_full_number_readout_regression():
    res = fock_overlap("m", 2.0)
    assert abs(res.value - 0.551524) < 5e-4


def test_ring_overlap_small_width_regression():
    res = ring_overlap(0.5, 1.0)
    assert abs(res.value - 0.996658) < 1e-3
    assert res.meta["raw_defect"] is not None


def test_cell_overlap_shrinks_to_delta_value():
    values = [r.value for r in delta_limit_curve((1.0, 0.5, 0.25), 1.0)]
    assert values[0] > values[1] > values[2]
    assert abs(values[2] - IDEAL_DELTA) < 2e-3
    assert all(v > IDEAL_DELTA - 2e-3 for v in values)


def test_cell_overlap_meta_records_side():
    res = cell_overlap(1.0, 0.5)
    assert res.meta["side"] == 1.0
    assert 0.0 <= res.value <= 1.0 + 1e-9
