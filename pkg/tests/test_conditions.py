import math

import numpy as np
import pytest

from helpers import random_scenario
from macroreal.conditions import (
    ConditionReport,
    aot_check,
    classical_hamiltonian,
    classical_operator,
    commutator_tests,
    lgi_012,
    mr012_check,
    nic_012,
    nsit_leading,
    nsit_operator_residual,
    nsit_sandwich,
    nsit_two_time,
    projective_necessity_check,
    ranked_reports,
)
from macroreal.hilbert import DensityState, number_operator
from macroreal.instruments import (
    KrausFamily,
    gaussian_p_family,
    gaussian_x_family,
    identity_family,
    projective_family,
    single_kraus_family,
)
from macroreal.scenario import Scenario, Slot

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1j], [1j, 0.0]])
SZ = np.diag([1.0, -1.0]).astype(complex)


def splitter(r):
    t = 1.0 - r
    return np.array(
        [[math.sqrt(t), 1j * math.sqrt(r)], [1j * math.sqrt(r), math.sqrt(t)]]
    )


def path_family():
    p0 = np.diag([1.0, 0.0]).astype(complex)
    return projective_family([p0, np.eye(2) - p0], [1, -1])


def interferometer_scenario(r1, r2, phi, q, c):
    swap = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    u01 = splitter(r1)
    u12 = swap @ splitter(r2) @ np.diag([np.exp(1j * phi), 1.0])
    init = DensityState(np.array([[q, c], [np.conj(c), 1.0 - q]], dtype=complex))
    fam = path_family()
    return Scenario(init, (Slot(0.0, fam), Slot(1.0, fam), Slot(2.0, fam)), (u01, u12))


def test_condition_report_holds():
    r = ConditionReport("X", residual=1e-12, threshold=1e-9)
    assert r.holds
    assert not ConditionReport("X", residual=1e-3, threshold=1e-9).holds
    d = r.to_dict()
    assert d["holds"] is True


def test_nsit_two_time_imaginary_coherence():
    # first-slot dephasing shifts later statistics by 2 sqrt(r t) |Im c|
    sc = interferometer_scenario(0.5, 0.5, 0.0, 0.5, 0.3j)
    rep = nsit_two_time(sc, 0, 1)
    assert rep.name == "NSIT_(0)1"
    assert abs(rep.residual - 0.3) < 1e-12
    assert not rep.holds


def test_nsit_sandwich_trivial_middle():
    fam = path_family()
    init = DensityState(np.array([[0.5, 0.45], [0.45, 0.5]], dtype=complex))
    sc = Scenario(
        init,
        (Slot(0.0, fam), Slot(1.0, identity_family(2)), Slot(2.0, fam)),
        (splitter(0.3), splitter(0.7)),
    )
    assert nsit_sandwich(sc).residual < 1e-14


def test_aot_is_automatic():
    rng = np.random.default_rng(21)
    for _ in range(5):
        sc = random_scenario(rng, dim=3)
        for i, j in [(0, 1), (0, 2), (1, 2)]:
            assert aot_check(sc, i, j).residual < 1e-13


def test_lgi_at_known_maximum():
    sc = interferometer_scenario(0.25, 0.75, math.pi, 0.5, 0.0)
    rep = lgi_012(sc)
    assert abs(rep.context["K"] - 1.5) < 1e-12
    assert abs(rep.residual - 0.5) < 1e-12


def test_lgi_requires_dichotomic():
    rng = np.random.default_rng(22)
    sc = random_scenario(rng, dim=3, dichotomic=False)
    with pytest.raises(ValueError):
        lgi_012(sc)


def test_nic_bounded_by_sandwich():
    rng = np.random.default_rng(23)
    for _ in range(40):
        sc = random_scenario(rng, dim=2)
        nic = nic_012(sc).residual
        sand = nsit_sandwich(sc).residual
        assert nic <= 4.0 * sand + 1e-12


def test_mr_bundle_on_classical_scenario():
    rng = np.random.default_rng(24)
    for dim in (2, 3):
        sc = random_scenario(rng, dim=dim, kind="classical")
        rep = mr012_check(sc)
        assert rep.holds
        assert rep.worst_residual < 1e-13
        assert rep.mismatch_tv < 1e-13


def test_mr_bundle_flags_interference():
    sc = interferometer_scenario(0.5, 0.5, 0.0, 0.5, 0.45)
    rep = mr012_check(sc, mismatch_threshold=1e-3)
    assert not rep.holds
    assert rep.members["NSIT_0(1)2"].residual > 0.2
    d = rep.to_dict()
    assert d["holds"] is False


def test_mr_bundle_needs_three_slots():
    fam = path_family()
    init = DensityState(np.eye(2) / 2)
    sc = Scenario(init, (Slot(0.0, fam), Slot(1.0, fam)), (np.eye(2, dtype=complex),))
    with pytest.raises(ValueError):
        mr012_check(sc)


def sz_projectors():
    return projective_family(
        [np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)],
        [1, -1],
    )


def sx_projectors():
    plus = 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex)
    return projective_family([plus, np.eye(2) - plus], [1, -1])


def test_operator_residual_anticommuting_projectors():
    r = nsit_operator_residual(sz_projectors(), sx_projectors())
    assert abs(r - 0.5) < 1e-12


def test_operator_residual_commuting_is_zero():
    r = nsit_operator_residual(sz_projectors(), sz_projectors())
    assert r < 1e-14


def test_operator_residual_bounds_statistical_residual():
    rng = np.random.default_rng(25)
    first, second = sz_projectors(), sx_projectors()
    bound = nsit_operator_residual(first, second)
    for _ in range(25):
        z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        m = z @ z.conj().T
        rho = DensityState(m / np.trace(m).real)
        sc = Scenario(
            rho,
            (Slot(0.0, first), Slot(1.0, second)),
            (np.eye(2, dtype=complex),),
        )
        assert nsit_two_time(sc, 0, 1).residual <= bound + 1e-12


def test_operator_residual_rejects_incomplete():
    ops = np.zeros((1, 2, 2), dtype=complex)
    ops[0, 0, 0] = 1.0
    partial = KrausFamily(
        label="partial", outcomes=np.array([0]), weights=np.ones(1), kind="dense", ops=ops
    )
    with pytest.raises(ValueError):
        nsit_operator_residual(partial, sz_projectors())


def test_unitary_kraus_commutator_triple():
    # the instructive pair: maximally noncommuting Kraus operators whose
    # instruments are nevertheless mutually non-invasive
    a = single_kraus_family(SX, "sx")
    b = single_kraus_family(SY, "sy")
    comm = commutator_tests(a, b)
    assert abs(comm["pairwise"] - 2.0) < 1e-12
    assert comm["sandwich"] < 1e-14
    assert nsit_operator_residual(a, b) < 1e-14


def test_projective_necessity_both_ways():
    rep = projective_necessity_check(sz_projectors(), sz_projectors())
    assert rep["non_invasive"] and rep["commuting"] and rep["equivalent"]
    rep2 = projective_necessity_check(sz_projectors(), sx_projectors())
    assert not rep2["non_invasive"] and not rep2["commuting"]
    assert rep2["equivalent"]
    with pytest.raises(ValueError):
        projective_necessity_check(single_kraus_family(SX), sz_projectors())


def test_classical_operator_coarse_quadratures_decrease():
    dim = 40
    r25 = classical_operator(
        gaussian_x_family(5.0, dim), [gaussian_p_family(5.0, dim)]
    )
    r100 = classical_operator(
        gaussian_x_family(10.0, dim), [gaussian_p_family(10.0, dim)]
    )
    assert 1e-3 < r25 < 0.1
    assert r100 < r25
    assert r100 < 5e-3


def test_classical_hamiltonian_sees_rotation():
    dim = 24
    fam = gaussian_x_family(4.0, dim)
    h = number_operator(dim)
    quiet = classical_hamiltonian(fam, [fam], h, [0.0])
    rotated = classical_hamiltonian(fam, [fam], h, [0.0, math.pi / 2.0])
    assert quiet < 1e-10
    assert rotated > 10.0 * max(quiet, 1e-12)


def test_ranked_reports():
    reports = [
        ConditionReport("a", 0.1, 1e-9),
        ConditionReport("b", 0.5, 1e-9),
        ConditionReport("c", 0.0, 1e-9),
    ]
    ranked = ranked_reports(reports)
    assert [r.name for r in ranked] == ["b", "a", "c"]
