"""Macrorealism conditions on scenarios and on instrument pairs.

Statistical side: no-signaling-in-time (NSIT) residuals, arrow-of-time (AoT)
residuals, the three-time Leggett-Garg inequality and the no-invasive
correlation (NIC) condition, plus a bundle check that compares all seven
experiments of a three-slot scenario against the marginals of the full joint.

Operator side: an instrument-level NSIT residual that bounds the statistical
one uniformly over states, and commutator diagnostics that separate operator
commutation from statistical non-invasiveness.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from macroreal.hilbert import operator_norm, unitary_from_hamiltonian
from macroreal.instruments import KrausFamily
from macroreal.scenario import (
    Scenario,
    correlation,
    joint_distribution,
    marginalize,
    table_distance_sup,
    table_distance_tv,
)

DEFAULT_THRESHOLD = 1e-9


@dataclasses.dataclass(frozen=True)
class ConditionReport:
    """Outcome of a single condition test."""

    name: str
    residual: float
    threshold: float
    context: dict = dataclasses.field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.residual <= self.threshold

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "residual": float(self.residual),
            "threshold": float(self.threshold),
            "holds": bool(self.holds),
            "context": _json_safe(self.context),
        }


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def nsit_two_time(
    scenario: Scenario, i: int, j: int, threshold: float = DEFAULT_THRESHOLD
) -> ConditionReport:
    """NSIT_(i)j: measuring slot i must not shift the statistics at slot j."""
    if not 0 <= i < j < scenario.n_slots:
        raise ValueError(f"need slot indices i < j, got ({i}, {j})")
    alone = joint_distribution(scenario, (j,))
    pair = marginalize(joint_distribution(scenario, (i, j)), (j,))
    return ConditionReport(
        name=f"NSIT_({i}){j}",
        residual=table_distance_sup(alone, pair),
        threshold=threshold,
    )


def nsit_sandwich(scenario: Scenario, threshold: float = DEFAULT_THRESHOLD) -> ConditionReport:
    """NSIT_0(1)2 on a three-slot scenario: the middle slot must be ignorable."""
    _require_three_slots(scenario)
    pair = joint_distribution(scenario, (0, 2))
    full = marginalize(joint_distribution(scenario, (0, 1, 2)), (0, 2))
    return ConditionReport(
        name="NSIT_0(1)2",
        residual=table_distance_sup(pair, full),
        threshold=threshold,
    )


def nsit_leading(scenario: Scenario, threshold: float = DEFAULT_THRESHOLD) -> ConditionReport:
    """NSIT_(0)12 on a three-slot scenario: the first slot must be ignorable."""
    _require_three_slots(scenario)
    pair = joint_distribution(scenario, (1, 2))
    full = marginalize(joint_distribution(scenario, (0, 1, 2)), (1, 2))
    return ConditionReport(
        name="NSIT_(0)12",
        residual=table_distance_sup(pair, full),
        threshold=threshold,
    )


def aot_check(
    scenario: Scenario, i: int, j: int, threshold: float = DEFAULT_THRESHOLD
) -> ConditionReport:
    """AoT_i(j): a later measurement must not rewrite earlier statistics.

    Quantum instruments satisfy this identically (trace preservation), so the
    residual doubles as a sanity check on the numerics.
    """
    if not 0 <= i < j < scenario.n_slots:
        raise ValueError(f"need slot indices i < j, got ({i}, {j})")
    alone = joint_distribution(scenario, (i,))
    pair = marginalize(joint_distribution(scenario, (i, j)), (i,))
    return ConditionReport(
        name=f"AoT_{i}({j})",
        residual=table_distance_sup(alone, pair),
        threshold=threshold,
    )


def lgi_012(scenario: Scenario, threshold: float = DEFAULT_THRESHOLD) -> ConditionReport:
    """Three-time Leggett-Garg inequality C01 + C12 - C02 <= 1.

    Each correlator comes from its own two-slot experiment; outcomes must be
    labeled +-1. The residual is the amount by which the bound is exceeded.
    """
    _require_three_slots(scenario)
    _require_dichotomic(scenario)
    c01 = correlation(joint_distribution(scenario, (0, 1)), 0, 1)
    c12 = correlation(joint_distribution(scenario, (1, 2)), 1, 2)
    c02 = correlation(joint_distribution(scenario, (0, 2)), 0, 2)
    k = c01 + c12 - c02
    return ConditionReport(
        name="LGI_012",
        residual=max(0.0, k - 1.0),
        threshold=threshold,
        context={"K": k, "C01": c01, "C12": c12, "C02": c02},
    )


def nic_012(scenario: Scenario, threshold: float = DEFAULT_THRESHOLD) -> ConditionReport:
    """NIC_0(1)2: the outer correlator must not care about the middle slot."""
    _require_three_slots(scenario)
    _require_dichotomic(scenario, slots=(0, 2))
    bare = correlation(joint_distribution(scenario, (0, 2)), 0, 2)
    probed = correlation(joint_distribution(scenario, (0, 1, 2)), 0, 2)
    return ConditionReport(
        name="NIC_0(1)2",
        residual=abs(bare - probed),
        threshold=threshold,
        context={"C02": bare, "C02_with_middle": probed},
    )


@dataclasses.dataclass(frozen=True)
class MR012Report:
    """Bundle verdict for three-slot macrorealism.

    members holds the named condition reports; the marginal mismatch compares
    each of the six partial experiments against the corresponding marginal of
    the full three-slot joint (total variation and sup norm).
    """

    members: dict
    mismatch_tv: float
    mismatch_sup: float
    mismatch_threshold: float
    mismatch_detail: dict

    @property
    def holds(self) -> bool:
        if self.mismatch_tv > self.mismatch_threshold:
            return False
        return all(r.holds for r in self.members.values())

    @property
    def worst_residual(self) -> float:
        return max([r.residual for r in self.members.values()] + [self.mismatch_tv])

    def to_dict(self) -> dict:
        return {
            "members": {k: v.to_dict() for k, v in self.members.items()},
            "mismatch_tv": float(self.mismatch_tv),
            "mismatch_sup": float(self.mismatch_sup),
            "mismatch_threshold": float(self.mismatch_threshold),
            "mismatch_detail": _json_safe(self.mismatch_detail),
            "holds": bool(self.holds),
        }


def mr012_check(
    scenario: Scenario,
    threshold: float = DEFAULT_THRESHOLD,
    mismatch_threshold: float | None = None,
) -> MR012Report:
    """Full three-slot macrorealism bundle.

    Runs all seven experiments (each nonempty subset of the three slots) and
    evaluates the named conditions NSIT_(1)2, NSIT_0(1)2, NSIT_(0)12 and AoT,
    plus the marginal mismatch of the six partial experiments against the
    full joint.
    """
    _require_three_slots(scenario)
    if mismatch_threshold is None:
        mismatch_threshold = threshold
    subsets = [
        (0,),
        (1,),
        (2,),
        (0, 1),
        (0, 2),
        (1, 2),
        (0, 1, 2),
    ]
    tables = {s: joint_distribution(scenario, s) for s in subsets}
    full = tables[(0, 1, 2)]

    detail = {}
    sup = 0.0
    tv = 0.0
    for s in subsets[:-1]:
        m = marginalize(full, s)
        d_sup = table_distance_sup(tables[s], m)
        d_tv = table_distance_tv(tables[s], m)
        detail["P" + "".join(map(str, s))] = {"sup": d_sup, "tv": d_tv}
        sup = max(sup, d_sup)
        tv = max(tv, d_tv)

    members = {}
    members["NSIT_(1)2"] = ConditionReport(
        name="NSIT_(1)2",
        residual=table_distance_sup(
            tables[(2,)], marginalize(tables[(1, 2)], (2,))
        ),
        threshold=threshold,
    )
    members["NSIT_0(1)2"] = ConditionReport(
        name="NSIT_0(1)2",
        residual=table_distance_sup(tables[(0, 2)], marginalize(full, (0, 2))),
        threshold=threshold,
    )
    members["NSIT_(0)12"] = ConditionReport(
        name="NSIT_(0)12",
        residual=table_distance_sup(tables[(1, 2)], marginalize(full, (1, 2))),
        threshold=threshold,
    )
    aot = 0.0
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        d = table_distance_sup(
            tables[(i,)], marginalize(tables[(i, j)], (i,))
        )
        aot = max(aot, d)
    members["AoT"] = ConditionReport(name="AoT", residual=aot, threshold=threshold)

    return MR012Report(
        members=members,
        mismatch_tv=tv,
        mismatch_sup=sup,
        mismatch_threshold=mismatch_threshold,
        mismatch_detail=detail,
    )


def _require_three_slots(scenario: Scenario) -> None:
    if scenario.n_slots != 3:
        raise ValueError(f"this condition needs a 3-slot scenario, got {scenario.n_slots}")


def _require_dichotomic(scenario: Scenario, slots=None) -> None:
    for k in slots if slots is not None else range(scenario.n_slots):
        out = np.asarray(scenario.slots[k].instrument.outcomes)
        if out.shape != (2,) or set(np.asarray(out, dtype=float)) != {1.0, -1.0}:
            raise ValueError(f"slot {k} must have outcomes +1 and -1")


# ---------------------------------------------------------------------------
# Operator-level criteria


def nsit_operator_residual(
    first: KrausFamily,
    second: KrausFamily,
    between: np.ndarray | None = None,
    *,
    completeness_tol: float = 1e-6,
) -> float:
    """State-independent NSIT residual of `first` acting before `second`.

    For every outcome b of the later instrument the effective POVM element
    with and without the earlier nonselective measurement is compared:

        M_b = sum_a w_a A_a' E_b A_a  -  B_b' (sum_a w_a A_a' A_a) B_b

    with E_b = B_b' B_b conjugated through the interslot unitary when given.
    Returns the largest spectral norm over b; it upper-bounds the statistical
    NSIT residual for every input state.
    """
    if first.dim != second.dim:
        raise ValueError("instrument dimensions differ")
    for fam, role in ((first, "first"), (second, "second")):
        if fam.completeness_defect > completeness_tol:
            raise ValueError(
                f"{role} family completeness defect {fam.completeness_defect:.3g} "
                f"exceeds {completeness_tol:.3g}"
            )
    w = first.weights
    s_first = first.completeness_operator()
    diag_fast = first.kind == "diagonal"
    if diag_fast:
        # sum_a w_a A' E A reduces to a Hadamard product with the channel
        # kernel in the family eigenbasis, avoiding the per-outcome sum.
        kernel = np.einsum("a,ai,aj->ij", w, first.envelopes, first.envelopes)
        v = first.basis
    else:
        a_ops = first.dense_ops()
    worst = 0.0
    for b in range(second.n_outcomes):
        bb = second.op(b)
        if between is not None:
            bb = bb @ between
        e = bb.conj().T @ bb
        if diag_fast:
            if v is None:
                with_first = e * kernel
            else:
                with_first = v @ ((v.conj().T @ e @ v) * kernel) @ v.conj().T
        else:
            with_first = np.einsum(
                "a,aji,jk,akl->il", w, a_ops.conj(), e, a_ops, optimize=True
            )
        without = bb.conj().T @ s_first @ bb
        worst = max(worst, operator_norm(with_first - without))
    return worst


def commutator_tests(first: KrausFamily, second: KrausFamily) -> dict:
    """Commutator diagnostics for an instrument pair.

    pairwise: largest spectral norm of [A_a, B_b] over all outcome pairs.
    sandwich: largest norm of sum_a w_a A_a' [E_b, A_a] with E_b = B_b' B_b,
    the combination that actually enters the operator NSIT residual.
    """
    pairwise = 0.0
    for a in range(first.n_outcomes):
        aa = first.op(a)
        for b in range(second.n_outcomes):
            bb = second.op(b)
            pairwise = max(pairwise, operator_norm(aa @ bb - bb @ aa))
    sandwich = 0.0
    for b in range(second.n_outcomes):
        bb = second.op(b)
        e = bb.conj().T @ bb
        acc = np.zeros((first.dim, first.dim), dtype=complex)
        for a in range(first.n_outcomes):
            aa = first.op(a)
            acc += first.weights[a] * (aa.conj().T @ (e @ aa - aa @ e))
        sandwich = max(sandwich, operator_norm(acc))
    return {"pairwise": pairwise, "sandwich": sandwich}


def projective_necessity_check(
    first: KrausFamily,
    second: KrausFamily,
    *,
    tol: float = 1e-10,
) -> dict:
    """For projective pairs, non-invasiveness should mean exact commutation.

    Checks residual < tol against pairwise commutation < 100 tol and reports
    whether the two verdicts agree. Raises if either family is not projective.
    """
    for fam, role in ((first, "first"), (second, "second")):
        ops = fam.dense_ops()
        for i, p in enumerate(ops):
            if (
                operator_norm(p @ p - p) > 1e-10
                or operator_norm(p - p.conj().T) > 1e-10
            ):
                raise ValueError(f"{role} family element {i} is not a projector")
    residual = nsit_operator_residual(first, second)
    comm = commutator_tests(first, second)
    non_invasive = residual < tol
    commuting = comm["pairwise"] < 100.0 * tol
    return {
        "residual": residual,
        "pairwise_commutator": comm["pairwise"],
        "sandwich_commutator": comm["sandwich"],
        "non_invasive": non_invasive,
        "commuting": commuting,
        "equivalent": non_invasive == commuting,
        "tol": tol,
        "commutator_tol": 100.0 * tol,
    }


def classical_operator(
    candidate: KrausFamily, references, between: np.ndarray | None = None
) -> float:
    """Worst operator NSIT residual of a candidate against reference readouts.

    Both orders are tested for every reference: the candidate disturbing the
    reference and the reference disturbing the candidate.
    """
    refs = list(references)
    if not refs:
        raise ValueError("need at least one reference family")
    worst = 0.0
    for ref in refs:
        worst = max(worst, nsit_operator_residual(candidate, ref, between))
        worst = max(worst, nsit_operator_residual(ref, candidate, between))
    return worst


def classical_hamiltonian(
    candidate: KrausFamily,
    references,
    hamiltonian: np.ndarray,
    times,
) -> float:
    """classical_operator maximized over evolution intervals exp(-i H t)."""
    worst = 0.0
    for t in times:
        u = unitary_from_hamiltonian(hamiltonian, float(t))
        worst = max(worst, classical_operator(candidate, references, between=u))
    return worst


def reports_to_json(reports) -> list[dict]:
    return [r.to_dict() for r in reports]


def ranked_reports(reports) -> list[ConditionReport]:
    """Reports sorted by residual, largest first (for violation-first output)."""
    return sorted(reports, key=lambda r: (-r.residual, r.name))
