"""Two-path interferometer scenarios with closed-form condition residuals.

The interferometer is modeled as a qubit: basis state 0 is the path giving
outcome +1, basis state 1 the path giving outcome -1. Slot 0 measures before
the first beamsplitter, slot 1 between the beamsplitters, slot 2 at the end.

Four unitary conventions are provided because the relative phase placement
and the post-beamsplitter path relabeling differ between optical layouts.
The default 'crossed-p0' convention (mirror crossing after the second
beamsplitter, phase plate on path 0) is the one whose closed forms below are
exact; verify_lattice can recalibrate the choice automatically.
"""

from __future__ import annotations

import dataclasses
import math
import time as _time

import numpy as np
from scipy import optimize

from macroreal.conditions import DEFAULT_THRESHOLD, nsit_two_time
from macroreal.hilbert import DensityState
from macroreal.instruments import projective_family
from macroreal.scenario import (
    Scenario,
    Slot,
    correlation,
    joint_distribution,
    marginalize,
    table_distance_sup,
)

CONDITION_NAMES = (
    "NSIT_(0)1",
    "NSIT_(1)2",
    "NSIT_0(1)2",
    "NSIT_(0)12",
    "LGI_012",
    "AoT",
    "MR_012",
)


@dataclasses.dataclass(frozen=True)
class MZParams:
    """Interferometer setting: reflectivities, phase and initial qubit state.

    c is the off-diagonal element of the initial density matrix; None means
    the incoherent mixture diag(q, 1-q).
    """

    r1: float
    r2: float
    phi: float
    q: float = 0.5
    c: complex | None = None

    def __post_init__(self):
        for name in ("r1", "r2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {self.q}")
        if self.c is not None:
            limit = self.q * (1.0 - self.q)
            if abs(self.c) ** 2 > limit + 1e-12:
                raise ValueError(
                    f"|c|^2 = {abs(self.c) ** 2:.3g} exceeds q(1-q) = {limit:.3g}"
                )

    @property
    def coherence(self) -> complex:
        return 0j if self.c is None else complex(self.c)

    def describe(self) -> dict:
        d = {"r1": self.r1, "r2": self.r2, "phi": self.phi, "q": self.q}
        if self.c is None:
            d["c"] = None
        else:
            d["c"] = [complex(self.c).real, complex(self.c).imag]
        return d


def initial_state(params: MZParams) -> DensityState:
    c = params.coherence
    m = np.array([[params.q, c], [np.conj(c), 1.0 - params.q]], dtype=complex)
    return DensityState(m)


def beamsplitter(r: float) -> np.ndarray:
    """Lossless beamsplitter of reflectivity r, i-phase on the cross terms."""
    t = 1.0 - r
    return np.array(
        [
            [math.sqrt(t), 1j * math.sqrt(r)],
            [1j * math.sqrt(r), math.sqrt(t)],
        ]
    )


def phase_plate(phi: float, arm: int) -> np.ndarray:
    if arm == 0:
        return np.diag([np.exp(1j * phi), 1.0])
    return np.diag([1.0, np.exp(1j * phi)])


_SWAP = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def mz_unitaries(params: MZParams, convention: str = "crossed-p0"):
    """(U01, U12) for the chosen layout convention."""
    u01 = beamsplitter(params.r1)
    bs2 = beamsplitter(params.r2)
    plate = phase_plate(params.phi, 0 if convention.endswith("p0") else 1)
    if convention.startswith("crossed"):
        u12 = _SWAP @ bs2 @ plate
    elif convention.startswith("straight"):
        u12 = bs2 @ plate
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return u01, u12


CONVENTIONS = ("crossed-p0", "crossed-p1", "straight-p0", "straight-p1")


def which_path_family():
    """Projective path readout, outcome +1 for path 0 and -1 for path 1."""
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    return projective_family([p0, p1], [1, -1], label="which_path")


def mz_scenario(params: MZParams, convention: str = "crossed-p0") -> Scenario:
    u01, u12 = mz_unitaries(params, convention)
    fam = which_path_family()
    return Scenario(
        initial=initial_state(params),
        slots=(Slot(0.0, fam), Slot(1.0, fam), Slot(2.0, fam)),
        evolutions=(u01, u12),
    )


# ---------------------------------------------------------------------------
# Closed forms (exact for the 'crossed-p0' convention)


def lgi_k_value(params: MZParams) -> float:
    """Left side of the three-time Leggett-Garg inequality, state independent."""
    r1, r2 = params.r1, params.r2
    alpha = math.sqrt(r1 * r2 * (1.0 - r1) * (1.0 - r2))
    return 1.0 - 4.0 * (r1 + alpha * math.cos(params.phi) - r1 * r2)


def analytic_residuals(params: MZParams) -> dict:
    """Closed-form residuals for every lattice condition at this setting."""
    r1, r2, phi, q = params.r1, params.r2, params.phi, params.q
    c = params.coherence
    t1, t2 = 1.0 - r1, 1.0 - r2
    root1 = math.sqrt(r1 * t1)
    root2 = math.sqrt(r2 * t2)
    alpha = root1 * root2

    res_01 = 2.0 * root1 * abs(c.imag)
    res_12 = 2.0 * root2 * abs(
        (c.imag * (1.0 - 2.0 * r1) + root1 * (1.0 - 2.0 * q)) * math.cos(phi)
        + c.real * math.sin(phi)
    )
    res_sandwich = 2.0 * alpha * abs(math.cos(phi)) * max(q, 1.0 - q)
    res_leading = 2.0 * root1 * abs(c.imag) * max(r2, t2)
    k = lgi_k_value(params)
    res = {
        "NSIT_(0)1": res_01,
        "NSIT_(1)2": res_12,
        "NSIT_0(1)2": res_sandwich,
        "NSIT_(0)12": res_leading,
        "LGI_012": max(0.0, k - 1.0),
        "AoT": 0.0,
    }
    res["MR_012"] = max(res["NSIT_(1)2"], res["NSIT_0(1)2"], res["NSIT_(0)12"])
    return res


def numeric_residuals(params: MZParams, convention: str = "crossed-p0") -> dict:
    """Same conditions evaluated through the full scenario pipeline.

    All seven conditions are marginal comparisons and correlators over the
    seven experiments (one per nonempty slot subset), so those tables are
    computed once and every residual is read off them. Each pairwise table is
    its own experiment, not a marginal of the full joint.
    """
    sc = mz_scenario(params, convention)
    subsets = [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]
    tables = {s: joint_distribution(sc, s) for s in subsets}
    full = tables[(0, 1, 2)]

    res_01 = table_distance_sup(tables[(1,)], marginalize(tables[(0, 1)], (1,)))
    res_12 = table_distance_sup(tables[(2,)], marginalize(tables[(1, 2)], (2,)))
    res_sandwich = table_distance_sup(tables[(0, 2)], marginalize(full, (0, 2)))
    res_leading = table_distance_sup(tables[(1, 2)], marginalize(full, (1, 2)))
    aot = max(
        table_distance_sup(tables[(i,)], marginalize(tables[(i, j)], (i,)))
        for i, j in ((0, 1), (0, 2), (1, 2))
    )
    k = (
        correlation(tables[(0, 1)], 0, 1)
        + correlation(tables[(1, 2)], 1, 2)
        - correlation(tables[(0, 2)], 0, 2)
    )
    return {
        "NSIT_(0)1": res_01,
        "NSIT_(1)2": res_12,
        "NSIT_0(1)2": res_sandwich,
        "NSIT_(0)12": res_leading,
        "LGI_012": max(0.0, k - 1.0),
        "AoT": aot,
        # member max keeps the bundle verdict on the same sup-norm scale as
        # the closed forms; the TV mismatch stays inside mr012_check.
        "MR_012": max(res_12, res_sandwich, res_leading, aot),
        "_K": k,
    }


@dataclasses.dataclass
class LatticeReport:
    """Result of sweeping the closed forms against the numeric pipeline."""

    convention: str
    calibration: dict
    n_points: int
    n_comparisons: int
    n_skipped_guard: int
    mismatches: list
    max_formula_error: float
    threshold: float
    guard: float
    elapsed_s: float

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_dict(self) -> dict:
        return {
            "convention": self.convention,
            "calibration": self.calibration,
            "n_points": self.n_points,
            "n_comparisons": self.n_comparisons,
            "n_skipped_guard": self.n_skipped_guard,
            "n_mismatches": len(self.mismatches),
            "mismatches": self.mismatches[:50],
            "max_formula_error": self.max_formula_error,
            "threshold": self.threshold,
            "guard": self.guard,
            "elapsed_s": self.elapsed_s,
            "ok": self.ok,
        }


def default_state_grid():
    """Mixtures and superpositions exercising every condition branch."""
    states = []
    for q in (0.0, 0.3, 0.5):
        states.append({"q": q, "c": None})
    for q, c in (
        (0.5, 0.45),
        (0.5, 0.3j),
        (0.3, 0.2 + 0.35j),
        (0.5, -0.2 - 0.2j),
    ):
        states.append({"q": q, "c": c})
    return states


def verify_lattice(
    r_values=None,
    phi_values=None,
    states=None,
    *,
    r2_values=None,
    threshold: float = DEFAULT_THRESHOLD,
    guard: float = 1e-6,
    convention: str | None = None,
    collect_rows: bool = False,
):
    """Check closed-form verdicts against the numeric pipeline on a lattice.

    Every (r1, r2, phi, state) combination is evaluated both ways; verdicts
    are compared wherever the closed-form residual sits clear of the verdict
    boundary by at least the guard band. r2_values defaults to r_values.
    With convention=None the layout is calibrated first on a few probe points.

    Returns a LatticeReport, plus the per-point row dicts when collect_rows.
    """
    t0 = _time.perf_counter()
    if r_values is None:
        r_values = np.linspace(0.0, 1.0, 11)
    if r2_values is None:
        r2_values = r_values
    if phi_values is None:
        phi_values = np.linspace(0.0, 2.0 * math.pi, 12, endpoint=False)
    if states is None:
        states = default_state_grid()

    calibration = {}
    if convention is None:
        convention, calibration = calibrate_convention()

    mismatches = []
    rows = []
    n_points = 0
    n_comp = 0
    n_skip = 0
    max_err = 0.0
    for r1 in r_values:
        for r2 in r2_values:
            for phi in phi_values:
                for st in states:
                    params = MZParams(float(r1), float(r2), float(phi), st["q"], st["c"])
                    ana = analytic_residuals(params)
                    num = numeric_residuals(params, convention)
                    n_points += 1
                    row = {"params": params.describe()}
                    for name in CONDITION_NAMES:
                        a, n = ana[name], num[name]
                        max_err = max(max_err, abs(a - n))
                        verdict_a = a <= threshold
                        verdict_n = n <= threshold
                        row[name] = {"analytic": a, "numeric": n}
                        if threshold < a < guard:
                            n_skip += 1
                            continue
                        n_comp += 1
                        if verdict_a != verdict_n:
                            mismatches.append(
                                {
                                    "params": params.describe(),
                                    "condition": name,
                                    "analytic": a,
                                    "numeric": n,
                                }
                            )
                    if collect_rows:
                        rows.append(row)
    report = LatticeReport(
        convention=convention,
        calibration=calibration,
        n_points=n_points,
        n_comparisons=n_comp,
        n_skipped_guard=n_skip,
        mismatches=mismatches,
        max_formula_error=max_err,
        threshold=threshold,
        guard=guard,
        elapsed_s=_time.perf_counter() - t0,
    )
    return (report, rows) if collect_rows else report


def calibrate_convention(probe_points=None):
    """Pick the layout convention whose closed forms match numerically.

    Evaluates a handful of probe settings under every convention and returns
    the one with the smallest worst-case formula error, with the error table
    for the report.
    """
    if probe_points is None:
        probe_points = [
            MZParams(0.3, 0.6, 0.7, 0.4, 0.2 + 0.3j),
            MZParams(0.25, 0.75, math.pi, 0.5, None),
            MZParams(0.5, 0.5, 1.1, 0.5, 0.45),
            MZParams(0.7, 0.2, 2.0, 0.2, 0.1 - 0.3j),
        ]
    errors = {}
    for conv in CONVENTIONS:
        worst = 0.0
        for p in probe_points:
            ana = analytic_residuals(p)
            num = numeric_residuals(p, conv)
            for name in CONDITION_NAMES:
                worst = max(worst, abs(ana[name] - num[name]))
        errors[conv] = worst
    best = min(errors, key=errors.get)
    return best, {"errors": errors, "chosen": best}


def lgi_max_search(
    n_grid: int = 41, *, refine: bool = True, convention: str = "crossed-p0"
) -> dict:
    """Locate the largest three-time Leggett-Garg value over all settings.

    Coarse grid over (r1, r2, phi) on the closed form, optional Nelder-Mead
    refinement, and a numeric cross-check of the winner through the scenario
    pipeline. The state does not enter: the correlators are state independent.
    """
    rs = np.linspace(0.0, 1.0, n_grid)
    phis = np.linspace(0.0, 2.0 * math.pi, 2 * n_grid, endpoint=False)
    best = (-np.inf, None)
    for r1 in rs:
        for r2 in rs:
            # cos(phi) = -1 maximizes K whenever alpha > 0; scanning phi anyway
            # keeps the search honest about the phase dependence.
            for phi in phis:
                k = lgi_k_value(MZParams(float(r1), float(r2), float(phi)))
                if k > best[0]:
                    best = (k, (float(r1), float(r2), float(phi)))
    k_grid, (r1, r2, phi) = best
    result = {"grid_K": k_grid, "grid_params": {"r1": r1, "r2": r2, "phi": phi}}
    if refine:

        def neg_k(v):
            r1c = min(max(v[0], 0.0), 1.0)
            r2c = min(max(v[1], 0.0), 1.0)
            return -lgi_k_value(MZParams(r1c, r2c, v[2]))

        opt = optimize.minimize(
            neg_k, [r1, r2, phi], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12}
        )
        r1, r2, phi = float(min(max(opt.x[0], 0.0), 1.0)), float(
            min(max(opt.x[1], 0.0), 1.0)
        ), float(opt.x[2])
    params = MZParams(r1, r2, phi)
    k_analytic = lgi_k_value(params)
    k_numeric = numeric_residuals(params, convention)["_K"]
    return {
        **result,
        "K": k_analytic,
        "K_numeric": k_numeric,
        "params": {"r1": r1, "r2": r2, "phi": phi},
        "refined": bool(refine),
    }


def two_time_counterexample_search(step: float = 0.05) -> dict:
    """Find settings where all two-time NSIT conditions hold but the bundle fails.

    Scans balanced-reflectivity superposition states: the two-time residuals
    vanish when c is real and phi = 0, while the sandwich condition keeps a
    finite residual proportional to the interference visibility.
    """
    best = None
    for cre in np.arange(0.05, 0.5, step):
        params = MZParams(0.5, 0.5, 0.0, 0.5, float(cre))
        ana = analytic_residuals(params)
        two_time = max(ana["NSIT_(0)1"], ana["NSIT_(1)2"], _nsit02_residual(params))
        if two_time < 1e-12:
            score = ana["NSIT_0(1)2"]
            if best is None or score > best["sandwich"]:
                best = {
                    "params": params.describe(),
                    "two_time_max": two_time,
                    "sandwich": score,
                }
    return best


def _nsit02_residual(params: MZParams) -> float:
    """Numeric NSIT_(0)2 residual (no tidy closed form is needed for it)."""
    sc = mz_scenario(params)
    return nsit_two_time(sc, 0, 2).residual
