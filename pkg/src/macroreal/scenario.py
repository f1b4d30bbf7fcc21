"""Sequential measurement scenarios and their joint outcome tables.

A scenario is an initial state, an ordered list of measurement slots and the
unitaries that propagate the system between neighboring slots. Any subset of
slots can be measured; unmeasured slots contribute no update at all, which is
what the no-signaling-in-time conditions probe.
"""

from __future__ import annotations

import dataclasses
import itertools
import json

import numpy as np

from macroreal.hilbert import DensityState, as_operator, is_unitary
from macroreal.instruments import KrausFamily


@dataclasses.dataclass(frozen=True)
class Slot:
    """One measurement opportunity: a time label and the instrument used there."""

    time: float
    instrument: KrausFamily


@dataclasses.dataclass(frozen=True)
class Scenario:
    initial: DensityState
    slots: tuple[Slot, ...]
    evolutions: tuple[np.ndarray, ...]

    def __post_init__(self):
        slots = tuple(self.slots)
        evos = tuple(as_operator(u) for u in self.evolutions)
        if len(slots) < 1:
            raise ValueError("a scenario needs at least one slot")
        if len(evos) != len(slots) - 1:
            raise ValueError(
                f"need {len(slots) - 1} evolutions for {len(slots)} slots, got {len(evos)}"
            )
        d = self.initial.dim
        for k, s in enumerate(slots):
            if s.instrument.dim != d:
                raise ValueError(f"slot {k} instrument dimension mismatch")
        for k, u in enumerate(evos):
            if u.shape != (d, d):
                raise ValueError(f"evolution {k} dimension mismatch")
            if not is_unitary(u, 1e-10):
                raise ValueError(f"evolution {k} is not unitary within 1e-10")
        times = [s.time for s in slots]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("slot times must be strictly increasing")
        object.__setattr__(self, "slots", slots)
        object.__setattr__(self, "evolutions", evos)

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    @property
    def dim(self) -> int:
        return self.initial.dim


def scenario_from_hamiltonian(initial: DensityState, slots, hamiltonian) -> Scenario:
    """Build a scenario whose between-slot unitaries come from one Hamiltonian."""
    from macroreal.hilbert import unitary_from_hamiltonian

    slots = tuple(slots)
    evos = []
    for s0, s1 in zip(slots, slots[1:]):
        evos.append(unitary_from_hamiltonian(hamiltonian, s1.time - s0.time))
    return Scenario(initial, slots, tuple(evos))


@dataclasses.dataclass(frozen=True)
class ProbabilityTable:
    """Joint distribution over the outcomes of the measured slots.

    values[i0, i1, ...] is the probability (density times outcome weights)
    of the outcome combination indexed along each measured slot's axis.
    """

    slots: tuple[int, ...]
    outcomes: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]
    values: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.values.sum())

    def validate(self, mass_tol: float = 1e-9) -> None:
        if np.any(self.values < -1e-12):
            raise ValueError("negative probability in table")
        if abs(self.mass - 1.0) > mass_tol:
            raise ValueError(f"table mass {self.mass!r} differs from 1")

    def axis_of(self, slot: int) -> int:
        return self.slots.index(slot)


def joint_distribution(scenario: Scenario, measured=None) -> ProbabilityTable:
    """Run the scenario measuring only the listed slots (all slots by default).

    Branches are propagated as a stacked batch of conditional density matrices,
    one per outcome combination so far; unmeasured slots apply no map.
    """
    if measured is None:
        measured = tuple(range(scenario.n_slots))
    measured = tuple(sorted(measured))
    if any(m < 0 or m >= scenario.n_slots for m in measured):
        raise ValueError(f"measured slots {measured} out of range")
    if len(set(measured)) != len(measured):
        raise ValueError("measured slots must be distinct")
    d = scenario.dim
    branches = scenario.initial.matrix[None, :, :]
    shape = []
    for k in range(scenario.n_slots):
        if k > 0:
            u = scenario.evolutions[k - 1]
            branches = np.einsum("ij,njk,lk->nil", u, branches, u.conj(), optimize=True)
        if k in measured:
            fam = scenario.slots[k].instrument
            ops = fam.dense_ops()
            branches = np.einsum(
                "aij,njk,alk->nail", ops, branches, ops.conj(), optimize=True
            )
            branches = branches.reshape(-1, d, d)
            shape.append(fam.n_outcomes)
    traces = np.einsum("nii->n", branches).real
    fams = [scenario.slots[k].instrument for k in measured]
    values = traces.reshape(shape if shape else (1,))
    if fams:
        wgrid = np.ones(())
        for f in fams:
            wgrid = np.multiply.outer(wgrid, f.weights)
        values = values * wgrid
    return ProbabilityTable(
        slots=measured,
        outcomes=tuple(np.asarray(f.outcomes) for f in fams),
        weights=tuple(np.asarray(f.weights) for f in fams),
        values=values,
    )


def marginalize(table: ProbabilityTable, keep) -> ProbabilityTable:
    """Sum out every measured slot not in keep."""
    keep = tuple(sorted(keep))
    for s in keep:
        if s not in table.slots:
            raise ValueError(f"slot {s} is not part of this table")
    drop_axes = tuple(i for i, s in enumerate(table.slots) if s not in keep)
    values = table.values.sum(axis=drop_axes) if drop_axes else table.values
    sel = [i for i, s in enumerate(table.slots) if s in keep]
    return ProbabilityTable(
        slots=keep,
        outcomes=tuple(table.outcomes[i] for i in sel),
        weights=tuple(table.weights[i] for i in sel),
        values=values,
    )


def table_distance_sup(a: ProbabilityTable, b: ProbabilityTable) -> float:
    """Largest absolute probability difference between two same-shaped tables."""
    _check_compatible(a, b)
    return float(np.max(np.abs(a.values - b.values)))


def table_distance_tv(a: ProbabilityTable, b: ProbabilityTable) -> float:
    """Total variation distance, half the summed absolute difference."""
    _check_compatible(a, b)
    return float(0.5 * np.sum(np.abs(a.values - b.values)))


def _check_compatible(a: ProbabilityTable, b: ProbabilityTable) -> None:
    if a.slots != b.slots or a.values.shape != b.values.shape:
        raise ValueError(
            f"tables are not comparable: slots {a.slots} vs {b.slots}, "
            f"shapes {a.values.shape} vs {b.values.shape}"
        )


def correlation(table: ProbabilityTable, slot_i: int, slot_j: int) -> float:
    """Two-time correlator <q_i q_j> for numeric outcome labels."""
    t = marginalize(table, (slot_i, slot_j))
    oi = np.asarray(t.outcomes[0], dtype=float)
    oj = np.asarray(t.outcomes[1], dtype=float)
    return float(np.einsum("i,ij,j->", oi, t.values, oj))


def expectation(table: ProbabilityTable, slot: int) -> float:
    t = marginalize(table, (slot,))
    return float(np.dot(np.asarray(t.outcomes[0], dtype=float), t.values))


def table_rows(table: ProbabilityTable):
    """Iterate (outcome tuple, probability) rows in deterministic axis order."""
    idx_iter = itertools.product(*[range(len(o)) for o in table.outcomes])
    for idx in idx_iter:
        outs = tuple(table.outcomes[k][i] for k, i in enumerate(idx))
        yield outs, float(table.values[idx])


def scenario_to_json(scenario: Scenario) -> dict:
    return {
        "initial": {
            "re": scenario.initial.matrix.real.tolist(),
            "im": scenario.initial.matrix.imag.tolist(),
        },
        "slots": [
            {"time": s.time, "instrument": s.instrument.to_json()} for s in scenario.slots
        ],
        "evolutions": [
            {"re": u.real.tolist(), "im": u.imag.tolist()} for u in scenario.evolutions
        ],
    }


def scenario_from_json(data: dict) -> Scenario:
    init = DensityState(
        np.asarray(data["initial"]["re"], dtype=float)
        + 1j * np.asarray(data["initial"]["im"], dtype=float)
    )
    slots = tuple(
        Slot(time=float(s["time"]), instrument=KrausFamily.from_json(s["instrument"]))
        for s in data["slots"]
    )
    evos = tuple(
        np.asarray(u["re"], dtype=float) + 1j * np.asarray(u["im"], dtype=float)
        for u in data["evolutions"]
    )
    return Scenario(init, slots, evos)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_json(json.load(fh))


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_json(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")
