"""Measurement instruments as weighted Kraus families.

A family holds one Kraus operator per outcome plus a quadrature weight for
that outcome (1 for discrete outcomes, the cell measure for discretized
continuous outcomes). Three internal representations keep large families
affordable:

  dense     explicit (n, d, d) stack
  diagonal  A_a = V diag(env_a) V' with real envelopes env_a
  rank1     A_a = scale_a |left_a><right_a|

The probability density of outcome a on state rho is w_a tr(A_a' A_a rho)
and the non-selective channel is rho -> sum_a w_a A_a rho A_a'.
"""

from __future__ import annotations

import dataclasses
import math
import re as _re

import numpy as np

from macroreal.hilbert import (
    as_operator,
    coherent_amplitudes,
    operator_norm,
    quadrature_operators,
)


@dataclasses.dataclass(frozen=True)
class Grid1D:
    """Uniform 1-d outcome grid, endpoints included."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not (self.hi > self.lo and self.n >= 2):
            raise ValueError("grid needs hi > lo and at least 2 points")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, self.step)

    def describe(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "n": self.n}


@dataclasses.dataclass(frozen=True)
class ComplexLattice:
    """Uniform square lattice in the complex plane with cell weight step^2."""

    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float
    step: float

    @classmethod
    def square(cls, radius: float, step: float, center: complex = 0j) -> "ComplexLattice":
        c = complex(center)
        return cls(
            c.real - radius, c.real + radius, c.imag - radius, c.imag + radius, step
        )

    @property
    def re_axis(self) -> np.ndarray:
        n = int(round((self.re_hi - self.re_lo) / self.step)) + 1
        return self.re_lo + self.step * np.arange(n)

    @property
    def im_axis(self) -> np.ndarray:
        n = int(round((self.im_hi - self.im_lo) / self.step)) + 1
        return self.im_lo + self.step * np.arange(n)

    @property
    def points(self) -> np.ndarray:
        re = self.re_axis
        im = self.im_axis
        return (re[:, None] + 1j * im[None, :]).ravel()

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.re_axis.size * self.im_axis.size, self.step**2)

    def describe(self) -> dict:
        return {
            "re_lo": self.re_lo,
            "re_hi": self.re_hi,
            "im_lo": self.im_lo,
            "im_hi": self.im_hi,
            "step": self.step,
        }


@dataclasses.dataclass
class KrausFamily:
    """Weighted Kraus family over a discrete or discretized outcome set."""

    label: str
    outcomes: np.ndarray
    weights: np.ndarray
    kind: str = "dense"
    ops: np.ndarray | None = None
    basis: np.ndarray | None = None  # diagonal kind; None means identity basis
    envelopes: np.ndarray | None = None  # (n, d) real, diagonal kind
    left: np.ndarray | None = None  # (d, n), rank1 kind
    right: np.ndarray | None = None
    scale: np.ndarray | None = None
    meta: dict = dataclasses.field(default_factory=dict)
    completeness_defect: float = dataclasses.field(init=False, default=0.0)

    def __post_init__(self):
        self.outcomes = np.asarray(self.outcomes)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.outcomes.shape[0],):
            raise ValueError("weights must match outcomes one to one")
        if np.any(self.weights <= 0):
            raise ValueError("outcome weights must be positive")
        if self.kind == "dense":
            self.ops = np.asarray(self.ops, dtype=complex)
            if self.ops.ndim != 3 or self.ops.shape[0] != self.n_outcomes:
                raise ValueError("dense family needs an (n, d, d) operator stack")
        elif self.kind == "diagonal":
            self.envelopes = np.asarray(self.envelopes, dtype=float)
            if self.envelopes.ndim != 2 or self.envelopes.shape[0] != self.n_outcomes:
                raise ValueError("diagonal family needs (n, d) envelopes")
            if self.basis is not None:
                self.basis = as_operator(self.basis)
        elif self.kind == "rank1":
            self.left = np.asarray(self.left, dtype=complex)
            self.right = np.asarray(self.right, dtype=complex)
            self.scale = np.asarray(self.scale, dtype=float)
            if self.left.shape != self.right.shape or self.left.ndim != 2:
                raise ValueError("rank1 family needs matching (d, n) column stacks")
            if self.scale.shape != (self.n_outcomes,):
                raise ValueError("rank1 scale must match outcomes")
        else:
            raise ValueError(f"unknown family kind {self.kind!r}")
        self.completeness_defect = operator_norm(
            self.completeness_operator() - np.eye(self.dim)
        )

    @property
    def n_outcomes(self) -> int:
        return self.outcomes.shape[0]

    @property
    def dim(self) -> int:
        if self.kind == "dense":
            return self.ops.shape[1]
        if self.kind == "diagonal":
            return self.envelopes.shape[1]
        return self.left.shape[0]

    def op(self, i: int) -> np.ndarray:
        """Materialize the Kraus operator for outcome index i."""
        if self.kind == "dense":
            return self.ops[i]
        if self.kind == "diagonal":
            if self.basis is None:
                return np.diag(self.envelopes[i]).astype(complex)
            v = self.basis
            return (v * self.envelopes[i]) @ v.conj().T
        return self.scale[i] * np.outer(self.left[:, i], self.right[:, i].conj())

    def dense_ops(self) -> np.ndarray:
        if self.kind == "dense":
            return self.ops
        return np.stack([self.op(i) for i in range(self.n_outcomes)])

    def completeness_operator(self) -> np.ndarray:
        """S = sum_a w_a A_a' A_a, which should be the identity."""
        if self.kind == "dense":
            return np.einsum(
                "a,aji,ajk->ik", self.weights, self.ops.conj(), self.ops, optimize=True
            )
        if self.kind == "diagonal":
            diag = self.weights @ self.envelopes**2
            if self.basis is None:
                return np.diag(diag).astype(complex)
            return (self.basis * diag) @ self.basis.conj().T
        coef = self.weights * self.scale**2 * np.einsum(
            "ia,ia->a", self.left.conj(), self.left
        ).real
        return (self.right * coef) @ self.right.conj().T

    def probability_density(self, rho: np.ndarray) -> np.ndarray:
        """Outcome density p_a = w_a tr(A_a' A_a rho)."""
        if self.kind == "dense":
            p = np.einsum(
                "aji,ajk,ki->a", self.ops.conj(), self.ops, rho, optimize=True
            ).real
        elif self.kind == "diagonal":
            if self.basis is None:
                d = np.diag(rho).real
            else:
                d = np.einsum(
                    "ia,ij,ja->a", self.basis.conj(), rho, self.basis, optimize=True
                ).real
            p = self.envelopes**2 @ d
        else:
            q = np.einsum(
                "ia,ij,ja->a", self.right.conj(), rho, self.right, optimize=True
            ).real
            norms = np.einsum("ia,ia->a", self.left.conj(), self.left).real
            p = self.scale**2 * norms * q
        return self.weights * p

    def channel(self, rho: np.ndarray) -> np.ndarray:
        """Non-selective update sum_a w_a A_a rho A_a'."""
        if self.kind == "dense":
            return np.einsum(
                "a,aij,jk,alk->il",
                self.weights,
                self.ops,
                rho,
                self.ops.conj(),
                optimize=True,
            )
        if self.kind == "diagonal":
            kernel = np.einsum("a,ai,aj->ij", self.weights, self.envelopes, self.envelopes)
            if self.basis is None:
                return rho * kernel
            v = self.basis
            return v @ ((v.conj().T @ rho @ v) * kernel) @ v.conj().T
        q = np.einsum(
            "ia,ij,ja->a", self.right.conj(), rho, self.right, optimize=True
        ).real
        coef = self.weights * self.scale**2 * q
        return (self.left * coef) @ self.left.conj().T

    def describe(self) -> dict:
        """JSON-safe descriptor: label, outcome grid and parameters, no matrices."""
        out = self.outcomes
        if np.iscomplexobj(out):
            summary = {
                "n": int(out.size),
                "re_range": [float(out.real.min()), float(out.real.max())],
                "im_range": [float(out.imag.min()), float(out.imag.max())],
            }
        else:
            summary = {
                "n": int(out.size),
                "min": float(np.min(out)),
                "max": float(np.max(out)),
            }
        return {
            "label": self.label,
            "kind": self.kind,
            "dim": self.dim,
            "outcomes": summary,
            "completeness_defect": float(self.completeness_defect),
            "params": dict(self.meta),
        }

    def to_json(self) -> dict:
        """Full serialization including operators (intended for small families)."""
        ops = self.dense_ops()
        return {
            "label": self.label,
            "outcomes": _array_to_json(self.outcomes),
            "weights": [float(w) for w in self.weights],
            "ops": [_array_to_json(a) for a in ops],
        }

    @classmethod
    def from_json(cls, data: dict) -> "KrausFamily":
        return cls(
            label=data["label"],
            outcomes=_array_from_json(data["outcomes"]),
            weights=np.asarray(data["weights"], dtype=float),
            kind="dense",
            ops=np.stack([_array_from_json(a) for a in data["ops"]]),
        )


def _array_to_json(a: np.ndarray):
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return {"re": a.real.tolist(), "im": a.imag.tolist()}
    return a.tolist()


def _array_from_json(data):
    if isinstance(data, dict):
        return np.asarray(data["re"], dtype=float) + 1j * np.asarray(
            data["im"], dtype=float
        )
    return np.asarray(data)


def identity_family(dim: int) -> KrausFamily:
    """Trivial one-outcome family that leaves every state untouched."""
    return KrausFamily(
        label="identity",
        outcomes=np.array([0]),
        weights=np.array([1.0]),
        kind="dense",
        ops=np.eye(dim, dtype=complex)[None, :, :],
    )


def projective_family(
    projectors, outcomes, label: str = "projective", *, atol: float = 1e-10
) -> KrausFamily:
    """Lueders instrument from a complete orthogonal projector list."""
    ops = np.stack([as_operator(p) for p in projectors])
    dim = ops.shape[1]
    for i, p in enumerate(ops):
        if operator_norm(p @ p - p) > atol or operator_norm(p - p.conj().T) > atol:
            raise ValueError(f"element {i} is not an orthogonal projector")
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            if operator_norm(ops[i] @ ops[j]) > atol:
                raise ValueError(f"projectors {i} and {j} overlap")
    if operator_norm(ops.sum(axis=0) - np.eye(dim)) > atol:
        raise ValueError("projectors do not sum to the identity")
    return KrausFamily(
        label=label,
        outcomes=np.asarray(outcomes),
        weights=np.ones(len(ops)),
        kind="dense",
        ops=ops,
    )


def single_kraus_family(op, label: str = "single") -> KrausFamily:
    """One-outcome family from a single (typically unitary) Kraus operator."""
    return KrausFamily(
        label=label,
        outcomes=np.array([0]),
        weights=np.array([1.0]),
        kind="dense",
        ops=as_operator(op)[None, :, :],
    )


def gaussian_x_family(
    delta: float,
    dim: int,
    grid: Grid1D | None = None,
    *,
    defect_ceiling: float = 1e-3,
) -> KrausFamily:
    """Gaussian-smeared position readout of width delta on the Fock cutoff.

    Kraus operators are (pi delta^2)^{-1/4} exp(-(X - a)^2 / (2 delta^2)),
    diagonal in the truncated position eigenbasis; outcome weights are the
    grid step so that completeness is a Riemann sum of the Gaussian integral.
    """
    x, _ = quadrature_operators(dim)
    return _smeared_quadrature_family(
        x, delta, dim, grid, label=f"gaussian_x(delta={delta:g})", ceiling=defect_ceiling
    )


def gaussian_p_family(
    kappa: float,
    dim: int,
    grid: Grid1D | None = None,
    *,
    defect_ceiling: float = 1e-3,
) -> KrausFamily:
    """Gaussian-smeared momentum readout, the momentum twin of gaussian_x_family."""
    _, p = quadrature_operators(dim)
    return _smeared_quadrature_family(
        p, kappa, dim, grid, label=f"gaussian_p(kappa={kappa:g})", ceiling=defect_ceiling
    )


def _smeared_quadrature_family(obs, width, dim, grid, *, label, ceiling):
    if width <= 0:
        raise ValueError("smearing width must be positive")
    w, v = np.linalg.eigh(obs)
    if grid is None:
        span = float(np.max(np.abs(w))) + 6.0 * max(width, 1.0)
        step = width / 8.0
        n = int(math.ceil(2 * span / step)) + 1
        grid = Grid1D(-span, span, n)
    a = grid.points
    envs = (math.pi * width**2) ** (-0.25) * np.exp(
        -((w[None, :] - a[:, None]) ** 2) / (2.0 * width**2)
    )
    fam = KrausFamily(
        label=label,
        outcomes=a,
        weights=grid.weights,
        kind="diagonal",
        basis=v,
        envelopes=envs,
        meta={"width": float(width), "grid": grid.describe(), "dim": dim},
    )
    if fam.completeness_defect > ceiling:
        raise ValueError(
            f"{label}: completeness defect {fam.completeness_defect:.3g} exceeds "
            f"{ceiling:.3g}; widen the outcome grid"
        )
    return fam


_BIN_RE = _re.compile(r"^\s*(\d+(?:\.\d+)?)?\s*\*?\s*m(?:\s*(?:\^|\*\*)\s*(\d+))?\s*$")


def parse_bin_border(spec: str):
    """Parse a border rule like 'm', '2m^2' or '100*m**2' into a callable."""
    m = _BIN_RE.match(spec)
    if m is None:
        raise ValueError(f"cannot parse bin border {spec!r}; expected forms like '2m^2'")
    coef = float(m.group(1)) if m.group(1) else 1.0
    power = int(m.group(2)) if m.group(2) else 1
    return lambda k: coef * k**power


def fock_bin_family(border, dim: int, label: str | None = None) -> KrausFamily:
    """Projective binning of Fock levels with bin m covering [g(m), g(m+1)).

    border may be a callable g(m) or a string such as '2m^2'. g must be
    nondecreasing with g(0) <= 0 < g(1) so every level lands in a bin.
    """
    if isinstance(border, str):
        g = parse_bin_border(border)
        if label is None:
            label = f"fock_bins({border})"
    else:
        g = border
        if label is None:
            label = "fock_bins"
    levels = np.arange(dim)
    edges = [0.0]
    m = 1
    while edges[-1] < dim:
        e = float(g(m))
        if e <= edges[-1]:
            raise ValueError("bin borders must be strictly increasing")
        edges.append(e)
        m += 1
        if m > dim + 2:
            break
    n_bins = len(edges) - 1
    envs = np.zeros((n_bins, dim))
    for b in range(n_bins):
        envs[b] = (levels >= edges[b]) & (levels < edges[b + 1])
    keep = envs.any(axis=1)
    envs = envs[keep]
    return KrausFamily(
        label=label,
        outcomes=np.flatnonzero(keep),
        weights=np.ones(int(keep.sum())),
        kind="diagonal",
        basis=None,
        envelopes=envs,
        meta={"dim": dim, "edges": [float(e) for e in edges]},
    )


def coherent_projector_family(
    lattice: ComplexLattice, dim: int, *, defect_ceiling: float | None = None
) -> KrausFamily:
    """Discretized coherent-state readout with Kraus pi^{-1/2} |a><a|.

    The bra side keeps the raw truncated coherent amplitudes so that the POVM
    element is exactly the truncated heterodyne effect pi^{-1} |a><a|; the ket
    side is renormalized so the post-measurement state is a unit vector.
    Completeness holds only where the lattice covers the Fock levels kept by
    the cutoff (level n sits at radius ~ sqrt(n)); pass defect_ceiling to
    enforce a bound, or inspect completeness_defect afterwards.
    """
    pts = lattice.points
    cols = coherent_columns(pts, dim)
    norms = np.sqrt(np.einsum("ia,ia->a", cols.conj(), cols).real)
    kets = cols / np.where(norms > 0, norms, 1.0)
    fam = KrausFamily(
        label="coherent_projectors",
        outcomes=pts,
        weights=lattice.weights,
        kind="rank1",
        left=kets,
        right=cols,
        scale=np.full(pts.size, math.pi**-0.5),
        meta={"lattice": lattice.describe(), "dim": dim},
    )
    if defect_ceiling is not None and fam.completeness_defect > defect_ceiling:
        raise ValueError(
            f"coherent family defect {fam.completeness_defect:.3g} exceeds "
            f"{defect_ceiling:.3g}; grow the lattice or lower dim"
        )
    return fam


def coherent_columns(points: np.ndarray, dim: int) -> np.ndarray:
    """Stack of raw truncated coherent amplitudes, one column per lattice point."""
    pts = np.asarray(points, dtype=complex).ravel()
    k = np.arange(dim)
    from scipy.special import gammaln

    r = np.abs(pts)
    logmod = np.full((dim, pts.size), -np.inf)
    nz = r > 0
    logmod[:, nz] = (
        -0.5 * r[nz] ** 2
        + k[:, None] * np.log(r[nz])
        - 0.5 * gammaln(k + 1.0)[:, None]
    )
    logmod[0, ~nz] = -0.0
    phase = np.ones_like(pts)
    phase[nz] = pts[nz] / r[nz]
    cols = np.exp(logmod) * phase[None, :] ** k[:, None]
    cols[0, ~nz] = 1.0
    return cols


def coherent_coarse_family(
    envelopes,
    lattice: ComplexLattice,
    dim: int,
    *,
    outcomes=None,
    label: str = "coherent_coarse",
    partition_tol: float = 1e-9,
) -> KrausFamily:
    """Coarse-grained phase-space readout from an envelope partition.

    Each envelope f_a maps lattice points to [0, 1] and the set must sum to 1
    on the lattice. The POVM element for outcome a is the moment operator
    pi^{-1} sum_j w_j f_a(alpha_j) |alpha_j><alpha_j|; the Kraus operator is
    its positive square root, and a final completeness correction
    K -> K S^{-1/2} absorbs the lattice discretization error.
    """
    pts = lattice.points
    w = lattice.weights
    fvals = np.stack([np.asarray(f(pts), dtype=float) for f in envelopes])
    if np.any(fvals < -1e-12) or np.any(fvals > 1 + 1e-12):
        raise ValueError("envelope values must lie in [0, 1]")
    part = fvals.sum(axis=0)
    if np.max(np.abs(part - 1.0)) > partition_tol:
        raise ValueError(
            f"envelopes are not a partition of unity (max dev {np.max(np.abs(part - 1.0)):.3g})"
        )
    cols = coherent_columns(pts, dim)
    ops = []
    for f in fvals:
        coef = w * f / math.pi
        moment = (cols * coef) @ cols.conj().T
        ops.append(_psd_sqrt(moment))
    fam = KrausFamily(
        label=label,
        outcomes=np.arange(len(envelopes)) if outcomes is None else np.asarray(outcomes),
        weights=np.ones(len(envelopes)),
        kind="dense",
        ops=np.stack(ops),
        meta={"lattice": lattice.describe(), "dim": dim},
    )
    corrected = symmetrize_completeness(fam)
    corrected.meta["raw_defect"] = float(fam.completeness_defect)
    return corrected


def ring_envelopes(d: float, max_radius: float):
    """Indicator envelopes for annuli [m d, (m+1) d) covering radius max_radius."""
    if d <= 0:
        raise ValueError("ring width must be positive")
    count = int(math.ceil(max_radius / d)) + 1
    outs = []
    for m in range(count):
        outs.append(lambda a, m=m: ((np.abs(a) >= m * d) & (np.abs(a) < (m + 1) * d)).astype(float))
    return outs, np.arange(count)


def cell_envelopes(side: float, extent: float):
    """Indicator envelopes for square cells of the given side covering [-extent, extent]^2."""
    if side <= 0:
        raise ValueError("cell side must be positive")
    n = int(math.ceil(2 * extent / side))
    lo = -0.5 * n * side
    outs = []
    ids = []
    for i in range(n):
        for j in range(n):
            x0, x1 = lo + i * side, lo + (i + 1) * side
            y0, y1 = lo + j * side, lo + (j + 1) * side
            outs.append(
                lambda a, x0=x0, x1=x1, y0=y0, y1=y1: (
                    (a.real >= x0) & (a.real < x1) & (a.imag >= y0) & (a.imag < y1)
                ).astype(float)
            )
            ids.append(i * n + j)
    return outs, np.asarray(ids)


def symmetrize_completeness(family: KrausFamily, *, rcond: float = 1e-12) -> KrausFamily:
    """Restore exact completeness by the polar correction K -> K S^{-1/2}."""
    s = family.completeness_operator()
    w, v = np.linalg.eigh(s)
    if w.min() <= rcond * w.max():
        raise ValueError(
            "completeness operator is numerically singular; the family cannot "
            "be symmetrized"
        )
    inv_sqrt = (v * w**-0.5) @ v.conj().T
    meta = dict(family.meta)
    meta["symmetrized"] = True
    if family.kind == "diagonal":
        if family.basis is None:
            diag = (family.weights @ family.envelopes**2) ** -0.5
            envs = family.envelopes * diag[None, :]
        else:
            diag = np.einsum(
                "ia,ij,ja->a", family.basis.conj(), s, family.basis, optimize=True
            ).real ** -0.5
            envs = family.envelopes * diag[None, :]
        return KrausFamily(
            label=family.label,
            outcomes=family.outcomes,
            weights=family.weights,
            kind="diagonal",
            basis=family.basis,
            envelopes=envs,
            meta=meta,
        )
    if family.kind == "rank1":
        return KrausFamily(
            label=family.label,
            outcomes=family.outcomes,
            weights=family.weights,
            kind="rank1",
            left=family.left,
            right=inv_sqrt @ family.right,
            scale=family.scale,
            meta=meta,
        )
    ops = family.ops @ inv_sqrt
    return KrausFamily(
        label=family.label,
        outcomes=family.outcomes,
        weights=family.weights,
        kind="dense",
        ops=ops,
        meta=meta,
    )


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T
