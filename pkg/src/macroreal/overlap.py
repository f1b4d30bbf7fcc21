"""Bhattacharyya invasiveness overlaps for coarse-grained readouts.

The common pattern: prepare a state, optionally apply a nonselective
intermediate measurement, then read out with a fixed final instrument. The
Bhattacharyya coefficient between the invaded and untouched readout
distributions is 1 exactly when the intermediate measurement left the
readout statistics alone.

Two engines are provided. The Fock-basis engine works on truncated
oscillator spaces with Husimi readouts; the 1-d grid engine works directly
on position wavefunctions with smeared quadrature readouts and fast-Fourier
free evolution.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.linalg import matmul_toeplitz

from macroreal.hilbert import coherent_state, default_fock_dim
from macroreal.instruments import (
    ComplexLattice,
    KrausFamily,
    cell_envelopes,
    coherent_coarse_family,
    coherent_columns,
    coherent_projector_family,
    fock_bin_family,
    ring_envelopes,
)


@dataclasses.dataclass(frozen=True)
class OutcomeDistribution:
    """Discretized outcome density with quadrature weights."""

    outcomes: np.ndarray
    weights: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.outcomes)
        w = np.asarray(self.weights, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if not (o.shape[0] == w.shape[0] == v.shape[0]):
            raise ValueError("outcomes, weights and values must align")
        object.__setattr__(self, "outcomes", o)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "values", v)

    @property
    def mass(self) -> float:
        return float(np.dot(self.weights, self.values))

    def validate(self, mass_tol: float = 1e-6) -> None:
        if np.any(self.values < -1e-12):
            raise ValueError("negative density value")
        if abs(self.mass - 1.0) > mass_tol:
            raise ValueError(f"distribution mass {self.mass!r} differs from 1")


@dataclasses.dataclass(frozen=True)
class OverlapResult:
    value: float
    meta: dict = dataclasses.field(default_factory=dict)
    error_estimate: float | None = None


def bhattacharyya(p: OutcomeDistribution, q: OutcomeDistribution) -> float:
    """Overlap sum w sqrt(p q) of two distributions on the same outcome grid."""
    if p.outcomes.shape != q.outcomes.shape or not np.allclose(
        p.outcomes, q.outcomes
    ):
        raise ValueError("distributions live on different outcome grids")
    if not np.allclose(p.weights, q.weights):
        raise ValueError("distributions carry different quadrature weights")
    pv = np.clip(p.values, 0.0, None)
    qv = np.clip(q.values, 0.0, None)
    return float(np.dot(p.weights, np.sqrt(pv * qv)))


def husimi(rho: np.ndarray, lattice: ComplexLattice, cols: np.ndarray | None = None) -> OutcomeDistribution:
    """Husimi readout density pi^{-1} <beta| rho |beta> on the lattice."""
    pts = lattice.points
    if cols is None:
        cols = coherent_columns(pts, rho.shape[0])
    vals = np.einsum("im,ij,jm->m", cols.conj(), rho, cols, optimize=True).real / math.pi
    return OutcomeDistribution(pts, lattice.weights, vals)


def _default_lattice(gamma: complex, step: float = 0.25) -> ComplexLattice:
    return ComplexLattice.square(abs(complex(gamma)) + 5.0, step)


def _invaded_overlap(
    rho: np.ndarray, family: KrausFamily | None, lattice: ComplexLattice
) -> tuple[float, dict]:
    cols = coherent_columns(lattice.points, rho.shape[0])
    reference = husimi(rho, lattice, cols)
    if family is None:
        invaded = reference
    else:
        invaded = husimi(family.channel(rho), lattice, cols)
    v = bhattacharyya(reference, invaded)
    meta = {
        "reference_mass": reference.mass,
        "invaded_mass": invaded.mass,
        "lattice": lattice.describe(),
    }
    return v, meta


def coherent_delta_overlap(
    gamma,
    *,
    dim: int | None = None,
    lattice: ComplexLattice | None = None,
    step: float = 0.25,
    refine: bool = False,
) -> OverlapResult:
    """Invasiveness of the discretized coherent-projector readout on |gamma>.

    For an ideal delta-like phase-space readout the overlap is 2 sqrt(2) / 3
    independent of gamma; the discretization reproduces that value as the
    lattice resolves the state.
    """
    g = complex(gamma)
    if dim is None:
        dim = default_fock_dim(g)
    if lattice is None:
        lattice = _default_lattice(g, step)
    rho = coherent_state(g, dim).density().matrix
    fam = coherent_projector_family(lattice, dim)
    value, meta = _invaded_overlap(rho, fam, lattice)
    meta.update({"gamma": [g.real, g.imag], "dim": dim, "ideal": 2.0 * math.sqrt(2.0) / 3.0})
    err = None
    if refine:
        fine = ComplexLattice.square(
            (lattice.re_hi - lattice.re_lo) / 2.0, lattice.step / 2.0
        )
        rho_f = coherent_state(g, dim).density().matrix
        fam_f = coherent_projector_family(fine, dim)
        v2, _ = _invaded_overlap(rho_f, fam_f, fine)
        err = abs(v2 - value)
    return OverlapResult(value=value, meta=meta, error_estimate=err)


def ring_overlap(
    d: float,
    gamma,
    *,
    dim: int | None = None,
    lattice: ComplexLattice | None = None,
    step: float = 0.25,
) -> OverlapResult:
    """Invasiveness of radial binning with annuli of width d on |gamma>.

    The readout stays nearly non-invasive when the state sits well inside one
    ring and dips when |gamma| crosses a ring border.
    """
    g = complex(gamma)
    if dim is None:
        dim = default_fock_dim(g)
    if lattice is None:
        lattice = _default_lattice(g, step)
    corner = math.hypot(
        max(abs(lattice.re_lo), abs(lattice.re_hi)),
        max(abs(lattice.im_lo), abs(lattice.im_hi)),
    )
    envs, outcomes = ring_envelopes(d, corner + 2.0 * lattice.step)
    fam = coherent_coarse_family(
        envs, lattice, dim, outcomes=outcomes, label=f"rings(d={d:g})"
    )
    rho = coherent_state(g, dim).density().matrix
    value, meta = _invaded_overlap(rho, fam, lattice)
    meta.update(
        {
            "gamma": [g.real, g.imag],
            "dim": dim,
            "d": float(d),
            "raw_defect": fam.meta.get("raw_defect"),
        }
    )
    return OverlapResult(value=value, meta=meta)


def cell_overlap(
    side: float,
    gamma,
    *,
    dim: int | None = None,
    lattice: ComplexLattice | None = None,
    step: float = 0.25,
) -> OverlapResult:
    """Invasiveness of a square-cell phase-space partition of the given side.

    As the side shrinks the partition resolves points, and the overlap
    approaches the delta-readout value 2 sqrt(2) / 3 from above.
    """
    g = complex(gamma)
    if dim is None:
        dim = default_fock_dim(g)
    if lattice is None:
        lattice = _default_lattice(g, step)
    extent = max(
        abs(lattice.re_lo), abs(lattice.re_hi), abs(lattice.im_lo), abs(lattice.im_hi)
    )
    envs, outcomes = cell_envelopes(side, extent + 2.0 * lattice.step)
    fam = coherent_coarse_family(
        envs, lattice, dim, outcomes=outcomes, label=f"cells(side={side:g})"
    )
    rho = coherent_state(g, dim).density().matrix
    value, meta = _invaded_overlap(rho, fam, lattice)
    meta.update({"gamma": [g.real, g.imag], "dim": dim, "side": float(side)})
    return OverlapResult(value=value, meta=meta)


def fock_overlap(
    border,
    gamma,
    *,
    dim: int | None = None,
    lattice: ComplexLattice | None = None,
    step: float = 0.25,
) -> OverlapResult:
    """Invasiveness of Fock-level binning with borders g(m) on |gamma>.

    border is a callable or a rule string such as '2m^2'. The nonselective
    measurement erases number coherences between different bins, which the
    Husimi readout sees as a loss of phase localization.
    """
    g = complex(gamma)
    if dim is None:
        dim = default_fock_dim(g)
    if lattice is None:
        lattice = _default_lattice(g, step)
    fam = fock_bin_family(border, dim)
    rho = coherent_state(g, dim).density().matrix
    value, meta = _invaded_overlap(rho, fam, lattice)
    meta.update({"gamma": [g.real, g.imag], "dim": dim, "n_bins": int(fam.n_outcomes)})
    return OverlapResult(value=value, meta=meta)


# ---------------------------------------------------------------------------
# Sharp position readout on a coherent state (grid engine)


def coherent_x_exact(delta_sq: float) -> float:
    """Closed-form overlap for a width-delta position readout on a coherent state.

    Derived by Gaussian integration of the invaded Husimi function; the value
    does not depend on which coherent state is probed.
    """
    if delta_sq <= 0:
        raise ValueError("delta_sq must be positive")
    s = 2.0 * delta_sq
    return (s / (s + 1.0)) ** 0.25 * math.sqrt(2.0 * (s + 1.0) / (2.0 * s + 1.0))


def coherent_x_overlap(
    delta_sq: float,
    gamma=0.0,
    *,
    lattice: ComplexLattice | None = None,
    step: float = 0.25,
    x_halfspan: float | None = None,
) -> OverlapResult:
    """Numerical Husimi-route overlap for a sharp position readout.

    Implements the instrument as a literal outcome sum of Gaussian Kraus
    envelopes on a position grid, computes the invaded Husimi distribution
    through a Toeplitz dephasing kernel and compares with the untouched one.
    The closed form is attached in the metadata for cross-checking.
    """
    if delta_sq <= 0:
        raise ValueError("delta_sq must be positive")
    delta = math.sqrt(delta_sq)
    g = complex(gamma)
    if lattice is None:
        lattice = ComplexLattice.square(6.0, step, center=g)
    if x_halfspan is None:
        x_halfspan = abs(g) * math.sqrt(2.0) + 9.0
    dx = min(delta / 2.0, 0.05)
    n = int(math.ceil(2.0 * x_halfspan / dx)) + 1
    xs = np.linspace(-x_halfspan, x_halfspan, n)
    dx = xs[1] - xs[0]

    # Outcome grid at half the position step keeps the kernel exactly Toeplitz.
    da = dx / 2.0
    pad = 6.0 * delta
    agrid = np.arange(-x_halfspan - pad, x_halfspan + pad + da / 2.0, da)

    # Dephasing kernel k(x - x') = sum_a w g_a(x) g_a(x') along the first row.
    norm = (math.pi * delta_sq) ** -0.5
    first = np.zeros(n)
    for lo in range(0, agrid.size, 2048):
        chunk = agrid[lo : lo + 2048]
        ga0 = np.exp(-((xs[0] - chunk) ** 2) / (2.0 * delta_sq))
        gax = np.exp(-((xs[:, None] - chunk[None, :]) ** 2) / (2.0 * delta_sq))
        first += gax @ ga0
    first *= norm * da

    psi = _coherent_wavefunction(xs, g)
    pts = lattice.points
    re = np.unique(pts.real)
    im = np.unique(pts.imag)
    q0 = np.zeros((re.size, im.size))
    q1 = np.zeros((re.size, im.size))
    for i, br in enumerate(re):
        # <x|beta>* psi(x) dx for every beta in this row of the lattice
        conj_beta = _coherent_wavefunction_row(xs, br, im)
        w = conj_beta.conj() * psi[:, None] * dx
        q0[i] = np.abs(w.sum(axis=0)) ** 2 / math.pi
        kw = matmul_toeplitz(first, w)
        q1[i] = np.einsum("xb,xb->b", w.conj(), kw).real / math.pi
    p_ref = OutcomeDistribution(pts, lattice.weights, q0.ravel())
    p_inv = OutcomeDistribution(pts, lattice.weights, np.clip(q1.ravel(), 0.0, None))
    value = bhattacharyya(p_ref, p_inv)
    return OverlapResult(
        value=value,
        meta={
            "delta_sq": float(delta_sq),
            "gamma": [g.real, g.imag],
            "exact": coherent_x_exact(delta_sq),
            "reference_mass": p_ref.mass,
            "invaded_mass": p_inv.mass,
            "lattice": lattice.describe(),
            "x_grid": {"halfspan": x_halfspan, "n": int(n)},
        },
    )


def _coherent_wavefunction(xs: np.ndarray, gamma: complex) -> np.ndarray:
    """<x|gamma> for unit-oscillator coherent states."""
    re, im = gamma.real, gamma.imag
    return (
        math.pi**-0.25
        * np.exp(-0.5 * (xs - math.sqrt(2.0) * re) ** 2)
        * np.exp(1j * math.sqrt(2.0) * im * xs - 1j * re * im)
    )


def _coherent_wavefunction_row(xs: np.ndarray, beta_re: float, beta_im: np.ndarray) -> np.ndarray:
    """<x|beta> for all beta = beta_re + i beta_im, shape (n_x, n_im)."""
    base = math.pi**-0.25 * np.exp(-0.5 * (xs - math.sqrt(2.0) * beta_re) ** 2)
    osc = np.exp(
        1j * math.sqrt(2.0) * np.outer(xs, beta_im) - 1j * beta_re * beta_im[None, :]
    )
    return base[:, None] * osc


# ---------------------------------------------------------------------------
# Smeared quadrature sequences on a Gaussian wave packet (grid engine)

QUADRATURE_CASES = ("XX", "PX", "XP", "PP")


def quadrature_overlap_analytic(
    case: str,
    delta: float = 1.0,
    kappa: float = 1.0,
    sigma: float = 1.0,
    t: float = 0.0,
    mass: float = 1.0,
) -> float:
    """Moment-propagation overlap for smeared quadrature pairs.

    case names first and second readout: X uses width delta, P uses width
    kappa. The packet starts Gaussian with position variance sigma^2 / 2 and
    evolves freely for time t between the measurements. All distributions
    stay centered Gaussians, so the overlap depends only on the variances.
    """
    case = case.upper()
    if case not in QUADRATURE_CASES:
        raise ValueError(f"case must be one of {QUADRATURE_CASES}")
    var_x = sigma**2 / 2.0
    var_p = 1.0 / (2.0 * sigma**2)
    ratio = t / mass
    if case == "XX":
        s0 = var_x + ratio**2 * var_p + delta**2 / 2.0
        s1 = var_x + ratio**2 * (var_p + 1.0 / (2.0 * delta**2)) + delta**2 / 2.0
    elif case == "PX":
        s0 = var_x + ratio**2 * var_p + delta**2 / 2.0
        s1 = var_x + 1.0 / (2.0 * kappa**2) + ratio**2 * var_p + delta**2 / 2.0
    elif case == "XP":
        s0 = var_p + kappa**2 / 2.0
        s1 = var_p + 1.0 / (2.0 * delta**2) + kappa**2 / 2.0
    else:
        s0 = var_p + kappa**2 / 2.0
        s1 = s0
    return math.sqrt(2.0 * math.sqrt(s0 * s1) / (s0 + s1))


def quadrature_overlap_numeric(
    case: str,
    delta: float = 1.0,
    kappa: float = 1.0,
    sigma: float = 1.0,
    t: float = 0.0,
    mass: float = 1.0,
    *,
    n: int = 4096,
    halfspan: float | None = None,
) -> OverlapResult:
    """Grid-engine overlap for smeared quadrature pairs.

    The first instrument is applied branch by branch on its outcome grid, each
    branch evolves freely via FFT, and the final smeared readout acts on the
    summed intensity. No Gaussian shortcuts are taken, so this route checks
    the moment propagation independently.
    """
    case = case.upper()
    if case not in QUADRATURE_CASES:
        raise ValueError(f"case must be one of {QUADRATURE_CASES}")
    if halfspan is None:
        drift = abs(t / mass) * 3.0 * (1.0 / sigma + (1.0 / delta if case[0] == "X" else kappa))
        halfspan = 8.0 * max(sigma, 1.0) + drift + 6.0 * max(delta, kappa)
    xs = np.linspace(-halfspan, halfspan, n, endpoint=False)
    dx = xs[1] - xs[0]
    ps = 2.0 * math.pi * np.fft.fftfreq(n, d=dx)
    psi0 = (math.pi * sigma**2) ** -0.25 * np.exp(-(xs**2) / (2.0 * sigma**2))

    first, second = case[0], case[1]
    width1 = delta if first == "X" else kappa
    # Outcome grid for the first instrument covers the packet in the measured
    # quadrature; in momentum the packet width is 1/sigma.
    spread1 = 6.0 * (sigma if first == "X" else 1.0 / sigma) + 6.0 * width1
    a_step = width1 / 4.0
    agrid = np.arange(-spread1, spread1 + a_step / 2.0, a_step)

    phase = np.exp(-1j * ps**2 * t / (2.0 * mass))

    def evolve(vec):
        return np.fft.ifft(np.fft.fft(vec) * phase)

    if first == "X":
        branches = psi0[None, :] * np.exp(
            -((xs[None, :] - agrid[:, None]) ** 2) / (2.0 * width1**2)
        )
        branches *= (math.pi * width1**2) ** -0.25
    else:
        psi0_p = np.fft.fft(psi0) * dx / math.sqrt(2.0 * math.pi)
        filt = (math.pi * width1**2) ** -0.25 * np.exp(
            -((ps[None, :] - agrid[:, None]) ** 2) / (2.0 * width1**2)
        )
        branches = np.fft.ifft(psi0_p[None, :] * filt) * (
            math.sqrt(2.0 * math.pi) / dx
        )
    branches = np.fft.ifft(np.fft.fft(branches, axis=1) * phase[None, :], axis=1)
    weights1 = np.full(agrid.size, a_step)

    ref = evolve(psi0)

    if second == "X":
        intensity = (np.abs(branches) ** 2 * weights1[:, None]).sum(axis=0) * dx
        ref_intensity = np.abs(ref) ** 2 * dx
        axis, daxis = xs, dx
    else:
        bp = np.fft.fft(branches, axis=1) * dx / math.sqrt(2.0 * math.pi)
        intensity = (np.abs(bp) ** 2 * weights1[:, None]).sum(axis=0)
        rp = np.fft.fft(ref) * dx / math.sqrt(2.0 * math.pi)
        ref_intensity = np.abs(rp) ** 2
        order = np.argsort(ps)
        intensity = intensity[order]
        ref_intensity = ref_intensity[order]
        axis = ps[order]
        daxis = axis[1] - axis[0]
        intensity = intensity * daxis
        ref_intensity = ref_intensity * daxis

    width2 = delta if second == "X" else kappa
    spread2 = float(np.abs(axis).max())
    b_step = width2 / 4.0
    bgrid = np.arange(-spread2, spread2 + b_step / 2.0, b_step)
    norm2 = (math.pi * width2**2) ** -0.5
    pb = np.zeros(bgrid.size)
    pb_ref = np.zeros(bgrid.size)
    for lo in range(0, bgrid.size, 512):
        hi = min(lo + 512, bgrid.size)
        win = norm2 * np.exp(
            -((bgrid[lo:hi, None] - axis[None, :]) ** 2) / width2**2
        )
        pb[lo:hi] = win @ intensity
        pb_ref[lo:hi] = win @ ref_intensity
    wb = np.full(bgrid.size, b_step)
    inv = OutcomeDistribution(bgrid, wb, pb)
    refd = OutcomeDistribution(bgrid, wb, pb_ref)
    value = bhattacharyya(refd, inv)
    return OverlapResult(
        value=value,
        meta={
            "case": case,
            "delta": delta,
            "kappa": kappa,
            "sigma": sigma,
            "t": t,
            "mass": mass,
            "invaded_mass": inv.mass,
            "reference_mass": refd.mass,
            "analytic": quadrature_overlap_analytic(case, delta, kappa, sigma, t, mass),
        },
    )


def delta_limit_curve(sides, gamma, **kwargs):
    """Cell-partition overlaps for a shrinking sequence of cell sides."""
    return [cell_overlap(s, gamma, **kwargs) for s in sides]
