"""Command line front end for the macrorealism laboratory.

Three commands: `mz-scan` sweeps the two-path interferometer lattice and
cross-checks closed forms against the numeric pipeline, `nsit-check` runs
every condition on a scenario file, and `overlap` produces invasiveness
sweep data for the quadrature, coherent, ring and Fock readout studies.

Outputs are CSV (the plot-data contract: header row, '.' decimal, fixed
%.12g floats) or JSON; identical invocations produce byte-identical bodies.
Exit codes: 0 clean, 1 a checker found violations, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from macroreal.conditions import (
    aot_check,
    lgi_012,
    mr012_check,
    nic_012,
    nsit_leading,
    nsit_sandwich,
    nsit_two_time,
)
from macroreal.mach_zehnder import (
    CONDITION_NAMES,
    CONVENTIONS,
    LatticeReport,
    MZParams,
    calibrate_convention,
    verify_lattice,
)
from macroreal.overlap import (
    QUADRATURE_CASES,
    coherent_delta_overlap,
    coherent_x_overlap,
    fock_overlap,
    quadrature_overlap_analytic,
    quadrature_overlap_numeric,
    ring_overlap,
)
from macroreal.scenario import load_scenario

DEFAULT_TOL_ENV = "MACROREAL_DEFAULT_TOL"

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """One resolved invocation: subcommand, options and output contract."""

    command: str
    options: dict
    tol: float
    out: str | None
    fmt: str
    jobs: int
    seed: int | None


# ---------------------------------------------------------------------------
# Argument parsing helpers


def parse_range(spec: str) -> list[float]:
    """Parse 'start:stop:step' (inclusive), 'a,b,c' or a single number."""
    try:
        if ":" in spec:
            lo_s, hi_s, step_s = spec.split(":")
            lo, hi, step = float(lo_s), float(hi_s), float(step_s)
            if step <= 0.0 or hi < lo:
                raise ValueError
            return [float(v) for v in np.arange(lo, hi + step / 2.0, step)]
        if "," in spec:
            return [float(v) for v in spec.split(",") if v.strip()]
        return [float(spec)]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"cannot parse range {spec!r}; expected start:stop:step, a comma list or a number"
        )


def parse_complex_list(spec: str) -> list[complex]:
    """Parse a comma list of complex values; accepts both 0.3i and 0.3j."""
    values = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(complex(token.replace("i", "j")))
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse complex value {token!r}")
    if not values:
        raise argparse.ArgumentTypeError(f"empty complex list {spec!r}")
    return values


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def _rows_to_csv(rows: list[dict], fieldnames: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fieldnames)
    for row in rows:
        writer.writerow([_format_cell(row.get(name)) for name in fieldnames])
    return buf.getvalue()


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def write_rows(rows: list[dict], fieldnames: list[str], config: RunConfig) -> None:
    if config.fmt == "csv":
        text = _rows_to_csv(rows, fieldnames)
    else:
        body = [{name: row.get(name) for name in fieldnames} for row in rows]
        text = json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n"
    if config.out:
        with open(config.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _map_ordered(fn, items, jobs: int) -> list:
    """Apply fn to items, optionally with a thread pool, preserving order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _note(message: str) -> None:
    print(message, file=sys.stderr)


# ---------------------------------------------------------------------------
# mz-scan

MZ_FIELDS = [
    "r1",
    "r2",
    "phi",
    "q",
    "c_re",
    "c_im",
    "condition",
    "analytic_residual",
    "numeric_residual",
    "analytic_holds",
    "numeric_holds",
    "compared",
    "agree",
]


def _state_list(options: dict) -> list[dict]:
    qs = options.get("q") or [0.0, 0.3, 0.5]
    cs = options.get("c") or [0.45, 0.3j, 0.2 + 0.35j]
    states = []
    if options["state"] in ("mix", "both"):
        states.extend({"q": float(q), "c": None} for q in qs)
    if options["state"] in ("sup", "both"):
        for c in cs:
            for q in qs:
                if abs(c) ** 2 <= q * (1.0 - q) + 1e-12:
                    states.append({"q": float(q), "c": complex(c)})
    if not states:
        _note("mz-scan: no admissible state; every |c|^2 exceeds q(1-q)")
        raise SystemExit(EXIT_USAGE)
    return states


def _merge_reports(parts: list, convention: str, calibration: dict) -> LatticeReport:
    return LatticeReport(
        convention=convention,
        calibration=calibration,
        n_points=sum(p.n_points for p in parts),
        n_comparisons=sum(p.n_comparisons for p in parts),
        n_skipped_guard=sum(p.n_skipped_guard for p in parts),
        mismatches=[m for p in parts for m in p.mismatches],
        max_formula_error=max(p.max_formula_error for p in parts),
        threshold=parts[0].threshold,
        guard=parts[0].guard,
        elapsed_s=sum(p.elapsed_s for p in parts),
    )


def _flatten_rows(raw_rows: list[dict], threshold: float, guard: float) -> list[dict]:
    flat = []
    for raw in raw_rows:
        params = raw["params"]
        c = params["c"]
        for name in CONDITION_NAMES:
            a = raw[name]["analytic"]
            n = raw[name]["numeric"]
            skipped = threshold < a < guard
            flat.append(
                {
                    "r1": params["r1"],
                    "r2": params["r2"],
                    "phi": params["phi"],
                    "q": params["q"],
                    "c_re": None if c is None else c[0],
                    "c_im": None if c is None else c[1],
                    "condition": name,
                    "analytic_residual": a,
                    "numeric_residual": n,
                    "analytic_holds": a <= threshold,
                    "numeric_holds": n <= threshold,
                    "compared": not skipped,
                    "agree": None if skipped else (a <= threshold) == (n <= threshold),
                }
            )
    return flat


def _random_params(rng: np.random.Generator) -> MZParams:
    r1, r2 = rng.uniform(0.0, 1.0, size=2)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    q = rng.uniform(0.0, 1.0)
    if rng.uniform() < 0.5:
        return MZParams(float(r1), float(r2), float(phi), float(q), None)
    radius = rng.uniform(0.0, math.sqrt(q * (1.0 - q)))
    angle = rng.uniform(0.0, 2.0 * math.pi)
    c = radius * complex(math.cos(angle), math.sin(angle))
    return MZParams(float(r1), float(r2), float(phi), float(q), c)


def cmd_mz_scan(config: RunConfig) -> int:
    opts = config.options
    guard = opts["guard"]
    states = _state_list(opts)
    if opts["convention"] == "auto":
        convention, calibration = calibrate_convention()
    else:
        convention, calibration = opts["convention"], {}

    r1s = opts.get("r1") or [float(v) for v in np.linspace(0.0, 1.0, 11)]
    r2s = opts.get("r2") or r1s
    phis = opts.get("phi") or [
        float(v) for v in np.linspace(0.0, 2.0 * math.pi, 12, endpoint=False)
    ]

    def run_chunk(r1):
        return verify_lattice(
            [r1],
            phis,
            states,
            r2_values=r2s,
            threshold=config.tol,
            guard=guard,
            convention=convention,
            collect_rows=True,
        )

    parts = _map_ordered(run_chunk, r1s, config.jobs)
    reports = [p[0] for p in parts]
    raw_rows = [row for p in parts for row in p[1]]

    n_random = opts.get("random_points") or 0
    if n_random:
        rng = np.random.default_rng(config.seed)
        for _ in range(n_random):
            p = _random_params(rng)
            rep, rows = verify_lattice(
                [p.r1],
                [p.phi],
                [{"q": p.q, "c": p.c}],
                r2_values=[p.r2],
                threshold=config.tol,
                guard=guard,
                convention=convention,
                collect_rows=True,
            )
            reports.append(rep)
            raw_rows.extend(rows)

    report = _merge_reports(reports, convention, calibration)
    flat = _flatten_rows(raw_rows, config.tol, guard)
    write_rows(flat, MZ_FIELDS, config)
    summary = report.to_dict()
    if config.out:
        with open(config.out + ".summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        print(
            f"mz-scan: {len(report.mismatches)} mismatches over {report.n_points} "
            f"points ({report.n_comparisons} comparisons, "
            f"{report.n_skipped_guard} guard-skipped); convention {convention}"
        )
    else:
        _note(
            f"mz-scan: {len(report.mismatches)} mismatches over {report.n_points} points"
        )
    return EXIT_OK if report.ok else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# nsit-check

REPORT_FIELDS = ["name", "residual", "threshold", "holds"]


def cmd_nsit_check(config: RunConfig) -> int:
    path = config.options["scenario"]
    try:
        scenario = load_scenario(path)
    except (OSError, KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        _note(f"nsit-check: cannot load scenario {path!r}: {exc}")
        return EXIT_USAGE

    reports = []
    for i in range(scenario.n_slots):
        for j in range(i + 1, scenario.n_slots):
            reports.append(nsit_two_time(scenario, i, j, threshold=config.tol))
            reports.append(aot_check(scenario, i, j, threshold=config.tol))

    bundle = None
    if scenario.n_slots == 3:
        reports.append(nsit_sandwich(scenario, threshold=config.tol))
        reports.append(nsit_leading(scenario, threshold=config.tol))
        try:
            reports.append(lgi_012(scenario, threshold=config.tol))
            reports.append(nic_012(scenario, threshold=config.tol))
        except ValueError:
            _note("nsit-check: outcomes are not +-1, inequality checks skipped")
        bundle = mr012_check(scenario, threshold=config.tol)
    else:
        _note(
            f"nsit-check: scenario has {scenario.n_slots} slots, "
            "three-slot bundle skipped"
        )

    for rep in reports:
        verdict = "holds" if rep.holds else "VIOLATED"
        print(
            f"{rep.name:<12} residual={rep.residual:.6e} "
            f"threshold={rep.threshold:.1e} {verdict}"
        )
    violated = any(not rep.holds for rep in reports)
    if bundle is not None:
        verdict = "holds" if bundle.holds else "VIOLATED"
        print(
            f"{'MR_012':<12} mismatch_tv={bundle.mismatch_tv:.6e} "
            f"threshold={bundle.mismatch_threshold:.1e} {verdict}"
        )
        violated = violated or not bundle.holds

    if config.out:
        rows = [rep.to_dict() for rep in reports]
        if config.fmt == "csv":
            write_rows(rows, REPORT_FIELDS, config)
        else:
            body = {"reports": rows}
            if bundle is not None:
                body["mr012"] = bundle.to_dict()
            with open(config.out, "w") as fh:
                json.dump(body, fh, indent=2, sort_keys=True, default=_json_default)
                fh.write("\n")
    return EXIT_VIOLATION if violated else EXIT_OK


# ---------------------------------------------------------------------------
# overlap sweeps


def cmd_overlap(config: RunConfig) -> int:
    family = config.options["family"]
    handler = {
        "quadrature": _overlap_quadrature,
        "coherent": _overlap_coherent,
        "ring": _overlap_ring,
        "fock": _overlap_fock,
    }[family]
    return handler(config)


def _overlap_quadrature(config: RunConfig) -> int:
    opts = config.options
    kwargs = {
        "delta": opts["delta"],
        "kappa": opts["kappa"],
        "sigma": opts["sigma"],
        "mass": opts["mass"],
    }
    n = int(opts["grid"]) if opts.get("grid") else 4096

    def point(t):
        analytic = quadrature_overlap_analytic(opts["case"], t=t, **kwargs)
        numeric = quadrature_overlap_numeric(opts["case"], t=t, n=n, **kwargs).value
        return {
            "t": t,
            "analytic": analytic,
            "numeric": numeric,
            "abs_diff": abs(analytic - numeric),
        }

    rows = _map_ordered(point, opts["t"], config.jobs)
    write_rows(rows, ["t", "analytic", "numeric", "abs_diff"], config)
    worst = max(row["abs_diff"] for row in rows)
    _note(f"overlap quadrature {opts['case']}: max |analytic - numeric| = {worst:.3e}")
    return EXIT_OK


def _overlap_coherent(config: RunConfig) -> int:
    opts = config.options
    dim = opts.get("dim")
    step = opts.get("grid") or 0.25
    if opts.get("delta_sq"):
        gamma = complex(opts["gamma"][0]) if opts.get("gamma") else 0.0

        def point(delta_sq):
            res = coherent_x_overlap(delta_sq, gamma, step=step)
            return {
                "delta_sq": delta_sq,
                "value": res.value,
                "exact": res.meta["exact"],
                "abs_diff": abs(res.value - res.meta["exact"]),
            }

        rows = _map_ordered(point, opts["delta_sq"], config.jobs)
        write_rows(rows, ["delta_sq", "value", "exact", "abs_diff"], config)
        return EXIT_OK

    gammas = opts.get("gamma") or [float(v) for v in np.arange(0.0, 2.01, 0.5)]
    ideal = 2.0 * math.sqrt(2.0) / 3.0

    def point(gamma):
        res = coherent_delta_overlap(gamma, dim=dim, step=step)
        return {
            "gamma": gamma,
            "value": res.value,
            "ideal": ideal,
            "abs_diff": abs(res.value - ideal),
        }

    rows = _map_ordered(point, gammas, config.jobs)
    write_rows(rows, ["gamma", "value", "ideal", "abs_diff"], config)
    return EXIT_OK


def _overlap_ring(config: RunConfig) -> int:
    opts = config.options
    dim = opts.get("dim")
    step = opts.get("grid") or 0.25
    mode = opts["gamma_mode"]
    fixed = opts.get("gamma")

    def point(d):
        if mode == "border":
            gamma = d
        elif mode == "center":
            gamma = 1.5 * d
        else:
            gamma = float(fixed[0])
        res = ring_overlap(d, gamma, dim=dim, step=step)
        return {
            "d": d,
            "gamma": gamma,
            "value": res.value,
            "raw_defect": res.meta["raw_defect"],
        }

    if mode == "fixed" and not fixed:
        _note("overlap ring: --gamma-mode fixed needs --gamma")
        return EXIT_USAGE
    rows = _map_ordered(point, opts["d"], config.jobs)
    write_rows(rows, ["d", "gamma", "value", "raw_defect"], config)
    return EXIT_OK


def _overlap_fock(config: RunConfig) -> int:
    opts = config.options
    dim = opts.get("dim")
    step = opts.get("grid") or 0.25
    gammas = opts.get("gamma")
    if gammas is None:
        gammas = [float(v) for v in np.arange(0.5, 6.01, 0.25)]

    def point(gamma):
        res = fock_overlap(opts["g"], gamma, dim=dim, step=step)
        return {"gamma": gamma, "value": res.value, "n_bins": res.meta["n_bins"]}

    rows = _map_ordered(point, gammas, config.jobs)
    write_rows(rows, ["gamma", "value", "n_bins"], config)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser assembly


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument(
        "--format", choices=("csv", "json"), default="csv", help="row output format"
    )
    common.add_argument(
        "--tol",
        type=float,
        default=None,
        help=f"condition threshold (default: ${DEFAULT_TOL_ENV} or 1e-9)",
    )
    common.add_argument(
        "--jobs", type=int, default=1, help="max parallel workers for sweeps"
    )
    common.add_argument(
        "--seed", type=int, default=None, help="seed for randomized sweep points"
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="macroreal",
        description="Macrorealism condition checks and invasiveness sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_options()

    mz = sub.add_parser(
        "mz-scan",
        parents=[common],
        help="sweep the interferometer lattice, closed forms vs numerics",
    )
    mz.add_argument("--r1", type=parse_range, help="first reflectivity sweep")
    mz.add_argument("--r2", type=parse_range, help="second reflectivity sweep")
    mz.add_argument("--phi", type=parse_range, help="phase sweep (radians)")
    mz.add_argument(
        "--state", choices=("mix", "sup", "both"), default="both",
        help="initial state family",
    )
    mz.add_argument("--q", type=parse_range, help="upper-path populations")
    mz.add_argument("--c", type=parse_complex_list, help="coherences, e.g. 0.3i,0.2")
    mz.add_argument("--guard", type=float, default=1e-6, help="verdict guard band")
    mz.add_argument(
        "--convention", choices=("auto",) + CONVENTIONS, default="auto",
        help="interferometer layout convention",
    )
    mz.add_argument(
        "--random-points", type=int, default=0,
        help="extra random parameter points (seeded)",
    )

    ns = sub.add_parser(
        "nsit-check", parents=[common], help="evaluate all conditions on a scenario file"
    )
    ns.add_argument("scenario", help="path to a scenario JSON descriptor")

    ov = sub.add_parser("overlap", help="invasiveness overlap sweeps")
    ovsub = ov.add_subparsers(dest="family", required=True)

    quad = ovsub.add_parser(
        "quadrature", parents=[common], help="smeared quadrature pair, analytic vs grid"
    )
    quad.add_argument("--case", choices=QUADRATURE_CASES, required=True)
    quad.add_argument("--delta", type=float, default=1.0, help="position smearing width")
    quad.add_argument("--kappa", type=float, default=1.0, help="momentum smearing width")
    quad.add_argument("--sigma", type=float, default=1.0, help="initial packet width")
    quad.add_argument("--mass", type=float, default=1.0)
    quad.add_argument("--t", type=parse_range, default=[0.0], help="evolution times")
    quad.add_argument(
        "--grid", type=float, default=None, help="position grid points (default 4096)"
    )

    coh = ovsub.add_parser(
        "coherent", parents=[common], help="phase-space point readout invasiveness"
    )
    coh.add_argument("--gamma", type=parse_range, help="coherent amplitudes")
    coh.add_argument(
        "--delta-sq", type=parse_range, dest="delta_sq",
        help="sharp position readout variances (switches mode)",
    )
    coh.add_argument("--dim", type=int, default=None, help="Fock cutoff override")
    coh.add_argument("--grid", type=float, default=None, help="lattice step")

    ring = ovsub.add_parser(
        "ring", parents=[common], help="radial ring binning invasiveness"
    )
    ring.add_argument("--d", type=parse_range, required=True, help="ring widths")
    ring.add_argument(
        "--gamma-mode", choices=("border", "center", "fixed"), default="border",
        dest="gamma_mode", help="probe at gamma=d, gamma=3d/2 or a fixed --gamma",
    )
    ring.add_argument("--gamma", type=parse_range, help="fixed probe amplitude")
    ring.add_argument("--dim", type=int, default=None, help="Fock cutoff override")
    ring.add_argument("--grid", type=float, default=None, help="lattice step")

    fock = ovsub.add_parser(
        "fock", parents=[common], help="Fock bin coarse-graining invasiveness"
    )
    fock.add_argument("--g", required=True, help="bin border rule, e.g. 2m^2")
    fock.add_argument(
        "--gamma", type=parse_range, default=None, help="coherent amplitude sweep"
    )
    fock.add_argument("--dim", type=int, default=None, help="Fock cutoff override")
    fock.add_argument("--grid", type=float, default=None, help="lattice step")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    options = vars(args)
    tol = args.tol
    if tol is None:
        tol = float(os.environ.get(DEFAULT_TOL_ENV, "1e-9"))
    config = RunConfig(
        command=args.command,
        options=options,
        tol=tol,
        out=args.out,
        fmt=args.format,
        jobs=max(1, args.jobs),
        seed=args.seed,
    )
    if args.command == "mz-scan":
        return cmd_mz_scan(config)
    if args.command == "nsit-check":
        return cmd_nsit_check(config)
    return cmd_overlap(config)


if __name__ == "__main__":
    sys.exit(main())
