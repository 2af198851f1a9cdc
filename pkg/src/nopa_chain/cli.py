"""Command-line front end.

Every subcommand is driven by a :class:`RunConfig`, assembled from built-in
defaults, an optional flat ``key = value`` config file and command-line
flags, in that order of precedence.  Outputs embed the resolved RunConfig
and the package version so a run can be repeated from its own output.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .gaussian import (
    CovarianceError,
    covariance_trajectory,
    negativity_suite,
    negativity_trajectories,
    reports_to_json,
    steady_state_covariance,
)
from .model import LossScenario, ModelError, assemble_state_space, scenario_config
from .spectra import (
    SpectrumError,
    UnstableConfigError,
    spectrum_to_csv,
    squeezing_spectra,
)
from .stability import (
    StabilityError,
    dde_rightmost_root,
    threshold_table,
    threshold_table_csv,
)
from .sweep import (
    SweepError,
    equal_power_table,
    equal_power_x,
    optimal_table,
    reported_threshold,
    target_db_table,
    threshold_approach_curve,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_UNSTABLE = 4

LOSS_ALIASES = {
    "none": LossScenario.LOSSLESS,
    "lossless": LossScenario.LOSSLESS,
    "transmission": LossScenario.TRANSMISSION_ONLY,
    "transmission_only": LossScenario.TRANSMISSION_ONLY,
    "both": LossScenario.TRANSMISSION_AND_AMPLIFICATION,
    "transmission_and_amplification": LossScenario.TRANSMISSION_AND_AMPLIFICATION,
}


@dataclass
class RunConfig:
    command: str = ""
    n: str = "2..6"
    x: float | None = None
    x_ref: float = 0.13
    n_ref: int = 6
    y: float = 1.0
    distance_km: float = 1.0
    losses: str = "both"
    scenarios: str = "all"
    delay: bool = False
    tau: float | None = None
    theta_a: float | None = None
    theta_b: float | None = None
    omega_min: float = 1e4
    omega_max: float = 1e10
    omega_points: int = 500
    t_end: float = 2e-7
    dt: float = 1e-10
    trajectory: bool = False
    sync_check: bool = False
    kind: str = "target-db"
    target_db: float = -25.0
    n_samples: int = 1000
    grid_threshold_decimals: int | None = 4
    k_min: float = 0.5
    k_max: float = 0.999
    k_points: int = 100
    eps_tol: float = 1e-10
    output: str | None = None
    format: str = "csv"
    paper_precision: bool = False

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    text = raw.strip()
    if text.lower() in ("none", "null", "") and "None" in str(kind):
        return None
    if kind.startswith("bool"):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ModelError(f"{name}: expected a boolean, got {raw!r}")
    if kind.startswith("int"):
        return int(text)
    if kind.startswith("float"):
        return float(text)
    return text


def read_config_file(path: str | Path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ModelError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ModelError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            raise ModelError(f"{path}:{lineno}: {exc}") from exc
    return out


def parse_n_range(text: str) -> list[int]:
    """``"3"``, ``"2..6"`` or ``"2,4,6"``."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..")
        values = list(range(int(lo), int(hi) + 1))
    else:
        values = [int(v) for v in text.split(",")]
    if not values or min(values) < 2:
        raise ModelError(f"chains need N >= 2, got {text!r}")
    return values


def parse_scenarios(text: str) -> list[LossScenario]:
    if text.strip() == "all":
        return list(LossScenario)
    try:
        return [LOSS_ALIASES[s.strip()] for s in text.split(",")]
    except KeyError as exc:
        raise ModelError(f"unknown loss scenario {exc.args[0]!r}") from None


def _scenario(rc: RunConfig) -> LossScenario:
    try:
        return LOSS_ALIASES[rc.losses]
    except KeyError:
        raise ModelError(f"unknown loss setting {rc.losses!r}") from None


def metadata(rc: RunConfig) -> dict:
    return {"package": "nopa_chain", "version": __version__, "run_config": rc.to_dict()}


def csv_header(rc: RunConfig) -> str:
    return "# " + json.dumps(metadata(rc), sort_keys=True) + "\n"


def _fmt(v: float, rc: RunConfig) -> str:
    return f"{v:.4f}" if rc.paper_precision else f"{v:.10g}"


def _emit(rc: RunConfig, csv_text: str | None, json_obj: dict | None) -> None:
    payload_json = None
    if json_obj is not None:
        json_obj = {"metadata": metadata(rc), **json_obj}
        payload_json = json.dumps(json_obj, indent=2, sort_keys=True) + "\n"
    if rc.output:
        prefix = Path(rc.output)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        if rc.format in ("csv", "both") and csv_text is not None:
            prefix.with_suffix(".csv").write_text(csv_text)
        if rc.format in ("json", "both") and payload_json is not None:
            prefix.with_suffix(".json").write_text(payload_json)
    else:
        if rc.format == "json" and payload_json is not None:
            sys.stdout.write(payload_json)
        elif csv_text is not None:
            sys.stdout.write(csv_text)


def _single_config(rc: RunConfig, n: int, x: float | None = None):
    sc = _scenario(rc)
    if x is None:
        x = rc.x if rc.x is not None else equal_power_x(n, rc.x_ref, rc.n_ref, sc)
    return scenario_config(
        n,
        x,
        sc,
        y=rc.y,
        distance_km=rc.distance_km,
        delay=rc.delay,
        tau=rc.tau,
        theta_a=rc.theta_a,
        theta_b=rc.theta_b,
    )


# ---------------------------------------------------------------------------
# commands


def cmd_threshold(rc: RunConfig) -> int:
    reports = threshold_table(
        parse_scenarios(rc.scenarios),
        parse_n_range(rc.n),
        y=rc.y,
        distance_km=rc.distance_km,
        eps_tol=rc.eps_tol,
    )
    if rc.paper_precision:
        for r in reports:
            r.x_th = reported_threshold(r.x_th)
    csv_text = threshold_table_csv(reports, header=csv_header(rc))
    _emit(rc, csv_text, {"reports": [r.to_dict() for r in reports]})
    return EXIT_OK


def cmd_spectrum(rc: RunConfig) -> int:
    grid = np.logspace(math.log10(rc.omega_min), math.log10(rc.omega_max), rc.omega_points)
    ns = parse_n_range(rc.n)
    if len(ns) != 1:
        raise ModelError("spectrum takes a single N")
    cfg = _single_config(rc, ns[0])
    spectrum = squeezing_spectra(cfg, grid, delayed=rc.delay)
    spectrum.metadata = metadata(rc)
    digits = 4 if rc.paper_precision else 10
    csv_text = spectrum_to_csv(spectrum, header=csv_header(rc), digits=digits)
    _emit(rc, csv_text, spectrum.to_dict())
    return EXIT_OK


def cmd_covariance(rc: RunConfig) -> int:
    ns = parse_n_range(rc.n)
    if len(ns) != 1:
        raise ModelError("covariance takes a single N")
    cfg = _single_config(rc, ns[0])
    ss = assemble_state_space(cfg)
    p_inf = steady_state_covariance(ss).p_matrix
    lines = [csv_header(rc).rstrip("\n")]
    if rc.trajectory:
        traj = covariance_trajectory(ss, None, rc.t_end, rc.dt)
        iu = np.triu_indices(p_inf.shape[0])
        labels = ss.state_index_map
        lines.append(",".join(["t"] + [f"P[{labels[i]},{labels[j]}]" for i, j in zip(*iu)]))
        for t, pm in zip(traj.times, traj.p_matrices):
            lines.append(",".join([f"{t:.10g}"] + [_fmt(v, rc) for v in pm[iu]]))
    else:
        lines.append(",".join(ss.state_index_map))
        for row in p_inf:
            lines.append(",".join(_fmt(v, rc) for v in row))
    _emit(
        rc,
        "\n".join(lines) + "\n",
        {"state_labels": list(ss.state_index_map), "steady_state": p_inf.tolist()},
    )
    return EXIT_OK


def cmd_negativity(rc: RunConfig) -> int:
    status = EXIT_OK
    all_reports = []
    csv_text = csv_header(rc)
    for n in parse_n_range(rc.n):
        cfg = _single_config(rc, n)
        if rc.trajectory:
            traj = negativity_trajectories(cfg, rc.t_end, rc.dt)
            csv_text += traj.to_csv(digits=4 if rc.paper_precision else 10)
        reports = negativity_suite(cfg)
        for r in reports:
            all_reports.append({"N": n, **r.to_dict()})
        if not rc.trajectory:
            if n == parse_n_range(rc.n)[0]:
                csv_text += "N,pair,nu,E\n"
            for r in reports:
                csv_text += f"{n},{r.pair_label[0]}-{r.pair_label[1]},{_fmt(r.nu, rc)},{_fmt(r.e_value, rc)}\n"
        if rc.sync_check:
            same = [
                r.e_value
                for r in reports
                if r.pair_label[0][1:].isdigit() and r.pair_label[0][1:] == r.pair_label[1][1:]
            ]
            spread = max(same) - min(same)
            ok = spread < 1e-6
            sys.stderr.write(f"N={n} synchronization spread {spread:.3e}: {'pass' if ok else 'FAIL'}\n")
            if not ok:
                status = EXIT_NUMERICAL
    _emit(rc, csv_text, {"negativities": all_reports})
    return status


def cmd_sweep(rc: RunConfig) -> int:
    kind = rc.kind.replace("_", "-")
    ns = parse_n_range(rc.n)
    if kind == "target-db":
        result = target_db_table(rc.target_db, ns)
    elif kind == "optimal":
        result = optimal_table(_scenario(rc), ns, rc.n_samples, rc.grid_threshold_decimals)
    elif kind == "equal-power":
        result = equal_power_table(ns, parse_scenarios(rc.scenarios), rc.x_ref, rc.n_ref)
    elif kind == "threshold-approach":
        ks = np.linspace(rc.k_min, rc.k_max, rc.k_points)
        result = threshold_approach_curve(ns[0], ks, y=rc.y)
        for n in ns[1:]:
            result.records += threshold_approach_curve(n, ks, y=rc.y).records
    else:
        raise ModelError(f"unknown sweep kind {rc.kind!r}")
    result.metadata.update(metadata(rc))
    digits = 4 if rc.paper_precision else 10
    text = result.to_csv(header=csv_header(rc), digits=digits)
    if rc.paper_precision:
        # published tables quote fixed decimals rather than significant digits
        rows = [text.splitlines()[0], text.splitlines()[1]]
        for r in result.records:
            row = [str(r.n_nopas), r.scenario, f"{r.x:.4f}", f"{r.power:.4f}", f"{r.v_pm_db:.4f}", f"{r.v_db:.4f}"]
            if r.k is not None:
                row.append(f"{r.k:.4f}")
            rows.append(",".join(row))
        text = "\n".join(rows) + "\n"
    _emit(rc, text, result.to_dict())
    return EXIT_OK


def cmd_dde_check(rc: RunConfig) -> int:
    status = EXIT_OK
    rows = [csv_header(rc).rstrip("\n"), "N,x,tau,order,re_root,im_root,stable"]
    reports = []
    for n in parse_n_range(rc.n):
        base = _single_config(rc, n)
        if base.tau == 0:
            base = dataclasses.replace(base, tau=rc.distance_km / (3e5 * (n - 1)))
        rep = dde_rightmost_root(base)
        reports.append({"N": n, "x": base.x, "tau": base.tau, **rep.to_dict()})
        rows.append(
            f"{n},{base.x:.10g},{base.tau:.10g},{rep.discretization_order},"
            f"{rep.rightmost_root.real:.10g},{rep.rightmost_root.imag:.10g},{rep.stable}"
        )
        if not rep.stable:
            status = EXIT_UNSTABLE
    _emit(rc, "\n".join(rows) + "\n", {"reports": reports})
    return status


COMMANDS = {
    "threshold": cmd_threshold,
    "spectrum": cmd_spectrum,
    "covariance": cmd_covariance,
    "negativity": cmd_negativity,
    "sweep": cmd_sweep,
    "dde-check": cmd_dde_check,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("network")
    g.add_argument("--n", help="chain length: 3, 2..6 or 2,4")
    g.add_argument("--x", type=float, help="pump parameter (default: equal-power from --x-ref)")
    g.add_argument("--x-ref", type=float)
    g.add_argument("--n-ref", type=int)
    g.add_argument("--y", type=float)
    g.add_argument("--distance-km", type=float)
    g.add_argument("--losses", choices=sorted(LOSS_ALIASES))
    g.add_argument("--lossless", dest="losses", action="store_const", const="none")
    g.add_argument("--scenarios", help="'all' or comma list of loss scenarios")
    g.add_argument("--delay", action="store_true", default=None)
    g.add_argument("--tau", type=float)
    g.add_argument("--theta-a", type=float)
    g.add_argument("--theta-b", type=float)
    o = p.add_argument_group("output")
    o.add_argument("--output", help="output path prefix; .csv/.json are appended")
    o.add_argument("--format", choices=["csv", "json", "both"])
    o.add_argument(
        "--paper-precision",
        action="store_true",
        default=None,
        help="fixed 4-decimal values, as quoted in the published tables",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nopa-chain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="flat key = value run configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("threshold", help="stability thresholds")
    _add_common(p)
    p.add_argument("--eps-tol", type=float)

    p = sub.add_parser("spectrum", help="two-mode squeezing spectra")
    _add_common(p)
    p.add_argument("--omega-min", type=float)
    p.add_argument("--omega-max", type=float)
    p.add_argument("--omega-points", type=int)

    for name, help_text in (
        ("covariance", "steady-state or time-dependent covariance"),
        ("negativity", "logarithmic negativities of cavity-mode pairs"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.add_argument("--trajectory", action="store_true", default=None)
        p.add_argument("--t-end", type=float)
        p.add_argument("--dt", type=float)
        if name == "negativity":
            p.add_argument("--sync-check", action="store_true", default=None)

    p = sub.add_parser("sweep", help="parameter studies")
    _add_common(p)
    p.add_argument(
        "--kind", choices=["target-db", "optimal", "equal-power", "threshold-approach"]
    )
    p.add_argument("--target", dest="target_db", type=float)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--grid-threshold-decimals", type=lambda s: None if s == "none" else int(s))
    p.add_argument("--k-min", type=float)
    p.add_argument("--k-max", type=float)
    p.add_argument("--k-points", type=int)

    p = sub.add_parser("dde-check", help="rightmost root of the delayed chain")
    _add_common(p)
    return parser


def resolve_run_config(argv: list[str] | None = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key, val in vars(args).items():
        if key in _FIELD_TYPES and val is not None:
            values[key] = val
    values["command"] = args.command
    # an explicit loss setting narrows multi-scenario commands to that scenario
    if "losses" in values and "scenarios" not in values:
        values["scenarios"] = values["losses"]
    return RunConfig(**values)


def main(argv: list[str] | None = None) -> int:
    try:
        rc = resolve_run_config(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    except (ModelError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    try:
        return COMMANDS[rc.command](rc)
    except UnstableConfigError as exc:
        sys.stderr.write(f"unstable: {exc} {json.dumps(exc.diagnostic)}\n")
        return EXIT_UNSTABLE
    except (StabilityError, SpectrumError, CovarianceError, ArithmeticError) as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERICAL
    except (ModelError, SweepError, ValueError, IndexError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
