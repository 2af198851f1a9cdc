"""
Parameter studies over the pump parameter and the chain length.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .model import LossScenario, NetworkConfig, assemble_state_space, scenario_config
from .spectra import to_db, v_at_zero
from .stability import is_hurwitz, stability_threshold


class SweepError(ValueError):
    pass


class SweepKind(str, enum.Enum):
    EQUAL_POWER = "equal_power"
    TARGET_DB = "target_db"
    OPTIMAL_X = "optimal_x"
    THRESHOLD_APPROACH = "threshold_approach"


@dataclass
class SweepRecord:
    n_nopas: int
    x: float
    v_plus_0: float
    v_minus_0: float
    scenario: str = ""
    k: float | None = None

    @property
    def power(self) -> float:
        return self.n_nopas * self.x**2

    @property
    def v_pm_db(self) -> float:
        return to_db(self.v_plus_0)

    @property
    def v_db(self) -> float:
        return to_db(self.v_plus_0 + self.v_minus_0)


@dataclass
class SweepResult:
    sweep_kind: SweepKind
    records: list[SweepRecord] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    COLUMNS = ("N", "scenario", "x", "Nx2", "V_pm_0_dB", "V_0_dB")

    def rows(self, digits: int = 10) -> list[list[str]]:
        out = []
        for r in self.records:
            out.append(
                [
                    str(r.n_nopas),
                    r.scenario,
                    f"{r.x:.{digits}g}",
                    f"{r.power:.{digits}g}",
                    f"{r.v_pm_db:.{digits}g}",
                    f"{r.v_db:.{digits}g}",
                ]
            )
        return out

    def to_csv(self, header: str = "", digits: int = 10) -> str:
        buf = io.StringIO()
        buf.write(header)
        w = csv.writer(buf, lineterminator="\n")
        cols = list(self.COLUMNS)
        if any(r.k is not None for r in self.records):
            cols.append("k")
        w.writerow(cols)
        for r, row in zip(self.records, self.rows(digits)):
            if len(cols) > len(self.COLUMNS):
                row.append("" if r.k is None else f"{r.k:.{digits}g}")
            w.writerow(row)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "sweep_kind": self.sweep_kind.value,
            "records": [
                {
                    "N": r.n_nopas,
                    "scenario": r.scenario,
                    "x": r.x,
                    "Nx2": r.power,
                    "V_pm_0_dB": r.v_pm_db,
                    "V_0_dB": r.v_db,
                    "k": r.k,
                }
                for r in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


ConfigFamily = Callable[[float], NetworkConfig]


def _family(config_family: ConfigFamily | NetworkConfig) -> ConfigFamily:
    if isinstance(config_family, NetworkConfig):
        return config_family.with_x
    return config_family


def reported_threshold(x_th: float, decimals: int = 4) -> float:
    """Threshold truncated toward zero at ``decimals`` places.

    Truncation keeps the reported value on the stable side, which is the
    form in which published threshold tables give it.
    """
    f = 10.0**decimals
    return math.floor(x_th * f + 1e-9) / f


def equal_power_x(
    n_nopas: int,
    x_ref: float = 0.13,
    n_ref: int = 6,
    scenario: LossScenario | str = LossScenario.LOSSLESS,
) -> float:
    """Pump for an N-NOPA chain drawing the same total power ``N x^2`` as the
    reference chain."""
    if n_nopas < 2 or n_ref < 2:
        raise SweepError("chains need at least two NOPAs")
    x = math.sqrt(n_ref / n_nopas) * x_ref
    cfg = scenario_config(n_nopas, min(x, 1.0), scenario)
    x_th = stability_threshold(cfg)
    if x >= x_th:
        raise SweepError(
            f"equal-power pump x={x:.6g} is not below the threshold x_th={x_th:.6g} for N={n_nopas}"
        )
    return x


def _v0_db(cfg: NetworkConfig) -> float:
    vp, vm = v_at_zero(cfg)
    return to_db(vp + vm)


def find_x_for_target_v0(
    config_family: ConfigFamily | NetworkConfig,
    target_db: float,
    tol_db: float = 1e-4,
    x_th: float | None = None,
    x_min: float = 1e-6,
    max_iter: int = 200,
) -> float:
    """Pump at which ``V(0)`` in dB reaches ``target_db``.

    Bisection on ``(x_min, x_th)``.  The bracket is checked at both ends and
    at interior samples so a non-monotone ``V(0)`` is reported rather than
    silently producing a wrong root.
    """
    family = _family(config_family)
    if x_th is None:
        x_th = stability_threshold(family(0.5))
    lo, hi = x_min, x_th * (1.0 - 1e-12)
    f_lo, f_hi = _v0_db(family(lo)) - target_db, _v0_db(family(hi)) - target_db
    if f_lo * f_hi > 0:
        raise SweepError(
            f"target {target_db} dB outside the reachable range "
            f"[{f_hi + target_db:.4g}, {f_lo + target_db:.4g}] dB"
        )
    samples = [_v0_db(family(x)) for x in np.linspace(lo, hi, 17)]
    if np.any(np.diff(samples) > 0):
        raise SweepError("V(0) is not monotone in x on the bracket")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if _v0_db(family(mid)) > target_db:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    x = 0.5 * (lo + hi)
    if abs(_v0_db(family(x)) - target_db) >= tol_db:
        raise SweepError("bisection did not reach the target tolerance")
    return x


@dataclass
class OptimalPump:
    x_opt: float
    v_plus_0: float
    v_minus_0: float
    x_th: float

    @property
    def v_pm_db(self) -> float:
        return to_db(self.v_plus_0)

    @property
    def v_db(self) -> float:
        return to_db(self.v_plus_0 + self.v_minus_0)


def optimal_x(
    config_family: ConfigFamily | NetworkConfig,
    n_samples: int = 1000,
    x_th: float | None = None,
    refine: bool = False,
) -> OptimalPump:
    """Grid search for the pump minimising ``V+(0)``.

    The grid is ``x = k x_th / n_samples`` for ``k = 1..n_samples``; points
    where the chain is not stable are skipped.  With ``refine`` the grid
    minimiser is polished by a bounded scalar search between its neighbours.
    """
    if n_samples < 2:
        raise SweepError("need at least two samples")
    family = _family(config_family)
    if x_th is None:
        x_th = stability_threshold(family(0.5))
    xs = np.arange(1, n_samples + 1) * x_th / n_samples
    best = None
    for x in xs:
        cfg = family(float(x))
        if not is_hurwitz(assemble_state_space(cfg))[0]:
            continue
        vp, vm = v_at_zero(cfg)
        if best is None or vp < best[1]:
            best = (float(x), vp, vm)
    if best is None:
        raise SweepError("no stable grid point")
    if refine:
        from scipy.optimize import minimize_scalar

        step = x_th / n_samples
        lo, hi = max(best[0] - step, step * 1e-3), min(best[0] + step, x_th * (1 - 1e-9))
        res = minimize_scalar(
            lambda x: v_at_zero(family(x))[0], bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-12},
        )
        if res.fun < best[1]:
            vp, vm = v_at_zero(family(res.x))
            best = (float(res.x), vp, vm)
    return OptimalPump(x_opt=best[0], v_plus_0=best[1], v_minus_0=best[2], x_th=x_th)


def threshold_approach_curve(
    n_nopas: int,
    k_grid: Iterable[float] | None = None,
    *,
    y: float = 1.0,
) -> SweepResult:
    """``V(0)`` of a lossless chain at ``x = k x_th`` for ``k`` in [0.5, 1)."""
    k_grid = np.linspace(0.5, 0.999, 100) if k_grid is None else np.asarray(list(k_grid), float)
    if np.any(k_grid < 0.5) or np.any(k_grid >= 1.0):
        raise SweepError("k must lie in [0.5, 1)")
    base = scenario_config(n_nopas, 0.5, LossScenario.LOSSLESS, y=y)
    x_th = stability_threshold(base)
    result = SweepResult(SweepKind.THRESHOLD_APPROACH, metadata={"x_th": x_th})
    for k in k_grid:
        x = float(k * x_th)
        vp, vm = v_at_zero(base.with_x(x))
        result.records.append(SweepRecord(n_nopas, x, vp, vm, LossScenario.LOSSLESS.value, float(k)))
    return result


# ---------------------------------------------------------------------------
# table drivers


def equal_power_table(
    n_range: Iterable[int] = range(2, 7),
    scenarios: Sequence[LossScenario | str] = tuple(LossScenario),
    x_ref: float = 0.13,
    n_ref: int = 6,
) -> SweepResult:
    result = SweepResult(SweepKind.EQUAL_POWER, metadata={"x_ref": x_ref, "n_ref": n_ref})
    for sc in map(LossScenario, scenarios):
        for n in n_range:
            x = equal_power_x(n, x_ref, n_ref, sc)
            vp, vm = v_at_zero(scenario_config(n, x, sc))
            result.records.append(SweepRecord(n, x, vp, vm, sc.value))
    return result


def target_db_table(
    target_db: float = -25.0,
    n_range: Iterable[int] = range(2, 7),
    lossy_scenarios: Sequence[LossScenario | str] = (
        LossScenario.TRANSMISSION_ONLY,
        LossScenario.TRANSMISSION_AND_AMPLIFICATION,
    ),
    x_decimals: int | None = 4,
) -> SweepResult:
    """Pump reaching ``target_db`` without losses, then the lossy spectra at it.

    The lossy rows are evaluated at the pump rounded to ``x_decimals``
    places (``None`` keeps full precision), matching how the pump is quoted.
    """
    result = SweepResult(SweepKind.TARGET_DB, metadata={"target_db": target_db})
    for n in n_range:
        base = scenario_config(n, 0.5, LossScenario.LOSSLESS)
        x = find_x_for_target_v0(base, target_db)
        vp, vm = v_at_zero(base.with_x(x))
        result.records.append(SweepRecord(n, x, vp, vm, LossScenario.LOSSLESS.value))
        x_eval = x if x_decimals is None else round(x, x_decimals)
        for sc in map(LossScenario, lossy_scenarios):
            vp, vm = v_at_zero(scenario_config(n, x_eval, sc))
            result.records.append(SweepRecord(n, x_eval, vp, vm, sc.value))
    return result


def optimal_table(
    scenario: LossScenario | str,
    n_range: Iterable[int] = range(2, 7),
    n_samples: int = 1000,
    threshold_decimals: int | None = 4,
) -> SweepResult:
    """Grid-optimal pump per chain length for one loss scenario.

    The grid end point is the threshold as it would be reported, truncated
    to ``threshold_decimals`` places (``None`` uses full precision).
    """
    sc = LossScenario(scenario)
    result = SweepResult(
        SweepKind.OPTIMAL_X,
        metadata={"scenario": sc.value, "n_samples": n_samples, "threshold_decimals": threshold_decimals},
    )
    for n in n_range:
        base = scenario_config(n, 0.5, sc)
        x_th = stability_threshold(base)
        if threshold_decimals is not None:
            x_th = reported_threshold(x_th, threshold_decimals)
        opt = optimal_x(base, n_samples, x_th=x_th)
        result.records.append(SweepRecord(n, opt.x_opt, opt.v_plus_0, opt.v_minus_0, sc.value))
    return result
