"""
Stability of the chain: Hurwitz tests, pump thresholds and delay spectra.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import mpmath
import numpy as np
import scipy.linalg as sla

from .model import (
    GAMMA_R,
    LossScenario,
    NetworkConfig,
    StateSpace,
    assemble_state_space,
    delay_decomposition,
    scenario_config,
)


class StabilityError(ArithmeticError):
    """Numerical failure inside a stability computation."""


class NoThresholdError(ValueError):
    """No stability threshold exists in (0, 1]."""


class NonMonotoneError(ValueError):
    """Probing found stability regained after it was lost."""


class Method(str, enum.Enum):
    EIGEN_REDUCTION = "eigen_reduction"
    BISECTION = "bisection"


MARGINAL_FRACTION = 1e-9


def _newton_eig(block, lam0: complex, tol, max_iter: int = 12):
    """Polish an eigenvalue estimate by Newton's method on ``log det(B - lam I)``.

    Returns ``None`` when the iteration does not settle (clustered or
    defective eigenvalues), so the caller can fall back to a full solve.
    """
    n = block.rows
    eye = mpmath.eye(n)
    lam = mpmath.mpf(lam0.real) if lam0.imag == 0 else mpmath.mpc(lam0)
    for _ in range(max_iter):
        try:
            inv = mpmath.inverse(block - lam * eye)
        except ZeroDivisionError:
            return lam
        step = 1 / sum(inv[k, k] for k in range(n))
        lam += step
        if abs(step) < tol:
            return lam
    return None


def _max_real_eig_refined(a: np.ndarray, scale: float) -> float:
    # eigenvalues near the imaginary axis, polished to 40 digits one
    # decoupled block at a time; the rest keep their LAPACK values
    best = -math.inf
    band = MARGINAL_FRACTION
    with mpmath.workdps(40):
        tol = mpmath.mpf(10) ** -30
        for idx in _decoupled_groups([a]):
            if idx.size == 1:
                best = max(best, float(a[idx[0], idx[0]]))
                continue
            scaled = a[np.ix_(idx, idx)] / scale
            ev = np.linalg.eigvals(scaled)
            near = np.abs(ev.real) <= 10 * band
            if np.any(~near):
                best = max(best, float(ev.real[~near].max()) * scale)
            block = mpmath.matrix(scaled.tolist())
            polished = [_newton_eig(block, complex(e), tol) for e in ev[near]]
            if any(p is None for p in polished):
                polished = mpmath.eig(block, left=False, right=False)
            for e in polished:
                best = max(best, float(mpmath.re(e)) * scale)
    return best


def is_hurwitz(ss: StateSpace | np.ndarray, scale: float = GAMMA_R) -> tuple[bool, float]:
    """Return ``(stable, max_real_eigenvalue)`` for the drift matrix.

    Eigenvalues whose real part lies in ``(-1e-9 * scale, 0]`` sit too
    close to the axis for a double-precision verdict, so they are recomputed
    in extended precision before classification.
    """
    a = ss.a_matrix if isinstance(ss, StateSpace) else np.asarray(ss, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("drift matrix must be square")
    try:
        ev = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise StabilityError(f"eigenvalue solver failed: {exc}") from exc
    max_re = float(ev.real.max())
    if -MARGINAL_FRACTION * scale < max_re <= MARGINAL_FRACTION * scale:
        max_re = _max_real_eig_refined(a, scale)
    return max_re < 0.0, max_re


@dataclass
class StabilityReport:
    n_nopas: int
    loss_scenario: LossScenario
    x_th: float
    method: Method
    max_real_eig_at: list[tuple[float, float]] = field(default_factory=list)
    stable_on_full_range: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss_scenario"] = self.loss_scenario.value
        d["method"] = self.method.value
        d["max_real_eig_at"] = [list(p) for p in self.max_real_eig_at]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _lower_feedback(config: NetworkConfig, kappa: float) -> np.ndarray:
    """``A_u(0)``: diagonal ``m``, ``alpha**k * gamma`` k places below it."""
    n = config.n_nopas
    g = config.nopa.gamma
    m = 0.5 * (g + kappa)
    k = np.subtract.outer(np.arange(n), np.arange(n))
    low = np.where(k > 0, g * config.alpha ** np.clip(k, 0, None), 0.0)
    return m * np.eye(n) + low


def threshold_eigen_reduction(config: NetworkConfig, kappa_fixed: float | None = None) -> float:
    """Stability threshold from the reduced symmetric eigenproblem.

    ``det A_N(x)`` factors as ``det(A_u A_l - n(x)^2 I)^2`` with
    ``n(x) = x * gamma_r / 2`` and ``A_l = A_u^T``, so the first root in x
    is set by the smallest eigenvalue of ``A_u A_u^T``.  Needs a damping
    that does not depend on x; pass ``kappa_fixed`` to override the
    configuration's amplification loss.
    """
    if kappa_fixed is None:
        if config.amplification_loss_on:
            raise ValueError(
                "amplification loss scales with x; pass kappa_fixed or use bisection_threshold"
            )
        kappa_fixed = 0.0
    if kappa_fixed < 0:
        raise ValueError("kappa_fixed must be non-negative")
    au = _lower_feedback(config, kappa_fixed)
    lam = sla.eigvalsh(au @ au.T)
    lam = lam[lam > 0]
    n_max_sq = (0.5 * config.nopa.gamma_r) ** 2
    if lam.size == 0 or lam[0] > n_max_sq * (1 + 1e-15):
        raise NoThresholdError("no stability threshold in (0, 1]")
    return min(1.0, 2.0 / config.nopa.gamma_r * math.sqrt(lam[0]))


ConfigFamily = Callable[[float], NetworkConfig]


def _as_family(config_family: ConfigFamily | NetworkConfig) -> ConfigFamily:
    if isinstance(config_family, NetworkConfig):
        return config_family.with_x
    return config_family


def bisection_threshold(
    config_family: ConfigFamily | NetworkConfig,
    eps_tol: float = 1e-10,
    n_probe: int = 16,
) -> StabilityReport:
    """Largest stable pump ``x_hat`` with ``x_hat <= x_th < x_hat + eps_tol``.

    Starts from ``x = 1``; if the chain is already stable there the report
    has ``x_th = 1`` and ``stable_on_full_range`` set.  Otherwise the
    interval ``(0, 1]`` is halved until narrower than ``eps_tol``.
    ``config_family`` maps x to a configuration, so damping that grows with
    the pump is handled naturally.  A coarse probe grid guards against a
    stability region that is not an interval starting at zero.
    """
    if eps_tol <= 0:
        raise ValueError("eps_tol must be positive")
    family = _as_family(config_family)
    probes: list[tuple[float, float]] = []

    def probe(x: float) -> bool:
        stable, max_re = is_hurwitz(assemble_state_space(family(x)))
        probes.append((x, max_re))
        return stable

    cfg1 = family(1.0)
    if probe(1.0):
        return StabilityReport(
            n_nopas=cfg1.n_nopas,
            loss_scenario=cfg1.loss_scenario,
            x_th=1.0,
            method=Method.BISECTION,
            max_real_eig_at=probes,
            stable_on_full_range=True,
        )

    verdicts = [probe(x) for x in np.linspace(1.0 / n_probe, 1.0, n_probe)[:-1]]
    lost = False
    for x, ok in zip(np.linspace(1.0 / n_probe, 1.0, n_probe)[:-1], verdicts):
        if not ok:
            lost = True
        elif lost:
            raise NonMonotoneError(f"stability regained at x={x:.4g} after being lost")

    x_l, x_h = 0.0, 1.0
    while x_h - x_l > eps_tol:
        mid = 0.5 * (x_h + x_l)
        if probe(mid):
            x_l = mid
        else:
            x_h = mid
    return StabilityReport(
        n_nopas=cfg1.n_nopas,
        loss_scenario=cfg1.loss_scenario,
        x_th=x_l,
        method=Method.BISECTION,
        max_real_eig_at=probes,
    )


def stability_threshold(config: NetworkConfig, eps_tol: float = 1e-10) -> float:
    """Threshold for ``config``'s chain, choosing the exact route when it applies."""
    if config.amplification_loss_on:
        return bisection_threshold(config, eps_tol).x_th
    return threshold_eigen_reduction(config)


def threshold_table(
    scenarios: Iterable[LossScenario | str] = tuple(LossScenario),
    n_range: Iterable[int] = range(2, 7),
    *,
    y: float = 1.0,
    distance_km: float = 1.0,
    eps_tol: float = 1e-10,
) -> list[StabilityReport]:
    """Thresholds for every chain length and loss scenario.

    Scenarios with constant damping use the eigen reduction; amplification
    loss (damping proportional to x) falls back to bisection.
    """
    reports = []
    scenarios = [LossScenario(s) for s in scenarios]
    for n in n_range:
        for sc in scenarios:
            cfg = scenario_config(n, 0.5, sc, y=y, distance_km=distance_km)
            if sc.amplification_loss_on:
                reports.append(bisection_threshold(cfg, eps_tol))
            else:
                x_th = threshold_eigen_reduction(cfg)
                _, below = is_hurwitz(assemble_state_space(cfg.with_x(0.5 * x_th)))
                reports.append(
                    StabilityReport(
                        n_nopas=n,
                        loss_scenario=sc,
                        x_th=x_th,
                        method=Method.EIGEN_REDUCTION,
                        max_real_eig_at=[(0.5 * x_th, below)],
                    )
                )
    return reports


def threshold_table_csv(reports: Sequence[StabilityReport], header: str = "") -> str:
    buf = io.StringIO()
    buf.write(header)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["N", "scenario", "x_th", "method"])
    for r in reports:
        writer.writerow([r.n_nopas, r.loss_scenario.value, f"{r.x_th:.10g}", r.method.value])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# delay systems


@dataclass
class DdeSpectrumReport:
    discretization_order: int
    rightmost_root: complex
    converged: bool
    root_history: list[tuple[int, complex]] = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return self.rightmost_root.real < 0

    def to_dict(self) -> dict:
        return {
            "discretization_order": self.discretization_order,
            "rightmost_root": [self.rightmost_root.real, self.rightmost_root.imag],
            "converged": self.converged,
            "stable": self.stable,
            "root_history": [[m, [z.real, z.imag]] for m, z in self.root_history],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class DdeConvergenceError(StabilityError):
    def __init__(self, message: str, root_history: list[tuple[int, complex]]):
        super().__init__(message)
        self.root_history = root_history


def chebyshev_differentiation(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev extreme points ``cos(j pi / M)`` on [-1, 1] and their
    differentiation matrix."""
    if order < 1:
        raise ValueError("order must be at least 1")
    j = np.arange(order + 1)
    x = np.cos(np.pi * j / order)
    c = np.where((j == 0) | (j == order), 2.0, 1.0) * (-1.0) ** j
    dx = np.subtract.outer(x, x) + np.eye(order + 1)
    d = np.outer(c, 1.0 / c) / dx
    d -= np.diag(d.sum(axis=1))
    return x, d


def _barycentric_row(nodes: np.ndarray, point: float) -> np.ndarray:
    m = nodes.size - 1
    w = (-1.0) ** np.arange(m + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    diff = point - nodes
    hit = np.flatnonzero(np.abs(diff) < 1e-14)
    if hit.size:
        row = np.zeros(m + 1)
        row[hit[0]] = 1.0
        return row
    t = w / diff
    return t / t.sum()


def _decoupled_groups(mats: Iterable[np.ndarray]) -> list[np.ndarray]:
    """Index sets of the connected components of the combined sparsity pattern."""
    pattern = None
    for m in mats:
        nz = np.abs(m) > 0
        pattern = nz if pattern is None else pattern | nz
    pattern = pattern | pattern.T
    n = pattern.shape[0]
    seen = np.zeros(n, dtype=bool)
    groups = []
    for start in range(n):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in np.flatnonzero(pattern[i] & ~seen):
                seen[j] = True
                stack.append(j)
        groups.append(np.array(sorted(comp)))
    return groups


def dde_generator(
    delay_matrices: dict[int, np.ndarray], tau: float, order: int
) -> np.ndarray:
    """Collocation matrix of the solution operator's generator.

    The DDE is ``dz/dt = sum_k A_k z(t - k tau)``.  The history segment on
    ``[-K tau, 0]`` is represented on ``order + 1`` Chebyshev nodes; the
    first block row imposes the DDE at ``theta = 0`` and the remaining rows
    differentiate the segment.
    """
    k_max = max(delay_matrices)
    if k_max == 0 or tau <= 0:
        raise ValueError("generator needs a positive delay")
    span = k_max * tau
    n = delay_matrices[0].shape[0]
    nodes, diff = chebyshev_differentiation(order)
    gen = np.zeros(((order + 1) * n, (order + 1) * n))
    gen[n:, :] = np.kron(diff[1:, :] * (2.0 / span), np.eye(n))
    for k, a_k in delay_matrices.items():
        row = _barycentric_row(nodes, 1.0 - 2.0 * k / k_max)
        gen[:n, :] += np.kron(row[None, :], a_k)
    return gen


def _rightmost(delay_matrices: dict[int, np.ndarray], tau: float, order: int, scale: float) -> complex:
    groups = _decoupled_groups(delay_matrices.values())
    best = None
    for idx in groups:
        sub = {k: m[np.ix_(idx, idx)] / scale for k, m in delay_matrices.items()}
        ev = sla.eigvals(dde_generator(sub, tau * scale, order), check_finite=False)
        cand = ev[np.argmax(ev.real)]
        if best is None or cand.real > best.real:
            best = cand
    return complex(best.real * scale, abs(best.imag) * scale)


def dde_rightmost_root(
    config: NetworkConfig,
    start_order: int = 20,
    max_order: int = 512,
    rel_tol: float = 1e-6,
) -> DdeSpectrumReport:
    """Rightmost characteristic root of the delayed chain.

    Every drift coefficient that crosses k fibre segments acts on the state
    delayed by ``k * tau``.  The order is doubled from ``start_order`` until
    two successive estimates of the rightmost root agree to
    ``rel_tol * max(1, |root|)``.  The imaginary part is reported as
    non-negative since roots come in conjugate pairs.
    """
    if config.tau <= 0:
        raise ValueError("dde_rightmost_root needs tau > 0")
    dec = delay_decomposition(config)
    mats = {k: m for k, m in dec.a_terms.items() if k == 0 or np.any(m)}
    scale = config.nopa.gamma_r
    history: list[tuple[int, complex]] = []
    order = start_order
    while order <= max_order:
        root = _rightmost(mats, config.tau, order, scale)
        history.append((order, root))
        if len(history) > 1:
            prev = history[-2][1]
            if abs(root - prev) < rel_tol * max(1.0, abs(root)):
                return DdeSpectrumReport(
                    discretization_order=order,
                    rightmost_root=root,
                    converged=True,
                    root_history=history,
                )
        order *= 2
    raise DdeConvergenceError(
        f"rightmost root did not settle up to order {max_order}", history
    )
