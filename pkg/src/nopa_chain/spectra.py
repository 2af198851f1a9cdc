"""
Two-mode squeezing spectra of the outgoing fields.

``V+`` is the spectral variance of ``q_out_a + q_out_b`` and ``V-`` that of
``p_out_a - p_out_b``.  Both equal 2 for vacuum, so the sum criterion
``V+ + V- < 4`` certifies EPR entanglement.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
import scipy.linalg as sla

from .model import (
    FrequencyMatrices,
    NetworkConfig,
    StateSpace,
    assemble_state_space,
    delay_decomposition,
    theta_defaults,
)
from .stability import dde_rightmost_root, is_hurwitz

DB_FLOOR = -320.0
PLUS_ROW = np.array([1.0, 0.0, 1.0, 0.0])
MINUS_ROW = np.array([0.0, 1.0, 0.0, -1.0])

__all__ = [
    "SpectrumError",
    "UnstableConfigError",
    "SqueezingSpectrum",
    "transfer_function",
    "squeezing_spectra",
    "v_at_zero",
    "closed_form_v0",
    "closed_form_factor",
    "epr_entangled",
    "theta_defaults",
    "to_db",
    "default_omega_grid",
    "spectrum_to_csv",
    "spectrum_from_csv",
]


class SpectrumError(ArithmeticError):
    """Singular resolvent or other numerical failure."""


class UnstableConfigError(ValueError):
    """Spectra requested for a configuration that is not stable."""

    def __init__(self, message: str, diagnostic: dict):
        super().__init__(message)
        self.diagnostic = diagnostic


def to_db(v):
    """``10 log10 v`` with exact zeros mapped to the -320 dB floor."""
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(v)
    out = np.where(v == 0.0, DB_FLOOR, out)
    return float(out) if out.ndim == 0 else out


def default_omega_grid(n_points: int = 500) -> np.ndarray:
    return np.logspace(4.0, 10.0, n_points)


def transfer_function(
    model: StateSpace | FrequencyMatrices, omega: float | None = None
) -> np.ndarray:
    """``H(iw) = C (iw I - A)^{-1} B + D`` for a delay-free model or for
    matrices already evaluated at one frequency."""
    if isinstance(model, FrequencyMatrices):
        if omega is not None and not math.isclose(omega, model.omega, rel_tol=1e-15):
            raise ValueError("omega does not match the frequency matrices")
        omega = model.omega
        a, b, c, d = model.a_of_omega, model.b_of_omega, model.c_of_omega, model.d_of_omega
    else:
        if omega is None:
            raise ValueError("omega is required for a StateSpace")
        a, b, c, d = model.a_matrix, model.b_matrix, model.c_matrix, model.d_matrix
    resolvent = 1j * omega * np.eye(a.shape[0]) - a
    try:
        lu = sla.lu_factor(resolvent, check_finite=False)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SpectrumError(f"resolvent factorisation failed at omega={omega}") from exc
    if np.min(np.abs(np.diag(lu[0]))) <= 1e-14 * np.max(np.abs(np.diag(lu[0]))):
        raise SpectrumError(f"singular resolvent at omega={omega}: unstable or at threshold")
    return c @ sla.lu_solve(lu, b, check_finite=False) + d


def _v_pair(h: np.ndarray) -> tuple[float, float]:
    h1 = PLUS_ROW @ h
    h2 = MINUS_ROW @ h
    return float(np.vdot(h1, h1).real), float(np.vdot(h2, h2).real)


def v_at_zero(config: NetworkConfig) -> tuple[float, float]:
    """``(V+(0), V-(0))`` of the delay-free chain; no stability check."""
    ss = assemble_state_space(config)
    # at omega = 0 the resolvent is real
    h = ss.c_matrix @ np.linalg.solve(-ss.a_matrix, ss.b_matrix) + ss.d_matrix
    return _v_pair(h)


@dataclass
class SqueezingSpectrum:
    omega_grid: np.ndarray
    v_plus: np.ndarray
    v_minus: np.ndarray
    theta_a: float
    theta_b: float
    delayed: bool
    config: NetworkConfig | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def v_sum(self) -> np.ndarray:
        return self.v_plus + self.v_minus

    @property
    def v_plus_db(self) -> np.ndarray:
        return to_db(self.v_plus)

    @property
    def v_minus_db(self) -> np.ndarray:
        return to_db(self.v_minus)

    @property
    def v_sum_db(self) -> np.ndarray:
        return to_db(self.v_sum)

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "config": None if self.config is None else self.config.to_dict(),
            "theta_a": self.theta_a,
            "theta_b": self.theta_b,
            "delayed": self.delayed,
            "omega_rad_s": self.omega_grid.tolist(),
            "v_plus": self.v_plus.tolist(),
            "v_minus": self.v_minus.tolist(),
            "v_sum": self.v_sum.tolist(),
            "v_plus_db": np.atleast_1d(self.v_plus_db).tolist(),
            "v_minus_db": np.atleast_1d(self.v_minus_db).tolist(),
            "v_sum_db": np.atleast_1d(self.v_sum_db).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@functools.lru_cache(maxsize=64)
def _delayed_stability(config: NetworkConfig):
    return dde_rightmost_root(config)


def check_stable(config: NetworkConfig, delayed: bool) -> None:
    """Raise :class:`UnstableConfigError` unless the chain is stable."""
    if delayed:
        report = _delayed_stability(config)
        if not report.stable:
            raise UnstableConfigError(
                "delayed chain is unstable",
                {"rightmost_root": [report.rightmost_root.real, report.rightmost_root.imag]},
            )
    else:
        stable, max_re = is_hurwitz(assemble_state_space(config))
        if not stable:
            raise UnstableConfigError(
                f"drift matrix is not Hurwitz at x={config.x}",
                {"max_real_eigenvalue": max_re, "x": config.x},
            )


def squeezing_spectra(
    config: NetworkConfig,
    omega_grid=None,
    *,
    delayed: bool | None = None,
    check_stability: bool = True,
) -> SqueezingSpectrum:
    """``V+``, ``V-`` over ``omega_grid`` (rad/s).

    ``delayed`` defaults to ``config.tau > 0``.  With ``delayed=False`` the
    delay is ignored.  Stability is verified first: the Hurwitz test for the
    delay-free chain, the rightmost delay root otherwise.
    """
    omega_grid = default_omega_grid() if omega_grid is None else np.asarray(omega_grid, float)
    if delayed is None:
        delayed = config.tau > 0
    if delayed and config.tau <= 0:
        raise ValueError("delayed spectra need tau > 0")
    if check_stability:
        check_stable(config, delayed)

    v_plus = np.empty(omega_grid.size)
    v_minus = np.empty(omega_grid.size)
    if delayed:
        dec = delay_decomposition(config)
        for k, w in enumerate(omega_grid):
            v_plus[k], v_minus[k] = _v_pair(transfer_function(dec.evaluate(w)))
    else:
        ss = assemble_state_space(config)
        for k, w in enumerate(omega_grid):
            v_plus[k], v_minus[k] = _v_pair(transfer_function(ss, w))
    return SqueezingSpectrum(
        omega_grid=omega_grid,
        v_plus=v_plus,
        v_minus=v_minus,
        theta_a=config.theta_a,
        theta_b=config.theta_b,
        delayed=bool(delayed),
        config=config,
    )


# Closed forms of the lossless (y = 1) low-frequency spectra, written as
#   V(0) = 2 [(1+x^2)^(2N) + c2 x^2 P(x)^2 + c1 x (1+x^2)^N P(x) cos(theta_sum)] / Q(x)^2
# with P the bracketed polynomial and Q the denominator, both in powers of x^2.
_CLOSED_FORMS = {
    2: (16, 8, (-1, 1), (1, -6, 1)),
    3: (4, 4, (3, -10, 3), (-1, 15, -15, 1)),
    4: (64, 16, (-1, 7, -7, 1), (1, -28, 70, -28, 1)),
    5: (4, 4, (5, -60, 126, -60, 5), (-1, 45, -210, 210, -45, 1)),
    6: (16, 8, (-3, 55, -198, 198, -55, 3), (1, -66, 495, -924, 495, -66, 1)),
}


def _poly_x2(coeffs, x):
    x2 = x * x
    return sum(c * x2**k for k, c in enumerate(coeffs))


def closed_form_factor(n_nopas: int, x: float) -> float:
    """The bracketed polynomial whose sign fixes the optimal phase sum."""
    if n_nopas not in _CLOSED_FORMS:
        raise ValueError("closed forms exist for N = 2..6 only")
    return _poly_x2(_CLOSED_FORMS[n_nopas][2], x)


def closed_form_v0(n_nopas: int, x: float, theta_sum: float) -> float:
    """Low-frequency ``V+(0) = V-(0)`` of a lossless chain with ``y = 1``.

    The rational expression cancels heavily as ``x`` approaches the
    threshold (a root of the denominator), so it is evaluated with 40
    significant digits and rounded once at the end.
    """
    if n_nopas not in _CLOSED_FORMS:
        raise ValueError("closed forms exist for N = 2..6 only")
    c2, c1, p, q = _CLOSED_FORMS[n_nopas]
    with mpmath.workdps(40):
        xm = mpmath.mpf(x)
        x2 = xm * xm
        pv = sum(c * x2**k for k, c in enumerate(p))
        qv = sum(c * x2**k for k, c in enumerate(q))
        # the denominator coefficients are O(1..1000); treat a near-zero as a pole
        if abs(qv) < 1e-12 * sum(abs(c) * x2**k for k, c in enumerate(q)):
            raise ValueError(f"x={x} is a pole of the closed form")
        s = (1 + x2) ** n_nopas
        num = s * s + c2 * x2 * pv * pv + c1 * xm * s * pv * mpmath.cos(theta_sum)
        return float(2 * num / (qv * qv))


def epr_entangled(v_sum_at_omega: float) -> bool:
    """Sum criterion: entangled iff ``V+ + V- < 4``."""
    if v_sum_at_omega < 0:
        raise ValueError("spectra are non-negative")
    return v_sum_at_omega < 4.0


CSV_COLUMNS = ("omega_rad_s", "v_plus", "v_minus", "v_sum", "v_plus_db", "v_minus_db", "v_sum_db")


def spectrum_to_csv(spectrum: SqueezingSpectrum, header: str = "", digits: int | None = None) -> str:
    """CSV text, one row per grid point.

    ``digits=None`` writes shortest round-trip floats; otherwise values are
    written with that many significant digits.
    """
    fmt = repr if digits is None else (lambda v: f"{v:.{digits}g}")
    buf = io.StringIO()
    buf.write(header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    cols = (
        spectrum.omega_grid,
        spectrum.v_plus,
        spectrum.v_minus,
        spectrum.v_sum,
        np.atleast_1d(spectrum.v_plus_db),
        np.atleast_1d(spectrum.v_minus_db),
        np.atleast_1d(spectrum.v_sum_db),
    )
    for row in zip(*cols):
        w.writerow([fmt(float(v)) for v in row])
    return buf.getvalue()


def spectrum_from_csv(text: str) -> dict[str, np.ndarray]:
    """Parse :func:`spectrum_to_csv` output (comment lines starting with ``#``
    are skipped)."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    rows = [list(map(float, r)) for r in reader]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, k] for k, name in enumerate(header)}
