"""
Covariance dynamics of the cavity modes and their pairwise entanglement.

Covariances use the quadrature convention of :mod:`nopa_chain.model`, in
which the vacuum covariance is the identity.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .model import NetworkConfig, StateSpace, assemble_state_space
from .stability import is_hurwitz

SEPARABLE_NU = 1.0 - 1e-12
RADICAND_TOL = 1e-12


class CovarianceError(ArithmeticError):
    """Numerical failure while computing a covariance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class CovarianceMatrix:
    p_matrix: np.ndarray
    time: float | None = None  # None marks the steady state

    @property
    def steady_state(self) -> bool:
        return self.time is None


def _duplication(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Duplication and elimination matrices for symmetric n x n matrices.

    Column-major ``vec``; ``vech`` keeps the lower triangle.
    """
    pairs = [(i, j) for j in range(n) for i in range(j, n)]
    dup = np.zeros((n * n, len(pairs)))
    elim = np.zeros((len(pairs), n * n))
    for k, (i, j) in enumerate(pairs):
        dup[i + j * n, k] = 1.0
        dup[j + i * n, k] = 1.0
        elim[k, i + j * n] = 1.0
    return dup, elim


def lyapunov_residual(a: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    """Frobenius norm of ``A P + P A^T + Q``."""
    return float(np.linalg.norm(a @ p + p @ a.T + q))


def solve_lyapunov(a: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve ``A P + P A^T + Q = 0`` for symmetric ``Q`` by vectorisation.

    The Kronecker system ``(I ⊗ A + A ⊗ I) vec P = -vec Q`` is restricted to
    the ``n(n+1)/2`` independent entries of the symmetric solution.
    """
    n = a.shape[0]
    eye = np.eye(n)
    kron_sum = np.kron(eye, a) + np.kron(a, eye)
    dup, elim = _duplication(n)
    lhs = elim @ kron_sum @ dup
    rhs = -elim @ q.reshape(-1, order="F")
    vech = np.linalg.solve(lhs, rhs)
    p = (dup @ vech).reshape(n, n, order="F")
    return 0.5 * (p + p.T)


def steady_state_covariance(ss: StateSpace, rel_tol: float = 1e-10) -> CovarianceMatrix:
    """Stationary covariance of a stable chain driven by vacuum noise."""
    stable, max_re = is_hurwitz(ss)
    if not stable:
        raise ValueError(f"drift matrix is not Hurwitz (max real eigenvalue {max_re:.3e})")
    a = ss.a_matrix
    q = ss.b_matrix @ ss.b_matrix.T
    # scale time so the linear system is O(1)
    scale = max(np.abs(a).max(), 1.0)
    try:
        p = solve_lyapunov(a / scale, q / scale)
    except np.linalg.LinAlgError as exc:
        raise CovarianceError(f"Lyapunov solve failed: {exc}") from exc
    res = lyapunov_residual(a, p, q)
    bound = rel_tol * np.linalg.norm(q)
    if not res < bound:
        raise CovarianceError(f"Lyapunov residual {res:.3e} exceeds {bound:.3e}", residual=res)
    return CovarianceMatrix(p_matrix=p, time=None)


@dataclass
class CovarianceTrajectory(Sequence):
    """Sampled solution of the covariance ODE."""

    times: np.ndarray
    p_matrices: np.ndarray  # shape (n_samples, n, n)

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        return CovarianceMatrix(p_matrix=self.p_matrices[k], time=float(self.times[k]))

    def __iter__(self) -> Iterator[CovarianceMatrix]:
        for k in range(len(self)):
            yield self[k]


def covariance_trajectory(
    ss: StateSpace | tuple[np.ndarray, np.ndarray],
    p0: CovarianceMatrix | np.ndarray | None = None,
    t_end: float = 2e-7,
    dt: float = 1e-10,
    atol: float = 1e-12,
    rtol: float = 1e-10,
) -> CovarianceTrajectory:
    """Integrate ``dP/dt = A P + P A^T + B B^T`` from ``p0`` (default: vacuum).

    Uses an adaptive Runge-Kutta 4(5) pair; samples are taken every ``dt``
    seconds up to ``t_end`` inclusive and symmetrised.  ``ss`` may also be
    a ``(A, B B^T)`` pair.
    """
    if isinstance(ss, StateSpace):
        a, q = ss.a_matrix, ss.b_matrix @ ss.b_matrix.T
    else:
        a, q = (np.asarray(m, dtype=float) for m in ss)
    n = a.shape[0]
    if p0 is None:
        p0 = np.eye(n)
    elif isinstance(p0, CovarianceMatrix):
        p0 = p0.p_matrix
    p0 = np.asarray(p0, dtype=float)
    if not np.allclose(p0, p0.T, atol=1e-12):
        raise ValueError("initial covariance must be symmetric")
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")

    n_steps = int(round(t_end / dt))
    times = np.arange(n_steps + 1) * dt
    if n_steps == 0:
        return CovarianceTrajectory(times=times, p_matrices=p0[None].copy())

    # dimensionless time keeps the step controller well scaled
    scale = max(np.abs(a).max(), 1.0 / max(t_end, 1e-300))
    a_s, q_s = a / scale, q / scale

    def rhs(_, y):
        p = y.reshape(n, n)
        ap = a_s @ p
        return (ap + ap.T + q_s).ravel()

    sol = solve_ivp(
        rhs,
        (0.0, times[-1] * scale),
        p0.ravel(),
        method="RK45",
        t_eval=times * scale,
        atol=atol,
        rtol=rtol,
    )
    if sol.status != 0:
        raise CovarianceError(f"integration failed: {sol.message}")
    ps = sol.y.T.reshape(-1, n, n)
    ps = 0.5 * (ps + ps.transpose(0, 2, 1))
    ps[0] = p0
    return CovarianceTrajectory(times=times, p_matrices=ps)


_MODE_RE = re.compile(r"^\s*([ab])_?\[?(\d+)\]?\s*$")


def _parse_mode(mode) -> tuple[str, int]:
    if isinstance(mode, tuple):
        kind, idx = mode
    else:
        m = _MODE_RE.match(str(mode))
        if not m:
            raise ValueError(f"cannot parse mode {mode!r}; use e.g. 'a1' or ('b', 6)")
        kind, idx = m.group(1), int(m.group(2))
    if kind not in ("a", "b"):
        raise ValueError(f"mode kind must be 'a' or 'b', got {kind!r}")
    return kind, int(idx)


def mode_indices(mode, n_nopas: int) -> list[int]:
    """Zero-based rows of a cavity mode's (q, p) quadratures."""
    kind, idx = _parse_mode(mode)
    if not (1 <= idx <= n_nopas):
        raise IndexError(f"mode index {idx} outside 1..{n_nopas}")
    base = 4 * (idx - 1) + (0 if kind == "a" else 2)
    return [base, base + 1]


def mode_pair_submatrix(p: CovarianceMatrix | np.ndarray, mode_1, mode_2) -> np.ndarray:
    """4x4 covariance of two cavity modes, ordered (mode_1 q, p, mode_2 q, p)."""
    pm = p.p_matrix if isinstance(p, CovarianceMatrix) else np.asarray(p)
    n_nopas = pm.shape[0] // 4
    if _parse_mode(mode_1) == _parse_mode(mode_2):
        raise ValueError("modes must be distinct")
    idx = mode_indices(mode_1, n_nopas) + mode_indices(mode_2, n_nopas)
    return pm[np.ix_(idx, idx)]


def collective_covariance(p: CovarianceMatrix | np.ndarray, n_nopas: int) -> np.ndarray:
    """Covariance of the collective modes ``a_c = sum(a_i)/sqrt(N)`` and
    ``b_c = sum(b_i)/sqrt(N)``, ordered (a_c q, p, b_c q, p)."""
    pm = p.p_matrix if isinstance(p, CovarianceMatrix) else np.asarray(p)
    if pm.shape != (4 * n_nopas, 4 * n_nopas):
        raise ValueError("covariance size does not match n_nopas")
    m = np.kron(np.ones((1, n_nopas)), np.eye(4)) / math.sqrt(n_nopas)
    return m @ pm @ m.T


@dataclass
class NegativityReport:
    pair_label: tuple[str, str]
    nu: float
    e_value: float
    time: float | None = None

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair_label),
            "nu": self.nu,
            "e_value": self.e_value,
            "time": self.time,
        }


def log_negativity(p4: np.ndarray, pair_label: tuple[str, str] = ("1", "2")) -> NegativityReport:
    """Logarithmic negativity of a two-mode Gaussian state.

    ``nu`` is the smaller symplectic eigenvalue of the partially transposed
    covariance; ``E = max(0, -log2 nu)``, and ``nu >= 1 - 1e-12`` counts as
    separable.
    """
    p4 = np.asarray(p4, dtype=float)
    if p4.shape != (4, 4):
        raise ValueError("expected a 4x4 covariance")
    p1, p2, p3 = p4[:2, :2], p4[:2, 2:], p4[2:, 2:]
    delta = np.linalg.det(p1) + np.linalg.det(p3) - 2.0 * np.linalg.det(p2)
    det_p = np.linalg.det(p4)
    inner = delta * delta - 4.0 * det_p
    if inner < 0:
        if inner < -RADICAND_TOL * max(1.0, delta * delta):
            raise ArithmeticError(f"negative radicand {inner:.3e}: unphysical covariance")
        inner = 0.0
    outer = 0.5 * (delta - math.sqrt(inner))
    if outer < 0:
        if outer < -RADICAND_TOL * max(1.0, abs(delta)):
            raise ArithmeticError(f"negative radicand {outer:.3e}: unphysical covariance")
        outer = 0.0
    nu = math.sqrt(outer)
    if nu >= SEPARABLE_NU:
        e = 0.0
    elif nu == 0.0:
        e = math.inf
    else:
        e = -math.log2(nu)
    return NegativityReport(pair_label=tuple(pair_label), nu=nu, e_value=e)


def suite_pairs(n_nopas: int) -> list[tuple[str, str]]:
    """Mode pairs tracked for an N-NOPA chain, ending with the collective pair."""
    n = n_nopas
    pairs = [(f"a{i}", f"b{i}") for i in range(1, n + 1)]
    pairs += [(f"a{i}", f"b{i + 1}") for i in range(1, n)]
    pairs += [(f"a{i + 1}", f"b{i}") for i in range(1, n)]
    pairs += [("a1", f"b{n}"), (f"a{n}", "b1"), ("a_c", "b_c")]
    # for N = 2 the end-to-end pairs coincide with the neighbour pairs
    return list(dict.fromkeys(pairs))


def _pair_negativity(pm: np.ndarray, n_nopas: int, pair: tuple[str, str]) -> NegativityReport:
    if pair == ("a_c", "b_c"):
        return log_negativity(collective_covariance(pm, n_nopas), pair)
    return log_negativity(mode_pair_submatrix(pm, *pair), pair)


def negativity_suite(
    config: NetworkConfig, pairs: Sequence[tuple[str, str]] | None = None
) -> list[NegativityReport]:
    """Steady-state log-negativities of the standard mode pairs."""
    ss = assemble_state_space(config)
    pm = steady_state_covariance(ss).p_matrix
    pairs = suite_pairs(config.n_nopas) if pairs is None else pairs
    return [_pair_negativity(pm, config.n_nopas, pair) for pair in pairs]


@dataclass
class NegativityTrajectories:
    times: np.ndarray
    values: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)

    def to_csv(self, header: str = "", digits: int = 10) -> str:
        buf = io.StringIO()
        buf.write(header)
        w = csv.writer(buf, lineterminator="\n")
        labels = list(self.values)
        w.writerow(["t"] + [f"E({a}-{b})" for a, b in labels])
        for k, t in enumerate(self.times):
            w.writerow([f"{t:.{digits}g}"] + [f"{self.values[lab][k]:.{digits}g}" for lab in labels])
        return buf.getvalue()


def negativity_trajectories(
    config: NetworkConfig,
    t_end: float = 2e-7,
    dt: float = 1e-10,
    pairs: Sequence[tuple[str, str]] | None = None,
) -> NegativityTrajectories:
    """Log-negativities along the vacuum-seeded covariance trajectory."""
    ss = assemble_state_space(config)
    traj = covariance_trajectory(ss, None, t_end, dt)
    pairs = suite_pairs(config.n_nopas) if pairs is None else pairs
    values = {
        pair: np.array([_pair_negativity(pm, config.n_nopas, pair).e_value for pm in traj.p_matrices])
        for pair in pairs
    }
    return NegativityTrajectories(times=traj.times, values=values)


def reports_to_json(reports: Sequence[NegativityReport], metadata: dict | None = None) -> str:
    return json.dumps(
        {"metadata": metadata or {}, "negativities": [r.to_dict() for r in reports]}, indent=2
    )
