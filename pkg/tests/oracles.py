"""Independent reference computations for the test suite.

None of these reuse the chain assembly of the package: the cascade oracle
works from single-NOPA Langevin equations and beamsplitter relations in the
frequency domain, and the delay stepper integrates the delay equations in
the time domain.
"""

from __future__ import annotations

import math

import numpy as np

from nopa_chain.model import NetworkConfig, input_labels


def _rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def single_nopa_response(config: NetworkConfig, omega: float) -> np.ndarray:
    """4x8 response of one NOPA: outputs (a, b) against inputs (in_a, in_b, loss_a, loss_b)."""
    p = config.nopa
    m = 0.5 * (p.gamma + p.kappa)
    e = 0.5 * p.epsilon
    # quadrature form of da/dt = -m a + e b^*, db/dt = -m b + e a^*
    a = np.array(
        [
            [-m, 0, e, 0],
            [0, -m, 0, -e],
            [e, 0, -m, 0],
            [0, -e, 0, -m],
        ],
        dtype=float,
    )
    b = np.hstack([-math.sqrt(p.gamma) * np.eye(4), -math.sqrt(p.kappa) * np.eye(4)])
    c = math.sqrt(p.gamma) * np.eye(4)
    d = np.hstack([np.eye(4), np.zeros((4, 4))])
    return c @ np.linalg.solve(1j * omega * np.eye(4) - a, b) + d


def cascade_transfer(config: NetworkConfig, omega: float, delayed: bool = True) -> np.ndarray:
    """Chain transfer matrix (4 x 8N) in the package's input ordering.

    Unknowns are the fields entering each NOPA; the a-path runs left to
    right and the b-path right to left, each segment attenuating by alpha,
    admitting beamsplitter noise with weight beta and delaying by tau.
    """
    n = config.n_nopas
    labels = input_labels(n)
    col = {lab: k for k, lab in enumerate(labels)}
    n_in = len(labels)
    g = single_nopa_response(config, omega)
    lag = np.exp(-1j * omega * config.tau) if delayed else 1.0
    alpha, beta = config.alpha, config.beta

    def ext(name: str, idx: int) -> np.ndarray:
        out = np.zeros((2, n_in), dtype=complex)
        out[0, col[f"xi_{name}_q[{idx}]"]] = 1.0
        out[1, col[f"xi_{name}_p[{idx}]"]] = 1.0
        return out

    # unknown vector: u_a[1..N] then u_b[1..N], two quadratures each
    def ua(i):
        return slice(2 * (i - 1), 2 * i)

    def ub(j):
        return slice(2 * n + 2 * (j - 1), 2 * n + 2 * j)

    n_u = 4 * n
    lhs = np.eye(n_u, dtype=complex)
    rhs = np.zeros((n_u, n_in), dtype=complex)

    def nopa_out(i):
        """(coefficient on unknowns, coefficient on external inputs) of outputs y_a[i], y_b[i]."""
        cu = np.zeros((4, n_u), dtype=complex)
        cu[:, ua(i)] += g[:, 0:2]
        cu[:, ub(i)] += g[:, 2:4]
        ce = g[:, 4:6] @ ext("loss_a", i) + g[:, 6:8] @ ext("loss_b", i)
        return cu, ce

    for i in range(1, n + 1):
        if i == 1:
            rhs[ua(1)] = ext("in_a", 1)
        else:
            cu, ce = nopa_out(i - 1)
            lhs[ua(i)] -= lag * alpha * cu[0:2]
            rhs[ua(i)] += lag * (alpha * ce[0:2] + beta * ext("BS_a", i - 1))
    for j in range(n, 0, -1):
        if j == n:
            rhs[ub(n)] = ext("in_b", n)
        else:
            cu, ce = nopa_out(j + 1)
            lhs[ub(j)] -= lag * alpha * cu[2:4]
            rhs[ub(j)] += lag * (alpha * ce[2:4] + beta * ext("BS_b", j + 1))
    u = np.linalg.solve(lhs, rhs)

    cu_n, ce_n = nopa_out(n)
    cu_1, ce_1 = nopa_out(1)
    out_a = cu_n[0:2] @ u + ce_n[0:2]
    out_b = cu_1[2:4] @ u + ce_1[2:4]
    return np.vstack([_rot(config.theta_a) @ out_a, _rot(config.theta_b) @ out_b])


def spectra_from_transfer(h: np.ndarray) -> tuple[float, float]:
    h1 = h[0] + h[2]
    h2 = h[1] - h[3]
    return float(np.vdot(h1, h1).real), float(np.vdot(h2, h2).real)


def delay_growth_rate(
    a_terms: dict[int, np.ndarray],
    tau: float,
    steps_per_tau: int,
    t_end: float,
    seed: int = 0,
) -> float:
    """Asymptotic growth rate of ``dz/dt = sum_k A_k z(t - k tau)``.

    Heun's method on a grid aligned with tau (method of steps), seeded with
    a random constant history.  The rate is the least-squares slope of
    ``log |z|`` over the second half of the run.
    """
    h = tau / steps_per_tau
    n_steps = int(math.ceil(t_end / h))
    dim = next(iter(a_terms.values())).shape[0]
    max_lag = max(a_terms) * steps_per_tau
    rng = np.random.default_rng(seed)
    z = np.zeros((max_lag + n_steps + 1, dim))
    z[: max_lag + 1] = rng.standard_normal(dim)
    lognorm = np.empty(n_steps + 1)
    offset = 0.0
    lognorm[0] = math.log(np.linalg.norm(z[max_lag]))

    def f(idx):
        return sum(mat @ z[idx - k * steps_per_tau] for k, mat in a_terms.items())

    for n in range(n_steps):
        i = max_lag + n
        k1 = f(i)
        z[i + 1] = z[i] + h * k1
        k2 = f(i + 1)
        z[i + 1] = z[i] + 0.5 * h * (k1 + k2)
        nrm = np.linalg.norm(z[i + 1])
        lognorm[n + 1] = math.log(nrm) + offset
        # renormalise the whole window to avoid overflow or underflow
        if nrm > 1e100 or nrm < 1e-100:
            z[: i + 2] /= nrm
            offset += math.log(nrm)
    t = np.arange(n_steps + 1) * h
    tail = t >= 0.5 * t[-1]
    return float(np.polyfit(t[tail], lognorm[tail], 1)[0])
