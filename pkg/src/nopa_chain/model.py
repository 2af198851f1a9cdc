"""
Quadrature state-space model of a linear coherent-feedback chain of NOPAs.

The chain carries two optical paths: the ``a`` path runs from NOPA 1 to
NOPA N and the ``b`` path runs back from NOPA N to NOPA 1.  Every path
segment between neighbouring NOPAs is a lossy fibre (a beamsplitter with
transmission ``alpha``) with propagation delay ``tau``.  Two phase shifters
act on the outgoing fields.

Two independent constructions are provided:

* :func:`assemble_state_space` writes the matrices down directly from the
  closed-form path sums of the chain.
* :func:`compose_by_interconnection` builds every component separately and
  wires them together by solving the static interconnection equations.

The quadrature convention is ``q = a + a*``, ``p = -i a + i a*``, so the
vacuum covariance is the identity and ``[q, p] = 2i``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

GAMMA_R = 7.2e7
"""Reference mirror damping rate in Hz."""

KAPPA_SLOPE = 3e6 / (0.6 * math.sqrt(2.0))
"""Amplification loss rate per unit pump parameter, Hz."""

FIBRE_LIGHT_SPEED_KM_S = 3e5
FIBRE_LOSS_DB_PER_KM = 0.2


class ModelError(ValueError):
    """Raised for invalid model parameters."""


class ConsistencyError(RuntimeError):
    """Raised when two constructions disagree on index bookkeeping."""


class LossScenario(str, enum.Enum):
    LOSSLESS = "lossless"
    TRANSMISSION_ONLY = "transmission_only"
    TRANSMISSION_AND_AMPLIFICATION = "transmission_and_amplification"

    @property
    def transmission_on(self) -> bool:
        return self is not LossScenario.LOSSLESS

    @property
    def amplification_loss_on(self) -> bool:
        return self is LossScenario.TRANSMISSION_AND_AMPLIFICATION


@dataclass(frozen=True)
class NopaParams:
    """Physical parameters shared by every NOPA in the chain.

    Use :func:`make_params` rather than the constructor; it derives
    ``epsilon``, ``gamma`` and ``kappa`` from ``x`` and ``y``.
    """

    x: float
    y: float
    gamma_r: float
    epsilon: float
    gamma: float
    kappa: float

    def __post_init__(self):
        if not (0.0 <= self.x <= 1.0):
            raise ModelError(f"pump parameter x must lie in (0, 1], got {self.x}")
        if not (0.0 < self.y <= 1.0):
            raise ModelError(f"damping parameter y must lie in (0, 1], got {self.y}")
        if self.gamma <= 0:
            raise ModelError("gamma must be positive")
        if self.kappa < 0:
            raise ModelError("kappa must be non-negative")

    @property
    def lossless(self) -> bool:
        return self.kappa == 0.0

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "gamma_r": self.gamma_r,
            "epsilon": self.epsilon,
            "gamma": self.gamma,
            "kappa": self.kappa,
        }


def make_params(
    x: float,
    y: float = 1.0,
    amplification_loss_on: bool = False,
    gamma_r: float = GAMMA_R,
    *,
    allow_zero_pump: bool = False,
) -> NopaParams:
    """Build :class:`NopaParams` from the dimensionless pump and damping values.

    ``x = 0`` (an unpumped, passive chain) is only accepted with
    ``allow_zero_pump=True``; it is useful as a vacuum reference.
    """
    x = float(x)
    y = float(y)
    if not (0.0 < x <= 1.0) and not (allow_zero_pump and x == 0.0):
        raise ModelError(f"pump parameter x must lie in (0, 1], got {x}")
    if not (0.0 < y <= 1.0):
        raise ModelError(f"damping parameter y must lie in (0, 1], got {y}")
    kappa = KAPPA_SLOPE * x if amplification_loss_on else 0.0
    return NopaParams(
        x=x,
        y=y,
        gamma_r=gamma_r,
        epsilon=x * gamma_r,
        gamma=gamma_r / y,
        kappa=kappa,
    )


def transmission_rate(d_km: float, n_nopas: int) -> float:
    """Amplitude transmission of one fibre segment.

    A total distance ``d_km`` split into ``n_nopas - 1`` segments at
    0.2 dB/km gives ``10 ** (-0.01 * d / (N - 1))``.
    """
    if int(n_nopas) != n_nopas or n_nopas < 2:
        raise ModelError(f"a chain needs at least two NOPAs, got N={n_nopas}")
    if d_km < 0:
        raise ModelError(f"distance must be non-negative, got {d_km}")
    return 10.0 ** (-FIBRE_LOSS_DB_PER_KM / 20.0 * d_km / (n_nopas - 1))


def segment_delay(d_km: float, n_nopas: int) -> float:
    """Propagation delay of one fibre segment in seconds."""
    if n_nopas < 2:
        raise ModelError(f"a chain needs at least two NOPAs, got N={n_nopas}")
    return d_km / (FIBRE_LIGHT_SPEED_KM_S * (n_nopas - 1))


def theta_defaults(n_nopas: int) -> tuple[float, float]:
    """Output phase shifts that minimise the low-frequency squeezing spectrum.

    ``(0, 0)`` for an even number of NOPAs and ``(pi, 0)`` for an odd one.
    """
    if n_nopas < 2:
        raise ModelError(f"a chain needs at least two NOPAs, got N={n_nopas}")
    return (0.0, 0.0) if n_nopas % 2 == 0 else (math.pi, 0.0)


def _wrap_phase(theta: float) -> float:
    # map into (-pi, pi]
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped == -math.pi:
        wrapped = math.pi
    return wrapped


@dataclass(frozen=True)
class NetworkConfig:
    """Chain-level configuration.  Build with :func:`make_config`."""

    n_nopas: int
    distance_km: float
    transmission_on: bool
    amplification_loss_on: bool
    alpha: float
    beta: float
    tau: float
    theta_a: float
    theta_b: float
    nopa: NopaParams

    def __post_init__(self):
        if int(self.n_nopas) != self.n_nopas or self.n_nopas < 2:
            raise ModelError(f"a chain needs at least two NOPAs, got N={self.n_nopas}")
        if self.distance_km < 0:
            raise ModelError("distance must be non-negative")
        if not (0.0 < self.alpha <= 1.0):
            raise ModelError(f"alpha must lie in (0, 1], got {self.alpha}")
        if abs(self.alpha**2 + self.beta**2 - 1.0) > 1e-14:
            raise ModelError("alpha**2 + beta**2 must equal 1")
        if self.tau < 0:
            raise ModelError("tau must be non-negative")
        if self.amplification_loss_on != (self.nopa.kappa > 0) and self.nopa.x > 0:
            raise ModelError("amplification_loss_on disagrees with nopa.kappa")
        for theta in (self.theta_a, self.theta_b):
            if not (-math.pi < theta <= math.pi):
                raise ModelError(f"phase shift {theta} outside (-pi, pi]")

    @property
    def x(self) -> float:
        return self.nopa.x

    @property
    def dim(self) -> int:
        return 4 * self.n_nopas

    @property
    def loss_scenario(self) -> LossScenario:
        if self.amplification_loss_on:
            return LossScenario.TRANSMISSION_AND_AMPLIFICATION
        if self.transmission_on:
            return LossScenario.TRANSMISSION_ONLY
        return LossScenario.LOSSLESS

    def with_x(self, x: float) -> "NetworkConfig":
        """Same chain with a different pump parameter (kappa follows x)."""
        nopa = make_params(
            x,
            self.nopa.y,
            self.amplification_loss_on,
            self.nopa.gamma_r,
            allow_zero_pump=True,
        )
        return replace(self, nopa=nopa)

    def delay_free(self) -> "NetworkConfig":
        return replace(self, tau=0.0)

    def to_dict(self) -> dict:
        return {
            "n_nopas": self.n_nopas,
            "distance_km": self.distance_km,
            "transmission_on": self.transmission_on,
            "amplification_loss_on": self.amplification_loss_on,
            "alpha": self.alpha,
            "beta": self.beta,
            "tau": self.tau,
            "theta_a": self.theta_a,
            "theta_b": self.theta_b,
            "nopa": self.nopa.to_dict(),
        }


def make_config(
    n_nopas: int,
    x: float,
    *,
    y: float = 1.0,
    distance_km: float = 1.0,
    transmission_on: bool = True,
    amplification_loss_on: bool = False,
    delay: bool = False,
    tau: float | None = None,
    theta_a: float | None = None,
    theta_b: float | None = None,
    gamma_r: float = GAMMA_R,
    allow_zero_pump: bool = False,
) -> NetworkConfig:
    """Convenience constructor for :class:`NetworkConfig`.

    With ``delay=True`` the segment delay follows from the distance and the
    speed of light in fibre, unless ``tau`` is given explicitly.  Phase
    shifts left as ``None`` take the parity defaults of
    :func:`theta_defaults`.
    """
    if int(n_nopas) != n_nopas or n_nopas < 2:
        raise ModelError(f"a chain needs at least two NOPAs, got N={n_nopas}")
    n_nopas = int(n_nopas)
    if transmission_on:
        alpha = transmission_rate(distance_km, n_nopas)
        beta = math.sqrt(1.0 - alpha**2)
    else:
        alpha, beta = 1.0, 0.0
    if tau is None:
        tau = segment_delay(distance_km, n_nopas) if delay else 0.0
    default_a, default_b = theta_defaults(n_nopas)
    theta_a = default_a if theta_a is None else _wrap_phase(theta_a)
    theta_b = default_b if theta_b is None else _wrap_phase(theta_b)
    nopa = make_params(x, y, amplification_loss_on, gamma_r, allow_zero_pump=allow_zero_pump)
    return NetworkConfig(
        n_nopas=n_nopas,
        distance_km=float(distance_km),
        transmission_on=bool(transmission_on),
        amplification_loss_on=bool(amplification_loss_on),
        alpha=alpha,
        beta=beta,
        tau=float(tau),
        theta_a=theta_a,
        theta_b=theta_b,
        nopa=nopa,
    )


def scenario_config(
    n_nopas: int, x: float, scenario: LossScenario | str, **kwargs
) -> NetworkConfig:
    """:func:`make_config` with the loss flags taken from a :class:`LossScenario`."""
    scenario = LossScenario(scenario)
    return make_config(
        n_nopas,
        x,
        transmission_on=scenario.transmission_on,
        amplification_loss_on=scenario.amplification_loss_on,
        **kwargs,
    )


# ---------------------------------------------------------------------------
# index maps


def state_labels(n_nopas: int) -> tuple[str, ...]:
    labels = []
    for i in range(1, n_nopas + 1):
        labels += [f"a_q[{i}]", f"a_p[{i}]", f"b_q[{i}]", f"b_p[{i}]"]
    return tuple(labels)


def _input_fields(n_nopas: int) -> list[str]:
    n = n_nopas
    fields = [f"xi_in_a[1]", f"xi_in_b[{n}]"]
    for i in range(1, n + 1):
        fields += [f"xi_loss_a[{i}]", f"xi_loss_b[{i}]"]
    fields.append("xi_BS_a[1]")
    for j in range(2, n):
        fields += [f"xi_BS_a[{j}]", f"xi_BS_b[{j}]"]
    fields.append(f"xi_BS_b[{n}]")
    return fields


def _quadrature_pair(field_label: str) -> list[str]:
    stem, index = field_label.split("[")
    return [f"{stem}_q[{index}", f"{stem}_p[{index}"]


def input_labels(n_nopas: int) -> tuple[str, ...]:
    labels = []
    for f in _input_fields(n_nopas):
        labels += _quadrature_pair(f)
    return tuple(labels)


OUTPUT_LABELS = ("xi_out_a_q", "xi_out_a_p", "xi_out_b_q", "xi_out_b_p")


def _field_slots(n_nopas: int) -> dict[str, int]:
    """Map each input field label to the column of its q quadrature."""
    return {f: 2 * k for k, f in enumerate(_input_fields(n_nopas))}


def rotation(theta: float) -> np.ndarray:
    """Quadrature action of the phase factor ``exp(i theta)``."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


# per-NOPA 4x4 building blocks in (a_q, a_p, b_q, b_p) order
_A_SEL = np.diag([1.0, 1.0, 0.0, 0.0])
_B_SEL = np.diag([0.0, 0.0, 1.0, 1.0])
_PUMP = np.array(
    [
        [0.0, 0.0, 0.5, 0.0],
        [0.0, 0.0, 0.0, -0.5],
        [0.5, 0.0, 0.0, 0.0],
        [0.0, -0.5, 0.0, 0.0],
    ]
)


def pump_block(nopa: NopaParams) -> np.ndarray:
    """The 4x4 pump coupling of one NOPA (``epsilon/2`` entries)."""
    return nopa.epsilon * _PUMP


def single_nopa_drift(nopa: NopaParams) -> np.ndarray:
    """Drift matrix of one isolated NOPA in (a_q, a_p, b_q, b_p) order."""
    m = 0.5 * (nopa.gamma + nopa.kappa)
    return -m * np.eye(4) + pump_block(nopa)


# ---------------------------------------------------------------------------
# state-space containers


@dataclass(frozen=True)
class StateSpace:
    """Delay-free quadrature model ``dz = A z dt + B dxi``, ``xi_out = C z + D xi``."""

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    c_matrix: np.ndarray
    d_matrix: np.ndarray
    state_index_map: tuple[str, ...] = ()
    input_index_map: tuple[str, ...] = ()
    output_index_map: tuple[str, ...] = OUTPUT_LABELS

    @property
    def n_states(self) -> int:
        return self.a_matrix.shape[0]

    def index_maps_json(self) -> str:
        return index_maps_json(self)


@dataclass(frozen=True)
class FrequencyMatrices:
    """Complex model matrices at one angular frequency (delays folded in)."""

    omega: float
    a_of_omega: np.ndarray
    b_of_omega: np.ndarray
    c_of_omega: np.ndarray
    d_of_omega: np.ndarray


@dataclass(frozen=True)
class DelayDecomposition:
    """Model matrices split by the number of fibre segments a term crosses.

    ``a_terms[k]`` holds every drift coefficient that is delayed by ``k*tau``;
    likewise for the other three matrices.  Summing over ``k`` gives the
    delay-free model.
    """

    config: NetworkConfig
    a_terms: dict[int, np.ndarray] = field(default_factory=dict)
    b_terms: dict[int, np.ndarray] = field(default_factory=dict)
    c_terms: dict[int, np.ndarray] = field(default_factory=dict)
    d_terms: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def max_segments(self) -> int:
        return self.config.n_nopas - 1

    def evaluate(self, omega: float) -> FrequencyMatrices:
        tau = self.config.tau

        def combine(terms):
            out = None
            for k, mat in terms.items():
                factor = np.exp(-1j * k * omega * tau)
                out = mat * factor if out is None else out + mat * factor
            return out

        return FrequencyMatrices(
            omega=float(omega),
            a_of_omega=combine(self.a_terms),
            b_of_omega=combine(self.b_terms),
            c_of_omega=combine(self.c_terms),
            d_of_omega=combine(self.d_terms),
        )


def _empty_terms(n_segments: int, shape: tuple[int, int]) -> dict[int, np.ndarray]:
    return {k: np.zeros(shape) for k in range(n_segments + 1)}


def delay_decomposition(config: NetworkConfig) -> DelayDecomposition:
    """Write the chain down term by term, tagging each coefficient by segment count."""
    n = config.n_nopas
    nopa = config.nopa
    alpha, beta = config.alpha, config.beta
    g = nopa.gamma
    sg = math.sqrt(g)
    sk = math.sqrt(nopa.kappa)
    dim = 4 * n
    n_in = 8 * n
    slot = _field_slots(n)
    I2 = np.eye(2)

    a_terms = _empty_terms(n - 1, (dim, dim))
    b_terms = _empty_terms(n - 1, (dim, n_in))
    c_terms = _empty_terms(n - 1, (4, dim))
    d_terms = _empty_terms(n - 1, (4, n_in))

    def a_rows(i):  # rows of a_i quadratures, 1-based NOPA index
        return slice(4 * (i - 1), 4 * (i - 1) + 2)

    def b_rows(i):
        return slice(4 * (i - 1) + 2, 4 * i)

    def cols(label):
        return slice(slot[label], slot[label] + 2)

    # drift
    for i in range(1, n + 1):
        blk = slice(4 * (i - 1), 4 * i)
        a_terms[0][blk, blk] = single_nopa_drift(nopa)
    for i in range(1, n + 1):
        for k in range(1, i):  # a_i driven by a_{i-k}
            a_terms[k][a_rows(i), a_rows(i - k)] += -g * alpha**k * I2
    for j in range(1, n + 1):
        for k in range(1, n - j + 1):  # b_j driven by b_{j+k}
            a_terms[k][b_rows(j), b_rows(j + k)] += -g * alpha**k * I2

    # input coupling
    for i in range(1, n + 1):
        b_terms[i - 1][a_rows(i), cols("xi_in_a[1]")] += -sg * alpha ** (i - 1) * I2
        b_terms[n - i][b_rows(i), cols(f"xi_in_b[{n}]")] += -sg * alpha ** (n - i) * I2
        b_terms[0][a_rows(i), cols(f"xi_loss_a[{i}]")] += -sk * I2
        b_terms[0][b_rows(i), cols(f"xi_loss_b[{i}]")] += -sk * I2
    for i in range(1, n + 1):
        for k in range(1, i):  # noise from the segment leaving NOPA i-k
            b_terms[k][a_rows(i), cols(f"xi_BS_a[{i - k}]")] += (
                -beta * sg * alpha ** (k - 1) * I2
            )
    for j in range(1, n + 1):
        for k in range(1, n - j + 1):  # noise from the segment leaving NOPA j+k
            b_terms[k][b_rows(j), cols(f"xi_BS_b[{j + k}]")] += (
                -beta * sg * alpha ** (k - 1) * I2
            )

    # outputs, before the phase shifters
    out_a, out_b = slice(0, 2), slice(2, 4)
    for k in range(1, n + 1):
        c_terms[n - k][out_a, a_rows(k)] += sg * alpha ** (n - k) * I2
        c_terms[k - 1][out_b, b_rows(k)] += sg * alpha ** (k - 1) * I2
    d_terms[n - 1][out_a, cols("xi_in_a[1]")] += alpha ** (n - 1) * I2
    d_terms[n - 1][out_b, cols(f"xi_in_b[{n}]")] += alpha ** (n - 1) * I2
    for k in range(1, n):
        d_terms[k][out_a, cols(f"xi_BS_a[{n - k}]")] += beta * alpha ** (k - 1) * I2
        d_terms[k][out_b, cols(f"xi_BS_b[{k + 1}]")] += beta * alpha ** (k - 1) * I2

    phase = np.zeros((4, 4))
    phase[out_a, out_a] = rotation(config.theta_a)
    phase[out_b, out_b] = rotation(config.theta_b)
    c_terms = {k: phase @ m for k, m in c_terms.items()}
    d_terms = {k: phase @ m for k, m in d_terms.items()}

    return DelayDecomposition(
        config=config, a_terms=a_terms, b_terms=b_terms, c_terms=c_terms, d_terms=d_terms
    )


def assemble_state_space(config: NetworkConfig) -> StateSpace:
    """Delay-free model matrices of the chain (``tau`` is ignored)."""
    dec = delay_decomposition(config)
    return StateSpace(
        a_matrix=sum(dec.a_terms.values()),
        b_matrix=sum(dec.b_terms.values()),
        c_matrix=sum(dec.c_terms.values()),
        d_matrix=sum(dec.d_terms.values()),
        state_index_map=state_labels(config.n_nopas),
        input_index_map=input_labels(config.n_nopas),
    )


def assemble_frequency_matrices(config: NetworkConfig, omega: float) -> FrequencyMatrices:
    """Model matrices at ``omega`` rad/s with every k-segment term phased by
    ``exp(-1j * k * omega * tau)``."""
    return delay_decomposition(config).evaluate(omega)


def coupling_blocks(config: NetworkConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The 4x4 blocks ``A0``, ``A_a``, ``A_b`` of the drift matrix.

    The drift is ``A0`` on the diagonal, ``alpha**k * A_a`` k blocks below it
    and ``alpha**k * A_b`` k blocks above it, plus the pump term on the
    diagonal.
    """
    m = 0.5 * (config.nopa.gamma + config.nopa.kappa)
    g = config.nopa.gamma
    return -m * np.eye(4), -g * _A_SEL, -g * _B_SEL


def pump_perturbation(config: NetworkConfig) -> np.ndarray:
    """Block-diagonal pump term of the drift matrix."""
    return np.kron(np.eye(config.n_nopas), pump_block(config.nopa))


# ---------------------------------------------------------------------------
# independent construction by interconnection


def _connect(
    a_s, b_u, b_w, c_s, d_u, d_w, k_mat, l_mat
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Close ``u = K y + L w`` around a stacked system.

    The stacked system is ``dx = A x + B_u u + B_w w``, ``y = C x + D_u u + D_w w``.
    Returns the closed-loop ``(A, B, C, D)`` from ``w`` to ``y``.
    """
    loop = np.eye(k_mat.shape[0]) - k_mat @ d_u
    u_x = np.linalg.solve(loop, k_mat @ c_s)
    u_w = np.linalg.solve(loop, k_mat @ d_w + l_mat)
    a = a_s + b_u @ u_x
    b = b_w + b_u @ u_w
    c = c_s + d_u @ u_x
    d = d_w + d_u @ u_w
    return a, b, c, d


def compose_by_interconnection(config: NetworkConfig) -> StateSpace:
    """Build the same chain from isolated NOPAs, beamsplitters and phase shifters.

    Each NOPA is a four-port linear system.  Its ``in_a``/``in_b`` ports are
    fed either by an external field or by a beamsplitter mixing the
    neighbour's output with a vacuum noise field.  The resulting static
    wiring is solved for the port signals, which gives the closed network.
    """
    if config.tau != 0.0:
        config = config.delay_free()
    n = config.n_nopas
    nopa = config.nopa
    alpha, beta = config.alpha, config.beta
    sg, sk = math.sqrt(nopa.gamma), math.sqrt(nopa.kappa)
    I2, I4 = np.eye(2), np.eye(4)
    dim = 4 * n

    # stacked NOPAs; internal inputs u = (in_a_i, in_b_i) quadratures per NOPA,
    # outputs y = (out_a_i, out_b_i) quadratures per NOPA
    a_s = np.kron(np.eye(n), single_nopa_drift(nopa))
    b_u = np.kron(np.eye(n), -sg * I4)
    c_s = np.kron(np.eye(n), sg * I4)
    d_u = np.kron(np.eye(n), I4)

    ext = input_labels(n)
    ext_col = {lab: k for k, lab in enumerate(ext)}
    n_ext = len(ext)

    def ext_cols(field_label: str) -> list[int]:
        return [ext_col[lab] for lab in _quadrature_pair(field_label)]

    b_w = np.zeros((dim, n_ext))
    d_w = np.zeros((dim, n_ext))
    for i in range(1, n + 1):
        rows_a = slice(4 * (i - 1), 4 * (i - 1) + 2)
        rows_b = slice(4 * (i - 1) + 2, 4 * i)
        b_w[rows_a, ext_cols(f"xi_loss_a[{i}]")] = -sk * I2
        b_w[rows_b, ext_cols(f"xi_loss_b[{i}]")] = -sk * I2

    def port_in_a(i):
        return slice(4 * (i - 1), 4 * (i - 1) + 2)

    def port_in_b(i):
        return slice(4 * (i - 1) + 2, 4 * i)

    port_out_a, port_out_b = port_in_a, port_in_b

    # static wiring u = K y + L w
    k_mat = np.zeros((dim, dim))
    l_mat = np.zeros((dim, n_ext))
    l_mat[port_in_a(1), ext_cols("xi_in_a[1]")] = I2
    l_mat[port_in_b(n), ext_cols(f"xi_in_b[{n}]")] = I2
    for j in range(1, n):
        # a-path segment j -> j+1
        k_mat[port_in_a(j + 1), port_out_a(j)] = alpha * I2
        l_mat[port_in_a(j + 1), ext_cols(f"xi_BS_a[{j}]")] = beta * I2
    for j in range(2, n + 1):
        # b-path segment j -> j-1
        k_mat[port_in_b(j - 1), port_out_b(j)] = alpha * I2
        l_mat[port_in_b(j - 1), ext_cols(f"xi_BS_b[{j}]")] = beta * I2

    a, b, c_all, d_all = _connect(a_s, b_u, b_w, c_s, d_u, d_w, k_mat, l_mat)

    select = np.zeros((4, dim))
    select[0:2, port_out_a(n)] = rotation(config.theta_a)
    select[2:4, port_out_b(1)] = rotation(config.theta_b)
    c = select @ c_all
    d = select @ d_all

    states = state_labels(n)
    if len(states) != a.shape[0] or len(ext) != b.shape[1]:
        raise ConsistencyError("index maps do not match the composed matrices")
    if ext != input_labels(n):
        raise ConsistencyError("input ordering differs from the assembled model")
    return StateSpace(
        a_matrix=a,
        b_matrix=b,
        c_matrix=c,
        d_matrix=d,
        state_index_map=states,
        input_index_map=ext,
    )


def commutation_form(n_pairs: int) -> np.ndarray:
    """Block-diagonal ``I ⊗ [[0, 2], [-2, 0]]`` on ``n_pairs`` quadrature pairs."""
    return np.kron(np.eye(n_pairs), np.array([[0.0, 2.0], [-2.0, 0.0]]))


def realizability_residual(ss: StateSpace) -> np.ndarray:
    """``A Θ + Θ Aᵀ + B Θ_in Bᵀ``; zero for a commutator-preserving model."""
    theta = commutation_form(ss.a_matrix.shape[0] // 2)
    theta_in = commutation_form(ss.b_matrix.shape[1] // 2)
    a, b = ss.a_matrix, ss.b_matrix
    return a @ theta + theta @ a.T + b @ theta_in @ b.T


def index_maps_json(ss: StateSpace) -> str:
    """State, input and output labels as a JSON document."""
    return json.dumps(
        {
            "state": list(ss.state_index_map),
            "input": list(ss.input_index_map),
            "output": list(ss.output_index_map),
        },
        indent=2,
    )
