"""Simulation of the adaptive consensus protocols.

Integrates the coupled agent-state and adaptive-weight dynamics with a
fixed-step fourth-order Runge-Kutta scheme.  The realized quadratic cost and
the trajectory-dependent integral term of the guaranteed-cost bound ride
inside the ODE state as augmented coordinates, so both inherit the
integrator's accuracy order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import graph, matops
from .graph import Topology
from .synthesis import GainSet, LEADERLESS, LEADER_FOLLOWER

__all__ = [
    "SimulationError",
    "ConfigurationError",
    "DivergenceError",
    "DIVERGENCE_LIMIT",
    "SimConfig",
    "SimState",
    "Trace",
    "leaderless_rhs",
    "leader_follower_rhs",
    "rk4_step",
    "run",
    "consensus_function",
    "disagreement_norm",
    "guaranteed_cost_bound",
]

DIVERGENCE_LIMIT = 1e9


class SimulationError(Exception):
    """Base class for simulation failures."""


class ConfigurationError(SimulationError):
    """Run setup is inconsistent (mode, topology, or dimensions)."""


class DivergenceError(SimulationError):
    """State magnitude exceeded the divergence guard during integration."""

    def __init__(self, time: float, magnitude: float):
        self.time = time
        self.magnitude = magnitude
        super().__init__(f"state magnitude {magnitude:.3e} exceeded {DIVERGENCE_LIMIT:.0e} at t={time:.6f}")


@dataclass(frozen=True)
class SimConfig:
    """Integration settings and initial conditions.

    ``x0`` holds one row of length d per agent.  ``sample_stride`` decimates
    the recorded trace; the final step is always recorded.
    """

    x0: np.ndarray
    t_final: float
    dt: float = 1e-3
    sample_stride: int = 1

    def __post_init__(self):
        x0 = matops.as_matrix(self.x0, "x0")
        object.__setattr__(self, "x0", x0)
        if not self.dt > 0.0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.t_final < self.dt:
            raise ConfigurationError(f"t_final must be at least dt, got {self.t_final}")
        if self.sample_stride < 1:
            raise ConfigurationError(f"sample_stride must be >= 1, got {self.sample_stride}")


@dataclass(frozen=True)
class SimState:
    """Instantaneous simulation state (also used for state derivatives).

    ``x`` is the stacked agent state of length n*d with agent i occupying
    block i; ``w`` holds the adaptive weights in canonical edge order.
    """

    t: float
    x: np.ndarray
    w: np.ndarray
    j_realized: float
    j_bound_integral: float


def _shifted(state: SimState, h: float, k: SimState) -> SimState:
    return SimState(
        t=state.t + h * k.t,
        x=state.x + h * k.x,
        w=state.w + h * k.w,
        j_realized=state.j_realized + h * k.j_realized,
        j_bound_integral=state.j_bound_integral + h * k.j_bound_integral,
    )


@dataclass(frozen=True)
class Trace:
    """Sampled simulation history.

    ``reference`` holds the consensus function e^{At} avg(x(0)) per sample in
    leaderless mode and the leader state in leader-follower mode.
    ``eta_norm`` is the disagreement norm (leaderless) or the norm of the
    stacked follower-to-leader errors (leader-follower).
    """

    mode: str
    n: int
    d: int
    adaptive_edges: tuple[tuple[int, int], ...]
    times: np.ndarray
    states: np.ndarray
    weights: np.ndarray
    j_realized: np.ndarray
    j_bound_integral: np.ndarray
    eta_norm: np.ndarray
    reference: np.ndarray
    x0: np.ndarray
    warnings: tuple[str, ...] = ()

    def final_state(self) -> SimState:
        return SimState(
            t=float(self.times[-1]),
            x=self.states[-1].copy(),
            w=self.weights[-1].copy(),
            j_realized=float(self.j_realized[-1]),
            j_bound_integral=float(self.j_bound_integral[-1]),
        )


class _LeaderlessContext:
    mode = LEADERLESS

    def __init__(self, gains: GainSet, topology: Topology):
        if gains.mode != LEADERLESS:
            raise ConfigurationError(f"gains are for mode {gains.mode!r}, expected {LEADERLESS!r}")
        self.n = topology.n
        self.d = gains.state_dim
        self.adaptive_edges = topology.edges
        m = len(topology.edges)
        incidence = np.zeros((m, self.n))
        for row, (i, k) in enumerate(topology.edges):
            incidence[row, i - 1] = -1.0
            incidence[row, k - 1] = 1.0
        self.incidence = incidence
        self.a_t = gains.a.T.copy()
        self.bku_t = (gains.b @ gains.k_u).T.copy()
        self.k_w = gains.k_w
        self.q = gains.q
        self.gamma = gains.gamma
        self.w0 = topology.initial_weight_vector(topology.edges)
        self.warnings: tuple[str, ...] = ()

    def deriv(self, x: np.ndarray, w: np.ndarray):
        diffs = self.incidence @ x
        lap = self.incidence.T @ (w[:, None] * self.incidence)
        dx = x @ self.a_t - lap @ (x @ self.bku_t)
        dw = ((diffs @ self.k_w) * diffs).sum(axis=1)
        # ordered-pair differences keep the cost rates exactly zero at
        # consensus (mean-deviation forms leave rounding residue)
        pairs = (x[None, :, :] - x[:, None, :]).reshape(-1, self.d)
        dj = float(((pairs @ self.q) * pairs).sum()) / self.n
        djb = self.gamma * float(((pairs @ self.k_w) * pairs).sum()) / (2.0 * self.n)
        return dx, dw, dj, djb

    def eta(self, x: np.ndarray) -> float:
        dev = x - x.mean(axis=0)
        return math.sqrt(float((dev * dev).sum()))


class _LeaderFollowerContext:
    mode = LEADER_FOLLOWER

    def __init__(self, gains: GainSet, topology: Topology):
        if gains.mode != LEADER_FOLLOWER:
            raise ConfigurationError(f"gains are for mode {gains.mode!r}, expected {LEADER_FOLLOWER!r}")
        if topology.leader is None:
            raise ConfigurationError("leader-follower mode requires a designated leader")
        if topology.leader != 1:
            raise ConfigurationError("the leader must be agent 1")
        self.n = topology.n
        self.d = gains.state_dim
        nf = self.n - 1
        self.adaptive_edges = topology.leader_edges()
        self.led = np.array([max(i, k) - 2 for i, k in self.adaptive_edges], dtype=int)
        scatter = np.zeros((nf, len(self.adaptive_edges)))
        for col, row in enumerate(self.led):
            scatter[row, col] = 1.0
        self.scatter = scatter
        lap_ff = np.zeros((nf, nf))
        for i, k in topology.follower_edges():
            weight = topology.weights[(i, k)]
            a, b = i - 2, k - 2
            lap_ff[a, b] -= weight
            lap_ff[b, a] -= weight
            lap_ff[a, a] += weight
            lap_ff[b, b] += weight
        self.lap_ff = lap_ff
        self.a = gains.a
        self.a_t = gains.a.T.copy()
        self.bku_t = (gains.b @ gains.k_u).T.copy()
        self.k_w = gains.k_w
        self.q = gains.q
        self.gamma = gains.gamma
        self.w0 = topology.initial_weight_vector(self.adaptive_edges)
        coupling = lap_ff.copy()
        coupling[self.led, self.led] += self.w0
        min_eig = float(matops.sym_eig(coupling).eigenvalues[0]) if nf else 0.0
        self.warnings = (
            ()
            if min_eig > 1e-9
            else (
                f"follower coupling matrix is not positive definite at t=0 "
                f"(min eigenvalue {min_eig:.3e}); tracking is not certified",
            )
        )

    def deriv(self, x: np.ndarray, w: np.ndarray):
        x1 = x[0]
        xf = x[1:]
        xi = xf - x1
        diffs_l = x1 - xf[self.led]
        dxf = xf @ self.a_t - self.lap_ff @ (xf @ self.bku_t)
        dxf += self.scatter @ ((w[:, None] * diffs_l) @ self.bku_t)
        dx = np.vstack([x1 @ self.a_t, dxf])
        dw = ((diffs_l @ self.k_w) * diffs_l).sum(axis=1)
        dj = float(((diffs_l @ self.q) * diffs_l).sum())
        # ordered follower pairs (exactly zero at consensus)
        pairs = (xf[None, :, :] - xf[:, None, :]).reshape(-1, self.d)
        dj += float(((pairs @ self.q) * pairs).sum()) / (self.n - 1)
        djb = self.gamma * float(((xi @ self.k_w) * xi).sum())
        return dx, dw, dj, djb

    def eta(self, x: np.ndarray) -> float:
        xi = x[1:] - x[0]
        return math.sqrt(float((xi * xi).sum()))


def _context(gains: GainSet, topology: Topology):
    if gains.mode == LEADERLESS:
        return _LeaderlessContext(gains, topology)
    return _LeaderFollowerContext(gains, topology)


def _rhs_state(context, state: SimState) -> SimState:
    x = state.x.reshape(context.n, context.d)
    dx, dw, dj, djb = context.deriv(x, state.w)
    return SimState(t=1.0, x=dx.ravel(), w=dw, j_realized=dj, j_bound_integral=djb)


def leaderless_rhs(state: SimState, gains: GainSet, topology: Topology) -> SimState:
    """Time derivative of the leaderless protocol state.

    Agent blocks receive A x_i + B K_u sum_k w_ik (x_k - x_i); each edge
    weight receives its error quadratic form; the cost coordinate receives
    the all-pairs quadratic cost rate and the bound coordinate receives the
    translated disagreement quadratic form.
    """
    return _rhs_state(_LeaderlessContext(gains, topology), state)


def leader_follower_rhs(state: SimState, gains: GainSet, topology: Topology) -> SimState:
    """Time derivative of the leader-follower protocol state.

    The leader propagates autonomously; followers combine the adaptively
    weighted leader coupling with fixed-weight follower coupling.  Only
    leader-incident edge weights adapt.
    """
    return _rhs_state(_LeaderFollowerContext(gains, topology), state)


def rk4_step(rhs: Callable[[SimState], SimState], state: SimState, dt: float) -> SimState:
    """One classical Runge-Kutta step of the full augmented state."""
    k1 = rhs(state)
    k2 = rhs(_shifted(state, 0.5 * dt, k1))
    k3 = rhs(_shifted(state, 0.5 * dt, k2))
    k4 = rhs(_shifted(state, dt, k3))
    return SimState(
        t=state.t + dt,
        x=state.x + (dt / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
        w=state.w + (dt / 6.0) * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w),
        j_realized=state.j_realized
        + (dt / 6.0) * (k1.j_realized + 2.0 * k2.j_realized + 2.0 * k3.j_realized + k4.j_realized),
        j_bound_integral=state.j_bound_integral
        + (dt / 6.0)
        * (
            k1.j_bound_integral
            + 2.0 * k2.j_bound_integral
            + 2.0 * k3.j_bound_integral
            + k4.j_bound_integral
        ),
    )


def run(config: SimConfig, gains: GainSet, topology: Topology, mode: Optional[str] = None) -> Trace:
    """Integrate a full run and return the sampled Trace.

    Aborts with DivergenceError when any state magnitude exceeds the
    divergence guard.  The trace always contains the initial and final
    samples.
    """
    if mode is not None and mode != gains.mode:
        raise ConfigurationError(f"requested mode {mode!r} but gains are for {gains.mode!r}")
    if gains.mode == LEADERLESS:
        if not graph.is_connected(topology):
            raise ConfigurationError("leaderless mode requires a connected topology")
    else:
        if topology.leader is None:
            raise ConfigurationError("leader-follower mode requires a designated leader")
        if not graph.is_leader_reachable(topology):
            raise ConfigurationError("every follower needs an undirected path to the leader")
    context = _context(gains, topology)
    x0 = config.x0
    if x0.shape != (context.n, context.d):
        raise ConfigurationError(
            f"x0 has shape {x0.shape}, expected ({context.n}, {context.d})"
        )
    nsteps = max(1, int(round(config.t_final / config.dt)))
    dt = config.dt
    stride = config.sample_stride

    x = x0.astype(float).copy()
    w = context.w0.copy()
    jr = 0.0
    jb = 0.0

    times = [0.0]
    states = [x.ravel().copy()]
    weights = [w.copy()]
    j_realized = [0.0]
    j_bound = [0.0]
    eta = [context.eta(x)]

    for step in range(1, nsteps + 1):
        k1x, k1w, k1j, k1b = context.deriv(x, w)
        x2 = x + (0.5 * dt) * k1x
        w2 = w + (0.5 * dt) * k1w
        k2x, k2w, k2j, k2b = context.deriv(x2, w2)
        x3 = x + (0.5 * dt) * k2x
        w3 = w + (0.5 * dt) * k2w
        k3x, k3w, k3j, k3b = context.deriv(x3, w3)
        x4 = x + dt * k3x
        w4 = w + dt * k3w
        k4x, k4w, k4j, k4b = context.deriv(x4, w4)
        sixth = dt / 6.0
        x = x + sixth * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        w = w + sixth * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        jr += sixth * (k1j + 2.0 * k2j + 2.0 * k3j + k4j)
        jb += sixth * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        magnitude = float(np.abs(x).max())
        if not math.isfinite(magnitude) or magnitude > DIVERGENCE_LIMIT:
            raise DivergenceError(time=step * dt, magnitude=magnitude)
        if step % stride == 0 or step == nsteps:
            times.append(step * dt)
            states.append(x.ravel().copy())
            weights.append(w.copy())
            j_realized.append(jr)
            j_bound.append(jb)
            eta.append(context.eta(x))

    times_arr = np.array(times)
    states_arr = np.array(states)
    if gains.mode == LEADERLESS:
        average = x0.mean(axis=0)
        reference = np.empty((len(times), context.d))
        for idx, t in enumerate(times_arr):
            reference[idx] = matops.matrix_exp(gains.a * t) @ average
    else:
        reference = states_arr[:, : context.d].copy()
    return Trace(
        mode=gains.mode,
        n=context.n,
        d=context.d,
        adaptive_edges=context.adaptive_edges,
        times=times_arr,
        states=states_arr,
        weights=np.array(weights),
        j_realized=np.array(j_realized),
        j_bound_integral=np.array(j_bound),
        eta_norm=np.array(eta),
        reference=reference,
        x0=x0.copy(),
        warnings=context.warnings,
    )


def consensus_function(a, initial_states, t: float) -> np.ndarray:
    """Consensus trajectory e^{A t} applied to the average initial state."""
    a = matops.as_matrix(a, "a")
    x0 = matops.as_matrix(initial_states, "initial_states")
    return matops.matrix_exp(a * t) @ x0.mean(axis=0)


def disagreement_norm(x, n: int, d: int) -> float:
    """Norm of the projection of the stacked state onto the disagreement subspace."""
    arr = np.asarray(x, dtype=float).reshape(n, d)
    dev = arr - arr.mean(axis=0)
    return math.sqrt(float((dev * dev).sum()))


def guaranteed_cost_bound(
    trace: Trace,
    gains: GainSet,
    initial_states=None,
    mode: Optional[str] = None,
    warnings_out: Optional[list] = None,
) -> float:
    """Guaranteed cost bound: initial quadratic form plus the bound integral.

    Leaderless runs use the disagreement-projector quadratic form of the
    certificate; leader-follower runs use the star-coupling quadratic form,
    which equals the sum of follower-error quadratic forms.  When the bound
    integrand has not converged by the end of the trace (tail rate above
    1e-10 per unit time) a horizon-too-short warning is appended to
    ``warnings_out``.
    """
    mode = mode or gains.mode
    if mode != gains.mode:
        raise ConfigurationError(f"requested mode {mode!r} but gains are for {gains.mode!r}")
    x0 = trace.x0 if initial_states is None else matops.as_matrix(initial_states, "initial_states")
    if mode == LEADERLESS:
        n, d = x0.shape
        pairs = (x0[None, :, :] - x0[:, None, :]).reshape(-1, d)
        quad = float(((pairs @ gains.certificate) * pairs).sum()) / (2.0 * n)
    else:
        xi0 = x0[1:] - x0[0]
        quad = float(((xi0 @ gains.certificate) * xi0).sum())
    value = quad + float(trace.j_bound_integral[-1])
    if warnings_out is not None and len(trace.times) >= 2:
        dt_tail = float(trace.times[-1] - trace.times[-2])
        if dt_tail > 0.0:
            rate = float(trace.j_bound_integral[-1] - trace.j_bound_integral[-2]) / dt_tail
            if rate > 1e-10:
                warnings_out.append(
                    f"horizon too short: bound integrand still {rate:.3e} per unit time at t_final"
                )
    return value
