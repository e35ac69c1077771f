"""Resonant two-level atom: Rabi cycling and spontaneous-emission sampling.

Two models of the emission process are provided.

* ``HAZARD_RENEWAL`` keeps the excited-state probability cycling undamped as
  ``sin^2(omega*t/2)`` after every emission and treats emission as a point
  process with state-dependent rate ``gamma * sin^2(omega*t/2)``.  Intervals
  are sampled exactly by thinning an exponential proposal process.

* ``QUANTUM_JUMP`` evolves the two complex amplitudes under the standard
  non-Hermitian no-jump generator (coupling ``omega/2`` between the levels,
  ``-i*gamma/2`` on the excited projector) in steps of ``dt``, collapsing to
  the ground state whenever the per-step jump test fires.  Between jumps the
  oscillation is damped; its waiting-time density has the closed form
  implemented in :func:`mcwf_waiting_density`.

Both models reset to the pure ground state at every emission, so intervals
are independent draws from one renewal law.  Every operation is a pure
function of its parameters and the supplied randomness source: identical
(params, seed, stop criterion) reproduce an identical record bit for bit.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import IoFailure, NoDecayChannel, OverdampedRegime, StepTooLarge
from .randsource import RandomSource


class DecayModel(Enum):
    HAZARD_RENEWAL = "hazard"
    QUANTUM_JUMP = "quantum-jump"


class StateOutcome(Enum):
    GROUND = "ground"
    EXCITED = "excited"


@dataclass(frozen=True)
class AtomParams:
    """Physical parameters of the driven atom.

    ``rabi_omega`` is the angular cycling rate in rad/s, ``gamma`` the decay
    rate in 1/s.  Driving is fixed at resonance, so no detuning field
    exists.  ``dt`` is the integration step for the quantum-jump model only
    and must resolve both the Rabi period and the lifetime.
    """

    rabi_omega: float = 2.0 * math.pi
    gamma: float = 1.0
    model: DecayModel = DecayModel.HAZARD_RENEWAL
    dt: float = 1e-3

    def __post_init__(self):
        if self.rabi_omega <= 0:
            raise ValueError("rabi_omega must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.model is DecayModel.QUANTUM_JUMP:
            bound = 0.01 * (2.0 * math.pi / self.rabi_omega)
            if self.gamma > 0:
                bound = min(bound, 0.01 / self.gamma)
            if self.dt > bound * (1.0 + 1e-12):
                raise ValueError(
                    f"dt={self.dt} too coarse: must be <= {bound:.3g} "
                    "(1% of the faster of Rabi period and lifetime)"
                )


@dataclass(frozen=True)
class StateAmplitudes:
    """Complex amplitudes (c_g, c_e) of the two-level state."""

    c_g: complex
    c_e: complex

    @classmethod
    def ground(cls) -> "StateAmplitudes":
        return cls(1.0 + 0.0j, 0.0 + 0.0j)

    @property
    def norm_sq(self) -> float:
        return abs(self.c_g) ** 2 + abs(self.c_e) ** 2

    @property
    def p_excited(self) -> float:
        return abs(self.c_e) ** 2 / self.norm_sq

    def normalized(self) -> "StateAmplitudes":
        scale = 1.0 / math.sqrt(self.norm_sq)
        return StateAmplitudes(self.c_g * scale, self.c_e * scale)


class JumpOccurred:
    """Marker returned by :func:`mcwf_step` when the collapse branch fires."""

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return "JumpOccurred"


JUMP = JumpOccurred()


@dataclass
class EmissionRecord:
    """Ordered spontaneous-emission times of one trajectory.

    ``intervals[k] == emission_times[k] - emission_times[k-1]`` with an
    implicit time origin at zero; every interval is strictly positive.
    """

    emission_times: list[float]
    intervals: list[float]
    params: AtomParams
    source_tag: str = ""

    @classmethod
    def from_times(cls, times, params: AtomParams, source_tag: str = "") -> "EmissionRecord":
        times = list(times)
        prev = 0.0
        intervals = []
        for t in times:
            if t <= prev:
                raise ValueError(f"emission times must be strictly increasing, got {t} after {prev}")
            intervals.append(t - prev)
            prev = t
        return cls(times, intervals, params, source_tag)

    def __len__(self) -> int:
        return len(self.emission_times)


def excited_probability(t: float, omega: float) -> float:
    """Excited-state probability ``sin^2(omega*t/2)`` at resonance.

    ``t`` is the time since the last reset to the ground state.  Periodic
    with the Rabi period ``2*pi/omega`` and bounded in [0, 1].
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if omega <= 0:
        raise ValueError("omega must be positive")
    return math.sin(0.5 * omega * t) ** 2


def hazard_survival(tau: float, omega: float, gamma: float) -> float:
    """Probability that no emission occurred within ``tau`` of a reset.

    Closed form of ``exp(-integral of gamma*sin^2(omega*s/2) ds)``:
    ``exp(-gamma*(tau/2 - sin(omega*tau)/(2*omega)))``.  Monotone
    non-increasing in ``tau``; identically 1 when ``gamma == 0``.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return math.exp(-gamma * (0.5 * tau - math.sin(omega * tau) / (2.0 * omega)))


def hazard_waiting_density(tau: float, omega: float, gamma: float) -> float:
    """Interval density of the hazard-renewal model.

    ``gamma * sin^2(omega*tau/2) * hazard_survival(tau)``; normalized over
    [0, inf) for any ``gamma > 0``.
    """
    if gamma <= 0:
        raise NoDecayChannel("waiting density undefined for gamma <= 0")
    return gamma * excited_probability(tau, omega) * hazard_survival(tau, omega, gamma)


def sample_interval_hazard(source: RandomSource, omega: float, gamma: float) -> float:
    """Draw one emission interval of the hazard-renewal model by thinning.

    Proposals arrive as exponential(gamma) increments; each proposal at
    elapsed time ``t`` is accepted with probability ``sin^2(omega*t/2)``.
    The envelope rate is exactly ``gamma`` (the hazard never exceeds it),
    so the accepted time is an exact sample with no discretization error.
    Consumes two units per proposal.
    """
    if gamma <= 0:
        raise NoDecayChannel("cannot sample emission intervals with gamma <= 0")
    t = 0.0
    while True:
        u1 = source.next_unit()
        t += -math.log1p(-u1) / gamma
        u2 = source.next_unit()
        if u2 < excited_probability(t, omega):
            return t


def sample_intervals_hazard(
    omega: float, gamma: float, n: int, source: RandomSource
) -> np.ndarray:
    """Draw ``n`` independent hazard-model intervals, vectorized.

    Same thinning scheme as :func:`sample_interval_hazard` (two units per
    proposal), but proposals for all still-pending intervals are advanced
    one round at a time, which keeps large batches fast.  The stream of
    randomness is consumed in round order rather than interval order.
    """
    if gamma <= 0:
        raise NoDecayChannel("cannot sample emission intervals with gamma <= 0")
    t = np.zeros(n, dtype=np.float64)
    active = np.arange(n)
    while active.size:
        u = source.units(2 * active.size)
        t[active] += -np.log1p(-u[0::2]) / gamma
        accept = u[1::2] < np.sin(0.5 * omega * t[active]) ** 2
        active = active[~accept]
    return t


@lru_cache(maxsize=32)
def _nojump_propagator(dt: float, omega: float, gamma: float) -> tuple[complex, complex, complex]:
    """Exact one-step propagator of the non-Hermitian no-jump generator.

    Returns (u_gg, u_ge, u_ee); the matrix is symmetric (u_eg == u_ge).
    Valid in both under- and overdamped regimes via a complex square root.
    """
    a = -0.25 * gamma
    s = cmath.sqrt(gamma * gamma / 16.0 - omega * omega / 4.0)
    x = s * dt
    if abs(x) < 1e-8:
        sinhc = 1.0 + x * x / 6.0
    else:
        sinhc = cmath.sinh(x) / x
    f = dt * sinhc
    ch = cmath.cosh(x)
    damp = cmath.exp(a * dt)
    u_gg = damp * (ch + 0.25 * gamma * f)
    u_ge = damp * (-0.5j * omega * f)
    u_ee = damp * (ch - 0.25 * gamma * f)
    return u_gg, u_ge, u_ee


def evolve_nojump(state: StateAmplitudes, t: float, omega: float, gamma: float) -> StateAmplitudes:
    """Advance amplitudes by ``t`` under the no-jump generator, unnormalized.

    The squared norm of the result is the no-jump survival probability, and
    ``gamma * |c_e|^2`` of the result is the waiting-time density.
    """
    u_gg, u_ge, u_ee = _nojump_propagator(t, omega, gamma)
    return StateAmplitudes(
        u_gg * state.c_g + u_ge * state.c_e,
        u_ge * state.c_g + u_ee * state.c_e,
    )


def mcwf_step(
    state: StateAmplitudes, dt: float, omega: float, gamma: float, u: float
) -> StateAmplitudes | JumpOccurred:
    """One stochastic step of the quantum-jump unraveling.

    With probability ``gamma * |c_e|^2 * dt`` (tested against the supplied
    unit ``u``) the photon is emitted and :data:`JUMP` is returned; the
    caller resets to the ground state and records the time.  Otherwise the
    amplitudes advance one ``dt`` by the exact no-jump propagator and are
    renormalized.
    """
    dp = gamma * abs(state.c_e) ** 2 * dt
    if dp > 0.1:
        raise StepTooLarge(f"jump probability {dp:.3g} per step exceeds 0.1; reduce dt")
    if u < dp:
        return JUMP
    return evolve_nojump(state, dt, omega, gamma).normalized()


def mcwf_waiting_density(tau: float, omega: float, gamma: float) -> float:
    """Closed-form interval density of the quantum-jump model.

    For the underdamped regime ``omega > gamma/2``:
    ``gamma * (omega^2 / (4 mu^2)) * exp(-gamma*tau/2) * sin^2(mu*tau)``
    with ``mu = sqrt(omega^2/4 - gamma^2/16)``.  Integrates to 1 over
    [0, inf); zero at ``tau == 0`` because the excited amplitude starts
    empty after every reset.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if gamma <= 0:
        raise NoDecayChannel("waiting density undefined for gamma <= 0")
    mu_sq = omega * omega / 4.0 - gamma * gamma / 16.0
    if mu_sq <= 0:
        raise OverdampedRegime(f"need omega > gamma/2, got omega={omega}, gamma={gamma}")
    mu = math.sqrt(mu_sq)
    return (
        gamma
        * (omega * omega / (4.0 * mu_sq))
        * math.exp(-0.5 * gamma * tau)
        * math.sin(mu * tau) ** 2
    )


class _NoJumpOrbit:
    """Deterministic renormalized state sequence after a reset.

    Between jumps every trajectory follows the same orbit, so the per-step
    jump probability depends only on the number of no-jump steps taken
    since the last reset.  ``dp(k)`` is extended lazily.
    """

    def __init__(self, omega: float, gamma: float, dt: float):
        self._prop = _nojump_propagator(dt, omega, gamma)
        self._scale = gamma * dt
        self._state = StateAmplitudes.ground()
        self.dps: list[float] = [0.0]  # ground state never jumps immediately

    def extend_to(self, k: int) -> None:
        u_gg, u_ge, u_ee = self._prop
        state = self._state
        while len(self.dps) <= k:
            state = StateAmplitudes(
                u_gg * state.c_g + u_ge * state.c_e,
                u_ge * state.c_g + u_ee * state.c_e,
            ).normalized()
            self.dps.append(self._scale * abs(state.c_e) ** 2)
        self._state = state


def sample_intervals_quantum_jump(
    omega: float, gamma: float, dt: float, n: int, source: RandomSource
) -> np.ndarray:
    """Draw ``n`` independent quantum-jump intervals, vectorized.

    Each pending interval consumes one unit per step, exactly as
    :func:`mcwf_step` does; steps for all pending intervals are advanced
    one round at a time.  A jump during step ``k`` (counted from the reset)
    yields the interval ``(k + 1) * dt``, matching the step-quantized times
    recorded by :func:`simulate_trajectory`.
    """
    if gamma <= 0:
        raise NoDecayChannel("cannot sample emission intervals with gamma <= 0")
    orbit = _NoJumpOrbit(omega, gamma, dt)
    steps = np.empty(n, dtype=np.int64)
    active = np.arange(n)
    k = 0
    while active.size:
        orbit.extend_to(k)
        u = source.units(active.size)
        jumped = u < orbit.dps[k]
        if jumped.any():
            steps[active[jumped]] = k
            active = active[~jumped]
        k += 1
    return (steps + 1).astype(np.float64) * dt


def simulate_trajectory(
    params: AtomParams,
    source: RandomSource,
    n_events: int | None = None,
    t_max: float | None = None,
) -> EmissionRecord:
    """Run one emission trajectory until the stop criterion is met.

    Exactly one of ``n_events`` (stop after that many emissions) or
    ``t_max`` (stop at that trajectory time, discarding any overshooting
    emission) must be given.  Under ``HAZARD_RENEWAL`` the intervals are
    i.i.d. thinning draws; under ``QUANTUM_JUMP`` the emission times are the
    step-quantized times at which :func:`mcwf_step` collapsed.

    With ``gamma == 0`` no emission can ever occur: an event-count stop
    with ``n_events > 0`` raises :class:`NoDecayChannel`, while a time stop
    returns an empty record.
    """
    if (n_events is None) == (t_max is None):
        raise ValueError("specify exactly one of n_events or t_max")
    if n_events is not None and n_events < 0:
        raise ValueError("n_events must be non-negative")
    if t_max is not None and t_max <= 0:
        raise ValueError("t_max must be positive")

    tag = source.describe()
    if n_events == 0:
        return EmissionRecord([], [], params, tag)
    if params.gamma == 0:
        if t_max is not None:
            return EmissionRecord([], [], params, tag)
        raise NoDecayChannel("gamma == 0: the requested emissions can never occur")

    times: list[float] = []
    if params.model is DecayModel.HAZARD_RENEWAL:
        t = 0.0
        while True:
            tau = sample_interval_hazard(source, params.rabi_omega, params.gamma)
            t += tau
            if t_max is not None and t > t_max:
                break
            times.append(t)
            if n_events is not None and len(times) >= n_events:
                break
    else:
        state = StateAmplitudes.ground()
        step = 0
        while True:
            if t_max is not None and (step + 1) * params.dt > t_max:
                break
            out = mcwf_step(state, params.dt, params.rabi_omega, params.gamma, source.next_unit())
            step += 1
            if isinstance(out, JumpOccurred):
                times.append(step * params.dt)
                state = StateAmplitudes.ground()
                if n_events is not None and len(times) >= n_events:
                    break
            else:
                state = out
    return EmissionRecord.from_times(times, params, tag)


def measure_state(p_excited: float, source: RandomSource) -> StateOutcome:
    """Projective measurement: EXCITED iff the drawn unit is below ``p``.

    ``p == 1`` always yields EXCITED because units are strictly below 1.
    """
    if not 0.0 <= p_excited <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p_excited}")
    if source.next_unit() < p_excited:
        return StateOutcome.EXCITED
    return StateOutcome.GROUND


def excited_population(params: AtomParams, tau: float) -> float:
    """Excited-state probability ``tau`` after a reset, model-dependent.

    Undamped ``sin^2`` for the hazard-renewal picture; the renormalized
    no-jump amplitude for the quantum-jump model, which damps towards its
    steady oscillation between emissions.
    """
    if params.model is DecayModel.HAZARD_RENEWAL:
        return excited_probability(tau, params.rabi_omega)
    state = evolve_nojump(StateAmplitudes.ground(), tau, params.rabi_omega, params.gamma)
    return state.p_excited


def write_emissions_csv(record: EmissionRecord, path) -> None:
    """Export a record as ``index,time_s,interval_s`` rows, 12 significant digits."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("index,time_s,interval_s\n")
            for i, (t, tau) in enumerate(zip(record.emission_times, record.intervals)):
                fh.write(f"{i},{t:.11e},{tau:.11e}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_emissions_csv(path) -> tuple[list[float], list[float]]:
    """Read back (times, intervals) from :func:`write_emissions_csv` output."""
    times: list[float] = []
    intervals: list[float] = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not lines or lines[0].strip() != "index,time_s,interval_s":
        raise IoFailure(f"{path} is not an emissions CSV")
    for line in lines[1:]:
        if not line.strip():
            continue
        _, t, tau = line.split(",")
        times.append(float(t))
        intervals.append(float(tau))
    return times, intervals
