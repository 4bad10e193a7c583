"""Single-molecule quantum trajectories of radical pairs.

In every time step a surviving pair meets exactly one of five outcomes, chosen
with a single uniform number ``r`` over the disjoint partition

    [recombine S | recombine T | jump S | jump T | unitary]

whose widths are ``k_S dt <Q_S>``, ``k_T dt <Q_T>``, ``(k_S + k_T) dt/2 <Q_S>``,
``(k_S + k_T) dt/2 <Q_T>`` and the remainder, all taken at the pre-step state.

Randomness: trajectory ``i`` owns an independent Philox stream keyed by
``SeedSequence(seed, spawn_key=(i,))``. Trajectories are grouped in fixed-size
batches and batch tallies are reduced in batch order, so ensemble output does
not depend on how many worker threads ran the batches.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coherence import unitary_step
from .dynamics import Rates
from .spin_core import CArray, SpinSystem, singlet_product_state

#: Jumps onto a subspace with smaller squared overlap than this are treated as bugs.
IMPOSSIBLE_JUMP = 1e-14
#: Uniform numbers are drawn from each stream in chunks of this many steps.
RNG_CHUNK = 1024


class ImpossibleJumpError(RuntimeError):
    pass


class Event(enum.IntEnum):
    RECOMBINE_S = 0
    RECOMBINE_T = 1
    JUMP_S = 2
    JUMP_T = 3
    UNITARY = 4


class InitialStatePolicy(str, enum.Enum):
    # trajectory i starts in |S> (x) |nuclear basis state i mod n_nuc>
    SPLIT = "split"
    # each trajectory draws its nuclear basis state uniformly from its own stream
    UNIFORM_NUCLEAR_BASIS = "uniform-nuclear-basis"


@dataclass(frozen=True)
class EnsembleConfig:
    n_trajectories: int
    dt: float
    steps: int
    seed: int = 1
    initial_state_policy: InitialStatePolicy = InitialStatePolicy.SPLIT
    recombination: bool = True
    batch_size: int = 2048

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be positive")
        if self.dt <= 0 or self.steps < 1:
            raise ValueError("need dt > 0 and steps >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        object.__setattr__(self, "initial_state_policy", InitialStatePolicy(self.initial_state_policy))

    def check_rates(self, rates: Rates):
        if 1.5 * self.dt * rates.total >= 1:
            raise ValueError("event probabilities exceed one: reduce dt or the rates")


@dataclass
class TrajectoryState:
    psi: CArray
    alive: bool = True
    recombination: tuple[float, str] | None = None


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def unitary_propagator(H: CArray, dt: float) -> CArray:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return unitary_step(H, dt)


def _thresholds(qs, rates: Rates, dt: float, recombination: bool):
    qt = 1.0 - qs
    half = 0.5 * rates.total * dt
    c1 = rates.k_S * dt * qs if recombination else 0.0 * qs
    c2 = c1 + (rates.k_T * dt * qt if recombination else 0.0 * qt)
    c3 = c2 + half * qs
    c4 = c3 + half * qt
    return c1, c2, c3, c4


def select_event(qs, r, rates: Rates, dt: float, recombination: bool = True):
    """Map uniform draws to Event codes given pre-step singlet populations.

    Works elementwise on arrays as well as on scalars.
    """
    c1, c2, c3, c4 = _thresholds(qs, rates, dt, recombination)
    return (
        (np.asarray(r >= c1, dtype=np.int8))
        + (r >= c2)
        + (r >= c3)
        + (r >= c4)
    )


def _expect(psi: CArray, op: CArray) -> float:
    return float(np.real(np.vdot(psi, op @ psi)))


def step_trajectory(state: TrajectoryState, U, Q_S, Q_T, rates: Rates, dt: float, rng, *, t: float = 0.0, recombination: bool = True):
    """Advance one alive trajectory by ``dt``.

    ``rng`` is a Generator or an already drawn uniform number in [0, 1).
    Returns the new state and the Event that happened.
    """
    if not state.alive:
        raise ValueError("cannot step a recombined trajectory")
    r = rng.random() if isinstance(rng, np.random.Generator) else float(rng)
    qs = _expect(state.psi, Q_S)
    event = Event(int(select_event(qs, r, rates, dt, recombination)))
    if event is Event.RECOMBINE_S:
        return TrajectoryState(state.psi, False, (t, "S")), event
    if event is Event.RECOMBINE_T:
        return TrajectoryState(state.psi, False, (t, "T")), event
    if event is Event.UNITARY:
        psi = U @ state.psi
    else:
        proj = Q_S if event is Event.JUMP_S else Q_T
        psi = proj @ state.psi
        if np.real(np.vdot(psi, psi)) < IMPOSSIBLE_JUMP:
            raise ImpossibleJumpError(f"jump onto an empty subspace at t = {t}")
    psi = psi / np.linalg.norm(psi)
    return TrajectoryState(psi), event


def _initial_state(system: SpinSystem, config: EnsembleConfig, index: int, rng: np.random.Generator) -> CArray:
    if config.initial_state_policy is InitialStatePolicy.SPLIT:
        nuc = index % system.nuclear_dim
    else:
        nuc = int(rng.integers(system.nuclear_dim))
    return singlet_product_state(system, nuc)


def _uniforms(rng: np.random.Generator, steps: int):
    done = 0
    while done < steps:
        n = min(RNG_CHUNK, steps - done)
        yield rng.random(n)
        done += n


@dataclass
class TrajectoryRecord:
    index: int
    t: np.ndarray
    qs: np.ndarray
    events: np.ndarray
    recombination: tuple[float, str] | None

    @property
    def n_jumps(self) -> int:
        return int(np.sum((self.events == Event.JUMP_S) | (self.events == Event.JUMP_T)))


def run_trajectory(config: EnsembleConfig, H: CArray, rates: Rates, system: SpinSystem, trajectory_index: int) -> TrajectoryRecord:
    """Reference single-trajectory simulation (scalar stepping).

    ``qs[k]`` is <psi|Q_S|psi> at ``t[k]``; ``events[k]`` is what happened in
    step k -> k+1. The record stops at the step in which the pair recombined.
    """
    config.check_rates(rates)
    rng = trajectory_rng(config.seed, trajectory_index)
    U = unitary_propagator(H, config.dt)
    state = TrajectoryState(_initial_state(system, config, trajectory_index, rng))
    qs = [_expect(state.psi, system.Q_S)]
    events = []
    k = 0
    for chunk in _uniforms(rng, config.steps):
        for r in chunk:
            state, ev = step_trajectory(
                state, U, system.Q_S, system.Q_T, rates, config.dt, r,
                t=k * config.dt, recombination=config.recombination,
            )
            events.append(int(ev))
            k += 1
            if not state.alive:
                break
            qs.append(_expect(state.psi, system.Q_S))
        if not state.alive:
            break
    return TrajectoryRecord(
        index=trajectory_index,
        t=np.arange(len(qs)) * config.dt,
        qs=np.array(qs),
        events=np.array(events, dtype=np.int8),
        recombination=state.recombination,
    )


@dataclass
class _Tally:
    alive: np.ndarray
    sum_qs: np.ndarray
    sum_qs2: np.ndarray
    recombined_S: np.ndarray
    recombined_T: np.ndarray
    events: np.ndarray

    @classmethod
    def empty(cls, steps: int) -> "_Tally":
        n = steps + 1
        return cls(np.zeros(n, dtype=np.int64), np.zeros(n), np.zeros(n),
                   np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64), np.zeros(5, dtype=np.int64))

    def add(self, other: "_Tally"):
        self.alive += other.alive
        self.sum_qs += other.sum_qs
        self.sum_qs2 += other.sum_qs2
        self.recombined_S += other.recombined_S
        self.recombined_T += other.recombined_T
        self.events += other.events


def _singlet_population(psi: CArray, W: CArray):
    """<psi|Q_S|psi> = ||W^dagger psi||^2 for a single state or for rows of a batch."""
    a = psi @ W.conj()
    return np.sum(a.real**2 + a.imag**2, axis=-1)


#: Unitary-only rows are renormalised every this many steps (jumped rows at once).
RENORM_EVERY = 256


def _run_batch(config: EnsembleConfig, U: CArray, rates: Rates, system: SpinSystem, start: int, stop: int) -> _Tally:
    W = system.singlet_isometry
    UT, QST, QTT = U.T, system.Q_S.T, system.Q_T.T
    dt = config.dt
    tally = _Tally.empty(config.steps)
    indices = range(start, stop)
    rngs = [trajectory_rng(config.seed, i) for i in indices]
    psi = np.array([_initial_state(system, config, i, g) for i, g in zip(indices, rngs)])
    streams = [_uniforms(g, config.steps) for g in rngs]
    rows = np.arange(len(rngs))  # batch position of each live row
    compacted = False

    qs = _singlet_population(psi, W)
    tally.alive[0] = len(rows)
    tally.sum_qs[0] = qs.sum()
    tally.sum_qs2[0] = (qs * qs).sum()

    k = 0
    while k < config.steps and len(rows):
        R = np.array([next(s) for s in streams]).T.copy()  # (chunk, batch)
        for j in range(R.shape[0]):
            r = R[j, rows] if compacted else R[j]
            n_before = len(rows)
            c4 = _thresholds(qs, rates, dt, config.recombination)[3]
            special = np.flatnonzero(r < c4)
            new = psi @ UT
            if special.size:
                ev = select_event(qs[special], r[special], rates, dt, config.recombination)
                tally.events[:4] += np.bincount(ev, minlength=5)[:4]
                tally.recombined_S[k + 1] = np.count_nonzero(ev == Event.RECOMBINE_S)
                tally.recombined_T[k + 1] = np.count_nonzero(ev == Event.RECOMBINE_T)
                for code, proj in ((Event.JUMP_S, QST), (Event.JUMP_T, QTT)):
                    sel = special[ev == code]
                    if sel.size:
                        v = psi[sel] @ proj
                        n2 = np.sum(v.real**2 + v.imag**2, axis=1)
                        if np.any(n2 < IMPOSSIBLE_JUMP):
                            bad = start + int(rows[sel[np.argmin(n2)]])
                            raise ImpossibleJumpError(f"trajectory {bad}: jump onto an empty subspace at t = {k * dt}")
                        new[sel] = v / np.sqrt(n2)[:, None]
                dead = special[ev <= Event.RECOMBINE_T]
                if dead.size:
                    keep = np.ones(len(rows), dtype=bool)
                    keep[dead] = False
                    new, rows = new[keep], rows[keep]
                    compacted = True
            psi = new
            tally.events[Event.UNITARY] += n_before - special.size
            k += 1
            if k % RENORM_EVERY == 0:
                psi /= np.linalg.norm(psi, axis=1)[:, None]
            qs = _singlet_population(psi, W)
            tally.alive[k] = len(rows)
            tally.sum_qs[k] = qs.sum()
            tally.sum_qs2[k] = (qs * qs).sum()
            if not len(rows):
                break
    return tally


@dataclass
class EnsembleResult:
    """Trajectory-averaged observables, normalised by the initial ensemble size."""

    t: np.ndarray
    n0: int
    alive: np.ndarray
    sum_qs: np.ndarray
    sum_qs2: np.ndarray
    recombined_S: np.ndarray
    recombined_T: np.ndarray
    event_counts: dict[str, int] = field(default_factory=dict)

    @property
    def survival(self) -> np.ndarray:
        return self.alive / self.n0

    @property
    def survival_stderr(self) -> np.ndarray:
        s = self.survival
        return np.sqrt(s * (1 - s) / self.n0)

    @property
    def qs(self) -> np.ndarray:
        """Tr{rho_MC Q_S} with rho_MC = (1/N0) sum over survivors."""
        return self.sum_qs / self.n0

    @property
    def qs_stderr(self) -> np.ndarray:
        n = self.n0
        mean = self.sum_qs / n
        var = np.clip(self.sum_qs2 - n * mean**2, 0, None) / max(n - 1, 1)
        return np.sqrt(var / n)

    @property
    def qs_norm(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.alive > 0, self.sum_qs / np.maximum(self.alive, 1), np.nan)

    @property
    def qs_norm_stderr(self) -> np.ndarray:
        n = self.alive.astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = self.sum_qs / n
            var = np.clip(self.sum_qs2 - n * mean**2, 0, None) / np.maximum(n - 1, 1)
            return np.where(n > 1, np.sqrt(var / n), np.nan)

    COLUMNS = ("t", "survival", "survival_stderr", "qs", "qs_stderr", "qs_norm", "qs_norm_stderr")

    def columns(self) -> dict[str, np.ndarray]:
        return {c: np.asarray(getattr(self, c), dtype=float) for c in self.COLUMNS}


def default_threads() -> int:
    return os.cpu_count() or 1


def run_ensemble(config: EnsembleConfig, H: CArray, rates: Rates, system: SpinSystem, *, threads: int = 1) -> EnsembleResult:
    """Simulate ``config.n_trajectories`` independent pairs and average them.

    ``threads`` only changes wall time; results are bit-identical for any value.
    """
    config.check_rates(rates)
    U = unitary_propagator(H, config.dt)
    bounds = [
        (s, min(s + config.batch_size, config.n_trajectories))
        for s in range(0, config.n_trajectories, config.batch_size)
    ]
    workers = default_threads() if threads == 0 else max(1, threads)
    if workers == 1 or len(bounds) == 1:
        tallies = [_run_batch(config, U, rates, system, a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tallies = list(pool.map(lambda ab: _run_batch(config, U, rates, system, *ab), bounds))
    total = _Tally.empty(config.steps)
    for tl in tallies:
        total.add(tl)
    return EnsembleResult(
        t=np.arange(config.steps + 1) * config.dt,
        n0=config.n_trajectories,
        alive=total.alive,
        sum_qs=total.sum_qs,
        sum_qs2=total.sum_qs2,
        recombined_S=total.recombined_S,
        recombined_T=total.recombined_T,
        event_counts={e.name: int(total.events[e]) for e in Event},
    )
