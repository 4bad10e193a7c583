"""Master equations for radical-pair reactions and their fixed-step integration.

Four theories share the same Hamiltonian part and differ in how recombination
(and S-T dephasing) enters:

* ``LINDBLAD`` - trace-preserving S-T dephasing only (no recombination).
* ``RETRODICTIVE`` - dephasing plus retrodictive reaction terms weighted by p_coh.
* ``TRADITIONAL`` - Haberkorn anticommutator reaction terms.
* ``JONES_HORE`` - reaction terms k_x (Q_x rho + rho Q_x - Q_x rho Q_x).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .coherence import CoherenceContext, coherence_C, pcoh_new_raw
from .spin_core import CArray, SpinSystem

#: (k_S + k_T) dt must stay below this for propagate to accept a step size.
STABILITY_LIMIT = 0.1
#: Smallest eigenvalue of rho tolerated during integration.
POSITIVITY_TOL = -1e-6


class IntegrationError(RuntimeError):
    pass


class Theory(str, enum.Enum):
    LINDBLAD = "lindblad"
    RETRODICTIVE = "retrodictive"
    TRADITIONAL = "traditional"
    JONES_HORE = "jones-hore"

    @classmethod
    def parse(cls, name: str) -> "Theory":
        key = name.strip().lower().replace("_", "-")
        aliases = {
            "lindblad-only": cls.LINDBLAD,
            "lindbladonly": cls.LINDBLAD,
            "haberkorn": cls.TRADITIONAL,
            "joneshore": cls.JONES_HORE,
            "jh": cls.JONES_HORE,
        }
        if key in aliases:
            return aliases[key]
        return cls(key)

    @property
    def recombines(self) -> bool:
        return self is not Theory.LINDBLAD


@dataclass(frozen=True)
class Rates:
    """Singlet and triplet recombination rates (units of A)."""

    k_S: float
    k_T: float

    def __post_init__(self):
        if not (self.k_S >= 0 and self.k_T >= 0):
            raise ValueError(f"recombination rates must be non-negative, got {self.k_S}, {self.k_T}")

    @property
    def total(self) -> float:
        return self.k_S + self.k_T


def _blocks(rho: CArray, system: SpinSystem):
    qs, qt = system.Q_S, system.Q_T
    a, b = qs @ rho, qt @ rho
    return a @ qs, b @ qt, a @ qt, b @ qs


def _liouville(H: CArray, rho: CArray) -> CArray:
    return -1j * (H @ rho - rho @ H)


def rhs_lindblad_only(rho: CArray, H: CArray, rates: Rates, system: SpinSystem) -> CArray:
    _, _, st, ts = _blocks(rho, system)
    return _liouville(H, rho) - 0.5 * rates.total * (st + ts)


def rhs_retrodictive(
    rho: CArray,
    H: CArray,
    rates: Rates,
    ctx: CoherenceContext,
    system: SpinSystem,
    *,
    force_incoherent: bool = False,
) -> CArray:
    """Retrodictive master equation in the block (division-free) form.

    The coherent retrodiction branch enters as p * rho_coh = p (rho_SS + rho_TT)
    + rho_ST + rho_TS, so p_coh -> 0 is regular. ``force_incoherent`` sets the
    retrodiction probability of the coherent branch to zero, which attributes
    every recombination to the incoherent part and drops that branch entirely.
    """
    tr = np.trace(rho).real
    if tr <= 0:
        raise ValueError("retrodictive rhs needs Tr(rho) > 0")
    ss, tt, st, ts = _blocks(rho, system)
    ks, kt = rates.k_S, rates.k_T
    out = _liouville(H, rho) - 0.5 * (ks + kt) * (st + ts)
    if force_incoherent:
        return out - (ks * ss + kt * tt)
    p = min(1.0, max(0.0, pcoh_new_raw(rho, ctx, system)))
    out -= (1.0 - p) * (ks * ss + kt * tt)
    loss = (ks * np.trace(ss).real + kt * np.trace(tt).real) / tr
    out -= loss * (p * (ss + tt) + st + ts)
    return out


def rhs_traditional(rho: CArray, H: CArray, rates: Rates, system: SpinSystem) -> CArray:
    qs, qt = system.Q_S, system.Q_T
    return (
        _liouville(H, rho)
        - 0.5 * rates.k_S * (qs @ rho + rho @ qs)
        - 0.5 * rates.k_T * (qt @ rho + rho @ qt)
    )


def rhs_jones_hore(rho: CArray, H: CArray, rates: Rates, system: SpinSystem) -> CArray:
    qs, qt = system.Q_S, system.Q_T
    return (
        _liouville(H, rho)
        - rates.k_S * (qs @ rho + rho @ qs - qs @ rho @ qs)
        - rates.k_T * (qt @ rho + rho @ qt - qt @ rho @ qt)
    )


def rhs(theory: Theory, rho, H, rates, system, ctx: CoherenceContext | None = None) -> CArray:
    theory = Theory(theory)
    if theory is Theory.LINDBLAD:
        return rhs_lindblad_only(rho, H, rates, system)
    if theory is Theory.RETRODICTIVE:
        if ctx is None:
            raise ValueError("the retrodictive theory needs a CoherenceContext")
        return rhs_retrodictive(rho, H, rates, ctx, system)
    if theory is Theory.TRADITIONAL:
        return rhs_traditional(rho, H, rates, system)
    return rhs_jones_hore(rho, H, rates, system)


def normalized_populations(rho: CArray, system: SpinSystem) -> tuple[float, float]:
    tr = np.trace(rho).real
    if tr <= 0:
        raise ValueError("normalised populations need Tr(rho) > 0")
    qs = np.trace(rho @ system.Q_S).real / tr
    return qs, 1.0 - qs


def coherence_decay_rates(theory: Theory, rho: CArray, rates: Rates, system: SpinSystem) -> tuple[float, float, float]:
    """(Gamma_c, kappa, gamma_c) for the coherent block rho_ST + rho_TS.

    Gamma_c is the decay rate of rho_c itself, kappa the decay rate of Tr(rho)
    and gamma_c = Gamma_c - kappa the decay rate of rho_c / Tr(rho).
    """
    theory = Theory(theory)
    qs, qt = normalized_populations(rho, system)
    ks, kt = rates.k_S, rates.k_T
    if theory is Theory.LINDBLAD:
        gamma = 0.5 * (ks + kt)
        return gamma, 0.0, gamma
    kappa = ks * qs + kt * qt
    if theory is Theory.RETRODICTIVE:
        big = ks * (0.5 + qs) + kt * (0.5 + qt)
    elif theory is Theory.TRADITIONAL:
        big = 0.5 * (ks + kt)
    else:
        big = ks + kt
    return big, kappa, big - kappa


def coherent_block_rhs_check(
    theory: Theory, rho: CArray, H: CArray, rates: Rates, system: SpinSystem, ctx: CoherenceContext | None = None
) -> float:
    """Max-abs residual between the S-T block of the rhs and -i[H, rho]_c - Gamma_c rho_c."""
    theory = Theory(theory)
    if ctx is None:
        # the S-T block of the retrodictive rhs does not depend on p_coh
        ctx = CoherenceContext(1.0)
    d = rhs(theory, rho, H, rates, system, ctx)
    qs, qt = system.Q_S, system.Q_T
    d_c = qs @ d @ qt + qt @ d @ qs
    comm = _liouville(H, rho)
    comm_c = qs @ comm @ qt + qt @ comm @ qs
    rho_c = qs @ rho @ qt + qt @ rho @ qs
    big, _, _ = coherence_decay_rates(theory, rho, rates, system)
    return float(np.max(np.abs(d_c - (comm_c - big * rho_c))))


@dataclass
class EvolutionResult:
    theory: Theory
    t: np.ndarray
    trace: np.ndarray
    qs: np.ndarray
    qs_norm: np.ndarray
    pcoh: np.ndarray
    C: np.ndarray
    n_S: np.ndarray
    n_T: np.ndarray
    Gamma_c: np.ndarray
    kappa: np.ndarray
    gamma_c: np.ndarray
    rho_final: CArray
    pcoh_clamped: int = 0
    min_eigenvalue: float = field(default=np.inf)

    COLUMNS = ("t", "trace", "qs", "qs_norm", "pcoh", "C", "n_S", "n_T", "Gamma_c", "kappa", "gamma_c")

    def columns(self) -> dict[str, np.ndarray]:
        return {c: getattr(self, c) for c in self.COLUMNS}

    @property
    def qt_norm(self) -> np.ndarray:
        return 1.0 - self.qs_norm


def rk4_step(f, rho: CArray, dt: float) -> CArray:
    k1 = f(rho)
    k2 = f(rho + 0.5 * dt * k1)
    k3 = f(rho + 0.5 * dt * k2)
    k4 = f(rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def propagate(
    theory: Theory,
    rho0: CArray,
    H: CArray,
    rates: Rates,
    dt: float,
    steps: int,
    ctx: CoherenceContext,
    system: SpinSystem,
    *,
    check_positivity: bool = True,
) -> EvolutionResult:
    """Integrate one master equation with classical RK4 on a uniform grid.

    Observables are recorded at all ``steps + 1`` grid points. Product yields
    are the time integrals of k_S Tr{rho Q_S} and k_T Tr{rho Q_T} (trapezoidal).
    """
    theory = Theory(theory)
    if dt <= 0 or steps < 1:
        raise ValueError("need dt > 0 and at least one step")
    if dt * rates.total >= STABILITY_LIMIT:
        raise ValueError(f"(k_S + k_T) dt = {dt * rates.total:.3g} exceeds the stability limit {STABILITY_LIMIT}")

    def f(r):
        return rhs(theory, r, H, rates, system, ctx)

    n = steps + 1
    cols = {c: np.zeros(n) for c in ("trace", "qs", "qs_norm", "pcoh", "C", "Gamma_c", "kappa", "gamma_c")}
    rho = np.array(rho0, dtype=complex)
    clamped = 0
    min_eig = np.inf
    for k in range(n):
        if not np.all(np.isfinite(rho)):
            raise IntegrationError(f"non-finite density matrix at step {k}")
        if check_positivity:
            ev = np.linalg.eigvalsh(rho)[0]
            min_eig = min(min_eig, ev)
            if ev < POSITIVITY_TOL:
                raise IntegrationError(f"density matrix lost positivity at t = {k * dt:.4g} (min eigenvalue {ev:.3e})")
        tr = np.trace(rho).real
        if tr <= 0:
            raise IntegrationError(f"trace vanished at step {k}")
        qs = np.trace(rho @ system.Q_S).real
        c = coherence_C(rho, system)
        raw = 0.0 if ctx.c_max < ctx.epsilon_cmax else c / (tr * ctx.c_max)
        if raw > 1.0:
            clamped += 1
        big, kappa, gamma = coherence_decay_rates(theory, rho, rates, system)
        cols["trace"][k] = tr
        cols["qs"][k] = qs
        cols["qs_norm"][k] = qs / tr
        cols["pcoh"][k] = min(1.0, max(0.0, raw))
        cols["C"][k] = c
        cols["Gamma_c"][k] = big
        cols["kappa"][k] = kappa
        cols["gamma_c"][k] = gamma
        if k == steps:
            break
        rho = rk4_step(f, rho, dt)
        rho = 0.5 * (rho + rho.conj().T)

    if theory.recombines:
        qt = cols["trace"] - cols["qs"]
        rate_s, rate_t = rates.k_S * cols["qs"], rates.k_T * qt
    else:
        rate_s = rate_t = np.zeros(n)
    n_S = np.concatenate(([0.0], np.cumsum(0.5 * dt * (rate_s[1:] + rate_s[:-1]))))
    n_T = np.concatenate(([0.0], np.cumsum(0.5 * dt * (rate_t[1:] + rate_t[:-1]))))
    return EvolutionResult(
        theory=theory,
        t=np.arange(n) * dt,
        n_S=n_S,
        n_T=n_T,
        rho_final=rho,
        pcoh_clamped=clamped,
        min_eigenvalue=float(min_eig),
        **cols,
    )
