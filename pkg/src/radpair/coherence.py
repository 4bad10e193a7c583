"""Singlet-triplet coherence calculus.

The density matrix splits into four blocks ``rho_xy = Q_x rho Q_y``. Only the
off-diagonal S-T blocks carry coherence; coherences inside the triplet manifold
or among nuclear states are deliberately ignored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spin_core import CArray, SpinSystem

#: Below this value p_coh is treated as zero when distilling rho_coh.
PCOH_EPS = 1e-12
#: Below this value the unitary reference coherence is treated as zero.
CMAX_EPS = 1e-12
#: Floating-point noise allowed on the (mathematically non-negative) radicands.
RADICAND_TOL = 1e-14


class CoherenceError(ArithmeticError):
    pass


class UndefinedMeasureError(CoherenceError):
    pass


class SingularDecompositionError(CoherenceError):
    pass


@dataclass(frozen=True)
class Partition:
    SS: CArray
    TT: CArray
    ST: CArray
    TS: CArray

    @property
    def coherent(self) -> CArray:
        return self.ST + self.TS

    @property
    def incoherent(self) -> CArray:
        return self.SS + self.TT

    def reconstruct(self) -> CArray:
        return self.SS + self.TT + self.ST + self.TS


def _check_dim(rho: CArray, system: SpinSystem):
    if rho.shape != (system.dim, system.dim):
        raise ValueError(f"matrix shape {rho.shape} does not match system dimension {system.dim}")


def partition(rho: CArray, system: SpinSystem) -> Partition:
    _check_dim(rho, system)
    qs, qt = system.Q_S, system.Q_T
    return Partition(qs @ rho @ qs, qt @ rho @ qt, qs @ rho @ qt, qt @ rho @ qs)


def coherent_part(rho: CArray, system: SpinSystem) -> CArray:
    """rho_ST + rho_TS, which equals Q_S rho + rho Q_S - 2 Q_S rho Q_S."""
    p = partition(rho, system)
    return p.ST + p.TS


def _radicands(rho: CArray, system: SpinSystem) -> np.ndarray:
    # Tr{rho_ST P_j rho_TS} = ||W^dag rho V_j||_F^2 with Q_S = W W^dag, P_j = V_j V_j^dag
    n = system.nuclear_dim
    m = system.singlet_isometry.conj().T @ rho @ system.triplet_isometries
    a = m.real**2 + m.imag**2
    return a.reshape(n, 3, n).sum(axis=(0, 2))


def coherence_C(rho: CArray, system: SpinSystem) -> float:
    """Sum over T0, T+, T- of sqrt(Tr{rho_ST |T_j><T_j| rho_TS})."""
    _check_dim(rho, system)
    r = _radicands(rho, system)
    if np.any(r < -RADICAND_TOL):
        raise CoherenceError(f"negative radicand in coherence measure: {r.min():.3e}")
    return float(np.sum(np.sqrt(np.clip(r, 0.0, None))))


def pcoh_old(rho: CArray, system: SpinSystem) -> float:
    """The earlier quadratic measure Tr{rho_ST rho_TS} / (Tr rho_SS Tr rho_TT).

    Kept for comparison only: it scales with the square of the S-T blocks.
    """
    p = partition(rho, system)
    den = np.trace(p.SS).real * np.trace(p.TT).real
    if den <= 0:
        raise UndefinedMeasureError("pcoh_old needs non-zero singlet and triplet populations")
    return float(np.trace(p.ST @ p.TS).real / den)


@dataclass(frozen=True)
class CoherenceContext:
    """Normalisation for p_coh: the largest C reached under pure unitary evolution."""

    c_max: float
    epsilon_cmax: float = CMAX_EPS

    def __post_init__(self):
        if not self.c_max >= 0:
            raise ValueError("c_max must be non-negative")


def unitary_step(H: CArray, dt: float) -> CArray:
    """exp(-i H dt) via the eigendecomposition of Hermitian H."""
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def unitary_coherence_series(H: CArray, rho0: CArray, t_end: float, dt: float, system: SpinSystem):
    """Grid times, Tr{rho~ Q_S} and C(rho~) for rho~ evolving under H alone."""
    if dt <= 0 or t_end < dt:
        raise ValueError("need dt > 0 and t_end >= dt")
    n = int(round(t_end / dt))
    U = unitary_step(H, dt)
    Ud = U.conj().T
    rho = np.array(rho0, dtype=complex)
    t = np.arange(n + 1) * dt
    qs = np.empty(n + 1)
    cc = np.empty(n + 1)
    for k in range(n + 1):
        qs[k] = np.trace(rho @ system.Q_S).real
        cc[k] = coherence_C(rho, system)
        rho = U @ rho @ Ud
    return t, qs, cc


def max_unitary_coherence(H: CArray, rho0: CArray, t_end: float, dt: float, system: SpinSystem) -> CoherenceContext:
    _, _, cc = unitary_coherence_series(H, rho0, t_end, dt, system)
    return CoherenceContext(float(cc.max()))


def pcoh_new_raw(rho: CArray, ctx: CoherenceContext, system: SpinSystem) -> float:
    """C(rho) / (Tr rho * c_max) without clamping (0 if c_max is negligible)."""
    tr = np.trace(rho).real
    if tr <= 0:
        raise ValueError("p_coh undefined for a density matrix with non-positive trace")
    if ctx.c_max < ctx.epsilon_cmax:
        return 0.0
    return coherence_C(rho, system) / (tr * ctx.c_max)


def pcoh_new(rho: CArray, ctx: CoherenceContext, system: SpinSystem) -> float:
    return min(1.0, max(0.0, pcoh_new_raw(rho, ctx, system)))


def rho_incoh(rho: CArray, system: SpinSystem) -> CArray:
    return partition(rho, system).incoherent


def rho_coh(rho: CArray, p: float, system: SpinSystem) -> CArray:
    """Coherence distillation rho_SS + rho_TT + (rho_ST + rho_TS) / p."""
    if p <= PCOH_EPS:
        raise SingularDecompositionError(f"cannot distil coherence with p_coh = {p:.3e}")
    part = partition(rho, system)
    return part.incoherent + part.coherent / p


def scale_coherences(rho: CArray, lam: float, system: SpinSystem) -> CArray:
    part = partition(rho, system)
    return part.incoherent + lam * part.coherent


def kraus_dephase(rho: CArray, lam: float, system: SpinSystem) -> CArray:
    """Apply K1 = sqrt(1-lam) Q_S, K2 = sqrt(1-lam) Q_T, K3 = sqrt(lam) 1.

    The S-T blocks survive with factor ``lam``; diagonal blocks are untouched.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"dephasing factor must lie in [0, 1], got {lam}")
    kraus = [np.sqrt(1 - lam) * system.Q_S, np.sqrt(1 - lam) * system.Q_T, np.sqrt(lam) * np.eye(system.dim)]
    return sum(k @ rho @ k.conj().T for k in kraus)
