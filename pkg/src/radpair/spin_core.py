"""Spin operators, singlet/triplet projectors, Hamiltonians and initial states.

The Hilbert space of a radical pair is the tensor product

    donor electron (x) acceptor electron (x) nucleus 1 (x) ... (x) nucleus M

in exactly that order. Every operator built here is a dense ``(d, d)`` complex
array with ``d = 4 * prod(2 I_j + 1)``. Frequencies and rates are expressed in
units of a reference hyperfine constant ``A`` (so ``A = 1``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from math import prod, sqrt

import numpy as np
from numpy.typing import NDArray

CArray = NDArray[np.complex128]


class Site(enum.Enum):
    DONOR = "donor"
    ACCEPTOR = "acceptor"


@dataclass(frozen=True)
class NuclearSpinSpec:
    """A magnetic nucleus hyperfine-coupled to one of the two electrons.

    Attributes:
        spin: nuclear spin quantum number I (1/2, 1, 3/2, ...).
        coupled_to: electron carrying the hyperfine interaction.
        hyperfine: isotropic coupling constant A_j in units of A.
    """

    spin: float = 0.5
    coupled_to: Site = Site.DONOR
    hyperfine: float = 1.0

    def __post_init__(self):
        twice = 2 * self.spin
        if self.spin < 0.5 or abs(twice - round(twice)) > 1e-12:
            raise ValueError(f"nuclear spin must be a positive multiple of 1/2, got {self.spin}")
        if not np.isfinite(self.hyperfine):
            raise ValueError("hyperfine constant must be finite")
        if not isinstance(self.coupled_to, Site):
            object.__setattr__(self, "coupled_to", Site(self.coupled_to))

    @property
    def multiplicity(self) -> int:
        return int(round(2 * self.spin)) + 1


@dataclass(frozen=True)
class SpinSystem:
    """Two electrons plus an ordered tuple of nuclei."""

    nuclei: tuple[NuclearSpinSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "nuclei", tuple(self.nuclei))

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return (2, 2) + tuple(n.multiplicity for n in self.nuclei)

    @property
    def nuclear_dim(self) -> int:
        return prod(n.multiplicity for n in self.nuclei)

    @property
    def dim(self) -> int:
        return 4 * self.nuclear_dim

    # Projectors are used in every hot loop; cache them on the (immutable) system.
    @cached_property
    def Q_S(self) -> CArray:
        return singlet_projector(self)

    @cached_property
    def Q_T(self) -> CArray:
        return triplet_projector(self)

    @cached_property
    def P_T(self) -> tuple[CArray, CArray, CArray]:
        return triplet_state_projectors(self)

    @cached_property
    def singlet_isometry(self) -> CArray:
        """d x n_nuc matrix W with W W^dagger = Q_S."""
        return np.kron(KET_S[:, None], np.eye(self.nuclear_dim))

    @cached_property
    def triplet_isometries(self) -> CArray:
        """d x 3 n_nuc matrix [V_0 V_+ V_-] with V_j V_j^dagger = |T_j><T_j| (x) 1."""
        eye_n = np.eye(self.nuclear_dim)
        return np.hstack([np.kron(k[:, None], eye_n) for k in (KET_T0, KET_TP, KET_TM)])


def one_nucleus_system(hyperfine: float = 1.0, coupled_to: Site = Site.DONOR) -> SpinSystem:
    """The single spin-1/2 nucleus model used by all bundled presets (d = 8)."""
    return SpinSystem((NuclearSpinSpec(0.5, coupled_to, hyperfine),))


def spin_matrices(s: float) -> tuple[CArray, CArray, CArray]:
    """Return (Sx, Sy, Sz) for spin quantum number ``s`` in the |m = s, ..., -s> basis."""
    n = int(round(2 * s)) + 1
    m = s - np.arange(n)
    # <m+1|S+|m> = sqrt(s(s+1) - m(m+1))
    sp = np.zeros((n, n), dtype=complex)
    for k in range(1, n):
        sp[k - 1, k] = sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    sm = sp.conj().T
    sx = (sp + sm) / 2
    sy = (sp - sm) / 2j
    sz = np.diag(m).astype(complex)
    return sx, sy, sz


_AXES = {"x": 0, "y": 1, "z": 2}


def _site_index(system: SpinSystem, site) -> int:
    if site == Site.DONOR or site == "donor":
        return 0
    if site == Site.ACCEPTOR or site == "acceptor":
        return 1
    if isinstance(site, (int, np.integer)) and not isinstance(site, bool):
        if 0 <= site < len(system.nuclei):
            return 2 + int(site)
        raise ValueError(f"nucleus index {site} out of range for {len(system.nuclei)} nuclei")
    raise ValueError(f"invalid site {site!r}")


def embed_spin_component(system: SpinSystem, site, axis: str) -> CArray:
    """Embed one Cartesian spin component of a single site into the full space.

    ``site`` is ``Site.DONOR``, ``Site.ACCEPTOR`` or an integer nucleus index.
    """
    if axis not in _AXES:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    idx = _site_index(system, site)
    dims = system.factor_dims
    spin = 0.5 if idx < 2 else system.nuclei[idx - 2].spin
    local = spin_matrices(spin)[_AXES[axis]]
    out = np.eye(1, dtype=complex)
    for k, dk in enumerate(dims):
        out = np.kron(out, local if k == idx else np.eye(dk))
    return out


def spin_vector(system: SpinSystem, site) -> tuple[CArray, CArray, CArray]:
    return tuple(embed_spin_component(system, site, a) for a in "xyz")


def electron_exchange(system: SpinSystem) -> CArray:
    """s_D . s_A as a d x d operator."""
    sd = spin_vector(system, Site.DONOR)
    sa = spin_vector(system, Site.ACCEPTOR)
    return sum(a @ b for a, b in zip(sd, sa))


def singlet_projector(system: SpinSystem) -> CArray:
    return 0.25 * np.eye(system.dim) - electron_exchange(system)


def triplet_projector(system: SpinSystem) -> CArray:
    return 0.75 * np.eye(system.dim) + electron_exchange(system)


# Electron-pair states in the |uu>, |ud>, |du>, |dd> basis.
KET_S = np.array([0, 1, -1, 0], dtype=complex) / sqrt(2)
KET_T0 = np.array([0, 1, 1, 0], dtype=complex) / sqrt(2)
KET_TP = np.array([1, 0, 0, 0], dtype=complex)
KET_TM = np.array([0, 0, 0, 1], dtype=complex)


def triplet_state_projectors(system: SpinSystem) -> tuple[CArray, CArray, CArray]:
    """Projectors |T_j><T_j| (x) 1_nuclear, returned in the order (T0, T+, T-)."""
    eye_n = np.eye(system.nuclear_dim)
    return tuple(np.kron(np.outer(k, k.conj()), eye_n) for k in (KET_T0, KET_TP, KET_TM))


@dataclass(frozen=True)
class HamiltonianSpec:
    """Zeeman frequency, optional exchange J; hyperfine constants live on the nuclei."""

    larmor: float = 0.1
    exchange: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.larmor) and np.isfinite(self.exchange)):
            raise ValueError("Hamiltonian parameters must be finite")


def build_hamiltonian(system: SpinSystem, spec: HamiltonianSpec) -> CArray:
    """H = w (s_Dz + s_Az) + sum_j A_j s_e(j) . I_j + J s_D . s_A."""
    H = spec.larmor * (
        embed_spin_component(system, Site.DONOR, "z")
        + embed_spin_component(system, Site.ACCEPTOR, "z")
    )
    for j, nuc in enumerate(system.nuclei):
        if nuc.hyperfine == 0:
            continue
        s_e = spin_vector(system, nuc.coupled_to)
        s_n = spin_vector(system, j)
        H = H + nuc.hyperfine * sum(a @ b for a, b in zip(s_e, s_n))
    if spec.exchange:
        H = H + spec.exchange * electron_exchange(system)
    return H


def total_sz(system: SpinSystem) -> CArray:
    ops = [embed_spin_component(system, Site.DONOR, "z"), embed_spin_component(system, Site.ACCEPTOR, "z")]
    ops += [embed_spin_component(system, j, "z") for j in range(len(system.nuclei))]
    return sum(ops)


def singlet_initial_density(system: SpinSystem) -> CArray:
    """Electron singlet with unpolarised nuclei: Q_S / Tr Q_S."""
    qs = system.Q_S
    return qs / np.trace(qs).real


def nuclear_basis_state(system: SpinSystem, index: int) -> CArray:
    v = np.zeros(system.nuclear_dim, dtype=complex)
    v[index] = 1.0
    return v


def singlet_product_state(system: SpinSystem, nuclear_index: int) -> CArray:
    """|S> (x) |n>, with |n> the ``nuclear_index``-th nuclear product basis state.

    For one spin-1/2 nucleus index 0 is |up> and index 1 is |down>.
    """
    return np.kron(KET_S, nuclear_basis_state(system, nuclear_index))


def commutator(a: CArray, b: CArray) -> CArray:
    return a @ b - b @ a
