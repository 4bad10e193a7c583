import numpy as np
import pytest

from radpair.coherence import max_unitary_coherence
from radpair.spin_core import (
    HamiltonianSpec,
    NuclearSpinSpec,
    Site,
    SpinSystem,
    build_hamiltonian,
    one_nucleus_system,
    singlet_initial_density,
)

# Time grid shared by the bundled presets.
DT = 0.003
STEPS = 10_000
HORIZON = 30.0


def random_density(d, rng, rank=None):
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_state(d, rng):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def system():
    return one_nucleus_system()


@pytest.fixture(scope="session")
def two_nuclei():
    return SpinSystem((NuclearSpinSpec(0.5, Site.DONOR, 1.0), NuclearSpinSpec(1.0, Site.ACCEPTOR, 0.4)))


@pytest.fixture(scope="session")
def H(system):
    return build_hamiltonian(system, HamiltonianSpec(larmor=0.1))


@pytest.fixture(scope="session")
def rho0(system):
    return singlet_initial_density(system)


@pytest.fixture(scope="session")
def ctx(system, H, rho0):
    return max_unitary_coherence(H, rho0, HORIZON, DT, system)


# Acceptance verdicts, printed as one PASS/FAIL line each at the end of the run.
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {key}: {detail}")
