"""Experiment configuration (YAML) and the bundled presets."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import yaml

from .dynamics import STABILITY_LIMIT, Rates, Theory
from .montecarlo import EnsembleConfig, InitialStatePolicy
from .spin_core import HamiltonianSpec, NuclearSpinSpec, Site, SpinSystem


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MonteCarloSettings:
    n_trajectories: int = 10_000
    seed: int = 1
    initial_state_policy: InitialStatePolicy = InitialStatePolicy.SPLIT
    recombination: bool = True
    batch_size: int = 2048
    dump_trajectory: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    system: SpinSystem
    hamiltonian: HamiltonianSpec
    rates: Rates
    theories: tuple[Theory, ...]
    horizon: float
    steps: int
    coherence_window: float
    montecarlo: MonteCarloSettings = field(default_factory=MonteCarloSettings)
    output: str = "out"

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def ensemble_config(self) -> EnsembleConfig:
        mc = self.montecarlo
        return EnsembleConfig(
            n_trajectories=mc.n_trajectories,
            dt=self.dt,
            steps=self.steps,
            seed=mc.seed,
            initial_state_policy=mc.initial_state_policy,
            recombination=mc.recombination,
            batch_size=mc.batch_size,
        )

    def with_overrides(self, *, seed: int | None = None, output: str | None = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, montecarlo=replace(cfg.montecarlo, seed=seed))
        if output is not None:
            cfg = replace(cfg, output=output)
        return cfg


def _get(d: dict, key: str, where: str, default=..., kind=None):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{where}.{key}: required key missing")
        return default
    v = d[key]
    if kind is not None:
        try:
            v = kind(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.{key}: {exc}") from None
    return v


def _section(d: dict, key: str, where: str) -> dict:
    sec = d.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{where}.{key}: expected a mapping")
    return sec


def parse_config(doc: dict, source: str = "<config>") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    w = source

    nuclei = []
    for i, n in enumerate(_section(doc, "system", w).get("nuclei", [])):
        loc = f"{w}.system.nuclei[{i}]"
        try:
            nuclei.append(NuclearSpinSpec(
                spin=_get(n, "spin", loc, 0.5, float),
                coupled_to=Site(_get(n, "coupled_to", loc, "donor", str).lower()),
                hyperfine=_get(n, "hyperfine", loc, 1.0, float),
            ))
        except (ValueError, AttributeError, TypeError) as exc:
            raise ConfigError(f"{loc}: {exc}") from None
    system = SpinSystem(tuple(nuclei))

    ham = _section(doc, "hamiltonian", w)
    try:
        hspec = HamiltonianSpec(
            larmor=_get(ham, "larmor", f"{w}.hamiltonian", 0.1, float),
            exchange=_get(ham, "exchange", f"{w}.hamiltonian", 0.0, float),
        )
    except ValueError as exc:
        raise ConfigError(f"{w}.hamiltonian: {exc}") from None

    r = _section(doc, "rates", w)
    try:
        rates = Rates(_get(r, "k_S", f"{w}.rates", kind=float), _get(r, "k_T", f"{w}.rates", kind=float))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{w}.rates: {exc}") from None

    raw_theories = doc.get("theories", [])
    if not isinstance(raw_theories, list) or not raw_theories:
        raise ConfigError(f"{w}.theories: at least one theory is required")
    theories = []
    for i, t in enumerate(raw_theories):
        try:
            theories.append(Theory.parse(str(t)))
        except ValueError:
            valid = ", ".join(x.value for x in Theory)
            raise ConfigError(f"{w}.theories[{i}]: unknown theory {t!r} (expected one of {valid})") from None

    grid = _section(doc, "grid", w)
    horizon = _get(grid, "horizon", f"{w}.grid", 30.0, float)
    steps = _get(grid, "steps", f"{w}.grid", 10_000, int)
    if horizon <= 0:
        raise ConfigError(f"{w}.grid.horizon: must be positive")
    if steps < 1:
        raise ConfigError(f"{w}.grid.steps: must be positive")
    dt = horizon / steps
    if dt * rates.total >= STABILITY_LIMIT:
        raise ConfigError(f"{w}.grid: (k_S + k_T) dt = {dt * rates.total:.3g} must stay below {STABILITY_LIMIT}")
    window = _get(_section(doc, "coherence", w), "window", f"{w}.coherence", horizon, float)
    if window < dt:
        raise ConfigError(f"{w}.coherence.window: must be at least one time step")

    mc_doc = _section(doc, "montecarlo", w)
    loc = f"{w}.montecarlo"
    try:
        policy = InitialStatePolicy(_get(mc_doc, "initial_state_policy", loc, "split", str))
    except ValueError:
        valid = ", ".join(p.value for p in InitialStatePolicy)
        raise ConfigError(f"{loc}.initial_state_policy: expected one of {valid}") from None
    dump = mc_doc.get("dump_trajectory")
    mc = MonteCarloSettings(
        n_trajectories=_get(mc_doc, "n_trajectories", loc, 10_000, int),
        seed=_get(mc_doc, "seed", loc, 1, int),
        initial_state_policy=policy,
        recombination=_get(mc_doc, "recombination", loc, True, bool),
        batch_size=_get(mc_doc, "batch_size", loc, 2048, int),
        dump_trajectory=None if dump is None else int(dump),
    )
    if mc.n_trajectories < 1:
        raise ConfigError(f"{loc}.n_trajectories: must be positive")
    if mc.batch_size < 1:
        raise ConfigError(f"{loc}.batch_size: must be positive")
    if not 0 <= mc.seed < 2**64:
        raise ConfigError(f"{loc}.seed: must be a 64-bit unsigned integer")
    if 1.5 * dt * rates.total >= 1:
        raise ConfigError(f"{loc}: event probabilities exceed one for this dt")

    return ExperimentConfig(
        name=str(doc.get("name", Path(source).stem)),
        system=system,
        hamiltonian=hspec,
        rates=rates,
        theories=tuple(theories),
        horizon=horizon,
        steps=steps,
        coherence_window=window,
        montecarlo=mc,
        output=str(doc.get("output", "out")),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return parse_config(doc, str(path))


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("radpair.presets").iterdir() if p.name.endswith(".yaml"))


def load_preset(name: str) -> ExperimentConfig:
    res = resources.files("radpair.presets") / f"{name}.yaml"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r} (available: {', '.join(preset_names())})")
    return parse_config(yaml.safe_load(res.read_text(encoding="utf-8")), f"preset:{name}")
