"""Command-line front end.

    radpair simulate   --preset fig7
    radpair montecarlo --preset fig5 --seed 3 --threads 4
    radpair compare    --config my.yaml --out results/
    radpair rates      --preset fig7

Exit status: 0 on success, 2 for usage/configuration errors, 1 for runtime or I/O failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis
from .coherence import CoherenceContext, unitary_coherence_series
from .config import ConfigError, ExperimentConfig, load_config, load_preset, preset_names
from .dynamics import EvolutionResult, Theory, propagate
from .io import write_csv
from .montecarlo import EnsembleResult, run_ensemble, run_trajectory
from .spin_core import build_hamiltonian, singlet_initial_density

log = logging.getLogger("radpair")


@dataclass
class Setup:
    cfg: ExperimentConfig
    H: np.ndarray
    rho0: np.ndarray
    ctx: CoherenceContext
    unitary: tuple[np.ndarray, np.ndarray, np.ndarray]


def prepare(cfg: ExperimentConfig) -> Setup:
    H = build_hamiltonian(cfg.system, cfg.hamiltonian)
    rho0 = singlet_initial_density(cfg.system)
    series = unitary_coherence_series(H, rho0, cfg.coherence_window, cfg.dt, cfg.system)
    return Setup(cfg, H, rho0, CoherenceContext(float(series[2].max())), series)


def _meta(setup: Setup, **extra) -> dict:
    cfg = setup.cfg
    meta = {
        "experiment": cfg.name,
        "k_S": repr(cfg.rates.k_S),
        "k_T": repr(cfg.rates.k_T),
        "larmor": repr(cfg.hamiltonian.larmor),
        "dt": repr(cfg.dt),
        "steps": cfg.steps,
        "c_max": repr(setup.ctx.c_max),
    }
    meta.update(extra)
    return meta


def _out_dir(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.output)
    path.mkdir(parents=True, exist_ok=True)
    return path


def run_theories(setup: Setup) -> dict[Theory, EvolutionResult]:
    cfg = setup.cfg
    out = {}
    for th in cfg.theories:
        log.info("integrating %s", th.value)
        out[th] = propagate(th, setup.rho0, setup.H, cfg.rates, cfg.dt, cfg.steps, setup.ctx, cfg.system)
    return out


def run_mc(setup: Setup, threads: int) -> EnsembleResult:
    cfg = setup.cfg
    log.info("running %d trajectories", cfg.montecarlo.n_trajectories)
    return run_ensemble(cfg.ensemble_config(), setup.H, cfg.rates, cfg.system, threads=threads)


def cmd_simulate(cfg: ExperimentConfig, threads: int = 0) -> list[Path]:
    setup = prepare(cfg)
    out = _out_dir(cfg)
    t, qs, cc = setup.unitary
    files = [write_csv(out / f"{cfg.name}_unitary.csv", {"t": t, "qs": qs, "C": cc}, kind="unitary", meta=_meta(setup))]
    for th, res in run_theories(setup).items():
        files.append(write_csv(
            out / f"{cfg.name}_{th.value}.csv", res.columns(), kind="master-equation",
            meta=_meta(setup, theory=th.value, pcoh_clamped=res.pcoh_clamped),
        ))
    return files


def cmd_montecarlo(cfg: ExperimentConfig, threads: int = 0) -> list[Path]:
    setup = prepare(cfg)
    out = _out_dir(cfg)
    mc = cfg.montecarlo
    ens = run_mc(setup, threads)
    cols = ens.columns()
    cols.update(alive=ens.alive, recombined_S=ens.recombined_S, recombined_T=ens.recombined_T)
    meta = _meta(setup, n_trajectories=mc.n_trajectories, seed=mc.seed,
                 initial_state_policy=mc.initial_state_policy.value, recombination=mc.recombination,
                 batch_size=mc.batch_size, events=" ".join(f"{k}={v}" for k, v in ens.event_counts.items()))
    files = [write_csv(out / f"{cfg.name}_mc.csv", cols, kind="monte-carlo", meta=meta)]
    if mc.dump_trajectory is not None:
        rec = run_trajectory(cfg.ensemble_config(), setup.H, cfg.rates, cfg.system, mc.dump_trajectory)
        events = np.append(rec.events[: len(rec.qs)], -1) if len(rec.events) < len(rec.qs) else rec.events[: len(rec.qs)]
        rmeta = dict(meta, trajectory=mc.dump_trajectory, recombination_event=rec.recombination)
        files.append(write_csv(
            out / f"{cfg.name}_trajectory{mc.dump_trajectory}.csv",
            {"t": rec.t, "qs": rec.qs, "event": events}, kind="trajectory", meta=rmeta,
        ))
    return files


def compare_report(setup: Setup, ens: EnsembleResult, results: dict[Theory, EvolutionResult]) -> str:
    cfg = setup.cfg
    lines = [
        f"experiment {cfg.name}: k_S={cfg.rates.k_S:g} k_T={cfg.rates.k_T:g} dt={cfg.dt:g} steps={cfg.steps} "
        f"N={ens.n0} seed={cfg.montecarlo.seed}",
        f"observable: normalised <Q_S> = Tr(rho Q_S)/Tr(rho); points with < {analysis.MIN_SURVIVORS} survivors "
        "are reported but not scored",
    ]
    ref = results.get(Theory.RETRODICTIVE) or next(iter(results.values()))
    for th, res in results.items():
        agr = analysis.band_agreement(res.qs_norm, ens.qs_norm, ens.qs_norm_stderr, ens.alive)
        sd = analysis.signed_deviation_by_pcoh(res.qs_norm, ens.qs_norm, ref.pcoh, ens.alive)
        lines.append(f"{th.value:>13}: {agr.summary()}")
        lines.append(
            f"{'':>13}  signed dev near p_coh minima {sd.near_minima:+.4g}, near maxima {sd.near_maxima:+.4g}"
        )
    return "\n".join(lines) + "\n"


def cmd_compare(cfg: ExperimentConfig, threads: int = 0) -> list[Path]:
    setup = prepare(cfg)
    out = _out_dir(cfg)
    ens = run_mc(setup, threads)
    results = run_theories(setup)
    cols = {"t": ens.t, "alive": ens.alive, "mc_qs_norm": ens.qs_norm, "mc_stderr": ens.qs_norm_stderr}
    for th, res in results.items():
        cols[f"{th.value}_qs_norm"] = res.qs_norm
        cols[f"{th.value}_pcoh"] = res.pcoh
        cols[f"{th.value}_z"] = analysis.z_scores(res.qs_norm, ens.qs_norm, ens.qs_norm_stderr)
    report = compare_report(setup, ens, results)
    sys.stdout.write(report)
    rpt = out / f"{cfg.name}_compare.txt"
    rpt.write_text(report, encoding="utf-8")
    return [write_csv(out / f"{cfg.name}_compare.csv", cols, kind="comparison",
                      meta=_meta(setup, n_trajectories=ens.n0, seed=cfg.montecarlo.seed)), rpt]


def zeno_points(qt_norm: np.ndarray) -> np.ndarray:
    """Grid points inside the Zeno regime. At <Q~_T> = 0 the retrodictive and
    traditional rates coincide, so the strict ordering is only defined for <Q~_T> > 0."""
    q = np.asarray(qt_norm)
    return (q > 0) & (q < 0.5)


def rates_table(cfg: ExperimentConfig, results: dict[Theory, EvolutionResult]) -> str:
    lines = [f"coherence decay rates, k_S={cfg.rates.k_S:g} k_T={cfg.rates.k_T:g} (time averages over the grid)"]
    lines.append(f"{'theory':>13} {'Gamma_c':>10} {'kappa':>10} {'gamma_c':>10} {'min gamma_c':>12} {'max gamma_c':>12}")
    for th, r in results.items():
        lines.append(
            f"{th.value:>13} {r.Gamma_c.mean():10.5f} {r.kappa.mean():10.5f} {r.gamma_c.mean():10.5f} "
            f"{r.gamma_c.min():12.5f} {r.gamma_c.max():12.5f}"
        )
    wanted = (Theory.RETRODICTIVE, Theory.TRADITIONAL, Theory.JONES_HORE)
    if all(t in results for t in wanted):
        rt, tr, jh = (results[t] for t in wanted)
        zeno = zeno_points(rt.qt_norm)
        order = (jh.gamma_c > rt.gamma_c) & (rt.gamma_c > tr.gamma_c)
        if zeno.any():
            lines.append(
                f"ordering gamma_c(JH) > gamma_c(retro) > gamma_c(trad) holds at {order[zeno].sum()} of "
                f"{zeno.sum()} grid points with 0 < <Q~_T> < 1/2"
            )
    return "\n".join(lines) + "\n"


def cmd_rates(cfg: ExperimentConfig, threads: int = 0) -> list[Path]:
    setup = prepare(cfg)
    out = _out_dir(cfg)
    results = run_theories(setup)
    cols = {"t": next(iter(results.values())).t}
    for th, r in results.items():
        cols[f"{th.value}_qt_norm"] = r.qt_norm
        cols[f"{th.value}_Gamma_c"] = r.Gamma_c
        cols[f"{th.value}_kappa"] = r.kappa
        cols[f"{th.value}_gamma_c"] = r.gamma_c
    table = rates_table(cfg, results)
    sys.stdout.write(table)
    rpt = out / f"{cfg.name}_rates.txt"
    rpt.write_text(table, encoding="utf-8")
    return [write_csv(out / f"{cfg.name}_rates.csv", cols, kind="decay-rates", meta=_meta(setup)), rpt]


COMMANDS = {
    "simulate": cmd_simulate,
    "montecarlo": cmd_montecarlo,
    "compare": cmd_compare,
    "rates": cmd_rates,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radpair", description="Radical-pair master equations and quantum-trajectory Monte Carlo")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, help="YAML experiment file")
        src.add_argument("--preset", help=f"bundled preset ({', '.join(preset_names())})")
        sp.add_argument("--seed", type=int, help="override the Monte-Carlo seed")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--threads", type=int, default=0, help="worker threads for trajectories, 0 = auto")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_preset(args.preset) if args.preset else load_config(args.config)
        cfg = cfg.with_overrides(seed=args.seed, output=args.out)
        if args.threads < 0:
            raise ConfigError("--threads must be >= 0")
    except ConfigError as exc:
        print(f"radpair: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        files = COMMANDS[args.command](cfg, threads=args.threads)
    except OSError as exc:
        print(f"radpair: I/O error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"radpair: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    for f in files:
        print(f"wrote {f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
