"""Command-line entry point: ``flexheat <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .baseline import RuleBasedController
from .bau import project_bau
from .config import CASES, RunConfig, dump_config, load_config, with_overrides
from .ddpg import DdpgAgent
from .domain import ConfigError, InputError
from .evaluation import compare_cases, evaluate_kpis
from .env import run_episode
from .report import emit_report, write_reward_curve
from .scenario import generate_requests, generate_scenario
from .storage import load_bau, load_requests, load_scenario, save_bau, save_requests, save_scenario
from .training import train_case_agents

log = logging.getLogger("flexheat")

OUT_ENV = "FLEXHEAT_OUT"


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    return with_overrides(cfg, seed=getattr(args, "seed", None))


def _out_dir(args, cfg: RunConfig) -> Path:
    out = getattr(args, "out", None) or os.environ.get(OUT_ENV) or cfg.out_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _scenario(args, cfg: RunConfig):
    """Scenario from ``--scenario`` (plus optional ``--requests``) or the configured generator."""
    path = getattr(args, "scenario", None) or cfg.scenario.path
    if path:
        sc = load_scenario(path)
    else:
        sc = generate_scenario(cfg.scenario.days, cfg.scenario.seed)
    req_path = getattr(args, "requests", None)
    if req_path:
        reqs = load_requests(req_path)
        for r in reqs:
            if r.t_end > sc.n_steps:
                raise InputError(f"{req_path}: window [{r.t_start}, {r.t_end}) beyond scenario end {sc.n_steps}")
    else:
        reqs = generate_requests(sc.grid, np.random.default_rng(cfg.scenario.requests_seed))
    return sc.with_requests(reqs)


def _train_agents(cfg: RunConfig, episodes=None, flex_episodes=None) -> dict:
    tr = cfg.training
    log.info("training agents")
    return train_case_agents(
        generate_scenario(tr.days, tr.scenario_seed), cfg.ddpg, cfg.env_config(),
        tr.episodes if episodes is None else episodes,
        tr.flex_episodes if flex_episodes is None else flex_episodes,
        seed=cfg.seed, validation=tr.validation_scenario(), validate_every=tr.validate_every,
    )


def cmd_generate(args) -> int:
    cfg = _config(args)
    days = args.days if args.days is not None else cfg.scenario.days
    seed = args.seed if args.seed is not None else cfg.scenario.seed
    out = _out_dir(args, cfg)
    sc = generate_scenario(days, seed)
    rseed = args.requests_seed if args.requests_seed is not None else cfg.scenario.requests_seed
    reqs = generate_requests(sc.grid, np.random.default_rng(rseed))
    save_scenario(sc, out / "scenario.csv")
    save_requests(reqs, out / "requests.csv")
    print(f"wrote {out / 'scenario.csv'} ({sc.n_steps} steps) and {len(reqs)} requests")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    dump_config(cfg, out / "effective_config.json")
    results = _train_agents(cfg, args.episodes, args.flex_episodes)
    for name in ("noflex", "flex"):
        res = results[name]
        res.agent.save(out / f"checkpoint_{name}.npz")
        if res.aborted:
            print(f"warning: {name} training diverged; saved the last good checkpoint", file=sys.stderr)
    flex = results["flex"]
    write_reward_curve(flex.episode_rewards, flex.rb_rewards, out / "reward_curve.csv")
    print(f"wrote checkpoint_noflex.npz and checkpoint_flex.npz to {out}")
    return 0


def cmd_bau(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    sc = _scenario(args, cfg)
    policy = RuleBasedController(cfg.comfort) if args.checkpoint == "rb" else DdpgAgent.load(args.checkpoint).controller()
    source = "rb" if args.checkpoint == "rb" else "drl-noflex"
    profile = project_bau(sc, policy, cfg.env_config(), source, t_room0=cfg.t_room0)
    save_bau(profile, out / "bau.csv")
    print(f"wrote {out / 'bau.csv'} ({profile.energy.sum():.3f} kWh)")
    return 0


_CASE_RUN = {
    "RB": dict(show_requests=True),
    "DRL_NOFLEX": dict(show_requests=False),
    "DRL_FLEX": dict(show_requests=True),
    "DRL_FLEX_RASF": dict(show_requests=True, use_filter=True),
}


def _single_case(args, cfg: RunConfig):
    sc = _scenario(args, cfg)
    env_cfg = cfg.env_config()
    if args.case == "RB":
        ctrl = RuleBasedController(cfg.comfort)
    else:
        if not args.checkpoint:
            raise ConfigError(f"case {args.case} needs --checkpoint")
        ctrl = DdpgAgent.load(args.checkpoint).controller()
    if args.bau:
        bau = load_bau(args.bau)
    elif args.bau_checkpoint:
        bau = project_bau(sc, DdpgAgent.load(args.bau_checkpoint).controller(), env_cfg, t_room0=cfg.t_room0)
    elif args.case == "DRL_NOFLEX":
        bau = project_bau(sc, ctrl, env_cfg, t_room0=cfg.t_room0)
    elif sc.requests:
        raise ConfigError("flexibility budgets need --bau or --bau-checkpoint")
    else:
        bau = None
    traj = run_episode(sc, ctrl, env_cfg, bau, t_room0=cfg.t_room0, case=args.case, **_CASE_RUN[args.case])
    return traj, env_cfg


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    traj, env_cfg = _single_case(args, cfg)
    rep = evaluate_kpis(traj, env_cfg.band)
    emit_report({args.case: rep}, {args.case: traj}, out, env_cfg.band, plots=not args.no_plots)
    print(f"{args.case}: {rep.energy:.2f} kWh, {rep.cost:.2f} CHF, {rep.comfort_violation:.2f} Kh, "
          f"compliance {rep.flex_compliance_rate:.0%}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    traj, env_cfg = _single_case(args, cfg)
    emit_report({args.case: evaluate_kpis(traj, env_cfg.band)}, {args.case: traj}, out, env_cfg.band,
                plots=not args.no_plots)
    print(f"simulated {len(traj)} steps of {args.case}; log in {out / f'trajectory_{args.case}.csv'}")
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    dump_config(cfg, out / "effective_config.json")
    sc = _scenario(args, cfg)
    ck = {"noflex": args.noflex_checkpoint, "flex": args.flex_checkpoint}
    rewards, rb_rewards = [], []
    if not all(ck.values()):
        if any(ck.values()):
            raise ConfigError("give both --noflex-checkpoint and --flex-checkpoint, or neither to train them")
        trained = _train_agents(cfg, args.episodes, args.flex_episodes)
        for name in ("noflex", "flex"):
            ck[name] = trained[name].agent
            trained[name].agent.save(out / f"checkpoint_{name}.npz")
        rewards, rb_rewards = trained["flex"].episode_rewards, trained["flex"].rb_rewards
    cmp = compare_cases(sc, ck, cfg.env_config(), t_room0=cfg.t_room0)
    save_bau(cmp.bau, out / "bau.csv")
    reports = {c: cmp.reports[c] for c in cfg.cases}
    trajs = {c: cmp.trajectories[c] for c in cfg.cases}
    meta = {"seed": cfg.seed, "n_steps": sc.n_steps, "n_requests": len(sc.requests), "bau_source": cmp.bau.source}
    emit_report(reports, trajs, out, cfg.comfort, rewards, rb_rewards, meta, plots=not args.no_plots)
    for c, r in reports.items():
        print(f"{c:14s} {r.energy:8.2f} kWh {r.cost:7.2f} CHF {r.comfort_violation:7.2f} Kh "
              f"compliance {r.flex_compliance_rate:.0%}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexheat", description="Safe DDPG heating control with flexibility requests.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or config out_dir)")
        if scenario:
            sp.add_argument("--scenario", help="scenario CSV; generated from the config when omitted")
            sp.add_argument("--requests", help="flexibility request CSV")

    sp = sub.add_parser("generate", help="write a synthetic scenario and request list")
    common(sp, scenario=False)
    sp.add_argument("--days", type=int)
    sp.add_argument("--requests-seed", type=int)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("train", help="train DDPG agents")
    common(sp, scenario=False)
    sp.add_argument("--episodes", type=int, help="no-flexibility training episodes")
    sp.add_argument("--flex-episodes", type=int, help="flexibility fine-tuning episodes")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("bau", help="project the business-as-usual energy profile")
    common(sp)
    sp.add_argument("--checkpoint", required=True, help="no-flexibility checkpoint, or 'rb'")
    sp.set_defaults(func=cmd_bau)

    for name, func, helptext in (
        ("evaluate", cmd_evaluate, "KPIs for one case"),
        ("simulate", cmd_simulate, "single episode with the full step log"),
    ):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--case", choices=CASES, required=True)
        sp.add_argument("--checkpoint")
        sp.add_argument("--bau", help="BAU CSV")
        sp.add_argument("--bau-checkpoint", help="no-flexibility checkpoint to project the BAU from")
        sp.add_argument("--no-plots", action="store_true")
        sp.set_defaults(func=func)

    sp = sub.add_parser("compare", help="run all four cases on one scenario")
    common(sp)
    sp.add_argument("--noflex-checkpoint")
    sp.add_argument("--flex-checkpoint")
    sp.add_argument("--episodes", type=int, help="no-flexibility training episodes when training")
    sp.add_argument("--flex-episodes", type=int, help="flexibility fine-tuning episodes when training")
    sp.add_argument("--no-plots", action="store_true")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError, OSError) as exc:
        print(f"flexheat {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
