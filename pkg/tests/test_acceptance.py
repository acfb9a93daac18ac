"""Acceptance criteria 1-9, one test each, with a pass/fail line per criterion.

Heavy fixtures (the trained agent pair) are session scoped so several
criteria share one training run.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from flexheat.baseline import RuleBasedController
from flexheat.bau import project_bau
from flexheat.cli import main
from flexheat.config import RunConfig
from flexheat.ddpg.mlp import init_mlp, mlp_forward, mlp_gradient
from flexheat.domain import ComfortBand
from flexheat.env import run_episode
from flexheat.evaluation import compare_cases, comfort_kelvin_hours
from flexheat.safety import (
    FilterConfig,
    WindowLedger,
    action_bounds,
    filter_action,
    remaining_average_action,
    tolerance,
)
from flexheat.scenario import generate_requests, generate_scenario
from flexheat.storage import load_trajectory, save_trajectory
from flexheat.thermal import EnvState, ExogenousSample, ThermalParams, step_thermal
from flexheat.training import moving_mean, train, train_case_agents, train_toy

DEMO = Path(__file__).resolve().parents[1] / "configs" / "demo.json"
CFG = RunConfig()
ENV = CFG.env_config()


@pytest.fixture(scope="session")
def train_scenario():
    return generate_scenario(CFG.training.days, CFG.training.scenario_seed)


@pytest.fixture(scope="session")
def agents(train_scenario):
    tr = CFG.training
    res = train_case_agents(train_scenario, CFG.ddpg, ENV, tr.episodes, tr.flex_episodes, seed=CFG.seed,
                            validation=tr.validation_scenario(), validate_every=tr.validate_every)
    return {k: res[k].agent for k in ("noflex", "flex")}


def _month(requests_seed):
    sc = generate_scenario(CFG.scenario.days, CFG.scenario.seed)
    return sc.with_requests(generate_requests(sc.grid, np.random.default_rng(requests_seed)))


@pytest.fixture(scope="session")
def comparisons(agents):
    seeds = (CFG.scenario.requests_seed, CFG.scenario.requests_seed + 1, CFG.scenario.requests_seed + 2)
    return {s: compare_cases(_month(s), agents, ENV) for s in seeds}


# 1. filter math -----------------------------------------------------------

def test_criterion_1_filter_oracle(criterion):
    t0 = time.perf_counter()
    p, dt, cfg = ThermalParams(p_rated=2.0), 0.25, FilterConfig(w1=0.5, tau0=0.5)
    led = WindowLedger(budget=2.0, consumed=1.0, steps_remaining=8, phi=0.7)
    inc = WindowLedger(budget=2.0, consumed=1.0, steps_remaining=8, phi=1.2)
    checks = [
        # 0.5 * 0.9**1.5 and 0.5 * 0.1**1.5 by hand
        (tolerance(0.1, 0.1, 0.0, cfg), 0.426907484122731),
        (tolerance(0.9, 0.9, 0.0, cfg), 0.0158113883008419),
        (tolerance(0.5, 0.5, 1.0, cfg), 0.0),
        # (2 - 1) / (8 * 2 * 0.25)
        (remaining_average_action(led, p, dt), 0.25),
        (action_bounds(0.25, 0.4)[0], 0.15),
        (action_bounds(0.25, 0.4)[1], 0.35),
        (action_bounds(0.8, 0.5)[1], 1.0),
        (filter_action(0.9, led, (0.15, 0.35), p, dt), 0.35),
        (filter_action(0.1, led, (0.15, 0.35), p, dt), 0.1),
        (filter_action(0.1, inc, (0.15, 0.35), p, dt), 0.15),
        (filter_action(0.9, inc, (0.15, 0.35), p, dt), 0.9),
        (filter_action(0.6, None, (0.15, 0.35), p, dt), 0.6),
        # only 0.1 kWh left: cap 0.1 / (2 * 0.25)
        (filter_action(0.9, WindowLedger(2.0, 1.9, 8, 0.7), (0.0, 1.0), p, dt), 0.2),
    ]
    worst = max(abs(got - want) for got, want in checks)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 1.0
    criterion(1, ok, f"{len(checks)} hand values, max error {worst:.1e}, {elapsed:.3f} s")
    assert ok


# 2. hard guarantee ------------------------------------------------------

def _random_policy(seed):
    rng = np.random.default_rng(seed)
    return lambda obs, state=None: float(rng.uniform())


def _guarantee_windows(proposer, phi_range, n_scenarios, seed):
    out = []
    for k in range(n_scenarios):
        sc = generate_scenario(35, seed=seed + k)
        bau = project_bau(sc, RuleBasedController(ENV.band), ENV)
        sc = sc.with_requests(generate_requests(sc.grid, np.random.default_rng(seed + k), phi_range=phi_range))
        out += run_episode(sc, proposer, ENV, bau.energy, use_filter=True).windows
    return out


def test_criterion_2_hard_guarantee(criterion, agents):
    t0 = time.perf_counter()
    proposers = {
        "always-1": lambda obs, state=None: 1.0,
        "random": _random_policy(3),
        "agent": agents["flex"].controller(),
    }
    lines, ok, n_red, n_inc = [], True, 0, 0
    for name, prop in proposers.items():
        red = [w for w in _guarantee_windows(prop, (0.7, 1.0), 10, 500) if w.phi < 1.0]
        inc = [w for w in _guarantee_windows(prop, (1.0, 1.3), 10, 900) if w.phi > 1.0 and w.feasible]
        red_ok = sum(w.energy <= w.budget + 1e-9 for w in red)
        inc_ok = sum(w.energy >= w.budget - 1e-9 for w in inc)
        ok &= red_ok == len(red) and inc_ok == len(inc)
        lines.append(f"{name}: {red_ok}/{len(red)} reductions, {inc_ok}/{len(inc)} increases")
        n_red, n_inc = n_red + len(red), n_inc + len(inc)
    ok &= n_red >= 1000 and n_inc >= 1000
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60.0
    criterion(2, ok, "; ".join(lines) + f"; {elapsed:.0f} s")
    assert ok


# 3. gradients -----------------------------------------------------------

def _fd_worst(params, x, coeff, h=1e-5):
    y, cache = mlp_forward(params, x)
    grads, _ = mlp_gradient(params, cache, coeff)
    worst = 0.0
    for arr, g in zip(params.arrays(), grads):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = float(np.sum(coeff * mlp_forward(params, x)[0]))
            arr[idx] = old - h
            down = float(np.sum(coeff * mlp_forward(params, x)[0]))
            arr[idx] = old
            fd = (up - down) / (2 * h)
            # ratio <= 1 means within 1e-4 relative (1e-8 absolute floor for zeros)
            worst = max(worst, abs(fd - g[idx]) / (1e-4 * max(abs(fd), abs(g[idx])) + 1e-8))
    return worst


def test_criterion_3_gradients(criterion):
    t0 = time.perf_counter()
    shapes = [([18, 64, 64, 1], "sigmoid"), ([19, 64, 64, 1], "identity")]
    worst, n = 0.0, 0
    for sizes, out in shapes:
        for seed in range(10):
            rng = np.random.default_rng(seed)
            params = init_mlp(sizes, rng, out)
            x = rng.uniform(0, 1, (3, sizes[0]))
            # central differences are only meaningful away from ReLU kinks
            while min(np.abs(z).min() for z in mlp_forward(params, x)[1][1][:-1]) < 1e-3:
                x = rng.uniform(0, 1, (3, sizes[0]))
            coeff = rng.normal(size=(3, 1))
            worst = max(worst, _fd_worst(params, x, coeff))
            n += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.0 and elapsed < 30.0
    criterion(3, ok, f"{n} parameterizations (actor and critic shapes), worst error/tolerance {worst:.2g}, {elapsed:.1f} s")
    assert ok


# 4. toy DDPG ------------------------------------------------------------

def test_criterion_4_toy_ddpg(criterion):
    t0 = time.perf_counter()
    actions = []
    for seed in range(3):
        agent, _ = train_toy(0.7, episodes=200, seed=seed)
        actions.append(agent.act(np.array([0.5])))
    elapsed = time.perf_counter() - t0
    ok = all(abs(a - 0.7) <= 0.05 for a in actions) and elapsed < 120.0
    criterion(4, ok, f"actions {[round(a, 3) for a in actions]} vs 0.7, {elapsed:.0f} s")
    assert ok


# 5. training beats the rule-based controller ----------------------------

def _beats_rb(res):
    n = len(res.episode_rewards)
    return n >= 50 and moving_mean(res.episode_rewards)[-1] > moving_mean(res.rb_rewards)[-1]


def test_criterion_5_training_beats_rb(criterion, train_scenario):
    t0 = time.perf_counter()
    first = []
    for seed in range(3):
        res = train(train_scenario, CFG.ddpg, ENV, episodes=2000, seed=seed, flex=True, stop_when=_beats_rb)
        first.append(len(res.episode_rewards) if _beats_rb(res) else None)
    wins = sum(f is not None for f in first)
    ok = wins >= 2
    criterion(5, ok, f"episode where the 50-episode mean first beats RB per seed: {first}; "
                     f"{wins}/3 seeds, {time.perf_counter() - t0:.0f} s")
    assert ok


# 6. KPI ordering --------------------------------------------------------

def test_criterion_6_kpi_ordering(criterion, comparisons):
    main_seed = CFG.scenario.requests_seed
    r = {k: v for k, v in comparisons[main_seed].reports.items()}
    rb, nf, fl, rasf = r["RB"], r["DRL_NOFLEX"], r["DRL_FLEX"], r["DRL_FLEX_RASF"]
    drl = (nf, fl, rasf)
    a = all(d.energy <= 0.8 * rb.energy and d.cost <= 0.8 * rb.cost for d in drl)
    b = nf.comfort_violation <= rb.comfort_violation
    c = nf.comfort_violation <= rasf.comfort_violation <= 1.5 * nf.comfort_violation
    d = (all(c.reports["DRL_FLEX_RASF"].flex_compliance_rate == 1.0 for c in comparisons.values())
         and any(c.reports["DRL_FLEX"].flex_compliance_rate < 1.0 for c in comparisons.values()))
    savings = ", ".join(f"{x.case} {1 - x.energy / rb.energy:.0%} kWh {1 - x.cost / rb.cost:.0%} CHF" for x in drl)
    criterion("6a", a, f"savings vs RB: {savings}")
    criterion("6b", b, f"Kh NOFLEX {nf.comfort_violation:.2f} vs RB {rb.comfort_violation:.2f}")
    criterion("6c", c, f"Kh RASF {rasf.comfort_violation:.2f} vs NOFLEX {nf.comfort_violation:.2f}")
    rates = {s: (round(c.reports["DRL_FLEX"].flex_compliance_rate, 3),
                 c.reports["DRL_FLEX_RASF"].flex_compliance_rate) for s, c in comparisons.items()}
    criterion("6d", d, f"compliance (FLEX, RASF) per request seed: {rates}")
    assert a and b and c and d


# 7. bookkeeping ---------------------------------------------------------

def test_criterion_7_bookkeeping(criterion, comparisons, tmp_path):
    worst = 0.0
    for s, comp in comparisons.items():
        for case, traj in comp.trajectories.items():
            rep = comp.reports[case]
            back = load_trajectory(save_trajectory(traj, tmp_path / f"{s}_{case}.csv"))
            for tr in (traj, back):
                worst = max(worst, abs(tr.column("energy_kwh").sum() - rep.energy),
                            abs(tr.column("cost_chf").sum() - rep.cost))
    # 0.5 K below the band for 8 quarter-hours
    band = ComfortBand(23.5, 25.0)
    t_room = np.r_[np.full(8, 23.0), np.full(4, 24.0)]
    kh = comfort_kelvin_hours(t_room, band, 0.25)
    ok = worst <= 1e-9 and abs(kh - 1.0) <= 1e-12
    criterion(7, ok, f"max |sum - reported| {worst:.1e} over {sum(len(c.trajectories) for c in comparisons.values())} "
                     f"trajectories; constructed case {kh} Kh")
    assert ok


# 8. determinism ---------------------------------------------------------

def test_criterion_8_compare_is_deterministic(criterion, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["compare", "--config", str(DEMO), "--out", str(out), "--no-plots"]) == 0
        outs.append(out)
    cases = json.loads((outs[0] / "kpi_report.json").read_text())["cases"]
    names = ["kpi_report.json"] + [f"trajectory_{c}.csv" for c in cases]
    same = [(outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names]
    ok = all(same) and len(cases) == 4
    criterion(8, ok, f"{sum(same)}/{len(names)} files byte-identical across two compare runs")
    assert ok


# 9. thermal model -------------------------------------------------------

def test_criterion_9_thermal_model(criterion):
    p, dt = ThermalParams(), 0.25
    rng = np.random.default_rng(0)
    fixed = max(abs(step_thermal(EnvState(0, t), 0.0, ExogenousSample(t, 0.0, t, 0.2), p, dt) - t)
                for t in rng.uniform(-10, 30, 50))
    monotone, affine = True, 0.0
    slope = p.c_heat * p.efficiency * p.p_rated * dt / p.capacitance
    for _ in range(200):
        t, ta, tn, i = rng.uniform(15, 30), rng.uniform(-15, 20), rng.uniform(15, 28), rng.uniform(0, 800)
        ex = ExogenousSample(ta, i, tn, 0.2)
        us = np.sort(rng.uniform(0, 1, 5))
        ys = [step_thermal(EnvState(0, t), u, ex, p, dt) for u in us]
        monotone &= all(np.diff(ys) > 0)
        u, h = rng.uniform(0.1, 0.9), 1e-3
        fd = (step_thermal(EnvState(0, t), u + h, ex, p, dt) - step_thermal(EnvState(0, t), u - h, ex, p, dt)) / (2 * h)
        affine = max(affine, abs(fd - slope))
    ok = fixed == 0.0 and monotone and affine <= 1e-9
    criterion(9, ok, f"fixed-point drift {fixed}, monotone {monotone}, affinity error {affine:.1e}")
    assert ok
