"""Experiment registry: every runnable study, its defaults, and its outputs.

Each entry writes one directory under the output root containing
``results.csv`` (one row per condition and seed), ``summary.csv``,
``summary.json`` (with a config hash), per-run JSON records under
``runs/``, plus experiment-specific artifacts (mask files, sweep tables,
window traces).  Identical configs produce identical outputs.
"""

from __future__ import annotations

import copy
import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import games, masking, metrics
from .adversary import (BudgetedAdversary, NeuralAdversary,
                        PerturbationAdversary, TabularAdversary,
                        leduc_public_key)
from .games import GameSpec, UP
from .harness import (Defense, Regime, RunRecord, TrainingSchedule,
                      FIXED_OPPONENT, derive_seed, evaluate, pretrain,
                      run_bilevel, run_bilevel_perturb, run_defense,
                      train_fixed_mask, transfer_mask, victim_q_map)
from .masking import MaskStrategy, MaskTable, matched_random, value_heuristic_mask
from .neural import DqnAgent, NeuralNfspAgent
from .results import ExperimentWriter, condition_mean, record_row
from .tabular import QLearner, TabularNfsp, TabularPpo

DEFAULT_SEEDS = (42, 123, 456, 789, 1024)
# Ten-seed grid for the cheap Kuhn studies: the five defaults continued by
# doubling from 1024.
KUHN_SEEDS = (42, 123, 456, 789, 1024, 2048, 4096, 8192, 16384, 32768)


@dataclass
class ExperimentConfig:
    experiment: str
    seeds: tuple[int, ...]
    out_dir: Path
    overrides: dict = field(default_factory=dict)
    workers: int = 1

    def param(self, name: str, default):
        """Override-aware parameter lookup with type coercion."""
        if name not in self.overrides:
            return default
        raw = self.overrides[name]
        if isinstance(default, bool):
            return str(raw).lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return type(default)(raw) if default is not None else raw


# -- factories ----------------------------------------------------------------

def make_victim(kind: str, spec: GameSpec, seed: int):
    rng = np.random.default_rng([seed, 11])
    # Terminal-only reward with gamma 1 leaves grid Q-values flat along every
    # winning path, so greedy play cycles; a mild discount restores the
    # shortest-path gradient there.  Poker keeps the undiscounted return.
    gamma = 0.95 if spec.game in (games.GRIDWORLD, games.RESOURCE) else 1.0
    if kind == "ql":
        return QLearner(alpha=0.1, eps=0.15, gamma=gamma)
    if kind == "ppo":
        return TabularPpo(lr=0.01, clip_eps=0.2, entropy_coef=0.01)
    if kind == "nfsp":
        return TabularNfsp(eta=0.1, alpha=0.1, eps=0.15, gamma=gamma)
    big = spec.game == games.LEDUC and spec.rank_count >= 10
    if kind == "dqn":
        return DqnAgent(
            spec.feature_dim, spec.n_actions,
            hidden=(128, 64) if big else (64, 64),
            buffer_capacity=50_000 if big else 20_000,
            batch=128 if big else 64,
            sync_every=1000 if big else 500,
            rng=rng)
    if kind == "nnfsp":
        return NeuralNfspAgent(spec.feature_dim, spec.n_actions, eta=0.1,
                               br_hidden=(128, 64), avg_hidden=(128, 64), rng=rng)
    raise ValueError(f"unknown victim {kind!r}")


def make_adversary(kind: str, spec: GameSpec, seed: int):
    rng = np.random.default_rng([seed, 13])
    if kind == "tabular":
        return TabularAdversary(lr=0.01)
    if kind == "tabular-public":
        if spec.game != games.LEDUC:
            raise ValueError("public-information adversary is defined for poker keys")
        return TabularAdversary(lr=0.01, key_fn=leduc_public_key)
    if kind == "neural":
        big = spec.game == games.LEDUC and spec.rank_count >= 10
        return NeuralAdversary(spec.feature_dim, spec.n_actions,
                               hidden=(128, 64) if big else (32,), rng=rng)
    raise ValueError(f"unknown adversary {kind!r}")


def default_schedule(spec: GameSpec, victim: str) -> TrainingSchedule:
    if spec.game == games.KUHN:
        return TrainingSchedule(pretrain_episodes=10_000, outer_iterations=20)
    if spec.game == games.LEDUC:
        if victim in ("dqn", "nnfsp"):
            if spec.rank_count >= 20:
                return TrainingSchedule(pretrain_episodes=30_000, outer_iterations=25)
            if victim == "nnfsp" or spec.rank_count >= 5:
                return TrainingSchedule(pretrain_episodes=20_000, outer_iterations=25)
            return TrainingSchedule(pretrain_episodes=20_000, outer_iterations=20)
        if spec.rank_count >= 5:
            return TrainingSchedule(pretrain_episodes=15_000, outer_iterations=25)
        return TrainingSchedule(pretrain_episodes=15_000, outer_iterations=30)
    return TrainingSchedule(pretrain_episodes=40_000, outer_iterations=40)


def enumerated_legal(spec: GameSpec) -> dict[str, tuple[int, ...]]:
    """Legal-action map over the exhaustively enumerable victim states."""
    return {key: games.legal_for_key(spec, key)
            for key in games.enumerate_info_states(spec)}


def random_poker_mask(spec: GameSpec, k: int, rng) -> MaskTable:
    """Persistent random mask of support k over the enumerable state universe."""
    if k == 0:
        return MaskTable(budget=0)
    universe = enumerated_legal(spec)
    reference = MaskTable(removed=dict.fromkeys(sorted(universe)[:k], 0))
    return matched_random(reference, universe, rng)


# -- shared per-seed jobs (top level so worker pools can pickle them) ---------

def job_baseline(spec, victim, episodes, eval_episodes, seed) -> RunRecord:
    agent = make_victim(victim, spec, seed)
    windows = pretrain(agent, spec, episodes, derive_seed(seed, 1))
    report = evaluate(agent, None, spec, eval_episodes, derive_seed(seed, 3))
    return RunRecord(
        seed=seed, game=spec.game, condition=f"{victim}-none",
        eval_mean=report.mean, eval_ci95=report.ci95, eval_episodes=eval_episodes,
        windows={"pretrain": windows},
        diagnostics=masking.diagnostics(None, report.visit_log).as_dict(),
    )


def job_strategy(spec, victim, strategy_kind, p, action, schedule, seed,
                 label) -> RunRecord:
    """Pretrain, then train and evaluate under a non-learned mask strategy."""
    if strategy_kind == "random":
        strategy = MaskStrategy.random(p)
    elif strategy_kind == "fixed":
        strategy = MaskStrategy.fixed(action)
    else:
        raise ValueError(strategy_kind)
    agent = make_victim(victim, spec, seed)
    pre = pretrain(agent, spec, schedule.pretrain_episodes, derive_seed(seed, 1))
    attack_eps = schedule.outer_iterations * schedule.inner_episodes
    post = train_fixed_mask(agent, strategy, spec, attack_eps, derive_seed(seed, 2))
    report = evaluate(agent, strategy, spec, schedule.eval_episodes,
                      derive_seed(seed, 3))
    return RunRecord(
        seed=seed, game=spec.game, condition=label,
        eval_mean=report.mean, eval_ci95=report.ci95,
        eval_episodes=schedule.eval_episodes,
        windows={"pretrain": pre, "attack": post},
        diagnostics=masking.diagnostics(None, report.visit_log).as_dict(),
    )


def job_bilevel(spec, victim, adversary_kind, schedule, seed, label,
                regime_kind=None, eval_budget=None, defense_kind=None,
                defense_p=0.2, defense_n=5, extension=0) -> RunRecord:
    agent = make_victim(victim, spec, seed)
    adversary = make_adversary(adversary_kind, spec, seed)
    if extension:
        schedule = dataclasses.replace(schedule, extension_episodes=extension)
    if defense_kind:
        defense = Defense(defense_kind, p=defense_p, n=defense_n)
        record = run_defense(defense, agent, adversary, spec, schedule, seed,
                             condition=label)
        return record
    pre = pretrain(agent, spec, schedule.pretrain_episodes, derive_seed(seed, 1))
    regime = Regime(regime_kind) if regime_kind else Regime()
    record = run_bilevel(agent, adversary, spec, schedule, derive_seed(seed, 2),
                         regime=regime, eval_budget=eval_budget, condition=label)
    record.seed = seed
    record.windows["pretrain"] = pre
    return record


def job_perturb(spec, victim, schedule, seed, label) -> RunRecord:
    agent = make_victim(victim, spec, seed)
    perturber = PerturbationAdversary(lr=0.01)
    pre = pretrain(agent, spec, schedule.pretrain_episodes, derive_seed(seed, 1))
    record = run_bilevel_perturb(agent, perturber, spec, schedule,
                                 derive_seed(seed, 2), condition=label)
    record.seed = seed
    record.windows["pretrain"] = pre
    return record


def _pmap(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*args) for args in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _masked_eval_record(agent, mask, spec, eval_episodes, seed, condition,
                        windows=None) -> RunRecord:
    """Evaluate a frozen agent under a fixed mask, with capacity metrics."""
    report = evaluate(agent, mask, spec, eval_episodes, derive_seed(seed, 3))
    q_map = victim_q_map(agent, report.legal_by_key, report.features_by_key)
    reach = metrics.ReachMap(
        rho={k: c / eval_episodes for k, c in report.visits.items()},
        episodes=eval_episodes)
    table = mask if isinstance(mask, MaskTable) else MaskTable()
    gaps = metrics.gaps_for_mask(q_map, report.legal_by_key, table)
    return RunRecord(
        seed=seed, game=spec.game, condition=condition,
        eval_mean=report.mean, eval_ci95=report.ci95, eval_episodes=eval_episodes,
        windows=windows or {},
        diagnostics=masking.diagnostics(None, report.visit_log).as_dict(),
        cac_w=metrics.cac_w(table, reach, report.legal_by_key),
        cac_v=metrics.cac_v(table, reach, gaps, report.legal_by_key),
        mask_support=len(table.removed),
    )


# -- simple condition-grid experiments -----------------------------------------

def _tabular_grid(cfg: ExperimentConfig, spec: GameSpec, victims) -> dict:
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    bounds = spec.reward_bounds
    for victim in victims:
        schedule = default_schedule(spec, victim)
        total = schedule.pretrain_episodes + \
            schedule.outer_iterations * schedule.inner_episodes
        for seed in cfg.seeds:
            writer.add(f"{victim}-none",
                       job_baseline(spec, victim, total, schedule.eval_episodes, seed),
                       bounds)
        for seed in cfg.seeds:
            writer.add(f"{victim}-adversarial",
                       job_bilevel(spec, victim, "tabular", schedule, seed,
                                   f"{victim}-adversarial"),
                       bounds)
    return writer.finish(bounds)


def exp_kuhn_tabular(cfg: ExperimentConfig) -> dict:
    return _tabular_grid(cfg, GameSpec.kuhn(), ("ql", "ppo", "nfsp"))


def exp_leduc_tabular(cfg: ExperimentConfig) -> dict:
    return _tabular_grid(cfg, GameSpec.leduc(3), ("ql", "ppo", "nfsp"))


def _cross_domain(cfg: ExperimentConfig, spec: GameSpec) -> dict:
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    bounds = spec.reward_bounds
    victim = "ql"
    schedule = default_schedule(spec, victim)
    total = schedule.pretrain_episodes + \
        schedule.outer_iterations * schedule.inner_episodes
    random_p = cfg.param("random_p", 0.3)
    for seed in cfg.seeds:
        writer.add("none", job_baseline(spec, victim, total,
                                        schedule.eval_episodes, seed), bounds)
    for seed in cfg.seeds:
        writer.add(f"random-{random_p}",
                   job_strategy(spec, victim, "random", random_p, None, schedule,
                                seed, f"random-{random_p}"), bounds)
    for seed in cfg.seeds:
        writer.add("fixed-up",
                   job_strategy(spec, victim, "fixed", 0.0, UP, schedule, seed,
                                "fixed-up"), bounds)
    for seed in cfg.seeds:
        writer.add("adversarial",
                   job_bilevel(spec, victim, "tabular", schedule, seed,
                               "adversarial"), bounds)
    return writer.finish(bounds)


def exp_gridworld(cfg: ExperimentConfig) -> dict:
    return _cross_domain(cfg, GameSpec.gridworld())


def exp_resource(cfg: ExperimentConfig) -> dict:
    return _cross_domain(cfg, GameSpec.resource())


# -- scaling and neural experiments --------------------------------------------

def exp_dqn_scale(cfg: ExperimentConfig) -> dict:
    sizes = cfg.overrides.get("sizes", "3,5,10,20")
    rank_counts = [int(s) for s in str(sizes).split(",")]
    random_p = cfg.param("random_p", 0.3)
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    scaling_rows = []
    all_bounds = None
    for n in rank_counts:
        spec = GameSpec.leduc(n)
        bounds = spec.reward_bounds
        all_bounds = bounds
        schedule = default_schedule(spec, "dqn")
        total = schedule.pretrain_episodes + \
            schedule.outer_iterations * schedule.inner_episodes
        tag = f"leduc{n}"
        base = _pmap(job_baseline,
                     [(spec, "dqn", total, schedule.eval_episodes, s) for s in cfg.seeds],
                     cfg.workers)
        rand = _pmap(job_strategy,
                     [(spec, "dqn", "random", random_p, None, schedule, s,
                       f"{tag}-random") for s in cfg.seeds], cfg.workers)
        adv = _pmap(job_bilevel,
                    [(spec, "dqn", "neural", schedule, s, f"{tag}-adversarial")
                     for s in cfg.seeds], cfg.workers)
        for record in base:
            record.condition = f"{tag}-none"
            writer.add(f"{tag}-none", record, bounds)
        for record in rand:
            writer.add(f"{tag}-random", record, bounds)
        for record in adv:
            writer.add(f"{tag}-adversarial", record, bounds)
        none_mean = float(np.mean([r.eval_mean for r in base]))
        rand_mean = float(np.mean([r.eval_mean for r in rand]))
        adv_mean = float(np.mean([r.eval_mean for r in adv]))
        adv_ci = metrics.mean_ci([r.eval_mean for r in adv])[1] \
            if len(adv) > 1 else float("nan")
        states = len(games.enumerate_info_states(spec))
        ratio = adv_mean / rand_mean if rand_mean < 0 else float("nan")
        damage_ratio = (none_mean - adv_mean) / (none_mean - rand_mean) \
            if none_mean > rand_mean else float("nan")
        scaling_rows.append({
            "game": tag, "states": states, "none": none_mean,
            "random": rand_mean, "adversarial": adv_mean,
            "adversarial_ci95": adv_ci, "ratio": ratio,
            "damage_ratio": damage_ratio,
        })
    from .results import write_rows
    write_rows(cfg.out_dir / "scaling.csv", scaling_rows,
               ["game", "states", "none", "random", "adversarial",
                "adversarial_ci95", "ratio", "damage_ratio"])
    usable = [r for r in scaling_rows if np.isfinite(r["ratio"])]
    if len(usable) >= 2:
        slope, intercept, r2 = metrics.log_linear_fit(
            [r["states"] for r in usable], [r["ratio"] for r in usable])
        writer.extras["scaling_fit"] = {"slope": slope, "intercept": intercept,
                                        "r_squared": r2}
    writer.extras["scaling"] = scaling_rows
    return writer.finish(all_bounds)


def exp_neural_nfsp(cfg: ExperimentConfig) -> dict:
    spec = GameSpec.leduc(5)
    bounds = spec.reward_bounds
    schedule = default_schedule(spec, "nnfsp")
    random_p = cfg.param("random_p", 0.3)
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    base = _pmap(job_baseline,
                 [(spec, "nnfsp", schedule.pretrain_episodes,
                   schedule.eval_episodes, s) for s in cfg.seeds], cfg.workers)
    rand = _pmap(job_strategy,
                 [(spec, "nnfsp", "random", random_p, None, schedule, s, "random")
                  for s in cfg.seeds], cfg.workers)
    adv = _pmap(job_bilevel,
                [(spec, "nnfsp", "neural", schedule, s, "adversarial")
                 for s in cfg.seeds], cfg.workers)
    for record in base:
        record.condition = "pre-attack"
        writer.add("pre-attack", record, bounds)
    for record in rand:
        writer.add("random", record, bounds)
    for record in adv:
        writer.add("adversarial", record, bounds)
    return writer.finish(bounds)


# -- budget sweep, capacity correlation, oracle --------------------------------

def _sweep_seed_records(spec, schedule, budgets, seed) -> list[tuple[int, RunRecord]]:
    """(k, record) for every sweep condition of one seed.

    Adversarial rows are full budget-constrained attacks: the adversary
    trains over all states but removals only apply at its current top-k
    projection, both in the loop and at the final evaluation.  Random rows
    follow the general masking protocol (mask active during both training
    and evaluation) with a support-k mask drawn over the enumerable states.
    """
    attack_eps = schedule.outer_iterations * schedule.inner_episodes
    out = []
    rng = np.random.default_rng([seed, 17])
    for k in budgets:
        victim = make_victim("ql", spec, seed)
        pretrain(victim, spec, schedule.pretrain_episodes, derive_seed(seed, 1))
        adversary = BudgetedAdversary(make_adversary("tabular", spec, seed), k)
        record = run_bilevel(victim, adversary, spec, schedule,
                             derive_seed(seed, 100 + k),
                             eval_budget=k, condition=f"adversarial-k{k}",
                             trace=False)
        record.seed = seed
        out.append((k, record))

        rand_mask = random_poker_mask(spec, k, rng)
        victim = make_victim("ql", spec, seed)
        pretrain(victim, spec, schedule.pretrain_episodes, derive_seed(seed, 1))
        train_fixed_mask(victim, rand_mask, spec, attack_eps,
                         derive_seed(seed, 300 + k))
        record = _masked_eval_record(victim, rand_mask, spec,
                                     schedule.eval_episodes,
                                     derive_seed(seed, 400 + k), f"random-k{k}")
        record.seed = seed
        out.append((k, record))
    return out


def _run_budget_sweep(cfg: ExperimentConfig, writer: ExperimentWriter) -> list[dict]:
    spec = GameSpec.kuhn()
    # Budgeted single-state attacks need the long end of the tabular band.
    schedule = TrainingSchedule(pretrain_episodes=10_000, outer_iterations=30)
    budgets = [int(b) for b in str(cfg.overrides.get("budgets", "0,1,2,3,4,5,6")).split(",")]
    chunks = _pmap(_sweep_seed_records,
                   [(spec, schedule, budgets, s) for s in cfg.seeds],
                   cfg.workers)
    bounds = spec.reward_bounds
    rows = []
    for chunk in chunks:
        for k, record in chunk:
            record.save(writer.out_dir / "runs" /
                        f"{record.condition}-{record.seed}.json")
            rows.append(record_row(record.condition, record, bounds) | {"k": k})
    return rows


def exp_budget_sweep(cfg: ExperimentConfig) -> dict:
    from .results import RESULT_COLUMNS, write_rows
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    rows = _run_budget_sweep(cfg, writer)
    writer.rows = rows
    write_rows(cfg.out_dir / "sweep.csv", rows, RESULT_COLUMNS + ["k"])
    return writer.finish(GameSpec.kuhn().reward_bounds)


def exp_cac_correlation(cfg: ExperimentConfig) -> dict:
    from .results import RESULT_COLUMNS, write_rows
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    rows = _run_budget_sweep(cfg, writer)
    spec = GameSpec.kuhn()
    writer.rows = rows
    write_rows(cfg.out_dir / "sweep.csv", rows, RESULT_COLUMNS + ["k"])
    # Correlations are taken across the sweep's conditions (per-condition
    # means over seeds); per-run values are reported alongside.
    conds: dict[str, list] = {}
    for r in rows:
        conds.setdefault(r["condition"], []).append(
            (float(r["cac_w"]), float(r["cac_v"]), float(r["raw_mean"])))
    cond_w, cond_v, cond_r = [], [], []
    for cond in sorted(conds):
        arr = np.array(conds[cond])
        cond_w.append(arr[:, 0].mean())
        cond_v.append(arr[:, 1].mean())
        cond_r.append(arr[:, 2].mean())
    r_w, p_w, _ = metrics.pearson(cond_w, cond_r)
    r_v, p_v, _ = metrics.pearson(cond_v, cond_r)
    adv_idx = [i for i, cond in enumerate(sorted(conds))
               if cond.startswith("adversarial")]
    r_w_adv, _, _ = metrics.pearson([cond_w[i] for i in adv_idx],
                                    [cond_r[i] for i in adv_idx])
    run_r_w, _, _ = metrics.pearson([float(r["cac_w"]) for r in rows],
                                    [float(r["raw_mean"]) for r in rows])
    writer.extras["correlation"] = {
        "pearson_cac_w": r_w, "p_cac_w": p_w,
        "pearson_cac_v": r_v, "p_cac_v": p_v,
        "pearson_cac_w_adversarial_only": r_w_adv,
        "pearson_cac_w_per_run": run_r_w,
        "n_conditions": len(cond_r), "n_runs": len(rows),
    }
    return writer.finish(spec.reward_bounds)


def _oracle_seed_records(spec, schedule, k, seed) -> list[RunRecord]:
    """Which states matter: masks from three selectors on one frozen victim.

    Every k-state mask (uniform random, a short-budget learned adversary's
    projection, and the greedy reach-times-gap pick) is evaluated on the
    same fully trained victim without further training, isolating the
    selector from co-adaptation effects.
    """
    total = schedule.pretrain_episodes + \
        schedule.outer_iterations * schedule.inner_episodes
    base = make_victim("ql", spec, seed)
    pretrain(base, spec, total, derive_seed(seed, 1))
    base_report = evaluate(base, None, spec, schedule.eval_episodes,
                           derive_seed(seed, 2))
    records = []

    none = _masked_eval_record(base, MaskTable(), spec, schedule.eval_episodes,
                               derive_seed(seed, 2), "none")
    none.seed = seed
    records.append(none)

    rng = np.random.default_rng([seed, 19])
    rand_mask = random_poker_mask(spec, k, rng)
    rec = _masked_eval_record(base, rand_mask, spec, schedule.eval_episodes,
                              derive_seed(seed, 32), f"random-k{k}")
    rec.seed = seed
    records.append(rec)

    short = TrainingSchedule(pretrain_episodes=0, outer_iterations=10,
                             inner_episodes=schedule.inner_episodes,
                             eval_episodes=schedule.eval_episodes)
    adv_agent = make_victim("ql", spec, seed)
    pretrain(adv_agent, spec, schedule.pretrain_episodes, derive_seed(seed, 1))
    adversary = make_adversary("tabular", spec, seed)
    run_bilevel(adv_agent, adversary, spec, short, derive_seed(seed, 41),
                condition="oracle-train", trace=False)
    learned_mask = adversary.project_top_k(k)
    rec = _masked_eval_record(base, learned_mask, spec, schedule.eval_episodes,
                              derive_seed(seed, 43), f"learned-k{k}")
    rec.seed = seed
    records.append(rec)

    q_map = victim_q_map(base, base_report.legal_by_key)
    reach = metrics.ReachMap(
        rho={key: c / schedule.eval_episodes for key, c in base_report.visits.items()},
        episodes=schedule.eval_episodes)
    gaps = metrics.gaps_oracle(q_map, base_report.legal_by_key)
    oracle_mask = metrics.cacv_greedy(k, reach, gaps, q_map,
                                      base_report.legal_by_key)
    rec = _masked_eval_record(base, oracle_mask, spec, schedule.eval_episodes,
                              derive_seed(seed, 52), f"cacv-greedy-k{k}")
    rec.seed = seed
    records.append(rec)
    return records


def exp_cacv_oracle(cfg: ExperimentConfig) -> dict:
    spec = GameSpec.kuhn()
    schedule = default_schedule(spec, "ql")
    k = cfg.param("k", 3)
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides,
                               "k": k})
    bounds = spec.reward_bounds
    chunks = _pmap(_oracle_seed_records,
                   [(spec, schedule, k, s) for s in cfg.seeds], cfg.workers)
    for records in chunks:
        for record in records:
            writer.add(record.condition, record, bounds)
    return writer.finish(bounds)


# -- attack-channel and control experiments ------------------------------------

def exp_rarl_compare(cfg: ExperimentConfig) -> dict:
    spec = GameSpec.kuhn()
    schedule = default_schedule(spec, "ql")
    total = schedule.pretrain_episodes + \
        schedule.outer_iterations * schedule.inner_episodes
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    bounds = spec.reward_bounds
    for seed in cfg.seeds:
        record = job_baseline(spec, "ql", total, schedule.eval_episodes, seed)
        record.condition = "none"
        writer.add("none", record, bounds)
    for seed in cfg.seeds:
        writer.add("learned-perturbation",
                   job_perturb(spec, "ql", schedule, seed, "learned-perturbation"),
                   bounds)
    for seed in cfg.seeds:
        writer.add("learned-removal",
                   job_bilevel(spec, "ql", "tabular", schedule, seed,
                               "learned-removal"), bounds)
    return writer.finish(bounds)


def _matched_seed_records(spec, schedule, seed) -> list[RunRecord]:
    base = make_victim("ql", spec, seed)
    pretrain(base, spec, schedule.pretrain_episodes, derive_seed(seed, 1))
    records = []
    none = _masked_eval_record(base, MaskTable(), spec, schedule.eval_episodes,
                               derive_seed(seed, 2), "none")
    none.seed = seed
    records.append(none)

    adv_agent = copy.deepcopy(base)
    adversary = make_adversary("tabular", spec, seed)
    adv_record = run_bilevel(adv_agent, adversary, spec, schedule,
                             derive_seed(seed, 4), condition="adversarial")
    adv_record.seed = seed
    records.append(adv_record)

    support = adv_record.diagnostics["masked_states"]
    rng = np.random.default_rng([seed, 23])
    matched = random_poker_mask(spec, support, rng)
    victim = copy.deepcopy(base)
    attack_eps = schedule.outer_iterations * schedule.inner_episodes
    windows = train_fixed_mask(victim, matched, spec, attack_eps,
                               derive_seed(seed, 5))
    rec = _masked_eval_record(victim, matched, spec, schedule.eval_episodes,
                              derive_seed(seed, 6), "matched-random",
                              windows={"attack": windows})
    rec.seed = seed
    records.append(rec)
    return records


def exp_matched_l0(cfg: ExperimentConfig) -> dict:
    spec = GameSpec.leduc(3)
    schedule = default_schedule(spec, "ql")
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    bounds = spec.reward_bounds
    chunks = _pmap(_matched_seed_records,
                   [(spec, schedule, s) for s in cfg.seeds], cfg.workers)
    for records in chunks:
        for record in records:
            writer.add(record.condition, record, bounds)
    summary = writer.finish(bounds)
    adv = condition_mean(summary["summary"], "adversarial")
    match = condition_mean(summary["summary"], "matched-random")
    base = condition_mean(summary["summary"], "none")
    summary["damage_ratio"] = (base - adv) / (base - match) \
        if base > match else float("nan")
    return summary


def exp_transfer(cfg: ExperimentConfig) -> dict:
    spec = GameSpec.kuhn()
    schedule = default_schedule(spec, "ql")
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    bounds = spec.reward_bounds
    source_seed = cfg.param("source_seed", 42)

    agent = make_victim("ql", spec, source_seed)
    adversary = make_adversary("tabular", spec, source_seed)
    pretrain(agent, spec, schedule.pretrain_episodes, derive_seed(source_seed, 1))
    run_bilevel(agent, adversary, spec, schedule, derive_seed(source_seed, 2),
                condition="transfer-train", trace=False)
    mask = adversary.project_top_k(len(adversary.known_keys()))
    mask_path = cfg.out_dir / "transferred-mask.txt"
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    mask.save(mask_path)

    fresh = [s for s in cfg.seeds if s != source_seed]
    attack_eps = schedule.outer_iterations * schedule.inner_episodes
    for record in transfer_mask(MaskTable.load(mask_path), spec,
                                lambda s: make_victim("ql", spec, s), fresh,
                                pretrain_episodes=schedule.pretrain_episodes,
                                train_episodes=attack_eps,
                                eval_episodes=schedule.eval_episodes,
                                condition="transferred"):
        writer.add("transferred", record, bounds)
    for seed in fresh:
        writer.add("retrained-per-agent",
                   job_bilevel(spec, "ql", "tabular", schedule, seed,
                               "retrained-per-agent"), bounds)
    nfsp_total = schedule.pretrain_episodes + attack_eps
    for seed in fresh:
        record = job_baseline(spec, "nfsp", nfsp_total, schedule.eval_episodes,
                              seed)
        record.condition = "nfsp-none"
        writer.add("nfsp-none", record, bounds)
    for record in transfer_mask(MaskTable.load(mask_path), spec,
                                lambda s: make_victim("nfsp", spec, s), fresh,
                                pretrain_episodes=schedule.pretrain_episodes,
                                train_episodes=attack_eps,
                                eval_episodes=schedule.eval_episodes,
                                condition="nfsp-transferred"):
        writer.add("nfsp-transferred", record, bounds)
    summary = writer.finish(bounds)
    summary["nfsp_transfer_delta"] = (
        condition_mean(summary["summary"], "nfsp-transferred")
        - condition_mean(summary["summary"], "nfsp-none"))
    return summary


def exp_selfplay_vs_fixed(cfg: ExperimentConfig) -> dict:
    spec = GameSpec.kuhn()
    schedule = default_schedule(spec, "ql")
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    bounds = spec.reward_bounds
    for seed in cfg.seeds:
        writer.add("co-adaptive",
                   job_bilevel(spec, "ql", "tabular", schedule, seed,
                               "co-adaptive"), bounds)
    for seed in cfg.seeds:
        writer.add("fixed-opponent",
                   job_bilevel(spec, "ql", "tabular", schedule, seed,
                               "fixed-opponent", regime_kind=FIXED_OPPONENT),
                   bounds)
    return writer.finish(bounds)


def _timing_seed_records(spec, schedule, seed) -> list[RunRecord]:
    base = make_victim("ql", spec, seed)
    pretrain(base, spec, schedule.pretrain_episodes, derive_seed(seed, 1))
    records = []
    none = _masked_eval_record(base, MaskTable(), spec, schedule.eval_episodes,
                               derive_seed(seed, 2), "no-mask")
    none.seed = seed
    records.append(none)

    adv_agent = copy.deepcopy(base)
    adversary = make_adversary("tabular", spec, seed)
    adv_record = run_bilevel(adv_agent, adversary, spec, schedule,
                             derive_seed(seed, 3),
                             condition="continued-training", trace=False)
    adv_record.seed = seed
    records.append(adv_record)
    mask = adversary.project_top_k(len(adversary.known_keys()))

    eval_only = _masked_eval_record(base, mask, spec, schedule.eval_episodes,
                                    derive_seed(seed, 4), "eval-only")
    eval_only.seed = seed
    records.append(eval_only)

    fresh = make_victim("ql", spec, seed + 1)
    total = schedule.pretrain_episodes + \
        schedule.outer_iterations * schedule.inner_episodes
    windows = train_fixed_mask(fresh, mask, spec, total, derive_seed(seed, 5))
    rec = _masked_eval_record(fresh, mask, spec, schedule.eval_episodes,
                              derive_seed(seed, 6), "retrain-from-scratch",
                              windows={"attack": windows})
    rec.seed = seed
    records.append(rec)
    return records


def exp_mask_timing(cfg: ExperimentConfig) -> dict:
    spec = GameSpec.leduc(3)
    schedule = default_schedule(spec, "ql")
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    bounds = spec.reward_bounds
    chunks = _pmap(_timing_seed_records,
                   [(spec, schedule, s) for s in cfg.seeds], cfg.workers)
    for records in chunks:
        for record in records:
            writer.add(record.condition, record, bounds)
    return writer.finish(bounds)


def exp_threat_model(cfg: ExperimentConfig) -> dict:
    spec = GameSpec.leduc(3)
    schedule = default_schedule(spec, "ql")
    total = schedule.pretrain_episodes + \
        schedule.outer_iterations * schedule.inner_episodes
    random_p = cfg.param("random_p", 0.3)
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    bounds = spec.reward_bounds
    for seed in cfg.seeds:
        record = job_baseline(spec, "ql", total, schedule.eval_episodes, seed)
        record.condition = "none"
        writer.add("none", record, bounds)
    for seed in cfg.seeds:
        writer.add(f"random-{random_p}",
                   job_strategy(spec, "ql", "random", random_p, None, schedule,
                                seed, f"random-{random_p}"), bounds)
    for seed in cfg.seeds:
        writer.add("public-info",
                   job_bilevel(spec, "ql", "tabular-public", schedule, seed,
                               "public-info"), bounds)
    for seed in cfg.seeds:
        writer.add("private-info",
                   job_bilevel(spec, "ql", "tabular", schedule, seed,
                               "private-info"), bounds)
    return writer.finish(bounds)


def exp_defenses(cfg: ExperimentConfig) -> dict:
    spec = GameSpec.leduc(3)
    schedule = default_schedule(spec, "dqn")
    dropout_p = cfg.param("dropout_p", 0.2)
    ensemble_n = cfg.param("ensemble_n", 5)
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    bounds = spec.reward_bounds
    jobs = []
    for label, kind in (("standard", None), ("dropout", "dropout"),
                        ("mask-ensemble", "ensemble")):
        for seed in cfg.seeds:
            jobs.append((spec, "dqn", "neural", schedule, seed, label, None,
                         None, kind, dropout_p, ensemble_n, 0))
    records = _pmap(job_bilevel, jobs, cfg.workers)
    for record in records:
        writer.add(record.condition, record, bounds)
    return writer.finish(bounds)


def _curve_run(spec, victim, schedule, seed, label, extension=0) -> RunRecord:
    return job_bilevel(spec, victim, "tabular", schedule, seed, label,
                       extension=extension)


def no_recovery_stats(extension_windows: list[float]) -> dict:
    """Mid-training mean (middle half) vs final-quarter mean of the windows."""
    n = len(extension_windows)
    if n < 8:
        raise ValueError("need at least 8 windows")
    mid = extension_windows[n // 4: 3 * n // 4]
    last = extension_windows[3 * n // 4:]
    mid_mean, mid_ci, _ = metrics.mean_ci(mid)
    last_mean = float(np.mean(last))
    return {
        "mid_mean": mid_mean,
        "mid_ci95": mid_ci,
        "last_quarter_mean": last_mean,
        "no_recovery": last_mean <= mid_mean + mid_ci,
    }


def exp_learning_curves(cfg: ExperimentConfig) -> dict:
    from .results import write_rows
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    curve_seed = cfg.param("curve_seed", 42)
    window_rows = []

    for label, spec, victim in (("kuhn-ql", GameSpec.kuhn(), "ql"),
                                ("leduc-ql", GameSpec.leduc(3), "ql"),
                                ("leduc-nfsp", GameSpec.leduc(3), "nfsp")):
        schedule = default_schedule(spec, victim)
        record = _curve_run(spec, victim, schedule, curve_seed, label)
        writer.add(label, record, spec.reward_bounds)
        for phase, series in record.windows.items():
            for i, value in enumerate(series):
                window_rows.append({"run": label, "seed": curve_seed,
                                    "phase": phase, "window": i, "mean": value})

    spec5 = GameSpec.leduc(5)
    schedule5 = default_schedule(spec5, "ql")
    extension = cfg.param(
        "extension_episodes",
        3 * schedule5.outer_iterations * schedule5.inner_episodes)
    checks = []
    for seed in cfg.seeds:
        record = _curve_run(spec5, "ql", schedule5, seed, "leduc5-extended",
                            extension=extension)
        writer.add("leduc5-extended", record, spec5.reward_bounds)
        for phase, series in record.windows.items():
            for i, value in enumerate(series):
                window_rows.append({"run": "leduc5-extended", "seed": seed,
                                    "phase": phase, "window": i, "mean": value})
        checks.append(no_recovery_stats(record.windows["extension"]))
    write_rows(cfg.out_dir / "windows.csv", window_rows,
               ["run", "seed", "phase", "window", "mean"])
    writer.extras["no_recovery"] = checks
    return writer.finish(GameSpec.leduc(5).reward_bounds)


def exp_dea(cfg: ExperimentConfig) -> dict:
    import json as _json
    spec = GameSpec.kuhn()
    seed = cfg.seeds[0]
    writer = ExperimentWriter(cfg.out_dir, cfg.experiment,
                              {"seeds": cfg.seeds, "overrides": cfg.overrides})
    agent = make_victim("ql", spec, seed)
    pretrain(agent, spec, 20_000, derive_seed(seed, 1))
    legal_by_key = enumerated_legal(spec)
    mask = value_heuristic_mask(agent, k=len(legal_by_key), legal_by_key=legal_by_key)
    report = metrics.dea_check(agent, mask, spec, cfg.param("episodes", 10_000),
                               derive_seed(seed, 2))
    record = _masked_eval_record(agent, mask, spec, 2000, derive_seed(seed, 3),
                                 "all-singleton")
    record.seed = seed
    record.metadata["dea"] = {k: v for k, v in report.items() if k != "windows"}
    writer.add("all-singleton", record, spec.reward_bounds)
    (cfg.out_dir / "dea.json").write_text(
        _json.dumps(report, indent=1, default=float) + "\n")
    summary = writer.finish(spec.reward_bounds)
    summary["dea"] = {k: v for k, v in report.items() if k != "windows"}
    return summary


# -- registry -------------------------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    fn: object
    description: str
    default_seeds: tuple[int, ...] = DEFAULT_SEEDS


EXPERIMENTS: dict[str, Experiment] = {
    "kuhn-tabular": Experiment(
        exp_kuhn_tabular,
        "Kuhn: QL/PPO/NFSP with and without the learned removal attack",
        KUHN_SEEDS),
    "leduc-tabular": Experiment(
        exp_leduc_tabular,
        "Leduc: QL/PPO/NFSP with and without the learned removal attack"),
    "dqn-scale": Experiment(
        exp_dqn_scale,
        "DQN victims across Leduc deck sizes: none/random/neural adversary "
        "plus the damage-ratio scaling fit"),
    "neural-nfsp-leduc5": Experiment(
        exp_neural_nfsp,
        "Neural NFSP on the 5-rank deck: pre-attack, random, adversarial"),
    "gridworld": Experiment(
        exp_gridworld,
        "Goal-chase grid: none/random/fixed-up/adversarial masking"),
    "resource": Experiment(
        exp_resource,
        "Resource-collection grid: none/random/fixed-up/adversarial masking"),
    "budget-sweep": Experiment(
        exp_budget_sweep,
        "Victim reward vs mask budget k (projected adversary vs random)",
        KUHN_SEEDS),
    "cac-correlation": Experiment(
        exp_cac_correlation,
        "Budget sweep plus Pearson correlation of capacity metrics with reward",
        KUHN_SEEDS),
    "cacv-oracle": Experiment(
        exp_cacv_oracle,
        "Greedy reach-times-gap oracle at fixed budget vs random and learned",
        KUHN_SEEDS),
    "rarl-compare": Experiment(
        exp_rarl_compare,
        "Action removal vs learned action perturbation at equal training budget",
        KUHN_SEEDS),
    "matched-l0": Experiment(
        exp_matched_l0,
        "Matched-support random control against the learned mask (Leduc QL)"),
    "transfer": Experiment(
        exp_transfer,
        "Mask trained on one seed applied to fresh victims; QL-to-NFSP transfer",
        KUHN_SEEDS),
    "selfplay-vs-fixed": Experiment(
        exp_selfplay_vs_fixed,
        "Attack strength with a co-adapting vs frozen opponent",
        KUHN_SEEDS),
    "mask-timing": Experiment(
        exp_mask_timing,
        "When the mask applies: eval-only, continued training, retrain from scratch"),
    "threat-model": Experiment(
        exp_threat_model,
        "Adversary observability: public-information vs private-information keys"),
    "defenses": Experiment(
        exp_defenses,
        "Victim-side defenses during training: action dropout, random mask ensemble"),
    "learning-curves": Experiment(
        exp_learning_curves,
        "Reward windows during attacks plus the extended-training no-recovery check"),
    "dea": Experiment(
        exp_dea,
        "All-singleton mask: forced-action fixed point and opponent stationarity",
        KUHN_SEEDS),
}


def run(experiment: str, seeds=None, out_root: Path | str = "results",
        overrides: dict | None = None, workers: int = 1) -> dict:
    """Run one registered experiment; returns its summary payload."""
    if experiment not in EXPERIMENTS:
        known = ", ".join(sorted(EXPERIMENTS))
        raise KeyError(f"unknown experiment {experiment!r}; known: {known}")
    entry = EXPERIMENTS[experiment]
    seeds = entry.default_seeds if seeds is None else tuple(seeds)
    if not seeds:
        raise ValueError("seed list must not be empty")
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")
    out_dir = Path(out_root) / experiment
    cfg = ExperimentConfig(experiment=experiment, seeds=seeds, out_dir=out_dir,
                           overrides=dict(overrides or {}), workers=workers)
    return entry.fn(cfg)
