"""Training orchestration: self-play, the bi-level attack loop, evaluation.

One run is one sequential episode stream.  Chance is drawn from its own
generator with a constant number of draws per episode, so deals never
depend on exploration noise; policy and mask randomness use separate
streams.  Masks apply to player 0 only, in every regime.

The bi-level loop alternates a block of victim training episodes under
the adversary's sampled masks with one adversary gradient step, then
freezes the adversary for a greedy-mask evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import games, metrics
from .masking import MaskStrategy, MaskTable, apply_mask, diagnostics

__all__ = [
    "TrainingSchedule", "Regime", "Defense", "RunRecord", "EvalReport",
    "derive_seed", "pretrain", "train_fixed_mask", "evaluate", "run_bilevel",
    "run_bilevel_perturb", "transfer_mask", "run_defense", "victim_q_map",
    "execution_strategy",
]

SELF_PLAY_SHARED = "selfplay-shared"
SELF_PLAY_SEPARATE = "selfplay-separate"
FIXED_OPPONENT = "fixed-opponent"


@dataclass(frozen=True)
class Regime:
    """Which seats learn and against whom during masked training."""

    kind: str = SELF_PLAY_SHARED

    def __post_init__(self):
        if self.kind not in (SELF_PLAY_SHARED, SELF_PLAY_SEPARATE, FIXED_OPPONENT):
            raise ValueError(f"unknown regime {self.kind!r}")


@dataclass
class TrainingSchedule:
    pretrain_episodes: int = 10_000
    outer_iterations: int = 20
    inner_episodes: int = 500
    eval_episodes: int = 2000
    extension_episodes: int = 0
    window: int = 500

    def __post_init__(self):
        for name in ("pretrain_episodes", "outer_iterations", "inner_episodes",
                     "eval_episodes", "extension_episodes", "window"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


class Defense:
    """Training-time action randomisation for the victim.

    dropout: each own decision independently loses one random legal action
    with probability p.  ensemble: n persistent random masks, cycled per
    episode, built lazily as states are first seen.
    """

    def __init__(self, kind: str, p: float = 0.2, n: int = 5):
        if kind not in ("dropout", "ensemble"):
            raise ValueError(f"unknown defense {kind!r}")
        self.kind = kind
        self.p = p
        self.n = n
        self._masks: list[dict[str, int]] = [dict() for _ in range(n)]
        self._active = 0
        self._episode = 0

    def begin_episode(self):
        self._episode += 1
        if self.kind == "ensemble":
            self._active = self._episode % self.n

    def apply(self, key, legal, retained, rng):
        if len(retained) <= 1:
            return retained
        if self.kind == "dropout":
            if rng.random() < self.p:
                drop = retained[int(rng.integers(len(retained)))]
                return tuple(a for a in retained if a != drop)
            return retained
        mask = self._masks[self._active]
        removed = mask.get(key)
        if removed is None:
            removed = mask[key] = int(legal[int(rng.integers(len(legal)))])
        if removed in retained:
            return tuple(a for a in retained if a != removed)
        return retained


@dataclass
class EvalReport:
    """Frozen-policy evaluation statistics for player 0."""

    mean: float
    ci95: float
    returns: list[float]
    visits: dict[str, int]
    legal_by_key: dict[str, tuple]
    features_by_key: dict[str, np.ndarray]
    visit_log: list[tuple[str, bool]]
    decisions: int
    masked_decisions: int
    actions: list[tuple[str, int]] = field(default_factory=list)

    def mask_diagnostics(self) -> dict:
        return diagnostics(None, self.visit_log).as_dict()


@dataclass
class RunRecord:
    """Everything one seeded run produced."""

    seed: int
    game: str
    condition: str
    eval_mean: float
    eval_ci95: float
    eval_episodes: int
    windows: dict[str, list[float]] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    cac_w_trace: list[float] = field(default_factory=list)
    cac_v_trace: list[float] = field(default_factory=list)
    cac_w: float = float("nan")
    cac_v: float = float("nan")
    mask_support: int = 0
    confidence_table: dict[str, list] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def clean(x):
            if isinstance(x, dict):
                return {str(k): clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            if isinstance(x, (np.floating, np.integer)):
                return x.item()
            return x
        return json.dumps(clean(self.__dict__), indent=1, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunRecord":
        return cls(**json.loads(Path(path).read_text()))


def derive_seed(*parts) -> int:
    """Stable child seed from integer parts."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _as_strategy(mask) -> MaskStrategy | None:
    if mask is None:
        return None
    if isinstance(mask, MaskStrategy):
        return mask
    if isinstance(mask, MaskTable):
        return MaskStrategy.lookup(mask)
    raise TypeError(f"expected MaskTable or MaskStrategy, got {type(mask)!r}")


def execution_strategy(adversary, budget: int | None, keys=None) -> MaskStrategy:
    """Frozen attack for evaluation: greedy removals, optionally top-k projected."""
    if budget is None:
        return MaskStrategy.adversary_driven(adversary, "greedy")
    return MaskStrategy.lookup(adversary.project_top_k(budget, keys=keys))


class _TrainVisits:
    """Per-block player-0 visit counts used for the capacity trace."""

    __slots__ = ("counts", "legal", "feats")

    def __init__(self):
        self.counts: dict[str, int] = {}
        self.legal: dict[str, tuple] = {}
        self.feats: dict[str, np.ndarray] = {}


class _EvalCollect:
    __slots__ = ("returns", "visits", "legal", "feats", "visit_log",
                 "decisions", "masked", "actions", "record_actions")

    def __init__(self, record_actions=False):
        self.returns = []
        self.visits: dict[str, int] = {}
        self.legal: dict[str, tuple] = {}
        self.feats: dict[str, np.ndarray] = {}
        self.visit_log: list[tuple[str, bool]] = []
        self.decisions = 0
        self.masked = 0
        self.actions: list[tuple[str, int]] = []
        self.record_actions = record_actions


def _run_block(spec, seats, episodes, *, chance, policy_rng, mask_rng,
               learn: bool, learn_seats=(0, 1), mask=None, perturber=None,
               perturb_mode="sample", defense=None, collect=None,
               train_visits=None, window=0):
    """Advance one sequential block of episodes; returns window means."""
    eng = games.engine_for(spec)
    strategy = _as_strategy(mask)
    adv = strategy.adversary if strategy is not None and strategy.kind == "adversary" else None
    adv_logs = adv is not None and strategy.mode == "sample"
    perturb_logs = perturber is not None and perturb_mode == "sample"
    needs_feats = [seats[0].uses_features, seats[1].uses_features]
    if adv is not None and getattr(adv, "uses_features", False):
        needs_feats[0] = True
    shared = seats[0] is seats[1]
    windows: list[float] = []
    acc = 0.0
    count = 0

    for _ in range(episodes):
        if learn:
            if defense is not None:
                defense.begin_episode()
            if shared:
                if learn_seats:
                    seats[0].begin_episode(tuple(learn_seats), policy_rng)
            else:
                for p in learn_seats:
                    seats[p].begin_episode((p,), policy_rng)
        if adv_logs:
            adv.begin_episode()
        if perturb_logs:
            perturber.begin_episode()

        st = eng.new_episode(spec, chance)
        pend = [None, None]
        while not st.terminal:
            p = st.player
            key = eng.info_state_key(st, p)
            legal = eng.legal_actions(st)
            feats = eng.featurize(st, p) if needs_feats[p] else None
            if p == 0 and strategy is not None:
                retained = apply_mask(strategy, key, legal, mask_rng, features=feats)
                if defense is not None and learn:
                    retained = defense.apply(key, legal, retained, mask_rng)
            else:
                retained = legal
            agent = seats[p]
            learning = learn and p in learn_seats
            if learning and pend[p] is not None:
                k0, f0, a0 = pend[p]
                agent.observe(p, k0, f0, a0, 0.0, key, feats, retained, False,
                              policy_rng)
            a = agent.act(p, key, feats, retained, policy_rng,
                          eval_mode=not learning)
            if learning:
                pend[p] = (key, feats, a)
            if p == 0:
                if train_visits is not None:
                    train_visits.counts[key] = train_visits.counts.get(key, 0) + 1
                    if key not in train_visits.legal:
                        train_visits.legal[key] = legal
                        if feats is not None:
                            train_visits.feats[key] = feats
                if collect is not None:
                    collect.decisions += 1
                    collect.visits[key] = collect.visits.get(key, 0) + 1
                    hit = retained != legal
                    if hit:
                        collect.masked += 1
                    collect.visit_log.append((key, hit))
                    if key not in collect.legal:
                        collect.legal[key] = legal
                        if feats is not None:
                            collect.feats[key] = feats
                    if collect.record_actions:
                        collect.actions.append((key, a))
                if perturber is not None:
                    a = perturber.perturb(key, a, legal, perturb_mode, mask_rng)
            st = eng.step(st, a)

        ret = st.returns
        if learn:
            for p in learn_seats:
                if pend[p] is not None:
                    k0, f0, a0 = pend[p]
                    seats[p].observe(p, k0, f0, a0, ret[p], None, None, None,
                                     True, policy_rng)
            if shared:
                for p in learn_seats:
                    seats[0].end_episode(p, ret[p])
            else:
                for p in learn_seats:
                    seats[p].end_episode(p, ret[p])
        if adv_logs:
            adv.end_episode(ret[0])
        if perturb_logs:
            perturber.end_episode(ret[0])
        if collect is not None:
            collect.returns.append(ret[0])
        if window:
            acc += ret[0]
            count += 1
            if count == window:
                windows.append(acc / window)
                acc = 0.0
                count = 0
    return windows


def _streams(seed: int):
    chance = np.random.default_rng([seed, 0])
    policy = np.random.default_rng([seed, 1])
    mask = np.random.default_rng([seed, 2])
    return chance, policy, mask


def pretrain(agent, spec, episodes: int, seed: int, *, window: int = 500,
             defense: Defense | None = None) -> list[float]:
    """Unmasked shared-agent self-play; returns per-window player-0 means."""
    chance, policy, mask_rng = _streams(seed)
    return _run_block(spec, (agent, agent), episodes, chance=chance,
                      policy_rng=policy, mask_rng=mask_rng, learn=True,
                      defense=defense, window=window)


def train_fixed_mask(agent, mask, spec, episodes: int, seed: int, *,
                     window: int = 500, opponent=None,
                     defense: Defense | None = None) -> list[float]:
    """Masked training under a frozen mask (table, strategy, or greedy adversary)."""
    chance, policy, mask_rng = _streams(seed)
    if opponent is None:
        seats, learn_seats = (agent, agent), (0, 1)
    else:
        seats, learn_seats = (agent, opponent), (0,)
    return _run_block(spec, seats, episodes, chance=chance, policy_rng=policy,
                      mask_rng=mask_rng, learn=True, learn_seats=learn_seats,
                      mask=mask, defense=defense, window=window)


def evaluate(agent, mask, spec, episodes: int, seed: int, *,
             opponent=None, perturber=None, record_actions=False) -> EvalReport:
    """Frozen evaluation: no learning, exploration off, mask applied greedily."""
    chance, policy, mask_rng = _streams(seed)
    collect = _EvalCollect(record_actions=record_actions)
    seats = (agent, opponent if opponent is not None else agent)
    _run_block(spec, seats, episodes, chance=chance, policy_rng=policy,
               mask_rng=mask_rng, learn=False, mask=mask, perturber=perturber,
               perturb_mode="greedy", collect=collect)
    mean, ci, _ = metrics.mean_ci(collect.returns)
    return EvalReport(
        mean=mean, ci95=ci, returns=collect.returns, visits=collect.visits,
        legal_by_key=collect.legal, features_by_key=collect.feats,
        visit_log=collect.visit_log, decisions=collect.decisions,
        masked_decisions=collect.masked, actions=collect.actions,
    )


def victim_q_map(agent, legal_by_key, features_by_key=None) -> dict[str, dict[int, float]]:
    """Per-state Q estimates for every key the evaluation visited."""
    out = {}
    feats = features_by_key or {}
    for key in legal_by_key:
        row = agent.q_values(key, feats.get(key))
        if row is not None:
            out[key] = row
    return out


def _capacity(mask, reach, gaps, legal_by_key):
    return (metrics.cac_w(mask, reach, legal_by_key),
            metrics.cac_v(mask, reach, gaps, legal_by_key))


def run_bilevel(agent, adversary, spec, schedule: TrainingSchedule, seed: int, *,
                regime: Regime = Regime(), opponent=None, defense=None,
                eval_budget: int | None = None, condition: str = "",
                trace: bool = True) -> RunRecord:
    """Alternate victim training under sampled masks with adversary updates.

    The agent must already be pretrained.  In the fixed-opponent regime a
    snapshot taken on entry plays seat 1 while only seat 0 learns; in the
    separate regime ``opponent`` is a second learner for seat 1.  The final
    evaluation applies the frozen greedy attack (optionally projected to a
    budget) and reports capacity metrics from it.
    """
    chance, policy, mask_rng = _streams(seed)
    if regime.kind == FIXED_OPPONENT:
        seats, learn_seats = (agent, agent.snapshot()), (0,)
    elif regime.kind == SELF_PLAY_SEPARATE:
        if opponent is None:
            raise ValueError("separate self-play needs an opponent learner")
        seats, learn_seats = (agent, opponent), (0, 1)
    else:
        seats, learn_seats = (agent, agent), (0, 1)

    sample_strategy = MaskStrategy.adversary_driven(adversary, "sample")
    windows: list[float] = []
    cac_w_trace: list[float] = []
    cac_v_trace: list[float] = []
    seen_keys: set[str] = set()
    window = min(schedule.window, schedule.inner_episodes) \
        if schedule.inner_episodes else schedule.window

    for _ in range(schedule.outer_iterations):
        visits = _TrainVisits() if trace else None
        windows += _run_block(
            spec, seats, schedule.inner_episodes, chance=chance,
            policy_rng=policy, mask_rng=mask_rng, learn=True,
            learn_seats=learn_seats, mask=sample_strategy, defense=defense,
            train_visits=visits, window=window)
        adversary.reinforce_update()
        if trace and visits is not None and visits.counts:
            seen_keys |= set(visits.counts)
            reach = metrics.ReachMap(
                rho={k: c / schedule.inner_episodes for k, c in visits.counts.items()},
                episodes=schedule.inner_episodes)
            greedy_mask = adversary.project_top_k(len(seen_keys), keys=sorted(seen_keys))
            q_map = victim_q_map(agent, visits.legal, visits.feats)
            gaps = metrics.gaps_for_mask(q_map, visits.legal, greedy_mask)
            w, v = _capacity(greedy_mask, reach, gaps, visits.legal)
            cac_w_trace.append(w)
            cac_v_trace.append(v)

    exec_keys = sorted(seen_keys) if seen_keys else None
    final_strategy = execution_strategy(adversary, eval_budget, keys=exec_keys)

    ext_windows: list[float] = []
    if schedule.extension_episodes:
        ext_windows = _run_block(
            spec, seats, schedule.extension_episodes, chance=chance,
            policy_rng=policy, mask_rng=mask_rng, learn=True,
            learn_seats=learn_seats, mask=final_strategy, defense=defense,
            window=window)

    report = evaluate(agent, final_strategy, spec, schedule.eval_episodes,
                      derive_seed(seed, 7),
                      opponent=None if regime.kind != SELF_PLAY_SEPARATE else opponent)
    q_map = victim_q_map(agent, report.legal_by_key, report.features_by_key)
    reach = metrics.ReachMap(
        rho={k: c / schedule.eval_episodes for k, c in report.visits.items()},
        episodes=schedule.eval_episodes)
    eval_mask = MaskTable(removed={
        key: final_strategy.table.removed[key] for key in final_strategy.table.removed
    }) if final_strategy.kind == "table" else adversary.project_top_k(
        len(report.visits), keys=sorted(report.visits))
    gaps = metrics.gaps_for_mask(q_map, report.legal_by_key, eval_mask)
    w, v = _capacity(eval_mask, reach, gaps, report.legal_by_key)

    confidence = {}
    for key in sorted(seen_keys):
        conf = adversary.confidence(key)
        removed = eval_mask.removed.get(key)
        confidence[key] = [removed, conf]

    record_windows = {"attack": windows}
    if ext_windows:
        record_windows["extension"] = ext_windows
    return RunRecord(
        seed=seed, game=spec.game, condition=condition,
        eval_mean=report.mean, eval_ci95=report.ci95,
        eval_episodes=schedule.eval_episodes, windows=record_windows,
        diagnostics=diagnostics(None, report.visit_log).as_dict(),
        cac_w_trace=cac_w_trace, cac_v_trace=cac_v_trace,
        cac_w=w, cac_v=v, mask_support=len(eval_mask.removed),
        confidence_table=confidence,
        metadata={"regime": regime.kind, "eval_budget": eval_budget},
    )


def run_bilevel_perturb(agent, perturber, spec, schedule: TrainingSchedule,
                        seed: int, *, condition: str = "") -> RunRecord:
    """Bi-level loop for the action-replacement baseline (no masking)."""
    chance, policy, mask_rng = _streams(seed)
    seats, learn_seats = (agent, agent), (0, 1)
    windows: list[float] = []
    window = min(schedule.window, schedule.inner_episodes) \
        if schedule.inner_episodes else schedule.window
    for _ in range(schedule.outer_iterations):
        windows += _run_block(
            spec, seats, schedule.inner_episodes, chance=chance,
            policy_rng=policy, mask_rng=mask_rng, learn=True,
            learn_seats=learn_seats, perturber=perturber,
            perturb_mode="sample", window=window)
        perturber.reinforce_update()
    report = evaluate(agent, None, spec, schedule.eval_episodes,
                      derive_seed(seed, 7), perturber=perturber)
    return RunRecord(
        seed=seed, game=spec.game, condition=condition,
        eval_mean=report.mean, eval_ci95=report.ci95,
        eval_episodes=schedule.eval_episodes,
        windows={"attack": windows},
        diagnostics=diagnostics(None, report.visit_log).as_dict(),
        metadata={"attack": "perturbation"},
    )


def transfer_mask(mask, spec, victim_factory, seeds, *, pretrain_episodes: int,
                  train_episodes: int, eval_episodes: int = 2000,
                  condition: str = "transfer") -> list[RunRecord]:
    """Apply a fixed mask (table or file path) to freshly trained victims."""
    if not isinstance(mask, MaskTable):
        mask = MaskTable.load(mask)
    records = []
    for seed in seeds:
        agent = victim_factory(seed)
        pre = pretrain(agent, spec, pretrain_episodes, derive_seed(seed, 1))
        post = train_fixed_mask(agent, mask, spec, train_episodes,
                                derive_seed(seed, 2))
        report = evaluate(agent, mask, spec, eval_episodes, derive_seed(seed, 3))
        records.append(RunRecord(
            seed=seed, game=spec.game, condition=condition,
            eval_mean=report.mean, eval_ci95=report.ci95,
            eval_episodes=eval_episodes,
            windows={"pretrain": pre, "attack": post},
            diagnostics=diagnostics(None, report.visit_log).as_dict(),
            mask_support=len(mask.removed),
        ))
    return records


def run_defense(variant: Defense, agent, adversary, spec,
                schedule: TrainingSchedule, seed: int, *,
                condition: str = "defense") -> RunRecord:
    """Pretrain and attack with a training-time defense active on the victim."""
    pre = pretrain(agent, spec, schedule.pretrain_episodes, derive_seed(seed, 1),
                   defense=variant, window=schedule.window)
    record = run_bilevel(agent, adversary, spec, schedule, derive_seed(seed, 2),
                         defense=variant, condition=condition)
    record.seed = seed
    record.windows["pretrain"] = pre
    record.metadata["defense"] = variant.kind
    return record
