"""Sequential linking environment: masking, time-discounted rewards, termination.

One episode walks a 1-based step counter t up to a step budget. Each step
the agent proposes an identity pair; the reward is +1 for a ground-truth
pair and -1 otherwise, scaled by 1/t so early decisions weigh more. Correct
pairs retire both endpoints (one-to-one constraint); an exact pair may never
be proposed twice within an episode.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .graphs import AnchorSet, Graph


class ContractViolation(RuntimeError):
    """The acting side proposed a masked endpoint or a repeated pair."""


@dataclass
class RewardConfig:
    correct_reward: float = 1.0
    incorrect_reward: float = -1.0

    @staticmethod
    def discount(t: int) -> float:
        """Step weight 1/t; full weight at t = 1, decaying after."""
        return 1.0 / t


@dataclass
class StepOutcome:
    t: int
    v_original: int
    v_target: int
    reward_raw: float       # +-1 before the time discount
    reward: float           # reward_raw / t


@dataclass
class EpisodeState:
    t: int
    max_steps: int
    history: list[StepOutcome] = field(default_factory=list)
    masked_original: set[int] = field(default_factory=set)
    masked_target: set[int] = field(default_factory=set)
    proposed: set[tuple[int, int]] = field(default_factory=set)
    done: bool = False


class LinkEnv:
    """Environment bound to a graph pair and one ground-truth anchor set."""

    def __init__(self, g_original: Graph, g_target: Graph, anchors: AnchorSet,
                 max_steps: int | None = None, rewards: RewardConfig | None = None):
        if max_steps is not None and max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        anchors.validate(g_original, g_target)
        self.g_original = g_original
        self.g_target = g_target
        self.rewards = rewards or RewardConfig()
        self.truth = {g_original.index_of[o]: g_target.index_of[t]
                      for o, t in anchors.pairs}
        self.max_steps = max_steps if max_steps is not None else max(len(anchors), 1)

    def reset(self) -> EpisodeState:
        return EpisodeState(t=1, max_steps=self.max_steps)

    def step(self, state: EpisodeState, v_original: int, v_target: int):
        """Apply one proposal. Returns (reward, state, done); state is mutated.

        Raises ContractViolation if the proposal touches a masked endpoint
        or repeats an earlier pair: that is an acting-side bug, not a legal
        move with a penalty.
        """
        if state.done:
            raise ContractViolation("episode already finished")
        if v_original in state.masked_original or v_target in state.masked_target:
            raise ContractViolation(
                f"proposal ({v_original}, {v_target}) touches a masked endpoint")
        if (v_original, v_target) in state.proposed:
            raise ContractViolation(
                f"pair ({v_original}, {v_target}) was already proposed this episode")

        correct = self.truth.get(v_original) == v_target
        raw = self.rewards.correct_reward if correct else self.rewards.incorrect_reward
        reward = raw * self.rewards.discount(state.t)
        state.proposed.add((v_original, v_target))
        state.history.append(StepOutcome(state.t, v_original, v_target, raw, reward))
        if correct:
            state.masked_original.add(v_original)
            state.masked_target.add(v_target)
        state.t += 1
        exhausted = (len(state.masked_original) >= self.g_original.node_count
                     or len(state.masked_target) >= self.g_target.node_count)
        state.done = state.t > state.max_steps or exhausted
        return reward, state, state.done


def episode_return(history: list[StepOutcome]) -> float:
    return sum(step.reward for step in history)


def write_episode_trace(path, episodes: list[list[StepOutcome]],
                        g_original: Graph | None = None,
                        g_target: Graph | None = None) -> None:
    """CSV audit trail, one row per step: episode,t,vO,vT,r_tm,r_t.

    Node columns hold labels when the graphs are given, indices otherwise.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "t", "vO", "vT", "r_tm", "r_t"])
        for ep_no, history in enumerate(episodes):
            for step in history:
                v_o = (g_original.node_ids[step.v_original]
                       if g_original is not None else step.v_original)
                v_t = (g_target.node_ids[step.v_target]
                       if g_target is not None else step.v_target)
                writer.writerow([ep_no, step.t, v_o, v_t,
                                 repr(step.reward_raw), repr(step.reward)])
