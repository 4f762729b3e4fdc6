"""Offline tabular Q-learning over quantized frequency-offset assignments.

For each aggressor count S the trainer runs epsilon-greedy episodes on the
state space of aggressor FO tuples, rewarding steps by the scaled change in
ensemble-averaged network sum capacity. The resulting per-count tables decode
into FO prescriptions that the entry protocol hands to arriving links.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError, ParameterError, PolicyUnavailableError
from .interference import EnsembleEvaluator

ARTIFACT_FORMAT = "potsim-qtable"
ARTIFACT_VERSION = 1


@dataclass(frozen=True)
class Hyperparams:
    """Training knobs; defaults sized for desk-scale convergence."""

    beta: float = 0.1
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    lambda1: float = 10.0
    episodes: int = 500
    steps_per_episode: int = 0
    ensemble: int = 20
    tolerance: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ParameterError("beta must lie in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ParameterError("gamma must lie in [0, 1)")
        for eps in (self.epsilon_start, self.epsilon_end):
            if not 0.0 <= eps <= 1.0:
                raise ParameterError("epsilon must lie in [0, 1]")
        if self.lambda1 <= 0:
            raise ParameterError("lambda1 must be positive")
        if self.episodes < 1 or self.ensemble < 1:
            raise ParameterError("episode and ensemble budgets must be positive")
        if self.steps_per_episode < 0:
            raise ParameterError("steps_per_episode must be non-negative")
        if self.tolerance <= 0:
            raise ParameterError("tolerance must be positive")

    def steps(self, fo_quantum: int) -> int:
        """Steps per episode; zero means the 10 * Q default."""
        return self.steps_per_episode or 10 * fo_quantum

    def epsilon(self, episode: int) -> float:
        if self.episodes == 1:
            return self.epsilon_start
        frac = episode / (self.episodes - 1)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac

    @classmethod
    def from_dict(cls, data: dict) -> "Hyperparams":
        return cls(**data)


def q_update(q_old: float, reward_value: float, max_next: float,
             beta: float, gamma: float) -> float:
    """One state-action value update: (1 - beta) q + beta (r + gamma max')."""
    return (1.0 - beta) * q_old + beta * (reward_value + gamma * max_next)


def reward(capacity_now: float, capacity_prev: float, lambda1: float) -> float:
    """Scaled capacity improvement; negative when capacity drops."""
    return lambda1 * (capacity_now - capacity_prev)


def _circular_l1(a, b, fo_quantum: int) -> int:
    total = 0
    for x, y in zip(a, b):
        d = abs(x - y) % fo_quantum
        total += min(d, fo_quantum - d)
    return total


@dataclass
class QTable:
    """Per-aggressor-count state-action value tables.

    per_count maps S to a dict from state tuples (one quantized FO index per
    aggressor) to a value vector over the 2S + 1 actions: index 0 is the
    no-op, index 2j + 1 steps link j up by one FO quantum, index 2j + 2 steps
    it down. fallback_events counts greedy lookups that had to borrow the
    nearest trained state.
    """

    fo_quantum: int
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    seed: int = 0
    per_count: dict = field(default_factory=dict)
    converged: dict = field(default_factory=dict)
    fallback_events: int = 0

    def num_actions(self, count: int) -> int:
        return 2 * count + 1

    def action_effect(self, state: tuple, action: int) -> tuple:
        """State reached from ``state`` by the given action index."""
        if action == 0:
            return state
        link, parity = divmod(action - 1, 2)
        if link >= len(state):
            raise ParameterError("action index outside the action space")
        step = 1 if parity == 0 else -1
        moved = list(state)
        moved[link] = (moved[link] + step) % self.fo_quantum
        return tuple(moved)

    def values_for(self, count: int, state: tuple) -> np.ndarray:
        """Mutable value vector for a state, created on first touch."""
        sub = self.per_count.setdefault(count, {})
        if state not in sub:
            sub[state] = np.zeros(self.num_actions(count))
        return sub[state]

    def greedy(self, count: int, state: tuple) -> int:
        """Greedy action index, borrowing the nearest trained state if needed."""
        if count not in self.per_count or not self.per_count[count]:
            raise PolicyUnavailableError(f"no trained table for count {count}")
        sub = self.per_count[count]
        state = tuple(int(q) % self.fo_quantum for q in state)
        if state not in sub:
            self.fallback_events += 1
            state = min(sorted(sub),
                        key=lambda cand: _circular_l1(cand, state, self.fo_quantum))
        return int(np.argmax(sub[state]))

    def state_value(self, count: int, state: tuple) -> float:
        sub = self.per_count.get(count, {})
        if state not in sub:
            return -np.inf
        return float(np.max(sub[state]))

    def fo_assignment(self, count: int) -> tuple:
        """Decode the trained table into an FO prescription for S aggressors.

        Rolls the greedy policy out from the all-zero (full overlap) entry
        state. A no-op is the policy declaring the current state optimal, so
        the walk returns there. Rewards are capacity differences, which makes
        a state's value its remaining improvement rather than its quality;
        if the walk cycles or exhausts its step cap instead of absorbing, the
        visited state with the smallest value (least improvement left) is the
        best candidate. Raises KeyError when the count was never trained so
        callers can substitute their own fallback.
        """
        if count < 1:
            raise ParameterError("aggressor count must be at least 1")
        if count not in self.per_count or not self.per_count[count]:
            raise KeyError(count)
        sub = self.per_count[count]
        state = (0,) * count
        visited = [state]
        seen = {state}
        for _ in range(2 * count * self.fo_quantum):
            action = self.greedy(count, state)
            if action == 0:
                return state
            state = self.action_effect(state, action)
            if state in seen:
                break
            seen.add(state)
            visited.append(state)

        def improvement_left(cand):
            # Untrained states carry no evidence; rank them after any
            # trained state.
            if cand not in sub:
                return (1, 0.0)
            return (0, float(np.max(sub[cand])))

        return min(visited, key=improvement_left)

    def merge(self, other: "QTable") -> None:
        """Absorb another table's counts (training shards for distinct S)."""
        if other.fo_quantum != self.fo_quantum:
            raise ConfigError("tables quantize FOs differently")
        for count, sub in other.per_count.items():
            self.per_count[count] = {state: np.array(vec) for state, vec in sub.items()}
            self.converged[count] = other.converged.get(count, False)
        self.fallback_events += other.fallback_events

    @property
    def trained_counts(self) -> tuple:
        return tuple(sorted(self.per_count))

    def save(self, path) -> None:
        header = {
            "format": ARTIFACT_FORMAT,
            "version": ARTIFACT_VERSION,
            "fo_quantum": self.fo_quantum,
            "seed": self.seed,
            "hyperparams": asdict(self.hyperparams),
            "converged": {str(k): bool(v) for k, v in self.converged.items()},
            "counts": sorted(self.per_count),
            "fallback_events": self.fallback_events,
        }
        arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
        for count, sub in self.per_count.items():
            states = sorted(sub)
            arrays[f"states_{count}"] = np.array(states, dtype=np.int64).reshape(
                len(states), count)
            arrays[f"values_{count}"] = np.stack([sub[s] for s in states])
        np.savez_compressed(path, **arrays)

    @classmethod
    def load(cls, path) -> "QTable":
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(bytes(data["header"]).decode())
            if header.get("format") != ARTIFACT_FORMAT:
                raise ConfigError("not a Q-table artifact")
            if header.get("version") != ARTIFACT_VERSION:
                raise ConfigError("unsupported Q-table artifact version")
            table = cls(fo_quantum=int(header["fo_quantum"]),
                        hyperparams=Hyperparams.from_dict(header["hyperparams"]),
                        seed=int(header["seed"]),
                        fallback_events=int(header.get("fallback_events", 0)))
            for count in header["counts"]:
                states = data[f"states_{count}"]
                values = data[f"values_{count}"]
                table.per_count[int(count)] = {
                    tuple(int(q) for q in row): np.array(vec)
                    for row, vec in zip(states, values)}
                table.converged[int(count)] = bool(
                    header["converged"].get(str(count), False))
        return table


def greedy_policy(table: QTable, count: int, state: tuple) -> int:
    """Greedy action for one state; ties resolve to the lowest action index."""
    return table.greedy(count, tuple(state))


def _train_one_count(table: QTable, count: int, evaluator: EnsembleEvaluator,
                     rng: np.random.Generator) -> bool:
    hp = table.hyperparams
    steps = hp.steps(table.fo_quantum)
    num_actions = table.num_actions(count)
    capacity_cache = {}

    def mean_capacity(state):
        if state not in capacity_cache:
            capacity_cache[state] = evaluator.mean_sum_capacity(state)
        return capacity_cache[state]

    for episode in range(hp.episodes):
        eps = hp.epsilon(episode)
        state = (0,) * count
        cap_prev = mean_capacity(state)
        sweep_delta = 0.0
        for _ in range(steps):
            values = table.values_for(count, state)
            if rng.random() < eps:
                action = int(rng.integers(num_actions))
            else:
                action = int(np.argmax(values))
            next_state = table.action_effect(state, action)
            cap_now = mean_capacity(next_state)
            step_reward = reward(cap_now, cap_prev, hp.lambda1)
            max_next = float(np.max(table.values_for(count, next_state)))
            old = float(values[action])
            new = q_update(old, step_reward, max_next, hp.beta, hp.gamma)
            values[action] = new
            sweep_delta = max(sweep_delta, abs(new - old))
            state, cap_prev = next_state, cap_now
        if sweep_delta < hp.tolerance:
            return True
    return False


def train(scenario_family, s_max: int, hyperparams: Hyperparams = None,
          rng_seed: int = 0, counts=None) -> QTable:
    """Train per-count FO assignment tables.

    scenario_family(num_links, rng) must return a ScenarioEnergies drop for a
    network of num_links links (victim plus aggressors). Each count S gets its
    own drop ensemble and its own seeded stream, so tables for distinct S are
    reproducible independently of training order. ``counts`` restricts
    training to a subset of [1, s_max] (sharded budgets); the default trains
    every count.
    """
    if s_max < 1:
        raise ParameterError("s_max must be at least 1")
    hp = hyperparams if hyperparams is not None else Hyperparams()
    table = QTable(fo_quantum=0, hyperparams=hp, seed=int(rng_seed))
    chosen = sorted(set(counts)) if counts is not None else list(range(1, s_max + 1))
    if any(c < 1 or c > s_max for c in chosen):
        raise ParameterError("counts must lie in [1, s_max]")
    for count in chosen:
        drops = [scenario_family(count + 1, np.random.default_rng([rng_seed, count, d]))
                 for d in range(hp.ensemble)]
        evaluator = EnsembleEvaluator(drops)
        if table.fo_quantum == 0:
            table.fo_quantum = evaluator.fo_quantum
        elif table.fo_quantum != evaluator.fo_quantum:
            raise ConfigError("scenario family changed the FO quantum")
        walk_rng = np.random.default_rng([rng_seed, count, hp.ensemble])
        table.converged[count] = _train_one_count(table, count, evaluator, walk_rng)
    return table
