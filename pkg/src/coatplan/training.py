"""Imitation datasets from oracle plans, supervised training of the network,
coverage/plan-length evaluation, and curriculum rounds that grow the training
set with self-solved harder instances.
"""

from __future__ import annotations

import hashlib
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import domains, tensor_core as tc
from .coat_model import forward, heuristic_value
from .errors import ContractError, CurriculumError, UsageError
from .search import SearchBudget, astar, validate_plan

SPLIT_BUCKETS = 1000


@dataclass(frozen=True)
class Sample:
    entry_index: int
    state_index: int
    delta: int  # distance-to-go witnessed by this sample's plan
    action_index: int | None  # next action along the plan; None on goal samples


@dataclass
class DatasetEntry:
    instance: object
    plan: object
    tier: float
    source: str  # "oracle" or "self"
    split_hash: int = field(init=False)

    def __post_init__(self):
        digest = hashlib.sha256(domains.serialize_instance(self.instance).encode()).digest()
        self.split_hash = int.from_bytes(digest[:4], "little") % SPLIT_BUCKETS


class Dataset:
    """Plan-backed sample collection.

    Samples reference (entry, state index) pairs; states come from the plan's
    induced sequence and are re-encoded lazily at training time. Labels are
    tightened across duplicates: training always uses the smallest
    distance-to-go witnessed for a state, so sub-optimal curriculum plans
    never push a label above a better witness.
    """

    def __init__(self, include_goal_samples=True):
        self.include_goal_samples = include_goal_samples
        self.entries = []
        self.samples = []
        self._tight = {}

    def __len__(self):
        return len(self.samples)

    def extend(self, plans, tier=0.0, source="oracle"):
        """Append validated (instance, plan) pairs; invalid plans are rejected
        with their position."""
        for j, (instance, plan) in enumerate(plans):
            report = validate_plan(instance, plan)
            if not report.valid:
                raise ContractError(
                    f"plan {j} for {instance.instance_id} invalid at index {report.failure_index}")
        for instance, plan in plans:
            entry_index = len(self.entries)
            self.entries.append(DatasetEntry(instance, plan, tier, source))
            length = plan.length
            for i in range(length):
                self._add_sample(entry_index, i, length - i, plan.actions[i].index)
            if self.include_goal_samples:
                self._add_sample(entry_index, length, 0, None)
        return self

    def _add_sample(self, entry_index, state_index, delta, action_index):
        state = self.entries[entry_index].plan.states[state_index]
        known = self._tight.get(state)
        if known is None or delta < known:
            self._tight[state] = delta
        self.samples.append(Sample(entry_index, state_index, delta, action_index))

    def state_for(self, sample):
        return self.entries[sample.entry_index].plan.states[sample.state_index]

    def label_for(self, sample):
        """Distance label after tightening across duplicate states."""
        return self._tight[self.state_for(sample)]

    def max_tier(self):
        return max((e.tier for e in self.entries), default=float("-inf"))

    def split_indices(self, val_fraction):
        """Instance-disjoint train/validation sample index lists."""
        threshold = int(round(val_fraction * SPLIT_BUCKETS))
        train, val = [], []
        for i, sample in enumerate(self.samples):
            if self.entries[sample.entry_index].split_hash < threshold:
                val.append(i)
            else:
                train.append(i)
        return train, val


def build_dataset(plans, tier=0.0, source="oracle", include_goal_samples=True):
    """One sample per plan state with distance-to-go label l - i and the next
    action; optionally a final zero-distance goal sample per plan."""
    return Dataset(include_goal_samples).extend(plans, tier=tier, source=source)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    curriculum_learning_rate: float = 1e-4
    epochs: int = 30
    finetune_epochs: int = 10
    batch_size: int = 32
    policy_weight: float = 1.0
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.learning_rate <= 0 or self.curriculum_learning_rate <= 0:
            raise ContractError("learning rates must be positive")
        if self.policy_weight < 0:
            raise ContractError("policy-loss weight must be >= 0")
        if not (0 <= self.val_fraction < 1):
            raise ContractError("val_fraction must be in [0, 1)")


def _sample_loss(model, dataset, sample, policy_weight):
    """Forward pass and combined loss for one sample.

    Loss = MAE(value, distance) + weight * CE(policy, action); the policy
    term only applies on dual-head models for samples that carry an action.
    """
    state = dataset.state_for(sample)
    encoded, agents = domains.encode_pair(state, domains.canonical_goal_state(state))
    policy, value = forward(model, encoded, agents)
    delta = float(dataset.label_for(sample))
    loss = tc.loss_eval("mae", value, np.asarray([delta], dtype=value.dtype))
    mae = abs(value.item() - delta)
    ce_val = 0.0
    if (policy is not None and sample.action_index is not None and policy_weight > 0):
        target = np.zeros(policy.shape, dtype=policy.dtype)
        target[sample.action_index] = 1.0
        ce = tc.loss_eval("categorical_cross_entropy", policy, target)
        ce_val = ce.item()
        loss = tc.add(loss, tc.scale(ce, policy_weight))
    return loss, mae, ce_val


def train(model, dataset, config, lr=None, epochs=None, max_steps=None, stop_mae=None):
    """Adam over shuffled per-epoch batches with per-sample gradient
    accumulation. Deterministic for a fixed seed. Returns the per-epoch
    metrics history; the model is updated in place.
    """
    if len(dataset) == 0:
        raise UsageError("cannot train on an empty dataset")
    lr = config.learning_rate if lr is None else lr
    epochs = config.epochs if epochs is None else epochs
    policy_weight = config.policy_weight if model.config.head_mode == "dual" else 0.0
    rng = random.Random(config.seed)
    adam = tc.AdamState(model.params)
    train_idx, val_idx = dataset.split_indices(config.val_fraction)
    if not train_idx:
        train_idx, val_idx = list(range(len(dataset))), []

    history = []
    steps = 0
    for epoch in range(epochs):
        order = train_idx[:]
        rng.shuffle(order)
        epoch_loss = epoch_mae = epoch_ce = 0.0
        seen = 0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo:lo + config.batch_size]
            grads = []
            for i in batch:
                loss, mae, ce = _sample_loss(model, dataset, dataset.samples[i], policy_weight)
                grads.append(tc.backward(loss, model.params))
                epoch_loss += loss.item()
                epoch_mae += mae
                epoch_ce += ce
            seen += len(batch)
            tc.adam_step(model.params, tc.batch_mean_grads(grads), adam, lr)
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break
        record = {
            "epoch": epoch,
            "steps": steps,
            "train_loss": epoch_loss / max(seen, 1),
            "train_mae": epoch_mae / max(seen, 1),
            "train_ce": epoch_ce / max(seen, 1),
        }
        if val_idx:
            v_loss = v_mae = 0.0
            with tc.no_grad():
                for i in val_idx:
                    loss, mae, _ = _sample_loss(model, dataset, dataset.samples[i], policy_weight)
                    v_loss += loss.item()
                    v_mae += mae
            record["val_loss"] = v_loss / len(val_idx)
            record["val_mae"] = v_mae / len(val_idx)
        history.append(record)
        if stop_mae is not None and record["train_mae"] < stop_mae:
            break
        if max_steps is not None and steps >= max_steps:
            break
    return history


def make_model_heuristic(model):
    def h(state):
        return heuristic_value(model, state)

    return h


@dataclass
class EvalRecord:
    instance_id: str
    tier: str
    solver: str
    solved: bool
    plan_length: int | None
    expansions: int
    elapsed_ms: float
    seed: object


@dataclass
class EvalSummary:
    coverage: float
    avg_plan_length: float | None  # over solved instances only
    avg_expansions: float
    records: list


def evaluate(model, eval_set, budget, solver="coat", heuristic=None, tier="", workers=1):
    """Run A* with the model heuristic (or an explicit one) on each instance.

    Failures count as unsolved; the per-instance rows feed the report tables.
    """
    if heuristic is None:
        heuristic = make_model_heuristic(model)

    def run(instance):
        result = astar(instance, heuristic, budget)
        return EvalRecord(
            instance_id=instance.instance_id,
            tier=str(tier) if tier else f"{instance.initial_state.board.h}x{instance.initial_state.board.w}",
            solver=solver,
            solved=result.solved,
            plan_length=result.plan.length if result.solved else None,
            expansions=result.stats.expanded,
            elapsed_ms=result.stats.elapsed * 1000.0,
            seed=instance.metadata.get("seed"),
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run, eval_set))
    else:
        records = [run(instance) for instance in eval_set]

    solved = [r for r in records if r.solved]
    coverage = len(solved) / len(records) if records else 0.0
    avg_len = sum(r.plan_length for r in solved) / len(solved) if solved else None
    avg_exp = sum(r.expansions for r in records) / len(records) if records else 0.0
    return EvalSummary(coverage, avg_len, avg_exp, records)


@dataclass(frozen=True)
class CurriculumTier:
    label: str
    domain: str
    params: object  # generator params for this difficulty
    instance_count: int
    seed: int
    budget: SearchBudget
    difficulty: float


@dataclass
class RoundReport:
    tier_label: str
    attempted: int
    solved: int
    coverage_before: float  # self-solve rate at the tier before fine-tuning
    coverage_after: float  # same instances re-solved after fine-tuning
    dataset_before: int
    dataset_after: int
    elapsed: float


def curriculum_round(model, tier, dataset, config):
    """One bootstrap round: generate harder instances, solve them with the
    current model inside A*, append the validated plans, and fine-tune at the
    reduced curriculum learning rate. Fails without touching the dataset when
    nothing at the tier is solved."""
    if tier.difficulty <= dataset.max_tier():
        raise ContractError(
            f"tier difficulty {tier.difficulty} not harder than dataset max {dataset.max_tier()}")
    t0 = time.perf_counter()
    instances = [
        domains.generate(tier.domain, tier.params, seed=tier.seed + i, certify=False)
        for i in range(tier.instance_count)
    ]
    heuristic = make_model_heuristic(model)
    solved_pairs = []
    for instance in instances:
        result = astar(instance, heuristic, tier.budget)
        if result.solved and validate_plan(instance, result.plan).valid:
            solved_pairs.append((instance, result.plan))
    if not solved_pairs:
        raise CurriculumError(
            f"no {tier.domain} instances solved at tier {tier.label!r} "
            f"({tier.instance_count} attempted); dataset unchanged")
    before = len(dataset)
    dataset.extend(solved_pairs, tier=tier.difficulty, source="self")
    train(model, dataset, config, lr=config.curriculum_learning_rate, epochs=config.finetune_epochs)
    after_summary = evaluate(model, instances, tier.budget, solver="coat", tier=tier.label)
    report = RoundReport(
        tier_label=tier.label,
        attempted=len(instances),
        solved=len(solved_pairs),
        coverage_before=len(solved_pairs) / len(instances),
        coverage_after=after_summary.coverage,
        dataset_before=before,
        dataset_after=len(dataset),
        elapsed=time.perf_counter() - t0,
    )
    return model, dataset, report
