"""Plan/dataset files: JSON-lines with an explicit format-version header.

Each record carries the serialized instance text, the plan as comma-separated
action names, and provenance (tier, source, seed). States are reconstructed
by replaying the actions, so files stay compact and the loader re-validates
every plan.
"""

from __future__ import annotations

import json
import os

from . import domains
from .errors import ParseError
from .search import Plan
from .training import Dataset

FORMAT_VERSION = 1


def _entry_record(entry):
    return {
        "instance": domains.serialize_instance(entry.instance),
        "actions": ",".join(a.name for a in entry.plan.actions),
        "tier": entry.tier,
        "source": entry.source,
    }


def save_dataset(dataset, path):
    lines = [json.dumps({"format_version": FORMAT_VERSION,
                         "include_goal_samples": dataset.include_goal_samples})]
    lines.extend(json.dumps(_entry_record(e), sort_keys=True) for e in dataset.entries)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def save_plans(pairs, path, tier=0.0, source="oracle"):
    """Write (instance, plan) pairs in the dataset format."""
    dataset = Dataset()
    dataset.extend(pairs, tier=tier, source=source)
    save_dataset(dataset, path)


def _replay(instance, action_names):
    state = instance.initial_state
    states = [state]
    actions = []
    for name in action_names:
        action = domains.action_by_name(instance.domain, name)
        nxt = domains.apply_action(state, action)
        if nxt is None:
            raise ParseError(f"action {name!r} inapplicable while replaying plan "
                             f"for {instance.instance_id}")
        actions.append(action)
        states.append(nxt)
        state = nxt
    return Plan(tuple(actions), tuple(states))


def load_dataset(path):
    with open(path) as fh:
        lines = [line for line in fh.read().split("\n") if line.strip()]
    if not lines:
        raise ParseError(f"empty dataset file {path}", line=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad dataset header: {exc}", line=1) from None
    if header.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"unsupported dataset format_version {header.get('format_version')!r}", line=1)
    dataset = Dataset(include_goal_samples=header.get("include_goal_samples", True))
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad dataset record: {exc}", line=lineno) from None
        instance = domains.parse_instance(record["instance"])
        names = [n for n in record.get("actions", "").split(",") if n]
        plan = _replay(instance, names)
        dataset.extend([(instance, plan)],
                       tier=float(record.get("tier", 0.0)),
                       source=record.get("source", "oracle"))
    return dataset


def load_pairs(path):
    """The (instance, plan) pairs of a dataset file, without sample expansion."""
    dataset = load_dataset(path)
    return [(e.instance, e.plan) for e in dataset.entries]
