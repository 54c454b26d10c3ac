"""Command-line surface for the whole pipeline.

Subcommands: generate, oracle, dataset, train, evaluate, curriculum,
export-pddl, report, inspect. All randomness flows from --seed; re-running a
command with the same seed reproduces every non-timing output byte.

Environment overrides: COATPLAN_OUT_DIR supplies a default output location,
COATPLAN_THREADS a worker count for instance-level evaluation. A --config
file with KEY=VALUE lines supplies per-command flag defaults.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import checkpoint, dataset_io, domains, pddl, report
from .coat_model import ModelConfig, build_model
from .domains.floortile import FloorTileParams
from .domains.maze import MazeParams
from .domains.sokoban import SokobanParams
from .errors import CoatPlanError, UsageError
from .search import SearchBudget, oracle_solve
from .training import CurriculumTier, TrainConfig, curriculum_round, evaluate, train

ENV_OUT_DIR = "COATPLAN_OUT_DIR"
ENV_THREADS = "COATPLAN_THREADS"


def _workers():
    raw = os.environ.get(ENV_THREADS, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None


def _out_path(value, what):
    if value:
        return value
    env = os.environ.get(ENV_OUT_DIR)
    if env:
        return env
    raise UsageError(f"no {what} given and {ENV_OUT_DIR} is not set")


def _atomic_write_text(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _budget(args, default_expansions, default_seconds):
    expansions = getattr(args, "budget_expansions", None)
    seconds = getattr(args, "budget_seconds", None)
    if expansions is None and seconds is None:
        return SearchBudget(default_expansions, default_seconds)
    return SearchBudget(expansions, seconds)


def _generator_params(args):
    height = args.height if args.height is not None else args.size
    width = args.width if args.width is not None else args.size
    if height is None or width is None:
        raise UsageError("pass --size or both --height and --width")
    if args.domain == "sokoban":
        return SokobanParams(height, width, boxes=args.boxes,
                             wall_density=args.wall_density)
    if args.domain == "maze":
        return MazeParams(height, width, teleport_pairs=args.teleports)
    return FloorTileParams(height, width)


def _load_instances(path):
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if n.endswith(".txt"))
        if not names:
            raise UsageError(f"no .txt instance files in {path}")
        paths = [os.path.join(path, n) for n in names]
    else:
        paths = [path]
    instances = []
    for p in paths:
        with open(p) as fh:
            instance = domains.parse_instance(fh.read())
        instance.metadata.setdefault("name", os.path.splitext(os.path.basename(p))[0])
        instances.append(instance)
    return instances


# --- subcommand implementations ---------------------------------------------

def cmd_generate(args):
    out_dir = _out_path(args.out, "--out directory")
    os.makedirs(out_dir, exist_ok=True)
    params = _generator_params(args)
    budget = None
    if args.certify_expansions:
        budget = SearchBudget(max_expansions=args.certify_expansions)
    for i in range(args.count):
        instance = domains.generate(args.domain, params, seed=args.seed + i,
                                    certify=not args.no_certify, certify_budget=budget)
        text = domains.serialize_instance(instance)
        _atomic_write_text(os.path.join(out_dir, f"{i:04d}.txt"), text)
    print(f"generated {args.count} {args.domain} instance(s) in {out_dir}")
    return 0


def cmd_oracle(args):
    instances = _load_instances(args.instances)
    budget = _budget(args, 2_000_000, 300.0)
    pairs = []
    for instance in instances:
        plan = oracle_solve(instance, budget=budget)
        pairs.append((instance, plan))
    dataset_io.save_plans(pairs, args.out, tier=args.tier, source="oracle")
    lengths = [p.length for _, p in pairs]
    print(f"solved {len(pairs)} instance(s); plan lengths {min(lengths)}..{max(lengths)}; "
          f"wrote {args.out}")
    return 0


def cmd_dataset(args):
    from .training import Dataset

    dataset = Dataset(include_goal_samples=not args.no_goal_samples)
    for path in args.plans:
        loaded = dataset_io.load_dataset(path)
        for entry in loaded.entries:
            dataset.extend([(entry.instance, entry.plan)], tier=entry.tier, source=entry.source)
    dataset_io.save_dataset(dataset, args.out)
    print(f"dataset: {len(dataset.entries)} plan(s), {len(dataset)} sample(s) -> {args.out}")
    return 0


def cmd_train(args):
    dataset = dataset_io.load_dataset(args.dataset)
    if not dataset.entries:
        raise UsageError("dataset has no plans")
    domain = dataset.entries[0].instance.domain
    head = args.head
    if head == "auto":
        head = "single" if domain == "floortile" else "dual"
    build = ModelConfig.desk if args.scale == "desk" else ModelConfig
    config = build(
        input_channels=domains.encoded_channels(domain),
        action_count=domains.action_count(domain),
        head_mode=head,
        agent_slots=domains.agent_count(domain),
    )
    model = build_model(config, seed=args.seed)
    tconfig = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                          batch_size=args.batch_size, policy_weight=args.policy_weight,
                          seed=args.seed, val_fraction=args.val_fraction)
    history = train(model, dataset, tconfig)
    out_dir = _out_path(args.out, "--out checkpoint directory")
    checkpoint.save_checkpoint(model, out_dir)
    keys = ["epoch", "steps", "train_loss", "train_mae", "train_ce", "val_loss", "val_mae"]
    lines = [",".join(keys)]
    for row in history:
        lines.append(",".join("" if row.get(k) is None else f"{row.get(k):.6f}" if isinstance(row.get(k), float) else str(row.get(k))
                              for k in keys))
    _atomic_write_text(os.path.join(out_dir, "metrics.csv"), "\n".join(lines) + "\n")
    last = history[-1]
    print(f"trained {domain} model ({head} head) for {len(history)} epoch(s): "
          f"train_mae={last['train_mae']:.4f}"
          + (f" val_mae={last['val_mae']:.4f}" if "val_mae" in last else "")
          + f"; checkpoint -> {out_dir}")
    return 0


def cmd_evaluate(args):
    instances = _load_instances(args.instances)
    budget = _budget(args, 200_000, 60.0)
    model = None
    heuristic = None
    if args.solver == "coat":
        if not args.checkpoint:
            raise UsageError("--checkpoint is required for the coat solver")
        model = checkpoint.load_checkpoint(args.checkpoint)
    elif args.solver == "blind":
        heuristic = lambda state: 0.0
    else:  # oracle-guided baseline
        heuristic = None
    records = []
    if args.solver == "oracle":
        for instance in instances:
            h = domains.admissible_heuristic(instance)
            summary = evaluate(None, [instance], budget, solver="oracle", heuristic=h,
                               tier=args.tier, workers=1)
            records.extend(summary.records)
        solved = sum(r.solved for r in records)
        coverage = solved / len(records)
    else:
        summary = evaluate(model, instances, budget, solver=args.solver,
                           heuristic=heuristic, tier=args.tier, workers=_workers())
        records = summary.records
        coverage = summary.coverage
    if args.out:
        report.write_records_csv(records, args.out)
    solved_lengths = [r.plan_length for r in records if r.solved]
    avg_len = sum(solved_lengths) / len(solved_lengths) if solved_lengths else float("nan")
    print(f"{args.solver}: coverage {coverage:.3f} ({sum(r.solved for r in records)}/{len(records)}), "
          f"avg plan length {avg_len:.2f}"
          + (f"; rows -> {args.out}" if args.out else ""))
    return 0


def _parse_sizes(tokens):
    sizes = []
    for token in tokens:
        try:
            h, w = token.lower().split("x")
            sizes.append((int(h), int(w)))
        except ValueError:
            raise UsageError(f"bad size {token!r}; expected HxW like 8x8") from None
    return sizes


def cmd_curriculum(args):
    model = checkpoint.load_checkpoint(args.checkpoint)
    dataset = dataset_io.load_dataset(args.dataset)
    tconfig = TrainConfig(curriculum_learning_rate=args.lr, finetune_epochs=args.epochs,
                          batch_size=args.batch_size, policy_weight=args.policy_weight,
                          seed=args.seed, val_fraction=args.val_fraction)
    budget = _budget(args, 20_000, 60.0)
    tiers = []
    if args.domain == "sokoban":
        if not args.boxes:
            raise UsageError("sokoban curriculum needs --boxes")
        for boxes in args.boxes:
            params = SokobanParams(args.height, args.width, boxes=boxes)
            tiers.append(CurriculumTier(f"{boxes}b", "sokoban", params, args.count,
                                        args.seed, budget, difficulty=float(boxes)))
    else:
        if not args.sizes:
            raise UsageError(f"{args.domain} curriculum needs --sizes")
        for h, w in _parse_sizes(args.sizes):
            if args.domain == "maze":
                params = MazeParams(h, w, teleport_pairs=args.teleports)
            else:
                params = FloorTileParams(h, w)
            tiers.append(CurriculumTier(f"{h}x{w}", args.domain, params, args.count,
                                        args.seed, budget, difficulty=float(h * w)))
    lines = ["tier,attempted,solved,coverage_before,coverage_after,dataset_before,dataset_after"]
    for tier in tiers:
        model, dataset, round_report = curriculum_round(model, tier, dataset, tconfig)
        lines.append(f"{round_report.tier_label},{round_report.attempted},{round_report.solved},"
                     f"{round_report.coverage_before:.4f},{round_report.coverage_after:.4f},"
                     f"{round_report.dataset_before},{round_report.dataset_after}")
        print(f"tier {round_report.tier_label}: solved {round_report.solved}/{round_report.attempted}, "
              f"coverage {round_report.coverage_before:.2f} -> {round_report.coverage_after:.2f}, "
              f"dataset {round_report.dataset_before} -> {round_report.dataset_after}")
    checkpoint.save_checkpoint(model, args.out_checkpoint)
    dataset_io.save_dataset(dataset, args.out_dataset)
    if args.report:
        _atomic_write_text(args.report, "\n".join(lines) + "\n")
    return 0


def cmd_export_pddl(args):
    instances = _load_instances(args.instance)
    domain_text, problem_text = pddl.export_pddl(instances[0])
    out_dir = _out_path(args.out, "--out directory")
    os.makedirs(out_dir, exist_ok=True)
    _atomic_write_text(os.path.join(out_dir, "domain.pddl"), domain_text)
    _atomic_write_text(os.path.join(out_dir, "problem.pddl"), problem_text)
    print(f"wrote {out_dir}/domain.pddl and {out_dir}/problem.pddl")
    return 0


def cmd_report(args):
    rows = []
    for path in args.results:
        rows.extend(report.read_records_csv(path))
    out_dir = _out_path(args.out_dir, "--out-dir")
    table = report.write_report(rows, out_dir)
    print(table, end="")
    return 0


def cmd_inspect(args):
    if args.checkpoint:
        model = checkpoint.load_checkpoint(args.checkpoint)
        print(f"checkpoint {args.checkpoint}")
        print(f"  config: {model.config}")
        print(f"  parameters: {len(model.params)} tensors, {model.parameter_count()} values")
    if args.instance:
        for instance in _load_instances(args.instance):
            print(domains.serialize_instance(instance), end="")
            if "oracle_length" in instance.metadata:
                print(f"# oracle length {instance.metadata['oracle_length']}")
    if args.dataset:
        dataset = dataset_io.load_dataset(args.dataset)
        tiers = sorted({e.tier for e in dataset.entries})
        print(f"dataset {args.dataset}: {len(dataset.entries)} plan(s), {len(dataset)} sample(s), "
              f"tiers {tiers}")
    if not (args.checkpoint or args.instance or args.dataset):
        raise UsageError("nothing to inspect; pass --checkpoint, --instance or --dataset")
    return 0


# --- parser -------------------------------------------------------------------

def _add_budget_flags(p, expansions_help="expansion budget", seconds_help="wall-clock budget (s)"):
    p.add_argument("--budget-expansions", type=int, default=None, help=expansions_help)
    p.add_argument("--budget-seconds", type=float, default=None, help=seconds_help)


def build_parser():
    parser = argparse.ArgumentParser(prog="coatplan",
                                     description="grid-planning benchmark with learned heuristics")
    parser.add_argument("--config", default=None, help="KEY=VALUE file with flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate solvable instances")
    p.add_argument("--domain", required=True, choices=domains.DOMAIN_TAGS)
    p.add_argument("--size", type=int, default=None, help="square grid size")
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--boxes", type=int, default=3, help="sokoban box count")
    p.add_argument("--wall-density", type=float, default=0.12, help="sokoban interior wall rate")
    p.add_argument("--teleports", type=int, default=4, help="maze teleport pairs")
    p.add_argument("--no-certify", action="store_true", help="skip oracle certificates")
    p.add_argument("--certify-expansions", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("oracle", help="solve instances optimally, writing a plans file")
    p.add_argument("--instances", required=True, help="instance file or directory")
    p.add_argument("--out", required=True)
    p.add_argument("--tier", type=float, default=0.0)
    _add_budget_flags(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("dataset", help="merge plan files into a training dataset")
    p.add_argument("--plans", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-goal-samples", action="store_true")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train a model on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", default=None, help="checkpoint directory")
    p.add_argument("--scale", choices=("desk", "paper"), default="desk")
    p.add_argument("--head", choices=("dual", "single", "auto"), default="auto")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--policy-weight", type=float, default=1.0)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run A* over instances, emitting result rows")
    p.add_argument("--instances", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--solver", choices=("coat", "blind", "oracle"), default="coat")
    p.add_argument("--tier", default="")
    p.add_argument("--out", default=None, help="per-instance CSV path")
    _add_budget_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("curriculum", help="bootstrap rounds on harder tiers")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--domain", required=True, choices=domains.DOMAIN_TAGS)
    p.add_argument("--sizes", nargs="*", default=None, help="tier sizes, e.g. 8x8 10x10")
    p.add_argument("--boxes", nargs="*", type=int, default=None, help="sokoban tier box counts")
    p.add_argument("--height", type=int, default=10, help="sokoban tier grid height")
    p.add_argument("--width", type=int, default=10, help="sokoban tier grid width")
    p.add_argument("--teleports", type=int, default=4)
    p.add_argument("--count", type=int, default=30, help="instances per tier")
    p.add_argument("--epochs", type=int, default=10, help="fine-tune epochs per round")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-4, help="curriculum learning rate")
    p.add_argument("--policy-weight", type=float, default=1.0)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--out-dataset", required=True)
    p.add_argument("--report", default=None, help="round report CSV path")
    _add_budget_flags(p, expansions_help="self-solve expansion budget per instance")
    p.set_defaults(func=cmd_curriculum)

    p = sub.add_parser("export-pddl", help="write PDDL domain/problem for an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_export_pddl)

    p = sub.add_parser("report", help="aggregate result CSVs into tables")
    p.add_argument("--results", nargs="+", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("inspect", help="summarize checkpoints, instances or datasets")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--instance", default=None)
    p.add_argument("--dataset", default=None)
    p.set_defaults(func=cmd_inspect)

    return parser


def _apply_config_file(parser, argv):
    """Pre-scan for --config and install its KEY=VALUE pairs as subcommand
    flag defaults (flag types are respected)."""
    if "--config" not in argv:
        return
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise UsageError("--config needs a file path")
    path = argv[idx + 1]
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected KEY=VALUE, got {line!r}")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    for action in parser._subparsers._group_actions[0].choices.values():
        defaults = {}
        for act in action._actions:
            if act.dest in values:
                raw = values[act.dest]
                defaults[act.dest] = act.type(raw) if act.type else raw
        if defaults:
            action.set_defaults(**defaults)


def run_command(argv):
    parser = build_parser()
    try:
        _apply_config_file(parser, list(argv))
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help and usage errors
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CoatPlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
