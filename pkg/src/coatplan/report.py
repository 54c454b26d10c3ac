"""Per-instance result CSVs and the aligned coverage/plan-length tables
(tiers as rows, solvers as column groups)."""

from __future__ import annotations

import csv
import os

from .errors import ParseError, UsageError

CSV_COLUMNS = ("instance_id", "tier", "solver", "solved",
               "plan_length", "expansions", "elapsed_ms", "seed")
REPORT_VERSION = 1


def write_records_csv(records, path):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([
                r.instance_id, r.tier, r.solver, int(r.solved),
                "" if r.plan_length is None else r.plan_length,
                r.expansions, f"{r.elapsed_ms:.3f}",
                "" if r.seed is None else r.seed,
            ])
    os.replace(tmp, path)


def read_records_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"results CSV missing columns: {sorted(missing)}")
        for row in reader:
            rows.append({
                "instance_id": row["instance_id"],
                "tier": row["tier"],
                "solver": row["solver"],
                "solved": row["solved"] == "1",
                "plan_length": int(row["plan_length"]) if row["plan_length"] else None,
                "expansions": int(row["expansions"]),
                "elapsed_ms": float(row["elapsed_ms"]),
                "seed": row["seed"],
            })
    return rows


def aggregate(rows):
    """(tier, solver) -> {coverage, avg_plan_length, avg_expansions, solved, total}."""
    groups = {}
    for row in rows:
        groups.setdefault((row["tier"], row["solver"]), []).append(row)
    summary = {}
    for key, members in groups.items():
        solved = [m for m in members if m["solved"]]
        lengths = [m["plan_length"] for m in solved if m["plan_length"] is not None]
        summary[key] = {
            "coverage": len(solved) / len(members),
            "avg_plan_length": sum(lengths) / len(lengths) if lengths else None,
            "avg_expansions": sum(m["expansions"] for m in members) / len(members),
            "solved": len(solved),
            "total": len(members),
        }
    return summary


def _fmt(value, digits=2):
    return "-" if value is None else f"{value:.{digits}f}"


def render_table(rows):
    """Aligned text table: one row per tier, per-solver coverage / average
    plan length / average expansions columns. Pure function of the rows."""
    if not rows:
        raise UsageError("no records to report")
    summary = aggregate(rows)
    tiers = sorted({tier for tier, _ in summary})
    solvers = sorted({solver for _, solver in summary})
    header = ["tier"]
    for solver in solvers:
        header += [f"{solver}/cov", f"{solver}/len", f"{solver}/exp"]
    body = []
    for tier in tiers:
        row = [tier]
        for solver in solvers:
            cell = summary.get((tier, solver))
            if cell is None:
                row += ["-", "-", "-"]
            else:
                row += [_fmt(cell["coverage"]), _fmt(cell["avg_plan_length"]),
                        _fmt(cell["avg_expansions"], 1)]
        body.append(row)
    widths = [max(len(str(line[i])) for line in [header] + body) for i in range(len(header))]
    lines = []
    for line in [header] + body:
        lines.append("  ".join(str(v).rjust(w) for v, w in zip(line, widths)))
    return "\n".join(lines) + "\n"


def write_summary_csv(rows, path):
    summary = aggregate(rows)
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["format_version", REPORT_VERSION])
        writer.writerow(["tier", "solver", "coverage", "avg_plan_length",
                         "avg_expansions", "solved", "total"])
        for tier, solver in sorted(summary):
            cell = summary[(tier, solver)]
            writer.writerow([
                tier, solver, f"{cell['coverage']:.4f}",
                "" if cell["avg_plan_length"] is None else f"{cell['avg_plan_length']:.4f}",
                f"{cell['avg_expansions']:.2f}", cell["solved"], cell["total"],
            ])
    os.replace(tmp, path)


def write_report(rows, out_dir):
    """Summary CSV plus the aligned text table; regeneration from identical
    rows is byte-identical."""
    os.makedirs(out_dir, exist_ok=True)
    write_summary_csv(rows, os.path.join(out_dir, "summary.csv"))
    table = render_table(rows)
    tmp = os.path.join(out_dir, "table.txt.tmp")
    with open(tmp, "w") as fh:
        fh.write(table)
    os.replace(tmp, os.path.join(out_dir, "table.txt"))
    return table
