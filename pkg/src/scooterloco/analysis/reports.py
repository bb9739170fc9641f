"""Trial summaries, response files and the combined analysis report."""
import csv
import glob
import json
import logging
import os
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..tasks import TrialLog, read_logs
from . import questionnaires as q
from .stats import DegenerateSample, InsufficientData, PairedSample, select_test

log = logging.getLogger(__name__)

CONDITIONS = ("scooter", "joystick")


@dataclass(frozen=True)
class Descriptives:
    n: int
    mean: float
    sd: float

    def to_dict(self):
        return {"n": self.n, "M": self.mean, "SD": self.sd}


def describe(values):
    v = np.asarray(values, dtype=np.float64)
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return Descriptives(int(v.size), float(v.mean()) if v.size else float("nan"), sd)


@dataclass(frozen=True)
class TrialSummary:
    per_condition: dict  # condition -> Descriptives of per-participant sums
    sample: PairedSample
    participants: tuple
    excluded: tuple
    sums: dict  # (participant, condition) -> seconds


def summarize_trials(logs, conditions=CONDITIONS):
    """Per-participant completion-time sums for each condition, plus the
    paired sample. Participants missing a condition are excluded."""
    sums = defaultdict(float)
    seen = defaultdict(set)
    for entry in logs:
        if entry.aborted:
            continue
        sums[(entry.participant_id, entry.condition)] += entry.completion_time_s
        seen[entry.participant_id].add(entry.condition)
    a_label, b_label = conditions
    included, excluded = [], []
    for pid in sorted(seen):
        if {a_label, b_label} <= seen[pid]:
            included.append(pid)
        else:
            excluded.append(pid)
            log.warning("participant %s lacks a condition (has %s); excluded", pid, sorted(seen[pid]))
    a = [sums[(p, a_label)] for p in included]
    b = [sums[(p, b_label)] for p in included]
    if len(included) < 3:
        raise InsufficientData(f"only {len(included)} participants have both conditions")
    return TrialSummary(
        {a_label: describe(a), b_label: describe(b)},
        PairedSample(a, b, a_label, b_label),
        tuple(included),
        tuple(excluded),
        {k: v for k, v in sums.items() if k[0] in included},
    )


def load_log_dir(path):
    """Every TrialLog under ``path`` (a .jsonl file or a directory tree)."""
    if os.path.isfile(path):
        return read_logs(path)
    if not os.path.isdir(path):
        raise FileNotFoundError(path)
    logs = []
    for fn in sorted(glob.glob(os.path.join(path, "**", "*.jsonl"), recursive=True)):
        logs.extend(read_logs(fn))
    return logs


# -- questionnaire responses --------------------------------------------------------


class ResponseFileError(ValueError):
    pass


def load_responses(path):
    """CSV rows ``participant,condition,kind,item_index,value`` grouped into
    {(participant, condition, kind): [values in item order]}."""
    grouped = defaultdict(dict)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"participant", "condition", "kind", "item_index", "value"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ResponseFileError(f"{path}: header must contain {sorted(need)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                idx = int(row["item_index"])
                value = float(row["value"])
            except ValueError:
                raise ResponseFileError(f"{path}:{lineno}: bad item_index or value") from None
            key = (row["participant"].strip(), row["condition"].strip(), row["kind"].strip().lower())
            if idx in grouped[key]:
                raise ResponseFileError(f"{path}:{lineno}: duplicate item {idx} for {key}")
            grouped[key][idx] = value
    out = {}
    for key, items in grouped.items():
        idxs = sorted(items)
        if idxs != list(range(1, len(idxs) + 1)):
            raise ResponseFileError(f"{key}: item indices must run 1..n, got {idxs}")
        out[key] = [items[i] for i in idxs]
    return out


def score_responses(responses, tlx_range=q.TLX_DEFAULT_RANGE):
    """{(participant, condition): {measure_name: score}} from grouped responses."""
    scores = defaultdict(dict)
    for (pid, cond, kind), values in responses.items():
        opts = {"item_range": tlx_range} if kind == q.Kind.TLX.value else {}
        result = q.score_questionnaire(kind, values, **opts)
        for name, score in result.items():
            if name == "item_range":
                continue
            scores[(pid, cond)][f"{kind}.{name}" if name != kind else kind] = score
    return dict(scores)


def compare_measures(scores, conditions=CONDITIONS, alpha=0.05):
    """One gated test per measure that both conditions share."""
    a_label, b_label = conditions
    pids = sorted({p for p, _ in scores})
    measures = sorted({m for v in scores.values() for m in v})
    reports, skipped = [], {}
    for m in measures:
        pairs = [
            (scores[(p, a_label)][m], scores[(p, b_label)][m])
            for p in pids
            if m in scores.get((p, a_label), {}) and m in scores.get((p, b_label), {})
        ]
        try:
            sample = PairedSample([x for x, _ in pairs], [y for _, y in pairs], a_label, b_label)
            reports.append(select_test(sample, m, alpha))
        except (InsufficientData, DegenerateSample) as exc:
            skipped[m] = str(exc)
    return reports, skipped


# -- combined report -----------------------------------------------------------------


def analyze(logs, responses=None, conditions=CONDITIONS, tlx_range=q.TLX_DEFAULT_RANGE, alpha=0.05):
    summary = summarize_trials(logs, conditions)
    out = {
        "participants": list(summary.participants),
        "excluded": list(summary.excluded),
        "completion_time": {
            "descriptives": {c: d.to_dict() for c, d in summary.per_condition.items()},
            "test": _safe_test(summary.sample, "completion_time_s", alpha),
        },
        "notes": [],
    }
    if responses is not None:
        scores = score_responses(responses, tlx_range)
        reports, skipped = compare_measures(scores, conditions, alpha)
        out["questionnaires"] = [r.to_dict() for r in reports]
        out["skipped"] = skipped
        if any(k == q.Kind.TLX.value for _, _, k in responses):
            out["notes"].append(f"raw TLX item range assumed {list(tlx_range)}")
    return out


def _safe_test(sample, measure, alpha):
    try:
        return select_test(sample, measure, alpha).to_dict()
    except DegenerateSample as exc:
        return {"measure": measure, "error": "degenerate-sample", "message": str(exc)}


def _fmt(v, digits=3):
    if v is None:
        return "-"
    if isinstance(v, float):
        if v != 0 and abs(v) < 10 ** -digits:
            return f"{v:.1e}"
        return f"{v:.{digits}f}"
    return str(v)


def format_table(report):
    """Human-readable rendering of ``analyze`` output."""
    lines = []
    ct = report["completion_time"]
    lines.append("Completion time per participant (s)")
    for cond, d in ct["descriptives"].items():
        lines.append(f"  {cond:<10} n={d['n']:<3} M={d['M']:.1f}  SD={d['SD']:.1f}")
    if report["excluded"]:
        lines.append(f"  excluded: {', '.join(report['excluded'])}")
    rows = [ct["test"]] + report.get("questionnaires", [])
    header = f"{'measure':<28}{'test':<10}{'SW W':>7}{'SW p':>8}{'stat':>9}{'df':>4}{'p':>9}{'effect':>8}  kind"
    lines.append("")
    lines.append(header)
    lines.append("-" * len(header))
    for r in rows:
        if "error" in r:
            lines.append(f"{r['measure']:<28}{r['error']}")
            continue
        lines.append(
            f"{r['measure']:<28}{r['chosen_test']:<10}{_fmt(r['normality']['W']):>7}{_fmt(r['normality']['p']):>8}"
            f"{_fmt(r['statistic'], 2):>9}{_fmt(r['df']):>4}{_fmt(r['p_value']):>9}{_fmt(r['effect_size'], 2):>8}"
            f"  {r['effect_size_kind']}{' *' if r['significant'] else ''}"
        )
    for m, why in report.get("skipped", {}).items():
        lines.append(f"{m:<28}skipped: {why}")
    for note in report.get("notes", []):
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


# -- published aggregates ------------------------------------------------------------


def load_descriptives(path):
    """Aggregate-only fixture: {"measure": ..., "conditions": {name: {n, M, SD}}}."""
    with open(path) as fh:
        doc = json.load(fh)
    return doc["measure"], {c: Descriptives(int(d["n"]), float(d["M"]), float(d["SD"])) for c, d in doc["conditions"].items()}


def format_descriptives(measure, per_condition, digits=1):
    parts = [f"{c}: M = {d.mean:.{digits}f}, SD = {d.sd:.{digits}f} (n = {d.n})" for c, d in per_condition.items()]
    return f"{measure}: " + "; ".join(parts)


def logs_from_dicts(rows):
    return [TrialLog.from_dict(r) for r in rows]
