"""Evaluation metrics for a pipeline run."""
from dataclasses import dataclass, fields
import math

from .logs import parse_log


@dataclass
class MetricsReport:
    yaw_bin_accuracy: float = None
    id_rank1: float = None
    unknown_rejection_rate: float = None
    gaze_event_precision: float = None
    gaze_event_recall: float = None
    mean_gaze_latency: float = None  # ms
    throughput: float = None  # scene-frames/s
    frames: int = 0
    pose_failures: int = 0

    def __post_init__(self):
        for name in ("yaw_bin_accuracy", "id_rank1", "unknown_rejection_rate", "gaze_event_precision", "gaze_event_recall"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} is not a fraction")

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def to_kv(self) -> str:
        return "".join(f"{k}={_kv_value(v)}\n" for k, v in self.items())

    def to_table(self) -> str:
        width = max(len(k) for k, _ in self.items())
        rows = [f"{'metric'.ljust(width)}  value", f"{'-' * width}  -----"]
        for k, v in self.items():
            rows.append(f"{k.ljust(width)}  {_table_value(v)}")
        return "\n".join(rows) + "\n"


def _kv_value(v):
    if v is None:
        return "na"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _table_value(v):
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def parse_report(text) -> dict:
    """Inverse of :meth:`MetricsReport.to_kv`, values as float/int/None."""
    out = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        k, v = line.split("=", 1)
        out[k] = None if v == "na" else (int(v) if v.lstrip("-").isdigit() else float(v))
    return out


def gaze_episodes(records) -> dict:
    """Per-track [start, end] intervals from GazeStart/GazeEnd records (end None while open)."""
    out = {}
    for r in records:
        if r.kind == "GazeStart":
            out.setdefault(r.fields[0], []).append([r.timestamp, None])
        elif r.kind == "GazeEnd":
            eps = out.get(r.fields[0])
            if eps and eps[-1][1] is None:
                eps[-1][1] = r.timestamp
    return {k: [tuple(e) for e in v] for k, v in out.items()}


def _close(ep, end_time):
    s, e = ep
    return s, (end_time if e is None else e)


def match_episodes(predicted: dict, truth: dict, end_time) -> tuple:
    """Interval-overlap matching per track.

    A predicted episode matches a truth episode when their overlap covers at
    least half of the truth interval; each episode matches at most once.
    Episodes still open are closed at ``end_time``.
    Returns (precision, recall, [(track, predicted, truth)] matches). Empty sides
    score 1.0.
    """
    matches = []
    n_pred = sum(len(v) for v in predicted.values())
    n_truth = sum(len(v) for v in truth.values())
    for track in sorted(set(predicted) | set(truth)):
        used = set()
        for tr in truth.get(track, []):
            ts, te = _close(tr, end_time)
            need = 0.5 * (te - ts)  # a zero-length truth interval only has to be touched
            for i, pr in enumerate(predicted.get(track, [])):
                if i in used:
                    continue
                ps, pe = _close(pr, end_time)
                if min(pe, te) - max(ps, ts) >= need:
                    used.add(i)
                    matches.append((track, pr, tr))
                    break
    precision = len(matches) / n_pred if n_pred else 1.0
    recall = len(matches) / n_truth if n_truth else 1.0
    return precision, recall, matches


def compare_event_logs(log_text, truth_text) -> MetricsReport:
    """Gaze precision/recall and start latency of one event log against a reference log."""
    records = parse_log(log_text)
    truth = parse_log(truth_text)
    end = max([r.timestamp for r in records + truth], default=0)
    p, r, matches = match_episodes(gaze_episodes(records), gaze_episodes(truth), end)
    lat = [pr[0] - tr[0] for _, pr, tr in matches]
    return MetricsReport(
        gaze_event_precision=p,
        gaze_event_recall=r,
        mean_gaze_latency=sum(lat) / len(lat) if lat else None,
    )


def fraction(hits, total):
    return hits / total if total else None


def mean_or_none(values):
    values = [v for v in values if not math.isnan(v)]
    return sum(values) / len(values) if values else None
