"""Command-line entry point: ``socialcue run | compare | metrics``.

Exit status is 0 on success or equivalence, 1 when compared logs differ and
2 on any error.
"""
import argparse
import difflib
from importlib import resources
import os
import sys

from .config import RunConfig, load_config, with_mute
from .errors import SocialCueError
from .logs import parse_log
from .metrics import compare_event_logs
from .pipeline import run_scenario
from .simulator import load_scenario

EXIT_OK, EXIT_DIFF, EXIT_ERROR = 0, 1, 2


def bundled_scenarios():
    root = resources.files("socialcue") / "data" / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".scn"))


def read_scenario_text(name_or_path):
    if os.path.exists(name_or_path):
        with open(name_or_path, encoding="utf-8") as fh:
            return fh.read()
    res = resources.files("socialcue") / "data" / "scenarios" / f"{name_or_path}.scn"
    if res.is_file():
        return res.read_text(encoding="utf-8")
    raise FileNotFoundError(f"no scenario file or bundled scenario named {name_or_path!r}")


def golden_text(name, variant):
    res = resources.files("socialcue") / "data" / "golden" / f"{name}.{variant}.log"
    return res.read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# compare


def diff_logs(text_a, text_b, tol_ms=0) -> list:
    """Field-aware differences between two logs; empty when equivalent.

    Records are aligned on kind and fields (sequence numbers are not part of
    the alignment, so one inserted record is reported once). Aligned records
    must have timestamps within ``tol_ms``, and their sequence numbers may
    differ only by the shift that earlier insertions and deletions explain.
    """
    a, b = parse_log(text_a), parse_log(text_b)
    ka = [(r.kind, r.fields) for r in a]
    kb = [(r.kind, r.fields) for r in b]
    out = []
    shift = 0
    sm = difflib.SequenceMatcher(None, ka, kb, autojunk=False)
    for op, i0, i1, j0, j1 in sm.get_opcodes():
        if op == "equal":
            for ra, rb in zip(a[i0:i1], b[j0:j1]):
                if abs(ra.timestamp - rb.timestamp) > tol_ms:
                    out.append(
                        f"seq {ra.seq}/{rb.seq} {ra.kind}: timestamp {ra.timestamp} vs {rb.timestamp} ms"
                    )
                elif rb.seq - ra.seq != shift:
                    out.append(f"seq {ra.seq}/{rb.seq} {ra.kind}: sequence numbers differ")
            continue
        shift += (j1 - j0) - (i1 - i0)
        for r in a[i0:i1]:
            out.append(f"seq {r.seq} {r.kind}: only in A: {r.timestamp} {' '.join(map(str, r.fields))}".rstrip())
        for r in b[j0:j1]:
            out.append(f"seq {r.seq} {r.kind}: only in B: {r.timestamp} {' '.join(map(str, r.fields))}".rstrip())
    return out


# ---------------------------------------------------------------------------
# commands


def _cmd_run(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.mute:
        cfg = with_mute(cfg)
    scenario = load_scenario(read_scenario_text(args.scenario))
    result = run_scenario(
        scenario,
        args.variant,
        cfg,
        seed=args.seed,
        deterministic=args.deterministic,
        faces=not args.no_faces,
        frames=args.frames,
    )
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        files = {
            "events.log": result.event_log,
            "commands.log": result.command_log,
            "report.txt": result.report.to_table(),
            "report.kv": result.report.to_kv(),
        }
        for name, text in files.items():
            with open(os.path.join(args.out, name), "w", encoding="utf-8") as fh:
                fh.write(text)
        print(result.report.to_table(), end="")
    else:
        sys.stdout.write(result.command_log)
        sys.stderr.write(result.report.to_table())
    return EXIT_OK


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _cmd_compare(args):
    diffs = diff_logs(_read(args.a), _read(args.b), args.tol_ms)
    for d in diffs:
        print(d)
    return EXIT_DIFF if diffs else EXIT_OK


def _cmd_metrics(args):
    report = compare_event_logs(_read(args.log), _read(args.truth))
    print(report.to_table(), end="")
    print(report.to_kv(), end="")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="socialcue", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario through the whole pipeline")
    run.add_argument("--scenario", required=True, help=f"scenario file, or one of: {', '.join(bundled_scenarios())}")
    run.add_argument("--variant", choices=("audio", "haptics"), default="audio")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--deterministic", action="store_true", help="single-threaded, in-order execution")
    run.add_argument("--mute", action="store_true", help="quiet mode: no speech or spearcons")
    run.add_argument("--out", help="directory for events.log, commands.log and the report")
    run.add_argument("--config", help="key = value configuration file")
    run.add_argument("--no-faces", action="store_true", help="skip face rendering; take identities from the script")
    frames = run.add_mutually_exclusive_group()
    frames.add_argument("--frames", dest="frames", action="store_true", default=None,
                        help="render 640x480 frames and stabilize them")
    frames.add_argument("--no-frames", dest="frames", action="store_false")

    cmp_ = sub.add_parser("compare", help="field-aware diff of two logs")
    cmp_.add_argument("a")
    cmp_.add_argument("b")
    cmp_.add_argument("--tol-ms", type=int, default=0, help="timestamp tolerance in ms")

    met = sub.add_parser("metrics", help="gaze precision, recall and latency of an event log")
    met.add_argument("log")
    met.add_argument("--truth", required=True)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "compare": _cmd_compare, "metrics": _cmd_metrics}[args.command]
    try:
        return handler(args)
    except (SocialCueError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
