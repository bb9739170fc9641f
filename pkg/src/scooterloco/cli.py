"""Command-line entry points.

Exit codes: 0 ok, 2 usage, 3 port in use, 4 file not found, 5 malformed
input (config, map, params, trace or responses).
"""
import argparse
import errno
import json
import logging
import os
import sys
import time

from . import host
from ._accel import BACKEND
from .analysis import reports
from .analysis.questionnaires import ResponseError
from .analysis.stats import InsufficientData
from .device import DeviceCalibration, InvalidTrace, LiveEmitter, load_trace, run_trace, save_trace
from .mapping import MotionParams, Source, load_params
from .pilot import Pilot
from .protocol import DEFAULT_PORT, FrameSender
from .tasks import MapError, Session, default_map, load_map

EXIT_OK = 0
EXIT_PORT_IN_USE = 3
EXIT_NOT_FOUND = 4
EXIT_MALFORMED = 5

log = logging.getLogger("scooterloco")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load_city(path):
    return load_map(path) if path else default_map()


def _load_params(path):
    return load_params(path) if path else MotionParams()


def _print_report(report):
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")


# -- subcommands ---------------------------------------------------------------


def cmd_serve(args):
    from .server import serve_session

    cfg = host.load_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    try:
        report = serve_session(cfg, autostart=args.autostart, speed=args.speed)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise CliError(EXIT_PORT_IN_USE, f"port in use: {exc}") from None
        raise
    _print_report(report)
    return EXIT_OK


def cmd_run(args):
    city = _load_city(args.map)
    params = _load_params(args.params)
    if args.goal and args.goal not in city.goal_ids:
        raise CliError(EXIT_MALFORMED, f"unknown goal {args.goal!r}; map has {', '.join(city.goal_ids)}")
    report, _ = host.run_headless(
        args.trace, city, params, Source(args.condition), args.seed, args.out, args.participant, goal_id=args.goal
    )
    _print_report(report)
    return EXIT_OK if report["complete"] else 1


def cmd_pilot(args):
    """Drive the scripted pilot closed-loop and save its device commands as
    a trace. ``run`` with the same map, params and seed replays it."""
    city = _load_city(args.map)
    params = _load_params(args.params)
    condition = Source(args.condition)
    if args.goal:
        if args.goal not in city.goal_ids:
            raise CliError(EXIT_MALFORMED, f"unknown goal {args.goal!r}; map has {', '.join(city.goal_ids)}")
        session = host.single_goal_session(city, args.participant, condition, args.goal, args.seed)
    else:
        session = Session(city, args.participant, condition, args.seed)
    pipe = host.Pipeline(city, params, session)
    recorder = host.TraceRecorder(pipe.calib.sample_rate_hz)
    host.run_pilot_session(pipe, Pilot(params, lookahead=args.lookahead, pace=args.pace), recorder=recorder)
    trace = recorder.trace()
    header = f"pilot trace: goals {' '.join(session.trial_order)}; seed {args.seed}"
    if args.out:
        save_trace(trace, args.out, header)
        log.info("wrote %s (%d keyframes)", args.out, len(trace.keyframes))
    _print_report(host.session_report(session))
    return EXIT_OK if not any(e.aborted for e in session.logs) else 1


def cmd_analyze(args):
    logs = reports.load_log_dir(args.logs)
    if not logs:
        raise CliError(EXIT_NOT_FOUND, f"no trial logs under {args.logs}")
    responses = reports.load_responses(args.responses) if args.responses else None
    report = reports.analyze(logs, responses, tlx_range=tuple(args.tlx_range))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "analysis.json"), "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        with open(os.path.join(args.out, "analysis.txt"), "w") as fh:
            fh.write(reports.format_table(report))
    if args.json:
        _print_report(report)
    else:
        sys.stdout.write(reports.format_table(report))
    return EXIT_OK


def cmd_simulate_cohort(args):
    city = _load_city(args.map)
    params = _load_params(args.params)
    t0 = time.perf_counter()
    logs = host.simulate_cohort(city, params, args.n, args.seed)
    elapsed = time.perf_counter() - t0
    per_participant = {}
    for e in logs:
        per_participant[e.participant_id] = per_participant.get(e.participant_id, 0) + 1
    orders = {}
    for e in logs:
        if e.block == 0:
            orders.setdefault(e.participant_id, e.condition)
    summary = {
        "participants": len(per_participant),
        "trial_logs": len(logs),
        "per_participant": sorted(set(per_participant.values())),
        "first_condition_counts": {c.value: sum(v == c.value for v in orders.values()) for c in Source},
        "aborted": sum(e.aborted for e in logs),
        "wall_s": round(elapsed, 2),
    }
    if args.out:
        host.write_outputs(logs, args.out)
    _print_report(summary)
    return EXIT_OK


def cmd_emulate(args):
    """Send a trace to a host as UDP datagrams (real time unless --fast)."""
    trace = load_trace(args.trace)
    calib = DeviceCalibration()
    with FrameSender(args.host, args.port) as sender:
        if args.fast:
            n = 0
            for frame in run_trace(trace, calib):
                sender.send(frame)
                n += 1
        else:
            emitter = LiveEmitter(sender.send, calib, args.speed)
            start = time.perf_counter()
            duration = trace.keyframes[-1][0]
            emitter.start()
            while (elapsed := (time.perf_counter() - start) * args.speed) < duration:
                deg, _ = trace.sample(elapsed)
                emitter.command(deg, trace.window_speed(elapsed, elapsed + calib.period_s))
                time.sleep(calib.period_s / args.speed / 2)
            emitter.stop()
            emitter.join()
            n = emitter.emu.seq
    log.info("sent %d frames to %s:%d", n, args.host, args.port)
    return EXIT_OK


# -- parser --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="scooterloco", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", help="live session: UDP device input plus WebSocket clients")
    s.add_argument("--config", required=True)
    s.add_argument("--autostart", action="store_true", help="start the session without waiting for a client")
    s.add_argument("--speed", type=float, default=1.0, help="tick rate multiplier")
    s.add_argument("--out", help="override the config output directory")
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("run", help="headless session replaying a device trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--map")
    s.add_argument("--params")
    s.add_argument("--condition", choices=[c.value for c in Source], default="scooter")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--participant", default="P01")
    s.add_argument("--goal", help="single goal id, for traces made with pilot --goal")
    s.add_argument("--out")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("pilot", help="generate a device trace with the scripted pilot")
    s.add_argument("--map")
    s.add_argument("--params")
    s.add_argument("--goal", help="single goal id; default is the full session")
    s.add_argument("--condition", choices=[c.value for c in Source], default="scooter")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--participant", default="P01")
    s.add_argument("--lookahead", type=float, default=8.0)
    s.add_argument("--pace", type=float, default=1.0)
    s.add_argument("--out", help="trace file to write")
    s.set_defaults(func=cmd_pilot)

    s = sub.add_parser("analyze", help="statistics over trial logs and questionnaire responses")
    s.add_argument("--logs", required=True, help="trial_logs.jsonl or a directory of them")
    s.add_argument("--responses", help="CSV: participant,condition,kind,item_index,value")
    s.add_argument("--tlx-range", type=int, nargs=2, default=[1, 7], metavar=("LO", "HI"))
    s.add_argument("--json", action="store_true", help="print JSON instead of the table")
    s.add_argument("--out")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate-cohort", help="counterbalanced synthetic cohort driven by the pilot")
    s.add_argument("--n", type=int, default=14)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--map")
    s.add_argument("--params")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate_cohort)

    s = sub.add_parser("emulate", help="send a trace to a host over UDP")
    s.add_argument("--trace", required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=int(os.environ.get("LOCO_UDP_PORT", DEFAULT_PORT)))
    s.add_argument("--speed", type=float, default=1.0)
    s.add_argument("--fast", action="store_true", help="send as fast as possible")
    s.set_defaults(func=cmd_emulate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    log.debug("kernel backend: %s", BACKEND)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except (host.ConfigError, MapError, InvalidTrace, ResponseError, reports.ResponseFileError,
            InsufficientData, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            print(f"error: port in use: {exc}", file=sys.stderr)
            return EXIT_PORT_IN_USE
        raise


if __name__ == "__main__":
    sys.exit(main())
