"""Command-line front end.

Exit codes: 0 success, 2 protocol abort, 3 invalid configuration, 4 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

import numpy as np

from . import belldiag, gf2codes
from .channel import InterceptResend, PauliChannel
from .distill import Schedule, records_to_csv
from .session import SessionParams, key_digest, run_session

EXIT_OK, EXIT_ABORT, EXIT_CONFIG, EXIT_INTERNAL = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _add_session_args(p: argparse.ArgumentParser):
    p.add_argument("--n", type=int, default=1024, help="check bits; 2n qubits are sent")
    p.add_argument("--r", type=int, default=1, help="basis seed repetition count")
    p.add_argument("--p-depol", type=float, default=None, help="depolarizing strength (X, Y, Z each p/3)")
    p.add_argument("--p-x", type=float, default=None)
    p.add_argument("--p-y", type=float, default=None)
    p.add_argument("--p-z", type=float, default=None)
    p.add_argument("--adversary", choices=["none", "intercept-resend"], default="none")
    p.add_argument("--abort-threshold", type=float, default=0.20)
    p.add_argument("--schedule", default="alternating", help="alternating | fixed:BPBB... | adaptive")
    p.add_argument("--handoff-threshold", type=float, default=0.10)
    p.add_argument("--sacrifice-m", type=int, default=None)
    p.add_argument("--min-rounds", type=int, default=0)
    p.add_argument("--failure-target", type=float, default=1e-3)
    p.add_argument("--code-c1", default=None, help="code file for C1")
    p.add_argument("--code-c2", default=None, help="code file for C2")
    p.add_argument("--seed", type=int, default=0)


def _css(args) -> gf2codes.CssPair:
    if (args.code_c1 is None) != (args.code_c2 is None):
        raise ConfigError("--code-c1 and --code-c2 must be given together")
    if args.code_c1 is None:
        return gf2codes.steane_pair()
    return gf2codes.CssPair(gf2codes.load_code(args.code_c1), gf2codes.load_code(args.code_c2))


def _channel(args):
    xyz = (args.p_x, args.p_y, args.p_z)
    if args.adversary == "intercept-resend":
        if args.p_depol or any(v is not None for v in xyz):
            raise ConfigError("--adversary intercept-resend cannot be combined with channel noise")
        return InterceptResend()
    if args.p_depol is not None and any(v is not None for v in xyz):
        raise ConfigError("give either --p-depol or --p-x/--p-y/--p-z, not both")
    if args.p_depol is not None:
        return PauliChannel.depolarizing(args.p_depol)
    if any(v is not None for v in xyz):
        return PauliChannel.from_xyz(*(v or 0.0 for v in xyz))
    return None


def _params(args) -> SessionParams:
    schedule = Schedule.parse(
        args.schedule,
        handoff_threshold=args.handoff_threshold,
        sacrifice_m=args.sacrifice_m,
        min_rounds=args.min_rounds,
    )
    return SessionParams(
        n=args.n,
        r=args.r,
        channel=_channel(args),
        abort_threshold=args.abort_threshold,
        schedule=schedule,
        css=_css(args),
        seed=args.seed,
        failure_target=args.failure_target,
    )


def _config_header(args) -> str:
    items = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}
    return "config: " + " ".join(f"{k}={v}" for k, v in items.items())


def _write(path, text):
    Path(path).write_text(text)


def cmd_simulate(args) -> int:
    params = _params(args)
    out = run_session(params)
    if args.transcript_out:
        _write(args.transcript_out, out.transcript.dumps())
    if args.rounds_out:
        _write(args.rounds_out, records_to_csv(out.records, _config_header(args)))
    print(f"# {_config_header(args)}")
    print(f"status={out.status}")
    print(f"observed_qber={out.observed_qber:.6f}")
    print(f"rounds_executed={out.rounds_executed}")
    print(f"consumed_secret_bits={out.consumed_secret_bits}")
    if not out.completed:
        print(f"abort: {out.reason}", file=sys.stderr)
        return EXIT_ABORT
    if out.alice_key.size != out.bob_key.size:
        raise AssertionError("key lengths differ")
    print(f"key_length={out.alice_key.size}")
    print(f"alice_key_sha256={key_digest(out.alice_key)}")
    print(f"bob_key_sha256={key_digest(out.bob_key)}")
    print(f"keys_match={out.keys_match}")
    if args.reveal_keys:
        print("alice_key=" + "".join(map(str, out.alice_key)))
        print("bob_key=" + "".join(map(str, out.bob_key)))
    return EXIT_OK


def cmd_keyrate(args) -> int:
    out = run_session(_params(args))
    print(f"# {_config_header(args)}")
    print(f"status={out.status}")
    for base in ("no_pab", "standard_bb84"):
        rep = belldiag.key_rate_accounting(out, base)
        print(f"[{base}]")
        for k, v in rep.as_rows():
            if k != "baseline":
                print(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}")
    a = belldiag.key_rate_accounting(out, "no_pab")
    b = belldiag.key_rate_accounting(out, "standard_bb84")
    print(f"usable_position_ratio={a.usable_positions / b.usable_positions:g}")
    return EXIT_OK if out.completed else EXIT_ABORT


def _family(args) -> belldiag.InitialCondition:
    return belldiag.InitialCondition(args.family, q_y_step=args.q_y_step)


def _scan_csv(args, fam, schedule, scan) -> str:
    points = []
    for p, _ in scan:
        results = [belldiag.iterate_schedule(q, schedule, criterion=args.criterion) for q in fam.states(p)]
        failing = [r for r in results if r.verdict != belldiag.CONVERGES]
        points.append((p, failing[0] if failing else max(results, key=lambda r: r.rounds)))
    return belldiag.trajectory_to_csv(points, _config_header(args))


def cmd_threshold(args) -> int:
    fam = _family(args)
    res = belldiag.find_threshold(args.schedule, fam, tol=args.tol, criterion=args.criterion)
    print(f"# {_config_header(args)}")
    print(res.report())
    if args.csv_out:
        _write(args.csv_out, _scan_csv(args, fam, args.schedule, res.scan))
    return EXIT_OK


def cmd_schedule_search(args) -> int:
    fam = _family(args)
    res = belldiag.schedule_search(args.max_len, fam, tol=args.tol, criterion=args.criterion)
    print(f"# {_config_header(args)}")
    print(f"method={res.method}")
    for p, count in res.trace:
        print(f"  trace {p:.6f} {count}")
    print(f"alternating_threshold={res.alternating_threshold:.6f}")
    print(f"best_sequence={res.sequence}")
    print(f"best_threshold={res.threshold:.6f}")
    return EXIT_OK


def cmd_reconcile_demo(args) -> int:
    pair = _css(args)
    print(f"# {_config_header(args)}")
    total_bad = 0
    for pos in itertools.combinations(range(pair.n), args.error_weight):
        eps = np.zeros(pair.n, dtype=np.uint8)
        eps[list(pos)] = 1
        bad = failed = 0
        for u in pair.c1.codewords():
            w_in = u ^ eps
            try:
                w = pair.c1.decode(w_in)
            except gf2codes.DecodingError:
                failed += 1
                continue
            bad += not np.array_equal(gf2codes.coset_label(pair, u), gf2codes.coset_label(pair, w))
        total_bad += bad + failed
        status = "keys match" if bad == failed == 0 else f"{bad} mismatched, {failed} undecodable"
        print(f"error at {list(pos)}: {status} over {2 ** pair.c1.k} codewords")
    print("all keys match" if total_bad == 0 else f"{total_bad} failures")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twoway-bb84", description=__doc__)
    parser.add_argument("--config", default=None, help="flat key=value file overriding defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one session")
    _add_session_args(p)
    p.add_argument("--transcript-out", default=None)
    p.add_argument("--rounds-out", default=None, help="round records CSV")
    p.add_argument("--reveal-keys", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("keyrate", help="key-rate accounting for one session")
    _add_session_args(p)
    p.set_defaults(func=cmd_keyrate)

    for name, func in (("threshold", cmd_threshold), ("schedule-search", cmd_schedule_search)):
        p = sub.add_parser(name)
        p.add_argument("--family", choices=["worst-case", "independent", "depolarizing"], default="worst-case")
        p.add_argument("--criterion", choices=["capacity", "marginals"], default="capacity")
        p.add_argument("--tol", type=float, default=1e-4)
        p.add_argument("--q-y-step", type=float, default=1e-3)
        if name == "threshold":
            p.add_argument("--schedule", default="alternating", help="alternating | fixed:BPBB...")
            p.add_argument("--csv-out", default=None)
        else:
            p.add_argument("--max-len", type=int, default=12)
        p.set_defaults(func=func)

    p = sub.add_parser("reconcile-demo", help="exhaustive coset reconciliation check")
    p.add_argument("--error-weight", type=int, default=1)
    p.add_argument("--code-c1", default=None)
    p.add_argument("--code-c2", default=None)
    p.set_defaults(func=cmd_reconcile_demo)
    return parser


def _read_config(path) -> dict[str, str]:
    out = {}
    for ln in Path(path).read_text().splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if "=" not in ln:
            raise ConfigError(f"config line {ln!r} is not key=value")
        k, v = ln.split("=", 1)
        out[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return out


def _apply_config(parser, argv, path):
    pre = parser.parse_args(argv)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[pre.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for k, v in _read_config(path).items():
        if k not in actions:
            raise ConfigError(f"unknown config key {k!r} for {pre.command}")
        act = actions[k]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[k] = v.lower() in ("1", "true", "yes")
        else:
            defaults[k] = act.type(v) if act.type else v
    sub.set_defaults(**defaults)


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.config:
            _apply_config(parser, argv, args.config)
            args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    except AssertionError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
