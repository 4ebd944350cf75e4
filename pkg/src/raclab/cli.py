"""Command-line front end.

Exit status: 0 success, 1 a ``verify`` property failed, 2 invalid input,
3 numerically infeasible request.  A JSON config file (``--config``) supplies
defaults for any option; flags given on the command line win.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import _mc, io
from .channel import (ChannelError, InputDistribution, channel_from_json, check_assumptions,
                      make_adder_erasure, make_binary_example, make_noise_only)
from .design import InfeasibleError

TASKS = ("stats", "adder-stats", "blocklengths", "rate-region", "rate-curve",
         "bound", "detect", "simulate", "verify")


class ConfigError(ValueError):
    pass


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _add_channel(p):
    g = p.add_argument_group("channel")
    g.add_argument("--channel", help="adder | binary | noise | path to a channel JSON file")
    g.add_argument("--K", type=int, help="maximum number of users (adder, noise)")
    g.add_argument("--delta", type=float, help="adder erasure probability")
    g.add_argument("--a", type=float, help="binary example: P(Y=1 | both send 1)")
    g.add_argument("--b", type=float, help="binary example: crossover probability")
    g.add_argument("--q", type=float, help="noise-only channel: P(Y=1)")
    g.add_argument("--p", type=float, help="Bernoulli input parameter (default 0.5)")
    g.add_argument("--px", help="input pmf as comma-separated probabilities")


def _add_out(p, default_format):
    p.add_argument("--out", help="output file (.csv or .json); stdout if omitted")
    p.add_argument("--format", choices=("csv", "json"), default=None,
                   help=f"output format when --out has no suffix (default {default_format})")
    p.set_defaults(_default_format=default_format)


def _add_design(p):
    g = p.add_argument_group("code design")
    g.add_argument("--M", type=int, help="number of messages")
    g.add_argument("--eps", help="error targets eps_0..eps_K (one value or a list)")
    g.add_argument("--n", help="blocklengths n_1..n_K (default: normal approximation)")
    g.add_argument("--n0", type=int, help="zero-test length (default from the test exponent)")
    g.add_argument("--gamma0", type=float, help="zero-test threshold (default from the test)")
    g.add_argument("--zero-test", dest="zero_test", choices=("hoeffding", "ks"))
    g.add_argument("--mode", choices=("normal", "berry-esseen"))


def _add_global(p, default):
    p.add_argument("--config", default=default,
                   help="JSON file with option defaults (may name the task)")
    p.add_argument("--threads", type=int, default=default,
                   help=f"worker threads (env {_mc.THREADS_ENV})")


def build_parser():
    parser = argparse.ArgumentParser(prog="raclab", description=__doc__.splitlines()[0])
    _add_global(parser, None)
    sub = parser.add_subparsers(dest="task", metavar="TASK")

    p = sub.add_parser("stats", help="exact I_k, V_k, T_k, B_k and cross expectations")
    _add_channel(p)
    _add_out(p, "json")

    p = sub.add_parser("adder-stats", help="adder-erasure exact vs series I_k, V_k")
    p.add_argument("--delta", type=float)
    p.add_argument("--kmax", type=int)
    _add_out(p, "csv")

    p = sub.add_parser("blocklengths", help="normal-approximation n_k for a message size")
    _add_channel(p)
    p.add_argument("--logm", type=float, help="log2 M in bits")
    p.add_argument("--eps", help="error targets (one value or eps_0..eps_K)")
    _add_out(p, "csv")

    p = sub.add_parser("rate-region", help="K=2 rate pairs over a Bernoulli grid")
    _add_channel(p)
    p.add_argument("--logm", type=float)
    p.add_argument("--eps")
    p.add_argument("--grid", type=float, help="grid step in p (default 0.005)")
    _add_out(p, "csv")

    p = sub.add_parser("rate-curve", help="per-user rates R_k for message sizes fixed by n_1")
    _add_channel(p)
    p.add_argument("--n1", help="one or more n_1 values")
    p.add_argument("--eps")
    _add_out(p, "csv")

    p = sub.add_parser("bound", help="evaluate every term of the error bound")
    _add_channel(p)
    _add_design(p)
    p.add_argument("--k", help="active-user counts (default 0..K)")
    p.add_argument("--trials", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--method", choices=("mc", "exact"))
    _add_out(p, "json")

    p = sub.add_parser("detect", help="zero-transmitter test errors, D_min and b")
    _add_channel(p)
    p.add_argument("--test", choices=("hoeffding", "ks"))
    p.add_argument("--n0", type=int)
    p.add_argument("--eps0", type=float)
    p.add_argument("--gamma0", type=float)
    p.add_argument("--trials", type=float)
    p.add_argument("--seed", type=int)
    _add_out(p, "json")

    p = sub.add_parser("simulate", help="Monte Carlo epochs of the threshold code")
    _add_channel(p)
    _add_design(p)
    p.add_argument("--k", help="active-user counts (default 0..K)")
    p.add_argument("--trials", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--freeze-codebook", dest="freeze_codebook", action="store_true", default=None)
    _add_out(p, "json")

    p = sub.add_parser("verify", help="check assumptions, ordering lemmas and solver round trips")
    _add_channel(p)
    p.add_argument("--p-grid", dest="p_grid", help="Bernoulli grid to verify instead of one input")
    _add_out(p, "json")
    for p in sub.choices.values():
        _add_global(p, argparse.SUPPRESS)
    return parser


def _load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    task = cfg.pop("task", None)
    if task is not None and task not in TASKS:
        raise ConfigError(f"unknown task {task!r} in config")
    return task, cfg


def _apply_config(args, cfg):
    known = set(vars(args))
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known or dest.startswith("_") or dest in ("config", "task"):
            raise ConfigError(f"unknown config field {key!r} for task {args.task!r}")
        if getattr(args, dest) is None:
            setattr(args, dest, val)
    return args


def _channel(args, K_default=2):
    kind = args.channel
    if kind is None:
        raise ConfigError("--channel is required")
    if kind == "adder":
        if args.delta is None:
            raise ConfigError("adder channel needs --delta")
        return make_adder_erasure(args.K or K_default, args.delta)
    if kind == "binary":
        if args.a is None or args.b is None:
            raise ConfigError("binary channel needs --a and --b")
        return make_binary_example(args.a, args.b)
    if kind == "noise":
        return make_noise_only(args.K or K_default, 0.5 if args.q is None else args.q)
    if os.path.exists(kind):
        return channel_from_json(kind)
    raise ConfigError(f"unknown channel {kind!r}")


def _input(args, ch):
    if args.px is not None:
        return InputDistribution(_floats(args.px))
    p = 0.5 if args.p is None else args.p
    if ch.n_inputs != 2:
        raise ConfigError("--p needs a binary input alphabet; use --px")
    return InputDistribution.bernoulli(p)


def _emit(args, text_csv=None, obj=None):
    fmt = args.format
    if args.out:
        ext = os.path.splitext(args.out)[1].lower().lstrip(".")
        if ext in ("csv", "json"):
            fmt = ext
    fmt = fmt or args._default_format
    if fmt == "csv" and text_csv is None:
        raise ConfigError("this task only produces JSON")
    if fmt == "json" and obj is None:
        raise ConfigError("this task only produces CSV")
    text = text_csv() if fmt == "csv" else io.json_text(obj() if callable(obj) else obj)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _summary(msg):
    print(msg, file=sys.stderr)


def _k_list(args, K):
    return list(range(K + 1)) if args.k is None else _ints(args.k)


def _trials(args, default):
    t = default if args.trials is None else args.trials
    if float(t) != int(float(t)):
        raise ConfigError("--trials must be an integer")
    return int(float(t))


def _design(args, ch, px, st):
    from .design import choose_parameters, default_blocklengths

    if args.M is None:
        raise ConfigError("--M is required")
    eps = _floats(args.eps if args.eps is not None else "0.1")
    eps = eps[0] if len(eps) == 1 else eps
    n = _ints(args.n) if args.n is not None else default_blocklengths(st, np.log2(args.M), eps)
    return choose_parameters(st, args.M, eps, n, mode=args.mode or "normal",
                             zero_test=args.zero_test or "hoeffding", n0=args.n0,
                             gamma0=args.gamma0)


def cmd_stats(args):
    from .infodensity import statistics

    ch = _channel(args)
    px = _input(args, ch)
    st = statistics(ch, px)
    rep = check_assumptions(ch, px)
    rows = [(k, st.I[k], st.V[k], st.T[k], st.B[k]) for k in range(1, ch.K + 1)]
    _emit(args,
          lambda: io.csv_text(["k", "I_k_nats", "V_k_nats2", "T_k", "B_k"], rows,
                              ["users", "nats", "nats^2", "nats^3", "1"]),
          lambda: {"channel": ch.name, "input_pmf": px.pmf, "statistics": st.to_dict(),
                   "assumptions": rep.to_dict()})
    _summary(f"stats: {ch.name}, I_K = {st.I[-1]:.6g} nats")


def cmd_adder_stats(args):
    from .adder import figure_table

    if args.delta is None or args.kmax is None:
        raise ConfigError("adder-stats needs --delta and --kmax")
    rows = figure_table(args.delta, args.kmax)
    hdr = ["k", "I_exact", "I_approx", "V_exact", "V_approx"]
    _emit(args,
          lambda: io.csv_text(hdr, rows, ["users", "nats", "nats", "nats^2", "nats^2"]),
          lambda: {"delta": args.delta, "rows": [dict(zip(hdr, r)) for r in rows]})
    _summary(f"adder-stats: delta={args.delta}, k=1..{args.kmax}")


def cmd_blocklengths(args):
    from .design import LN2, solve_blocklength
    from .infodensity import statistics

    ch = _channel(args)
    px = _input(args, ch)
    if args.logm is None:
        raise ConfigError("--logm is required")
    st = statistics(ch, px)
    eps = _floats(args.eps if args.eps is not None else "1e-3")
    eps = eps * (ch.K + 1) if len(eps) == 1 else eps
    if len(eps) != ch.K + 1:
        raise ConfigError(f"--eps needs 1 or {ch.K + 1} values")
    rows = []
    for k in range(1, ch.K + 1):
        nk = solve_blocklength(st.I[k], st.V[k], k, args.logm, eps[k], units="nats")
        rows.append((k, st.I[k] / LN2, st.V[k] / LN2**2, eps[k], nk, args.logm / nk))
    hdr = ["k", "I_bits", "V_bits2", "eps", "n_k", "R_k"]
    _emit(args,
          lambda: io.csv_text(hdr, rows, ["users", "bits", "bits^2", "1", "channel uses", "bits/use"]),
          lambda: {"logM_bits": args.logm, "rows": [dict(zip(hdr, r)) for r in rows]})
    _summary("blocklengths: " + ", ".join(f"n_{r[0]}={r[4]}" for r in rows))


def cmd_rate_region(args):
    from .design import sweep_rate_region

    ch = _channel(args)
    if args.logm is None:
        raise ConfigError("--logm is required")
    step = 0.005 if args.grid is None else args.grid
    if not 0 < step < 0.5:
        raise ConfigError("--grid must lie in (0, 0.5)")
    m = int(round(1 / step))
    grid = np.round(np.arange(1, m) * step, 10)
    eps = _floats(args.eps if args.eps is not None else "1e-3")
    eps = eps[0] if len(eps) == 1 else eps
    reg = sweep_rate_region(ch, args.logm, eps, grid, threads=_mc.resolve_threads(args.threads))
    hdr = ["p", "R1", "R2", "n1", "n2", "dominant_flag"]
    rows = [tuple(r[h] if h != "dominant_flag" else r["dominant"] for h in hdr) for r in reg.rows]
    _emit(args,
          lambda: io.csv_text(hdr, rows, ["1", "bits/use", "bits/use", "channel uses", "channel uses", "bool"]),
          lambda: {"logM_bits": args.logm, "rows": reg.rows, "skipped_p": reg.skipped,
                   "dominant": reg.dominant()})
    dom = reg.dominant()
    _summary(f"rate-region: {len(reg.rows)} points, {len(dom)} dominant")


def cmd_rate_curve(args):
    from .design import LN2, adder_rate_stats, per_user_rate_curve
    from .infodensity import statistics

    if args.channel == "adder":
        if args.delta is None or args.K is None:
            raise ConfigError("adder rate curve needs --delta and --K")
        st = adder_rate_stats(args.delta, args.K)
    else:
        ch = _channel(args)
        st = statistics(ch, _input(args, ch))
    if args.n1 is None:
        raise ConfigError("--n1 is required")
    eps = _floats(args.eps if args.eps is not None else "1e-6")
    eps = eps[0] if len(eps) == 1 else eps
    rows = []
    for n1 in _ints(args.n1):
        logM, curve = per_user_rate_curve(st, n1, eps)
        for k, nk, R in curve:
            rows.append((n1, logM, k, nk, R, st.I[k] / LN2 / k))
    hdr = ["n1", "logM_bits", "k", "n_k", "R_k", "capacity_per_user"]
    _emit(args,
          lambda: io.csv_text(hdr, rows, ["channel uses", "bits", "users", "channel uses",
                                          "bits/use", "bits/use"]),
          lambda: {"rows": [dict(zip(hdr, r)) for r in rows]})
    _summary(f"rate-curve: {len(rows)} rows")


def cmd_bound(args):
    from .bound import evaluate_bound
    from .infodensity import statistics

    ch = _channel(args)
    px = _input(args, ch)
    st = statistics(ch, px)
    d = _design(args, ch, px, st)
    trials = _trials(args, 10**5)
    seed = 0 if args.seed is None else args.seed
    threads = _mc.resolve_threads(args.threads)
    reports = [evaluate_bound(ch, px, d, k, trials, seed, args.method or "mc", threads).to_dict()
               for k in _k_list(args, ch.K)]
    _emit(args, None, {"design": d.to_dict(), "reports": reports})
    _summary("bound: " + ", ".join(f"eps_{r['k']} <= {r['total']:.4g}" for r in reports))


def cmd_detect(args):
    from .detect import estimate_test_errors, minimax_quantile, n0_expansion, thresholds
    from .infodensity import output_pmf

    ch = _channel(args)
    px = _input(args, ch)
    kind = args.test or "ks"
    if args.n0 is None:
        raise ConfigError("--n0 is required")
    eps0 = 0.05 if args.eps0 is None else args.eps0
    g0 = args.gamma0 if args.gamma0 is not None else thresholds(kind, args.n0, eps0, ch.n_outputs)
    trials = _trials(args, 10**5)
    seed = 0 if args.seed is None else args.seed
    err = estimate_test_errors(ch, px, kind, args.n0, g0, trials, seed,
                               threads=_mc.resolve_threads(args.threads))
    pm = [output_pmf(ch, px, k) for k in range(ch.K + 1)]
    out = err.to_dict()
    out["thresholds"] = {"gamma0": g0, "eps0": eps0}
    try:
        mm = minimax_quantile(pm[0], pm[1:], eps0, seed=seed)
        out.update({"D_min": mm.D_min, "I_min": mm.I_min, "b": mm.b, "divergences": mm.divergences})
        if mm.b is not None:
            out["n0_expansion_at_n1"] = {str(n1): n0_expansion(mm.D_min, mm.b, n1)
                                         for n1 in (100, 1000, 10000)}
    except ValueError as exc:
        out["minimax_error"] = str(exc)
    _emit(args, None, out)
    _summary(f"detect: {kind} n0={args.n0} alpha={err.alpha:.4g} beta={[round(b, 4) for b in err.beta]}")


def cmd_simulate(args):
    from .infodensity import statistics
    from .sim import estimate_error_rates

    ch = _channel(args)
    px = _input(args, ch)
    st = statistics(ch, px)
    d = _design(args, ch, px, st)
    trials = _trials(args, 5000)
    seed = 0 if args.seed is None else args.seed
    threads = _mc.resolve_threads(args.threads)
    res = [estimate_error_rates(ch, px, d, k, trials, seed, threads=threads,
                                freeze_codebook=bool(args.freeze_codebook)).to_dict()
           for k in _k_list(args, ch.K)]
    _emit(args, None, {"design": d.to_dict(), "results": res})
    _summary("simulate: " + ", ".join(f"eps_hat_{r['k']}={r['eps_hat']:.4g}" for r in res))


def _verify_one(ch, px):
    from .design import solve_blocklength, solve_message_size
    from .infodensity import statistics, verify_orderings

    rep = check_assumptions(ch, px)
    lem = verify_orderings(ch, px)
    st = statistics(ch, px)
    props = {
        "reducibility": rep.reducibility_defect <= 1e-12,
        "friendliness": rep.friendliness,
        "interference": rep.interference,
        "output_separation": rep.output_separation,
        "positive_dispersion": rep.positive_dispersion,
    }
    for lemma, ok in sorted(lem.by_lemma().items()):
        props[f"ordering_lemma_{lemma}"] = ok
    rt = True
    for n1 in (50, 200, 1000):
        try:
            logm = solve_message_size(st.I[1], st.V[1], n1, 1e-3, units="nats")
        except InfeasibleError:
            continue
        n = solve_blocklength(st.I[1], st.V[1], 1, logm, 1e-3, units="nats")
        rt &= n1 <= n <= n1 + 1
    props["round_trip"] = bool(rt)
    return props


def cmd_verify(args):
    ch = _channel(args)
    if args.p_grid is not None:
        inputs = [(f"p={p:g}", InputDistribution.bernoulli(p)) for p in _floats(args.p_grid)]
    else:
        px = _input(args, ch)
        inputs = [("px=" + ",".join(f"{v:g}" for v in px.pmf), px)]
    results = {label: _verify_one(ch, px) for label, px in inputs}
    ok = all(all(v.values()) for v in results.values())
    _emit(args, None, {"channel": ch.name, "passed": ok, "properties": results})
    failed = sorted({k for v in results.values() for k, x in v.items() if not x})
    _summary("verify: all pass" if ok else "verify: FAILED " + ", ".join(failed))
    return 0 if ok else 1


COMMANDS = {"stats": cmd_stats, "adder-stats": cmd_adder_stats, "blocklengths": cmd_blocklengths,
            "rate-region": cmd_rate_region, "rate-curve": cmd_rate_curve, "bound": cmd_bound,
            "detect": cmd_detect, "simulate": cmd_simulate, "verify": cmd_verify}


def run(argv=None):
    """Parse ``argv``, dispatch, and return the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        cfg_path = pre.parse_known_args(argv)[0].config
        task, cfg = _load_config(cfg_path) if cfg_path else (None, {})
        if task is not None and not any(a in TASKS for a in argv):
            argv = [task] + argv
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        if task is not None and task != args.task:
            raise ConfigError(f"config task {task!r} conflicts with {args.task!r}")
        if args.task is None:
            parser.print_usage(sys.stderr)
            print("raclab: error: no task given", file=sys.stderr)
            return 2
        args = _apply_config(args, cfg)
        status = COMMANDS[args.task](args)
        return 0 if status is None else status
    except InfeasibleError as exc:
        print(f"raclab: infeasible: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ChannelError, ValueError, KeyError, TypeError) as exc:
        print(f"raclab: invalid input: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
