"""Command-line entry point: ``ldpcsched <subcommand> ...``.

Subcommands: construct, analyze, cluster, train, decode, bench.  Every
subcommand accepts ``--config run.json``; its top-level keys (flag names with
dashes turned into underscores) apply to any subcommand and a section named
after the subcommand overrides them.  Explicit flags override both.

Exit status: 0 on success, 1 for invalid input, 2 for runtime failures.
Outputs go to ``-o`` (stdout when omitted); the JSON metadata sidecar goes to
``--meta`` or, by default, next to the output as ``<output>.meta.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import ccs, count_cycles, girth
from .bp import decode_flooding, decode_ns
from .clustering import (
    DEFAULT_ENUMERATION_BUDGET,
    Clustering,
    cluster_contiguous,
    cluster_cycle_optimized,
    cluster_exhaustive,
    cluster_random,
    clustering_zetas,
)
from .rl import Quantizer, TrainConfig, calibrate_theta, decode_mabns, load_qtable, save_qtable, train
from .sim import BenchBudget, ChannelConfig, design_rate, llr_block, run_bench
from .tanner import ParityCheckMatrix, build_ab_code, build_regular_code, lift_code, load_alist, write_alist

log = logging.getLogger("ldpcsched")


class ValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


# ---------------------------------------------------------------------------
# shared option groups


def _code_options(p: argparse.ArgumentParser, seed_alias: bool = False) -> None:
    g = p.add_argument_group("code source (exactly one of --alist, --ab, --regular)")
    g.add_argument("--alist", help="read H from an alist file")
    g.add_argument("--ab", nargs=2, type=int, metavar=("GAMMA", "P"), help="array-based code H(GAMMA, P)")
    g.add_argument("--regular", nargs=2, type=int, metavar=("J", "K"), help="random (J, K)-regular code")
    g.add_argument("--n", type=int, help="code length for --regular")
    seed_flags = ("--code-seed", "--seed") if seed_alias else ("--code-seed",)
    g.add_argument(*seed_flags, dest="code_seed", type=int, default=0, help="construction seed for --regular")
    g.add_argument("--min-girth", type=int, default=6, choices=(4, 6), help="girth target for --regular")
    g.add_argument("--lift", type=int, default=1, help="circulant lifting factor applied after construction")
    g.add_argument("--lift-seed", type=int, default=0)


def _output_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    p.add_argument("--meta", help="metadata sidecar path (default: <output>.meta.json)")


def _channel_options(p: argparse.ArgumentParser, multi: bool) -> None:
    if multi:
        p.add_argument("--snr", type=float, nargs="+", default=[2.0], help="Eb/N0 values in dB")
    else:
        p.add_argument("--snr", type=float, default=2.0, help="Eb/N0 in dB")
    p.add_argument("--rate", type=float, help="code rate for the SNR conversion (default 1 - m/n)")
    p.add_argument("--seed", type=int, default=0)


def _budget_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ell-max", type=int, default=25)
    p.add_argument("--seq-budget", type=int, help="sequential schedulings per frame (default ell_max * m)")
    p.add_argument("--flood-iters", type=int, help="flooding iterations (default ell_max)")
    p.add_argument("--per-cn-cap", type=int, help="max firings of one CN by the learned decoder (default ell_max; 0 = off)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ldpcsched", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("construct", help="build a parity-check matrix and write it as alist")
    _code_options(p, seed_alias=True)
    _output_options(p)
    p.add_argument("--config")

    p = sub.add_parser("analyze", help="girth, cycle counts and CCS report")
    _code_options(p)
    _output_options(p)
    p.add_argument("--kappa", type=int, nargs="+", default=[4, 6, 8], choices=(4, 6, 8))
    p.add_argument("--clusters", help="JSON clustering to report CCS statistics for")
    p.add_argument("--config")

    p = sub.add_parser("cluster", help="partition the CNs into clusters")
    _code_options(p)
    _output_options(p)
    p.add_argument("--strategy", choices=("contiguous", "random", "cycle", "exhaustive"), default="cycle")
    p.add_argument("--z", type=int, default=7)
    p.add_argument("--kappa", type=int, default=6, choices=(4, 6, 8))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=DEFAULT_ENUMERATION_BUDGET, help="subset budget for exhaustive search")
    p.add_argument("--config")

    p = sub.add_parser("train", help="clustered Q-learning of a CN schedule")
    _code_options(p)
    _output_options(p)
    _channel_options(p, multi=False)
    p.add_argument("--clusters", help="JSON clustering (required)")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.9)
    p.add_argument("--epsilon", type=float, default=0.6)
    p.add_argument("--ell-max", type=int, default=25, help="schedulings per training sample")
    p.add_argument("--samples", type=int, default=100_000, help="training-set size")
    p.add_argument("--levels", type=int, default=4, help="quantizer levels M")
    p.add_argument("--theta", type=float, help="quantizer spacing (default: calibrated)")
    p.add_argument("--llr-file", help="train on these LLR vectors (.npy or text, one per row) instead of sampling")
    p.add_argument("--config")

    p = sub.add_parser("decode", help="decode frames with one decoder, one CSV row per frame")
    _code_options(p)
    _output_options(p)
    _channel_options(p, multi=False)
    _budget_options(p)
    p.add_argument("--decoder", choices=("mabns", "ns", "flooding"), default="mabns")
    p.add_argument("--qtable", help="Q-table for --decoder mabns")
    p.add_argument("--llr-file", help="decode these LLR vectors (.npy or text) instead of simulating")
    p.add_argument("--trials", type=int, default=100, help="simulated frames when no --llr-file is given")
    p.add_argument("--config")

    p = sub.add_parser("bench", help="Monte Carlo BER and message counts for several decoders")
    _code_options(p)
    _output_options(p)
    _channel_options(p, multi=True)
    _budget_options(p)
    p.add_argument(
        "--decoders",
        default="flooding,ns",
        help="comma list of flooding, ns, mabns (uses --qtable) or LABEL=QTABLE_PATH",
    )
    p.add_argument("--qtable", help="Q-table used by the plain 'mabns' entry")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--workers", type=int, help="threads (default: CPU count)")
    p.add_argument("--chunk", type=int, default=500)
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--config")
    return parser


# ---------------------------------------------------------------------------
# config handling


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    path = Path(args.config)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ValidationError("config file must hold a JSON object")
    commands = {"construct", "analyze", "cluster", "train", "decode", "bench"}
    values = {k: v for k, v in cfg.items() if k not in commands}
    section = cfg.get(args.command, {})
    if not isinstance(section, dict):
        raise ValidationError(f"config section {args.command!r} must be an object")
    values.update(section)

    subparser = _subparser(parser, args.command)
    known = {a.dest for a in subparser._actions}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValidationError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    subparser.set_defaults(**values)
    return parser.parse_args(argv)


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _need_file(path: str | None, what: str) -> Path:
    if not path:
        raise ValidationError(f"{what} is required")
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"{what} not found: {p}")
    return p


def _positive(name: str, value, allow_zero: bool = False) -> None:
    if value is None:
        return
    if value < 0 or (value == 0 and not allow_zero):
        raise ValidationError(f"--{name.replace('_', '-')} must be {'>= 0' if allow_zero else '> 0'}, got {value}")


def load_code(args) -> tuple[ParityCheckMatrix, dict]:
    sources = [s for s in ("alist", "ab", "regular") if getattr(args, s)]
    if len(sources) != 1:
        raise ValidationError("give exactly one code source: --alist, --ab or --regular")
    _positive("lift", args.lift)
    if args.alist:
        H = load_alist(_need_file(args.alist, "alist file"))
        desc = {"source": "alist", "path": str(args.alist)}
    elif args.ab:
        H = build_ab_code(*args.ab)
        desc = {"source": "ab", "gamma": args.ab[0], "p": args.ab[1]}
    else:
        if args.n is None:
            raise ValidationError("--regular needs --n")
        H = build_regular_code(*args.regular, args.n, seed=args.code_seed, min_girth=args.min_girth)
        desc = {"source": "regular", "j": args.regular[0], "k": args.regular[1], "n": args.n,
                "seed": args.code_seed, "min_girth": args.min_girth}
    if args.lift > 1:
        H = lift_code(H, args.lift, seed=args.lift_seed)
        desc.update(lift=args.lift, lift_seed=args.lift_seed)
    desc.update(m=H.m, n=H.n, fingerprint=H.fingerprint())
    return H, desc


def _load_clustering(path: str | None, H: ParityCheckMatrix) -> Clustering:
    cl = Clustering.from_json(_need_file(path, "--clusters").read_text())
    if cl.m != H.m:
        raise ValidationError(f"clustering covers {cl.m} CNs but the code has {H.m}")
    return cl


def _load_llrs(path: str | None, n: int) -> np.ndarray:
    p = _need_file(path, "--llr-file")
    arr = np.load(p) if p.suffix == ".npy" else np.loadtxt(p, ndmin=2)
    arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    if arr.shape[1] != n:
        raise ValidationError(f"LLR vectors in {p} have length {arr.shape[1]}, code has n = {n}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{p} contains non-finite LLRs")
    return arr


def _budget(args) -> BenchBudget:
    for name in ("ell_max", "seq_budget", "flood_iters", "per_cn_cap"):
        _positive(name, getattr(args, name), allow_zero=True)
    return BenchBudget(args.ell_max, args.seq_budget, args.flood_iters, args.per_cn_cap)


# ---------------------------------------------------------------------------
# output


def _emit(args, payload: str | bytes, meta: dict) -> None:
    if args.output:
        out = Path(args.output)
        if isinstance(payload, bytes):
            out.write_bytes(payload)
        else:
            out.write_text(payload)
    elif isinstance(payload, bytes):
        sys.stdout.buffer.write(payload)
    else:
        sys.stdout.write(payload)
    meta_path = args.meta or (args.output + ".meta.json" if args.output else None)
    if meta_path:
        Path(meta_path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _effective(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("output", "meta", "verbose")}


def _meta(args, **extra) -> dict:
    return {"tool": "ldpcsched", "version": __version__, "command": args.command, "arguments": _effective(args), **extra}


# ---------------------------------------------------------------------------
# subcommands


def cmd_construct(args) -> None:
    H, desc = load_code(args)
    _emit(args, write_alist(H), _meta(args, code=desc))


def cmd_analyze(args) -> None:
    H, desc = load_code(args)
    report: dict = {"m": H.m, "n": H.n, "girth": girth(H), "cycles": {str(k): v for k, v in count_cycles(H, args.kappa).items()}}
    if args.clusters:
        cl = _load_clustering(args.clusters, H)
        clusters = []
        for members in cl.clusters:
            rec = {"cns": list(members)}
            rec.update(ccs(H, members).to_dict() if len(members) < H.m else {"zeta": 0})
            clusters.append(rec)
        report["clusters"] = clusters
    _emit(args, json.dumps(report, indent=2) + "\n", _meta(args, code=desc))


def cmd_cluster(args) -> None:
    H, desc = load_code(args)
    if not 1 <= args.z <= H.m:
        raise ValidationError(f"--z must lie in [1, {H.m}]")
    if args.strategy == "contiguous":
        cl = cluster_contiguous(H.m, args.z)
    elif args.strategy == "random":
        cl = cluster_random(H.m, args.z, args.seed)
    elif args.strategy == "cycle":
        cl = cluster_cycle_optimized(H, args.z, args.kappa, args.seed)
    else:
        cl = cluster_exhaustive(H, args.z, args.budget)
    zetas = clustering_zetas(H, cl)
    meta = _meta(args, code=desc, clustering_fingerprint=cl.fingerprint(), zetas=zetas)
    _emit(args, cl.to_json() + "\n", meta)


def cmd_train(args) -> None:
    H, desc = load_code(args)
    cl = _load_clustering(args.clusters, H)
    _positive("levels", args.levels)
    if args.levels < 2:
        raise ValidationError("--levels must be >= 2")
    _positive("theta", args.theta)
    _positive("samples", args.samples, allow_zero=True)
    rate = args.rate if args.rate is not None else design_rate(H)
    channel = ChannelConfig(args.snr, rate, args.seed)
    cfg = TrainConfig(args.alpha, args.beta, args.epsilon, args.ell_max, args.samples, args.seed, args.snr)
    if args.llr_file:
        llrs = _load_llrs(args.llr_file, H.n)
        quantizer = Quantizer.uniform(args.levels, args.theta) if args.theta else None
        Q = train(H, cl, llrs, cfg, quantizer=quantizer, M=args.levels)
    else:
        theta = args.theta or calibrate_theta(H, channel)
        Q = train(H, cl, channel, cfg, quantizer=Quantizer.uniform(args.levels, theta))
    meta = _meta(
        args,
        code=desc,
        rate=rate,
        clustering_fingerprint=cl.fingerprint(),
        quantizer={"thresholds": list(Q.quantizer.thresholds), "rep_points": list(Q.quantizer.rep_points)},
        qtable_fingerprint=Q.fingerprint(),
    )
    _emit(args, save_qtable(Q), meta)


def cmd_decode(args) -> None:
    H, desc = load_code(args)
    budget = _budget(args)
    Q = None
    if args.decoder == "mabns":
        Q = load_qtable(_need_file(args.qtable, "--qtable").read_bytes())
        Q.check_code(H)
    rate = args.rate if args.rate is not None else design_rate(H)
    if args.llr_file:
        llrs = _load_llrs(args.llr_file, H.n)
    else:
        _positive("trials", args.trials)
        llrs = llr_block(H.n, ChannelConfig(args.snr, rate, args.seed), 0, args.trials)
    lines = ["frame,converged,schedulings,cn2vn,vn2c,hard_weight,xhat"]
    for t, llr in enumerate(llrs):
        if args.decoder == "flooding":
            res = decode_flooding(H, llr, budget.iterations())
        elif args.decoder == "ns":
            res = decode_ns(H, llr, budget.schedulings(H.m))
        else:
            res = decode_mabns(H, llr, Q, budget.schedulings(H.m), budget.cap())
        bits = "".join(map(str, res.xhat.tolist()))
        lines.append(f"{t},{int(res.converged)},{res.schedulings},{res.cn2vn_messages},"
                     f"{res.vn2cn_messages},{int(res.xhat.sum())},{bits}")
    meta = _meta(args, code=desc, rate=rate, frames=len(llrs),
                 qtable_fingerprint=Q.fingerprint() if Q is not None else None)
    _emit(args, "\n".join(lines) + "\n", meta)


def _parse_decoders(args, H: ParityCheckMatrix) -> dict:
    decoders: dict = {}
    for item in filter(None, (s.strip() for s in args.decoders.split(","))):
        if item in ("flooding", "ns"):
            label, entry = item, item
        elif item == "mabns":
            label, entry = "mabns", load_qtable(_need_file(args.qtable, "--qtable (for 'mabns')").read_bytes())
        elif "=" in item:
            label, path = item.split("=", 1)
            entry = load_qtable(_need_file(path, f"Q-table for {label}").read_bytes())
        else:
            raise ValidationError(f"unknown decoder {item!r}")
        if label in decoders:
            raise ValidationError(f"duplicate decoder label {label!r}")
        if not isinstance(entry, str):
            entry.check_code(H)
        decoders[label] = entry
    if not decoders:
        raise ValidationError("--decoders is empty")
    return decoders


def cmd_bench(args) -> None:
    H, desc = load_code(args)
    _positive("trials", args.trials)
    _positive("chunk", args.chunk)
    _positive("workers", args.workers)
    decoders = _parse_decoders(args, H)
    res = run_bench(
        H, decoders, args.snr, args.trials, seed=args.seed, budget=_budget(args),
        workers=args.workers, chunk=args.chunk, noiseless=args.noiseless, rate=args.rate,
    )
    res.metadata.pop("package_version", None)
    meta = _meta(args, code=desc, run=res.metadata, results=res.summary())
    _emit(args, res.to_csv(), meta)


COMMANDS = {
    "construct": cmd_construct,
    "analyze": cmd_analyze,
    "cluster": cmd_cluster,
    "train": cmd_train,
    "decode": cmd_decode,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
        COMMANDS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (ValueError, FileNotFoundError) as exc:
        print(f"ldpcsched: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"ldpcsched: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
