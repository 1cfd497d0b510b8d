"""Command-line interface.

Exit codes: 0 ok, 2 configuration error, 3 I/O or file-format error,
4 statistical precondition not met.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import re
import sys

from . import __version__, pipeline
from .errors import ConfigError, ToaError
from .formats import export_ascii, open_bsf
from .photonsim import PS_PER_S
from .qmetrics import LossChain

log = logging.getLogger("toaqrng")

_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9, "ps": 1e-12}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zµ]*)\s*$")


def parse_time(text: str, default_unit: str) -> float:
    """'12.8ns' -> seconds; a bare number is taken in ``default_unit``."""
    m = _QUANTITY.match(text)
    if not m or (m.group(2) and m.group(2) not in _UNITS):
        raise argparse.ArgumentTypeError(f"cannot parse time {text!r} (units: {', '.join(_UNITS)})")
    return float(m.group(1)) * _UNITS[m.group(2) or default_unit]


def _ps(text: str) -> int:
    seconds = parse_time(text, "ps")
    ps = round(seconds * PS_PER_S)
    if abs(seconds * PS_PER_S - ps) > 1e-6 * max(1.0, abs(ps)):
        raise argparse.ArgumentTypeError(f"{text!r} is not a whole number of picoseconds")
    return int(ps)


def _seconds(text: str) -> float:
    return parse_time(text, "s")


def _ps_float(text: str) -> float:
    return parse_time(text, "ps") * PS_PER_S


def _add_config_flags(p: argparse.ArgumentParser, stages: set[str]) -> None:
    p.add_argument("--config", help="JSON config file (same schema as the report's config echo)")
    if "source" in stages:
        g = p.add_argument_group("source")
        g.add_argument("--seed", type=int)
        g.add_argument("--rate", type=float, help="target detection rate, counts/s")
        g.add_argument("--flux", type=float, help="photon flux at the detector face, photons/s "
                                                   "(alternative to --rate)")
        g.add_argument("--duration", type=_seconds, help="simulated time, e.g. 12.5s")
    if "detector" in stages:
        g = p.add_argument_group("detector")
        g.add_argument("--efficiency", type=float)
        g.add_argument("--dead", "--dead-time", dest="dead_time", type=_ps, help="e.g. 24ns")
        g.add_argument("--jitter", type=_ps_float, help="Gaussian jitter sigma, e.g. 149ps")
        g.add_argument("--resolution", type=_ps, help="timestamp grid, e.g. 25ps")
        g.add_argument("--dark", type=float, help="dark count rate, counts/s")
    if "extraction" in stages:
        g = p.add_argument_group("extraction")
        g.add_argument("--T", "--period", dest="period", type=_ps, help="reference period, e.g. 12.8ns")
        g.add_argument("--bins", type=int, help="bins per period (power of two)")
        g.add_argument("--origin", type=_ps, help="reference phase")
    if "tests" in stages:
        g = p.add_argument_group("tests")
        g.add_argument("--max-delay", type=int)
        g.add_argument("--seq-len", type=int, help="NIST sequence length in bits")
        g.add_argument("--block-len", type=int, help="NIST block frequency block length")
        g.add_argument("--alpha", type=float)
        g.add_argument("--max-sequences", type=int)
        g.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")


def _config_from_args(args) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig.load(args.config) if getattr(args, "config", None) else pipeline.PipelineConfig()
    get = lambda name: getattr(args, name, None)  # noqa: E731

    det = cfg.detector
    det_over = {k: v for k, v in {"efficiency": get("efficiency"), "dead_time": get("dead_time"),
                                  "jitter_sigma": get("jitter"), "timestamp_resolution": get("resolution"),
                                  "dark_rate": get("dark")}.items() if v is not None}
    if det_over:
        det = dataclasses.replace(det, **det_over)

    src = cfg.source
    if get("flux") is not None and get("rate") is not None:
        raise ConfigError("give either --rate or --flux, not both")
    if get("flux") is not None:
        events = get("flux") * det.efficiency + det.dark_rate
        src = dataclasses.replace(src, detected_rate=events / (1.0 + events * det.dead_time / PS_PER_S))
    if get("rate") is not None:
        src = dataclasses.replace(src, detected_rate=get("rate"))
    if get("duration") is not None:
        src = dataclasses.replace(src, duration=get("duration"))

    ext = cfg.extraction
    ext_over = {k: v for k, v in {"period_T": get("period"), "bins_N": get("bins"),
                                  "reference_origin": get("origin")}.items() if v is not None}
    if ext_over:
        ext = dataclasses.replace(ext, **ext_over)

    tests = cfg.tests
    t_over = {k: v for k, v in {"pearson_max_delay": get("max_delay"), "nist_sequence_length": get("seq_len"),
                                "nist_block_length": get("block_len"), "nist_alpha": get("alpha"),
                                "nist_max_sequences": get("max_sequences")}.items() if v is not None}
    if t_over:
        tests = dataclasses.replace(tests, **t_over)

    shuffle = cfg.shuffle
    if get("shuffle"):
        shuffle = dataclasses.replace(shuffle, enabled=True)
    if get("tail") is not None:
        shuffle = dataclasses.replace(shuffle, tail_policy=get("tail"))

    seed = get("seed") if get("seed") is not None else cfg.seed
    return pipeline.PipelineConfig(seed=seed, source=src, detector=det, extraction=ext, shuffle=shuffle,
                                   tests=tests)


def _emit(obj: dict, out) -> None:
    text = pipeline.dumps_report(obj)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> None:
    cfg = _config_from_args(args)
    stats = pipeline.simulate(cfg, args.output)
    log.info("wrote %d detections to %s", stats.output_events, args.output)
    if args.dump_config:
        _emit(cfg.to_dict(), args.dump_config)


def cmd_extract(args) -> None:
    cfg = _config_from_args(args)
    res = pipeline.extract(args.input, cfg, args.output)
    log.info("extracted %d bits (%d events, %d same-period drops) at %.3g bit/s", res.stats.bits_emitted,
             res.stats.events_consumed, res.stats.events_dropped_same_interval, res.throughput_bits_per_s)


def cmd_shuffle(args) -> None:
    out = pipeline.shuffle(args.input, args.output, args.tail or "passthrough")
    log.info("shuffled %d bits into %s", out.bit_length, args.output)


def cmd_analyze(args) -> None:
    cfg = _config_from_args(args)
    _emit(pipeline.analyze(args.input, cfg, args.threads), args.output)


def cmd_run(args) -> None:
    cfg = _config_from_args(args)
    report = pipeline.run(cfg, args.outdir, args.threads)
    failed = [k for k, v in report["tests"].items() if not v["pass"]]
    log.info("report written to %s/report.json; failing checks: %s", args.outdir, ", ".join(failed) or "none")


def cmd_metrics(args) -> None:
    _emit(pipeline.metrics(args.rate, args.period, args.dead_time, args.bins), args.output)


def cmd_budget(args) -> None:
    chain = LossChain(eta_dlm=args.eta_dlm, eta_col=args.eta_col, im_k=args.im_k, nanowire_length_z=args.z,
                      p_in=args.p_in, detection_rate_R=args.rate, wavelength=args.wavelength)
    _emit(pipeline.budget(chain, args.p_out), args.output)


def cmd_export_ascii(args) -> None:
    export_ascii(open_bsf(args.input), args.output)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toaqrng", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate detections and write a TSF1 file")
    _add_config_flags(p, {"source", "detector"})
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--dump-config", help="also write the effective config as JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", help="TSF1 timestamps -> BSF1 bits")
    p.add_argument("input")
    _add_config_flags(p, {"extraction"})
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("shuffle", help="apply the block bit shuffle to a BSF1 file")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--tail", choices=["passthrough", "truncate"])
    p.set_defaults(func=cmd_shuffle)

    p = sub.add_parser("analyze", help="run the test battery on a BSF1 file and write a JSON report")
    p.add_argument("input")
    _add_config_flags(p, {"source", "detector", "extraction", "tests"})
    p.add_argument("-o", "--output", help="report path (default: stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="simulate, extract, optionally shuffle, and analyze")
    _add_config_flags(p, {"source", "detector", "extraction", "tests"})
    p.add_argument("--shuffle", action="store_true", help="analyze the shuffled bits")
    p.add_argument("--tail", choices=["passthrough", "truncate"])
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("metrics", help="mean photon number, min-entropy and correction factor")
    p.add_argument("--rate", type=float, required=True, help="detection rate, counts/s")
    p.add_argument("--T", "--period", dest="period", type=_seconds, required=True, help="e.g. 12.8ns")
    p.add_argument("--dead", "--dead-time", dest="dead_time", type=_seconds, required=True, help="e.g. 24ns")
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("budget", help="split a measured transmission into its loss factors")
    p.add_argument("--eta-dlm", type=float, default=0.94, help="input objective transmission")
    p.add_argument("--eta-col", type=float, default=0.30, help="collection optics transmission")
    p.add_argument("--p-in", type=float, default=0.24e-6, help="input power, W")
    p.add_argument("--rate", type=float, default=1.8e6, help="detection rate, counts/s")
    p.add_argument("--wavelength", type=float, default=785e-9, help="m")
    p.add_argument("--im-k", type=float, default=0.459, help="attenuation constant, rad/um")
    p.add_argument("--z", type=float, default=3.0, help="nanowire length, um")
    p.add_argument("--p-out", type=float, help="measured output power, W (overrides R*h*c/lambda)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("export-ascii", help="write bits as '0'/'1' text for external test suites")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_export_ascii)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        args.func(args)
    except ToaError as exc:
        print(f"toaqrng {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"toaqrng {args.command}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
