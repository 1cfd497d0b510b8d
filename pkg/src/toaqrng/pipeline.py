"""End-to-end orchestration: configuration, the pipeline stages and the JSON report."""
from __future__ import annotations

import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .bitstream import BitStream
from .errors import ConfigError
from .extract import ExtractionConfig, ExtractionStats, Extractor
from .formats import BsfWriter, TsfWriter, iter_tsf, open_bsf, open_tsf, export_ascii
from .photonsim import PS_PER_S, DetectorModel, DetectorStats, SourceModel, flux_for_detected_rate, simulate_detections
from .postproc import ShuffleConfig, transpose_shuffle
from .qmetrics import (IntervalParams, LossChain, correction_factor, loss_budget, lost_photon_fraction,
                       mean_photons_per_interval, min_entropy_lower_bound, relative_photon_prob)
from .randtests import NIST_TESTS, ent_suite, nist_aggregate, pearson_bit_correlation
from .specfun import erfc, regularized_gamma_q

logger = logging.getLogger(__name__)

# p-value floor for the z-type checks reported alongside the ENT numbers
REPORT_ALPHA = 1e-4
ENT_SIGMA_BYTE = math.sqrt((256**2 - 1) / 12.0)


class PeriodExceedsDeadTime(UserWarning):
    """Reference period longer than the dead time: two detections may share a period."""


@dataclass(frozen=True)
class SourceConfig:
    detected_rate: float = 1.8e6
    duration: float = 1.0


@dataclass(frozen=True)
class TestConfig:
    pearson_max_delay: int = 15
    nist_sequence_length: int = 1_000_000
    nist_block_length: int = 16_384
    nist_alpha: float = 0.01
    nist_tests: tuple[str, ...] = NIST_TESTS
    nist_max_sequences: int | None = None


@dataclass(frozen=True)
class ShuffleStage:
    enabled: bool = False
    tail_policy: str = "passthrough"


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to reproduce a run; its JSON echo round-trips through :meth:`from_dict`."""

    seed: int = 1
    source: SourceConfig = SourceConfig()
    detector: DetectorModel = DetectorModel(efficiency=1.0, dead_time=24_000, jitter_sigma=148.6,
                                            timestamp_resolution=25, dark_rate=50.0)
    extraction: ExtractionConfig = ExtractionConfig()
    shuffle: ShuffleStage = ShuffleStage()
    tests: TestConfig = TestConfig()

    def __post_init__(self):
        if self.source.detected_rate <= 0 or self.source.duration <= 0:
            raise ConfigError("detected_rate and duration must be positive")
        ShuffleConfig(tail_policy=self.shuffle.tail_policy)
        if self.extraction.bin_width < self.detector.timestamp_resolution:
            raise ConfigError(f"bin width {self.extraction.bin_width} ps is narrower than the timestamp "
                              f"resolution {self.detector.timestamp_resolution} ps")
        if self.extraction.period_T > self.detector.dead_time:
            warnings.warn(f"period {self.extraction.period_T} ps exceeds dead time {self.detector.dead_time} ps; "
                          "more than one detection per period is possible", PeriodExceedsDeadTime, stacklevel=3)
        self.source_model()  # validates reachability of the rate

    def source_model(self) -> SourceModel:
        d = self.detector
        flux = flux_for_detected_rate(self.source.detected_rate, d.dead_time, d.efficiency, d.dark_rate)
        return SourceModel(mean_photon_flux=flux, duration=self.source.duration, seed=self.seed)

    def interval_params(self) -> IntervalParams:
        return IntervalParams(detection_rate_R=self.source.detected_rate,
                              period_T=self.extraction.period_T / PS_PER_S,
                              dead_time=self.detector.dead_time / PS_PER_S,
                              bins_N=self.extraction.bins_N)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tests"]["nist_tests"] = list(self.tests.nist_tests)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        sections = {"source": SourceConfig, "detector": DetectorModel, "extraction": ExtractionConfig,
                    "shuffle": ShuffleStage, "tests": TestConfig}
        unknown = set(raw) - set(sections) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        if "seed" in raw:
            kwargs["seed"] = int(raw["seed"])
        for name, klass in sections.items():
            if name not in raw:
                continue
            sub = dict(raw[name])
            allowed = {f.name for f in dataclasses.fields(klass)}
            bad = set(sub) - allowed
            if bad:
                raise ConfigError(f"unknown keys in '{name}': {sorted(bad)}")
            if name == "tests" and "nist_tests" in sub:
                sub["nist_tests"] = tuple(sub["nist_tests"])
            try:
                kwargs[name] = klass(**sub)
            except TypeError as exc:
                raise ConfigError(f"bad '{name}' section: {exc}") from None
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(raw)

    def replace(self, **sections) -> "PipelineConfig":
        return dataclasses.replace(self, **sections)


# --------------------------------------------------------------------------
# stages

def simulate(cfg: PipelineConfig, out_tsf) -> DetectorStats:
    run = simulate_detections(cfg.source_model(), cfg.detector, cfg.seed)
    with TsfWriter(out_tsf, cfg.detector.timestamp_resolution) as w:
        for chunk in run:
            w.write(chunk)
    return run.stats


@dataclass
class ExtractResult:
    stats: ExtractionStats
    seconds: float

    @property
    def throughput_bits_per_s(self) -> float:
        return self.stats.bits_emitted / self.seconds if self.seconds > 0 else float("inf")


def extract(tsf_path, cfg: PipelineConfig, out_bsf) -> ExtractResult:
    res, _ = open_tsf(tsf_path)
    ex = Extractor(cfg.extraction, res)
    busy = 0.0
    with BsfWriter(out_bsf) as w:
        for chunk in iter_tsf(tsf_path):
            t0 = time.perf_counter()
            bits = ex.feed(chunk)
            busy += time.perf_counter() - t0
            w.write(bits)
        w.write(ex.finish())
    return ExtractResult(ex.stats, busy)


def shuffle(bsf_in, out_bsf, tail_policy: str = "passthrough") -> BitStream:
    bits = open_bsf(bsf_in)
    out = transpose_shuffle(bits, ShuffleConfig(tail_policy=tail_policy))
    with BsfWriter(out_bsf) as w:
        w.write(out)
    return out


def _sha256(bits: BitStream) -> str:
    h = hashlib.sha256()
    for s in range(0, bits.data.size, 1 << 24):
        h.update(np.asarray(bits.data[s:s + (1 << 24)]).tobytes())
    return h.hexdigest()


def _z_p_value(z: float) -> float:
    return erfc(abs(z) / math.sqrt(2.0))


def _chi2_critical(percent: float, dof: int = 255) -> float:
    """Chi-square value whose upper-tail probability is ``percent`` (bisection)."""
    lo, hi = 0.0, 10.0 * dof + 100.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 100.0 * regularized_gamma_q(dof / 2.0, mid / 2.0) > percent:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quality_metrics(cfg: PipelineConfig) -> dict:
    p = cfg.interval_params()
    k = mean_photons_per_interval(p)
    h = min_entropy_lower_bound(p.bins_N, k)
    return {
        "mean_photons_per_interval": k,
        "min_entropy_per_sample": h,
        "min_entropy_per_bit": h / math.log2(p.bins_N),
        "correction_factor": correction_factor(p.detection_rate_R, p.dead_time),
        "lost_photon_fraction": lost_photon_fraction(p.detection_rate_R, p.dead_time),
        "p_single_photon": relative_photon_prob(1, k),
        "p_two_photons": relative_photon_prob(2, k),
    }


def analyze_bits(bits: BitStream, cfg: PipelineConfig, threads: int = 1) -> dict:
    """Run the whole battery; returns the deterministic part of the report."""
    tc = cfg.tests
    ent = ent_suite(bits)
    pearson = pearson_bit_correlation(bits, tc.pearson_max_delay)
    tests: dict[str, dict] = {}

    n = ent.n_bytes
    chi2_hi = _chi2_critical(1.0)
    entropy_floor = 8.0 - chi2_hi / (2.0 * n * math.log(2.0))
    tests["ent_entropy"] = {"value": ent.entropy_bits_per_byte, "threshold": entropy_floor,
                            "pass": ent.entropy_bits_per_byte >= entropy_floor}
    tests["ent_chi_square"] = {"value": ent.chi_square_value, "p_value": ent.chi_square_percent / 100.0,
                               "bounds": [0.01, 0.99],
                               "pass": 1.0 <= ent.chi_square_percent <= 99.0}
    p_mean = _z_p_value((ent.arithmetic_mean - 127.5) / (ENT_SIGMA_BYTE / math.sqrt(n)))
    tests["ent_mean"] = {"value": ent.arithmetic_mean, "p_value": p_mean, "pass": p_mean >= REPORT_ALPHA}
    if ent.mc_groups:
        q = math.pi / 4.0
        p_pi = _z_p_value((ent.monte_carlo_pi - math.pi) / (4.0 * math.sqrt(q * (1 - q) / ent.mc_groups)))
    else:
        p_pi = float("nan")
    tests["ent_monte_carlo_pi"] = {"value": ent.monte_carlo_pi, "p_value": p_pi, "pass": p_pi >= REPORT_ALPHA}
    sc = ent.serial_correlation
    p_sc = _z_p_value(sc * math.sqrt(n)) if math.isfinite(sc) else float("nan")
    tests["ent_serial_correlation"] = {"value": sc, "p_value": p_sc, "pass": p_sc >= REPORT_ALPHA}
    max_abs = max(abs(c) for c in pearson.coefficients)
    tests["pearson_bit_delays"] = {"values": pearson.coefficients, "threshold": pearson.null_bound,
                                   "pass": max_abs < pearson.null_bound}

    nist = None
    if bits.bit_length // tc.nist_sequence_length >= 2:
        agg = nist_aggregate(bits, tc.nist_sequence_length, tc.nist_tests, tc.nist_alpha,
                             tc.nist_block_length, tc.nist_max_sequences, threads)
        nist = {"sequence_count": agg.sequence_count, "sequence_length": agg.sequence_length,
                "alpha": agg.alpha, "block_length": agg.block_len, "tests": {}}
        for name, r in agg.results.items():
            entry = {"proportion_passed": r.proportion_passed, "required_minimum": r.required_minimum,
                     "p_value": r.uniformity_p_value, "uniformity_bins": r.uniformity_bins,
                     "prerequisite_failures": r.flagged, "pass": r.passed}
            nist["tests"][name] = entry
            tests[f"nist_{name}"] = {"values": [r.proportion_passed, r.required_minimum],
                                     "p_value": r.uniformity_p_value, "pass": r.passed}
    else:
        logger.warning("fewer than two NIST sequences of %d bits; NIST block skipped", tc.nist_sequence_length)

    return {
        "input": {"bit_length": bits.bit_length, "sha256": _sha256(bits)},
        "qmetrics": quality_metrics(cfg),
        "pearson": {"delays": list(range(1, pearson.max_delay + 1)), "coefficients": pearson.coefficients,
                    "bound": pearson.null_bound},
        "ent": asdict(ent),
        "nist": nist,
        "tests": tests,
    }


def build_report(cfg: PipelineConfig, analysis: dict, extra: dict | None = None,
                 runtime: dict | None = None) -> dict:
    report = {"tool": {"name": "toaqrng", "version": __version__}, "config": cfg.to_dict()}
    report.update(analysis)
    if extra:
        report.update(extra)
    report["runtime"] = {"created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                         **(runtime or {})}
    return report


def analyze(bsf_path, cfg: PipelineConfig, threads: int = 1) -> dict:
    t0 = time.perf_counter()
    analysis = analyze_bits(open_bsf(bsf_path), cfg, threads)
    return build_report(cfg, analysis, runtime={"analysis_seconds": time.perf_counter() - t0})


VOLATILE_KEYS = ("runtime",)


def stable_view(report: dict) -> dict:
    """Report without run-time metadata (timestamps, timings)."""
    return {k: v for k, v in report.items() if k not in VOLATILE_KEYS}


def _round6(x):
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, float):
        return None if not math.isfinite(x) else float(f"{x:.6g}")
    if isinstance(x, (np.floating,)):
        return _round6(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, dict):
        return {k: _round6(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round6(v) for v in x]
    return x


def dumps_report(report: dict) -> str:
    return json.dumps(_round6(report), indent=2, sort_keys=True) + "\n"


def write_report(report: dict, path) -> None:
    Path(path).write_text(dumps_report(report))


def run(cfg: PipelineConfig, outdir, threads: int = 1) -> dict:
    """simulate -> extract -> (shuffle) -> analyze, keeping every intermediate file in ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    tsf, bsf = outdir / "timestamps.tsf", outdir / "raw.bsf"
    det_stats = simulate(cfg, tsf)
    ext = extract(tsf, cfg, bsf)
    final = bsf
    if cfg.shuffle.enabled:
        final = outdir / "shuffled.bsf"
        shuffle(bsf, final, cfg.shuffle.tail_policy)
    t0 = time.perf_counter()
    analysis = analyze_bits(open_bsf(final), cfg, threads)
    extra = {"pipeline": {"detector": asdict(det_stats), "extraction": asdict(ext.stats),
                          "analyzed_file": final.name}}
    runtime = {"analysis_seconds": time.perf_counter() - t0,
               "extraction_throughput_bits_per_s": ext.throughput_bits_per_s}
    report = build_report(cfg, analysis, extra, runtime)
    write_report(report, outdir / "report.json")
    return report


def metrics(rate: float, period_s: float, dead_time_s: float, bins: int) -> dict:
    p = IntervalParams(rate, period_s, dead_time_s, bins)
    k = mean_photons_per_interval(p)
    h = min_entropy_lower_bound(bins, k)
    return {
        "inputs": {"detection_rate": rate, "period_s": period_s, "dead_time_s": dead_time_s, "bins": bins},
        "mean_photons_per_interval": k,
        "min_entropy_per_sample": h,
        "min_entropy_per_bit": h / math.log2(bins),
        "correction_factor": correction_factor(rate, dead_time_s),
        "lost_photon_fraction": lost_photon_fraction(rate, dead_time_s),
        "p_single_photon": relative_photon_prob(1, k),
        "p_two_photons": relative_photon_prob(2, k),
    }


def budget(chain: LossChain, p_out: float | None = None) -> dict:
    b = loss_budget(chain, p_out=p_out)
    return {"inputs": asdict(chain), "p_out_source": "measured" if p_out is not None else "R*h*c/lambda",
            **asdict(b)}


__all__ = ["PipelineConfig", "SourceConfig", "TestConfig", "ShuffleStage", "simulate", "extract", "shuffle",
           "analyze", "analyze_bits", "run", "metrics", "budget", "export_ascii", "dumps_report",
           "write_report", "stable_view"]
