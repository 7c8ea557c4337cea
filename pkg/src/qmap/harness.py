"""Sweep orchestration: compile every combination, execute on a later snapshot, report.

For each evaluation day ``d`` the compiler sees the history up to ``d``
(processed by each calibration method) and the circuit runs against the raw
snapshot of day ``d + exec_delay_days``. Every technique and method of a day
shares that execution snapshot.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .benchmarks import load_benchmark
from .calibration import (CalibrationError, CalibrationSeries, load_series, process,
                          reliability_matrix)
from .circuit import Circuit, nativize
from .drift import DriftParams, gen_series
from .mapping import Mapping
from .metrics import evaluate
from .placement import (PlacementError, interaction_graph, place_noise_adaptive,
                        place_reliability, place_sabre_reverse)
from .routing import (RoutedCircuit, RoutingError, route_dijkstra, route_fw_meeting, route_sabre,
                      verify_routed)
from .simulator import SimulationError, esp, noise_model_from, simulate_ideal, simulate_noisy
from .topology import CouplingGraph, hop_distance, load_topology

PRESETS = {
    "q3": ("sabre", "sabre"),
    "q-na": ("noise-adaptive", "sabre"),
    "triq": ("reliability", "dijkstra"),
    "triq+": ("reliability", "fw"),
}
PLACEMENTS = ("sabre", "noise-adaptive", "reliability", "trivial")
ROUTINGS = ("sabre", "dijkstra", "fw")
NOISE_AGNOSTIC = {"sabre", "trivial"}

CSV_FIELDS = ("benchmark", "technique", "calib_method", "day", "replica", "fidelity_tvd",
              "correlation", "fidelity_ratio", "esp", "two_q_overhead", "depth_overhead",
              "swaps_added", "runtime_ms")


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class Technique:
    name: str
    placement: str
    routing: str

    @classmethod
    def parse(cls, spec) -> "Technique":
        if isinstance(spec, str):
            key = spec.lower()
            if key not in PRESETS:
                raise HarnessError(f"unknown technique preset {spec!r}; choose from {sorted(PRESETS)}")
            return cls(key, *PRESETS[key])
        try:
            pl, rt = spec["placement"].lower(), spec["routing"].lower()
        except (KeyError, TypeError, AttributeError):
            raise HarnessError(f"technique {spec!r} needs 'placement' and 'routing'") from None
        if pl not in PLACEMENTS or rt not in ROUTINGS:
            raise HarnessError(f"unsupported technique {pl}+{rt}")
        return cls(spec.get("name", f"{pl}+{rt}"), pl, rt)

    @property
    def noise_aware(self) -> bool:
        return not (self.placement in NOISE_AGNOSTIC and self.routing == "sabre")


@dataclass
class SweepConfig:
    device: object = "perth"
    series: object = None          # series path, inline series, or drift-parameter dict
    benchmarks: list = field(default_factory=lambda: ["bv5"])
    techniques: list = field(default_factory=lambda: ["triq"])
    calib_methods: list = field(default_factory=lambda: ["lcd"])
    shots: int = 8192
    replicas: int = 4
    exec_delay_days: int = 1
    days: int | None = None        # evaluation days; default: every day that fits
    warmup_days: int = 0           # history kept before the first evaluation day
    seed: int = 0
    seeds: list | None = None      # drift_experiment repeats the sweep once per seed
    timing: bool = False
    placement_iters: int = 20000
    sabre_trials: int = 1

    def __post_init__(self):
        for name in ("benchmarks", "techniques", "calib_methods"):
            if not getattr(self, name):
                raise HarnessError(f"{name} must be a non-empty list")
        if self.shots < 1 or self.replicas < 1:
            raise HarnessError("shots and replicas must be at least 1")
        if self.exec_delay_days < 0 or self.warmup_days < 0:
            raise HarnessError("exec_delay_days and warmup_days must be non-negative")
        if self.days is not None and self.days < 1:
            raise HarnessError("days must be at least 1")
        self.technique_list = [Technique.parse(t) for t in self.techniques]
        for m in self.calib_methods:
            process_label_check(m)

    @classmethod
    def from_json(cls, doc) -> "SweepConfig":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise HarnessError(f"unknown config fields: {sorted(extra)}")
        cfg = cls(**doc)
        env = os.environ.get("QMAP_SEED")
        if env is not None:
            cfg = replace(cfg, seed=int(env))
        return cfg

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def process_label_check(label: str) -> None:
    from .calibration import parse_method
    try:
        parse_method(label)
    except CalibrationError as e:
        raise HarnessError(str(e)) from None


@dataclass
class RunRecord:
    benchmark: str
    technique: str
    calib_method: str
    day: int
    replica: int
    fidelity_tvd: float | None = None
    correlation: float | None = None
    fidelity_ratio: float | None = None
    esp: float | None = None
    two_q_overhead: int | None = None
    depth_overhead: int | None = None
    swaps_added: int | None = None
    runtime_ms: float | None = None
    error: str | None = None


# ---------------------------------------------------------------- inputs

def resolve_series(cfg: SweepConfig, g: CouplingGraph) -> CalibrationSeries:
    src = cfg.series
    if isinstance(src, CalibrationSeries):
        series = src
    elif isinstance(src, dict) and "snapshots" in src:
        series = CalibrationSeries.from_json(src)
    elif isinstance(src, (str, Path)):
        series = load_series(src)
    else:
        params = dict(src or {})
        params.setdefault("seed", cfg.seed)
        if "days" not in params:
            params["days"] = cfg.warmup_days + (cfg.days or 14) + cfg.exec_delay_days
        series = gen_series(g, DriftParams.from_json(params))
    series.check_covers(g)
    return series


def evaluation_days(cfg: SweepConfig, series: CalibrationSeries) -> list[int]:
    last = len(series) - 1 - cfg.exec_delay_days
    days = list(range(cfg.warmup_days, last + 1))
    if cfg.days is not None:
        days = days[:cfg.days]
    if not days:
        raise HarnessError(f"series of {len(series)} days leaves no evaluation day "
                           f"after {cfg.warmup_days} warm-up and a {cfg.exec_delay_days}-day delay")
    return days


# ------------------------------------------------------------- compilation

@dataclass
class Compiled:
    routed: RoutedCircuit
    physical: Circuit  # nativized


def compile_circuit(c: Circuit, g: CouplingGraph, tech: Technique, snap=None, *, seed: int = 0,
                    placement_iters: int = 20000, sabre_trials: int = 1, hops=None,
                    R=None) -> RoutedCircuit:
    """Place and route one circuit; noise-aware stages need ``snap``."""
    if tech.noise_aware and snap is None:
        raise HarnessError(f"technique {tech.name} needs a calibration snapshot")
    if tech.placement == "reliability":
        R = reliability_matrix(snap, g) if R is None else R
        m = place_reliability(interaction_graph(c), R, snap, g, iters=placement_iters, seed=seed)
    elif tech.placement == "noise-adaptive":
        m = place_noise_adaptive(c, snap, g)
    elif tech.placement == "sabre":
        m = place_sabre_reverse(c, g, seed=seed, trials=sabre_trials)
    else:
        m = Mapping.trivial(c.num_qubits, g.num_qubits)
    if tech.routing == "dijkstra":
        return route_dijkstra(c, m, g, snap)
    if tech.routing == "fw":
        return route_fw_meeting(c, m, g, snap)
    return route_sabre(c, m, g, hops=hops)


def check_compiled(original: Circuit, r: RoutedCircuit, where: str) -> None:
    """Abort on a routing that fails verification or breaks meeting-point dominance."""
    if not verify_routed(original, r):
        raise HarnessError(f"routed circuit failed verification ({where})")
    for d in r.trace:
        if d.baseline_reliability is not None and \
                d.plan.reliability < d.baseline_reliability * (1 - 1e-12):
            raise HarnessError(f"meeting-point routing lost to single-ended routing at gate "
                               f"{d.gate_index} ({where})")


def _record_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_sweep(cfg: SweepConfig, series: CalibrationSeries | None = None,
              on_record=None) -> list[RunRecord]:
    """Full grid in deterministic order: day, benchmark, technique, method, replica.

    Sampling seeds ignore the method, so methods that compile to the same
    circuit on a day get the same counts (common random numbers).
    """
    g = load_topology(cfg.device)
    series = series or resolve_series(cfg, g)
    days = evaluation_days(cfg, series)
    hops = hop_distance(g)
    circuits = []
    for b in cfg.benchmarks:
        try:
            circuits.append((b, load_benchmark(b)))
        except (OSError, ValueError) as e:
            raise HarnessError(f"benchmark {b!r}: {e}") from None
    techs = cfg.technique_list
    methods = list(cfg.calib_methods)
    ideals = {b: simulate_ideal(c) for b, c in circuits}
    agnostic_cache: dict = {}
    records: list[RunRecord] = []

    def emit(rec):
        records.append(rec)
        if on_record:
            on_record(rec)

    for day in days:
        as_of = series.snapshots[day].timestamp
        exec_snap = series.snapshots[day + cfg.exec_delay_days]
        nm = noise_model_from(exec_snap)
        eff = {m: process(series, m, as_of=as_of) for m in methods}
        rel = {}
        for bi, (bname, circ) in enumerate(circuits):
            for ti, tech in enumerate(techs):
                for method in methods:
                    t0 = time.perf_counter()
                    key = (bi, ti)
                    try:
                        if not tech.noise_aware and key in agnostic_cache:
                            r = agnostic_cache[key]
                        else:
                            R = None
                            if tech.placement == "reliability":
                                if method not in rel:
                                    rel[method] = reliability_matrix(eff[method], g)
                                R = rel[method]
                            r = compile_circuit(circ, g, tech, eff[method],
                                                seed=_record_seed(cfg.seed, bi, ti),
                                                placement_iters=cfg.placement_iters,
                                                sabre_trials=cfg.sabre_trials, hops=hops, R=R)
                            check_compiled(circ, r, f"{bname}/{tech.name}/{method}/day {day}")
                            if not tech.noise_aware:
                                agnostic_cache[key] = r
                        phys = nativize(r.circuit, "cx")
                        p_ok = esp(phys, exec_snap)
                        compile_ms = (time.perf_counter() - t0) * 1e3
                    except (RoutingError, PlacementError, SimulationError, CalibrationError) as e:
                        for rep in range(cfg.replicas):
                            emit(RunRecord(bname, tech.name, method, day, rep,
                                           error=f"{type(e).__name__}: {e}"))
                        continue
                    for rep in range(cfg.replicas):
                        t1 = time.perf_counter()
                        try:
                            counts = simulate_noisy(phys, nm, cfg.shots,
                                                    seed=_record_seed(cfg.seed, day, bi, ti, rep),
                                                    ideal=ideals[bname])
                        except SimulationError as e:
                            emit(RunRecord(bname, tech.name, method, day, rep,
                                           error=f"SimulationError: {e}"))
                            continue
                        rep_ms = compile_ms + (time.perf_counter() - t1) * 1e3
                        mr = evaluate(counts, ideals[bname], circ, r, esp=p_ok)
                        rec = RunRecord(bname, tech.name, method, day, rep,
                                        mr.fidelity_tvd, mr.correlation, mr.fidelity_ratio, mr.esp,
                                        mr.two_q_overhead, mr.depth_overhead, r.swaps_added,
                                        round(rep_ms, 3) if cfg.timing else None)
                        emit(rec)
    return records


# ---------------------------------------------------------------- reports

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: list[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow([_cell(getattr(r, k)) for k in CSV_FIELDS])
    return buf.getvalue()


def records_to_json(records: list[RunRecord]) -> str:
    return json.dumps([asdict(r) for r in records], indent=1) + "\n"


def records_from_json(text: str) -> list[RunRecord]:
    return [RunRecord(**row) for row in json.loads(text)]


def _parse_cell(name: str, s: str):
    if s == "":
        return None
    if name in ("day", "replica", "two_q_overhead", "depth_overhead", "swaps_added"):
        return int(s)
    if name in ("benchmark", "technique", "calib_method"):
        return s
    return float(s)


def records_from_csv(text: str) -> list[RunRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_FIELDS:
        raise HarnessError("CSV header does not match the report format")
    return [RunRecord(**{k: _parse_cell(k, v) for k, v in zip(CSV_FIELDS, row)}) for row in rows[1:]]


def report(records: list[RunRecord], fmt: str = "csv", path=None) -> str:
    if not records:
        raise HarnessError("no records to report")
    if fmt == "csv":
        text = records_to_csv(records)
    elif fmt == "json":
        text = records_to_json(records)
    else:
        raise HarnessError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# ------------------------------------------------------ drift experiment

@dataclass
class MethodStats:
    n: int
    mean: float
    std: float
    day_std: float = math.nan  # mean over runs of the std across days


@dataclass
class PairedRow:
    method: str
    n: int
    mean_diff: float   # method minus lcd
    std_diff: float
    win_rate: float    # share of pairs where the method beats lcd


@dataclass
class DriftSummary:
    per_method: dict
    paired: list
    records: list = field(repr=False, default_factory=list)

    def table(self) -> str:
        lines = ["method,n,mean,std,day_std"]
        lines += [f"{m},{s.n},{s.mean:.6f},{s.std:.6f},{s.day_std:.6f}"
                  for m, s in self.per_method.items()]
        lines += ["", "method_vs_lcd,n,mean_diff,std_diff,win_rate"]
        lines += [f"{p.method},{p.n},{p.mean_diff:.6f},{p.std_diff:.6f},{p.win_rate:.4f}"
                  for p in self.paired]
        return "\n".join(lines) + "\n"


def _stats(xs) -> MethodStats:
    a = np.asarray(xs, dtype=float)
    return MethodStats(len(a), float(a.mean()) if len(a) else math.nan,
                       float(a.std(ddof=1)) if len(a) > 1 else 0.0)


def drift_experiment(cfg: SweepConfig) -> DriftSummary:
    """Repeat the sweep over ``cfg.seeds`` and compare each method to ``lcd``.

    Statistics pool fidelity_tvd over days, seeds, benchmarks, techniques and
    replicas; pairs match everything except the method. ``day_std`` isolates
    day-to-day variation: the std across days of each (seed, benchmark,
    technique, replica) run, averaged.
    """
    if "lcd" not in cfg.calib_methods or len(cfg.calib_methods) < 2:
        raise HarnessError("drift experiment needs lcd plus at least one other method")
    seeds = list(cfg.seeds) if cfg.seeds else [cfg.seed]
    all_recs = []
    for s in seeds:
        all_recs += [(s, r) for r in run_sweep(replace(cfg, seed=int(s)))]
    by_method: dict[str, list] = {m: [] for m in cfg.calib_methods}
    keyed: dict = {}
    for s, r in all_recs:
        if r.fidelity_tvd is None:
            continue
        by_method[r.calib_method].append(r.fidelity_tvd)
        keyed[(s, r.benchmark, r.technique, r.day, r.replica, r.calib_method)] = r.fidelity_tvd
    per_method = {m: _stats(v) for m, v in by_method.items()}
    series: dict = {}
    for k, v in keyed.items():
        series.setdefault((k[-1],) + k[:3] + (k[4],), []).append(v)
    for m, st in per_method.items():
        day = [np.std(v, ddof=1) for key, v in series.items() if key[0] == m and len(v) > 1]
        st.day_std = float(np.mean(day)) if day else math.nan
    paired = []
    for m in cfg.calib_methods:
        if m == "lcd":
            continue
        diffs = [v - keyed[k[:-1] + ("lcd",)] for k, v in keyed.items()
                 if k[-1] == m and k[:-1] + ("lcd",) in keyed]
        st = _stats(diffs)
        wins = float(np.mean(np.asarray(diffs) > 0)) if diffs else math.nan
        paired.append(PairedRow(m, st.n, st.mean, st.std, wins))
    return DriftSummary(per_method, paired, [r for _, r in all_recs])
