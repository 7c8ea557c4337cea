"""Command-line entry point (``qmap``)."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .benchmarks import load_benchmark
from .calibration import (CalibrationError, CalibrationSeries, CalibrationSnapshot,
                          EffectiveSnapshot, load_series, process, save_series)
from .circuit import CircuitError, nativize
from .drift import DriftParams, gen_series
from .harness import (HarnessError, SweepConfig, Technique, check_compiled, compile_circuit,
                      drift_experiment, records_from_csv, records_from_json, report, run_sweep)
from .placement import PlacementError
from .qasm import QasmError, emit_qasm, load_qasm
from .routing import RoutingError
from .simulator import NoiseModel, SimulationError, noise_model_from, simulate_noisy
from .topology import TopologyError, load_topology


def _read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _write(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load_snapshot(path, day: int | None) -> CalibrationSnapshot:
    doc = _read_json(path)
    if "snapshots" in doc:
        series = CalibrationSeries.from_json(doc)
        return series.snapshots[-1 if day is None else day]
    if "method" in doc:
        return EffectiveSnapshot.from_json(doc)
    return CalibrationSnapshot.from_json(doc)


def _technique(args) -> Technique:
    if args.placement or args.routing:
        return Technique.parse({"placement": args.placement or "sabre",
                                "routing": args.routing or "sabre"})
    return Technique.parse(args.technique)


def cmd_compile(args) -> int:
    g = load_topology(args.device)
    circ = load_benchmark(args.circuit)
    tech = _technique(args)
    snap = None
    if args.series:
        series = load_series(args.series, g)
        snap = process(series, args.method, as_of=args.as_of)
    r = compile_circuit(circ, g, tech, snap, seed=args.seed)
    check_compiled(circ, r, args.circuit)
    out = nativize(r.circuit, args.basis) if args.basis else r.circuit
    _write(emit_qasm(out), args.output)
    sidecar = json.dumps(r.sidecar(), indent=1) + "\n"
    if args.output and args.output != "-":
        Path(args.output).with_suffix(".json").write_text(sidecar, encoding="utf-8")
    else:
        sys.stderr.write(sidecar)
    return 0


def cmd_simulate(args) -> int:
    circ = load_qasm(args.circuit)
    nm = NoiseModel.noiseless() if args.snapshot is None else \
        noise_model_from(_load_snapshot(args.snapshot, args.day))
    counts = simulate_noisy(circ, nm, args.shots, seed=args.seed)
    _write(json.dumps(counts.to_json(), indent=1) + "\n", args.output)
    return 0


def cmd_calib_process(args) -> int:
    series = load_series(args.series)
    eff = process(series, args.method, as_of=args.as_of, lam=args.lam)
    _write(json.dumps(eff.to_json(), indent=1) + "\n", args.output)
    return 0


def cmd_drift_gen(args) -> int:
    g = load_topology(args.device)
    doc = _read_json(args.params) if args.params else {}
    for k in ("days", "seed", "sigma_walk", "jump_prob", "jump_factor", "recal_prob"):
        v = getattr(args, k)
        if v is not None:
            doc[k] = v
    series = gen_series(g, DriftParams.from_json(doc))
    if args.output in (None, "-"):
        sys.stdout.write(json.dumps(series.to_json(), indent=1) + "\n")
    else:
        save_series(series, args.output)
    return 0


def cmd_sweep(args) -> int:
    cfg = SweepConfig.from_json(args.config)
    if args.experiment:
        summary = drift_experiment(cfg)
        _write(summary.table(), args.output)
        return 0
    records = run_sweep(cfg)
    _write(report(records, args.format), args.output)
    return 0


def cmd_report(args) -> int:
    text = Path(args.records).read_text(encoding="utf-8")
    records = records_from_csv(text) if args.records.endswith(".csv") else records_from_json(text)
    _write(report(records, args.format), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmap", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="place and route one circuit")
    c.add_argument("circuit", help="benchmark name (bv5, adder, ...) or .qasm path")
    c.add_argument("--device", default="perth")
    c.add_argument("--series", help="calibration series JSON (needed by noise-aware techniques)")
    c.add_argument("--method", default="lcd", help="calibration method, e.g. lcd, w-7-adj")
    c.add_argument("--as-of", help="RFC3339 time for processing (default: last snapshot)")
    c.add_argument("--technique", default="q3", help="preset: q3, q-na, triq, triq+")
    c.add_argument("--placement", choices=["sabre", "noise-adaptive", "reliability", "trivial"])
    c.add_argument("--routing", choices=["sabre", "dijkstra", "fw"])
    c.add_argument("--basis", choices=["cx", "ecr"], help="nativize before writing")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("-o", "--output", help="routed QASM path; the sidecar goes next to it")
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("simulate", help="sample a physical circuit under calibrated noise")
    s.add_argument("circuit", help="routed .qasm file")
    s.add_argument("--snapshot", help="snapshot, effective snapshot or series JSON (omit: noiseless)")
    s.add_argument("--day", type=int, help="snapshot index when --snapshot is a series")
    s.add_argument("--shots", type=int, default=8192)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simulate)

    cal = sub.add_parser("calib", help="calibration history tools").add_subparsers(
        dest="calib_command", required=True)
    cp = cal.add_parser("process", help="collapse a series into an effective snapshot")
    cp.add_argument("series")
    cp.add_argument("--method", default="lcd")
    cp.add_argument("--as-of")
    cp.add_argument("--lam", type=float, default=1.0, help="std multiplier for -adj methods")
    cp.add_argument("-o", "--output")
    cp.set_defaults(func=cmd_calib_process)

    dr = sub.add_parser("drift", help="synthetic calibration drift").add_subparsers(
        dest="drift_command", required=True)
    dg = dr.add_parser("gen", help="generate a calibration series")
    dg.add_argument("--device", default="perth")
    dg.add_argument("--params", help="JSON file with drift parameters")
    dg.add_argument("--days", type=int)
    dg.add_argument("--seed", type=int)
    dg.add_argument("--sigma-walk", dest="sigma_walk", type=float)
    dg.add_argument("--jump-prob", dest="jump_prob", type=float)
    dg.add_argument("--jump-factor", dest="jump_factor", type=float)
    dg.add_argument("--recal-prob", dest="recal_prob", type=float)
    dg.add_argument("-o", "--output")
    dg.set_defaults(func=cmd_drift_gen)

    sw = sub.add_parser("sweep", help="run a sweep config")
    sw.add_argument("config")
    sw.add_argument("--format", choices=["csv", "json"], default="csv")
    sw.add_argument("--experiment", action="store_true",
                    help="repeat over the config's seeds and print the method comparison")
    sw.add_argument("-o", "--output")
    sw.set_defaults(func=cmd_sweep)

    rp = sub.add_parser("report", help="convert records between csv and json")
    rp.add_argument("records", help="records .json or .csv")
    rp.add_argument("--format", choices=["csv", "json"], default="csv")
    rp.add_argument("-o", "--output")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CalibrationError, CircuitError, QasmError, TopologyError, HarnessError, RoutingError,
            PlacementError, SimulationError, OSError, ValueError) as e:
        sys.stderr.write(f"qmap: error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
