"""Command-line entry point: ``sieve-mmr``.

Scenario names are resolved as paths first (with or without ``.yaml``) and
then inside the scenario directory, which defaults to the shipped library
and can be overridden with the SIEVE_MMR_SCENARIOS environment variable.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

from . import powlib
from .sim import engine
from .sim.scenario import MODES, SCENARIO_DIR_ENV, ScenarioError, load, resolve, scenario_dir, shipped
from .sim.trace import Trace

EXIT_USAGE = 2

SWEEP_COLUMNS = (
    "seed",
    "status",
    "exit_code",
    "failed_verdicts",
    "blocks_committed",
    "blocks_uncommitted",
    "block_latency_min",
    "block_latency_mean",
    "block_latency_max",
    "proposal_latency_mean",
    "leader_success",
    "leader_trials",
)


class CliError(Exception):
    pass


def _load(name: str, seed=None, mode=None, horizon=None, backend=None):
    sc = load(resolve(name))
    dpow_backend = None
    if backend == "merkle":
        dpow_backend = {"merkle": {}}
    elif backend == "ideal":
        dpow_backend = "ideal"
    return sc.with_overrides(seed=seed, mode=mode, horizon=horizon, dpow_backend=dpow_backend)


def _seed_range(text: str) -> range:
    """``a:b`` is the half-open range [a, b); a bare ``n`` means ``0:n``."""
    try:
        if ":" in text:
            a, b = text.split(":", 1)
            return range(int(a), int(b))
        return range(int(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed range {text!r}; use a:b") from None


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a fraction: {text!r}") from None


def cmd_run(args) -> int:
    sc = _load(args.scenario, args.seed, args.mode, args.horizon, args.backend)
    sink = open(args.trace, "w") if args.trace else None
    try:
        result = engine.run(sc, Trace(enabled=True, sink=sink))
    finally:
        if sink is not None:
            sink.close()
    if args.trace_digest:
        print(result.trace_digest)
    else:
        text = result.report_json()
        if args.report:
            Path(args.report).write_text(text + "\n")
        else:
            print(text)
        if args.show_filtered is not None:
            for node in sorted(result.filtered):
                labels = result.filtered_labels(node, args.show_filtered)
                print(f"step {args.show_filtered} {node}: {{{', '.join(labels)}}}", file=sys.stderr)
    return result.exit_code


def _row_for(seed: int, result) -> dict:
    blocks = [v for v in result.tracker.block_latencies().values() if v is not None]
    props = [v for v in result.tracker.proposal_latencies().values() if v is not None]
    failed = [n for n, v in result.checker.verdicts.items() if v.asserted and v.status == "fail"]
    m = result.metrics
    if result.rejected:
        status = "rejected"
    elif failed:
        status = "failed"
    else:
        status = "ok"
    return {
        "seed": seed,
        "status": status,
        "exit_code": result.exit_code,
        "failed_verdicts": ",".join(failed) or "-",
        "blocks_committed": len(blocks),
        "blocks_uncommitted": m["blocks_uncommitted"],
        "block_latency_min": min(blocks) if blocks else "",
        "block_latency_mean": f"{statistics.fmean(blocks):.4f}" if blocks else "",
        "block_latency_max": max(blocks) if blocks else "",
        "proposal_latency_mean": f"{statistics.fmean(props):.4f}" if props else "",
        "leader_success": m["leader_success"],
        "leader_trials": m["leader_trials"],
        "_blocks": blocks,
        "_props": props,
    }


def sweep(name: str, seeds: Sequence[int], mode=None, horizon=None, backend=None) -> List[dict]:
    rows = []
    for seed in seeds:
        try:
            sc = _load(name, seed, mode, horizon, backend)
            rows.append(_row_for(seed, engine.run(sc)))
        except ScenarioError:
            raise
        except Exception as exc:  # noqa: BLE001 - a crashed seed is reported, not fatal
            row = {c: "" for c in SWEEP_COLUMNS}
            row.update(seed=seed, status="error", failed_verdicts=type(exc).__name__, _blocks=[], _props=[])
            rows.append(row)
    return rows


def aggregate(rows: List[dict]) -> dict:
    blocks = [v for r in rows for v in r["_blocks"]]
    props = [v for r in rows for v in r["_props"]]
    ok = sum(1 for r in rows if r["status"] == "ok")
    return {
        "seed": "all",
        "status": f"{ok}/{len(rows)} ok",
        "exit_code": max((r["exit_code"] for r in rows if r["exit_code"] != ""), default=""),
        "failed_verdicts": ",".join(sorted({v for r in rows for v in str(r["failed_verdicts"]).split(",") if v not in ("-", "")})) or "-",
        "blocks_committed": len(blocks),
        "blocks_uncommitted": sum(int(r["blocks_uncommitted"] or 0) for r in rows),
        "block_latency_min": min(blocks) if blocks else "",
        "block_latency_mean": f"{statistics.fmean(blocks):.4f}" if blocks else "",
        "block_latency_max": max(blocks) if blocks else "",
        "proposal_latency_mean": f"{statistics.fmean(props):.4f}" if props else "",
        "leader_success": sum(int(r["leader_success"] or 0) for r in rows),
        "leader_trials": sum(int(r["leader_trials"] or 0) for r in rows),
    }


def format_table(rows: List[dict]) -> str:
    lines = ["\t".join(SWEEP_COLUMNS)]
    body = list(rows)
    if rows:
        body.append(aggregate(rows))
    for r in body:
        lines.append("\t".join(str(r[c]) for c in SWEEP_COLUMNS))
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    rows = sweep(args.scenario, args.seeds, args.mode, args.horizon, args.backend)
    table = format_table(rows)
    if args.output:
        Path(args.output).write_text(table)
    else:
        sys.stdout.write(table)
    return 0 if all(r["status"] in ("ok",) for r in rows) or not rows else engine.EXIT_VERDICT_FAILED


def cmd_validate(args) -> int:
    sc = load(resolve(args.scenario))
    print(f"{sc.name}: ok ({len(sc.nodes)} nodes, {sc.horizon} steps, digest {sc.digest()[:16]})")
    return 0


def cmd_list(args) -> int:
    print(f"# {scenario_dir()}")
    for name in shipped():
        print(name)
    return 0


def cmd_pow(args) -> int:
    if args.action == "tune":
        if args.target_bits is None or args.min_work is None:
            raise CliError("pow tune needs --target-bits and --min-work")
        k = powlib.min_k(args.target_bits, args.min_work)
        print(f"k = {k}")
        return 0
    if args.chi is None or args.w is None:
        raise CliError(f"pow {args.action} needs --chi and --w")
    try:
        chi = bytes.fromhex(args.chi)
    except ValueError:
        raise CliError("--chi must be hex") from None
    params = powlib.PowParams(args.k)
    if args.action == "prove":
        if not args.out:
            raise CliError("pow prove needs --out")
        counter = powlib.CountingHash()
        proof = powlib.prove(chi, args.w, params, counter)
        Path(args.out).write_bytes(proof.to_bytes())
        print(f"wrote {args.out} (root {proof.root.hex()}, {counter.calls} hash calls)")
        return 0
    if not args.proof:
        raise CliError("pow verify needs --proof")
    data = Path(args.proof).read_bytes()
    proof = powlib.MerkleProof.from_bytes(data)  # MalformedProof propagates
    ok = powlib.verify(proof, chi, args.w, params)
    print("valid" if ok else "invalid")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sieve-mmr",
        description="Simulate Sieve-filtered MMR consensus and exercise the Merkle DPoW.",
        epilog=f"Scenario names are looked up as paths, then in ${SCENARIO_DIR_ENV} "
        "(default: the shipped scenario library). "
        "Exit status: 0 all asserted verdicts pass, 1 a verdict failed, "
        "2 usage or input error, 3 scenario rejected by the supremacy audit.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def sim_flags(sp):
        sp.add_argument("scenario", help="scenario path or name")
        sp.add_argument("--mode", choices=MODES, help="override the Sieve policy (non-sieve modes are demonstrations)")
        sp.add_argument("--horizon", type=int, help="override the number of steps")
        sp.add_argument("--backend", choices=("ideal", "merkle"), help="DPoW backend")

    r = sub.add_parser("run", help="run one scenario and print its report")
    sim_flags(r)
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--trace", metavar="PATH", help="write the event trace (JSON lines)")
    r.add_argument("--trace-digest", action="store_true", help="print only the trace digest")
    r.add_argument("--report", metavar="PATH", help="write the report here instead of stdout")
    r.add_argument("--show-filtered", type=int, metavar="STEP", help="print each node's delivered set at STEP")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a scenario over many seeds; emit a TSV table")
    sim_flags(s)
    s.add_argument("--seeds", type=_seed_range, required=True, help="half-open range a:b")
    s.add_argument("--output", metavar="PATH", help="write the table here instead of stdout")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="parse and validate a scenario")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)

    ls = sub.add_parser("list", help="list scenarios in the scenario directory")
    ls.set_defaults(func=cmd_list)

    pw = sub.add_parser("pow", help="Merkle proof-of-work tools")
    pw.add_argument("action", choices=("tune", "prove", "verify"))
    pw.add_argument("--target-bits", type=int, help="tune: soundness target p (bits)")
    pw.add_argument("--min-work", type=_fraction, help="tune: cheating work fraction t, e.g. 1/2")
    pw.add_argument("--chi", help="prove/verify: challenge as hex")
    pw.add_argument("--w", type=int, help="prove/verify: number of leaves")
    pw.add_argument("--k", type=int, default=8, help="prove/verify: revealed paths (default 8)")
    pw.add_argument("--out", help="prove: proof output file")
    pw.add_argument("--proof", help="verify: proof file")
    pw.set_defaults(func=cmd_pow)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, CliError, powlib.WeightTooSmall, powlib.MalformedProof, OSError) as exc:
        kind = {
            powlib.MalformedProof: "malformed proof",
            powlib.WeightTooSmall: "weight too small",
        }.get(type(exc), "error")
        print(f"sieve-mmr: {kind}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
