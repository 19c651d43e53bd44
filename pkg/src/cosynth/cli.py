"""Command-line interface: ``cosynth <subcommand> [options]``.

JSON results go to stdout, progress to stderr.  Exit status is 0 on
success, 1 when synthesis or verification fails on a valid instance, and 2
for usage, schema or input-file errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .automaton import Automaton, AutomatonError, sync_product
from .components import EMPTY_BELIEF, UNSAFE, build_components, intruder_observed
from .data import example_document
from .pipeline import (TraceRejected, ensemble_plant, run_procedure, simulate_trace, supervisor_plant,
                       verify_closed_loop)
from .problem import InstanceError, SatBounds, derive_constraints, load_instance
from .sat.cnf import ModelFileError
from .sat.decompose import (DecompositionFailed, decompose, decompose_with_model, prepare_product,
                            witness_lower_bound)
from .sat.encode import EncodingError, encode, expected_counts
from .synthesis import NoSolution, SynthesisError, SynthesisGoal, synthesize

OUT_ENV = "COSYNTH_OUT"
DEFAULT_OUT = "cosynth-out"

log = logging.getLogger("cosynth")


class UsageError(Exception):
    pass


class DomainFailure(Exception):
    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload or {}


# -- helpers ---------------------------------------------------------------------


def _emit(doc) -> None:
    json.dump(doc, sys.stdout, indent=2, sort_keys=False)
    sys.stdout.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _instance(args):
    if args.instance is None:
        if getattr(args, "use_example", False):
            return load_instance(example_document())
        raise UsageError("--instance is required (or use --example)")
    return load_instance(args.instance)


def _bounds(args, inst) -> SatBounds:
    b = inst.sat
    k0 = args.k if args.k is not None else b.k0
    l0 = args.l if args.l is not None else b.l0
    k_max = args.k_max if args.k_max is not None else max(b.k_max, k0)
    l_max = args.l_max if args.l_max is not None else max(b.l_max, l0)
    cap = args.horizon_cap if args.horizon_cap is not None else b.horizon_cap
    for name, v in (("--k", k0), ("--l", l0), ("--horizon-cap", cap)):
        if v < 1:
            raise UsageError(f"{name} must be at least 1")
    if k0 > k_max or l0 > l_max:
        raise UsageError(f"initial size ({k0}, {l0}) exceeds the maximum ({k_max}, {l_max})")
    return SatBounds(k0, l0, k_max, l_max, cap)


def _load_automaton(path) -> Automaton:
    try:
        with open(path) as fh:
            return Automaton.from_json(fh.read())
    except (OSError, ValueError, AutomatonError) as exc:
        raise UsageError(f"cannot read automaton {path}: {exc}") from exc


def _write_automaton(aut: Automaton, out: Path, stem: str, formats) -> dict:
    files = {}
    if "json" in formats:
        p = out / f"{stem}.json"
        p.write_text(aut.to_json() + "\n")
        files[f"{stem}.json"] = str(p)
    if "dot" in formats:
        p = out / f"{stem}.dot"
        p.write_text(aut.to_dot())
        files[f"{stem}.dot"] = str(p)
    return files


def _formats(args):
    return [args.format] if args.format == "dot" else ["json"]


def _synth_me(inst, cs, explain: bool):
    _, _, _, c_me = derive_constraints(inst)
    plant, req = ensemble_plant(cs)
    try:
        me = synthesize(plant, req, c_me, SynthesisGoal.MARKER_REACHABLE, name="ME")
    except NoSolution as exc:
        if explain:
            sys.stderr.write("\n".join(exc.trace) + "\n")
        raise DomainFailure(f"step 5: {exc}", {"step": 5, "trace": exc.trace}) from exc
    if explain:
        sys.stderr.write("\n".join(me.trace) + "\n")
    return me


def _prune(inst, product):
    g = product.components.index("G")
    i = product.components.index("I")

    def doomed(label):
        return label[g] in inst.avoid or label[i] in (UNSAFE, EMPTY_BELIEF)

    return doomed


# -- subcommands -----------------------------------------------------------------


def cmd_validate(args):
    inst = _instance(args)
    _emit({"valid": True, "instance": inst.name, "plant_states": inst.plant.n_states,
           "events": list(inst.sigma), "decorated_events": len(inst.sigma_b),
           "commands": len(inst.gamma)})


def cmd_build_components(args):
    inst = _instance(args)
    cs = build_components(inst)
    out = _out_dir(args) / "components"
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, aut in cs.as_dict().items():
        files.update(_write_automaton(aut, out, name, _formats(args)))
    sizes = {name: aut.n_states for name, aut in cs.as_dict().items()}
    u, n_ms, n_c = inst.edit_bound, len(inst.maskable), len(inst.sigma_c)
    checks = {
        "EC == U+3": sizes["EC"] == u + 3,
        "SC == 2": sizes["SC"] == 2,
        "CE == 2^|Sigma_c|": sizes["CE"] == 2 ** n_c,
        "MC <= 3^|maskable|": sizes["MC"] <= 3 ** n_ms,
    }
    _emit({"sizes": sizes, "size_checks": checks, "files": files})
    if not all(checks.values()):
        raise DomainFailure("component size identities violated")


def cmd_synth_me(args):
    inst = _instance(args)
    cs = build_components(inst)
    me = _synth_me(inst, cs, args.explain)
    files = _write_automaton(me.automaton, _out_dir(args), "ME", _formats(args))
    _emit({"ME": {"states": me.automaton.n_states, "transitions": me.automaton.n_transitions},
           "files": files, **({"trace": me.trace} if args.explain else {})})


def _me_for(args, inst, cs):
    if args.me:
        return _load_automaton(args.me)
    return _synth_me(inst, cs, args.explain).automaton


def _sat_inputs(args, inst):
    cs = build_components(inst)
    c_m, c_e, _, _ = derive_constraints(inst)
    me = _me_for(args, inst, cs)
    product = sync_product(cs.base() + [cs.I], name="Q")
    exclude = None if args.plain_encoding else _prune(inst, product)
    return c_m, c_e, me, product, exclude, not args.plain_encoding


def _fixed_size(args, inst, me, product, exclude):
    bounds = _bounds(args, inst)
    reduced = prepare_product(product, me, exclude)
    horizon = args.horizon or (witness_lower_bound(reduced, me) or 0) + 1
    return bounds.k0, bounds.l0, horizon, reduced


def cmd_decompose(args):
    inst = _instance(args)
    c_m, c_e, me, product, exclude, single = _sat_inputs(args, inst)
    out = _out_dir(args)
    if args.solver == "dimacs":
        k, l, horizon, reduced = _fixed_size(args, inst, me, product, exclude)
        if args.model is None:
            info = _write_dimacs(me, c_m, c_e, reduced, k, l, horizon, single, out)
            info["next"] = "solve the CNF externally, then rerun with --model FILE"
            _emit(info)
            return
        try:
            dec = decompose_with_model(me, c_m, c_e, reduced, k, l, horizon, args.model,
                                       restrict_to_me=False, single_choice=single)
        except (ModelFileError, EncodingError, ValueError) as exc:
            raise UsageError(f"model file rejected: {exc}") from exc
        except AssertionError as exc:
            raise DomainFailure(str(exc), {"k": k, "l": l, "horizon": horizon}) from exc
    else:
        try:
            dec = decompose(me, c_m, c_e, product, _bounds(args, inst), exclude=exclude,
                            single_choice=single, log=log.info)
        except DecompositionFailed as exc:
            raise DomainFailure(f"step 6: {exc}", {"step": 6, "attempts": [a.as_dict() for a in exc.attempts]}) from exc
    files = {}
    files.update(_write_automaton(dec.M.automaton, out, "M", _formats(args)))
    files.update(_write_automaton(dec.E.automaton, out, "E", _formats(args)))
    _emit({"k": dec.k, "l": dec.l, "horizon": dec.horizon, "marking_saturated": dec.marking_saturated,
           "M": dec.M.automaton.n_states, "E": dec.E.automaton.n_states,
           "attempts": [{kk: v for kk, v in a.as_dict().items() if kk != "seconds"} for a in dec.attempts],
           "files": files})


def _write_dimacs(me, c_m, c_e, product, k, l, horizon, single, out: Path) -> dict:
    try:
        cnf = encode(me, c_m, c_e, product, k, l, horizon, single_choice=single)
    except EncodingError as exc:
        raise UsageError(str(exc)) from exc
    stem = out / f"decompose_k{k}_l{l}_T{horizon}"
    cnf.write_dimacs(f"{stem}.cnf")
    cnf.write_variable_map(f"{stem}.vars.json")
    counts = cnf.meta["counts"]
    want = expected_counts(k, l, len(cnf.meta["events"]), cnf.meta["n_me"], cnf.meta["n_product"], horizon)
    aux = cnf.n_vars - sum(counts.values())
    return {"cnf": f"{stem}.cnf", "variables": f"{stem}.vars.json", "n_vars": cnf.n_vars,
            "n_clauses": cnf.n_clauses, "k": k, "l": l, "horizon": horizon,
            "counts": counts, "closed_form": want, "N": sum(want.values()), "auxiliaries": aux,
            "n_me": cnf.meta["n_me"], "n_product": cnf.meta["n_product"]}


def cmd_export_dimacs(args):
    inst = _instance(args)
    c_m, c_e, me, product, exclude, single = _sat_inputs(args, inst)
    k, l, horizon, reduced = _fixed_size(args, inst, me, product, exclude)
    _emit(_write_dimacs(me, c_m, c_e, reduced, k, l, horizon, single, _out_dir(args)))


def _agents(args):
    missing = [n for n in ("m", "e", "s") if getattr(args, n, None) is None]
    if missing:
        raise UsageError("--m, --e and --s are required: missing " + ", ".join("--" + n for n in missing))
    return _load_automaton(args.m), _load_automaton(args.e), _load_automaton(args.s)


def cmd_synth_s(args):
    inst = _instance(args)
    if args.m is None or args.e is None:
        raise UsageError("--m and --e are required")
    M, E = _load_automaton(args.m), _load_automaton(args.e)
    cs = build_components(inst)
    _, _, c_s, _ = derive_constraints(inst)
    plant, req = supervisor_plant(inst, cs, M, E)
    try:
        s = synthesize(plant, req, c_s, SynthesisGoal.NONBLOCKING, name="S")
    except NoSolution as exc:
        if args.explain:
            sys.stderr.write("\n".join(exc.trace) + "\n")
        raise DomainFailure(f"step 9: {exc}", {"step": 9, "trace": exc.trace}) from exc
    if args.explain:
        sys.stderr.write("\n".join(s.trace) + "\n")
    files = _write_automaton(s.automaton, _out_dir(args), "S", _formats(args))
    _emit({"S": {"states": s.automaton.n_states, "transitions": s.automaton.n_transitions},
           "files": files})


def cmd_run(args):
    inst = _instance(args)
    res = run_procedure(inst, bounds=_bounds(args, inst), retry_decompose=args.retry_decompose,
                        prune_witness=not args.plain_encoding, single_choice=not args.plain_encoding,
                        log=log.info)
    if args.explain:
        for agent in (res.ME, res.S):
            if agent is not None:
                sys.stderr.write("\n".join(agent.trace) + "\n")
        if res.failure:
            sys.stderr.write("\n".join(res.failure.trace) + "\n")
    out = _out_dir(args)
    files = {}
    for key in ("ME", "M", "E", "S"):
        agent = getattr(res, key)
        if agent is not None:
            files.update(_write_automaton(agent.automaton, out, key, _formats(args)))
    if res.report is not None:
        p = out / "report.json"
        p.write_text(json.dumps(res.report.as_dict(), indent=2) + "\n")
        files["report.json"] = str(p)
    # paths relative to the output directory keep the manifest relocatable
    manifest = res.manifest({k: Path(v).name for k, v in files.items()}, timings=False)
    manifest["inputs"] = {"instance": args.instance or "bundled example",
                          "bounds": _bounds(args, inst).__dict__,
                          "retry_decompose": args.retry_decompose,
                          "plain_encoding": args.plain_encoding}
    p = out / "manifest.json"
    p.write_text(json.dumps(manifest, indent=2) + "\n")
    manifest.setdefault("files", {})["manifest.json"] = p.name
    manifest["out"] = str(out)
    timing = {s.name: round(s.seconds, 3) for s in res.steps}
    log.info("timings: %s", timing)
    _emit(manifest)
    if not res.ok:
        raise DomainFailure(res.failure.message if res.failure else "run failed")


def cmd_verify(args):
    inst = _instance(args)
    M, E, S = _agents(args)
    try:
        report = verify_closed_loop(inst, M, E, S)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(report.as_dict())
    if not report.all_pass:
        raise DomainFailure("verification failed")


def cmd_simulate(args):
    inst = _instance(args)
    M, E, S = _agents(args)
    trace = args.trace.split() if args.trace else []
    try:
        steps = simulate_trace(inst, M, E, S, trace)
    except TraceRejected as exc:
        _emit({"accepted": False, "index": exc.index, "event": str(exc.event), "factor": exc.factor,
               "visited": [s.as_dict() for s in exc.visited]})
        raise DomainFailure(str(exc)) from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    visible = intruder_observed(inst)
    _emit({"accepted": True, "steps": [s.as_dict() for s in steps],
           "intruder_observes": [str(s.event) for s in steps[1:] if s.event in visible]})


def cmd_export_dot(args):
    out = _out_dir(args)
    if args.automaton:
        aut = _load_automaton(args.automaton)
        files = _write_automaton(aut, out, Path(args.automaton).stem, ["dot"])
    else:
        inst = _instance(args)
        cs = build_components(inst).as_dict()
        names = [args.component] if args.component else sorted(cs)
        unknown = [n for n in names if n not in cs]
        if unknown:
            raise UsageError(f"unknown component {unknown[0]!r}; choose from {sorted(cs)}")
        files = {}
        for n in names:
            files.update(_write_automaton(cs[n], out, n, ["dot"]))
    _emit({"files": files})


def cmd_example(args):
    doc = example_document()
    if args.out:
        p = Path(args.out)
        if p.suffix != ".json":
            p.mkdir(parents=True, exist_ok=True)
            p = p / "ntu_example.json"
        p.write_text(json.dumps(doc, indent=2) + "\n")
        _emit({"written": str(p)})
    else:
        _emit(doc)


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", help="instance JSON file")
    common.add_argument("--example", dest="use_example", action="store_true",
                        help="use the bundled campus example instead of --instance")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--format", choices=["json", "dot"], default="json")
    common.add_argument("--explain", action="store_true", help="print synthesis fixpoint traces to stderr")
    common.add_argument("-v", "--verbose", action="count", default=0)

    sat = argparse.ArgumentParser(add_help=False)
    sat.add_argument("--k", type=int)
    sat.add_argument("--l", type=int)
    sat.add_argument("--k-max", type=int)
    sat.add_argument("--l-max", type=int)
    sat.add_argument("--horizon-cap", type=int)
    sat.add_argument("--horizon", type=int, help="fixed horizon for DIMACS export")
    sat.add_argument("--me", help="ensemble automaton JSON (otherwise synthesized)")
    sat.add_argument("--plain-encoding", action="store_true",
                     help="disable witness pruning and the single-choice clauses")

    agents = argparse.ArgumentParser(add_help=False)
    agents.add_argument("--m", help="mask automaton JSON")
    agents.add_argument("--e", help="editor automaton JSON")
    agents.add_argument("--s", help="supervisor automaton JSON")

    p = argparse.ArgumentParser(prog="cosynth", description="Opacity-enforcing mask, editor and supervisor co-synthesis.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check an instance").set_defaults(func=cmd_validate)
    sub.add_parser("build-components", parents=[common],
                   help="write G, CE, MC, EC, SC, I, Iw").set_defaults(func=cmd_build_components)
    sub.add_parser("synth-me", parents=[common], help="synthesize the mask-editor ensemble").set_defaults(
        func=cmd_synth_me)
    d = sub.add_parser("decompose", parents=[common, sat], help="split the ensemble into M and E by SAT")
    d.add_argument("--solver", choices=["internal", "dimacs"], default="internal")
    d.add_argument("--model", help="model file from an external solver (with --solver dimacs)")
    d.set_defaults(func=cmd_decompose)
    sub.add_parser("synth-s", parents=[common, agents], help="synthesize the supervisor for given M, E").set_defaults(
        func=cmd_synth_s)
    r = sub.add_parser("run", parents=[common, sat], help="full pipeline with verification")
    r.add_argument("--solver", choices=["internal"], default="internal")
    r.add_argument("--retry-decompose", type=int, nargs="?", const=3, default=0, metavar="N",
                   help="request up to N further SAT models if supervisor synthesis fails")
    r.set_defaults(func=cmd_run)
    sub.add_parser("verify", parents=[common, agents], help="verify a closed loop").set_defaults(func=cmd_verify)
    s = sub.add_parser("simulate", parents=[common, agents], help="replay an event trace")
    s.add_argument("--trace", default="", help="space-separated events")
    s.set_defaults(func=cmd_simulate)
    x = sub.add_parser("export-dot", parents=[common], help="GraphViz export")
    x.add_argument("--automaton", help="automaton JSON to convert")
    x.add_argument("--component", help="one component name (default: all)")
    x.set_defaults(func=cmd_export_dot)
    sub.add_parser("export-dimacs", parents=[common, sat], help="write the decomposition CNF").set_defaults(
        func=cmd_export_dimacs)
    sub.add_parser("example", parents=[common], help="print or write the bundled instance").set_defaults(
        func=cmd_example)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    level = logging.WARNING - 10 * min(args.verbose, 2) if args.verbose else logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level, format="%(message)s", force=True)
    try:
        args.func(args)
    except InstanceError as exc:
        _emit({"valid": False, "violations": list(exc.violations)})
        return 2
    except UsageError as exc:
        _emit({"error": str(exc)})
        return 2
    except DomainFailure as exc:
        log.error("%s", exc)
        if exc.payload:
            _emit({"failure": str(exc), **exc.payload})
        return 1
    except (SynthesisError, EncodingError) as exc:
        _emit({"error": str(exc)})
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
