"""Command-line front end: ``skipfree run | validate | simulate``.

Inputs are JSON files; reports are CSV or JSON. Exit codes: 0 when every
checked row passes, 1 on a failed check, 2 on malformed input, 3 when a
model or query is invalid for the computation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from . import _arith as ar
from . import boundary, chain, cpp, lumped, mbi, panel, report
from . import simulate as sim
from ._backend import BACKEND
from .errors import ConfigError, ModelError, SkipFreeError
from .report import Row

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_MODEL = 0, 1, 2, 3

MODELS = ("chain", "cpp", "mbi")
QUERY_ARGS = {
    "hit": ("x", "y"),
    "two_sided": ("x", "a", "b"),
    "exit_interval": ("x", "a", "b"),
    "passage_up": ("x", "b"),
    "resolvent": ("x", "y"),
    "transient_gf": ("x", "t", "s"),
}
REAL_ARGS = ("t", "s")
# optional per-query settings for the simulator
SIM_ARGS = ("floor", "ceiling")
EVENT_KINDS = ("hit", "two_sided", "exit_interval", "passage_up")
MC_PASS_RATE = 0.99


# -- input parsing --------------------------------------------------------------------


def load_json(path):
    """Parse a JSON file; syntax errors carry their line and column."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from None


def _int_field(obj, key, pointer):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}", f"{pointer}.{key}")
    return v


@dataclass
class Query:
    kind: str
    args: dict
    pointer: str
    mc: bool = True
    weighting: tuple | None = None


@dataclass
class RunConfig:
    model: str
    params: object
    mode: str
    queries: list
    sim: sim.SimConfig | None = None
    output: dict = field(default_factory=dict)
    classification: str | None = None


def _parse_query(obj, i, mode):
    pointer = f"queries[{i}]"
    if not isinstance(obj, dict):
        raise ConfigError("query must be an object", pointer)
    kind = obj.get("kind")
    if kind not in QUERY_ARGS:
        raise ConfigError(f"unknown query kind {kind!r}; expected one of {sorted(QUERY_ARGS)}",
                          f"{pointer}.kind")
    raw = obj.get("args", {})
    if not isinstance(raw, dict):
        raise ConfigError("args must be an object", f"{pointer}.args")
    allowed = set(QUERY_ARGS[kind]) | set(SIM_ARGS)
    extra = set(raw) - allowed
    if extra:
        raise ConfigError(f"unexpected arguments {sorted(extra)}", f"{pointer}.args")
    args = {}
    for key in QUERY_ARGS[kind] + SIM_ARGS:
        if key not in raw:
            if key in QUERY_ARGS[kind]:
                raise ConfigError(f"missing argument {key!r}", f"{pointer}.args")
            continue
        if key in REAL_ARGS:
            args[key] = ar.parse_scalar(raw[key], ar.FLOAT, f"{pointer}.args.{key}")
        else:
            args[key] = _int_field(raw, key, f"{pointer}.args")
    weighting = None
    if "weighting" in obj:
        w = obj["weighting"]
        if not isinstance(w, dict) or set(w) - {"p", "q"}:
            raise ConfigError("weighting must be an object with fields p and q", f"{pointer}.weighting")
        weighting = tuple(ar.parse_scalar(w.get(k, 0), ar.FLOAT, f"{pointer}.weighting.{k}")
                          for k in ("p", "q"))
    mc = obj.get("mc", True)
    if not isinstance(mc, bool):
        raise ConfigError("mc must be true or false", f"{pointer}.mc")
    return Query(kind, args, pointer, mc, weighting)


def _parse_params(model, obj, mode):
    if model == "chain":
        return chain.FiniteSkipFreeChain.from_json(obj, mode)
    if not isinstance(obj, dict):
        raise ConfigError("params must be an object", "params")
    family = cpp.CppParams if model == "cpp" else mbi.MbiParams
    return family.from_json(obj, mode, "params")


def parse_output(obj):
    out = obj.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("output must be an object", "output")
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}", "output.format")
    return {"format": fmt, "path": out.get("path")}


def parse_run_config(obj, mode=None, seed=None) -> RunConfig:
    """Validate a run configuration; ``mode`` and ``seed`` override the file."""
    if not isinstance(obj, dict):
        raise ConfigError("configuration must be a JSON object")
    model = obj.get("model")
    if model not in MODELS:
        raise ConfigError(f"model must be one of {list(MODELS)}, got {model!r}", "model")
    mode = mode or obj.get("mode", ar.FLOAT)
    if mode not in ar.MODES:
        raise ConfigError(f"mode must be one of {list(ar.MODES)}", "mode")
    if "params" not in obj:
        raise ConfigError("missing params", "params")
    params = _parse_params(model, obj["params"], mode)
    queries = obj.get("queries", [])
    if not isinstance(queries, list):
        raise ConfigError("queries must be a list", "queries")
    parsed = [_parse_query(q, i, mode) for i, q in enumerate(queries)]
    for q in parsed:
        if q.kind == "transient_gf" and model != "mbi":
            raise ConfigError("transient_gf applies to the branching model only", f"{q.pointer}.kind")
        if q.weighting is not None and model == "chain":
            raise ConfigError("pathwise weights need a cpp or mbi model", f"{q.pointer}.weighting")
    cfg = None
    if obj.get("sim") is not None:
        cfg = sim.SimConfig.from_json(obj["sim"])
        if seed is not None:
            cfg = replace(cfg, seed=seed)
    classification = obj.get("classification")
    if classification is not None and (model != "mbi" or classification not in (mbi.TRANSIENT, mbi.RECURRENT)):
        raise ConfigError("classification override applies to mbi models: 'transient' or 'recurrent'",
                          "classification")
    return RunConfig(model, params, mode, parsed, cfg, parse_output(obj), classification)


# -- evaluation -----------------------------------------------------------------------


def _horizon(queries) -> int:
    reach = [max(v for k, v in q.args.items() if k not in REAL_ARGS + SIM_ARGS) for q in queries]
    return 2 * max(reach, default=0) + 64


class _Evaluator:
    """Closed forms, independent oracles and simulator events for one model."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.model = cfg.params
        K = _horizon(cfg.queries)
        if cfg.model == "chain":
            rep = chain.validate_chain(self.model)
            if not rep.valid:
                raise ModelError("; ".join(rep.problems))
            self.pot = chain.Potential(self.model)
        elif cfg.model == "cpp":
            self.tables = cpp.build_tables(self.model, K)
        else:
            self.tables = mbi.build_tables(self.model, K, cfg.classification)

    @property
    def regime(self) -> str:
        if self.cfg.model == "chain":
            return "transient"
        return self.tables.regime if self.cfg.model == "cpp" else self.tables.classification

    def check(self, q: Query):
        recurrent = self.regime in (cpp.RECURRENT_CRITICAL, mbi.RECURRENT)
        if q.kind == "resolvent" and recurrent:
            raise ConfigError(f"resolvent is infinite for a {self.regime} model", f"{q.pointer}.kind")

    def closed_form(self, q: Query):
        a = q.args
        family = self.cfg.model
        if family == "chain":
            pot = self.pot
            return {
                "hit": lambda: pot.hit_prob(a["x"], a["y"]),
                "two_sided": lambda: pot.two_sided_exit(a["x"], a["a"], a["b"]),
                "exit_interval": lambda: pot.dynkin_exit(lambda z: ar.one(self.cfg.mode), a["a"], a["b"], a["x"]),
                "passage_up": lambda: pot.passage_up_prob(a["x"], a["b"]),
                "resolvent": lambda: pot.resolvent_entry(a["x"], a["y"]),
            }[q.kind]()
        mod, t = (cpp, self.tables) if family == "cpp" else (mbi, self.tables)
        two_sided = cpp.two_sided_exit_down if family == "cpp" else mbi.two_sided_exit
        return {
            "hit": lambda: mod.hit_prob(t, a["x"], a["y"]),
            "two_sided": lambda: two_sided(t, a["x"], a["a"], a["b"]),
            "exit_interval": lambda: mod.exit_interval_prob(t, a["x"], a["a"], a["b"]),
            "passage_up": lambda: mod.passage_up_prob(t, a["x"], a["b"]),
            "resolvent": lambda: mod.resolvent_G(t, a["x"], a["y"]),
            "transient_gf": lambda: mbi.transient_gf(t, a["x"], a["t"], a["s"]),
        }[q.kind]()

    def oracle(self, q: Query):
        """Exact finite linear solve for the same quantity, or None when there is none."""
        a, family, one = q.args, self.cfg.model, (lambda z: ar.one(self.cfg.mode))
        if family == "chain":
            c = self.model
            if q.kind == "resolvent":
                return ar.inv(-c.rates)[c.idx(a["x"]), c.idx(a["y"])]
            return {
                "hit": lambda: boundary.hit_prob(c, a["x"], a["y"]),
                "two_sided": lambda: boundary.two_sided_exit(c, a["x"], a["a"], a["b"]),
                "exit_interval": lambda: boundary.exit_expectation(c, one, a["a"], a["b"], a["x"]),
                "passage_up": lambda: boundary.passage_up_prob(c, a["x"], a["b"]),
            }[q.kind]()
        if q.kind in ("two_sided", "exit_interval"):
            window = lumped.cpp_window if family == "cpp" else lumped.mbi_window
            c = window(self.model, a["a"], a["b"])
            if q.kind == "two_sided":
                return boundary.two_sided_exit(c, a["x"], a["a"], a["b"])
            return boundary.exit_expectation(c, one, a["a"], a["b"], a["x"])
        if q.kind == "passage_up" and family == "mbi" and a["x"] < a["b"]:
            return boundary.passage_up_prob(lumped.mbi_below(self.model, a["b"]), a["x"], a["b"])
        return None

    def event(self, q: Query):
        a = q.args
        if q.kind == "hit":
            return sim.Event.hit(a["y"], a.get("floor"), a.get("ceiling"))
        if q.kind == "two_sided":
            return sim.Event.two_sided(a["a"], a["b"])
        if q.kind == "exit_interval":
            return sim.Event.exit(a["a"], a["b"])
        return sim.Event.passage_up(a["b"], a.get("floor"))

    def simulation_model(self, q: Query):
        """The weighted estimator runs on the model with its killing removed."""
        if q.weighting is None:
            return self.model
        m = self.model
        if self.cfg.model == "cpp":
            return cpp.CppParams(m.alpha, m.mu, ar.zero(self.cfg.mode))
        zero = ar.zero(self.cfg.mode)
        return mbi.MbiParams(m.alpha, m.mu, zero, m.beta, m.nu, zero)

    def estimate(self, q: Query):
        if self.cfg.sim is None or not q.mc or q.kind not in EVENT_KINDS:
            return None
        return sim.estimate(self.simulation_model(q), q.args["x"], self.event(q), self.cfg.sim,
                            weighting=q.weighting)


def evaluate(cfg: RunConfig, tol: float = 1e-9) -> list:
    """One report row per query."""
    if not cfg.queries:
        return []
    ev = _Evaluator(cfg)
    rows = []
    for q in cfg.queries:
        ev.check(q)
        try:
            closed = ev.closed_form(q)
            oracle = ev.oracle(q) if q.weighting is None else None
            mc = ev.estimate(q)
        except ModelError as exc:
            raise type(exc)(f"{q.pointer}: {exc}") from None
        exact = ar.is_rational(closed) and (oracle is None or ar.is_rational(oracle))
        rows.append(Row(q.kind, dict(q.args), closed, oracle, mc, tol=tol, exact=exact))
    return rows


# -- output ---------------------------------------------------------------------------


def _emit(text: str, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _write_rows(rows, output, extra=None):
    text = report.to_json(rows, extra) if output["format"] == "json" else report.to_csv(rows)
    _emit(text, output["path"])


def _merge_output(output, fmt, path):
    out = dict(output)
    if fmt:
        out["format"] = fmt
    if path:
        out["path"] = path
    return out


# -- subcommands ----------------------------------------------------------------------


def cmd_run(ns) -> int:
    cfg = parse_run_config(load_json(ns.config), ns.mode, ns.seed)
    rows = evaluate(cfg, ns.tol if ns.tol is not None else 1e-9)
    extra = {"config": {"model": cfg.model, "mode": cfg.mode,
                        "sim": cfg.sim.to_json() if cfg.sim else None}}
    _write_rows(rows, _merge_output(cfg.output, ns.format, ns.output), extra)
    return EXIT_FAIL if any(r.verdict == report.FAIL for r in rows) else EXIT_OK


@dataclass
class PanelSpec:
    seed: int = 0
    mode: str = ar.RATIONAL
    chains: int = 20
    cpps: int = 20
    mbis: int = 20
    tol: float = 1e-10
    mc_checks: int = 0
    sim: sim.SimConfig = field(default_factory=sim.SimConfig)
    output: dict = field(default_factory=lambda: {"format": "csv", "path": None})


def parse_panel_spec(obj, mode=None, seed=None, tol=None) -> PanelSpec:
    if not isinstance(obj, dict):
        raise ConfigError("panel specification must be a JSON object")
    known = {"seed", "mode", "chains", "cpps", "mbis", "tol", "mc", "output"}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown fields {sorted(unknown)}")
    spec = PanelSpec()
    kw = {}
    for key in ("seed", "chains", "cpps", "mbis"):
        if key in obj:
            kw[key] = _int_field(obj, key, "panel")
            if kw[key] < 0:
                raise ConfigError(f"{key} must be nonnegative", key)
    if "mode" in obj:
        kw["mode"] = obj["mode"]
    if "tol" in obj:
        kw["tol"] = ar.parse_scalar(obj["tol"], ar.FLOAT, "tol")
    mc = obj.get("mc")
    if mc is not None:
        if not isinstance(mc, dict):
            raise ConfigError("mc must be an object", "mc")
        kw["mc_checks"] = _int_field(mc, "checks", "mc") if "checks" in mc else 100
        if "sim" in mc:
            kw["sim"] = sim.SimConfig.from_json(mc["sim"], "mc.sim")
    kw["output"] = parse_output(obj)
    spec = replace(spec, **kw)
    if mode:
        spec = replace(spec, mode=mode)
    if seed is not None:
        spec = replace(spec, seed=seed, sim=replace(spec.sim, seed=seed))
    if tol is not None:
        spec = replace(spec, tol=tol)
    if spec.mode not in ar.MODES:
        raise ConfigError(f"mode must be one of {list(ar.MODES)}", "mode")
    return spec


def run_panel(spec: PanelSpec):
    """Oracle rows, Monte Carlo rows and whether the panel as a whole passes.

    Oracle rows must all pass. Monte Carlo rows are judged as a group: at
    least 99% must fall within three standard errors.
    """
    oracle_rows = panel.oracle_panel(spec.seed, spec.mode, spec.chains, spec.cpps, spec.mbis, spec.tol)
    mc_rows = panel.mc_panel(spec.seed, spec.mc_checks, spec.sim) if spec.mc_checks else []
    oracle_ok = all(r.verdict == report.PASS for r in oracle_rows)
    within = sum(r.verdict == report.PASS for r in mc_rows)
    mc_ok = not mc_rows or within >= MC_PASS_RATE * len(mc_rows)
    return oracle_rows, mc_rows, oracle_ok and mc_ok


def cmd_validate(ns) -> int:
    obj = load_json(ns.panel) if ns.panel else {}
    spec = parse_panel_spec(obj, ns.mode, ns.seed, ns.tol)
    oracle_rows, mc_rows, ok = run_panel(spec)
    rows = oracle_rows + mc_rows
    summary = report.summarize(rows)
    extra = {"panel": {"seed": spec.seed, "mode": spec.mode, "passed": ok}}
    _write_rows(rows, _merge_output(spec.output, ns.format, ns.output), extra)
    print(f"oracle checks: {summary['oracle_pass']}/{summary['oracle_checks']} pass; "
          f"monte carlo: {summary['mc_within_3se']}/{summary['mc_checks']} within 3 SE; "
          f"panel {'PASS' if ok else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


ESTIMATE_COLUMNS = ("query_kind", "args", "p_hat", "std_err", "n_paths", "n_capped", "bound_lo", "bound_hi")


def cmd_simulate(ns) -> int:
    cfg = parse_run_config(load_json(ns.config), ns.mode, ns.seed)
    if cfg.sim is None:
        raise ConfigError("simulate needs a sim section", "sim")
    for q in cfg.queries:
        if q.kind not in EVENT_KINDS:
            raise ConfigError(f"{q.kind} is not a simulated event", f"{q.pointer}.kind")
    records = []
    ev = _Evaluator(replace(cfg, queries=[])) if cfg.queries else None
    for q in cfg.queries:
        try:
            est = sim.estimate(ev.simulation_model(q), q.args["x"], ev.event(q), cfg.sim,
                               weighting=q.weighting)
        except ModelError as exc:
            raise type(exc)(f"{q.pointer}: {exc}") from None
        records.append({"query_kind": q.kind, "args": q.args, **est.to_json()})
    output = _merge_output(cfg.output, ns.format, ns.output)
    if output["format"] == "json":
        doc = {"metadata": {"version": __version__, "backend": BACKEND},
               "sim": cfg.sim.to_json(), "estimates": records}
        text = json.dumps(doc, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=ESTIMATE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in records:
            lo, hi = r["bounds"] or ("", "")
            writer.writerow({"query_kind": r["query_kind"],
                             "args": ";".join(f"{k}={v}" for k, v in r["args"].items()),
                             "p_hat": r["p_hat"], "std_err": r["std_err"], "n_paths": r["n_paths"],
                             "n_capped": r["n_capped"], "bound_lo": lo, "bound_hi": hi})
        text = buf.getvalue()
    _emit(text, output["path"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=ar.MODES, help="arithmetic mode (overrides the file)")
    common.add_argument("--seed", type=int, help="simulation seed (overrides the file)")
    common.add_argument("--tol", type=float, help="oracle agreement tolerance")
    common.add_argument("--format", choices=("csv", "json"), help="report format")
    common.add_argument("-o", "--output", help="report path (default: standard output)")

    parser = argparse.ArgumentParser(prog="skipfree", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="evaluate the queries of a model file")
    run.add_argument("config")
    run.set_defaults(func=cmd_run)
    val = sub.add_parser("validate", parents=[common], help="run the randomized regression panel")
    val.add_argument("panel", nargs="?", help="panel specification (default panel if omitted)")
    val.set_defaults(func=cmd_validate)
    simp = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimates for the queries of a model file")
    simp.add_argument("config")
    simp.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SkipFreeError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
