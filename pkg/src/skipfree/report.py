"""Report rows and their CSV/JSON rendering."""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
from dataclasses import dataclass

from . import __version__
from . import _arith as ar
from ._backend import BACKEND

COLUMNS = ("query_kind", "args", "closed_form", "oracle", "mc_p_hat", "mc_stderr", "abs_diff", "verdict")
PASS, FAIL, UNCHECKED = "PASS", "FAIL", "-"
MC_SIGMAS = 3.0
# an estimate of exactly 0 or 1 has zero standard error; allow this much round-off
MC_FLOOR = 1e-9


@dataclass
class Row:
    query_kind: str
    args: dict
    closed_form: object
    oracle: object = None
    mc: object = None
    tol: float = 1e-9
    exact: bool = False
    label: str = ""

    @property
    def abs_diff(self):
        if self.oracle is None:
            return None
        diff = self.closed_form - self.oracle
        return abs(diff) if self.exact else abs(float(diff))

    @property
    def oracle_ok(self):
        if self.oracle is None:
            return None
        return self.abs_diff == 0 if self.exact else self.abs_diff < self.tol

    @property
    def mc_ok(self):
        if self.mc is None:
            return None
        return abs(self.mc.p_hat - float(self.closed_form)) <= MC_SIGMAS * self.mc.std_err + MC_FLOOR

    @property
    def verdict(self) -> str:
        checks = [c for c in (self.oracle_ok, self.mc_ok) if c is not None]
        if not checks:
            return UNCHECKED
        return PASS if all(checks) else FAIL

    def record(self) -> dict:
        return {
            "query_kind": self.query_kind,
            "args": ";".join(f"{k}={v}" for k, v in self.args.items()),
            "closed_form": ar.format_scalar(self.closed_form),
            "oracle": None if self.oracle is None else ar.format_scalar(self.oracle),
            "mc_p_hat": None if self.mc is None else self.mc.p_hat,
            "mc_stderr": None if self.mc is None else self.mc.std_err,
            "abs_diff": None if self.abs_diff is None else ar.format_scalar(self.abs_diff),
            "verdict": self.verdict,
        }


def summarize(rows) -> dict:
    verdicts = [r.verdict for r in rows]
    mc = [r.mc_ok for r in rows if r.mc_ok is not None]
    oracle = [r.oracle_ok for r in rows if r.oracle_ok is not None]
    return {
        "rows": len(rows),
        "pass": verdicts.count(PASS),
        "fail": verdicts.count(FAIL),
        "unchecked": verdicts.count(UNCHECKED),
        "oracle_checks": len(oracle),
        "oracle_pass": sum(oracle),
        "mc_checks": len(mc),
        "mc_within_3se": sum(mc),
    }


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: "" if v is None else v for k, v in r.record().items()})
    return buf.getvalue()


def to_json(rows, extra=None) -> str:
    doc = {
        "metadata": {
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "version": __version__,
            "backend": BACKEND,
        },
        "rows": [r.record() for r in rows],
        "summary": summarize(rows),
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2) + "\n"
