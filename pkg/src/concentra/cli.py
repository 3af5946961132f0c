"""Batch command-line surface.

Commands are deterministic: identical invocations (inputs + seed) produce
byte-identical outputs, with floats rendered at 12 significant digits.
Exit codes: 0 success, 1 negative verdict (not concentrated, not
diversifiable), 2 input error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import copula as cop
from .concentration import (
    NotConcentrated,
    NotRepresentable,
    ScenarioSet,
    TailCertificate,
    collapse,
    find_common_tail_event,
)
from .dist import DiscreteDistribution
from .jsonio import canonical_json
from .portfolio import BoxSet, LinearSet, MinESGivenReturn, PortfolioProblem, SimplexSet, frontier
from .riskmeasures import es, lower_es, var
from .simplex import LPStatus

__all__ = ["main", "RunConfig"]

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3

SUPPORTED_CONFIG_VERSIONS = ("1",)


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Frontier run parameters loaded from a JSON config file."""

    version: str
    p: float
    n_points: int
    mode: str
    constraints: dict

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path} is not valid JSON: {exc}") from exc
        version = str(doc.get("version", ""))
        if version not in SUPPORTED_CONFIG_VERSIONS:
            raise InputError(
                f"config version {version!r} unsupported; expected one of {SUPPORTED_CONFIG_VERSIONS}"
            )
        try:
            p = float(doc["p"])
            n_points = int(doc.get("n_points", 11))
            mode = str(doc.get("mode", "min_es_given_return"))
            constraints = dict(doc.get("constraints", {"type": "simplex"}))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed config field: {exc}") from exc
        if not 0.0 < p < 1.0:
            raise InputError(f"config p must lie in (0, 1), got {p}")
        if n_points < 2:
            raise InputError("config n_points must be >= 2")
        if mode != "min_es_given_return":
            raise InputError(f"frontier sweeps min_es_given_return; got mode {mode!r}")
        return cls(version, p, n_points, mode, constraints)

    def feasible_set(self):
        kind = str(self.constraints.get("type", "simplex"))
        if kind == "simplex":
            return SimplexSet()
        if kind == "box":
            try:
                return BoxSet(tuple(self.constraints["lo"]), tuple(self.constraints["hi"]))
            except KeyError as exc:
                raise InputError(f"box constraints need lo and hi: {exc}") from exc
        if kind == "linear":
            try:
                G = tuple(tuple(row) for row in self.constraints["G"])
                h = tuple(self.constraints["h"])
            except KeyError as exc:
                raise InputError(f"linear constraints need G and h: {exc}") from exc
            return LinearSet(G, h)
        raise InputError(f"unknown constraint type {kind!r}")


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_scenarios(path: str) -> tuple[ScenarioSet, bool]:
    text = _read_text(path)
    head = text.splitlines()[0] if text.splitlines() else ""
    has_weight = head.lower().replace(" ", "").split(",")[-1:] == ["weight"]
    try:
        return ScenarioSet.from_csv(text), not has_weight
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_distribution(path: str) -> DiscreteDistribution:
    try:
        return DiscreteDistribution.from_csv(_read_text(path))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_copula(path: str) -> cop.CheckerboardCopula:
    try:
        return cop.CheckerboardCopula.from_json(_read_text(path))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _write_out(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _check_p(p: float | None) -> float:
    if p is None:
        raise InputError("this command needs --p")
    if not 0.0 < p < 1.0:
        raise InputError(f"--p must lie in (0, 1), got {p}")
    return p


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_risk(args) -> int:
    p = _check_p(args.p)
    scen, equal_weights = _load_scenarios(args.scenarios)
    measures = [m.strip() for m in args.measures.split(",")] if args.measures else ["var", "es", "lower_es", "mean"]
    known = {"var", "es", "lower_es", "mean"}
    bad = [m for m in measures if m not in known]
    if bad:
        raise InputError(f"unknown measures {bad}; choose from {sorted(known)}")

    def row(label: str, d: DiscreteDistribution) -> dict:
        vals = {"var": var(d, p), "es": es(d, p), "lower_es": lower_es(d, p), "mean": d.mean()}
        return {"label": label, **{m: vals[m] for m in measures}}

    rows = [row(scen.labels[i], scen.position(i)) for i in range(scen.k)]
    rows.append(row("TOTAL", scen.total()))
    doc = {
        "command": "risk",
        "operation": "risk_table",
        "p": p,
        "measures": measures,
        "weights_assumed_equal": equal_weights,
        "rows": rows,
    }
    if args.format == "json":
        _write_out(canonical_json(doc), args.out)
    else:
        width = max(len(r["label"]) for r in rows)
        lines = [" ".join([f"{'position':<{width}}"] + [f"{m:>16}" for m in measures])]
        for r in rows:
            lines.append(" ".join([f"{r['label']:<{width}}"] + [f"{_fmt(r[m]):>16}" for m in measures]))
        if equal_weights:
            lines.append("(no weight column: equal scenario weights assumed)")
        _write_out("\n".join(lines), None)
        if args.out:
            _write_out(canonical_json(doc), args.out)
    return EXIT_OK


def _cmd_concentration(args) -> int:
    p = _check_p(args.p)
    scen, _ = _load_scenarios(args.scenarios)
    res = find_common_tail_event(scen, p)
    singles = sum(es(scen.position(i), p) for i in range(scen.k))
    total = es(scen.total(), p)
    doc = {
        "command": "concentration",
        "operation": "find_common_tail_event",
        "p": p,
        "es_sum_of_positions": singles,
        "es_of_total": total,
        "es_additivity_gap": singles - total,
    }
    if isinstance(res, TailCertificate):
        doc["verdict"] = "concentrated"
        doc["event"] = list(res.event)
        doc["event_weight"] = res.event_weight
        doc["thresholds"] = list(res.thresholds)
        code = EXIT_OK
    else:
        doc["verdict"] = (
            "not_concentrated" if isinstance(res, NotConcentrated) else "not_representable"
        )
        doc["reason"] = res.reason
        code = EXIT_VERDICT
    _write_out(canonical_json(doc), args.out)
    return code


def _cmd_frontier(args) -> int:
    if args.config is None:
        raise InputError("frontier needs --config")
    cfg = RunConfig.from_file(args.config)
    scen, _ = _load_scenarios(args.scenarios)
    prob = PortfolioProblem(scen, cfg.p, cfg.feasible_set(), MinESGivenReturn(0.0))
    try:
        points = frontier(prob, cfg.n_points)
    except ValueError as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER
    good = [pt for pt in points if pt.status is LPStatus.OPTIMAL]
    if not good:
        sys.stderr.write("solver failure: no frontier point solved\n")
        return EXIT_SOLVER
    k = scen.k
    lines = [",".join(["target", "es", "mean"] + [f"w_{i + 1}" for i in range(k)])]
    for pt in good:
        lines.append(",".join([_fmt(pt.target), _fmt(pt.es), _fmt(pt.mean)] + [_fmt(w) for w in pt.weights]))
    _write_out("\n".join(lines), args.out)
    return EXIT_OK


def _cmd_collapse(args) -> int:
    p = _check_p(args.p)
    if args.eps is None or args.eps <= 0:
        raise InputError("collapse needs --eps > 0")
    d = _load_distribution(args.distribution)
    res = collapse(d, p, args.eps)
    doc = json.loads(res.to_json())
    doc = {"command": "collapse", "operation": "collapse", "p": p, "eps": args.eps, **doc}
    _write_out(canonical_json(doc), args.out)
    return EXIT_OK


def _cmd_copula(args) -> int:
    c = _load_copula(args.copula)
    if args.sub == "check-dp":
        p = _check_p(args.p)
        inside = c.in_dp(p)
        doc = {
            "command": "copula.check-dp",
            "operation": "in_dp",
            "p": p,
            "cdf_at_pp": c.cdf(p, p),
            "in_dp": inside,
        }
        _write_out(canonical_json(doc), args.out)
        return EXIT_OK if inside else EXIT_VERDICT
    if args.sub == "densify":
        out = c
        for _ in range(max(1, args.sweeps)):
            out = cop.densify(out)
        _write_out(out.to_json(), args.out)
        return EXIT_OK
    if args.sub == "simulate":
        diag = cop.lln_diagnostic(
            c,
            chain_length=args.length,
            replications=args.reps,
            p=args.p,
            seed=args.seed,
        )
        _write_out(diag.to_json(), args.out)
        if args.csv:
            with open(args.csv, "w", encoding="utf-8") as fh:
                fh.write(diag.partial_means_csv())
        return EXIT_OK if diag.verdict == cop.DIVERSIFIABLE else EXIT_VERDICT
    raise InputError(f"unknown copula subcommand {args.sub!r}")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="concentra",
        description="Scenario-based shortfall risk, tail concentration, mean-ES frontiers, "
        "and copula diversifiability diagnostics.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    risk = sub.add_parser("risk", help="per-position and total VaR/ES/lower-ES/mean table")
    risk.add_argument("scenarios", help="scenario CSV (position columns, optional weight column)")
    risk.add_argument("--p", type=float, default=None, help="confidence level in (0,1)")
    risk.add_argument("--measures", default=None, help="comma list from var,es,lower_es,mean")
    risk.add_argument("--format", choices=("text", "json"), default="text")
    risk.add_argument("--out", default=None, help="write the JSON report here")
    risk.set_defaults(run=_cmd_risk)

    conc = sub.add_parser("concentration", help="common tail event search + additivity gap")
    conc.add_argument("scenarios")
    conc.add_argument("--p", type=float, default=None)
    conc.add_argument("--out", default=None)
    conc.set_defaults(run=_cmd_concentration)

    fr = sub.add_parser("frontier", help="mean-ES frontier sweep (CSV output)")
    fr.add_argument("scenarios")
    fr.add_argument("--config", default=None, help="JSON config: version, p, mode, constraints, n_points")
    fr.add_argument("--out", default=None)
    fr.set_defaults(run=_cmd_frontier)

    co = sub.add_parser("copula", help="checkerboard copula tools")
    co.add_argument("sub", choices=("check-dp", "densify", "simulate"))
    co.add_argument("copula", help="copula JSON file {n, mass}")
    co.add_argument("--p", type=float, default=None)
    co.add_argument("--sweeps", type=int, default=1, help="densify sweeps to apply")
    co.add_argument("--length", type=int, default=10_000, help="chain length for simulate")
    co.add_argument("--reps", type=int, default=100, help="replications for simulate")
    co.add_argument("--seed", type=int, default=0)
    co.add_argument("--out", default=None)
    co.add_argument("--csv", default=None, help="write partial-means CSV here (simulate)")
    co.set_defaults(run=_cmd_copula)

    cl = sub.add_parser("collapse", help="two-point folding trace of a distribution CSV")
    cl.add_argument("distribution", help="CSV with value,prob columns")
    cl.add_argument("--p", type=float, default=None)
    cl.add_argument("--eps", type=float, default=None)
    cl.add_argument("--out", default=None)
    cl.set_defaults(run=_cmd_collapse)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        return args.run(args)
    except InputError as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT
    except ValueError as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
