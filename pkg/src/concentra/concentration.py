"""Tail events and concentration on weighted scenario sets.

A scenario set is an m-by-k matrix of joint losses with scenario weights.  A
common tail event for all positions, when one exists at weight 1 - p, is
found by sandwiching: every scenario strictly above a position's level-p
quantile is mandatory, every scenario weakly above each quantile is
admissible, and boundary scenarios fill the gap.  Coupling constructors build
scenario sets that share a tail event by construction, and the collapse
iteration folds a distribution toward its two-point tail summary while
preserving its upper and lower tail means exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .dist import DiscreteDistribution, mixture
from .jsonio import canonical_json
from .riskmeasures import es, lower_es

__all__ = [
    "ScenarioSet",
    "TailCertificate",
    "NotConcentrated",
    "NotRepresentable",
    "GridError",
    "find_common_tail_event",
    "es_additivity_test",
    "couple",
    "collapse",
    "CollapseStep",
    "CollapseResult",
    "COUPLING_STYLES",
]

WEIGHT_TOL = 1e-10
COUPLING_STYLES = ("comonotone", "tail_block_antitone", "tail_block_shuffle")


class GridError(ValueError):
    """Requested scenario count does not split the confidence level exactly."""


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Weighted joint loss outcomes: m scenarios across k positions."""

    losses: np.ndarray
    weights: np.ndarray
    labels: list[str] | None = None

    def __post_init__(self):
        losses = np.asarray(self.losses, dtype=float)
        if losses.ndim == 1:
            losses = losses[:, None]
        if losses.ndim != 2 or losses.size == 0:
            raise ValueError("losses must be a non-empty m-by-k matrix")
        if not np.all(np.isfinite(losses)):
            raise ValueError("losses must be finite")
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size != losses.shape[0]:
            raise ValueError(f"{losses.shape[0]} scenarios but {w.size} weights")
        if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and > 0")
        total = float(w.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total!r}, outside renormalization tolerance")
        if abs(total - 1.0) > 1e-12:
            w = w / total
        labels = list(self.labels) if self.labels is not None else None
        if labels is None:
            labels = [f"X{i + 1}" for i in range(losses.shape[1])]
        if len(labels) != losses.shape[1]:
            raise ValueError(f"{losses.shape[1]} positions but {len(labels)} labels")
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "labels", labels)
        losses.flags.writeable = False
        w.flags.writeable = False

    @classmethod
    def from_unchecked(cls, losses: np.ndarray, weights: np.ndarray, labels: list[str]) -> "ScenarioSet":
        """Fast path for internally constructed sets; skips validation."""
        self = object.__new__(cls)
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", labels)
        return self

    @property
    def m(self) -> int:
        return self.losses.shape[0]

    @property
    def k(self) -> int:
        return self.losses.shape[1]

    def position(self, i: int) -> DiscreteDistribution:
        """Marginal loss distribution of one position."""
        return DiscreteDistribution(self.losses[:, i], self.weights)

    def total(self) -> DiscreteDistribution:
        """Distribution of the portfolio sum across positions."""
        return DiscreteDistribution(self.losses.sum(axis=1), self.weights)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(self.labels) + ["weight"])
        for row, wt in zip(self.losses, self.weights):
            w.writerow([repr(float(x)) for x in row] + [repr(float(wt))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ScenarioSet":
        rows = list(csv.reader(io.StringIO(text)))
        rows = [r for r in rows if r and any(c.strip() for c in r)]
        if len(rows) < 2:
            raise ValueError("scenario CSV needs a header row and at least one scenario")
        header = [h.strip() for h in rows[0]]
        has_weight = bool(header) and header[-1].lower() == "weight"
        labels = header[:-1] if has_weight else header
        if not labels:
            raise ValueError("scenario CSV has no position columns")
        ncol = len(header)
        data = []
        for r, row in enumerate(rows[1:], start=2):
            if len(row) != ncol:
                raise ValueError(f"scenario CSV row {r}: expected {ncol} fields, got {len(row)}")
            try:
                data.append([float(x) for x in row])
            except ValueError as exc:
                bad = next(i for i, x in enumerate(row) if not _is_float(x))
                raise ValueError(f"scenario CSV row {r}, column {bad + 1}: {exc}") from exc
        arr = np.array(data)
        if has_weight:
            return cls(arr[:, :-1], arr[:, -1], labels)
        m = arr.shape[0]
        return cls(arr, np.full(m, 1.0 / m), labels)


def _is_float(x: str) -> bool:
    try:
        float(x)
        return True
    except ValueError:
        return False


@dataclass(frozen=True)
class TailCertificate:
    """A scenario subset of weight 1 - p on which every position is extremal."""

    event: tuple[int, ...]
    level: float
    thresholds: tuple[float, ...]
    event_weight: float

    def to_json(self) -> str:
        return canonical_json(
            {
                "verdict": "concentrated",
                "level": self.level,
                "event": list(self.event),
                "event_weight": self.event_weight,
                "thresholds": list(self.thresholds),
            }
        )


@dataclass(frozen=True)
class NotConcentrated:
    level: float
    reason: str

    def to_json(self) -> str:
        return canonical_json({"verdict": "not_concentrated", "level": self.level, "reason": self.reason})


@dataclass(frozen=True)
class NotRepresentable:
    """Feasible bounds hold but no boundary subset hits weight 1 - p exactly."""

    level: float
    reason: str

    def to_json(self) -> str:
        return canonical_json({"verdict": "not_representable", "level": self.level, "reason": self.reason})


def find_common_tail_event(s: ScenarioSet, p: float):
    """Find a scenario event of weight 1 - p that is a tail event of every position.

    Per position the event must contain every scenario whose loss exceeds the
    position's level-p quantile and may only contain scenarios at or above it.
    Boundary scenarios (at the quantile for all positions) are filled greedily
    by descending minimum-across-positions loss.  Returns a TailCertificate,
    or NotConcentrated when the sandwich is infeasible, or NotRepresentable
    when only the exact weight cannot be assembled from boundary atoms.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"level p must lie in (0, 1), got {p!r}")
    target = 1.0 - p
    thresholds = np.array([s.position(i).quantile(p) for i in range(s.k)])
    mandatory = (s.losses > thresholds).any(axis=1)
    admissible = (s.losses >= thresholds).all(axis=1)

    if np.any(mandatory & ~admissible):
        return NotConcentrated(
            p, "a scenario exceeds one position's tail threshold but sits below another's"
        )
    w_mand = float(s.weights[mandatory].sum())
    w_adm = float(s.weights[admissible].sum())
    if w_mand > target + WEIGHT_TOL or w_adm < target - WEIGHT_TOL:
        return NotConcentrated(
            p,
            f"admissible weight range [{w_mand:.12g}, {w_adm:.12g}] excludes {target:.12g}",
        )

    residual = target - w_mand
    boundary = np.flatnonzero(admissible & ~mandatory)
    order = boundary[np.lexsort((boundary, -s.losses[boundary].min(axis=1)))]
    chosen = list(np.flatnonzero(mandatory))
    acc = 0.0
    for idx in order:
        wi = float(s.weights[idx])
        if acc + wi <= residual + WEIGHT_TOL:
            chosen.append(int(idx))
            acc += wi
            if acc >= residual - WEIGHT_TOL:
                break
    if abs(acc - residual) > WEIGHT_TOL:
        return NotRepresentable(
            p, f"no boundary subset reaches weight {residual:.12g} exactly (got {acc:.12g})"
        )
    chosen = sorted(chosen)
    return TailCertificate(
        event=tuple(chosen),
        level=p,
        thresholds=tuple(float(t) for t in thresholds),
        event_weight=float(s.weights[chosen].sum()),
    )


def es_additivity_test(s: ScenarioSet, p: float, tol: float = WEIGHT_TOL) -> bool:
    """True when the tail mean aggregates additively across positions.

    Checks es(sum) >= sum(es) - tol for the full vector and for every pair of
    positions; subadditivity makes the reverse inequality automatic.
    """
    singles = [es(s.position(i), p) for i in range(s.k)]
    if es(s.total(), p) < sum(singles) - tol:
        return False
    if s.k > 2:
        for i in range(s.k):
            for j in range(i + 1, s.k):
                pair = DiscreteDistribution(s.losses[:, i] + s.losses[:, j], s.weights)
                if es(pair, p) < singles[i] + singles[j] - tol:
                    return False
    return True


def couple(
    dx: DiscreteDistribution,
    dy: DiscreteDistribution,
    p: float,
    style: str,
    m: int,
    seed: int = 0,
) -> ScenarioSet:
    """Equi-probable coupling of two marginals that shares a level-p tail event.

    Both marginals are discretized on the grid u_j = (j - 1/2)/m and the y
    column is paired within the lower block (levels below p) and within the
    upper block separately: identically ("comonotone"), reversed per block
    ("tail_block_antitone"), or permuted per block ("tail_block_shuffle",
    seeded).  m*p and m*(1-p) must be integral, otherwise GridError.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"level p must lie in (0, 1), got {p!r}")
    if style not in COUPLING_STYLES:
        raise ValueError(f"unknown coupling style {style!r}; expected one of {COUPLING_STYLES}")
    if m < 2:
        raise GridError("coupling needs at least two scenarios")
    lo = m * p
    if abs(lo - round(lo)) > 1e-9:
        raise GridError(f"m*p = {lo!r} is not integral; choose m so both blocks are whole")
    lo = int(round(lo))
    if lo == 0 or lo == m:
        raise GridError(f"blocks of sizes {lo} and {m - lo} must both be non-empty")

    u = (np.arange(m) + 0.5) / m
    x = dx.quantiles(u)
    y = dy.quantiles(u)
    idx = np.arange(m)
    if style == "tail_block_antitone":
        idx[:lo] = idx[:lo][::-1]
        idx[lo:] = idx[lo:][::-1]
    elif style == "tail_block_shuffle":
        rng = np.random.default_rng(seed)
        idx[:lo] = rng.permutation(idx[:lo])
        idx[lo:] = rng.permutation(idx[lo:])
    return ScenarioSet.from_unchecked(
        np.column_stack([x, y[idx]]),
        np.full(m, 1.0 / m),
        labels=["X", "Y"],
    )


@dataclass(frozen=True)
class CollapseStep:
    iteration: int
    es: float
    lower_es: float
    mean: float
    upper_range: float
    lower_range: float
    support: int


@dataclass(frozen=True)
class CollapseResult:
    terminal: DiscreteDistribution
    trace: list[CollapseStep]
    z_star: DiscreteDistribution

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1

    def to_json(self) -> str:
        return canonical_json(
            {
                "iterations": self.iterations,
                "trace": [vars(t) for t in self.trace],
                "terminal": [
                    {"value": v, "prob": q}
                    for v, q in zip(self.terminal.values, self.terminal.probs)
                ],
                "two_point_target": [
                    {"value": v, "prob": q}
                    for v, q in zip(self.z_star.values, self.z_star.probs)
                ],
            }
        )


def collapse(d: DiscreteDistribution, p: float, eps: float) -> CollapseResult:
    """Fold a distribution toward its two-point tail summary.

    Each iteration splits the law at level p into its upper and lower
    conditional parts, replaces both by their symmetric quantile average, and
    remixes with weights (1-p, p).  The upper/lower tail means and the mean
    are invariant; both conditional ranges at least halve per step, so the
    iteration stops once both fall below eps.  The idealized limit places the
    upper tail mean at weight 1-p and the lower tail mean at weight p.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"level p must lie in (0, 1), got {p!r}")
    if not eps > 0.0:
        raise ValueError(f"eps must be > 0, got {eps!r}")
    a, b = es(d, p), lower_es(d, p)
    z_star = DiscreteDistribution([b, a], [p, 1.0 - p]) if a != b else DiscreteDistribution([a], [1.0])

    trace: list[CollapseStep] = []
    cur = d
    max_iter = max(1, int(np.ceil(np.log2(max(d.range_width(), eps) / eps)))) + 4
    for it in range(max_iter + 1):
        upper, lower = cur.tail_split(p)
        trace.append(
            CollapseStep(
                iteration=it,
                es=es(cur, p),
                lower_es=lower_es(cur, p),
                mean=cur.mean(),
                upper_range=upper.range_width(),
                lower_range=lower.range_width(),
                support=len(cur),
            )
        )
        if upper.range_width() < eps and lower.range_width() < eps:
            return CollapseResult(cur, trace, z_star)
        cur = mixture([(upper.t_transform(), 1.0 - p), (lower.t_transform(), p)])
    raise RuntimeError("collapse failed to reach its contraction bound")  # pragma: no cover
