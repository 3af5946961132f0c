"""Discrete loss distributions with exact quantile and tail arithmetic.

A distribution is a finite list of (value, probability) atoms.  Values are
kept strictly increasing and equal values are coalesced on construction, so
two objects representing the same law compare equal.  All derived quantities
(quantiles, tail averages, the midpoint-folding transform) are computed by
exact piecewise arithmetic on the step quantile function rather than by
sampling.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["DiscreteDistribution", "mixture"]

#: |sum(probs) - 1| accepted without rescaling.
SUM_TOL = 1e-12
#: inputs off by more than SUM_TOL but within this are renormalized; beyond, rejected.
RENORM_TOL = 1e-9
#: snap width for quantile levels sitting on a cumulative-weight boundary,
#: absorbs float roundoff in accumulated probabilities.
LEVEL_SNAP = 1e-12

# breakpoints of the folded quantile grid closer than this are merged; they
# arise from 1-(1-c) != c roundoff, never from genuine atoms.
_MIRROR_TOL = 1e-15


def _check_level(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"level p must lie in (0, 1), got {p!r}")


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finitely supported distribution of a real-valued loss.

    Parameters
    ----------
    values : array-like
        Atom locations, any order; duplicates are merged.
    probs : array-like
        Strictly positive weights summing to one (within tolerance).
    """

    values: np.ndarray
    probs: np.ndarray
    cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        q = np.asarray(self.probs, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("distribution needs at least one atom")
        if v.size != q.size:
            raise ValueError(f"{v.size} values but {q.size} probabilities")
        if not np.all(np.isfinite(v)):
            raise ValueError("atom values must be finite")
        if not np.all(np.isfinite(q)) or np.any(q <= 0.0):
            raise ValueError("probabilities must be finite and > 0")

        total = float(q.sum())
        if abs(total - 1.0) > RENORM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, outside renormalization tolerance")
        if abs(total - 1.0) > SUM_TOL:
            q = q / total

        order = np.argsort(v, kind="stable")
        v, q = v[order], q[order]
        # coalesce exactly-equal atoms so the representation is canonical
        if v.size > 1 and np.any(v[1:] == v[:-1]):
            keep = np.concatenate([[True], v[1:] != v[:-1]])
            idx = np.cumsum(keep) - 1
            v = v[keep]
            q = np.bincount(idx, weights=q)

        c = np.cumsum(q)
        c[-1] = 1.0
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", q)
        object.__setattr__(self, "cum", c)
        v.flags.writeable = False
        q.flags.writeable = False
        c.flags.writeable = False

    @classmethod
    def from_unchecked(cls, values: np.ndarray, probs: np.ndarray) -> "DiscreteDistribution":
        """Fast path for internally generated atoms.

        Skips finiteness/positivity/sum validation; still sorts, coalesces,
        and rescales so the result is canonical.  Callers guarantee finite
        values and positive weights with sum near one.
        """
        self = object.__new__(cls)
        v = np.asarray(values, dtype=float)
        q = np.asarray(probs, dtype=float)
        order = np.argsort(v, kind="stable")
        v, q = v[order], q[order]
        if v.size > 1 and np.any(v[1:] == v[:-1]):
            keep = np.concatenate([[True], v[1:] != v[:-1]])
            idx = np.cumsum(keep) - 1
            v = v[keep]
            q = np.bincount(idx, weights=q)
        total = q.sum()
        if total != 1.0:
            q = q / total
        c = np.cumsum(q)
        c[-1] = 1.0
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", q)
        object.__setattr__(self, "cum", c)
        return self

    # -- basic queries ------------------------------------------------------

    def __len__(self) -> int:
        return int(self.values.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash((self.values.tobytes(), self.probs.tobytes()))

    def isclose(self, other: "DiscreteDistribution", tol: float = 1e-9) -> bool:
        """Atomwise comparison of two canonical distributions."""
        return (
            len(self) == len(other)
            and np.allclose(self.values, other.values, rtol=0.0, atol=tol)
            and np.allclose(self.probs, other.probs, rtol=0.0, atol=tol)
        )

    def mean(self) -> float:
        return float(self.values @ self.probs)

    def range_width(self) -> float:
        """Width of the support: largest atom minus smallest."""
        return float(self.values[-1] - self.values[0])

    # -- quantiles ----------------------------------------------------------

    def quantiles(self, ps) -> np.ndarray:
        """Left quantile function evaluated at an array of levels in (0, 1)."""
        ps = np.asarray(ps, dtype=float)
        idx = np.searchsorted(self.cum, ps - LEVEL_SNAP, side="left")
        return self.values[np.minimum(idx, len(self) - 1)]

    def quantile(self, p: float) -> float:
        """inf{x : F(x) >= p}, the left p-quantile."""
        _check_level(p)
        return float(self.quantiles(p))

    # -- tail decomposition and folding transform ---------------------------

    def tail_split(self, p: float) -> tuple["DiscreteDistribution", "DiscreteDistribution"]:
        """Conditional distributions above and below the level-p cut.

        The atom straddling the cut is split fractionally, so the upper part
        is the law of the quantile function restricted to (p, 1) and the lower
        part to (0, p).  Fragments below the roundoff floor of the cumulative
        weights are dropped: they are artifacts of p - cum cancellation, not
        mass.  Returns (upper, lower).
        """
        _check_level(p)
        w_up = np.clip(self.cum - p, 0.0, self.probs)
        w_lo = self.probs - w_up
        up = w_up > 5e-14
        lo = w_lo > 5e-14
        upper = DiscreteDistribution.from_unchecked(self.values[up], w_up[up] / (1.0 - p))
        lower = DiscreteDistribution.from_unchecked(self.values[lo], w_lo[lo] / p)
        return upper, lower

    def t_transform(self) -> "DiscreteDistribution":
        """Law of the symmetric quantile average (Q(U) + Q(1-U)) / 2.

        Computed exactly: the breakpoints of u -> Q(u) and u -> Q(1-u) are
        merged into one piecewise-constant partition of (0, 1); each piece
        contributes its width at the midpoint-average value.  The mean is
        preserved and the support width at least halves.
        """
        interior = self.cum[:-1]
        bps = np.unique(np.concatenate([[0.0, 1.0], interior, 1.0 - interior]))
        if bps.size > 2:
            keep = np.concatenate([[True], np.diff(bps) > _MIRROR_TOL])
            keep[-1] = True  # the endpoint 1.0 must survive merging
            bps = bps[keep]
        widths = np.diff(bps)
        good = widths > 0.0
        mids = 0.5 * (bps[:-1] + bps[1:])[good]
        widths = widths[good]
        vals = 0.5 * (self.quantiles(mids) + self.quantiles(1.0 - mids))
        return DiscreteDistribution.from_unchecked(vals, widths)

    # -- serialization ------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["value", "prob"])
        for v, q in zip(self.values, self.probs):
            w.writerow([repr(float(v)), repr(float(q))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscreteDistribution":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty distribution CSV")
        header = [h.strip().lower() for h in rows[0]]
        if header != ["value", "prob"]:
            raise ValueError(f"distribution CSV header must be value,prob, got {rows[0]!r}")
        try:
            pairs = [(float(r[0]), float(r[1])) for r in rows[1:] if r]
        except (IndexError, ValueError) as exc:
            raise ValueError(f"malformed distribution CSV row: {exc}") from exc
        if not pairs:
            raise ValueError("distribution CSV has no atoms")
        vals, probs = zip(*pairs)
        return cls(np.array(vals), np.array(probs))

    def to_json(self) -> str:
        return json.dumps(
            [{"value": float(v), "prob": float(q)} for v, q in zip(self.values, self.probs)]
        )

    @classmethod
    def from_json(cls, text: str) -> "DiscreteDistribution":
        data = json.loads(text)
        if not isinstance(data, list) or not data:
            raise ValueError("distribution JSON must be a non-empty array of {value, prob}")
        try:
            vals = [float(d["value"]) for d in data]
            probs = [float(d["prob"]) for d in data]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed distribution JSON entry: {exc}") from exc
        return cls(np.array(vals), np.array(probs))


def mixture(parts: list[tuple[DiscreteDistribution, float]]) -> DiscreteDistribution:
    """Probability mixture sum_i w_i * d_i; weights must sum to one."""
    if not parts:
        raise ValueError("mixture of nothing")
    w = np.array([float(x) for _, x in parts])
    if np.any(w < 0.0) or abs(w.sum() - 1.0) > RENORM_TOL:
        raise ValueError("mixture weights must be nonnegative and sum to 1")
    vals = np.concatenate([d.values for d, _ in parts])
    probs = np.concatenate([d.probs * x for (d, x), _ in zip(parts, w)])
    keep = probs > 0.0
    return DiscreteDistribution.from_unchecked(vals[keep], probs[keep])
