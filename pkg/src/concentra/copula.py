"""Checkerboard copulas, concentration classes, and diversifiability diagnostics.

A checkerboard copula stores an n-by-n grid of cell masses whose rows and
columns each sum to 1/n, i.e. a bivariate law on the unit square with uniform
marginals and cell-uniform density.  Everything downstream is exact at cell
granularity: the joint CDF is bilinear per cell, the set membership test
C(p, p) = p is evaluated at grid corners, and the mass-rearrangement step of
``densify`` integrates the within-cell uniforms in closed form.

``markov_chain`` runs the stationary sequential coupling: the next state is
drawn from the conditional inverse CDF given the current one, so every
consecutive pair has the copula as its joint law.  ``lln_diagnostic``
replicates such chains and classifies the copula by how fast partial means
settle around one half.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._chain import BACKEND, chain_paths
from .jsonio import canonical_json

__all__ = [
    "CheckerboardCopula",
    "concordance_leq",
    "mix",
    "densify",
    "markov_chain",
    "markov_paths",
    "lln_diagnostic",
    "ChainDiagnostics",
    "TailReport",
    "random_checkerboard",
    "DIVERSIFIABLE",
    "NON_DIVERSIFIABLE",
    "INCONCLUSIVE",
]

MASS_TOL = 1e-12
DIVERSIFIABLE = "diversifiable"
NON_DIVERSIFIABLE = "non_diversifiable"
INCONCLUSIVE = "inconclusive"


def _check_unit(x: float, name: str) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")


@dataclass(frozen=True, eq=False)
class CheckerboardCopula:
    """Cell-mass grid of a bivariate copula; mass[i, j] covers
    [i/n, (i+1)/n] x [j/n, (j+1)/n] with uniform density."""

    n: int
    mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.shape != (self.n, self.n):
            raise ValueError(f"mass must be {self.n}x{self.n}, got {m.shape}")
        if np.any(m < 0.0) or not np.all(np.isfinite(m)):
            raise ValueError("cell masses must be finite and nonnegative")
        target = 1.0 / self.n
        if np.abs(m.sum(axis=1) - target).max() > MASS_TOL:
            raise ValueError("row sums must equal 1/n: marginal of the first coordinate")
        if np.abs(m.sum(axis=0) - target).max() > MASS_TOL:
            raise ValueError("column sums must equal 1/n: marginal of the second coordinate")
        object.__setattr__(self, "mass", m)
        m.flags.writeable = False

    # -- constructors --------------------------------------------------------

    @classmethod
    def independence(cls, n: int) -> "CheckerboardCopula":
        return cls(n, np.full((n, n), 1.0 / n**2))

    @classmethod
    def comonotone(cls, n: int) -> "CheckerboardCopula":
        return cls(n, np.eye(n) / n)

    @classmethod
    def countermonotone(cls, n: int) -> "CheckerboardCopula":
        return cls(n, np.fliplr(np.eye(n)) / n)

    @classmethod
    def block_diagonal(cls, n: int, k: int) -> "CheckerboardCopula":
        """Uniform mass on [0, k/n]^2 and [k/n, 1]^2; lies in the class at p = k/n."""
        if not 0 < k < n:
            raise ValueError(f"block split k must satisfy 0 < k < n, got {k}")
        m = np.zeros((n, n))
        m[:k, :k] = 1.0 / (n * k)
        m[k:, k:] = 1.0 / (n * (n - k))
        return cls(n, m)

    @classmethod
    def from_json(cls, text: str) -> "CheckerboardCopula":
        doc = json.loads(text)
        try:
            n = int(doc["n"])
            flat = [float(x) for x in doc["mass"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"copula JSON must carry n and a row-major mass array: {exc}") from exc
        if len(flat) != n * n:
            raise ValueError(f"mass array has {len(flat)} entries, expected {n * n}")
        return cls(n, np.array(flat).reshape(n, n))

    def to_json(self) -> str:
        return canonical_json({"n": self.n, "mass": [float(x) for x in self.mass.ravel()]})

    # -- evaluation -----------------------------------------------------------

    def corner_cdf(self) -> np.ndarray:
        """(n+1)x(n+1) joint CDF at grid corners (i/n, j/n)."""
        g = np.zeros((self.n + 1, self.n + 1))
        g[1:, 1:] = self.mass.cumsum(axis=0).cumsum(axis=1)
        return g

    def cdf(self, u: float, v: float) -> float:
        """Exact C(u, v): integral of the cell masses over [0,u] x [0,v]."""
        _check_unit(u, "u")
        _check_unit(v, "v")
        idx = np.arange(self.n)
        fu = np.clip(u * self.n - idx, 0.0, 1.0)
        fv = np.clip(v * self.n - idx, 0.0, 1.0)
        return float(fu @ self.mass @ fv)

    def in_dp(self, p: float) -> bool:
        """Whether C(p, p) = p, i.e. the copula concentrates at level p."""
        if not 0.0 < p < 1.0:
            raise ValueError(f"level p must lie in (0, 1), got {p!r}")
        return abs(self.cdf(p, p) - p) <= MASS_TOL

    def refine(self, factor: int) -> "CheckerboardCopula":
        """Split every cell into factor^2 equal subcells (same law)."""
        if factor < 1:
            raise ValueError("refinement factor must be >= 1")
        if factor == 1:
            return self
        m = np.kron(self.mass, np.full((factor, factor), 1.0 / factor**2))
        return CheckerboardCopula(self.n * factor, m)

    # -- tail support curves ---------------------------------------------------

    def tail_curves(self, p: float) -> tuple[float, float]:
        """Support bounds of the conditional second coordinate at a grid level.

        Returns (t, s): t is the lowest grid line with conditional mass given
        U >= p, s the highest given U <= p; always t <= p <= s, and either
        hitting p forces C(p, p) = p.
        """
        k = self._grid_index(p)
        upper = self.mass[k:].sum(axis=0)
        lower = self.mass[:k].sum(axis=0)
        t = int(np.argmax(upper > 0.0))
        s = self.n - int(np.argmax(lower[::-1] > 0.0))
        return t / self.n, s / self.n

    def _grid_index(self, p: float) -> int:
        k = p * self.n
        if abs(k - round(k)) > 1e-9 or not 0 < round(k) < self.n:
            raise ValueError(f"level p = {p!r} must sit on the interior grid k/{self.n}")
        return int(round(k))

    def support_band(self) -> np.ndarray:
        """Boolean n-by-n mask of cells intersecting the open region between
        the tail support curves (the region densification must fill)."""
        pos = self.mass > 0.0
        t_idx = np.zeros(self.n, dtype=int)
        s_idx = np.zeros(self.n, dtype=int)
        suffix = np.logical_or.accumulate(pos[::-1], axis=0)[::-1]
        prefix = np.logical_or.accumulate(pos, axis=0)
        for i in range(self.n):
            t_idx[i] = int(np.argmax(suffix[i]))
            s_idx[i] = self.n - int(np.argmax(prefix[i][::-1]))
        j = np.arange(self.n)
        return (j[None, :] >= t_idx[:, None]) & (j[None, :] < s_idx[:, None])

    def is_strict_interior(self) -> bool:
        """True when both tail support curves stay strictly off the diagonal
        at every interior grid level."""
        for k in range(1, self.n):
            t, s = self.tail_curves(k / self.n)
            if not (t < k / self.n < s):
                return False
        return True


def concordance_leq(c1: CheckerboardCopula, c2: CheckerboardCopula, tol: float = MASS_TOL) -> bool:
    """Pointwise CDF order c1 <= c2; corner comparison suffices by bilinearity."""
    c1, c2 = _common_grid(c1, c2)
    return bool(np.all(c1.corner_cdf() <= c2.corner_cdf() + tol))


def _common_grid(c1: CheckerboardCopula, c2: CheckerboardCopula):
    if c1.n == c2.n:
        return c1, c2
    n = math.lcm(c1.n, c2.n)
    if n > 4096:
        raise ValueError(f"common refinement grid {n} is too fine; align resolutions")
    return c1.refine(n // c1.n), c2.refine(n // c2.n)


def mix(parts: list[tuple[CheckerboardCopula, float]]) -> CheckerboardCopula:
    """Convex combination of copulas (refined to a common grid)."""
    if not parts:
        raise ValueError("mix of nothing")
    lam = np.array([float(x) for _, x in parts])
    if np.any(lam < 0.0) or abs(lam.sum() - 1.0) > 1e-9:
        raise ValueError("mixture weights must be nonnegative and sum to 1")
    n = math.lcm(*[c.n for c, _ in parts])
    if n > 4096:
        raise ValueError(f"common refinement grid {n} is too fine; align resolutions")
    acc = np.zeros((n, n))
    for (c, _), l in zip(parts, lam):
        acc += l * c.refine(n // c.n).mass
    return CheckerboardCopula(n, acc)


# ---------------------------------------------------------------------------
# densification
# ---------------------------------------------------------------------------


def _half_cum_cols(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cc = np.cumsum(m, axis=0)
    below = cc - 0.5 * m
    above = cc[-1] - cc + 0.5 * m
    return below, above


def _half_cum_rows(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rc = np.cumsum(m, axis=1)
    left = rc - 0.5 * m
    right = rc[:, -1:] - rc + 0.5 * m
    return left, right


def _pair_transform(m: np.ndarray) -> np.ndarray:
    """One mass rearrangement against an independent copy.

    Draw (U, V) and (U', V') independently from the grid law; on the event
    that the two pairs are discordant, the first pair swaps in the partner's
    second coordinate.  Within-cell uniforms make every comparison
    probability exactly 0, 1/2, or 1, so the expected cell masses of
    (U, V-tilde) reduce to half-open cumulative sums; the result keeps both
    marginals uniform and weakly raises the copula in concordance order.
    """
    glow, ghigh = _half_cum_cols(m)  # partner column mass strictly below / above, half at ties
    rlow, rhigh = _half_cum_rows(m)  # own row mass strictly left / right, half at ties
    gl_r = np.cumsum(glow, axis=1)
    gh_r = np.cumsum(ghigh, axis=1)
    # probability the pair is discordant, conditional on (U, V)'s cell:
    stay = (gl_r[:, -1:] - gl_r + 0.5 * glow) + (gh_r - ghigh + 0.5 * ghigh)
    return m * (1.0 - stay) + glow * rlow + ghigh * rhigh


def densify(c: CheckerboardCopula) -> CheckerboardCopula:
    """One densification sweep: ensure diagonal support, then rearrange.

    When some diagonal cell carries no mass, the copula is first blended
    half-and-half with the comonotone grid (harmless otherwise, and skipped
    then to avoid injecting needless positive dependence).  Applied twice,
    the sweep puts strictly positive mass on every cell of ``support_band``
    of the original copula, and the output always concordance-dominates the
    input.
    """
    m = c.mass
    if np.any(np.diagonal(m) <= 0.0):
        m = 0.5 * m + 0.5 * np.eye(c.n) / c.n
    return CheckerboardCopula(c.n, _pair_transform(m))


# ---------------------------------------------------------------------------
# sequential coupling and the law-of-large-numbers diagnostic
# ---------------------------------------------------------------------------


def _conditional_cum(c: CheckerboardCopula) -> np.ndarray:
    cond = c.mass * c.n  # rows sum to one
    cum = np.cumsum(cond, axis=1)
    cum[:, -1] = 1.0
    return cum


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("CONCENTRA_THREADS", "1")))
    except ValueError:
        return 1


def markov_paths(
    c: CheckerboardCopula, length: int, reps: int, seed: int = 0, backend: str | None = None
) -> np.ndarray:
    """reps stationary chains of the sequential coupling, as a (reps, length) array.

    The first state is uniform; each step inverts the conditional CDF of the
    checkerboard row holding the current state (piecewise-uniform across
    cells, linear inside one).  Replications use per-index derived seeds, so
    results do not depend on how work is split across threads.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    cum = _conditional_cum(c)
    u = np.empty((reps, length))
    for r in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(r,)))
        u[r] = rng.random(length)
    workers = min(_worker_count(), reps)
    if workers == 1:
        return chain_paths(cum, u, backend=backend)
    out = np.empty_like(u)
    chunks = np.array_split(np.arange(reps), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(chain_paths, cum, u[idx], backend) for idx in chunks if idx.size]
        for idx, fut in zip([i for i in chunks if i.size], futs):
            out[idx] = fut.result()
    return out


def markov_chain(c: CheckerboardCopula, length: int, seed: int = 0) -> np.ndarray:
    """One sample path of the sequential coupling."""
    return markov_paths(c, length, 1, seed=seed)[0]


@dataclass(frozen=True)
class TailReport:
    level: float
    in_dp: bool
    count: int
    mean: float | None
    theoretical: float


@dataclass(frozen=True)
class ChainDiagnostics:
    """Replication summary of partial-mean behaviour for one copula."""

    chain_length: int
    replications: int
    seed: int
    mu: float
    verdict: str
    threshold_diversifiable: float
    threshold_floor: float
    final_dev_quantiles: dict[str, float]
    sup_dev_start: int
    sup_dev_quantiles: dict[str, float]
    final_means: np.ndarray
    checkpoint_steps: np.ndarray
    checkpoint_means: np.ndarray
    backend: str
    tail: TailReport | None = None

    def to_json(self) -> str:
        doc = {
            "chain_length": self.chain_length,
            "replications": self.replications,
            "seed": self.seed,
            "mu": self.mu,
            "verdict": self.verdict,
            "threshold_diversifiable": self.threshold_diversifiable,
            "threshold_floor": self.threshold_floor,
            "final_dev_quantiles": self.final_dev_quantiles,
            "sup_dev_start": self.sup_dev_start,
            "sup_dev_quantiles": self.sup_dev_quantiles,
            "final_means": [float(x) for x in self.final_means],
        }
        if self.tail is not None:
            doc["tail"] = {
                "level": self.tail.level,
                "in_dp": self.tail.in_dp,
                "count": self.tail.count,
                "mean": self.tail.mean,
                "theoretical": self.tail.theoretical,
            }
        return canonical_json(doc)

    def partial_means_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replication", "n", "partial_mean"])
        for r in range(self.replications):
            for j, step in enumerate(self.checkpoint_steps):
                w.writerow([r, int(step), format(float(self.checkpoint_means[r, j]), ".12g")])
        return buf.getvalue()


def lln_diagnostic(
    c: CheckerboardCopula,
    chain_length: int,
    replications: int,
    p: float | None = None,
    seed: int = 0,
    band: float = 3.0,
    floor: float = 0.05,
    sup_start: int | None = None,
    checkpoints: int = 64,
    backend: str | None = None,
) -> ChainDiagnostics:
    """Classify a copula by the spread of replicated partial means.

    Runs ``replications`` seeded chains of ``chain_length`` steps and looks at
    |mean - 1/2| at the final step.  The verdict is "diversifiable" when the
    0.9 quantile sits inside an iid-scaled band of ``band`` standard errors
    (band / sqrt(12 N)), "non_diversifiable" when it exceeds the fixed
    ``floor``, and "inconclusive" between; both thresholds are diagnostic
    conventions, exposed here rather than baked in.  With a level ``p``, the
    mean over chains started above p is reported against its tail-average
    limit (1 + p) / 2.
    """
    if chain_length < 100:
        raise ValueError("diagnostic needs chain_length >= 100")
    if replications < 10:
        raise ValueError("diagnostic needs replications >= 10")
    paths = markov_paths(c, chain_length, replications, seed=seed, backend=backend)
    steps = np.arange(1, chain_length + 1)
    running = np.cumsum(paths, axis=1) / steps
    mu = 0.5

    n0 = chain_length // 2 if sup_start is None else int(sup_start)
    n0 = min(max(n0, 1), chain_length)
    sup_dev = np.abs(running[:, n0 - 1 :] - mu).max(axis=1)
    final_dev = np.abs(running[:, -1] - mu)

    qs = (0.5, 0.9, 0.95, 0.99)
    final_q = {f"{q:g}": float(np.quantile(final_dev, q)) for q in qs}
    sup_q = {f"{q:g}": float(np.quantile(sup_dev, q)) for q in qs}

    delta = band / math.sqrt(12.0 * chain_length)
    q90 = final_q["0.9"]
    if q90 < delta:
        verdict = DIVERSIFIABLE
    elif q90 > floor:
        verdict = NON_DIVERSIFIABLE
    else:
        verdict = INCONCLUSIVE

    tail = None
    if p is not None:
        mask = paths[:, 0] > p
        tail = TailReport(
            level=float(p),
            in_dp=c.in_dp(p),
            count=int(mask.sum()),
            mean=float(running[mask, -1].mean()) if mask.any() else None,
            theoretical=(1.0 + float(p)) / 2.0,
        )

    marks = np.unique(np.geomspace(1, chain_length, num=min(checkpoints, chain_length)).astype(int))
    return ChainDiagnostics(
        chain_length=chain_length,
        replications=replications,
        seed=seed,
        mu=mu,
        verdict=verdict,
        threshold_diversifiable=float(delta),
        threshold_floor=float(floor),
        final_dev_quantiles=final_q,
        sup_dev_start=n0,
        sup_dev_quantiles=sup_q,
        final_means=running[:, -1].copy(),
        checkpoint_steps=marks,
        checkpoint_means=running[:, marks - 1].copy(),
        backend=backend or BACKEND,
        tail=tail,
    )


def random_checkerboard(n: int, seed: int = 0, floor: float = 0.1) -> CheckerboardCopula:
    """Random dense checkerboard via alternating marginal scaling.

    Starts from iid uniforms bounded away from zero, then rescales rows and
    columns to the 1/n target until both marginals are exact to well inside
    the constructor tolerance.
    """
    rng = np.random.default_rng(seed)
    m = rng.random((n, n)) + floor
    target = 1.0 / n
    for _ in range(2000):
        m *= (target / m.sum(axis=1))[:, None]
        m *= target / m.sum(axis=0)
        if np.abs(m.sum(axis=1) - target).max() < 1e-14:
            break
    m *= (target / m.sum(axis=1))[:, None]
    m *= target / m.sum(axis=0)
    m *= (target / m.sum(axis=1))[:, None]
    return CheckerboardCopula(n, m)
