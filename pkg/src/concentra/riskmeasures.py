"""Value-at-Risk, Expected Shortfall, and composable tail risk functionals.

Tail averages are exact on weighted discrete distributions: the atom
straddling the confidence level is split fractionally, which matches the
integral of the step quantile function.  The module also provides a
randomized axiom harness that searches for violations of monotonicity,
translation invariance, positive homogeneity, convexity, second-order
stochastic dominance consistency, and tail-concentration aversion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .dist import DiscreteDistribution
from .jsonio import canonical_json

__all__ = [
    "var",
    "es",
    "lower_es",
    "es_ru",
    "RiskFunctional",
    "CertificationError",
    "axiom_harness",
    "AxiomReport",
    "Counterexample",
    "AXIOMS",
]

AXIOMS = ("M", "TI", "PH", "Convexity", "SSD", "pCA")

#: relative tolerance for the probe-grid certification of supplied g handles.
LIPSCHITZ_TOL = 1e-9
#: tolerance scale for violation detection in the harness.
HARNESS_TOL = 1e-9


def _check_level(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"confidence level p must lie in (0, 1), got {p!r}")


def var(d: DiscreteDistribution, p: float) -> float:
    """Left p-quantile of the loss."""
    return d.quantile(p)


def es(d: DiscreteDistribution, p: float) -> float:
    """Average of the quantile function over (p, 1): the upper-tail mean."""
    _check_level(p)
    w = np.clip(d.cum - p, 0.0, d.probs)
    return float((w @ d.values) / (1.0 - p))


def lower_es(d: DiscreteDistribution, p: float) -> float:
    """Average of the quantile function over (0, p): the lower-tail mean."""
    _check_level(p)
    w = d.probs - np.clip(d.cum - p, 0.0, d.probs)
    return float((w @ d.values) / p)


def es_ru(d: DiscreteDistribution, p: float) -> tuple[float, float]:
    """Shortfall via min over t of  t + E[(X - t)+] / (1 - p).

    The minimum over all reals is attained at atom values, so a scan over the
    support is exact.  Returns (value, minimizer); the reported minimizer is
    the left p-quantile, which always attains the minimum.
    """
    _check_level(p)
    t = d.values[:, None]
    h = t[:, 0] + np.clip(d.values[None, :] - t, 0.0, None) @ d.probs / (1.0 - p)
    return float(h.min()), d.quantile(p)


class CertificationError(ValueError):
    """A supplied function handle failed its probe-grid certification."""


@dataclass(frozen=True)
class RiskFunctional:
    """A risk measure assembled from quantile/tail building blocks.

    Use the classmethod constructors.  ``g_form`` composes the mean with a
    transformed tail deviation, g(ES_p - E) + E; the handle g is certified
    nondecreasing and 1-Lipschitz with g(0) = 0 on a declared probe grid at
    construction time (behaviour beyond the grid is the caller's
    responsibility and is exercised by the randomized harness instead).
    ``f_form`` evaluates f(ES_p, E) for f defined on {(x, y): x >= y}.
    """

    kind: str
    p: float | None = None
    alpha: float | None = None
    g: Callable[[float], float] | None = field(default=None, compare=False)
    f: Callable[[float, float], float] | None = field(default=None, compare=False)
    label: str = ""

    @classmethod
    def var(cls, p: float) -> "RiskFunctional":
        _check_level(p)
        return cls("var", p=p, label=f"VaR[{p:g}]")

    @classmethod
    def es(cls, p: float) -> "RiskFunctional":
        _check_level(p)
        return cls("es", p=p, label=f"ES[{p:g}]")

    @classmethod
    def lower_es(cls, p: float) -> "RiskFunctional":
        _check_level(p)
        return cls("lower_es", p=p, label=f"lowerES[{p:g}]")

    @classmethod
    def mean(cls) -> "RiskFunctional":
        return cls("mean", label="mean")

    @classmethod
    def coherent_mix(cls, p: float, alpha: float) -> "RiskFunctional":
        _check_level(p)
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha!r}")
        return cls("coherent_mix", p=p, alpha=alpha, label=f"{alpha:g}*ES[{p:g}]+{1-alpha:g}*mean")

    @classmethod
    def g_form(
        cls,
        p: float,
        g: Callable[[float], float],
        probe_range: float = 1.0,
        probe_points: int = 512,
        label: str = "",
    ) -> "RiskFunctional":
        _check_level(p)
        if probe_range <= 0 or probe_points < 2:
            raise ValueError("probe grid needs probe_range > 0 and probe_points >= 2")
        grid = np.linspace(0.0, 2.0 * probe_range, probe_points)
        gv = np.array([float(g(x)) for x in grid])
        if not np.all(np.isfinite(gv)):
            raise CertificationError("g returned a non-finite value on the probe grid")
        if abs(gv[0]) > 1e-12:
            raise CertificationError(f"g(0) = {gv[0]!r}, expected 0")
        dg = np.diff(gv)
        dx = np.diff(grid)
        tol = LIPSCHITZ_TOL * max(1.0, 2.0 * probe_range)
        bad = np.flatnonzero(dg < -tol)
        if bad.size:
            i = int(bad[0])
            raise CertificationError(f"g is decreasing near x = {grid[i]:.6g} on the probe grid")
        bad = np.flatnonzero(dg > dx * (1.0 + LIPSCHITZ_TOL) + tol)
        if bad.size:
            i = int(bad[0])
            raise CertificationError(
                f"g violates the 1-Lipschitz bound near x = {grid[i]:.6g} "
                f"(slope {dg[i] / dx[i]:.6g} on the probe grid)"
            )
        return cls("g_form", p=p, g=g, label=label or f"g_form[{p:g}]")

    @classmethod
    def f_form(cls, p: float, f: Callable[[float, float], float], label: str = "") -> "RiskFunctional":
        _check_level(p)
        return cls("f_form", p=p, f=f, label=label or f"f_form[{p:g}]")

    def evaluate(self, d: DiscreteDistribution) -> float:
        if self.kind == "var":
            return var(d, self.p)
        if self.kind == "es":
            return es(d, self.p)
        if self.kind == "lower_es":
            return lower_es(d, self.p)
        if self.kind == "mean":
            return d.mean()
        if self.kind == "coherent_mix":
            return self.alpha * es(d, self.p) + (1.0 - self.alpha) * d.mean()
        if self.kind == "g_form":
            m = d.mean()
            return float(self.g(es(d, self.p) - m)) + m
        if self.kind == "f_form":
            return float(self.f(es(d, self.p), d.mean()))
        raise ValueError(f"unknown functional kind {self.kind!r}")

    __call__ = evaluate


# ---------------------------------------------------------------------------
# randomized axiom harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Counterexample:
    description: str
    lhs: float
    rhs: float
    scenario_csv: str


@dataclass(frozen=True)
class AxiomReport:
    axiom: str
    result: str  # "PASS" | "FAIL"
    trials: int
    functional: str
    seed: int
    counterexample: Counterexample | None = None

    @property
    def passed(self) -> bool:
        return self.result == "PASS"

    def to_json(self) -> str:
        doc = {
            "axiom": self.axiom,
            "result": self.result,
            "trials": self.trials,
            "functional": self.functional,
            "seed": self.seed,
        }
        if self.counterexample is not None:
            doc["counterexample"] = {
                "description": self.counterexample.description,
                "lhs": self.counterexample.lhs,
                "rhs": self.counterexample.rhs,
                "scenario_csv": self.counterexample.scenario_csv,
            }
        return canonical_json(doc)


def _tol(*xs: float) -> float:
    finite = [abs(x) for x in xs if np.isfinite(x)]
    return HARNESS_TOL * max(1.0, *finite) if finite else HARNESS_TOL


def _violates(lhs: float, rhs: float) -> bool:
    """True when lhs exceeds rhs beyond tolerance (inf-safe)."""
    if not np.isfinite(lhs) or not np.isfinite(rhs):
        return lhs > rhs
    return lhs > rhs + _tol(lhs, rhs)


def _pair_csv(cols: dict[str, np.ndarray], weights: np.ndarray) -> str:
    from .concentration import ScenarioSet  # deferred: concentration imports this module

    losses = np.column_stack(list(cols.values()))
    return ScenarioSet(losses, weights, labels=list(cols.keys())).to_csv()


def _rand_weights(rng, k: int) -> np.ndarray:
    w = rng.random(k) + 0.05
    return w / w.sum()


def _rand_scale(rng) -> float:
    return float(np.exp(rng.uniform(np.log(0.05), np.log(50.0))))


@lru_cache(maxsize=64)
def _grid_den(p: float) -> int:
    from fractions import Fraction

    den = Fraction(p).limit_denominator(10**6).denominator
    if den > 200 or abs(den * p - round(den * p)) > 1e-9:
        raise ValueError(f"p = {p!r} does not align with a scenario grid of size <= 200")
    return den


def _grid_m(p: float, rng) -> int:
    """A scenario count m with m*p integral, small enough for fast trials."""
    den = _grid_den(p)
    mult = int(rng.integers(1, max(1, 40 // den) + 1))
    return den * mult


def _trial_m(func, rng, p):
    scale = _rand_scale(rng)
    k = int(rng.integers(2, 11))
    w = _rand_weights(rng, k)
    x = np.sort(rng.uniform(-scale, scale, size=k))
    style = int(rng.integers(0, 3))
    pert = rng.uniform(0.0, 0.5 * scale, size=k)
    if style == 1:
        pert *= rng.random(k) < 0.5
    elif style == 2:
        keep = np.zeros(k)
        keep[rng.integers(0, k)] = 1.0
        pert *= keep
    if not pert.any():
        pert[0] = 0.1 * scale
    base = func(DiscreteDistribution.from_unchecked(x, w))

    def check(e):
        hi = func(DiscreteDistribution.from_unchecked(x + e, w))
        return (base, hi) if _violates(base, hi) else None

    got = check(pert)
    if got is None:
        return None
    for _ in range(20):
        smaller = check(pert / 2.0)
        if smaller is None:
            break
        pert, got = pert / 2.0, smaller
    lo, hi = got
    return Counterexample(
        "monotonicity violated: rho(X) > rho(Y) although X <= Y scenariowise",
        lo,
        hi,
        _pair_csv({"X": x, "Y": x + pert}, w),
    )


def _trial_ti(func, rng, p):
    scale = _rand_scale(rng)
    k = int(rng.integers(2, 11))
    w = _rand_weights(rng, k)
    x = rng.uniform(-scale, scale, size=k)
    c = float(rng.uniform(-scale, scale)) or 0.1 * scale
    base = func(DiscreteDistribution.from_unchecked(x, w))

    def check(shift):
        moved = func(DiscreteDistribution.from_unchecked(x + shift, w))
        if not (np.isfinite(base) and np.isfinite(moved)):
            return None
        gap = abs(moved - (base + shift))
        return (moved, base + shift) if gap > _tol(base, moved, shift) else None

    got = check(c)
    if got is None:
        return None
    for _ in range(20):
        smaller = check(c / 2.0)
        if smaller is None:
            break
        c, got = c / 2.0, smaller
    return Counterexample(
        f"translation invariance violated for shift c = {c!r}",
        got[0],
        got[1],
        _pair_csv({"X": x, "X_shifted": x + c}, w),
    )


def _trial_ph(func, rng, p):
    scale = _rand_scale(rng)
    k = int(rng.integers(2, 11))
    w = _rand_weights(rng, k)
    x = rng.uniform(-scale, scale, size=k)
    loglam = float(rng.uniform(np.log(0.2), np.log(5.0)))
    if abs(loglam) < 1e-3:
        loglam = 0.5
    base = func(DiscreteDistribution.from_unchecked(x, w))

    def check(ll):
        lam = float(np.exp(ll))
        scaled = func(DiscreteDistribution.from_unchecked(lam * x, w))
        if not (np.isfinite(base) and np.isfinite(scaled)):
            return None
        gap = abs(scaled - lam * base)
        return (scaled, lam * base, lam) if gap > _tol(base, scaled) * max(1.0, lam) else None

    got = check(loglam)
    if got is None:
        return None
    for _ in range(20):
        smaller = check(loglam / 2.0)
        if smaller is None:
            break
        loglam, got = loglam / 2.0, smaller
    lam = got[2]
    return Counterexample(
        f"positive homogeneity violated for lambda = {lam!r}",
        got[0],
        got[1],
        _pair_csv({"X": x, "X_scaled": lam * x}, w),
    )


def _concentrated_pair(rng, p, style: int):
    """Scenario-level pair sharing a tail event, via the coupling constructors."""
    from .concentration import couple

    m = _grid_m(p, rng)
    scale = _rand_scale(rng)
    dx = DiscreteDistribution.from_unchecked(np.sort(rng.uniform(-scale, scale, 6)), _rand_weights(rng, 6))
    dy = DiscreteDistribution.from_unchecked(np.sort(rng.uniform(-scale, scale, 6)), _rand_weights(rng, 6))
    styles = ("comonotone", "tail_block_antitone", "tail_block_shuffle")
    s = couple(dx, dy, p, styles[style % 3], m, seed=int(rng.integers(0, 2**31)))
    return s.losses[:, 0], s.losses[:, 1], s.weights


def _trial_convexity(func, rng, p):
    style = int(rng.integers(0, 3))
    if style == 2 and p is not None:
        x, y, w = _concentrated_pair(rng, p, int(rng.integers(0, 3)))
    else:
        scale = _rand_scale(rng)
        k = int(rng.integers(2, 11))
        w = _rand_weights(rng, k)
        x = rng.uniform(-scale, scale, size=k)
        y = rng.uniform(-scale, scale, size=k)
        if style == 1:
            x, y = np.sort(x), np.sort(y)
    lam = float(rng.uniform(0.05, 0.95))
    fx = func(DiscreteDistribution.from_unchecked(x, w))

    def check(yy):
        fy = func(DiscreteDistribution.from_unchecked(yy, w))
        fm = func(DiscreteDistribution.from_unchecked(lam * x + (1.0 - lam) * yy, w))
        if not (np.isfinite(fx) and np.isfinite(fy)):
            return None
        bound = lam * fx + (1.0 - lam) * fy
        return (fm, bound) if _violates(fm, bound) else None

    got = check(y)
    if got is None:
        return None
    for _ in range(20):
        closer = 0.5 * (x + y)
        smaller = check(closer)
        if smaller is None:
            break
        y, got = closer, smaller
    return Counterexample(
        f"convexity violated at lambda = {lam!r} for a scenario-level mixture",
        got[0],
        got[1],
        _pair_csv({"X": x, "Y": y}, w),
    )


def _mps(i, vals, probs, a, b):
    """Mean-preserving spread of atom i: (v, q) -> (v-a, v+b)."""
    v, q = vals[i], probs[i]
    keep = np.ones(len(vals), dtype=bool)
    keep[i] = False
    nv = np.concatenate([vals[keep], [v - a, v + b]])
    nq = np.concatenate([probs[keep], [q * b / (a + b), q * a / (a + b)]])
    return nv, nq


def _trial_ssd(func, rng, p):
    scale = _rand_scale(rng)
    k = int(rng.integers(2, 9))
    w = _rand_weights(rng, k)
    x = rng.uniform(-scale, scale, size=k)
    a = float(rng.uniform(0.05, 1.0)) * scale
    b = float(rng.uniform(0.05, 1.0)) * scale
    shift = float(rng.uniform(0.0, 0.3 * scale)) if rng.random() < 0.5 else 0.0
    spread_at = int(rng.integers(0, k))
    fx = func(DiscreteDistribution.from_unchecked(x, w))

    def check(aa, bb, cc):
        yv, yq = _mps(spread_at, x, w, aa, bb)
        fy = func(DiscreteDistribution.from_unchecked(yv + cc, yq))
        return (fx, fy, yv + cc, yq) if _violates(fx, fy) else None

    got = check(a, b, shift)
    if got is None:
        return None
    for _ in range(20):
        smaller = check(a / 2.0, b / 2.0, shift / 2.0)
        if smaller is None:
            break
        a, b, shift = a / 2.0, b / 2.0, shift / 2.0
        got = smaller
    fx, fy, yv, yq = got
    xcsv = DiscreteDistribution(x, w).to_csv()
    ycsv = DiscreteDistribution(yv, yq).to_csv()
    return Counterexample(
        "SSD-consistency violated: rho decreased under a mean-preserving spread",
        fx,
        fy,
        f"# X\n{xcsv}# Y (spread of X)\n{ycsv}",
    )


def _trial_pca(func, rng, p):
    if p is None:
        raise ValueError("the pCA harness needs a confidence level p")
    x, y_conc, w = _concentrated_pair(rng, p, int(rng.integers(0, 3)))
    perm = rng.permutation(len(w))
    y_arb = y_conc[perm]
    f_arb = func(DiscreteDistribution.from_unchecked(x + y_arb, w))
    f_conc = func(DiscreteDistribution.from_unchecked(x + y_conc, w))
    if not _violates(f_arb, f_conc):
        return None
    return Counterexample(
        "concentration aversion violated: a rearranged portfolio outvalues "
        "the tail-concentrated one with the same marginals",
        f_arb,
        f_conc,
        _pair_csv({"X": x, "Y_concentrated": y_conc, "Y_rearranged": y_arb}, w),
    )


_TRIALS = {
    "M": _trial_m,
    "TI": _trial_ti,
    "PH": _trial_ph,
    "Convexity": _trial_convexity,
    "SSD": _trial_ssd,
    "pCA": _trial_pca,
}


def axiom_harness(rf, axiom: str, trials: int = 1000, seed: int = 0, *, p: float | None = None) -> AxiomReport:
    """Search `trials` randomized constructions for a violation of `axiom`.

    ``rf`` is a RiskFunctional or any callable mapping a DiscreteDistribution
    to a real (``inf`` allowed for constraint-style objectives).  A found
    violation is shrunk by halving its perturbation (up to 20 steps) and
    reported as a counterexample; finding one is a successful report, not an
    error.  Trials use per-index derived generator streams, so reports are
    deterministic for a given seed regardless of evaluation order.
    """
    if axiom not in _TRIALS:
        raise ValueError(f"unknown axiom {axiom!r}; expected one of {AXIOMS}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if isinstance(rf, RiskFunctional):
        func = rf.evaluate
        name = rf.label or rf.kind
        p = rf.p if p is None else p
    else:
        func = rf
        name = getattr(rf, "__name__", "objective")
    trial = _TRIALS[axiom]
    for i in range(trials):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(i,))))
        cx = trial(func, rng, p)
        if cx is not None:
            return AxiomReport(axiom, "FAIL", i + 1, name, seed, cx)
    return AxiomReport(axiom, "PASS", trials, name, seed)
