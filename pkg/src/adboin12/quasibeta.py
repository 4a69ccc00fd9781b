"""Quasi-binomial Beta posterior machinery for utility-based dose finding.

Each patient's joint binary (toxicity, efficacy) outcome is scored on a
0-100 utility scale.  Dividing the summed scores by 100 yields a
fractional event count x_u in [0, n]; with a uniform Beta(1, 1) prior the
mean standardized utility u then has the quasi-binomial posterior
Beta(1 + x_u, 1 + n - x_u).  The probability that u exceeds an adjusted
benchmark ("desirability probability") drives both dose ranking and the
adaptive cohort-size rule, and the safety/futility admissibility checks
are ordinary Beta-binomial tail probabilities.  Everything therefore
reduces to the regularized incomplete beta function, evaluated here by
continued fraction to near machine precision.

All functions are pure and stateless.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, lgamma, log, log1p


@dataclass(frozen=True)
class UtilityWeights:
    """Utility scores for the four joint (toxicity, efficacy) outcomes.

    The defaults (100, 60, 40, 0) score efficacy-without-toxicity best and
    toxicity-without-efficacy worst.
    """

    eff_no_tox: float = 100.0
    eff_tox: float = 60.0
    no_eff_no_tox: float = 40.0
    no_eff_tox: float = 0.0

    def __post_init__(self) -> None:
        scores = (self.eff_no_tox, self.eff_tox, self.no_eff_no_tox, self.no_eff_tox)
        if not all(0.0 <= w <= 100.0 for w in scores):
            raise ValueError(f"utility scores must lie in [0, 100], got {scores}")
        if max(scores) != self.eff_no_tox:
            raise ValueError("efficacy without toxicity must carry the maximum score")
        if min(scores) != self.no_eff_tox:
            raise ValueError("toxicity without efficacy must carry the minimum score")

    @property
    def marginally_sufficient(self) -> bool:
        """True when the utility total depends on the data only through
        (n, #tox, #eff), i.e. the interaction coefficient vanishes."""
        return self.eff_no_tox + self.no_eff_tox == self.eff_tox + self.no_eff_no_tox


@dataclass(frozen=True)
class OutcomeCounts2x2:
    """Patient counts for the four joint outcomes of one dose or cohort.

    a: efficacy and no toxicity
    b: efficacy and toxicity
    c: no efficacy and no toxicity
    d: no efficacy and toxicity
    """

    a: int = 0
    b: int = 0
    c: int = 0
    d: int = 0

    def __post_init__(self) -> None:
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"count {name} must be a nonnegative integer, got {v!r}")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    @property
    def n_eff(self) -> int:
        return self.a + self.b

    @property
    def n_tox(self) -> int:
        return self.b + self.d

    def __add__(self, other: "OutcomeCounts2x2") -> "OutcomeCounts2x2":
        return OutcomeCounts2x2(
            self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d
        )


@dataclass(frozen=True)
class Benchmark:
    """Utility benchmark separating desirable from undesirable doses.

    u_b is the benchmark on the 0-100 utility scale; u_tilde is the
    decision threshold on the 0-1 scale, the midpoint between the
    benchmark and the maximum: u_tilde = (u_b/100 + 1) / 2.
    """

    u_b: float
    u_tilde: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.u_b <= 100.0:
            raise ValueError(f"benchmark utility must lie in [0, 100], got {self.u_b}")
        expected = (self.u_b / 100.0 + 1.0) / 2.0
        if abs(self.u_tilde - expected) > 1e-12:
            raise ValueError(
                f"u_tilde={self.u_tilde} inconsistent with u_b={self.u_b} "
                f"(expected {expected})"
            )

    @classmethod
    def from_utility(cls, u_b: float) -> "Benchmark":
        return cls(u_b=u_b, u_tilde=(u_b / 100.0 + 1.0) / 2.0)


class ConfigurationError(ValueError):
    """A design configuration rules out the requested computation."""


def _beta_cont_frac(a: float, b: float, x: float, max_iter: int = 500, eps: float = 1e-16) -> float:
    """Continued fraction for the incomplete beta, by the modified Lentz method."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}"
    )


def regularized_incomplete_beta(x: float, alpha: float, beta: float) -> float:
    """Regularized incomplete beta I_x(alpha, beta), the Beta(alpha, beta) CDF.

    Continued-fraction evaluation with a symmetry switch at x > alpha/(alpha+beta)
    so the expansion is always taken on its rapidly converging side.  Absolute
    accuracy is far better than 1e-10 for the shape values used here.
    """
    if alpha <= 0.0 or beta <= 0.0:
        raise ValueError(f"shape parameters must be positive, got alpha={alpha}, beta={beta}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x > alpha / (alpha + beta):
        return 1.0 - regularized_incomplete_beta(1.0 - x, beta, alpha)
    ln_front = (
        lgamma(alpha + beta)
        - lgamma(alpha)
        - lgamma(beta)
        + alpha * log(x)
        + beta * log1p(-x)
    )
    value = exp(ln_front) * _beta_cont_frac(alpha, beta, x) / alpha
    return min(max(value, 0.0), 1.0)


def quasi_events(counts: OutcomeCounts2x2, weights: UtilityWeights) -> float:
    """Standardized utility total x_u in [0, n]: summed scores divided by 100."""
    total = (
        counts.a * weights.eff_no_tox
        + counts.b * weights.eff_tox
        + counts.c * weights.no_eff_no_tox
        + counts.d * weights.no_eff_tox
    )
    return total / 100.0


def quasi_events_from_marginals(
    n: int, tox: int, eff: int, weights: UtilityWeights
) -> float:
    """x_u reconstructed from (n, #tox, #eff) alone.

    Valid only for weight sets whose utility total does not depend on how
    toxicity and efficacy overlap within patients; all 2x2 tables with the
    same marginals then share one x_u.
    """
    if not weights.marginally_sufficient:
        raise ConfigurationError(
            "utility weights carry a toxicity-efficacy interaction; "
            "the full 2x2 outcome table is required to compute x_u"
        )
    if tox < 0 or eff < 0 or tox > n or eff > n:
        raise ValueError(f"inconsistent marginals n={n}, tox={tox}, eff={eff}")
    w = weights
    total = n * w.no_eff_no_tox + eff * (w.eff_no_tox - w.no_eff_no_tox) - tox * (
        w.no_eff_no_tox - w.no_eff_tox
    )
    return total / 100.0


def desirability_probability(n: int, x_u: float, bench: Benchmark) -> float:
    """Posterior probability that the mean standardized utility exceeds u_tilde.

    Under the quasi-binomial model, u ~ Beta(1 + x_u, 1 + n - x_u), so this is
    1 - I_{u_tilde}(1 + x_u, 1 + n - x_u).
    """
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    if not -1e-9 <= x_u <= n + 1e-9:
        raise ValueError(f"x_u must lie in [0, n={n}], got {x_u}")
    x_u = min(max(x_u, 0.0), float(n))
    return 1.0 - regularized_incomplete_beta(bench.u_tilde, 1.0 + x_u, 1.0 + n - x_u)


def benchmark_from(
    phi_t: float, psi_e: float, weights: UtilityWeights | None = None
) -> Benchmark:
    """Benchmark utility of the marginally acceptable dose.

    Evaluates the expected utility at the limits of acceptability, with
    toxicity probability phi_t and efficacy probability psi_e treated as
    independent margins, then places the decision threshold u_tilde halfway
    between that benchmark and the maximum utility.
    """
    if not 0.0 <= phi_t <= 1.0:
        raise ValueError(f"phi_t must lie in [0, 1], got {phi_t}")
    if not 0.0 <= psi_e <= 1.0:
        raise ValueError(f"psi_e must lie in [0, 1], got {psi_e}")
    w = weights if weights is not None else UtilityWeights()
    u_b = (
        w.eff_no_tox * psi_e * (1.0 - phi_t)
        + w.eff_tox * psi_e * phi_t
        + w.no_eff_no_tox * (1.0 - psi_e) * (1.0 - phi_t)
        + w.no_eff_tox * (1.0 - psi_e) * phi_t
    )
    return Benchmark.from_utility(u_b)


def tail_posterior(events: int, n: int, cut_point: float, direction: str = "above") -> float:
    """Beta(1 + events, 1 + n - events) posterior tail mass.

    direction="above" returns Pr(p > cut_point); "below" returns Pr(p < cut_point).
    """
    if events < 0 or n < 0 or events > n:
        raise ValueError(f"need 0 <= events <= n, got events={events}, n={n}")
    if not 0.0 <= cut_point <= 1.0:
        raise ValueError(f"cut_point must lie in [0, 1], got {cut_point}")
    cdf = regularized_incomplete_beta(cut_point, 1.0 + events, 1.0 + n - events)
    if direction == "above":
        return 1.0 - cdf
    if direction == "below":
        return cdf
    raise ValueError(f"direction must be 'above' or 'below', got {direction!r}")
