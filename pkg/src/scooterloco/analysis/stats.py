"""Paired-comparison statistics.

Differences are always taken as ``a - b``. The normality gate runs
Shapiro-Wilk on the differences; a non-rejection at alpha selects the paired
t-test, otherwise the Wilcoxon signed-rank test.
"""
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .. import kernels

ALPHA = 0.05
EXACT_WILCOXON_MAX_N = 25


class InsufficientData(ValueError):
    pass


class DegenerateSample(ValueError):
    pass


@dataclass(frozen=True)
class PairedSample:
    values_a: tuple
    values_b: tuple
    label_a: str = "a"
    label_b: str = "b"

    def __post_init__(self):
        a = tuple(float(v) for v in self.values_a)
        b = tuple(float(v) for v in self.values_b)
        if len(a) != len(b):
            raise ValueError(f"unequal lengths {len(a)} and {len(b)}")
        if len(a) < 3:
            raise InsufficientData(f"need at least 3 pairs, got {len(a)}")
        if not all(math.isfinite(v) for v in a + b):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values_a", a)
        object.__setattr__(self, "values_b", b)

    @property
    def n(self):
        return len(self.values_a)

    def differences(self):
        return np.asarray(self.values_a) - np.asarray(self.values_b)


# -- Shapiro-Wilk (Royston 1995 approximation, as in algorithm AS R94) --------

_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coefs, x):
    out = 0.0
    for c in reversed(coefs):
        out = out * x + c
    return out


def shapiro_wilk_coefficients(n):
    if n < 3:
        raise InsufficientData(f"Shapiro-Wilk needs n >= 3, got {n}")
    a = np.zeros(n)
    if n == 3:
        a[0], a[2] = -math.sqrt(0.5), math.sqrt(0.5)
        return a
    i = np.arange(1, n + 1)
    m = special.ndtri((i - 0.375) / (n + 0.25))
    summ2 = float(m @ m)
    u = 1.0 / math.sqrt(n)
    a_n = m[-1] / math.sqrt(summ2) + _poly(_C1, u)
    if n > 5:
        a_n1 = m[-2] / math.sqrt(summ2) + _poly(_C2, u)
        phi = (summ2 - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * a_n**2 - 2 * a_n1**2)
        a[2:-2] = m[2:-2] / math.sqrt(phi)
        a[1], a[-2] = -a_n1, a_n1
    else:
        phi = (summ2 - 2 * m[-1] ** 2) / (1 - 2 * a_n**2)
        a[1:-1] = m[1:-1] / math.sqrt(phi)
    a[0], a[-1] = -a_n, a_n
    return a


def shapiro_wilk(xs):
    """(W, p) for 3 <= n <= 5000."""
    x = np.sort(np.asarray(xs, dtype=np.float64))
    n = x.size
    if n < 3:
        raise InsufficientData(f"Shapiro-Wilk needs n >= 3, got {n}")
    if n > 5000:
        raise ValueError("Shapiro-Wilk approximation is valid up to n = 5000")
    if not np.all(np.isfinite(x)):
        raise ValueError("values must be finite")
    if x[-1] - x[0] <= 1e-12 * max(1.0, abs(x[-1])):
        raise DegenerateSample("all values identical")
    a = shapiro_wilk_coefficients(n)
    centred = x - x.mean()
    w = float((a @ x) ** 2 / (centred @ centred))
    w = min(w, 1.0)

    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.pi / 3.0)
        return w, min(1.0, max(0.0, p))
    y = math.log1p(-w) if w < 1.0 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return w, 1e-99
        y = -math.log(gamma - y) if math.isfinite(y) else -math.inf
        mu = _poly(_C3, n)
        sigma = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        mu = _poly(_C5, ln)
        sigma = math.exp(_poly(_C6, ln))
    p = float(special.ndtr(-(y - mu) / sigma)) if math.isfinite(y) else 1.0
    return w, p


# -- paired t ---------------------------------------------------------------------


def cohen_d_from_t(t, n):
    if n < 2:
        raise InsufficientData("n must be at least 2")
    return t / math.sqrt(n)


@dataclass(frozen=True)
class TResult:
    t: float
    df: int
    p: float
    d: float
    mean_diff: float
    sd_diff: float


def paired_t(sample: PairedSample) -> TResult:
    d = sample.differences()
    n = d.size
    sd = float(np.std(d, ddof=1))
    mean = float(d.mean())
    if sd <= 1e-12 * max(1.0, abs(mean)):
        raise DegenerateSample("differences have zero variance")
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    p = float(2.0 * stats.t.sf(abs(t), df))
    return TResult(t, df, min(1.0, p), cohen_d_from_t(t, n), mean, sd)


# -- Wilcoxon signed-rank --------------------------------------------------------------


@dataclass(frozen=True)
class WilcoxonResult:
    w: float  # min(R+, R-)
    r_plus: float
    r_minus: float
    p: float
    r: float  # (R+ - R-) / (R+ + R-)
    n_nonzero: int
    exact: bool
    z: float  # normal deviate, continuity-corrected
    r_from_z: float  # z / sqrt(n_nonzero), the other common convention


def signed_ranks(diffs):
    """Drop zeros; average ranks for ties. Returns (ranks, signs)."""
    d = np.asarray(diffs, dtype=np.float64)
    d = d[d != 0.0]
    ranks = stats.rankdata(np.abs(d))
    return ranks, np.sign(d)


def exact_signed_rank_p(ranks, r_plus):
    """Two-sided exact p: share of the 2^m sign patterns whose R+ is at
    least as far from its mean as the observed one."""
    doubled = np.rint(np.asarray(ranks) * 2).astype(np.int64)
    counts = kernels.signed_rank_counts(doubled)
    extreme = int(kernels.count_as_extreme(counts, int(round(2 * r_plus))))
    return extreme / 2.0 ** len(doubled)


def wilcoxon_signed_rank(sample: PairedSample) -> WilcoxonResult:
    ranks, signs = signed_ranks(sample.differences())
    m = ranks.size
    if m == 0:
        raise DegenerateSample("all differences are zero")
    r_plus = float(ranks[signs > 0].sum())
    r_minus = float(ranks[signs < 0].sum())
    total = r_plus + r_minus
    mean = m * (m + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = m * (m + 1) * (2 * m + 1) / 24.0 - float((tie_counts**3 - tie_counts).sum()) / 48.0
    dev = abs(r_plus - mean)
    z = max(dev - 0.5, 0.0) / math.sqrt(var) if var > 0 else 0.0
    if r_plus < mean:
        z = -z
    exact = m <= EXACT_WILCOXON_MAX_N
    if exact:
        p = exact_signed_rank_p(ranks, r_plus)
    else:
        p = float(min(1.0, 2.0 * stats.norm.sf(abs(z))))
    return WilcoxonResult(
        min(r_plus, r_minus),
        r_plus,
        r_minus,
        min(1.0, p),
        (r_plus - r_minus) / total,
        m,
        exact,
        z,
        z / math.sqrt(m),
    )


# -- gated choice ---------------------------------------------------------------------


class TestKind(str, enum.Enum):
    PAIRED_T = "paired_t"
    WILCOXON = "wilcoxon"


@dataclass(frozen=True)
class TestReport:
    measure: str
    label_a: str
    label_b: str
    n: int
    chosen_test: TestKind
    normality: tuple  # (W, p) of Shapiro-Wilk on the differences
    statistic: float
    df: int
    p_value: float
    effect_size: float
    effect_size_kind: str
    alpha: float = ALPHA
    extra: dict = field(default_factory=dict)

    @property
    def significant(self):
        return self.p_value < self.alpha

    def to_dict(self):
        return {
            "measure": self.measure,
            "labels": [self.label_a, self.label_b],
            "n": self.n,
            "chosen_test": self.chosen_test.value,
            "normality": {"W": self.normality[0], "p": self.normality[1], "normal": self.normality[1] >= self.alpha},
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "effect_size": self.effect_size,
            "effect_size_kind": self.effect_size_kind,
            "alpha": self.alpha,
            "significant": self.significant,
            **self.extra,
        }


def select_test(sample: PairedSample, measure="", alpha=ALPHA) -> TestReport:
    w_sw, p_sw = shapiro_wilk(sample.differences())
    a_mean = float(np.mean(sample.values_a))
    b_mean = float(np.mean(sample.values_b))
    extra = {
        "mean_a": a_mean,
        "sd_a": float(np.std(sample.values_a, ddof=1)),
        "mean_b": b_mean,
        "sd_b": float(np.std(sample.values_b, ddof=1)),
    }
    if p_sw >= alpha:
        res = paired_t(sample)
        return TestReport(
            measure, sample.label_a, sample.label_b, sample.n, TestKind.PAIRED_T, (w_sw, p_sw),
            res.t, res.df, res.p, res.d, "cohen_d", alpha, extra,
        )
    res = wilcoxon_signed_rank(sample)
    extra.update(
        {"r_plus": res.r_plus, "r_minus": res.r_minus, "n_nonzero": res.n_nonzero,
         "exact": res.exact, "z": res.z, "r_from_z": res.r_from_z}
    )
    return TestReport(
        measure, sample.label_a, sample.label_b, sample.n, TestKind.WILCOXON, (w_sw, p_sw),
        res.w, None, res.p, res.r, "rank_biserial", alpha, extra,
    )
