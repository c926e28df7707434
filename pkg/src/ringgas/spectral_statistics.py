"""Reference level-spacing ensembles and empirical spacing statistics.

Distributions are parametrized on the normalized spacing s (unit mean), so
every density here integrates to 1 with mean 1:

  Poisson        P(s) = exp(-s)
  Wigner-Dyson   P(s) = b_beta * s^beta * exp(-a_beta * s^2),  beta in {1, 2, 4}
  Brody          P(s) = b(1+q) s^q exp(-b s^(q+1)),  b = Gamma((2+q)/(1+q))^(q+1)

Brody interpolates the two: q=0 is Poisson and q=1 is Wigner-Dyson beta=1.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import (
    DomainError,
    EmptyRequest,
    InsufficientData,
    Unsupported,
    ZeroSpacingWarning,
)

_PI = math.pi

# beta -> (b_beta, a_beta) of the Wigner-Dyson surmise, exact closed forms.
_WD_CONSTANTS = {
    1: (_PI / 2.0, _PI / 4.0),
    2: (32.0 / _PI**2, 4.0 / _PI),
    4: (262144.0 / (729.0 * _PI**3), 64.0 / (9.0 * _PI)),
}

# Mean r-ratio references for the min/max adjacent-gap statistic.
_R_POISSON = 0.38629
_R_WD_BETA2 = 0.60266


@dataclass(frozen=True)
class EnsembleKind:
    """Tagged reference ensemble: poisson, wigner_dyson(beta) or brody(q)."""

    family: str
    beta: int | None = None
    q: float | None = None

    def __post_init__(self):
        if self.family == "poisson":
            if self.beta is not None or self.q is not None:
                raise DomainError("poisson takes no parameters")
        elif self.family == "wigner_dyson":
            if self.beta not in _WD_CONSTANTS:
                raise DomainError(f"beta must be one of 1, 2, 4, got {self.beta}")
        elif self.family == "brody":
            if self.q is None or not (0.0 <= self.q <= 1.0):
                raise DomainError(f"brody q must lie in [0, 1], got {self.q}")
        else:
            raise DomainError(f"unknown ensemble family {self.family!r}")

    @classmethod
    def poisson(cls) -> "EnsembleKind":
        return cls("poisson")

    @classmethod
    def wigner_dyson(cls, beta: int) -> "EnsembleKind":
        return cls("wigner_dyson", beta=beta)

    @classmethod
    def brody(cls, q: float) -> "EnsembleKind":
        return cls("brody", q=float(q))

    @property
    def label(self) -> str:
        if self.family == "poisson":
            return "poisson"
        if self.family == "wigner_dyson":
            return f"wd_beta{self.beta}"
        return f"brody_q{self.q:g}"

    @classmethod
    def parse(cls, text: str) -> "EnsembleKind":
        """Parse a CLI label: poisson | goe | gue | gse | wd1 | wd2 | wd4 | brody:<q>."""
        t = text.strip().lower()
        named = {
            "poisson": cls.poisson(),
            "goe": cls.wigner_dyson(1),
            "gue": cls.wigner_dyson(2),
            "gse": cls.wigner_dyson(4),
            "wd1": cls.wigner_dyson(1),
            "wd2": cls.wigner_dyson(2),
            "wd4": cls.wigner_dyson(4),
        }
        if t in named:
            return named[t]
        if t.startswith("brody:"):
            try:
                return cls.brody(float(t.split(":", 1)[1]))
            except ValueError as exc:
                raise Unsupported(f"bad brody parameter in {text!r}") from exc
        if t == "brody":
            raise Unsupported("brody needs a parameter, e.g. brody:0.5")
        raise Unsupported(f"unknown ensemble kind {text!r}")


POISSON = EnsembleKind.poisson()
GOE = EnsembleKind.wigner_dyson(1)
GUE = EnsembleKind.wigner_dyson(2)
GSE = EnsembleKind.wigner_dyson(4)


def wd_constants(beta: int) -> tuple:
    """Exact (b_beta, a_beta) normalization constants of the surmise."""
    try:
        return _WD_CONSTANTS[beta]
    except KeyError:
        raise DomainError(f"beta must be one of 1, 2, 4, got {beta}") from None


def brody_b(q: float) -> float:
    """Brody scale b = Gamma((2+q)/(1+q))^(q+1); b(0) = 1, b(1) = pi/4."""
    if not (0.0 <= q <= 1.0):
        raise DomainError(f"brody q must lie in [0, 1], got {q}")
    return math.gamma((2.0 + q) / (1.0 + q)) ** (q + 1.0)


def _as_spacings(s, name="s"):
    arr = np.asarray(s, dtype=float)
    if arr.size and np.any(arr < 0):
        raise DomainError(f"{name} must be non-negative")
    return arr


def pdf(kind: EnsembleKind, s):
    """Reference spacing density at s (scalar or array)."""
    arr = _as_spacings(s)
    if kind.family == "poisson":
        out = np.exp(-arr)
    elif kind.family == "wigner_dyson":
        b, a = _WD_CONSTANTS[kind.beta]
        out = b * arr**kind.beta * np.exp(-a * arr * arr)
    else:
        q = kind.q
        b = brody_b(q)
        out = b * (1.0 + q) * arr**q * np.exp(-b * arr ** (q + 1.0))
    return float(out) if np.isscalar(s) else out


def cdf(kind: EnsembleKind, s):
    """Reference spacing CDF at s (scalar or array).

    Wigner-Dyson reduces to a regularized lower incomplete gamma in a*s^2:
    substituting u = a s^2 in the integral of b s^beta exp(-a s^2) gives
    gammainc((beta+1)/2, a s^2) exactly (the constants make it regularized).
    """
    arr = _as_spacings(s)
    if kind.family == "poisson":
        out = -np.expm1(-arr)
    elif kind.family == "wigner_dyson":
        _, a = _WD_CONSTANTS[kind.beta]
        out = special.gammainc((kind.beta + 1) / 2.0, a * arr * arr)
    else:
        b = brody_b(kind.q)
        out = -np.expm1(-b * arr ** (kind.q + 1.0))
    return float(out) if np.isscalar(s) else out


def ppf(kind: EnsembleKind, u):
    """Inverse CDF on [0, 1); exact closed forms (incomplete gamma for WD)."""
    arr = np.asarray(u, dtype=float)
    if arr.size and (np.any(arr < 0) or np.any(arr >= 1)):
        raise DomainError("probabilities must lie in [0, 1)")
    if kind.family == "poisson":
        out = -np.log1p(-arr)
    elif kind.family == "wigner_dyson":
        _, a = _WD_CONSTANTS[kind.beta]
        out = np.sqrt(special.gammaincinv((kind.beta + 1) / 2.0, arr) / a)
    else:
        b = brody_b(kind.q)
        out = (-np.log1p(-arr) / b) ** (1.0 / (1.0 + kind.q))
    return float(out) if np.isscalar(u) else out


def sample_spacings(kind: EnsembleKind, n: int, seed: int) -> np.ndarray:
    """n i.i.d. spacings from the reference ensemble, deterministic in seed."""
    if n < 1:
        raise EmptyRequest(f"need n >= 1 samples, got {n}")
    rng = np.random.default_rng(seed)
    return ppf(kind, rng.random(n))


def ks_distance(samples, kind: EnsembleKind) -> float:
    """Two-sided Kolmogorov-Smirnov distance between samples and the reference CDF."""
    arr = _as_spacings(samples, "samples")
    if arr.size == 0:
        raise EmptyRequest("ks_distance needs at least one sample")
    x = np.sort(arr)
    n = x.size
    f = cdf(kind, x)
    d_plus = np.max(np.arange(1, n + 1) / n - f)
    d_minus = np.max(f - np.arange(0, n) / n)
    return float(max(d_plus, d_minus))


@dataclass(frozen=True)
class Histogram:
    """Binned counts with edges; total is the number of binned samples."""

    bin_edges: np.ndarray
    counts: np.ndarray
    total: int

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise DomainError("bin edges must be strictly increasing with >= 2 entries")
        if counts.shape != (edges.size - 1,):
            raise DomainError("need one count per bin")
        if np.any(counts < 0) or not np.issubdtype(counts.dtype, np.integer):
            raise DomainError("counts must be non-negative integers")
        if int(counts.sum()) != int(self.total):
            raise DomainError("total must equal the sum of counts")
        edges.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_samples(cls, samples, bin_edges) -> "Histogram":
        counts, edges = np.histogram(np.asarray(samples, dtype=float), bins=bin_edges)
        return cls(bin_edges=edges, counts=counts, total=int(counts.sum()))

    def to_dict(self) -> dict:
        return {
            "bin_edges": [float(e) for e in self.bin_edges],
            "counts": [int(c) for c in self.counts],
            "total": int(self.total),
        }


def l1_histogram_distance(hist: Histogram, kind: EnsembleKind) -> float:
    """Sum over bins of |count/total - integral of pdf over the bin|."""
    if hist.total <= 0:
        raise EmptyRequest("histogram has no binned samples")
    probs = np.diff(cdf(kind, hist.bin_edges))
    return float(np.sum(np.abs(hist.counts / hist.total - probs)))


@dataclass(frozen=True)
class BrodyFit:
    q: float
    log_likelihood: float


def _brody_loglik(q: float, log_s: np.ndarray, s: np.ndarray) -> float:
    b = brody_b(q)
    n = s.size
    return n * math.log(b * (1.0 + q)) + q * log_s.sum() - b * np.sum(s ** (1.0 + q))


def fit_brody(samples) -> BrodyFit:
    """Maximum-likelihood Brody q on [0, 1] by golden-section search (tol 1e-4).

    The 1-D log-likelihood is unimodal in practice. Zero spacings are floored
    at machine epsilon with a warning; the boundary value is returned when the
    likelihood is maximized at q = 0 or q = 1.
    """
    s = _as_spacings(samples, "samples").ravel()
    if s.size < 10:
        raise InsufficientData(f"brody fit needs >= 10 samples, got {s.size}")
    if np.any(s == 0.0):
        warnings.warn("zero spacings floored at machine epsilon", ZeroSpacingWarning)
        s = np.where(s == 0.0, np.finfo(float).eps, s)
    log_s = np.log(s)

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, 1.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc = _brody_loglik(c, log_s, s)
    fd = _brody_loglik(d, log_s, s)
    while hi - lo > 1e-4:
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = _brody_loglik(c, log_s, s)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = _brody_loglik(d, log_s, s)
    q_mid = 0.5 * (lo + hi)
    # snap to a boundary when it does at least as well as the interior point
    best_q, best_ll = q_mid, _brody_loglik(q_mid, log_s, s)
    for q_edge in (0.0, 1.0):
        ll = _brody_loglik(q_edge, log_s, s)
        if ll >= best_ll:
            best_q, best_ll = q_edge, ll
    return BrodyFit(q=best_q, log_likelihood=float(best_ll))


def mean_r(spacings) -> float:
    """Mean adjacent-gap ratio r_i = min(S_i, S_{i+1}) / max(S_i, S_{i+1}).

    Takes consecutive spacings (>= 2 of them, i.e. >= 3 levels). Pairs of
    exactly equal spacings give r = 1, including the degenerate all-zero case.
    """
    s = _as_spacings(spacings, "spacings").ravel()
    if s.size < 2:
        raise InsufficientData(f"mean_r needs >= 2 consecutive spacings, got {s.size}")
    lo = np.minimum(s[:-1], s[1:])
    hi = np.maximum(s[:-1], s[1:])
    r = np.divide(lo, hi, out=np.ones_like(lo), where=hi > 0)
    return float(r.mean())


def mean_r_from_levels(levels) -> float:
    """mean_r of the spacings of a sorted level sequence."""
    lv = np.sort(np.asarray(levels, dtype=float).ravel())
    if lv.size < 3:
        raise InsufficientData(f"mean_r needs >= 3 levels, got {lv.size}")
    return mean_r(np.diff(lv))


def r_reference(kind: EnsembleKind) -> float:
    """Literature mean-r value: 0.38629 (Poisson) or 0.60266 (WD beta=2)."""
    if kind.family == "poisson":
        return _R_POISSON
    if kind.family == "wigner_dyson" and kind.beta == 2:
        return _R_WD_BETA2
    raise Unsupported(f"no tabulated mean-r reference for {kind.label}")


@dataclass(frozen=True)
class DiagnosticsReport:
    """Spacing diagnostics against one reference ensemble."""

    kind: EnsembleKind
    histogram: Histogram
    ks: float
    l1: float
    q_hat: float
    brody_log_likelihood: float
    mean_r: float
    flags: tuple = ()

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind.label,
            "ks": self.ks,
            "l1": self.l1,
            "q_hat": self.q_hat,
            "brody_log_likelihood": self.brody_log_likelihood,
            "mean_r": self.mean_r,
            "flags": list(self.flags),
        }
        out.update(self.histogram.to_dict())
        return out


def diagnose_spacings(samples, kind: EnsembleKind, bin_edges=None) -> DiagnosticsReport:
    """Histogram, KS/L1 distances, Brody fit and mean r for one spacing sample."""
    s = _as_spacings(samples, "samples").ravel()
    if s.size < 2:
        raise InsufficientData(f"diagnostics need >= 2 spacings, got {s.size}")
    if bin_edges is None:
        bin_edges = np.linspace(0.0, max(4.0, float(np.ceil(s.max() + 1e-12))), 41)
    hist = Histogram.from_samples(s, bin_edges)
    flags = []
    if s.max() - s.min() <= 1e-9 * max(s.max(), 1.0):
        flags.append("degenerate-spacings")
    if s.size >= 10:
        fit = fit_brody(s)
        q_hat, ll = fit.q, fit.log_likelihood
    else:
        q_hat, ll = float("nan"), float("nan")
        flags.append("too-few-spacings-for-brody-fit")
    return DiagnosticsReport(
        kind=kind,
        histogram=hist,
        ks=ks_distance(s, kind),
        l1=l1_histogram_distance(hist, kind),
        q_hat=q_hat,
        brody_log_likelihood=ll,
        mean_r=mean_r(s),
        flags=tuple(flags),
    )
