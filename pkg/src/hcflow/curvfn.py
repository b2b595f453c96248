"""Curvature functions of the principal curvatures.

Implements the admissible speed families (shifted, normalized so the value at
the unit vector e = (1,...,1) is 1 before shifting), their gradients, the
elementary/complete symmetric polynomial machinery, curvature-cone membership,
and a randomized certifier for the structural hypotheses every admissible
speed must satisfy (homogeneity, monotonicity, convexity or concavity plus
inverse concavity, and the mean-curvature comparison directions).

Shapes: principal-curvature arguments are arrays of shape (..., n); values
come back with shape (...), gradients with shape (..., n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FAMILIES",
    "CONVEX",
    "CONCAVE_INVERSE_CONCAVE",
    "AdmissibilityError",
    "CurvatureSpec",
    "GammaPlus",
    "GammaAlpha",
    "GammaK",
    "elementary_symmetric_all",
    "elementary_symmetric_gradient",
    "complete_homogeneous_all",
    "eval_F",
    "grad_F",
    "cone_membership",
    "CheckResult",
    "AssumptionReport",
    "verify_assumptions",
]

FAMILIES = ("MeanH", "NormA", "CompletelySymmetric", "ElemSymmetricQuotient", "PowerMean")

CONVEX = "Convex"
CONCAVE_INVERSE_CONCAVE = "ConcaveInverseConcave"

_CLASSIFICATION = {
    "MeanH": CONVEX,  # linear, hence also concave; filed under Convex
    "NormA": CONVEX,
    "CompletelySymmetric": CONVEX,
    "ElemSymmetricQuotient": CONCAVE_INVERSE_CONCAVE,
    "PowerMean": CONCAVE_INVERSE_CONCAVE,
}


class AdmissibilityError(ValueError):
    """Principal curvatures left the shifted positive cone (some kappa_i <= alpha)."""

    def __init__(self, index, value, alpha):
        self.index = index
        self.value = value
        self.alpha = alpha
        super().__init__(
            f"principal curvature {value:.6g} at index {index} is not strictly "
            f"above the shift alpha={alpha:.6g}"
        )


@dataclass(frozen=True)
class CurvatureSpec:
    """A normalized, shifted curvature function F(kappa) = F~(kappa - alpha*e).

    family   one of FAMILIES
    n        number of principal curvatures
    alpha    shift in [0, inf); admissible arguments need min(kappa) > alpha
    param1   family parameter: degree k (CompletelySymmetric), numerator
             degree k (ElemSymmetricQuotient), exponent r (PowerMean)
    param2   denominator degree l for ElemSymmetricQuotient

    The normalization constant c_F makes F~(e) = 1, so the geodesic sphere
    comparisons F <=> H/n come out with unit constants.
    """

    family: str
    n: int
    alpha: float = 0.0
    param1: float | None = None
    param2: float | None = None
    c_F: float = field(init=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown curvature family {self.family!r}; expected one of {FAMILIES}")
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n!r}")
        if not (self.alpha >= 0.0 and math.isfinite(self.alpha)):
            raise ValueError(f"shift alpha must be finite and >= 0, got {self.alpha!r}")
        object.__setattr__(self, "c_F", self._normalization())

    def _normalization(self):
        n = self.n
        if self.family == "MeanH":
            return 1.0 / n
        if self.family == "NormA":
            return 1.0 / math.sqrt(n)
        if self.family == "CompletelySymmetric":
            k = self._int_param("param1", self.param1, 1, None)
            return math.comb(n + k - 1, k) ** (-1.0 / k)
        if self.family == "ElemSymmetricQuotient":
            k = self._int_param("param1", self.param1, 1, n)
            l = self._int_param("param2", self.param2, 0, n)
            if not (n >= k > l >= 0):
                raise ValueError(
                    f"ElemSymmetricQuotient needs n >= k > l >= 0, got n={n}, k={k}, l={l}")
            return (math.comb(n, l) / math.comb(n, k)) ** (1.0 / (k - l))
        # PowerMean
        if self.param1 is None:
            raise ValueError("PowerMean needs param1 = exponent r")
        r = float(self.param1)
        if not (abs(r) <= 1.0):
            raise ValueError(f"PowerMean exponent must satisfy |r| <= 1, got {r}")
        return 1.0  # values are computed in already-normalized form

    @staticmethod
    def _int_param(name, value, lo, hi):
        if value is None:
            raise ValueError(f"missing integer parameter {name}")
        k = int(value)
        if k != value:
            raise ValueError(f"parameter {name} must be an integer, got {value!r}")
        if k < lo or (hi is not None and k > hi):
            raise ValueError(f"parameter {name}={k} out of range [{lo}, {hi}]")
        return k

    @property
    def classification(self):
        return _CLASSIFICATION[self.family]

    def describe(self):
        parts = [self.family]
        if self.family == "CompletelySymmetric":
            parts.append(f"k={int(self.param1)}")
        elif self.family == "ElemSymmetricQuotient":
            parts.append(f"k={int(self.param1)}, l={int(self.param2)}")
        elif self.family == "PowerMean":
            parts.append(f"r={float(self.param1):g}")
        parts.append(f"n={self.n}, alpha={self.alpha:g}")
        return "(".join([parts[0], ", ".join(parts[1:])]) + ")"


# ---------------------------------------------------------------------------
# symmetric polynomial machinery
# ---------------------------------------------------------------------------

def elementary_symmetric_all(kappa):
    """All elementary symmetric polynomials H_0..H_n of kappa, shape (..., n+1).

    Stable one-pass recurrence (update from high degree down); H_0 = 1 and
    H_k(e) = binom(n, k).
    """
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    out = np.zeros(kappa.shape[:-1] + (n + 1,))
    out[..., 0] = 1.0
    for i in range(n):
        xi = kappa[..., i]
        for k in range(min(i + 1, n), 0, -1):
            out[..., k] += xi * out[..., k - 1]
    return out


def elementary_symmetric_gradient(k, kappa):
    """Gradient of H_k: dH_k/dkappa_i = H_{k-1} of the other n-1 entries."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    if not (0 <= k <= n):
        raise ValueError(f"degree k must lie in [0, {n}], got {k}")
    grad = np.zeros_like(kappa)
    if k == 0:
        return grad
    for i in range(n):
        rest = np.delete(kappa, i, axis=-1)
        grad[..., i] = elementary_symmetric_all(rest)[..., k - 1]
    return grad


def complete_homogeneous_all(kappa, kmax):
    """Complete homogeneous symmetric polynomials h_0..h_kmax, shape (..., kmax+1).

    h_k sums kappa^alpha over all multi-indices |alpha| = k; h_k(e) counts
    them, binom(n+k-1, k).
    """
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    out = np.zeros(kappa.shape[:-1] + (kmax + 1,))
    out[..., 0] = 1.0
    for i in range(n):
        xi = kappa[..., i]
        for k in range(1, kmax + 1):
            out[..., k] += xi * out[..., k - 1]
    return out


def _complete_homogeneous_gradient(k, kappa, h_table):
    """dh_k/dkappa_i = h_{k-1} of the multiset kappa with kappa_i repeated,
    i.e. sum_j kappa_i^j h_{k-1-j}(kappa)."""
    kappa = np.asarray(kappa, dtype=float)
    grad = np.zeros_like(kappa)
    powers = np.ones_like(kappa)
    for j in range(k):
        grad += powers * h_table[..., k - 1 - j][..., None]
        if j < k - 1:
            powers = powers * kappa
    return grad


# ---------------------------------------------------------------------------
# family evaluation (on the shifted, positive argument)
# ---------------------------------------------------------------------------

def _tilde_value(spec, x):
    """Normalized family value F~(x) for x strictly inside the positive cone."""
    n = spec.n
    if spec.family == "MeanH":
        return x.mean(axis=-1)
    if spec.family == "NormA":
        return np.sqrt((x * x).sum(axis=-1) / n)
    if spec.family == "CompletelySymmetric":
        k = int(spec.param1)
        hk = complete_homogeneous_all(x, k)[..., k]
        return spec.c_F * hk ** (1.0 / k)
    if spec.family == "ElemSymmetricQuotient":
        k, l = int(spec.param1), int(spec.param2)
        e = elementary_symmetric_all(x)
        return spec.c_F * (e[..., k] / e[..., l]) ** (1.0 / (k - l))
    r = float(spec.param1)
    if r == 0.0:
        return np.exp(np.log(x).mean(axis=-1))  # geometric mean, the r -> 0 limit
    return ((x ** r).mean(axis=-1)) ** (1.0 / r)


def _tilde_grad(spec, x):
    """Gradient of the normalized family value; strictly positive on the cone."""
    n = spec.n
    if spec.family == "MeanH":
        return np.full_like(x, 1.0 / n)
    if spec.family == "NormA":
        val = np.sqrt((x * x).sum(axis=-1) / n)
        return x / (n * val[..., None])
    if spec.family == "CompletelySymmetric":
        k = int(spec.param1)
        h = complete_homogeneous_all(x, k)
        hk = h[..., k]
        dhk = _complete_homogeneous_gradient(k, x, h)
        return spec.c_F * (1.0 / k) * hk[..., None] ** (1.0 / k - 1.0) * dhk
    if spec.family == "ElemSymmetricQuotient":
        k, l = int(spec.param1), int(spec.param2)
        e = elementary_symmetric_all(x)
        val = spec.c_F * (e[..., k] / e[..., l]) ** (1.0 / (k - l))
        rel = elementary_symmetric_gradient(k, x) / e[..., k][..., None]
        if l > 0:
            rel = rel - elementary_symmetric_gradient(l, x) / e[..., l][..., None]
        return val[..., None] * rel / (k - l)
    r = float(spec.param1)
    if r == 0.0:
        val = np.exp(np.log(x).mean(axis=-1))
        return val[..., None] / (n * x)
    val = ((x ** r).mean(axis=-1)) ** (1.0 / r)
    return (val[..., None] ** (1.0 - r)) * (x ** (r - 1.0)) / n


def _shifted(spec, kappa):
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape[-1] != spec.n:
        raise ValueError(f"expected {spec.n} principal curvatures, got shape {kappa.shape}")
    x = kappa - spec.alpha
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        bad = np.argwhere(~(x > 0.0))[0]
        idx = tuple(int(b) for b in bad)
        raise AdmissibilityError(idx, float(kappa[idx]), spec.alpha)
    return x


def eval_F(spec, kappa):
    """Shifted curvature function F(kappa) = F~(kappa - alpha e).

    Raises AdmissibilityError when any entry fails kappa_i > alpha.
    Homogeneous of degree one in the shifted argument, F(e*(1+alpha)) = 1.
    """
    return _tilde_value(spec, _shifted(spec, kappa))


def grad_F(spec, kappa):
    """Gradient dF/dkappa_i (the shift drops out); strictly positive entries."""
    return _tilde_grad(spec, _shifted(spec, kappa))


# ---------------------------------------------------------------------------
# curvature cones
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaPlus:
    """Positive cone: all kappa_i > 0."""


@dataclass(frozen=True)
class GammaAlpha:
    """Shifted cone: all kappa_i > alpha (h-convexity is alpha = a)."""

    alpha: float


@dataclass(frozen=True)
class GammaK:
    """Garding cone: H_1 > 0, ..., H_k > 0."""

    k: int


def cone_membership(kappa, cone):
    """Membership verdict and minimal slack of kappa in the given cone.

    The margin is the smallest of the cone's defining quantities (componentwise
    for GammaPlus/GammaAlpha, the symmetric polynomials H_1..H_k for GammaK);
    membership means margin > 0.
    """
    kappa = np.asarray(kappa, dtype=float)
    if isinstance(cone, GammaPlus):
        margin = kappa.min(axis=-1)
    elif isinstance(cone, GammaAlpha):
        margin = kappa.min(axis=-1) - cone.alpha
    elif isinstance(cone, GammaK):
        n = kappa.shape[-1]
        if not (1 <= cone.k <= n):
            raise ValueError(f"GammaK degree must lie in [1, {n}], got {cone.k}")
        e = elementary_symmetric_all(kappa)
        margin = e[..., 1:cone.k + 1].min(axis=-1)
    else:
        raise TypeError(f"unknown cone {cone!r}")
    if margin.ndim == 0:
        margin = float(margin)
        return margin > 0.0, margin
    return margin > 0.0, margin


# ---------------------------------------------------------------------------
# randomized hypothesis certification
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    required: bool
    tolerance: float
    violations: int
    worst: float
    witness: tuple | None

    def line(self):
        status = "PASS" if self.passed else ("FAIL" if self.required else "fail (informational)")
        return (f"{self.name:38s} {status:22s} worst={self.worst: .3e} "
                f"tol={self.tolerance:.1e} violations={self.violations}")


@dataclass
class AssumptionReport:
    spec: CurvatureSpec
    samples: int
    seed: int
    checks: dict
    notes: list
    passed: bool

    def lines(self):
        head = [f"assumption report for {self.spec.describe()} "
                f"[{self.spec.classification}], {self.samples} samples, seed={self.seed}"]
        body = [c.line() for c in self.checks.values()]
        tail = [f"note: {s}" for s in self.notes]
        tail.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return head + body + tail


def _check(name, required, tol, defect, witness_pool):
    """Build a CheckResult from a defect array (positive entries = violations)."""
    defect = np.asarray(defect)
    bad = defect > tol
    worst = float(defect.max()) if defect.size else 0.0
    witness = None
    if bad.any():
        i = int(np.argmax(defect))
        witness = tuple(np.asarray(witness_pool[i], dtype=float).tolist())
    return CheckResult(name, not bad.any(), required, tol, int(bad.sum()), worst, witness)


def verify_assumptions(spec, samples=10_000, seed=0, fd_step=1e-6):
    """Randomized certification of the structural hypotheses of a speed family.

    Draws `samples` points of the positive cone (uniform in (0.05, 4)^n,
    deterministic in `seed`) and checks, on the normalized family F~:

    - homogeneity of degree one (tol 1e-10),
    - strictly positive gradient,
    - analytic gradient against central finite differences (rel tol 1e-6),
    - the elementary-symmetric derivative identity
      H_k = dH_{k+1}/dkappa_i + kappa_i dH_k/dkappa_i (tol 1e-12),
    - midpoint convexity and midpoint concavity (the one matching the family's
      classification is required, the other is informational),
    - midpoint concavity of the dual F*(z) = F~(z^{-1})^{-1} (inverse
      concavity; required for the ConcaveInverseConcave class),
    - the geodesic-sphere comparison directions: F~ <= H/n for concave
      families, >= for convex ones, and sum_i dF~/dkappa_i >= 1 (concave)
      or <= 1 (convex).

    Every check reports its worst violation and a witness point.  The overall
    verdict aggregates the required checks only.
    """
    rng = np.random.default_rng(seed)
    n = spec.n
    x = rng.uniform(0.05, 4.0, size=(samples, n))
    y = rng.uniform(0.05, 4.0, size=(samples, n))
    lam = rng.uniform(0.2, 5.0, size=samples)

    fx = _tilde_value(spec, x)
    gx = _tilde_grad(spec, x)
    convex_family = spec.classification == CONVEX

    checks = {}

    scaled = _tilde_value(spec, lam[:, None] * x)
    defect = np.abs(scaled - lam * fx) / np.maximum(1.0, np.abs(lam * fx))
    checks["homogeneity"] = _check("homogeneity", True, 1e-10, defect, x)

    checks["gradient_positive"] = _check("gradient_positive", True, 0.0, (-gx).max(axis=-1), x)

    fd = np.empty_like(gx)
    for i in range(n):
        h = fd_step * np.maximum(1.0, np.abs(x[:, i]))
        xp = x.copy(); xp[:, i] += h
        xm = x.copy(); xm[:, i] -= h
        fd[:, i] = (_tilde_value(spec, xp) - _tilde_value(spec, xm)) / (2.0 * h)
    rel = np.abs(fd - gx) / np.maximum(np.abs(gx), 1e-12)
    checks["gradient_matches_fd"] = _check("gradient_matches_fd", True, 1e-6,
                                           rel.max(axis=-1), x)

    e_all = elementary_symmetric_all(x)
    ident = np.zeros(samples)
    for k in range(n):
        dk1 = elementary_symmetric_gradient(k + 1, x)
        dk = elementary_symmetric_gradient(k, x)
        resid = np.abs(dk1 + x * dk - e_all[..., k][..., None])
        scale = np.maximum(1.0, np.abs(e_all[..., k]))[..., None]
        ident = np.maximum(ident, (resid / scale).max(axis=-1))
    checks["elem_symmetric_derivative_identity"] = _check(
        "elem_symmetric_derivative_identity", True, 1e-12, ident, x)

    mid = _tilde_value(spec, 0.5 * (x + y))
    chord = 0.5 * (fx + _tilde_value(spec, y))
    scale = np.maximum(1.0, np.abs(chord))
    checks["midpoint_convex"] = _check("midpoint_convex", convex_family, 1e-12,
                                       (mid - chord) / scale, x)
    checks["midpoint_concave"] = _check("midpoint_concave", not convex_family, 1e-12,
                                        (chord - mid) / scale, x)

    def dual(z):
        return 1.0 / _tilde_value(spec, 1.0 / z)

    dmid = dual(0.5 * (x + y))
    dchord = 0.5 * (dual(x) + dual(y))
    dscale = np.maximum(1.0, np.abs(dchord))
    checks["inverse_concavity"] = _check("inverse_concavity", not convex_family, 1e-12,
                                         (dchord - dmid) / dscale, x)

    hmean = x.mean(axis=-1)
    fh = (fx - hmean) if not convex_family else (hmean - fx)
    checks["mean_comparison_direction"] = _check(
        "mean_comparison_direction", True, 1e-12, fh / np.maximum(1.0, hmean), x)

    gsum = gx.sum(axis=-1)
    fg = (1.0 - gsum) if not convex_family else (gsum - 1.0)
    checks["gradient_sum_direction"] = _check("gradient_sum_direction", True, 1e-12, fg, x)

    notes = []
    if spec.family == "MeanH":
        notes.append("MeanH is linear: convexity and concavity both hold with equality.")
    if not convex_family:
        notes.append(
            "inverse concavity is checked via the standard dual F*(z) = F~(1/z)^{-1}; "
            "an alternative sign convention for the dual exists in the literature and "
            "differs from this one.")
    passed = all(c.passed for c in checks.values() if c.required)
    return AssumptionReport(spec, samples, seed, checks, notes, passed)
