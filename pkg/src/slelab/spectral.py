"""Eigenvalue algebra for the special Lagrangian verification suite.

Everything here works on plain descending-sorted eigenvalue lists: elementary
symmetric polynomials, the phase sum of arctangents, cone membership, and the
inequality checkers for the eigenvalue lemmas.  All inequality checks report a
signed margin (positive = satisfied with slack) against the shared tolerance
policy `inequality_tol`.

Scalar operations take `Spectrum` objects; the batched `*_margins` helpers and
the rejection samplers operate on (N, n) float arrays and back the fuzz
campaigns.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np


def inequality_tol(max_abs_eig):
    """Margin tolerance 1e-10 * (1 + max|lambda|)^2, elementwise on arrays.

    The quadratic scale factor covers rounding amplification in sigma_k at
    large eigenvalues.
    """
    out = 1e-10 * (1.0 + np.asarray(max_abs_eig, dtype=float)) ** 2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Spectrum:
    """Descending-sorted eigenvalues of a symmetric matrix."""

    values: tuple

    def __init__(self, values: Sequence[float]):
        vals = tuple(sorted((float(v) for v in values), reverse=True))
        if len(vals) < 1:
            raise ValueError("spectrum needs at least one eigenvalue")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("spectrum entries must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def max_abs(self) -> float:
        return max(abs(v) for v in self.values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]


@dataclass(frozen=True)
class ConeSpec:
    """The cone {sigma_{n-1} > c * lambda_2 ... lambda_n, lambda_{n-1} > 0}."""

    n: int
    c: float
    closed: bool = True

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("cone dimension must be >= 2")

    @classmethod
    def theorem_cone(cls, n: int, closed: bool = True) -> "ConeSpec":
        """The hypothesis cone with c = (n - 2) / 2."""
        return cls(n=n, c=0.5 * (n - 2), closed=closed)


@dataclass(frozen=True)
class GammaCone:
    """Constraint family: closure of the cone with c = (n - 2) / 2."""

    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("GammaCone constraint requires n >= 3")

    @property
    def cone(self) -> ConeSpec:
        return ConeSpec.theorem_cone(self.n, closed=True)


@dataclass(frozen=True)
class Sigma2Lower:
    """Constraint family: sigma_2 >= (3/5 - eps) * lambda_2 * lambda_3, n = 3."""

    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("Sigma2Lower requires eps > 0")

    @property
    def n(self) -> int:
        return 3


ConstraintSpec = Union[GammaCone, Sigma2Lower]


@dataclass(frozen=True)
class Clause:
    """Single inequality outcome inside a LemmaReport.

    recorded_only marks clauses evaluated verbatim from a source statement
    that does not hold as printed; their margins are reported but never gate.
    """

    id: str
    margin: float
    passed: bool
    skipped: bool = False
    recorded_only: bool = False


@dataclass
class LemmaReport:
    lemma: str
    clauses: list
    witness: tuple
    tol: float
    hypothesis_met: bool = True

    @property
    def all_pass(self) -> bool:
        return self.hypothesis_met and all(
            c.passed or c.skipped or c.recorded_only for c in self.clauses)

    @property
    def worst_margin(self) -> float:
        margins = [c.margin for c in self.clauses
                   if not (c.skipped or c.recorded_only)]
        return min(margins) if margins else math.inf

    def to_json_dict(self) -> dict:
        return {
            "lemma": self.lemma,
            "clauses": [
                {"id": c.id, "margin": c.margin, "pass": bool(c.passed),
                 "skipped": bool(c.skipped), "recorded_only": bool(c.recorded_only)}
                for c in self.clauses
            ],
            "witness": list(self.witness),
            "tol": self.tol,
            "hypothesis_met": bool(self.hypothesis_met),
        }


# ---------------------------------------------------------------------------
# core scalar operations
# ---------------------------------------------------------------------------

def eigen_desc(M: np.ndarray) -> Spectrum:
    """Descending eigenvalues of a symmetric matrix.

    Rejects non-finite entries and relative asymmetry above 1e-12.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise ValueError("matrix contains NaN or Inf entries")
    scale = 1.0 + np.abs(M).max()
    if np.abs(M - M.T).max() > 1e-12 * scale:
        raise ValueError("matrix is not symmetric within 1e-12 relative tolerance")
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    return Spectrum(w[::-1])


def sigma_k(s: Spectrum, k: int) -> float:
    """k-th elementary symmetric polynomial; sigma_0 == 1."""
    if not 0 <= k <= s.n:
        raise ValueError(f"k = {k} out of range [0, {s.n}]")
    return float(_sigma_all(s.as_array()[None, :])[0, k])


def sigma_k_partial(s: Spectrum, k: int, i: int) -> float:
    """d sigma_k / d lambda_i = sigma_{k-1} of the spectrum with entry i removed."""
    if not 1 <= k <= s.n:
        raise ValueError(f"k = {k} out of range [1, {s.n}]")
    if not 0 <= i < s.n:
        raise ValueError(f"index {i} out of range")
    rest = Spectrum([v for j, v in enumerate(s.values) if j != i])
    return sigma_k(rest, k - 1) if k > 1 else 1.0


def phase(s: Spectrum) -> float:
    """Sum of arctan(lambda_i); lies in (-n*pi/2, n*pi/2)."""
    return float(sum(math.atan(v) for v in s.values))


def in_gamma_cone(s: Spectrum, cone: ConeSpec) -> bool:
    """Membership in the cone (strict) or its closure (cone.closed)."""
    if cone.n != s.n:
        raise ValueError(f"cone dimension {cone.n} != spectrum length {s.n}")
    lam = s.values
    tail = math.prod(lam[1:])
    s_nm1 = sigma_k(s, s.n - 1)
    if cone.closed:
        return s_nm1 >= cone.c * tail and lam[-2] >= 0.0
    return s_nm1 > cone.c * tail and lam[-2] > 0.0


def satisfies_constraint(s: Spectrum, spec: ConstraintSpec) -> bool:
    if spec.n != s.n:
        raise ValueError(f"constraint dimension {spec.n} != spectrum length {s.n}")
    if isinstance(spec, GammaCone):
        return in_gamma_cone(s, spec.cone)
    lam = s.values
    slack = 1e-12 * (1.0 + s.max_abs) ** 2
    return sigma_k(s, 2) - (0.6 - spec.eps) * lam[1] * lam[2] >= -slack


def two_convexity(s: Spectrum) -> bool:
    """True iff sigma_1 >= 0 and sigma_2 >= 0."""
    return sigma_k(s, 1) >= 0.0 and sigma_k(s, 2) >= 0.0


def dual_pairing_min(a: Spectrum, m: Spectrum) -> float:
    """min over permutations pi of sum_i a[i] * m[pi(i)].

    For descending-sorted inputs this is the anti-sorted pairing by the
    rearrangement inequality; the all-permutation oracle lives in the tests.
    """
    if a.n != m.n:
        raise ValueError(f"length mismatch: {a.n} vs {m.n}")
    return float(sum(x * y for x, y in zip(a.values, reversed(m.values))))


def dual_test_matrix(t: float, i: int, j: int) -> np.ndarray:
    """I_3 + t * (e_i e_j^T + e_j e_i^T); spectrum {1 + t, 1, 1 - t}."""
    if not 0.0 < t <= 0.5:
        raise ValueError(f"t = {t} outside (0, 1/2]")
    if i == j or not (0 <= i < 3 and 0 <= j < 3):
        raise ValueError(f"need distinct indices in 0..2, got ({i}, {j})")
    A = np.eye(3)
    A[i, j] = A[j, i] = t
    return A


def dual_family(t: float = 0.5) -> list:
    """Named dual-cone test matrices: A_1, A_2, A_3, I_3 and the off-diagonal bumps."""
    fam = []
    for i in range(3):
        D = np.eye(3)
        D[i, i] = 0.0
        fam.append((f"A{i + 1}", D))
    fam.append(("I3", np.eye(3)))
    for i, j in ((0, 1), (0, 2), (1, 2)):
        fam.append((f"A{i + 1}{j + 1}(t={t})", dual_test_matrix(t, i, j)))
    return fam


# ---------------------------------------------------------------------------
# lemma checkers
# ---------------------------------------------------------------------------

LAMBDA2_GAP_TOL = 1e-8  # below this the lambda_1/lambda_2 ratio clause is skipped


def check_lemma_general(s: Spectrum, cone: Optional[ConeSpec] = None,
                        tol: Optional[float] = None) -> LemmaReport:
    """Eigenvalue inequalities for spectra in the closed hypothesis cone.

    Clauses: (a) lambda_1 + (c+1) lambda_n >= 0 and lambda_i + lambda_n >= 0
    for i <= n-1; (b) lambda_1 (lambda_i + lambda_j) >= 2 lambda_i lambda_j;
    (c) n(n-1) sigma_{k-1} >= |d sigma_k / d lambda_i| for k <= n-1.
    """
    n = s.n
    cone = cone or ConeSpec.theorem_cone(n)
    tol = inequality_tol(s.max_abs) if tol is None else tol
    if n < 3 or not in_gamma_cone(s, cone) or phase(s) < 0:
        return LemmaReport("general_eigenvalue", [], s.values, tol, hypothesis_met=False)
    lam = s.values
    clauses = []

    def add(cid, margin):
        clauses.append(Clause(cid, float(margin), margin >= -tol))

    add("a_top", lam[0] + (cone.c + 1.0) * lam[-1])
    for i in range(n - 1):
        add(f"a_pair_{i + 1}", lam[i] + lam[-1])
    for i, j in itertools.combinations(range(n), 2):
        add(f"b_{i + 1}{j + 1}", lam[0] * (lam[i] + lam[j]) - 2.0 * lam[i] * lam[j])
    for k in range(1, n):
        sk_prev = sigma_k(s, k - 1)
        for i in range(n):
            add(f"c_k{k}_i{i + 1}", n * (n - 1) * sk_prev - abs(sigma_k_partial(s, k, i)))
    return LemmaReport("general_eigenvalue", clauses, lam, tol)


def check_lemma_n3(s: Spectrum, eps: float, tol: Optional[float] = None) -> LemmaReport:
    """n = 3 eigenvalue inequalities under the sigma_2 lower bound.

    Branches on the sign of lambda_2.  The lambda_2 >= 0 ratio clause divides
    by lambda_2 and is skipped below LAMBDA2_GAP_TOL where the expression is
    undefined.  Its gated form uses the factor -(2/5 + eps), which is
    algebraically equivalent to the sigma_2 constraint itself; the printed
    -(7/5 + eps) variant fails on admissible triples (witness
    (1.575, 0.9, -0.5) at eps = 1, sigma_2 boundary) and is therefore
    evaluated as recorded-only.
    """
    if s.n != 3:
        raise ValueError("check_lemma_n3 requires n = 3")
    tol = inequality_tol(s.max_abs) if tol is None else tol
    if not satisfies_constraint(s, Sigma2Lower(eps)) or phase(s) < 0:
        return LemmaReport("n3_eigenvalue", [], s.values, tol, hypothesis_met=False)
    l1, l2, l3 = s.values
    clauses = []

    def add(cid, margin, skipped=False, recorded_only=False):
        clauses.append(Clause(cid, float(margin), margin >= -tol, skipped=skipped,
                              recorded_only=recorded_only))

    if l2 >= 0:
        if l2 > LAMBDA2_GAP_TOL:
            add("pos_a_ratio", l1 - (-0.4 - eps - l1 / l2) * l3)
            add("pos_a_ratio_printed", l1 - (-1.4 - eps - l1 / l2) * l3,
                recorded_only=True)
        else:
            add("pos_a_ratio", math.nan, skipped=True)
            add("pos_a_ratio_printed", math.nan, skipped=True, recorded_only=True)
        add("pos_a_sum23", l2 + l3)
        add("pos_b_product", l1 * (l2 + l3) - 2.0 * l2 * l3)
        add("pos_c_sigma1", sigma_k(s, 1) - l1)
    else:
        add("neg_a_lower", l1)
        add("neg_a_upper", max(1.0, eps) - l1)
        add("neg_b_sigma1", sigma_k(s, 1))
        add("neg_c_abs2", l1 - abs(l2))
        add("neg_c_abs3", l1 - abs(l3))
    return LemmaReport("n3_eigenvalue", clauses, s.values, tol)


def check_ratio_bound(s: Spectrum, eps: float, tol: Optional[float] = None) -> LemmaReport:
    """|lambda_2| >= |lambda_3| / (2/5 + eps) on the lambda_2 < 0 branch.

    The margin is evaluated even when the hypotheses fail (flagged, not
    asserted) so boundary witnesses can pin the threshold factor.
    """
    if s.n != 3:
        raise ValueError("check_ratio_bound requires n = 3")
    tol = inequality_tol(s.max_abs) if tol is None else tol
    l1, l2, l3 = s.values
    margin = abs(l2) - abs(l3) / (0.4 + eps)
    ok = satisfies_constraint(s, Sigma2Lower(eps)) and phase(s) >= 0 and l2 < 0
    clause = Clause("ratio", float(margin), margin >= -tol)
    return LemmaReport("n3_ratio", [clause], s.values, tol, hypothesis_met=ok)


# ---------------------------------------------------------------------------
# batched kernels (fuzz campaigns)
# ---------------------------------------------------------------------------

def _sigma_all(lams: np.ndarray) -> np.ndarray:
    """All elementary symmetric polynomials of each row; shape (N, n + 1).

    One-pass product recurrence e_k <- e_k + lambda * e_{k-1}.
    """
    N, n = lams.shape
    e = np.zeros((N, n + 1))
    e[:, 0] = 1.0
    for col in range(n):
        lam = lams[:, col]
        for k in range(min(col + 1, n), 0, -1):
            e[:, k] += lam * e[:, k - 1]
    return e


def phase_rows(lams: np.ndarray) -> np.ndarray:
    return np.arctan(lams).sum(axis=1)


def in_cone_rows(lams: np.ndarray, cone: ConeSpec) -> np.ndarray:
    """Vectorized closed/open cone membership for descending-sorted rows."""
    e = _sigma_all(lams)
    tail = np.prod(lams[:, 1:], axis=1)
    if cone.closed:
        return (e[:, cone.n - 1] >= cone.c * tail) & (lams[:, -2] >= 0.0)
    return (e[:, cone.n - 1] > cone.c * tail) & (lams[:, -2] > 0.0)


def satisfies_rows(lams: np.ndarray, spec: ConstraintSpec) -> np.ndarray:
    if isinstance(spec, GammaCone):
        return in_cone_rows(lams, spec.cone)
    e = _sigma_all(lams)
    slack = 1e-12 * (1.0 + np.abs(lams).max(axis=1)) ** 2
    return e[:, 2] - (0.6 - spec.eps) * lams[:, 1] * lams[:, 2] >= -slack


def lemma_general_margins(lams: np.ndarray, c: float) -> dict:
    """Clause margins of the general eigenvalue lemma for (N, n) sorted rows."""
    N, n = lams.shape
    e = _sigma_all(lams)
    out = {"a_top": lams[:, 0] + (c + 1.0) * lams[:, -1]}
    for i in range(n - 1):
        out[f"a_pair_{i + 1}"] = lams[:, i] + lams[:, -1]
    for i, j in itertools.combinations(range(n), 2):
        out[f"b_{i + 1}{j + 1}"] = lams[:, 0] * (lams[:, i] + lams[:, j]) - 2.0 * lams[:, i] * lams[:, j]
    # partial derivatives: sigma_{k-1} with entry i deleted, via per-i recurrences
    for i in range(n):
        rest = np.delete(lams, i, axis=1)
        e_rest = _sigma_all(rest)
        for k in range(1, n):
            key = f"c_k{k}_i{i + 1}"
            out[key] = n * (n - 1) * e[:, k - 1] - np.abs(e_rest[:, k - 1])
    return out


def lemma_n3_margins(lams: np.ndarray, eps: float) -> dict:
    """Branch masks and clause margins of the n = 3 lemma for (N, 3) rows."""
    l1, l2, l3 = lams[:, 0], lams[:, 1], lams[:, 2]
    e = _sigma_all(lams)
    pos = l2 >= 0.0
    ratio_ok = l2 > LAMBDA2_GAP_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = l1 - (-0.4 - eps - l1 / l2) * l3
        ratio_printed = l1 - (-1.4 - eps - l1 / l2) * l3
    return {
        "pos_mask": pos,
        "ratio_mask": pos & ratio_ok,
        "pos_a_ratio": ratio,
        "pos_a_ratio_printed": ratio_printed,  # recorded only, see check_lemma_n3
        "pos_a_sum23": l2 + l3,
        "pos_b_product": l1 * (l2 + l3) - 2.0 * l2 * l3,
        "pos_c_sigma1": e[:, 1] - l1,
        "neg_a_lower": l1,
        "neg_a_upper": max(1.0, eps) - l1,
        "neg_b_sigma1": e[:, 1],
        "neg_c_abs2": l1 - np.abs(l2),
        "neg_c_abs3": l1 - np.abs(l3),
        "ratio": np.abs(l2) - np.abs(l3) / (0.4 + eps),
    }


# ---------------------------------------------------------------------------
# rejection samplers
# ---------------------------------------------------------------------------

SAMPLING_BOUNDS = (1.0, 10.0, 100.0)


def sample_admissible(spec: ConstraintSpec, count: int, rng: np.random.Generator,
                      bounds: Sequence[float] = SAMPLING_BOUNDS,
                      max_batches: int = 4000) -> np.ndarray:
    """Rejection-sample descending spectra satisfying `spec` with phase >= 0.

    Draws are uniform in [-B, B]^n, stratified equally over the bound list so
    both small- and large-eigenvalue regimes are hit (arctan saturates).
    Returns an array of shape (count, n).
    """
    n = spec.n
    per = [count // len(bounds)] * len(bounds)
    per[0] += count - sum(per)
    chunks = []
    for B, want in zip(bounds, per):
        got = []
        have = 0
        for _ in range(max_batches):
            if have >= want:
                break
            draw = rng.uniform(-B, B, size=(max(2048, 4 * (want - have)), n))
            draw = -np.sort(-draw, axis=1)
            keep = satisfies_rows(draw, spec) & (phase_rows(draw) >= 0.0)
            acc = draw[keep]
            got.append(acc)
            have += len(acc)
        total = np.concatenate(got) if got else np.empty((0, n))
        if len(total) < want:
            raise RuntimeError(
                f"rejection sampling starved at B={B} for {spec}: "
                f"{len(total)}/{want} accepted")
        chunks.append(total[:want])
    return np.concatenate(chunks)


def sample_lambda2_negative(eps: float, count: int, rng: np.random.Generator,
                            max_batches: int = 4000) -> np.ndarray:
    """Targeted sampler for the admissible lambda_2 < 0 region (n = 3).

    The joint constraints force lambda_1 into the band
    [tan(atan a + atan b), (2/5 + eps) a b / (a + b)] with a = |lambda_2|,
    b = |lambda_3|; the band is nonempty only for eps > 18/5.  Returns fewer
    than `count` rows (possibly zero) if the region is empty or starved.
    """
    got = []
    have = 0
    for _ in range(max_batches):
        if have >= count:
            break
        a = rng.uniform(0.0, 1.0, size=8192)
        b = a + rng.uniform(0.0, 1.0, size=8192) * (1.0 - a)
        lo = np.tan(np.arctan(a) + np.arctan(b))
        hi = (0.4 + eps) * a * b / (a + b)
        feasible = (np.arctan(a) + np.arctan(b) < 0.5 * math.pi) & (hi > lo) & (a > 0) & (b > 0)
        if not feasible.any():
            continue
        a, b, lo, hi = a[feasible], b[feasible], lo[feasible], hi[feasible]
        l1 = lo + rng.uniform(0.0, 1.0, size=len(lo)) * (hi - lo)
        cand = np.stack([l1, -a, -b], axis=1)
        keep = (satisfies_rows(cand, Sigma2Lower(eps))
                & (phase_rows(cand) >= 0.0) & (cand[:, 1] < 0.0)
                & (cand[:, 0] >= cand[:, 1]) & (cand[:, 1] >= cand[:, 2]))
        acc = cand[keep]
        got.append(acc)
        have += len(acc)
    return np.concatenate(got)[:count] if got else np.empty((0, 3))
