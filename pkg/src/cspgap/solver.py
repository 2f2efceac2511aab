"""Semidefinite relaxation, truncated hyperplane rounding, and the modified
two-round bilinear driver.

The relaxation replaces +-1 variables by unit vectors and maximizes
``sum 2 a_ij <v_i, v_j>`` by block-coordinate ascent on a low-rank factor
(rank ~ sqrt(2n), where second-order critical points of generic instances
are global) with seeded random restarts.  The solver additionally rounds its
own vectors to +-1 candidates and never reports a relaxation value below the
best integral point it found: any +-1 point is a feasible rank-one Gram
configuration, so returning it is always legitimate.

Rounding follows the truncated-projection scheme: project each vector on a
Gaussian direction, scale by 1/T, clamp to [-1, 1], and round independently
to +-1 with matching expectation; best of R repetitions, repetitions seeded
independently so best-of-R is monotone in R.

The two-round driver:
  1. rounds the merged pair relaxation to fix copy-1 variables,
  2. substitutes them into the tri-linear form and rounds the remaining
     bipartite relaxation to fix copies 2 and 3,
  3. collapses the copies onto the original variables,
  4. forms a candidate pool (collapsed assignment, its negation, a fresh
     random assignment, greedy single-flip improvement of the collapsed
     assignment), and
  5. returns the pool member with the highest exact instance value.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .csp import (
    Assignment,
    BilinearForm,
    CspInstance,
    TrilinearForm,
    extract_trilinear,
    greedy_improve,
    merge_to_bilinear,
    substitute_group,
    value,
)
from .errors import InvalidRequestError

__all__ = [
    "QuadraticForm",
    "GramVectors",
    "RoundingConfig",
    "RoundingResult",
    "BiLinResult",
    "quadratic_from_bilinear",
    "canonical_objective",
    "exact_form_value",
    "gram_objective",
    "solve_relaxation",
    "greedy_quadratic",
    "cw_round",
    "bernoulli_round",
    "bilin_two_round",
    "substitute_group",
]


def _as_seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


@dataclass(frozen=True)
class QuadraticForm:
    """Sparse symmetric +-1 quadratic objective sum_{i<j} 2 a_ij x_i x_j."""

    n: int
    terms: tuple  # ((i, j, coefficient), ...) with i < j

    def __post_init__(self):
        if self.n < 1:
            raise InvalidRequestError("form needs at least one variable")
        seen = set()
        cleaned = []
        for i, j, c in self.terms:
            i, j, c = int(i), int(j), float(c)
            if i == j:
                raise InvalidRequestError("diagonal entries are not allowed")
            if not 0 <= i < j < self.n:
                raise InvalidRequestError("term indices must satisfy 0 <= i < j < n")
            if (i, j) in seen:
                raise InvalidRequestError("duplicate term (%d, %d)" % (i, j))
            seen.add((i, j))
            if c != 0.0:
                cleaned.append((i, j, c))
        object.__setattr__(self, "terms", tuple(sorted(cleaned)))

    def as_matrix(self):
        a = np.zeros((self.n, self.n))
        for i, j, c in self.terms:
            a[i, j] = c
            a[j, i] = c
        return a

    def term_arrays(self):
        if not self.terms:
            return (np.zeros(0, dtype=np.int64),) * 2 + (np.zeros(0),)
        ii, jj, cc = zip(*self.terms)
        return np.array(ii, dtype=np.int64), np.array(jj, dtype=np.int64), np.array(cc)


def canonical_objective(form: QuadraticForm, x):
    """The one float evaluation path shared by rounding and search."""
    ii, jj, cc = form.term_arrays()
    x = np.asarray(x)
    return float(2.0 * np.dot(cc, x[ii].astype(np.float64) * x[jj]))


def exact_form_value(form: QuadraticForm, x):
    """Exact rational objective (floats are dyadic rationals)."""
    total = Fraction(0)
    for i, j, c in form.terms:
        total += 2 * Fraction(c) * int(x[i]) * int(x[j])
    return total


def gram_objective(form: QuadraticForm, vectors):
    """Objective on pairwise inner products: tr(A V V^T)."""
    a = form.as_matrix()
    return float(np.sum((a @ vectors) * vectors))


@dataclass(frozen=True)
class GramVectors:
    """Unit-vector solution of the relaxation plus its objective value."""

    vectors: np.ndarray
    relaxation_value: float
    converged: bool = True

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def rank(self):
        return self.vectors.shape[1]


def greedy_quadratic(form: QuadraticForm, x0, max_passes=None):
    """First-improvement +-1 local search; returns the improved assignment."""
    a = form.as_matrix()
    x = np.asarray(x0, dtype=np.float64).copy()
    s = a @ x
    passes = max_passes if max_passes is not None else 4 * form.n
    for _ in range(passes):
        improved = False
        for i in range(form.n):
            if -4.0 * x[i] * s[i] > 0.0:
                s -= 2.0 * x[i] * a[:, i]
                x[i] = -x[i]
                improved = True
        if not improved:
            break
    return x.astype(np.int8)


def _dominant_direction(vectors):
    """Deterministic power iteration for the top right-singular direction."""
    r = vectors.shape[1]
    w = np.full(r, 1.0 / math.sqrt(r))
    for _ in range(60):
        w2 = vectors.T @ (vectors @ w)
        norm = np.linalg.norm(w2)
        if norm < 1e-14:
            break
        w = w2 / norm
    return w


def _sign_candidates(vectors):
    """Deterministic +-1 candidates read off the relaxation vectors."""
    out = []
    w = _dominant_direction(vectors)
    proj = vectors @ w
    out.append(np.where(proj >= 0, 1, -1).astype(np.int8))
    out.append(-out[0])
    first = vectors[:, 0]
    out.append(np.where(first >= 0, 1, -1).astype(np.int8))
    return out


def solve_relaxation(form: QuadraticForm, tol=1e-10, budget=400, seed=0, rank=None, restarts=8):
    """Block-coordinate ascent on row-normalized factors, with restarts.

    Never raises on exhausted budget: returns the best configuration found
    with ``converged=False``.  The reported relaxation value always
    dominates every +-1 point the solver encountered (integral points embed
    as feasible rank-one configurations).
    """
    n = form.n
    r = rank if rank is not None else max(2, math.ceil(math.sqrt(2 * n)))
    r = max(1, min(n, r))
    a = form.as_matrix()
    children = _as_seed_sequence(seed).spawn(restarts + 1)

    best_v, best_f, best_converged = None, -math.inf, False
    for t in range(restarts):
        rng = np.random.default_rng(children[t])
        v = rng.standard_normal((n, r))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        f = float(np.sum((a @ v) * v))
        converged = False
        for _ in range(budget):
            for i in range(n):
                g = a[i] @ v
                norm = np.linalg.norm(g)
                if norm > 1e-15:
                    v[i] = g / norm
            new_f = float(np.sum((a @ v) * v))
            if new_f - f <= tol * max(1.0, abs(new_f)):
                f = new_f
                converged = True
                break
            f = new_f
        if f > best_f:
            best_v, best_f, best_converged = v, f, converged

    # integral safety net: greedy warm start plus roundings of the vectors
    rng = np.random.default_rng(children[restarts])
    starts = [np.where(rng.integers(0, 2, size=n) == 1, 1, -1).astype(np.int8)]
    starts.extend(_sign_candidates(best_v))
    best_x, best_int = None, -math.inf
    for x0 in starts:
        x = greedy_quadratic(form, x0)
        val = canonical_objective(form, x)
        if val > best_int:
            best_x, best_int = x, val
    if best_int >= best_f:
        v = np.zeros((n, r))
        v[:, 0] = best_x.astype(np.float64)
        return GramVectors(v, float(exact_form_value(form, best_x)), True)
    return GramVectors(best_v, best_f, best_converged)


@dataclass(frozen=True)
class RoundingConfig:
    """Truncation scale T (None = sqrt(2 ln max(n,2))), repetitions, seed."""

    truncation: float = None
    repetitions: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.truncation is not None and not self.truncation > 0:
            raise InvalidRequestError("truncation must be positive")
        if self.repetitions < 1:
            raise InvalidRequestError("need at least one repetition")

    def truncation_for(self, n):
        if self.truncation is not None:
            return float(self.truncation)
        return math.sqrt(2.0 * math.log(max(n, 2)))


@dataclass(frozen=True)
class RoundingResult:
    assignment: np.ndarray
    objective: float
    repetitions: int


def bernoulli_round(y, rng):
    """Independent +-1 rounding with E[x_i] = y_i (y already in [-1, 1])."""
    u = rng.random(len(y))
    return np.where(u < (1.0 + y) / 2.0, 1, -1).astype(np.int8)


def cw_round(vectors: GramVectors, form: QuadraticForm, config: RoundingConfig, seed=None):
    """Truncated-projection rounding, best of ``config.repetitions``.

    Ties in the objective resolve toward the lexicographically smallest
    assignment (+1 before -1), making the result deterministic in the seed.
    """
    if vectors.n != form.n:
        raise InvalidRequestError("vectors and form dimensions disagree")
    t_scale = config.truncation_for(form.n)
    children = _as_seed_sequence(config.seed if seed is None else seed).spawn(config.repetitions)
    best = None
    for rep in range(config.repetitions):
        rng = np.random.default_rng(children[rep])
        g = rng.standard_normal(vectors.rank)
        y = np.clip((vectors.vectors @ g) / t_scale, -1.0, 1.0)
        x = bernoulli_round(y, rng)
        obj = canonical_objective(form, x)
        key = (x < 0).tobytes()
        if best is None or obj > best[0] or (obj == best[0] and key < best[1]):
            best = (obj, key, x)
    return RoundingResult(best[2], best[0], config.repetitions)


def quadratic_from_bilinear(bform: BilinearForm):
    """Embed a bipartite form as a QuadraticForm over left + right indices.

    A bilinear term c * xl xr becomes an off-diagonal entry c/2 so the
    quadratic convention sum 2 a_ij x_i x_j reproduces c * xl xr.
    """
    left_index = {lab: i for i, lab in enumerate(bform.left_labels)}
    right_index = {lab: i for i, lab in enumerate(bform.right_labels)}
    offset = len(bform.left_labels)
    acc = {}
    for a, b, coef in bform.terms:
        key = (left_index[a], offset + right_index[b])
        acc[key] = acc.get(key, 0.0) + float(coef) / 2.0
    n = offset + len(bform.right_labels)
    terms = tuple((i, j, c) for (i, j), c in sorted(acc.items()))
    return QuadraticForm(n, terms)


@dataclass(frozen=True)
class BiLinResult:
    """Everything the two-round driver produced, stages included."""

    assignment: Assignment
    final_value: Fraction
    baseline: Fraction
    advantage: Fraction
    degenerate: bool
    relaxation_round1: float = None
    rounded_bilinear: Fraction = None
    relaxation_round2: float = None
    rounded_trilinear: Fraction = None
    copy_assignments: dict = field(default_factory=dict)
    candidates: dict = field(default_factory=dict)
    selected: str = ""
    positions: tuple = (0, 1, 2)


def _random_assignment(n, rng):
    return Assignment.from_array(np.where(rng.integers(0, 2, size=n) == 1, 1, -1))


def _select_best(inst, pool):
    """Highest exact value; ties toward the lexicographically smallest."""
    scored = [(value(inst, cand), cand, name) for name, cand in pool]
    best = min(scored, key=lambda t: (-t[0], t[1].lex_key()))
    return best[2], best[1], best[0]


def bilin_two_round(inst: CspInstance, positions=(0, 1, 2), config: RoundingConfig = None,
                    collapse_rule="first_copy", sdp_budget=400, sdp_restarts=8):
    """Two SDP-rounding rounds on the position-triple objective slice.

    Returns a :class:`BiLinResult`; when the extracted tri-linear form is
    empty the result is flagged degenerate and falls back to the best of two
    random baseline assignments.
    """
    config = config or RoundingConfig()
    baseline = inst.predicate.baseline
    children = _as_seed_sequence(config.seed).spawn(5)
    tri = extract_trilinear(inst, positions)

    if not tri.terms:
        rng = np.random.default_rng(children[4])
        cand = _random_assignment(inst.n, rng)
        name, best, best_value = _select_best(
            inst, [("random", cand), ("random_negated", cand.negated())]
        )
        return BiLinResult(
            assignment=best,
            final_value=best_value,
            baseline=baseline,
            advantage=best_value - baseline,
            degenerate=True,
            candidates={"random": value(inst, cand), "random_negated": value(inst, cand.negated())},
            selected=name,
            positions=tuple(positions),
        )

    # round 1: pairs as free variables
    merged = merge_to_bilinear(tri)
    qf1 = quadratic_from_bilinear(merged)
    gram1 = solve_relaxation(qf1, seed=children[0], budget=sdp_budget, restarts=sdp_restarts)
    round1 = cw_round(gram1, qf1, config, seed=children[1])
    n_left = len(merged.left_labels)
    f1 = {lab: int(round1.assignment[i]) for i, lab in enumerate(merged.left_labels)}
    f1_pairs = {
        lab: int(round1.assignment[n_left + i]) for i, lab in enumerate(merged.right_labels)
    }
    rounded_bilinear = merged.evaluate(f1, f1_pairs)

    # round 2: substitute copy-1, solve the bipartite remainder
    sub = substitute_group(tri, 1, f1)
    f2_left = {lab: 1 for lab in sub.left_labels}
    f2_right = {lab: 1 for lab in sub.right_labels}
    relax2 = None
    if sub.terms:
        qf2 = quadratic_from_bilinear(sub)
        gram2 = solve_relaxation(qf2, seed=children[2], budget=sdp_budget, restarts=sdp_restarts)
        round2 = cw_round(gram2, qf2, config, seed=children[3])
        n2 = len(sub.left_labels)
        f2_left = {lab: int(round2.assignment[i]) for i, lab in enumerate(sub.left_labels)}
        f2_right = {lab: int(round2.assignment[n2 + i]) for i, lab in enumerate(sub.right_labels)}
        relax2 = gram2.relaxation_value
    rounded_trilinear = tri.evaluate(f1, f2_left, f2_right)

    collapsed = _collapse_copies(inst.n, tri, f1, f2_left, f2_right, collapse_rule)

    rng = np.random.default_rng(children[4])
    pool = [
        ("bilin", collapsed),
        ("bilin_negated", collapsed.negated()),
        ("random", _random_assignment(inst.n, rng)),
        ("greedy", greedy_improve(inst, collapsed)),
    ]
    selected, best, best_value = _select_best(inst, pool)
    return BiLinResult(
        assignment=best,
        final_value=best_value,
        baseline=baseline,
        advantage=best_value - baseline,
        degenerate=False,
        relaxation_round1=gram1.relaxation_value,
        rounded_bilinear=rounded_bilinear,
        relaxation_round2=relax2,
        rounded_trilinear=rounded_trilinear,
        copy_assignments={"copy1": f1, "copy2": f2_left, "copy3": f2_right},
        candidates={name: value(inst, cand) for name, cand in pool},
        selected=selected,
        positions=tuple(positions),
    )


def _collapse_copies(n, tri: TrilinearForm, f1, f2, f3, rule):
    """One assignment over the original variables from the three copy maps."""
    if rule not in ("first_copy", "majority"):
        raise InvalidRequestError("unknown collapse rule %r" % rule)
    values = []
    for v in range(n):
        votes = []
        for copy_map in (f1, f2, f3):
            if v in copy_map:
                votes.append(copy_map[v])
        if not votes:
            values.append(1)
        elif rule == "first_copy":
            values.append(votes[0])
        else:
            s = sum(votes)
            values.append(votes[0] if s == 0 else (1 if s > 0 else -1))
    return Assignment(tuple(values))
