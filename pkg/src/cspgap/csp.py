"""Folded Max-C instances over slice-union predicates.

A constraint applies the predicate to the literal tuple
``(sign_j * x_{var_j})_j``; negations live entirely in the per-constraint
sign pattern.  Instance values are exact rationals (satisfied weight).

Generators:

* ``gen_planted`` plants an assignment and draws each constraint's target
  tuple from a mixture distribution (noise rate ``eps`` switches single
  constraints to uniform tuples), so the planted value is >= 1 - eps in
  expectation and exactly 1 at eps = 0.
* ``gen_uniform`` draws variables and signs uniformly: no structure, value
  concentrates at the predicate baseline |C| / 2^k.

The degree-3 machinery extracts, per constraint position triple, the
tri-linear objective terms over three logical copies of the variables and
merges copy-2/copy-3 pairs into fresh variables for the first solver round.
"""

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations

import numpy as np

from .errors import (
    IncompleteSubstitutionError,
    InvalidRequestError,
    MalformedInstanceError,
)
from .fourier import PredicateSet, degree_coefficient, wht_spectrum
from .predicates import MixtureDistribution, SignVector
from .rational import format_fraction, parse_fraction


@dataclass(frozen=True)
class Assignment:
    """A +-1 value for each of the n variables."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if any(v not in (1, -1) for v in self.values):
            raise InvalidRequestError("assignment entries must be +1 or -1")

    @property
    def n(self):
        return len(self.values)

    def as_array(self):
        return np.array(self.values, dtype=np.int8)

    @classmethod
    def from_array(cls, arr):
        return cls(tuple(int(v) for v in arr))

    def negated(self):
        return Assignment(tuple(-v for v in self.values))

    def lex_key(self):
        """Bytes key ordering assignments lexicographically with +1 < -1."""
        return bytes(0 if v == 1 else 1 for v in self.values)


@dataclass(frozen=True)
class Constraint:
    """k distinct variable indices plus the literal sign pattern."""

    vars: tuple
    signs: tuple

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(int(v) for v in self.vars))
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        if len(self.vars) != len(self.signs):
            raise MalformedInstanceError("vars/signs length mismatch")
        if len(set(self.vars)) != len(self.vars):
            raise MalformedInstanceError("constraint variables must be distinct")
        if any(s not in (1, -1) for s in self.signs):
            raise MalformedInstanceError("signs must be +1 or -1")


@dataclass(frozen=True)
class CspInstance:
    """n variables, one predicate, and a list of sign-folded constraints."""

    n: int
    predicate: PredicateSet
    constraints: tuple
    weights: tuple = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.constraints:
            raise MalformedInstanceError("instance needs at least one constraint")
        k = self.predicate.k
        for c in self.constraints:
            if len(c.vars) != k:
                raise MalformedInstanceError("constraint arity != predicate arity")
            if any(not 0 <= v < self.n for v in c.vars):
                raise MalformedInstanceError("variable index out of range")
        if self.weights is not None:
            w = tuple(Fraction(x) for x in self.weights)
            object.__setattr__(self, "weights", w)
            if len(w) != len(self.constraints):
                raise MalformedInstanceError("need one weight per constraint")
            if any(x < 0 for x in w) or sum(w) != 1:
                raise MalformedInstanceError("weights must be nonnegative and sum to 1")

    @property
    def m(self):
        return len(self.constraints)

    @property
    def k(self):
        return self.predicate.k

    @cached_property
    def arrays(self):
        """(vars, signs, member_table) as numpy arrays for hot paths.

        ``member_table[p]`` flags whether a literal tuple with p coordinates
        equal to +1 satisfies the predicate.
        """
        vars_mat = np.array([c.vars for c in self.constraints], dtype=np.int32)
        signs_mat = np.array([c.signs for c in self.constraints], dtype=np.int8)
        table = np.zeros(self.k + 1, dtype=np.uint8)
        for m in self.predicate.slices:
            table[m] = 1
        return vars_mat, signs_mat, table

    def satisfied_mask(self, assignment: Assignment):
        """Boolean satisfaction flag per constraint."""
        if assignment.n != self.n:
            raise InvalidRequestError("assignment length mismatch")
        vars_mat, signs_mat, table = self.arrays
        lit = signs_mat * assignment.as_array()[vars_mat]
        plus = (self.k + lit.sum(axis=1, dtype=np.int64)) // 2
        return table[plus].astype(bool)

    def to_json_dict(self):
        doc = {
            "n": self.n,
            "k": self.k,
            "predicate": {"slices": list(self.predicate.slices)},
            "constraints": [
                {"vars": list(c.vars), "signs": list(c.signs)} for c in self.constraints
            ],
            "weights": None
            if self.weights is None
            else [format_fraction(w) for w in self.weights],
            "metadata": dict(self.metadata),
        }
        return doc

    @classmethod
    def from_json_dict(cls, doc):
        predicate = PredicateSet(int(doc["k"]), tuple(doc["predicate"]["slices"]))
        constraints = tuple(
            Constraint(tuple(c["vars"]), tuple(c["signs"])) for c in doc["constraints"]
        )
        weights = doc.get("weights")
        if weights is not None:
            weights = tuple(parse_fraction(w) for w in weights)
        return cls(int(doc["n"]), predicate, constraints, weights, dict(doc.get("metadata", {})))

    def dump_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load_json(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def value(inst: CspInstance, assignment: Assignment):
    """Weighted satisfied fraction, exact."""
    mask = inst.satisfied_mask(assignment)
    if inst.weights is None:
        return Fraction(int(mask.sum()), inst.m)
    return sum((w for w, ok in zip(inst.weights, mask) if ok), Fraction(0))


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _draw_slice_member(rng, k, m):
    bits = np.full(k, -1, dtype=np.int8)
    if m:
        bits[rng.choice(k, size=m, replace=False)] = 1
    return bits


def _draw_target_tuple(rng, source):
    """One tuple from the mixture (or uniformly from a bare predicate's support)."""
    if isinstance(source, MixtureDistribution):
        probs = np.array([float(w) for w in source.weights])
        idx = int(rng.choice(len(probs), p=probs / probs.sum()))
        return _draw_slice_member(rng, source.k, source.slices[idx].m)
    sizes = np.array([math.comb(source.k, m) for m in source.slices], dtype=np.float64)
    idx = int(rng.choice(len(sizes), p=sizes / sizes.sum()))
    return _draw_slice_member(rng, source.k, source.slices[idx])


def gen_planted(source, n, m_constraints, eps, seed):
    """Planted instance from a mixture (or predicate) plus its witness.

    Each constraint picks k distinct variables uniformly; its target tuple z
    comes from the mixture with probability 1-eps and uniformly from
    {+-1}^k otherwise; signs are then chosen so the planted literal tuple
    equals z.  Deterministic function of (parameters, seed).
    """
    k = source.k
    if n < k:
        raise InvalidRequestError("need n >= k distinct variables per constraint")
    if not 0 <= eps < 1:
        raise InvalidRequestError("noise rate must lie in [0, 1)")
    if m_constraints < 1:
        raise InvalidRequestError("need at least one constraint")
    predicate = (
        PredicateSet.from_mixture(source)
        if isinstance(source, MixtureDistribution)
        else source
    )
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    planted = np.where(rng.integers(0, 2, size=n) == 1, 1, -1).astype(np.int8)
    constraints = []
    for _ in range(m_constraints):
        vars_ = rng.choice(n, size=k, replace=False)
        if eps > 0 and rng.random() < eps:
            z = np.where(rng.integers(0, 2, size=k) == 1, 1, -1).astype(np.int8)
        else:
            z = _draw_target_tuple(rng, source)
        signs = z * planted[vars_]
        constraints.append(Constraint(tuple(int(v) for v in vars_), tuple(int(s) for s in signs)))
    inst = CspInstance(
        n,
        predicate,
        tuple(constraints),
        metadata={"generator": "planted", "seed": int(seed), "eps": float(eps)},
    )
    return inst, Assignment.from_array(planted)


def gen_uniform(predicate: PredicateSet, n, m_constraints, seed):
    """Structure-free instance: uniform variable tuples and signs."""
    k = predicate.k
    if n < k:
        raise InvalidRequestError("need n >= k distinct variables per constraint")
    if m_constraints < 1:
        raise InvalidRequestError("need at least one constraint")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    constraints = []
    for _ in range(m_constraints):
        vars_ = rng.choice(n, size=k, replace=False)
        signs = np.where(rng.integers(0, 2, size=k) == 1, 1, -1)
        constraints.append(Constraint(tuple(int(v) for v in vars_), tuple(int(s) for s in signs)))
    return CspInstance(
        n,
        predicate,
        tuple(constraints),
        metadata={"generator": "uniform", "seed": int(seed)},
    )


# ---------------------------------------------------------------------------
# objective expansion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectiveSpectrum:
    """Degree <= 3 multilinear parts of the instance objective."""

    n: int
    constant: Fraction
    linear: dict
    bilinear: dict
    trilinear: dict

    def evaluate(self, assignment: Assignment):
        x = assignment.values
        total = self.constant
        for i, c in self.linear.items():
            total += c * x[i]
        for (i, j), c in self.bilinear.items():
            total += c * x[i] * x[j]
        for (i, j, l), c in self.trilinear.items():
            total += c * x[i] * x[j] * x[l]
        return total


def _constraint_weight(inst, idx):
    return Fraction(1, inst.m) if inst.weights is None else inst.weights[idx]


def objective_spectrum(inst: CspInstance):
    """Degree <= 3 parts of E_constraints[predicate(literals)] over x_1..x_n.

    Uses the predicate's closed-form degree coefficients (valid at any k for
    slice unions) pushed through the literal signs; coinciding variable
    subsets accumulate.
    """
    coefs = {d: degree_coefficient(inst.predicate, d) for d in range(0, min(3, inst.k) + 1)}
    constant = coefs[0]
    linear, bilinear, trilinear = {}, {}, {}
    for idx, c in enumerate(inst.constraints):
        w = _constraint_weight(inst, idx)
        if inst.k >= 1 and coefs.get(1, 0) != 0:
            for p in range(inst.k):
                key = c.vars[p]
                linear[key] = linear.get(key, Fraction(0)) + w * coefs[1] * c.signs[p]
        if inst.k >= 2 and coefs.get(2, 0) != 0:
            for p, q in combinations(range(inst.k), 2):
                key = tuple(sorted((c.vars[p], c.vars[q])))
                bilinear[key] = bilinear.get(key, Fraction(0)) + w * coefs[2] * c.signs[p] * c.signs[q]
        if inst.k >= 3 and coefs.get(3, 0) != 0:
            for p, q, r in combinations(range(inst.k), 3):
                key = tuple(sorted((c.vars[p], c.vars[q], c.vars[r])))
                trilinear[key] = (
                    trilinear.get(key, Fraction(0)) + w * coefs[3] * c.signs[p] * c.signs[q] * c.signs[r]
                )
    linear = {k_: v for k_, v in linear.items() if v != 0}
    bilinear = {k_: v for k_, v in bilinear.items() if v != 0}
    trilinear = {k_: v for k_, v in trilinear.items() if v != 0}
    return ObjectiveSpectrum(inst.n, constant, linear, bilinear, trilinear)


def objective_polynomial(inst: CspInstance, dense_limit=16):
    """Full multilinear expansion of the objective: {variable bitmask: coef}.

    Exact identity: evaluating the polynomial at any assignment reproduces
    ``value``.  Dense in the predicate arity, so capped for test scale.
    """
    if inst.k > dense_limit:
        raise InvalidRequestError("full expansion capped at predicate arity %d" % dense_limit)
    spectrum = wht_spectrum(inst.predicate)
    scaled = spectrum.scaled
    poly = {}
    denom = 1 << inst.k
    for idx, c in enumerate(inst.constraints):
        w = _constraint_weight(inst, idx)
        for pos_mask in range(1 << inst.k):
            coef = int(scaled[pos_mask])
            if coef == 0:
                continue
            sign = 1
            var_mask = 0
            pm = pos_mask
            while pm:
                p = (pm & -pm).bit_length() - 1
                pm &= pm - 1
                sign *= c.signs[p]
                var_mask |= 1 << c.vars[p]
            poly[var_mask] = poly.get(var_mask, Fraction(0)) + w * Fraction(coef * sign, denom)
    return {mask: coef for mask, coef in poly.items() if coef != 0}


def evaluate_polynomial(poly, assignment: Assignment):
    x = assignment.values
    total = Fraction(0)
    for mask, coef in poly.items():
        prod = 1
        mm = mask
        while mm:
            i = (mm & -mm).bit_length() - 1
            mm &= mm - 1
            prod *= x[i]
        total += coef * prod
    return total


# ---------------------------------------------------------------------------
# tri-linear / bi-linear forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrilinearForm:
    """sum coef * x1_{i1} x2_{i2} x3_{i3} over three variable-copy groups.

    ``group_vars`` holds the original variable ids appearing in each copy
    group; term labels are original ids.
    """

    group_vars: tuple  # (tuple, tuple, tuple)
    terms: tuple  # ((i1, i2, i3, Fraction), ...)

    @property
    def group_sizes(self):
        return tuple(len(g) for g in self.group_vars)

    @property
    def total_variables(self):
        return sum(self.group_sizes)

    def evaluate(self, x1, x2, x3):
        total = Fraction(0)
        for i1, i2, i3, coef in self.terms:
            total += coef * x1[i1] * x2[i2] * x3[i3]
        return total


@dataclass(frozen=True)
class BilinearForm:
    """sum coef * xl_{i} xr_{p} over a left and a right label group.

    Merged forms label the right group with (i2, i3) pairs; the label tuple
    order is the recorded bijection for later unmerging.
    """

    left_group: str
    right_group: str
    left_labels: tuple
    right_labels: tuple
    terms: tuple  # ((left_label, right_label, Fraction), ...)

    @property
    def total_variables(self):
        return len(self.left_labels) + len(self.right_labels)

    def evaluate(self, xl, xr):
        total = Fraction(0)
        for a, b, coef in self.terms:
            total += coef * xl[a] * xr[b]
        return total


def extract_trilinear(inst: CspInstance, positions=(0, 1, 2)):
    """Collect the objective's tri-linear terms at one constraint-position triple.

    Position p_j of every constraint contributes its variable to copy group
    j; the term coefficient is weight * deg3-coefficient * sign product.
    Terms whose coefficients cancel exactly are dropped.
    """
    p1, p2, p3 = positions
    if len({p1, p2, p3}) != 3:
        raise InvalidRequestError("positions must be distinct")
    if any(not 0 <= p < inst.k for p in positions):
        raise InvalidRequestError("positions must lie in [0, k)")
    coef3 = degree_coefficient(inst.predicate, 3) if inst.k >= 3 else Fraction(0)
    acc = {}
    if coef3 != 0:
        for idx, c in enumerate(inst.constraints):
            w = _constraint_weight(inst, idx)
            key = (c.vars[p1], c.vars[p2], c.vars[p3])
            sgn = c.signs[p1] * c.signs[p2] * c.signs[p3]
            acc[key] = acc.get(key, Fraction(0)) + w * coef3 * sgn
    terms = tuple(
        (i1, i2, i3, coef) for (i1, i2, i3), coef in sorted(acc.items()) if coef != 0
    )
    groups = (
        tuple(sorted({t[0] for t in terms})),
        tuple(sorted({t[1] for t in terms})),
        tuple(sorted({t[2] for t in terms})),
    )
    return TrilinearForm(groups, terms)


def merge_to_bilinear(form: TrilinearForm):
    """Replace each (i2, i3) pair by a fresh right-group variable."""
    pairs = tuple(sorted({(t[1], t[2]) for t in form.terms}))
    terms = tuple((t[0], (t[1], t[2]), t[3]) for t in form.terms)
    return BilinearForm(
        left_group="copy1",
        right_group="pair23",
        left_labels=form.group_vars[0],
        right_labels=pairs,
        terms=terms,
    )


def substitute_group(form: TrilinearForm, group, values):
    """Fix one copy group to +-1 values, leaving a bilinear form.

    ``values`` must cover every variable of the chosen group; coefficients
    multiply by the substituted value and accumulate over coinciding pairs.
    """
    if group not in (1, 2, 3):
        raise InvalidRequestError("group must be 1, 2 or 3")
    gi = group - 1
    missing = [v for v in form.group_vars[gi] if v not in values]
    if missing:
        raise IncompleteSubstitutionError("missing values for group %d vars %s" % (group, missing))
    remaining = [0, 1, 2]
    remaining.remove(gi)
    li, ri = remaining
    acc = {}
    for term in form.terms:
        coef = term[3] * values[term[gi]]
        key = (term[li], term[ri])
        acc[key] = acc.get(key, Fraction(0)) + coef
    terms = tuple((a, b, coef) for (a, b), coef in sorted(acc.items()) if coef != 0)
    names = {0: "copy1", 1: "copy2", 2: "copy3"}
    return BilinearForm(
        left_group=names[li],
        right_group=names[ri],
        left_labels=form.group_vars[li],
        right_labels=form.group_vars[ri],
        terms=terms,
    )


# ---------------------------------------------------------------------------
# incremental satisfied-count machinery (shared by greedy search and oracle)
# ---------------------------------------------------------------------------


class SatisfactionState:
    """Mutable satisfied-count tracker under single-variable flips.

    Maintains, per constraint, the number of literals equal to +1; flipping
    variable v shifts that count by -+1 at each occurrence of v depending on
    the literal's current value.  Exact integer arithmetic throughout.
    """

    def __init__(self, inst: CspInstance, assignment: Assignment):
        vars_mat, signs_mat, table = inst.arrays
        self.inst = inst
        self.table = table
        self.x = assignment.as_array().astype(np.int8)
        lit = signs_mat * self.x[vars_mat]
        self.plus = ((inst.k + lit.sum(axis=1, dtype=np.int64)) // 2).astype(np.int16)
        self.occ_plus = []
        self.occ_minus = []
        for v in range(inst.n):
            rows, cols = np.nonzero(vars_mat == v)
            s = signs_mat[rows, cols]
            self.occ_plus.append(rows[s == 1].astype(np.int64))
            self.occ_minus.append(rows[s == -1].astype(np.int64))
        self._buf = np.empty(inst.m, dtype=np.uint8)

    def satisfied_count(self):
        np.take(self.table, self.plus, out=self._buf)
        return int(self._buf.sum())

    def flip(self, v):
        d = int(self.x[v])
        self.plus[self.occ_plus[v]] -= d
        self.plus[self.occ_minus[v]] += d
        self.x[v] = -d

    def flip_gain(self, v):
        """Change in satisfied count if v were flipped (no state change)."""
        d = int(self.x[v])
        rows_p, rows_m = self.occ_plus[v], self.occ_minus[v]
        before = int(self.table[self.plus[rows_p]].sum()) + int(self.table[self.plus[rows_m]].sum())
        after = int(self.table[self.plus[rows_p] - d].sum()) + int(
            self.table[self.plus[rows_m] + d].sum()
        )
        return after - before


def greedy_improve(inst: CspInstance, assignment: Assignment, max_passes=None):
    """First-improvement single-flip local search on the satisfied count.

    Deterministic: variables are scanned in index order until a full pass
    makes no strict improvement (or the pass cap is hit).  Weighted
    instances fall back to exact full re-evaluation per candidate flip.
    """
    if inst.weights is not None:
        return _greedy_improve_weighted(inst, assignment, max_passes)
    state = SatisfactionState(inst, assignment)
    passes = max_passes if max_passes is not None else 4 * inst.n
    for _ in range(passes):
        improved = False
        for v in range(inst.n):
            if state.flip_gain(v) > 0:
                state.flip(v)
                improved = True
        if not improved:
            break
    return Assignment.from_array(state.x)


def _greedy_improve_weighted(inst, assignment, max_passes):
    current = assignment
    best = value(inst, current)
    passes = max_passes if max_passes is not None else 4 * inst.n
    for _ in range(passes):
        improved = False
        for v in range(inst.n):
            flipped = list(current.values)
            flipped[v] = -flipped[v]
            cand = Assignment(tuple(flipped))
            cand_value = value(inst, cand)
            if cand_value > best:
                current, best = cand, cand_value
                improved = True
        if not improved:
            break
    return current
