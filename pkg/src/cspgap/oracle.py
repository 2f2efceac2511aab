"""Brute-force ground truth at desk scale.

Everything here enumerates: instances and forms by Gray-code single-flip
scans over all 2^n assignments (incremental updates keep n ~ 24 tractable),
distributions by explicit member enumeration.  Deliberately simple so the
rest of the package can be checked against it.

Tie-breaking: among equal-value optima the report carries the
lexicographically first assignment (+1 before -1, coordinate 0 most
significant).
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import lcm

import numpy as np

from .csp import Assignment, BilinearForm, CspInstance, SatisfactionState, TrilinearForm
from .errors import CapacityError, InvalidRequestError
from .fourier import popcount_array
from .predicates import MixtureDistribution, _normalize_atom_map
from .solver import QuadraticForm

BRUTE_CEILING = 26

_INT64_COEF_LIMIT = 1 << 30
_INT64_TOTAL_LIMIT = 1 << 55


@dataclass(frozen=True)
class OracleReport:
    """Exact optimum, the lexicographically first optimal assignment, and
    how many assignments were evaluated."""

    optimum: Fraction
    assignment: Assignment
    evaluations: int


def _assignment_from_rcode(rcode, n):
    # bit (n-1-v) of rcode set  <=>  x_v == -1
    return Assignment(tuple(-1 if (rcode >> (n - 1 - v)) & 1 else 1 for v in range(n)))


def brute_max_csp(inst: CspInstance, ceiling=BRUTE_CEILING):
    """Exact maximum of the instance value over all 2^n assignments."""
    n = inst.n
    if n > ceiling:
        raise CapacityError("brute force capped at n=%d (got n=%d)" % (ceiling, n))
    state = SatisfactionState(inst, Assignment((1,) * n))
    weights = None
    if inst.weights is not None:
        weights = np.array([float(w) for w in inst.weights])

    def score():
        if weights is None:
            return state.satisfied_count()
        np.take(state.table, state.plus, out=state._buf)
        return float(weights @ state._buf)

    best_score = score()
    best_rcode = 0
    rcode = 0
    for i in range(1, 1 << n):
        v = ((i & -i).bit_length()) - 1
        state.flip(v)
        rcode ^= 1 << (n - 1 - v)
        s = score()
        if s > best_score or (s == best_score and rcode < best_rcode):
            best_score = s
            best_rcode = rcode
    assignment = _assignment_from_rcode(best_rcode, n)
    from .csp import value as csp_value  # exact re-evaluation of the argmax

    return OracleReport(csp_value(inst, assignment), assignment, 1 << n)


def _flatten_form(form):
    """(n_total, [(index tuple, exact Fraction coefficient), ...])."""
    if isinstance(form, QuadraticForm):
        return form.n, [((i, j), 2 * Fraction(c)) for i, j, c in form.terms]
    if isinstance(form, BilinearForm):
        left = {lab: i for i, lab in enumerate(form.left_labels)}
        off = len(form.left_labels)
        right = {lab: off + i for i, lab in enumerate(form.right_labels)}
        n = off + len(form.right_labels)
        return n, [((left[a], right[b]), Fraction(c)) for a, b, c in form.terms]
    if isinstance(form, TrilinearForm):
        offsets = []
        total = 0
        index = []
        for g in form.group_vars:
            index.append({lab: total + i for i, lab in enumerate(g)})
            offsets.append(total)
            total += len(g)
        terms = [
            ((index[0][i1], index[1][i2], index[2][i3]), Fraction(c))
            for i1, i2, i3, c in form.terms
        ]
        return total, terms
    raise InvalidRequestError("unsupported form type %r" % type(form).__name__)


def exact_flat_value(form, x):
    """Exact objective of a +-1 vector in the flattened variable order."""
    _, terms = _flatten_form(form)
    total = Fraction(0)
    for idx, coef in terms:
        prod = 1
        for i in idx:
            prod *= int(x[i])
        total += coef * prod
    return total


def brute_max_form(form, ceiling=BRUTE_CEILING):
    """Exact +-1 maximum of a quadratic / bilinear / tri-linear form.

    Exact integer arithmetic whenever the (dyadic or rational) coefficients
    scale into int64 comfortably; otherwise a float scan picks the argmax and
    the reported optimum is that argmax's exact value.
    """
    n, terms = _flatten_form(form)
    if n > ceiling:
        raise CapacityError("brute force capped at %d variables (got %d)" % (ceiling, n))
    if n < 1:
        raise InvalidRequestError("form has no variables")
    if not terms:
        return OracleReport(Fraction(0), Assignment((1,) * n), 1 << n)

    denom = lcm(*(c.denominator for _, c in terms))
    scaled = [int(c * denom) for _, c in terms]
    use_int = (
        max(abs(s) for s in scaled) <= _INT64_COEF_LIMIT
        and sum(abs(s) for s in scaled) <= _INT64_TOTAL_LIMIT
    )
    coefs = np.array(scaled, dtype=np.int64) if use_int else np.array(
        [float(c) for _, c in terms]
    )
    var_terms = [[] for _ in range(n)]
    for t, (idx, _) in enumerate(terms):
        for i in idx:
            var_terms[i].append(t)
    var_terms = [np.array(lst, dtype=np.int64) for lst in var_terms]
    prod = np.ones(len(terms), dtype=coefs.dtype)

    obj = coefs.sum()
    best_obj = obj
    best_rcode = 0
    rcode = 0
    for i in range(1, 1 << n):
        v = ((i & -i).bit_length()) - 1
        idx = var_terms[v]
        if idx.size:
            obj -= 2 * (coefs[idx] @ prod[idx])
            prod[idx] = -prod[idx]
        rcode ^= 1 << (n - 1 - v)
        if obj > best_obj or (obj == best_obj and rcode < best_rcode):
            best_obj = obj
            best_rcode = rcode
    assignment = _assignment_from_rcode(best_rcode, n)
    optimum = exact_flat_value(form, assignment.values)
    return OracleReport(optimum, assignment, 1 << n)


@dataclass(frozen=True)
class MomentTables:
    """Exact P[all chosen coordinates equal +1] for orders 1..3."""

    first: dict
    second: dict
    third: dict

    def max_first_deviation(self, gamma):
        return max(abs(p - gamma) for p in self.first.values())

    def max_second_deviation(self, target):
        return max(abs(p - target) for p in self.second.values())


def enumerate_moments(dist, mixture_limit=20, map_limit=14):
    """Full joint +1-probability tables by explicit enumeration.

    Mixtures enumerate each slice's members (codes with the right popcount);
    explicit atom maps iterate atoms.  Independent of the closed-form slice
    moments, which is the point.
    """
    if isinstance(dist, MixtureDistribution):
        k = dist.k
        if k > mixture_limit:
            raise CapacityError("mixture enumeration capped at k=%d" % mixture_limit)
        codes = np.arange(1 << k, dtype=np.int64)
        plus_counts = k - popcount_array(codes)
        first = {i: Fraction(0) for i in range(k)}
        second = {p: Fraction(0) for p in combinations(range(k), 2)}
        third = {t: Fraction(0) for t in combinations(range(k), 3)}
        for slc, w in dist.components:
            members = codes[plus_counts == slc.m]
            per_atom = w / slc.cardinality
            for i in first:
                cnt = int((members & (1 << i) == 0).sum())
                first[i] += per_atom * cnt
            for (i, j) in second:
                mask = (1 << i) | (1 << j)
                second[(i, j)] += per_atom * int((members & mask == 0).sum())
            for (i, j, l) in third:
                mask = (1 << i) | (1 << j) | (1 << l)
                third[(i, j, l)] += per_atom * int((members & mask == 0).sum())
        return MomentTables(first, second, third)

    k, atoms = _normalize_atom_map(dist)
    if k > map_limit:
        raise CapacityError("atom-map enumeration capped at k=%d" % map_limit)
    first = {i: Fraction(0) for i in range(k)}
    second = {p: Fraction(0) for p in combinations(range(k), 2)}
    third = {t: Fraction(0) for t in combinations(range(k), 3)}
    for code, prob in atoms.items():
        plus = [i for i in range(k) if not (code >> i) & 1]
        for i in plus:
            first[i] += prob
        for p in combinations(plus, 2):
            second[p] += prob
        for t in combinations(plus, 3):
            third[t] += prob
    return MomentTables(first, second, third)
