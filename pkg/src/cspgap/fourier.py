"""Fourier spectra of slice-union predicate indicators.

Coefficients follow the 0/1-indicator convention

    coef(S) = 2^-k * sum_{y in C} prod_{i in S} y_i

so the empty-set coefficient is |C| / 2^k and Parseval reads
sum_S coef(S)^2 = |C| / 2^k.  Subsets are bitmasks; bit i of an atom code is
set when coordinate i equals -1, making the dense transform a plain
Walsh-Hadamard butterfly over the code order.

Slice unions are permutation symmetric, so every degree-d coefficient is a
single rational with a closed form in the slice moments; the dense transform
exists to cross-check those closed forms and to serve arbitrary dumps.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .errors import CapacityError, InvalidRequestError
from .predicates import HomogeneousSlice, MixtureDistribution, SignVector, slice_signed_moment

DENSE_LIMIT = 24

_TABLE16 = None


def _popcount_table():
    global _TABLE16
    if _TABLE16 is None:
        bits = np.unpackbits(np.arange(1 << 16, dtype=np.uint16).view(np.uint8).reshape(-1, 2), axis=1)
        _TABLE16 = bits.sum(axis=1).astype(np.int64)
    return _TABLE16


def popcount_array(codes):
    """Bit population count of a nonnegative int64 array (< 2^48)."""
    table = _popcount_table()
    a = np.asarray(codes, dtype=np.int64)
    return table[a & 0xFFFF] + table[(a >> 16) & 0xFFFF] + table[(a >> 32) & 0xFFFF]


def walsh_hadamard_transform(values):
    """Unnormalized Walsh-Hadamard transform of an int64 vector, in code order."""
    v = np.array(values, dtype=np.int64)
    n = v.size
    if n == 0 or n & (n - 1):
        raise InvalidRequestError("transform length must be a power of two")
    h = 1
    while h < n:
        v = v.reshape(-1, 2 * h)
        left = v[:, :h].copy()
        v[:, :h] = left + v[:, h:]
        v[:, h:] = left - v[:, h:]
        v = v.reshape(-1)
        h *= 2
    return v


@dataclass(frozen=True)
class PredicateSet:
    """Union of Hamming-weight slices of {+1,-1}^k.

    ``slices`` lists the +1-counts m; membership of y is simply
    "number of +1 coordinates of y is one of the slices".
    """

    k: int
    slices: tuple

    def __post_init__(self):
        slices = tuple(sorted(int(m) for m in self.slices))
        object.__setattr__(self, "slices", slices)
        if self.k < 1:
            raise InvalidRequestError("arity must be positive")
        if not slices:
            raise InvalidRequestError("predicate needs at least one slice")
        if len(set(slices)) != len(slices):
            raise InvalidRequestError("slice weights must be distinct")
        if any(not 0 <= m <= self.k for m in slices):
            raise InvalidRequestError("slice weights must lie in [0, k]")

    @classmethod
    def from_mixture(cls, mixture: MixtureDistribution):
        return cls(mixture.k, tuple(s.m for s in mixture.slices))

    @property
    def cardinality(self):
        return sum(math.comb(self.k, m) for m in self.slices)

    @property
    def baseline(self):
        """|C| / 2^k, the expected value of a uniformly random assignment."""
        return Fraction(self.cardinality, 1 << self.k)

    @property
    def is_negation_closed(self):
        return all(self.k - m in self.slices for m in self.slices)

    def contains_code(self, code):
        return (self.k - int(code).bit_count()) in self.slices

    def contains(self, vector: SignVector):
        if vector.k != self.k:
            raise InvalidRequestError("arity mismatch")
        return vector.plus_count in self.slices

    def member_codes(self):
        """All member codes as an int64 array (dense enumeration, k <= 24)."""
        if self.k > DENSE_LIMIT:
            raise CapacityError("member enumeration capped at k=%d" % DENSE_LIMIT)
        codes = np.arange(1 << self.k, dtype=np.int64)
        plus = self.k - popcount_array(codes)
        mask = np.isin(plus, np.array(self.slices, dtype=np.int64))
        return codes[mask]

    def homogeneous_slices(self):
        return tuple(HomogeneousSlice(self.k, m) for m in self.slices)


@dataclass(frozen=True)
class FourierSpectrum:
    """Dense spectrum of a predicate indicator; exact scaled-integer storage.

    ``scaled[S] = 2^k * coef(S)`` is always an integer for 0/1 indicators.
    """

    k: int
    scaled: np.ndarray
    normalization: str = "indicator/2^k"

    def coefficient(self, mask):
        return Fraction(int(self.scaled[mask]), 1 << self.k)

    def degree(self, mask):
        return int(mask).bit_count()

    def parseval_defect(self):
        """sum_S coef(S)^2 - |C|/2^k, exactly (zero iff Parseval holds)."""
        total = int(np.dot(self.scaled, self.scaled))
        constant = int(self.scaled[0])  # equals |C| for the indicator
        return Fraction(total, 1 << (2 * self.k)) - Fraction(constant, 1 << self.k)

    def nonzero_items(self):
        """Yield (mask, degree, coefficient) for nonzero coefficients, by mask."""
        for mask in np.flatnonzero(self.scaled):
            mask = int(mask)
            yield mask, mask.bit_count(), Fraction(int(self.scaled[mask]), 1 << self.k)

    def max_abs_of_degree(self, degree):
        masks = np.flatnonzero(popcount_array(np.arange(1 << self.k, dtype=np.int64)) == degree)
        if masks.size == 0:
            return Fraction(0)
        return Fraction(int(np.max(np.abs(self.scaled[masks]))), 1 << self.k)


def wht_spectrum(predicate: PredicateSet, dense_limit=DENSE_LIMIT):
    """Dense spectrum of the 0/1 indicator via the Walsh-Hadamard transform."""
    if predicate.k > dense_limit:
        raise CapacityError(
            "dense transform capped at k=%d; use trilinear_coefficient / "
            "degree_coefficient for closed-form coefficients" % dense_limit
        )
    codes = np.arange(1 << predicate.k, dtype=np.int64)
    plus = predicate.k - popcount_array(codes)
    indicator = np.isin(plus, np.array(predicate.slices, dtype=np.int64)).astype(np.int64)
    return FourierSpectrum(predicate.k, walsh_hadamard_transform(indicator))


def degree_coefficient(predicate: PredicateSet, degree):
    """The common coefficient of every subset of the given size (0..3).

    Permutation symmetry makes the coefficient independent of which
    coordinates are chosen: coef = sum_slices C(k,m) 2^-k E_m[prod z_i].
    """
    if degree not in (0, 1, 2, 3):
        raise InvalidRequestError("closed forms cover degrees 0..3")
    if predicate.k < degree:
        raise InvalidRequestError("arity below requested degree")
    if degree == 0:
        return predicate.baseline
    total = Fraction(0)
    for slc in predicate.homogeneous_slices():
        total += Fraction(slc.cardinality, 1 << predicate.k) * slice_signed_moment(slc, degree)
    return total


def trilinear_coefficient(predicate: PredicateSet, i1, i2, i3):
    """coef({i1,i2,i3}) = 2^-k sum_{y in C} y_i1 y_i2 y_i3, in closed form."""
    coords = (i1, i2, i3)
    if len(set(coords)) != 3:
        raise InvalidRequestError("coordinates must be distinct")
    if any(not 0 <= c < predicate.k for c in coords):
        raise InvalidRequestError("coordinates must lie in [0, k)")
    return degree_coefficient(predicate, 3)


def elementary_symmetric_3(coordinate_sum, k):
    """e3 of a +-1 vector from its coordinate sum s: s(s^2 - 3k + 2)/6."""
    s = int(coordinate_sum)
    value = Fraction(s * (s * s - 3 * k + 2), 6)
    assert value.denominator == 1
    return value


def eval_degree3(predicate: PredicateSet, y: SignVector, method="symmetric"):
    """Degree-3 part of the indicator's expansion, evaluated at y.

    ``method="symmetric"`` uses the closed form coef * e3(y); ``"triples"``
    sums coefficient * y_i y_j y_l over all C(k,3) coordinate triples.  Both
    are exact and must agree.
    """
    if y.k != predicate.k:
        raise InvalidRequestError("arity mismatch")
    k = predicate.k
    if k < 3:
        return Fraction(0)
    if method == "symmetric":
        s = sum(y.bits)
        return degree_coefficient(predicate, 3) * elementary_symmetric_3(s, k)
    if method == "triples":
        total = Fraction(0)
        for i1, i2, i3 in combinations(range(k), 3):
            total += trilinear_coefficient(predicate, i1, i2, i3) * (
                y.bits[i1] * y.bits[i2] * y.bits[i3]
            )
        return total
    raise InvalidRequestError("unknown method %r" % method)


def scan_degree3_support(predicate: PredicateSet):
    """Exhaustively evaluate the degree-3 part on every member of C.

    Returns (min, max, per_slice) where per_slice maps slice weight m to the
    (constant) degree-3 value on that slice; the scan enumerates all members
    and reduces, so it is an independent check of the per-slice constants.
    """
    if predicate.k < 3:
        return Fraction(0), Fraction(0), {}
    coef = degree_coefficient(predicate, 3)
    codes = predicate.member_codes()
    sums = predicate.k - 2 * popcount_array(codes)  # coordinate sum per member
    e3_scaled = sums * (sums * sums - 3 * predicate.k + 2)  # 6*e3, int64
    per_slice = {
        m: coef * elementary_symmetric_3(2 * m - predicate.k, predicate.k)
        for m in predicate.slices
    }
    if coef == 0:
        return Fraction(0), Fraction(0), per_slice
    lo, hi = int(e3_scaled.min()), int(e3_scaled.max())
    values = (coef * Fraction(lo, 6), coef * Fraction(hi, 6))
    return min(values), max(values), per_slice


@dataclass(frozen=True)
class LowDegreeReport:
    """Extremes of the low-degree spectrum of a predicate indicator."""

    constant: Fraction
    deg1_max_abs: Fraction
    deg2_max_abs: Fraction
    deg3_min_on_support: Fraction
    deg3_max_on_support: Fraction


def low_degree_report(predicate: PredicateSet):
    """Closed-form low-degree extremes plus the degree-3 range over C."""
    deg1 = abs(degree_coefficient(predicate, 1)) if predicate.k >= 1 else Fraction(0)
    deg2 = abs(degree_coefficient(predicate, 2)) if predicate.k >= 2 else Fraction(0)
    lo, hi, _ = scan_degree3_support(predicate)
    return LowDegreeReport(predicate.baseline, deg1, deg2, lo, hi)
