"""Biased homogeneous slices, disguise weights, and mixture moment checks.

A *slice* is the set of +-1 vectors of arity ``k`` with exactly ``m``
coordinates equal to +1; the uniform distribution on a slice is the
``m/k``-biased homogeneous distribution.  Three slices with biases

    gamma_1 = 1/2 + rho_1/sqrt(k)
    gamma_2 = 1/2 - rho_2/sqrt(k)
    gamma_3 = 1/2 + rho_3/sqrt(k)

can be mixed with positive weights ``psi`` so that the mixture is balanced
pairwise independent: every coordinate marginal is exactly 1/2 and every
pair joint is exactly 1/4.  The weights solve the 3x3 system

    psi_1 + psi_2 + psi_3                         = 1
    rho_1 psi_1 - rho_2 psi_2 + rho_3 psi_3       = 0
    rho_1^2 psi_1 + rho_2^2 psi_2 + rho_3^2 psi_3 = 1/4

and are strictly positive exactly when rho_1 rho_2 < 1/4 < rho_2 rho_3
(within the regime 0 < rho_1 < rho_3, rho_2 > 0).

Everything here is exact rational arithmetic; nothing rounds.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .errors import (
    DegenerateProfileError,
    DisjointnessError,
    InfeasibleBiasError,
    IntegralityError,
    InvalidDistributionError,
    InvalidRequestError,
    PreconditionError,
)
from .rational import SingularSystemError, format_fraction, parse_fraction, solve_linear_system

HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SignVector:
    """A point of {+1,-1}^k; bit-packed encoding uses bit 0 for +1."""

    bits: tuple

    def __post_init__(self):
        if not self.bits or any(b not in (1, -1) for b in self.bits):
            raise InvalidRequestError("sign vector entries must be +1 or -1")
        object.__setattr__(self, "bits", tuple(self.bits))

    @property
    def k(self):
        return len(self.bits)

    @property
    def plus_count(self):
        return sum(1 for b in self.bits if b == 1)

    def encode(self):
        """Integer code with bit i set iff coordinate i equals -1."""
        code = 0
        for i, b in enumerate(self.bits):
            if b == -1:
                code |= 1 << i
        return code

    @classmethod
    def decode(cls, code, k):
        if code < 0 or code >= (1 << k):
            raise InvalidRequestError("code %d out of range for arity %d" % (code, k))
        return cls(tuple(-1 if (code >> i) & 1 else 1 for i in range(k)))


@dataclass(frozen=True)
class HomogeneousSlice:
    """All arity-k sign vectors with exactly m coordinates equal to +1."""

    k: int
    m: int

    def __post_init__(self):
        if self.k < 1:
            raise InvalidRequestError("arity must be positive")
        if not 0 <= self.m <= self.k:
            raise InvalidRequestError("slice weight m=%d outside [0, %d]" % (self.m, self.k))

    @property
    def cardinality(self):
        return math.comb(self.k, self.m)

    @property
    def bias(self):
        return Fraction(self.m, self.k)

    def contains(self, vector):
        return vector.k == self.k and vector.plus_count == self.m

    def members(self):
        """Iterate members as SignVectors (small k only)."""
        for plus_positions in combinations(range(self.k), self.m):
            bits = [-1] * self.k
            for i in plus_positions:
                bits[i] = 1
            yield SignVector(tuple(bits))


@dataclass(frozen=True)
class BiasProfile:
    """Arity plus the rational bias triple (rho1, rho2, rho3).

    Requires a perfect-square arity so the slice sizes gamma_l * k are
    rational, and checks they are integers in [0, k].
    """

    k: int
    rho: tuple

    def __post_init__(self):
        object.__setattr__(self, "rho", tuple(Fraction(r) for r in self.rho))
        if len(self.rho) != 3:
            raise InvalidRequestError("expected a triple of biases")
        root = math.isqrt(self.k)
        if root * root != self.k:
            raise InvalidRequestError("arity %d is not a perfect square" % self.k)
        r1, r2, r3 = self.rho
        if not (0 < r1 < r3 and r2 > 0):
            raise InvalidRequestError("bias regime requires 0 < rho1 < rho3 and rho2 > 0")
        for gamma_k in self.slice_weights_exact():
            if gamma_k.denominator != 1:
                raise IntegralityError("slice weight %s is not an integer" % gamma_k)
            if not 0 <= gamma_k <= self.k:
                raise InvalidRequestError("slice weight %s outside [0, %d]" % (gamma_k, self.k))
        weights = self.slice_weights()
        if len(set(weights)) != 3:
            raise DisjointnessError("slice weights %s are not pairwise distinct" % (weights,))

    @property
    def sqrt_k(self):
        return math.isqrt(self.k)

    @property
    def gamma(self):
        r1, r2, r3 = self.rho
        s = self.sqrt_k
        return (HALF + r1 / s, HALF - r2 / s, HALF + r3 / s)

    def slice_weights_exact(self):
        return tuple(g * self.k for g in self.gamma)

    def slice_weights(self):
        return tuple(int(g * self.k) for g in self.gamma)


@dataclass(frozen=True)
class DisguiseWeights:
    """Strictly positive mixture weights summing to one exactly."""

    psi: tuple

    def __post_init__(self):
        object.__setattr__(self, "psi", tuple(Fraction(p) for p in self.psi))
        if any(p <= 0 for p in self.psi):
            raise InvalidRequestError("disguise weights must be strictly positive")
        if sum(self.psi) != 1:
            raise InvalidRequestError("disguise weights must sum to 1 exactly")

    def __iter__(self):
        return iter(self.psi)

    def __len__(self):
        return len(self.psi)


@dataclass(frozen=True)
class MixtureDistribution:
    """Convex combination of uniform slice distributions with disjoint grounds.

    The atom probability of z is psi_l / C(k, m_l) when z lies in slice l and
    zero otherwise.  ``profile`` is set when the mixture came from a
    BiasProfile via :func:`build_mixture`.
    """

    k: int
    slices: tuple
    weights: DisguiseWeights
    profile: BiasProfile = None

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(self.slices))
        if any(s.k != self.k for s in self.slices):
            raise InvalidRequestError("slice arity mismatch")
        if len(self.slices) != len(self.weights):
            raise InvalidRequestError("need one weight per slice")
        ms = [s.m for s in self.slices]
        if len(set(ms)) != len(ms):
            raise DisjointnessError("mixture slices must have disjoint grounds")

    @property
    def components(self):
        return tuple(zip(self.slices, self.weights))

    def atom_probability(self, vector):
        if vector.k != self.k:
            raise InvalidRequestError("arity mismatch")
        for sl, w in self.components:
            if sl.contains(vector):
                return w / sl.cardinality
        return Fraction(0)

    def moment(self, order):
        """P[order specified coordinates are all +1], by slice symmetry."""
        return sum(w * slice_moments(sl, order) for sl, w in self.components)

    def signed_third_moment(self):
        """E[z_i z_j z_l] for distinct coordinates, exact."""
        return sum(w * slice_signed_moment(sl, 3) for sl, w in self.components)

    def to_json_dict(self):
        doc = {
            "k": self.k,
            "slices": [s.m for s in self.slices],
            "psi": [format_fraction(w) for w in self.weights],
            "rho": None,
        }
        if self.profile is not None:
            doc["rho"] = [format_fraction(r) for r in self.profile.rho]
        return doc

    @classmethod
    def from_json_dict(cls, doc):
        k = int(doc["k"])
        if doc.get("rho"):
            profile = BiasProfile(k, tuple(parse_fraction(r) for r in doc["rho"]))
            mix = build_mixture(profile)
            if [s.m for s in mix.slices] != [int(m) for m in doc["slices"]]:
                raise InvalidRequestError("slice list inconsistent with rho")
            return mix
        slices = tuple(HomogeneousSlice(k, int(m)) for m in doc["slices"])
        weights = DisguiseWeights(tuple(parse_fraction(p) for p in doc["psi"]))
        return cls(k, slices, weights)


@dataclass(frozen=True)
class TestMoments:
    """Joint triple-coordinate probabilities of a balanced pairwise
    independent distribution, grouped by sign pattern.

    ``a`` = P[+,+,+], ``b`` = each "two +1" pattern, ``c`` = each
    "one +1" pattern, ``d`` = P[-,-,-]; ``alpha`` is the signed third
    moment E[z_i z_j z_l].
    """

    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction
    alpha: Fraction

    def __post_init__(self):
        a, b, c, d, alpha = self.a, self.b, self.c, self.d, self.alpha
        checks = (
            a + 3 * b + 3 * c + d == 1,
            a + b == QUARTER,
            c + d == QUARTER,
            a - 3 * b + 3 * c - d == alpha,
        )
        if not all(checks):
            raise InvalidRequestError("test moments violate their linear invariants")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def slice_moments(slc, order):
    """P[`order` distinct coordinates are all +1] under the uniform slice.

    Equals m(m-1)...(m-order+1) / (k(k-1)...(k-order+1)); the order-2 value
    can be rewritten as (k/(k-1)) gamma^2 - gamma/(k-1) with gamma = m/k.
    """
    if order not in (1, 2, 3):
        raise InvalidRequestError("moment order must be 1, 2 or 3")
    if slc.k < order:
        raise InvalidRequestError("arity %d below moment order %d" % (slc.k, order))
    num, den = 1, 1
    for t in range(order):
        num *= slc.m - t  # hits zero before any negative factor when m < order
        den *= slc.k - t
    return Fraction(num, den)


def slice_signed_moment(slc, order):
    """E[product of `order` distinct +-1 coordinates] under the uniform slice."""
    if order == 1:
        return 2 * slice_moments(slc, 1) - 1
    if order == 2:
        return 4 * slice_moments(slc, 2) - 4 * slice_moments(slc, 1) + 1
    if order == 3:
        return (
            8 * slice_moments(slc, 3)
            - 12 * slice_moments(slc, 2)
            + 6 * slice_moments(slc, 1)
            - 1
        )
    raise InvalidRequestError("signed moment order must be 1, 2 or 3")


def solve_disguise(rho):
    """Solve the three-weight disguise system exactly.

    Returns :class:`DisguiseWeights` for the system listed in the module
    docstring.  Raises :class:`DegenerateProfileError` when the system is
    singular (rho1 == rho3) and :class:`InfeasibleBiasError` when the unique
    solution has a non-positive weight, reporting which of
    ``rho1*rho2 < 1/4`` and ``rho2*rho3 > 1/4`` failed.
    """
    r1, r2, r3 = (Fraction(r) for r in rho)
    if r1 == r3:
        raise DegenerateProfileError("rho1 == rho3 makes the disguise system singular")
    if not (0 < r1 < r3 and r2 > 0):
        raise InvalidRequestError("bias regime requires 0 < rho1 < rho3 and rho2 > 0")
    matrix = [
        [Fraction(1), Fraction(1), Fraction(1)],
        [r1, -r2, r3],
        [r1 * r1, r2 * r2, r3 * r3],
    ]
    try:
        psi = solve_linear_system(matrix, [Fraction(1), Fraction(0), QUARTER])
    except SingularSystemError as exc:  # pragma: no cover - r1==r3 caught above
        raise DegenerateProfileError(str(exc)) from exc
    if any(p <= 0 for p in psi):
        failed = []
        if not r1 * r2 < QUARTER:
            failed.append("rho1*rho2 < 1/4")
        if not r2 * r3 > QUARTER:
            failed.append("rho2*rho3 > 1/4")
        raise InfeasibleBiasError(
            "disguise weights not strictly positive (psi=%s); violated: %s"
            % ([format_fraction(p) for p in psi], ", ".join(failed) or "none"),
            failed_conditions=failed,
        )
    return DisguiseWeights(tuple(psi))


def build_mixture(profile):
    """Mixture of the three profile slices under the solved disguise weights."""
    weights = solve_disguise(profile.rho)
    slices = tuple(HomogeneousSlice(profile.k, m) for m in profile.slice_weights())
    return MixtureDistribution(profile.k, slices, weights, profile=profile)


@dataclass(frozen=True)
class IndependenceReport:
    """Outcome of an exact pairwise-independence check."""

    pairwise_independent: bool
    balanced: bool
    bias: Fraction
    max_deviation: Fraction

    def __str__(self):
        if self.pairwise_independent:
            kind = "balanced" if self.balanced else "biased"
            return "pairwise independent (%s, bias %s)" % (kind, format_fraction(self.bias))
        return "not pairwise independent (max deviation %s)" % format_fraction(self.max_deviation)


def _normalize_atom_map(dist):
    """Return (k, {code: probability}) from a mapping keyed by SignVector,
    +-1 tuple, or integer code (integer keys require uniform arity hints from
    other keys, so pure-int maps are rejected)."""
    items = []
    k = None
    for key, prob in dist.items():
        if isinstance(key, SignVector):
            vec = key
        elif isinstance(key, tuple):
            vec = SignVector(key)
        else:
            raise InvalidDistributionError("atom keys must be SignVector or +-1 tuples")
        if k is None:
            k = vec.k
        elif vec.k != k:
            raise InvalidDistributionError("atoms have inconsistent arity")
        items.append((vec.encode(), Fraction(prob)))
    if not items:
        raise InvalidDistributionError("empty distribution")
    return k, dict(items)


def check_pairwise_independence(dist):
    """Exactly verify single and pair marginals of a distribution on {+-1}^k.

    ``dist`` is a MixtureDistribution (closed-form slice moments) or an
    explicit atom-probability mapping (enumeration).  The report carries the
    first-coordinate marginal as the candidate bias gamma and the largest
    absolute deviation of any marginal from gamma or pair joint from gamma^2.
    """
    if isinstance(dist, MixtureDistribution):
        total = sum(dist.weights)
        if total != 1:
            raise InvalidDistributionError("probabilities sum to %s, not 1" % total)
        gamma = dist.moment(1)
        pair = dist.moment(2) if dist.k >= 2 else gamma * gamma
        deviation = abs(pair - gamma * gamma)
        independent = deviation == 0
        return IndependenceReport(independent, independent and gamma == HALF, gamma, deviation)

    k, atoms = _normalize_atom_map(dist)
    if any(p < 0 for p in atoms.values()):
        raise InvalidDistributionError("negative atom probability")
    if sum(atoms.values()) != 1:
        raise InvalidDistributionError("probabilities sum to %s, not 1" % sum(atoms.values()))
    marginals = [Fraction(0)] * k
    pairs = {}
    for code, prob in atoms.items():
        plus = [i for i in range(k) if not (code >> i) & 1]
        for i in plus:
            marginals[i] += prob
        for i, j in combinations(plus, 2):
            pairs[(i, j)] = pairs.get((i, j), Fraction(0)) + prob
    gamma = marginals[0]
    deviation = max(abs(m - gamma) for m in marginals)
    target = gamma * gamma
    for i, j in combinations(range(k), 2):
        deviation = max(deviation, abs(pairs.get((i, j), Fraction(0)) - target))
    independent = deviation == 0
    return IndependenceReport(independent, independent and gamma == HALF, gamma, deviation)


def _abcd_from_alpha(alpha):
    """Solve the 4x4 pattern-probability system for a given signed third
    moment, assuming balanced pairwise independent marginals."""
    matrix = [
        [1, 3, 3, 1],
        [1, -3, 3, -1],
        [1, 1, 0, 0],
        [0, 0, 1, 1],
    ]
    rhs = [Fraction(1), Fraction(alpha), QUARTER, QUARTER]
    a, b, c, d = solve_linear_system(matrix, rhs)
    return a, b, c, d


def test_moments(dist):
    """Triple-coordinate pattern probabilities of a balanced pairwise
    independent distribution.

    Computes the signed third moment alpha exactly (closed-form slice
    moments for mixtures, enumeration for atom maps) and solves the 4x4
    pattern system; raises :class:`PreconditionError` when the input is not
    balanced pairwise independent.
    """
    report = check_pairwise_independence(dist)
    if not (report.pairwise_independent and report.balanced):
        raise PreconditionError("distribution is not balanced pairwise independent: %s" % report)
    if isinstance(dist, MixtureDistribution):
        if dist.k < 3:
            raise InvalidRequestError("third moments need arity >= 3")
        alpha = dist.signed_third_moment()
    else:
        k, atoms = _normalize_atom_map(dist)
        if k < 3:
            raise InvalidRequestError("third moments need arity >= 3")
        alpha = Fraction(0)
        for code, prob in atoms.items():
            z = [1 if not (code >> i) & 1 else -1 for i in range(3)]
            alpha += prob * z[0] * z[1] * z[2]
    a, b, c, d = _abcd_from_alpha(alpha)
    return TestMoments(a, b, c, d, alpha)


def paper_alpha_approximation(profile):
    """The first-order approximation 8 rho1 (1/4 - rho2^2) / (k sqrt(k)).

    Exact rational because k is a perfect square; used only for sanity bands
    around the exact third moment.
    """
    r1, r2, _ = profile.rho
    return 8 * r1 * (QUARTER - r2 * r2) / (profile.k * profile.sqrt_k)


def _signal_score(rho):
    """|prod_l rho_l (4/3 rho_l^2 - 1)|: the size of the degree-3 signal."""
    score = Fraction(1)
    for r in rho:
        score *= r * (Fraction(4, 3) * r * r - 1)
    return abs(score)


def search_bias_profiles(k, rho2_window=(HALF, Fraction(3, 4)), rho23_tolerance=Fraction(0)):
    """Enumerate admissible bias triples rho_l = t_l / sqrt(k), t_l integer.

    Filters: slice weights gamma_l * k integral, 0 < rho1 < rho3,
    rho1*rho2 < 1/4 < rho2*rho3, and rho2^2 inside ``rho2_window``
    (exact squares, so the irrational window endpoints sqrt(1/2) and
    sqrt(3)/2 compare exactly).  ``rho23_tolerance`` relaxes rho2 == rho3 to
    |rho2 - rho3| <= tolerance.  Profiles come back sorted by decreasing
    degree-3 signal score, ties broken by the bias triple.
    """
    root = math.isqrt(k)
    if root * root != k:
        raise InvalidRequestError("arity %d is not a perfect square" % k)
    lo, hi = Fraction(rho2_window[0]), Fraction(rho2_window[1])
    tol = Fraction(rho23_tolerance)
    found = []
    for t2 in range(1, k // 2 + 1):
        r2 = Fraction(t2, root)
        if not lo <= r2 * r2 <= hi:
            continue
        for t3 in range(1, k // 2 + 1):
            r3 = Fraction(t3, root)
            if abs(r3 - r2) > tol:
                continue
            if not lo <= r3 * r3 <= hi:
                continue
            if r2 * r3 <= QUARTER:
                continue
            for t1 in range(1, t3):
                r1 = Fraction(t1, root)
                if r1 * r2 >= QUARTER:
                    continue
                try:
                    profile = BiasProfile(k, (r1, r2, r3))
                    solve_disguise(profile.rho)
                except (IntegralityError, InvalidRequestError, DisjointnessError,
                        DegenerateProfileError, InfeasibleBiasError):
                    continue
                found.append(profile)
    found.sort(key=lambda p: (-_signal_score(p.rho), p.rho))
    return found
