"""Exact rational utilities: parsing/formatting and a small dense solver.

All probability arithmetic in this package runs on ``fractions.Fraction``;
floating point only appears in the numeric solver and in reports.
"""

from fractions import Fraction


class SingularSystemError(ValueError):
    """The linear system has no unique solution."""


def parse_fraction(text):
    """Parse ``"p/q"`` or ``"p"`` into an exact Fraction."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    s = str(text).strip()
    if "/" in s:
        num, den = s.split("/", 1)
        return Fraction(int(num), int(den))
    return Fraction(int(s))


def format_fraction(value):
    """Render a Fraction as ``"p/q"`` (``"p"`` when the denominator is 1)."""
    f = Fraction(value)
    if f.denominator == 1:
        return str(f.numerator)
    return "%d/%d" % (f.numerator, f.denominator)


def solve_linear_system(matrix, rhs):
    """Solve ``matrix @ x == rhs`` exactly by Gaussian elimination.

    ``matrix`` is a square list-of-lists of Fractions (or ints); raises
    :class:`SingularSystemError` when the matrix is not invertible.
    """
    n = len(matrix)
    a = [[Fraction(matrix[i][j]) for j in range(n)] + [Fraction(rhs[i])] for i in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            raise SingularSystemError("matrix is singular at column %d" % col)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
        inv = a[col][col]
        for r in range(col + 1, n):
            factor = a[r][col] / inv
            if factor == 0:
                continue
            for c in range(col, n + 1):
                a[r][c] -= factor * a[col][c]
    x = [Fraction(0)] * n
    for r in range(n - 1, -1, -1):
        acc = a[r][n]
        for c in range(r + 1, n):
            acc -= a[r][c] * x[c]
        x[r] = acc / a[r][r]
    return x
