"""Continued-fraction arithmetic: expansions, convergents, Diophantine classes,
and the angle-doubling denominator interlacing used to transfer the David
property from a rotation number to its double.

All expansions run on exact rationals (``fractions.Fraction``), so convergent
recurrences and determinant identities hold in exact integer arithmetic.  A
binary64 input is interpreted as the exact dyadic rational it represents; a
residual guard aborts the expansion once the float's information is spent.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

# Residual below this is considered an artifact of finite input precision.
RESIDUAL_FLOOR = 2.0 ** -40

DEFAULT_BOUNDED_CUTOFF = 100
CLASSIFY_MIN_WINDOW = 8


class RationalInput(ValueError):
    """The expansion terminated: the input is rational at working precision."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class PrecisionExhausted(ValueError):
    """Residual dropped below the precision floor before reaching the depth."""


class DepthTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class ContinuedFraction:
    """Quotients a_1..a_N and convergents p_n/q_n of a number in (0,1)."""

    value: float
    quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]

    @property
    def depth(self) -> int:
        return len(self.quotients)

    def denominators(self) -> list[int]:
        """Closest-return denominators q_0=1, q_1, ..., q_N."""
        return [1] + [q for _, q in self.convergents]


class RotationKind(enum.Enum):
    BOUNDED = "BoundedType"
    DAVID = "DavidType"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class RotationClass:
    kind: RotationKind
    bound_B: int
    david_C: float
    window: int


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


def cf_expand(x, depth: int, *, assume_exact: bool | None = None,
              allow_rational: bool = False) -> ContinuedFraction:
    """Gauss-map expansion of x in (0,1) to the requested depth.

    Raises RationalInput when a residual hits zero before ``depth`` (unless
    ``allow_rational``, which returns the terminated expansion), and
    PrecisionExhausted when the residual falls under RESIDUAL_FLOOR for
    inexact inputs (floats, decimal strings).
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    exact = isinstance(x, Fraction) if assume_exact is None else assume_exact
    r = _to_fraction(x)
    if not (0 < r < 1):
        raise ValueError(f"x must lie in (0,1), got {x}")
    value = float(r)

    quotients: list[int] = []
    convergents: list[tuple[int, int]] = []
    p_prev, q_prev = 1, 0
    p_cur, q_cur = 0, 1
    for _ in range(depth):
        if r == 0:
            cf = ContinuedFraction(value, tuple(quotients), tuple(convergents))
            if allow_rational:
                return cf
            raise RationalInput(
                f"input is rational: expansion terminated after a_{len(quotients)}",
                partial=cf)
        if not exact and r < Fraction(RESIDUAL_FLOOR):
            raise PrecisionExhausted(
                f"residual {float(r):.3e} below 2^-40 after a_{len(quotients)}; "
                "input precision exhausted")
        inv = 1 / r
        a = int(inv)  # floor for positive rationals
        r = inv - a
        quotients.append(a)
        p_cur, p_prev = a * p_cur + p_prev, p_cur
        q_cur, q_prev = a * q_cur + q_prev, q_cur
        convergents.append((p_cur, q_cur))
    return ContinuedFraction(value, tuple(quotients), tuple(convergents))


def cf_from_quotients(quotients: Sequence[int]) -> ContinuedFraction:
    """Continued fraction built directly from prescribed partial quotients."""
    if not quotients or any(a < 1 for a in quotients):
        raise ValueError("quotients must be a non-empty list of positive integers")
    p_prev, q_prev = 1, 0
    p_cur, q_cur = 0, 1
    convergents = []
    for a in quotients:
        p_cur, p_prev = a * p_cur + p_prev, p_cur
        q_cur, q_prev = a * q_cur + q_prev, q_cur
        convergents.append((p_cur, q_cur))
    value = p_cur / q_cur
    return ContinuedFraction(value, tuple(quotients), tuple(convergents))


def quotients_value(quotients: Sequence[int]) -> Fraction:
    """Exact rational value [0; a_1, ..., a_N]."""
    cf = cf_from_quotients(quotients)
    p, q = cf.convergents[-1]
    return Fraction(p, q)


def classify(cf: ContinuedFraction, bound: int = DEFAULT_BOUNDED_CUTOFF) -> RotationClass:
    """Bounded/David classification over the observed window.

    david_C is the witness constant max_n log(a_n)/sqrt(n); it is reported for
    every class since the asymptotic definition fixes no canonical cutoff.
    """
    window = cf.depth
    bound_b = max(cf.quotients)
    david_c = max(math.log(a) / math.sqrt(n)
                  for n, a in enumerate(cf.quotients, start=1))
    if window < CLASSIFY_MIN_WINDOW:
        kind = RotationKind.INDETERMINATE
    elif bound_b <= bound:
        kind = RotationKind.BOUNDED
    else:
        kind = RotationKind.DAVID
    return RotationClass(kind=kind, bound_B=bound_b, david_C=david_c, window=window)


def double_mod1(theta):
    """2*theta mod 1, preserving Fraction exactness when given one."""
    half = Fraction(1, 2) if isinstance(theta, Fraction) else 0.5
    if not (0 < theta < 1):
        raise ValueError("theta must lie in (0,1)")
    if theta == half:
        raise ValueError("theta = 1/2 is rational; doubling is undefined here")
    return 2 * theta if theta < half else 2 * theta - 1


def david_witness_plus1(quotients: Sequence[int]) -> float:
    """Witness constant for the regularized bound log(a_n + 1) <= C sqrt(n).

    The +1 regularization mirrors the product bound t_{n+1}/t_{n-9} <=
    prod (b_l + 1) that the doubling argument actually uses, and keeps the
    witness meaningful for quotient tails of 1s (where log a_n = 0).
    """
    return max(math.log(a + 1) / math.sqrt(n)
               for n, a in enumerate(quotients, start=1))


@dataclass(frozen=True)
class InterlacingRow:
    n: int
    lower: int          # t_{n-4}
    upper: int          # t_{n+1}
    witnesses: tuple[int, ...]  # q_k strictly between
    passed: bool


@dataclass(frozen=True)
class QuotientBoundRow:
    k: int
    a_k: int
    n: int              # least n with q_k < t_{n+1}
    log_bound: float    # sum over max(1,n-8) <= l <= n+1 of log(b_l + 1)
    passed: bool


@dataclass(frozen=True)
class InterlacingReport:
    theta_quotients: tuple[int, ...]
    alpha_quotients: tuple[int, ...]
    theta_denominators: tuple[int, ...]
    alpha_denominators: tuple[int, ...]
    rows: tuple[InterlacingRow, ...]
    quotient_bounds: tuple[QuotientBoundRow, ...]
    david_theta: float
    david_alpha: float
    all_pass: bool

    @property
    def constant_ratio(self) -> float:
        return self.david_alpha / self.david_theta


_INTERLACING_MARGIN = 8


def denominator_interlacing_check(theta, depth: int,
                                  theta_quotients: Sequence[int] | None = None
                                  ) -> InterlacingReport:
    """Check the doubling-transfer denominator structure.

    For alpha = 2*theta mod 1, verifies that for each n in [4, depth-1] some
    convergent denominator q_k of alpha lies strictly between t_{n-4} and
    t_{n+1} (the t_n being theta's denominators), and reports the implied
    per-quotient bound log a_k <= sum log(b_l + 1).

    theta is expanded past ``depth`` by a small margin so that the reported
    window is untouched by truncation effects of rational stand-ins.
    """
    if depth < 10:
        raise DepthTooSmall(f"depth must be >= 10, got {depth}")
    work_depth = depth + _INTERLACING_MARGIN
    if theta_quotients is not None:
        qts = list(theta_quotients)[:work_depth]
        cf_theta = cf_from_quotients(qts)
        theta_exact = quotients_value(qts)
    else:
        theta_exact = _to_fraction(theta)
        cf_theta = cf_expand(theta_exact, work_depth,
                             assume_exact=isinstance(theta, (Fraction, str)),
                             allow_rational=True)
    if cf_theta.depth < depth:
        raise DepthTooSmall(
            f"theta expansion terminated at depth {cf_theta.depth} < {depth}")

    t = cf_theta.denominators()          # t_0 = 1, t_1, ..., t_workdepth
    alpha = double_mod1(theta_exact)
    cf_alpha = cf_expand(alpha, 4 * work_depth + 40, assume_exact=True,
                         allow_rational=True)
    q = cf_alpha.denominators()

    rows = []
    for n in range(4, depth):
        lower, upper = t[n - 4], t[n + 1]
        wit = tuple(qk for qk in q if lower < qk < upper)
        rows.append(InterlacingRow(n=n, lower=lower, upper=upper,
                                   witnesses=wit, passed=bool(wit)))

    b = cf_theta.quotients
    qrows = []
    alpha_window = 0
    for k, a_k in enumerate(cf_alpha.quotients, start=1):
        if q[k] > t[depth]:
            break
        alpha_window = k
        n = next((m for m in range(1, len(t) - 1) if q[k] < t[m + 1]), None)
        if n is None:
            break
        lo = max(1, n - 8)
        log_bound = sum(math.log(b[l - 1] + 1) for l in range(lo, min(n + 1, len(b)) + 1))
        qrows.append(QuotientBoundRow(k=k, a_k=a_k, n=n, log_bound=log_bound,
                                      passed=math.log(a_k) <= log_bound + 1e-12))

    alpha_window = max(alpha_window, 1)
    report = InterlacingReport(
        theta_quotients=cf_theta.quotients[:depth],
        alpha_quotients=cf_alpha.quotients[:alpha_window],
        theta_denominators=tuple(t[:depth + 1]),
        alpha_denominators=tuple(q[:alpha_window + 1]),
        rows=tuple(rows),
        quotient_bounds=tuple(qrows),
        david_theta=david_witness_plus1(cf_theta.quotients[:depth]),
        david_alpha=david_witness_plus1(cf_alpha.quotients[:alpha_window]),
        all_pass=all(r.passed for r in rows) and all(r.passed for r in qrows),
    )
    return report


# --- named rotation numbers -------------------------------------------------

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SILVER = math.sqrt(2.0) - 1.0
DAVID_DEMO_DEPTH = 25


def david_demo_quotients(depth: int = DAVID_DEMO_DEPTH) -> list[int]:
    return [math.ceil(math.e ** math.sqrt(n)) for n in range(1, depth + 1)]


@dataclass(frozen=True)
class ThetaSpec:
    """A rotation-number specification: float value plus optional exact data."""

    value: float
    name: str | None = None
    quotients: tuple[int, ...] | None = None   # prescribed partial quotients
    exact: Fraction | None = None              # exact rational payload, if any
    quotient_rule: Callable[[int], int] | None = field(default=None, compare=False)

    def continued_fraction(self, depth: int) -> ContinuedFraction:
        if self.quotient_rule is not None:
            return cf_from_quotients([self.quotient_rule(n) for n in range(1, depth + 1)])
        if self.quotients is not None:
            return cf_from_quotients(list(self.quotients)[:depth])
        if self.exact is not None:
            return cf_expand(self.exact, depth, allow_rational=True)
        return cf_expand(self.value, depth)


def double_theta_spec(spec: ThetaSpec) -> ThetaSpec:
    """ThetaSpec for 2*theta mod 1, with exact quotient data where known.

    The doubles of the shipped constants have closed-form expansions:
    2*golden - 1 = sqrt(5) - 2 = [4, 4, 4, ...] and
    2*silver = 2*sqrt(2) - 2 = [1, 4, 1, 4, ...].
    """
    if spec.name == "golden":
        return ThetaSpec(value=double_mod1(spec.value), name="golden-doubled",
                         quotient_rule=lambda n: 4)
    if spec.name == "silver":
        return ThetaSpec(value=double_mod1(spec.value), name="silver-doubled",
                         quotient_rule=lambda n: 1 if n % 2 else 4)
    if spec.exact is not None:
        doubled = double_mod1(spec.exact)
        return ThetaSpec(value=float(doubled), exact=doubled)
    return ThetaSpec(value=double_mod1(spec.value))


def parse_theta(spec) -> ThetaSpec:
    """Parse a theta specification: named constant, decimal string, float, or
    a comma/space separated quotient list like "[3,5,6]" or "3 5 6"."""
    if isinstance(spec, ThetaSpec):
        return spec
    if isinstance(spec, Fraction):
        return ThetaSpec(value=float(spec), exact=spec)
    if isinstance(spec, float):
        return ThetaSpec(value=spec)
    if isinstance(spec, (list, tuple)):
        qts = tuple(int(a) for a in spec)
        return ThetaSpec(value=float(quotients_value(qts)), quotients=qts,
                         exact=quotients_value(qts))
    text = str(spec).strip()
    lowered = text.lower()
    if lowered == "golden":
        return ThetaSpec(value=GOLDEN, name="golden", quotient_rule=lambda n: 1)
    if lowered == "silver":
        return ThetaSpec(value=SILVER, name="silver", quotient_rule=lambda n: 2)
    if lowered == "david-demo":
        qts = tuple(david_demo_quotients())
        return ThetaSpec(value=float(quotients_value(qts)), name="david-demo",
                         quotients=qts, exact=quotients_value(qts))
    if text.startswith("["):
        body = text.strip("[]")
        qts = tuple(int(p) for p in body.replace(",", " ").split())
        return ThetaSpec(value=float(quotients_value(qts)), quotients=qts,
                         exact=quotients_value(qts))
    frac = Fraction(text)
    is_decimal = "." in text or "/" in text
    return ThetaSpec(value=float(frac), exact=frac if is_decimal else None)
