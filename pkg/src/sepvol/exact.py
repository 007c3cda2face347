"""Closed-form volumes, hyperareas and conjectured separable quantities.

Everything is built as an exact sympy expression (integer Gamma/factorial
arithmetic, symbolic pi and square roots) and converted to a decimal once,
at 40 significant digits.  Each quantity carries a status: ``proven`` for
formulas derived in the literature, ``conjectured`` for numerical fits.

Normalizations: monotone metrics use the line element
``1/4 sum |<a|X|b>|^2 c(lam_a, lam_b)`` (Bures volume of the qubit = pi^2/8),
Hilbert-Schmidt uses ``Tr dX^2`` (qubit = ball of radius 1/sqrt 2).  The
"SD" metric is four times Bures, so SD volumes in dimension ``D`` are
``2^D`` times Bures volumes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import sympy as sp

DIGITS = 40


class ExactError(ValueError):
    pass


class Status(enum.Enum):
    PROVEN = "proven"
    CONJECTURED = "conjectured"


@dataclass(frozen=True)
class ExactQuantity:
    name: str
    expr: sp.Expr
    N: int | None = None
    n: int | None = None
    status: Status = Status.PROVEN
    beta: int = 2
    metric: str | None = None
    note: str = ""

    @property
    def value(self) -> sp.Float:
        return sp.N(self.expr, DIGITS)

    def __float__(self) -> float:
        return float(self.value)

    def decimal(self, digits: int = 6) -> str:
        return str(sp.N(self.expr, digits))

    def symbolic(self) -> str:
        return sp.sstr(self.expr)

    def to_dict(self) -> dict:
        return {"name": self.name, "N": self.N, "n": self.n, "metric": self.metric,
                "status": self.status.value, "exact": self.symbolic(),
                "value": str(self.value), "note": self.note}


def d_n(N: int, n: int, beta: int = 2) -> int:
    """Real dimension of the rank-(N-n) stratum."""
    return int(sp.Rational(N - n) * (1 + sp.Rational((N + n - 1) * beta, 2)) - 1)


def _check(N: int, n: int, beta: int) -> None:
    if N < 1 or not 0 <= n <= N - 1:
        raise ExactError(f"invalid stratum N={N}, n={n}")
    if beta not in (1, 2):
        raise ExactError(f"beta must be 1 or 2, got {beta}")


def hemisphere_prefactor(N: int, n: int, beta: int = 2) -> sp.Expr:
    """``2^-d pi^((d+1)/2) / Gamma((d+1)/2)``."""
    d = d_n(N, n, beta)
    h = sp.Rational(d + 1, 2)
    return sp.Integer(2) ** (-d) * sp.pi ** h / sp.gamma(h)


def general_product(N: int, n: int, beta: int = 2) -> sp.Expr:
    """Gamma product of the general rank-stratum Bures formula."""
    b = sp.Rational(beta, 2)
    out = sp.Integer(1)
    for j in range(1, N - n + 1):
        out *= (sp.gamma(j * b) * sp.gamma(1 + (2 * n + j - 1) * b)
                / (sp.gamma((n + j) * b) * sp.gamma(1 + (n + j - 1) * b)))
    return sp.nsimplify(out) if beta == 2 else sp.simplify(out)


def rectified_product(N: int, n: int) -> sp.Rational:
    """``prod_{j=0}^{N-n-1} j! (j+2n)! / ((j+n)!)^2`` (complex case)."""
    out = sp.Integer(1)
    for j in range(N - n):
        out *= sp.Rational(sp.factorial(j) * sp.factorial(j + 2 * n), sp.factorial(j + n) ** 2)
    return out


def binomial_product(N: int, n: int) -> sp.Integer:
    """The superseded ``C(N+n-1, n)`` factor; agrees only for n = 0, 1, N-1."""
    return sp.binomial(N + n - 1, n)


@lru_cache(maxsize=None)
def bures_rank_volume(N: int, n: int = 0, beta: int = 2) -> ExactQuantity:
    """Bures volume of the rank-(N-n) stratum of N x N density matrices.

    For ``beta = 2`` the Gamma product is cross-checked against the
    factorial form and a mismatch raises.
    """
    _check(N, n, beta)
    prod = general_product(N, n, beta)
    if beta == 2:
        rect = rectified_product(N, n)
        if sp.simplify(prod - rect) != 0:  # pragma: no cover - identity
            raise ExactError(f"product forms disagree at N={N}, n={n}")
        prod = rect
    expr = sp.simplify(hemisphere_prefactor(N, n, beta) * prod)
    return ExactQuantity(f"bures_volume_{N}_{n}", expr, N, n, metric="bures", beta=beta)


def bures_binomial_form(N: int, n: int) -> sp.Expr:
    """Volume from the superseded binomial factor (for comparison only)."""
    _check(N, n, 2)
    return sp.simplify(hemisphere_prefactor(N, n, 2) * binomial_product(N, n))


def projective_volume(N: int) -> sp.Expr:
    """Fubini-Study volume of ``CP^(N-1)`` with ``CP^1`` a sphere of radius 1/2."""
    return sp.pi ** (N - 1) / sp.factorial(N - 1)


def _superfactorial(k: int) -> sp.Integer:
    """``Gamma(1) Gamma(2) ... Gamma(k)``."""
    out = sp.Integer(1)
    for j in range(1, k + 1):
        out *= sp.factorial(j - 1)
    return out


@lru_cache(maxsize=None)
def hs_volume(N: int) -> ExactQuantity:
    if N < 2:
        raise ExactError("N must be >= 2")
    expr = (sp.sqrt(N) * (2 * sp.pi) ** sp.Rational(N * (N - 1), 2)
            * _superfactorial(N) / sp.factorial(N * N - 1))
    return ExactQuantity(f"hs_volume_{N}", sp.simplify(expr), N, 0, metric="hs")


@lru_cache(maxsize=None)
def hs_hyperarea(N: int) -> ExactQuantity:
    if N < 2:
        raise ExactError("N must be >= 2")
    expr = (sp.sqrt(N - 1) * (2 * sp.pi) ** sp.Rational(N * (N - 1), 2)
            * _superfactorial(N + 1) / (sp.factorial(N - 1) * sp.factorial(N * N - 2)))
    return ExactQuantity(f"hs_hyperarea_{N}", sp.simplify(expr), N, 1, metric="hs")


def exact_volume(metric: str, N: int, n: int = 0) -> ExactQuantity | None:
    """Known total volume (n=0) or boundary hyperarea (n=1), else None."""
    if metric == "bures":
        return bures_rank_volume(N, n, 2)
    if metric == "hs" and n in (0, 1) and N >= 2:
        return hs_volume(N) if n == 0 else hs_hyperarea(N)
    return None


def gamma_ratio(metric: str, N: int) -> ExactQuantity:
    """Boundary hyperarea over volume, from the closed ratio formulas."""
    if N < 2:
        raise ExactError("N must be >= 2")
    m = metric.lower()
    if m == "bures":
        h = sp.Rational(N * N, 2)
        expr = 2 / sp.sqrt(sp.pi) * sp.gamma(h) / sp.gamma(h - sp.Rational(1, 2)) * N
    elif m == "hs":
        expr = sp.sqrt(N * (N - 1)) * (N * N - 1)
    else:
        raise ExactError(f"no closed ratio for metric {metric!r}")
    return ExactQuantity(f"gamma_{m}_{N}", sp.simplify(expr), N, None, metric=m)


# --------------------------------------------------------------------------
# conjectures

SILVER = sp.sqrt(2) - 1
C_BURES = sp.sqrt(8642986 * sp.pi)

_C = Status.CONJECTURED


def _q(name, expr, N, n, metric, note="", status=_C):
    return ExactQuantity(name, expr, N, n, status, 2, metric, note)


def _registry():
    two, three, five = sp.Integer(2), sp.Integer(3), sp.Integer(5)
    r = {}

    def add(q):
        r[q.name] = q

    add(_q("c_bures", C_BURES, None, None, "bures", "constant sqrt(pi*2*11*19*23*29*31)",
           status=Status.PROVEN))
    add(_q("sep_bures_volume_6", 3 * C_BURES / two ** 77, 6, 0, "bures"))
    add(_q("sep_bures_hyperarea_6", 1 / (two ** 43 * 3 * 5 * C_BURES), 6, 1, "bures"))
    add(_q("sep_bures_volume_6_alt",
           three ** 2 * 11 * 19 * 23 * 29 * 31 * sp.pi / (two ** 76 * five ** 6), 6, 0, "bures",
           "competing fit"))
    add(_q("sep_bures_hyperarea_6_alt", 1 / (two ** 43 * five ** 7), 6, 1, "bures",
           "competing fit"))
    add(_q("sep_bures_prob_6",
           three ** 7 * five ** 3 * 7 ** 2 * 11 * 13 * 17 * C_BURES / (two ** 27 * sp.pi ** 18),
           6, 0, "bures"))
    add(_q("sep_hs_volume_6", 1 / (two ** 45 * 3 * five ** 13 * 7 * sp.sqrt(30)), 6, 0, "hs"))
    add(_q("sep_hs_hyperarea_6", 1 / (two ** 46 * 3 * five ** 12), 6, 1, "hs"))
    add(_q("sep_hs_prob_6",
           three ** 10 * 7 ** 4 * 11 ** 3 * 13 ** 2 * 17 ** 2 * 19 * 23 * 29 * 31 * sp.sqrt(5)
           / (two ** 37 * five ** 7 * sp.pi ** 15), 6, 0, "hs"))
    add(_q("sep_hs_volume_6_rank4", 7 * 11 / (two ** 41 * five ** 11 * sp.sqrt(5) * sp.pi),
           6, 2, "hs"))
    add(_q("sep_hs_volume_4", 1 / (three ** 3 * five ** 7 * sp.sqrt(3)), 4, 0, "hs"))
    add(_q("sep_hs_hyperarea_4", 1 / (three ** 2 * five ** 6), 4, 1, "hs"))
    add(_q("sep_hs_prob_4",
           two ** 2 * 3 * 7 ** 2 * 11 * 13 * sp.sqrt(3) / (five ** 4 * sp.pi ** 6), 4, 0, "hs",
           "equals sep_hs_volume_4 / hs_volume(4)"))
    add(_q("sd_sep_volume_4", SILVER / 3, 4, 0, "bures",
           "SD units: 2^15 times the Bures separable volume"))
    add(_q("km4_sep_volume_4", 10 * SILVER, 4, 0, "km",
           "units of four times the Kubo-Mori metric: 2^15 times KM"))
    add(_q("omega", two, None, None, None, "rank-N over rank-(N-1) separability probability"))
    add(_q("omega_bures_4", 8192 / (1419 * sp.pi), 4, None, "bures"))
    add(_q("omega_arith_4", sp.Integer(408260608) / (73153125 * sp.pi), 4, None, "arith"))
    return r


_REGISTRY = None


def registry() -> dict:
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = _registry()
    return _REGISTRY


def km_volume_ratio(N: int) -> ExactQuantity:
    """Conjectured KM / Bures total-volume ratio ``2^(N(N-1)/2)``."""
    return _q(f"km_volume_ratio_{N}", sp.Integer(2) ** (N * (N - 1) // 2), N, 0, "km")


def conjecture_value(name: str, N: int | None = None) -> ExactQuantity:
    if name == "km_volume_ratio":
        if N is None:
            raise ExactError("km_volume_ratio needs N")
        return km_volume_ratio(N)
    try:
        return registry()[name]
    except KeyError:
        raise ExactError(f"unknown quantity {name!r}") from None


def names() -> list[str]:
    return sorted(registry()) + ["km_volume_ratio"]


def lookup(name: str) -> ExactQuantity:
    """Resolve registry names plus ``bures_volume_N_n``, ``hs_volume_N``,
    ``hs_hyperarea_N``, ``gamma_<metric>_N`` and ``km_volume_ratio_N``."""
    parts = name.split("_")
    try:
        if name.startswith("bures_volume_") and len(parts) == 4:
            return bures_rank_volume(int(parts[2]), int(parts[3]))
        if name.startswith("hs_volume_") and len(parts) == 3:
            return hs_volume(int(parts[2]))
        if name.startswith("hs_hyperarea_") and len(parts) == 3:
            return hs_hyperarea(int(parts[2]))
        if name.startswith("gamma_") and len(parts) == 3:
            return gamma_ratio(parts[1], int(parts[2]))
        if name.startswith("km_volume_ratio_"):
            return km_volume_ratio(int(parts[-1]))
    except ValueError:
        raise ExactError(f"malformed quantity name {name!r}") from None
    return conjecture_value(name)


# --------------------------------------------------------------------------
# Euclidean balls


def ball_volume(D: int, r=1):
    return sp.pi ** sp.Rational(D, 2) / sp.gamma(sp.Rational(D, 2) + 1) * sp.sympify(r) ** D


def isoperimetric_ball_ratio(volume, hyperarea, D: int = 35, matched: str = "volume") -> float:
    """Ball surface/volume ratio over the set's hyperarea/volume ratio.

    The ball is chosen with the same ``volume`` (``matched="volume"``) or the
    same boundary ``hyperarea`` (``matched="hyperarea"``).  A ball of radius
    ``r`` has surface/volume ratio ``D/r``.  Values below 1 mean the set has
    more boundary per volume than the matched ball.
    """
    volume = sp.Float(volume, DIGITS)
    hyperarea = sp.Float(hyperarea, DIGITS)
    if volume <= 0 or hyperarea <= 0:
        raise ExactError("volume and hyperarea must be positive")
    unit = sp.N(ball_volume(D), DIGITS)
    if matched == "volume":
        r = (volume / unit) ** sp.Rational(1, D)
    elif matched == "hyperarea":
        r = (hyperarea / (D * unit)) ** sp.Rational(1, D - 1)
    else:
        raise ExactError(f"matched must be 'volume' or 'hyperarea', got {matched!r}")
    return float((D / r) / (hyperarea / volume))
