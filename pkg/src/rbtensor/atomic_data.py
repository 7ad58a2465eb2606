"""
Reference data for alkali D lines and the angular-momentum arithmetic built on it.

A :class:`LevelScheme` describes one D line as seen from the ground hyperfine
manifold: the electronic and nuclear angular momenta, the natural linewidth,
the wavelength and the positions of the excited hyperfine levels. Schemes are
read from a small line-oriented text format (see :func:`parse_schemes`); the
package ships ``data/rb87.dat`` with the 87Rb D1 and D2 lines.

All frequencies are ordinary frequencies in MHz.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np
import scipy.constants

from .exceptions import SchemeError, UnknownLevel

DATA_ENV_VAR = "RBTENSOR_DATA"

HalfIntegerLike = Union["HalfInteger", int, float, Fraction, str]


@total_ordering
@dataclass(frozen=True)
class HalfInteger:
    """Non-negative integer or half-integer, stored exactly as ``2j``."""

    twice_value: int

    def __post_init__(self):
        if not isinstance(self.twice_value, (int, np.integer)) or isinstance(self.twice_value, bool):
            raise TypeError(f"twice_value must be an integer, got {self.twice_value!r}")
        if self.twice_value < 0:
            raise ValueError(f"angular momentum must be non-negative, got 2j={self.twice_value}")
        object.__setattr__(self, "twice_value", int(self.twice_value))

    @classmethod
    def of(cls, value: HalfIntegerLike) -> "HalfInteger":
        """Coerce ``value`` (``1``, ``1.5``, ``Fraction(3, 2)``, ``"3/2"``) to a HalfInteger."""
        if isinstance(value, HalfInteger):
            return value
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            return cls(2 * int(value))
        if isinstance(value, float) and (2 * value).is_integer():
            return cls(int(2 * value))
        if isinstance(value, str):
            value = Fraction(value.strip())
        twice = Fraction(value) * 2
        if twice.denominator != 1:
            raise ValueError(f"{value!r} is not a multiple of 1/2")
        return cls(int(twice))

    @property
    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    def __float__(self):
        return self.twice_value / 2

    def __add__(self, other):
        return HalfInteger(self.twice_value + HalfInteger.of(other).twice_value)

    def __sub__(self, other):
        return HalfInteger(self.twice_value - HalfInteger.of(other).twice_value)

    def __eq__(self, other):
        if isinstance(other, HalfInteger):
            return self.twice_value == other.twice_value
        try:
            return self.twice_value == HalfInteger.of(other).twice_value
        except (TypeError, ValueError):
            return NotImplemented

    def __lt__(self, other):
        return self.twice_value < HalfInteger.of(other).twice_value

    def __hash__(self):
        return hash(Fraction(self.twice_value, 2))

    def __str__(self):
        if self.is_integer:
            return str(self.twice_value // 2)
        return f"{self.twice_value}/2"

    def __repr__(self):
        return f"HalfInteger({self})"


def _allowed_couplings(a: HalfInteger, b: HalfInteger) -> list[HalfInteger]:
    """All totals |a-b| <= c <= a+b reachable by coupling ``a`` and ``b``."""
    lo = abs(a.twice_value - b.twice_value)
    hi = a.twice_value + b.twice_value
    return [HalfInteger(t) for t in range(lo, hi + 1, 2)]


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants; only used to quote polarizabilities in absolute units."""

    hbar: float = scipy.constants.hbar
    epsilon0: float = scipy.constants.epsilon_0

    def __post_init__(self):
        if self.hbar <= 0 or self.epsilon0 <= 0:
            raise ValueError("physical constants must be positive")


_EXCITED_J = {"D1": HalfInteger(1), "D2": HalfInteger(3)}


@dataclass(frozen=True)
class LevelScheme:
    """
    One D line of an alkali atom.

    Parameters
    ----------
    line_id : str
        ``"D1"`` or ``"D2"``.
    j_ground, j_excited, nuclear_spin : HalfInteger
        Electronic angular momentum of the ground and excited state, and the
        nuclear spin.
    gamma_mhz : float
        Natural linewidth, ordinary frequency in MHz.
    lambda_nm : float
        Transition wavelength in nm.
    excited_levels : tuple of (HalfInteger, float)
        ``(F', offset_mhz)`` pairs; offsets are relative to the reference
        level, which has offset exactly zero.
    """

    line_id: str
    j_ground: HalfInteger
    j_excited: HalfInteger
    nuclear_spin: HalfInteger
    gamma_mhz: float
    lambda_nm: float
    excited_levels: tuple

    def __post_init__(self):
        if self.line_id not in _EXCITED_J:
            raise SchemeError(f"line must be D1 or D2, got {self.line_id!r}")
        if not (self.gamma_mhz > 0 and math.isfinite(self.gamma_mhz)):
            raise SchemeError(f"{self.line_id}: gamma_mhz must be positive, got {self.gamma_mhz}")
        if not (self.lambda_nm > 0 and math.isfinite(self.lambda_nm)):
            raise SchemeError(f"{self.line_id}: lambda_nm must be positive, got {self.lambda_nm}")
        levels = tuple(sorted((HalfInteger.of(f), float(x)) for f, x in self.excited_levels))
        object.__setattr__(self, "excited_levels", levels)

        expected = _allowed_couplings(self.j_excited, self.nuclear_spin)
        present = [f for f, _ in levels]
        if present != expected:
            missing = sorted(set(expected) - set(present))
            extra = sorted(set(present) - set(expected))
            raise SchemeError(
                f"{self.line_id}: excited levels must be F'={[str(f) for f in expected]}; "
                f"missing {[str(f) for f in missing]}, unexpected {[str(f) for f in extra]}"
            )
        offsets = [x for _, x in levels]
        if not all(math.isfinite(x) for x in offsets):
            raise SchemeError(f"{self.line_id}: non-finite level offset")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise SchemeError(f"{self.line_id}: level offsets must increase strictly with F'")
        if sum(1 for x in offsets if x == 0.0) != 1:
            raise SchemeError(f"{self.line_id}: exactly one level must have offset_mhz=0")

    @property
    def levels(self) -> list[HalfInteger]:
        return [f for f, _ in self.excited_levels]

    @property
    def reference_level(self) -> HalfInteger:
        return next(f for f, x in self.excited_levels if x == 0.0)

    def ground_levels(self) -> list[HalfInteger]:
        return _allowed_couplings(self.j_ground, self.nuclear_spin)

    def offset(self, f_prime: HalfIntegerLike) -> float:
        f_prime = HalfInteger.of(f_prime)
        for f, x in self.excited_levels:
            if f == f_prime:
                return x
        raise UnknownLevel(f"{self.line_id} has no excited level F'={f_prime}")

    def coupled_levels(self, f_ground: HalfIntegerLike = 1) -> list[HalfInteger]:
        """Excited levels reachable from ``f_ground`` by an electric-dipole transition."""
        f2 = HalfInteger.of(f_ground).twice_value
        return [f for f in self.levels if abs(f.twice_value - f2) <= 2]


def detuning_of_transition(scheme: LevelScheme, delta_ref_mhz: float, f_prime: HalfIntegerLike) -> float:
    """
    Detuning of the probe from the ``F=1 -> F'`` transition.

    ``delta_ref_mhz`` is the detuning from the reference transition; a probe
    sitting below a higher-lying level is red detuned (negative) from it.
    """
    return delta_ref_mhz - scheme.offset(f_prime)


# --- file format ------------------------------------------------------------

_SCALAR_KEYS = {"gamma_mhz", "lambda_nm", "j_ground", "j_excited", "nuclear_spin"}


def parse_schemes(text: str, source: str = "<string>") -> dict[str, LevelScheme]:
    """
    Parse level-scheme text into ``{line_id: LevelScheme}``.

    The format is one ``key value`` pair per line; ``#`` starts a comment.
    A ``line D1|D2`` record opens a new scheme and the records that follow
    belong to it::

        line D2
        gamma_mhz 6.0666
        lambda_nm 780.241209686
        level F=0 offset_mhz=0.0
        level F=1 offset_mhz=72.2220
        ...

    Optional keys ``j_ground`` (default 1/2), ``j_excited`` (default 1/2 for
    D1, 3/2 for D2) and ``nuclear_spin`` (default 3/2) allow other alkali
    species. Unknown keys, duplicate keys and missing required keys are
    errors.
    """
    blocks: list[tuple[int, dict]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        where = f"{source}:{lineno}"
        if key == "line":
            blocks.append((lineno, {"line": rest, "levels": []}))
            continue
        if not blocks:
            raise SchemeError(f"{where}: '{key}' before any 'line' record")
        block = blocks[-1][1]
        if key == "level":
            block["levels"].append(_parse_level(rest, where))
        elif key in _SCALAR_KEYS:
            if key in block:
                raise SchemeError(f"{where}: duplicate key '{key}'")
            block[key] = (rest, where)
        else:
            raise SchemeError(f"{where}: unknown key '{key}'")

    schemes: dict[str, LevelScheme] = {}
    for lineno, block in blocks:
        line_id = block["line"]
        where = f"{source}:{lineno}"
        if line_id in schemes:
            raise SchemeError(f"{where}: line {line_id} defined twice")
        if line_id not in _EXCITED_J:
            raise SchemeError(f"{where}: line must be D1 or D2, got {line_id!r}")
        for key in ("gamma_mhz", "lambda_nm"):
            if key not in block:
                raise SchemeError(f"{where}: line {line_id} is missing '{key}'")
        try:
            schemes[line_id] = LevelScheme(
                line_id=line_id,
                j_ground=_half(block.get("j_ground", ("1/2", where))),
                j_excited=(_half(block["j_excited"]) if "j_excited" in block else _EXCITED_J[line_id]),
                nuclear_spin=_half(block.get("nuclear_spin", ("3/2", where))),
                gamma_mhz=_float(block["gamma_mhz"]),
                lambda_nm=_float(block["lambda_nm"]),
                excited_levels=tuple(block["levels"]),
            )
        except SchemeError as exc:
            raise SchemeError(f"{where}: {exc}") from None
    return schemes


def _half(item) -> HalfInteger:
    value, where = item
    try:
        return HalfInteger.of(value)
    except (ValueError, TypeError, ZeroDivisionError):
        raise SchemeError(f"{where}: expected an integer or half-integer, got {value!r}") from None


def _float(item) -> float:
    value, where = item
    try:
        return float(value)
    except ValueError:
        raise SchemeError(f"{where}: expected a number, got {value!r}") from None


def _parse_level(rest: str, where: str) -> tuple[HalfInteger, float]:
    fields = dict(tok.split("=", 1) for tok in rest.split() if "=" in tok)
    if len(rest.split()) != 2 or set(fields) != {"F", "offset_mhz"}:
        raise SchemeError(f"{where}: expected 'level F=<f> offset_mhz=<x>', got {rest!r}")
    return _half((fields["F"], where)), _float((fields["offset_mhz"], where))


def bundled_data_path() -> Path:
    return Path(str(resources.files("rbtensor") / "data" / "rb87.dat"))


def load_schemes(path: Union[str, os.PathLike, None] = None) -> dict[str, LevelScheme]:
    """
    Load every scheme from ``path``.

    With no path, the file named by the ``RBTENSOR_DATA`` environment variable
    is used if set, otherwise the bundled 87Rb data.
    """
    if path is None:
        path = os.environ.get(DATA_ENV_VAR) or bundled_data_path()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemeError(f"cannot read level-scheme file {path}: {exc.strerror}") from None
    return parse_schemes(text, source=str(path))


def load_scheme(line_id: str, path: Union[str, os.PathLike, None] = None) -> LevelScheme:
    schemes = load_schemes(path)
    line_id = line_id.upper()
    if line_id not in schemes:
        raise SchemeError(f"no data for line {line_id}")
    return schemes[line_id]


# --- Wigner 6-j ---------------------------------------------------------------

_LOG_FACT = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, 256, dtype=float)))))


def _log_factorial(n: int) -> float:
    if n < len(_LOG_FACT):
        return float(_LOG_FACT[n])
    return math.lgamma(n + 1)


def _triad_ok(a: int, b: int, c: int) -> bool:
    """Triangle rule on twice-values, with integer perimeter."""
    return (a + b + c) % 2 == 0 and abs(a - b) <= c <= a + b


def _log_delta(a: int, b: int, c: int) -> float:
    return 0.5 * (
        _log_factorial((a + b - c) // 2)
        + _log_factorial((a - b + c) // 2)
        + _log_factorial((-a + b + c) // 2)
        - _log_factorial((a + b + c) // 2 + 1)
    )


def wigner6j(j1, j2, j3, j4, j5, j6) -> float:
    """
    Wigner 6-j symbol ``{j1 j2 j3; j4 j5 j6}`` by the Racah single sum.

    Arguments may be HalfInteger or anything :meth:`HalfInteger.of` accepts.
    Returns exactly ``0.0`` if any of the triads (j1 j2 j3), (j1 j5 j6),
    (j4 j2 j6), (j4 j5 j3) breaks the triangle rule or has a half-integer
    sum.
    """
    a, b, c, d, e, f = (HalfInteger.of(j).twice_value for j in (j1, j2, j3, j4, j5, j6))
    triads = ((a, b, c), (a, e, f), (d, b, f), (d, e, c))
    if not all(_triad_ok(*t) for t in triads):
        return 0.0

    log_pre = sum(_log_delta(*t) for t in triads)
    alphas = [sum(t) // 2 for t in triads]
    betas = [(a + b + d + e) // 2, (b + c + e + f) // 2, (c + a + f + d) // 2]
    total = 0.0
    for t in range(max(alphas), min(betas) + 1):
        log_term = _log_factorial(t + 1) - sum(_log_factorial(t - x) for x in alphas)
        log_term -= sum(_log_factorial(y - t) for y in betas)
        total += (-1.0) ** t * math.exp(log_term + log_pre)
    return total

