"""
Irreducible tensor polarizability of the F=1 ground manifold.

Every value here is in units of alpha_0 * MHz^-1: the line factor of each
``F -> F'`` transition carries a dispersive profile ``Delta/(Gamma^2/4 +
Delta^2)`` with Delta and Gamma in MHz. The common scale cancels from every
ratio and root, which is all the rest of the package uses.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.optimize

from .atomic_data import HalfInteger, LevelScheme, PhysicalConstants, wigner6j
from .exceptions import InvalidRange, UnknownLevel

ABSORPTION_WINDOW_GAMMAS = 10.0
RATIO_UNDEFINED_BELOW = 1e-15
ROOT_XTOL_MHZ = 1e-12


def rank_weights(f_ground=1) -> dict[int, dict[int, Fraction]]:
    """
    Exact rank-K weights of the ``F' = F-1, F, F+1`` line factors.

    Returns ``{K: {dF: weight}}`` with ``dF = F' - F`` in {-1, 0, +1}; the
    overall ``(-1)^(2F)`` sign is not included.
    """
    F = Fraction(HalfInteger.of(f_ground).twice_value, 2)
    if F <= 0:
        raise ValueError("ground-state F must be positive")
    return {
        0: {-1: 2 * F - 1, 0: 2 * F + 1, 1: 2 * F + 3},
        1: {-1: -(2 * F - 1) / F, 0: -(2 * F + 1) / (F * (F + 1)), 1: (2 * F + 3) / (F + 1)},
        2: {-1: 1 / F, 0: -(2 * F + 1) / (F * (F + 1)), 1: 1 / (F + 1)},
    }


def _angular_factor(scheme: LevelScheme, f_ground: HalfInteger, f_prime: HalfInteger) -> float:
    j, jp, i = scheme.j_ground, scheme.j_excited, scheme.nuclear_spin
    twice_phase = j.twice_value + jp.twice_value + 2 * i.twice_value
    sign = -1.0 if (twice_phase // 2) % 2 else 1.0
    return sign * (jp.twice_value + 1) * wigner6j(jp, f_prime, i, f_ground, j, 1) ** 2


def line_factor(scheme: LevelScheme, delta_ffprime_mhz, f_ground=1, f_prime=1):
    """
    Line factor of the ``F -> F'`` transition, in alpha_0 * MHz^-1.

    Parameters
    ----------
    scheme : LevelScheme
    delta_ffprime_mhz : float or ndarray
        Probe detuning from the ``F -> F'`` transition itself.
    f_ground, f_prime : HalfInteger-like

    Raises
    ------
    UnknownLevel
        If ``f_prime`` is not an excited level of ``scheme``.
    """
    f_ground, f_prime = HalfInteger.of(f_ground), HalfInteger.of(f_prime)
    if f_prime not in scheme.levels:
        raise UnknownLevel(f"{scheme.line_id} has no excited level F'={f_prime}")
    delta = np.asarray(delta_ffprime_mhz, dtype=float)
    profile = delta / (scheme.gamma_mhz**2 / 4 + delta**2)
    out = profile * _angular_factor(scheme, f_ground, f_prime)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PolarizabilityComponents:
    """Rank-0, rank-1 and rank-2 polarizability at one detuning (alpha_0 * MHz^-1)."""

    alpha0_c: float
    alpha1_c: float
    alpha2_c: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha0_c, self.alpha1_c, self.alpha2_c)

    @property
    def ratio_1_over_2(self) -> Optional[float]:
        if abs(self.alpha2_c) < RATIO_UNDEFINED_BELOW:
            return None
        return self.alpha1_c / self.alpha2_c


def components_array(scheme: LevelScheme, delta_ref_mhz, f_ground=1) -> np.ndarray:
    """Vectorised :func:`irreducible_components`; returns shape ``(3,) + delta.shape``."""
    f_ground = HalfInteger.of(f_ground)
    delta = np.asarray(delta_ref_mhz, dtype=float)
    weights = rank_weights(f_ground)
    sign = -1.0 if f_ground.twice_value % 2 else 1.0
    out = np.zeros((3,) + delta.shape)
    for f_prime in scheme.coupled_levels(f_ground):
        df = (f_prime.twice_value - f_ground.twice_value) // 2
        lf = line_factor(scheme, delta - scheme.offset(f_prime), f_ground, f_prime)
        for k in range(3):
            out[k] += sign * float(weights[k][df]) * lf
    return out


def irreducible_components(scheme: LevelScheme, delta_ref_mhz: float, f_ground=1) -> PolarizabilityComponents:
    """Rank-0/1/2 polarizability at a detuning from the scheme's reference transition."""
    a0, a1, a2 = components_array(scheme, float(delta_ref_mhz), f_ground)
    return PolarizabilityComponents(float(a0), float(a1), float(a2))


def alpha0_si(scheme: LevelScheme, constants: PhysicalConstants = PhysicalConstants()) -> float:
    """The unit alpha_0 = 3 eps0 hbar Gamma lambda^3 / (8 pi^2) in SI (C m^2 / V), Gamma in rad/s."""
    gamma = 2 * math.pi * scheme.gamma_mhz * 1e6
    lam = scheme.lambda_nm * 1e-9
    return 3 * constants.epsilon0 * constants.hbar * gamma * lam**3 / (8 * math.pi**2)


def absorption_flag(scheme: LevelScheme, delta_ref_mhz, f_ground=1):
    """True where the probe is within 10 Gamma of a dipole-allowed transition."""
    delta = np.asarray(delta_ref_mhz, dtype=float)
    window = ABSORPTION_WINDOW_GAMMAS * scheme.gamma_mhz
    flag = np.zeros(delta.shape, dtype=bool)
    for f_prime in scheme.coupled_levels(f_ground):
        flag |= np.abs(delta - scheme.offset(f_prime)) <= window
    return bool(flag) if flag.ndim == 0 else flag


# --- scans ------------------------------------------------------------------


@dataclass(frozen=True)
class ScanRow:
    delta_ref_mhz: float
    components: PolarizabilityComponents
    ratio_1_over_2: Optional[float]
    absorption_flag: bool


def _check_range(lo: float, hi: float):
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise InvalidRange(f"need min < max, got [{lo}, {hi}]")


def scan_grid(delta_min: float, delta_max: float, step: float) -> np.ndarray:
    _check_range(delta_min, delta_max)
    if not (step > 0 and math.isfinite(step)):
        raise InvalidRange(f"step must be positive, got {step}")
    n = int(math.floor((delta_max - delta_min) / step * (1 + 1e-12))) + 1
    return delta_min + step * np.arange(n)


def scan(scheme: LevelScheme, delta_min: float, delta_max: float, step: float) -> list[ScanRow]:
    """Sample the components on a uniform grid from ``delta_min`` up to ``delta_max``."""
    grid = scan_grid(delta_min, delta_max, step)
    comps = components_array(scheme, grid)
    flags = absorption_flag(scheme, grid)
    rows = []
    for i, d in enumerate(grid):
        c = PolarizabilityComponents(*(float(x) for x in comps[:, i]))
        rows.append(ScanRow(float(d), c, c.ratio_1_over_2, bool(flags[i])))
    return rows


# --- magic detunings ----------------------------------------------------------


class Condition(enum.Enum):
    RANK1_EQUALS_RANK2 = "rank1-eq-rank2"
    RANK1_EQUALS_MINUS_RANK2 = "rank1-eq-minus-rank2"
    RANK1_ZERO = "rank1-zero"
    RANK2_ZERO = "rank2-zero"

    def residual(self, alpha1, alpha2):
        if self is Condition.RANK1_EQUALS_RANK2:
            return alpha1 - alpha2
        if self is Condition.RANK1_EQUALS_MINUS_RANK2:
            return alpha1 + alpha2
        if self is Condition.RANK1_ZERO:
            return alpha1
        return alpha2


@dataclass(frozen=True)
class MagicDetuning:
    delta_ref_mhz: float
    condition: Condition
    absorption_flag: bool


def condition_residual(scheme: LevelScheme, condition: Condition, delta_ref_mhz):
    _, a1, a2 = components_array(scheme, delta_ref_mhz)
    r = condition.residual(a1, a2)
    return float(r) if np.ndim(r) == 0 else r


def find_magic_detunings(
    scheme: LevelScheme,
    condition: Condition,
    search_min: float,
    search_max: float,
    xtol_mhz: float = ROOT_XTOL_MHZ,
) -> list[MagicDetuning]:
    """
    Every detuning in ``[search_min, search_max]`` where ``condition`` holds.

    Sign changes of the residual are bracketed on a grid of step Gamma/10 or
    finer and each bracket is bisected down to ``xtol_mhz``. Roots close to a
    resonance are kept and carry ``absorption_flag=True``.
    """
    condition = Condition(condition)
    _check_range(search_min, search_max)
    n = max(1, math.ceil((search_max - search_min) / (scheme.gamma_mhz / 10)))
    grid = np.linspace(search_min, search_max, n + 1)
    res = condition_residual(scheme, condition, grid)

    def f(x):
        return condition_residual(scheme, condition, x)

    roots = []
    for i in range(n + 1):
        if res[i] == 0.0:
            roots.append(float(grid[i]))
        elif i < n and res[i] * res[i + 1] < 0:
            roots.append(scipy.optimize.bisect(f, grid[i], grid[i + 1], xtol=xtol_mhz, rtol=4 * np.finfo(float).eps))
    return [MagicDetuning(r, condition, absorption_flag(scheme, r)) for r in roots]


def asymptotic_ratio_slope(scheme: LevelScheme, window_ghz: tuple[float, float] = (50.0, 100.0), points: int = 501) -> float:
    """Least-squares slope of alpha1/alpha2 against detuning over ``window_ghz``, in GHz^-1."""
    lo, hi = window_ghz
    _check_range(lo, hi)
    d_ghz = np.linspace(lo, hi, points)
    _, a1, a2 = components_array(scheme, d_ghz * 1e3)
    slope, _ = np.polyfit(d_ghz, a1 / a2, 1)
    return float(slope)
