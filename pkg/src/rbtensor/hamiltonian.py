"""
Effective spin-polarization coupling H = a S_z J_z + b (S_x J_x + S_y J_y).

The coefficients are the rank-1 and rank-2 polarizabilities at the probe
detuning, rescaled by a common positive factor so that the larger of the two
has magnitude one. The physical prefactor (2 g alpha_0 / hbar times the pulse
duration) lives in the dimensionless coupling ``kappa`` of the dynamics
module; ``scale`` records the rescaling so the absolute values can be
recovered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .atomic_data import LevelScheme
from .polarizability import irreducible_components


@dataclass(frozen=True)
class HamiltonianCoefficients:
    """
    Coefficients of ``S_z J_z`` (``a``) and ``S_x J_x + S_y J_y`` (``b``).

    ``scale`` is the common positive factor dividing the raw polarizabilities
    (alpha_0 * MHz^-1), so ``a * scale == alpha1_c``. ``scalar`` is the
    coefficient of the dropped ``S_0 J_0`` global shift, on the same scale.
    """

    a: float
    b: float
    scale: float = 1.0
    scalar: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.a, self.b, self.scale, self.scalar)):
            raise ValueError("Hamiltonian coefficients must be finite")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def field_weights(self) -> np.ndarray:
        """Diagonal (b, b, a) coupling the two vectors."""
        return np.array([self.b, self.b, self.a])


@dataclass(frozen=True)
class ClassicalVectors:
    """Mean Stokes vector ``S`` and pseudo-spin ``J``."""

    S: np.ndarray = field(default_factory=lambda: np.zeros(3))
    J: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("S", "J"):
            v = np.array(getattr(self, name), dtype=float)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite 3-vector")
            v.flags.writeable = False
            object.__setattr__(self, name, v)


def coefficients_at(scheme: LevelScheme, delta_ref_mhz: float) -> HamiltonianCoefficients:
    """
    Coupling coefficients at a probe detuning from the reference transition.

    ``(a, b)`` are proportional to ``(alpha1_c, alpha2_c)``; the global
    ``S_0 J_0`` term ``(2/3) alpha0 + (1/3) alpha2`` is reported as
    ``scalar`` but plays no part in the dynamics.
    """
    pc = irreducible_components(scheme, delta_ref_mhz)
    scale = max(abs(pc.alpha1_c), abs(pc.alpha2_c))
    if scale == 0.0:
        scale = 1.0
    scalar = (2 * pc.alpha0_c + pc.alpha2_c) / 3
    return HamiltonianCoefficients(pc.alpha1_c / scale, pc.alpha2_c / scale, scale, scalar / scale)


def mean_field_energy(c: HamiltonianCoefficients, v: ClassicalVectors) -> float:
    return float(np.dot(v.S * c.field_weights, v.J))


def _energy_batch(c: HamiltonianCoefficients, S: np.ndarray, J: np.ndarray) -> np.ndarray:
    return np.einsum("ni,i,ni->n", S, c.field_weights, J)


# (J_x, J_y, J_z) -> (-J_x, J_y, -J_z) and (S_x, S_y, S_z) -> (S_x, -S_y, -S_z)
BAR_J = np.array([-1.0, 1.0, -1.0])
BAR_S = np.array([1.0, -1.0, -1.0])


def check_rotation_symmetry(
    c: HamiltonianCoefficients,
    axis,
    trials: int = 1000,
    barred: bool = False,
    seed: int = 0,
) -> float:
    """
    Largest energy change under simultaneous rotation of ``S`` and ``J``.

    Draws ``trials`` random pairs of vectors and rotation angles about
    ``axis``, rotates both vectors and returns ``max |E_rot - E| / max(|E|, 1)``.
    With ``barred=True`` the rotation acts on the barred variables
    ``(-J_x, J_y, -J_z)`` and ``(S_x, -S_y, -S_z)`` instead, which is the
    frame in which an ``a = -b`` coupling is fully isotropic.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    rng = np.random.default_rng(seed)
    S = rng.normal(size=(trials, 3))
    J = rng.normal(size=(trials, 3))
    angles = rng.uniform(-np.pi, np.pi, size=trials)
    rot = Rotation.from_rotvec(angles[:, None] * axis)

    if barred:
        S_rot = rot.apply(S * BAR_S) * BAR_S
        J_rot = rot.apply(J * BAR_J) * BAR_J
    else:
        S_rot, J_rot = rot.apply(S), rot.apply(J)
    e0 = _energy_batch(c, S, J)
    e1 = _energy_batch(c, S_rot, J_rot)
    return float(np.max(np.abs(e1 - e0) / np.maximum(np.abs(e0), 1.0)))


def barred_dot_residual(c: HamiltonianCoefficients, trials: int = 1000, seed: int = 0) -> float:
    """
    How far the energy is from ``a * (S_bar . J_bar)``.

    Zero (to rounding) exactly when ``a = -b``.
    """
    rng = np.random.default_rng(seed)
    S = rng.normal(size=(trials, 3))
    J = rng.normal(size=(trials, 3))
    e = _energy_batch(c, S, J)
    dot = c.a * np.einsum("ni,ni->n", S * BAR_S, J * BAR_J)
    return float(np.max(np.abs(e - dot) / np.maximum(np.abs(e), 1.0)))


def symmetry_class(c: HamiltonianCoefficients, rtol: float = 1e-3) -> str:
    """Name the rotation group that leaves the coupling invariant."""
    a, b = c.a, c.b
    tol = rtol * max(abs(a), abs(b), 1e-300)
    if abs(a - b) <= tol:
        return "full rotation (a = b)"
    if abs(a + b) <= tol:
        return "full rotation in barred variables (a = -b)"
    if abs(a) <= tol:
        return "rotations about z, S_xJ_x + S_yJ_y only (a = 0)"
    if abs(b) <= tol:
        return "rotations about z, S_zJ_z only (b = 0)"
    return "rotations about z"
