"""Analytic field sources.

These complement filament assemblies: uniform bias fields, the ideal
Ioffe-Pritchard field (an exact vacuum solution), a linear quadrupole, and a
synthetic field whose magnitude is an exact 3D harmonic well.  Sources share
the interface ``field(points) -> (M, 3)`` and optionally provide analytic
``jacobian(points)``.  Assemblies and analytic sources can be summed with
:class:`CompositeField`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .field import evaluate


@dataclass(frozen=True)
class UniformField:
    """Spatially constant field B (T)."""

    B: tuple = (0.0, 0.0, 0.0)
    label: str = "bias"

    def field(self, points):
        pts = np.atleast_2d(points)
        return np.broadcast_to(np.asarray(self.B, dtype=float), pts.shape).copy()

    def jacobian(self, points):
        return np.zeros((len(np.atleast_2d(points)), 3, 3))


@dataclass(frozen=True)
class IoffePritchardField:
    """Ideal Ioffe-Pritchard field about ``center``.

    B = B0 z + b1 (x, -y, 0) + (b2/2) (-x z, -y z, z^2 - (x^2 + y^2)/2)

    with B0 (T), radial gradient b1 (T/m) and axial curvature b2 (T/m^2).
    Divergence- and curl-free everywhere.
    """

    B0: float
    gradient: float
    curvature: float = 0.0
    center: tuple = (0.0, 0.0, 0.0)
    label: str = "ioffe_pritchard"

    def field(self, points):
        p = np.atleast_2d(points) - np.asarray(self.center)
        x, y, z = p.T
        b1, b2 = self.gradient, self.curvature
        return np.stack([b1 * x - 0.5 * b2 * x * z,
                         -b1 * y - 0.5 * b2 * y * z,
                         self.B0 + 0.5 * b2 * (z * z - 0.5 * (x * x + y * y))], axis=1)

    def jacobian(self, points):
        p = np.atleast_2d(points) - np.asarray(self.center)
        x, y, z = p.T
        b1, b2 = self.gradient, self.curvature
        J = np.zeros((len(p), 3, 3))
        J[:, 0, 0] = b1 - 0.5 * b2 * z
        J[:, 0, 2] = -0.5 * b2 * x
        J[:, 1, 1] = -b1 - 0.5 * b2 * z
        J[:, 1, 2] = -0.5 * b2 * y
        J[:, 2, 0] = -0.5 * b2 * x
        J[:, 2, 1] = -0.5 * b2 * y
        J[:, 2, 2] = b2 * z
        return J


@dataclass(frozen=True)
class QuadrupoleField:
    """Spherical quadrupole B = b (x, y, -2 z) / 2 about ``center``; |B| = b rho/2 in-plane."""

    gradient: float
    center: tuple = (0.0, 0.0, 0.0)
    label: str = "quadrupole"

    def field(self, points):
        p = np.atleast_2d(points) - np.asarray(self.center)
        return 0.5 * self.gradient * p * np.array([1.0, 1.0, -2.0])

    def jacobian(self, points):
        n = len(np.atleast_2d(points))
        return np.broadcast_to(np.diag([0.5, 0.5, -1.0]) * self.gradient, (n, 3, 3)).copy()


@dataclass(frozen=True)
class HarmonicField:
    """Synthetic source whose magnitude is an exact harmonic well.

    B = (B0 + 1/2 sum_i c_i (x_i - center_i)^2) z_hat,

    with curvatures c_i (T/m^2).  Not a vacuum solution -- it is a test
    fixture for trap dynamics, where only |B| matters.  Use
    :meth:`for_frequencies` to obtain given oscillation frequencies.
    """

    B0: float
    curvatures: tuple
    center: tuple = (0.0, 0.0, 0.0)
    label: str = "harmonic"

    @classmethod
    def for_frequencies(cls, omegas: Sequence[float], B0: float, mass: float, mu: float,
                        center=(0.0, 0.0, 0.0), label: str = "harmonic") -> "HarmonicField":
        """Curvatures c_i = m w_i^2 / mu for a moment ``mu`` = mF gF muB (J/T)."""
        return cls(B0, tuple(float(mass * w * w / mu) for w in omegas), tuple(center), label)

    def field(self, points):
        p = np.atleast_2d(points) - np.asarray(self.center)
        out = np.zeros_like(p)
        out[:, 2] = self.B0 + 0.5 * (p * p) @ np.asarray(self.curvatures)
        return out

    def jacobian(self, points):
        p = np.atleast_2d(points) - np.asarray(self.center)
        J = np.zeros((len(p), 3, 3))
        J[:, 2, :] = p * np.asarray(self.curvatures)
        return J


class CompositeField:
    """Sum of sources with constant scale factors: B = sum_k s_k B_k."""

    def __init__(self, sources: Sequence, scales: Sequence[float] | None = None, label: str = "composite"):
        self.sources = tuple(sources)
        self.scales = tuple(1.0 for _ in self.sources) if scales is None else tuple(float(s) for s in scales)
        if len(self.scales) != len(self.sources):
            raise ValueError("one scale per source required")
        self.label = label

    def field(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros_like(pts)
        for src, s in zip(self.sources, self.scales):
            if s != 0.0:
                out += s * evaluate(src, pts)
        return out


def with_bias(source, bias) -> object:
    """``source`` plus a uniform bias (T); returns ``source`` unchanged for zero bias."""
    b = np.asarray(bias, dtype=float).reshape(3)
    if not np.any(b):
        return source
    return CompositeField([source, UniformField(tuple(b))], label=getattr(source, "label", "source") + "+bias")
