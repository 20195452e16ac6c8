"""Sampling on spheres and tori, and maximum-modulus search.

The sphere ``S(r) = {z in C^m : ||z|| = r}`` carries the unitarily invariant
probability measure, sampled by normalising standard complex Gaussian
vectors.  Maximum moduli are found by multi-start Riemannian gradient ascent
of ``log|f|``; the gradient comes for free from the evaluation kernel as the
Euler ratios ``z_j f_j / f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from .series import PowerSeries, UntrustedRadiusError, is_trusted, log_abs_and_euler

DEFAULT_RESTARTS = 32
STEP_TOL = 1e-7
MAX_ITER = 400


@dataclass(frozen=True, eq=False)
class SphereSample:
    points: np.ndarray
    radius: float
    seed: int

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class TorusPoint:
    phases: Tuple[float, ...]
    radius: float

    @property
    def point(self) -> np.ndarray:
        return self.radius * np.exp(1j * np.asarray(self.phases))


def sample_sigma(m: int, r: float, count: int, seed: int) -> SphereSample:
    """``count`` i.i.d. points of ``S(r)`` in C^m under the invariant measure.

    Draws for ``count = n`` are a prefix of the draws for any larger count.
    """
    if m < 1 or r <= 0 or count < 1:
        raise ValueError("need m >= 1, r > 0, count >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, m, 2))
    z = g[..., 0] + 1j * g[..., 1]
    z *= r / np.linalg.norm(z, axis=1, keepdims=True)
    z.flags.writeable = False
    return SphereSample(z, float(r), int(seed))


def _check_trust(f: PowerSeries, r: float, sphere: bool, allow_untrusted: bool) -> None:
    if not allow_untrusted and not is_trusted(f, r, sphere=sphere):
        where = "sphere" if sphere else "torus"
        raise UntrustedRadiusError(
            f"{where} radius {r:g} is not trusted at truncation D={f.truncation_degree}")


def _ascend(objective, x0: np.ndarray, move):
    """Batched adaptive-step ascent.

    ``objective(x) -> (values, direction)`` with unit-norm ascent directions;
    ``move(x, d, s)`` takes a step of size ``s`` along ``d``.  Every start
    is advanced independently, so adding starts never changes earlier ones.
    """
    x = x0.copy()
    val, d = objective(x)
    step = np.full(len(x), 0.5)
    active = np.isfinite(val) & np.all(np.isfinite(d), axis=1)
    for _ in range(MAX_ITER):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        cand = move(x[idx], d[idx], step[idx])
        cval, cd = objective(cand)
        better = cval > val[idx]
        good = idx[better]
        x[good], val[good], d[good] = cand[better], cval[better], cd[better]
        step[good] = np.minimum(step[good] * 1.5, 1.0)
        step[idx[~better]] *= 0.25
        active &= step >= STEP_TOL
        active &= np.all(np.isfinite(d), axis=1)
    return x, val


def _sphere_objective(f: PowerSeries, r: float):
    def objective(z):
        logf, euler = log_abs_and_euler(f, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.conj(np.where(z != 0, euler / z, 0))
        g = np.nan_to_num(g, nan=0.0, posinf=0.0, neginf=0.0)
        # project onto the real tangent space of S(r)
        radial = np.real(np.sum(g * np.conj(z), axis=1)) / r ** 2
        g = g - radial[:, None] * z
        n = np.linalg.norm(g, axis=1)
        d = np.where(n[:, None] > 0, g / np.where(n > 0, n, 1.0)[:, None], 0)
        return logf, d
    return objective


def _sphere_move(r: float):
    def move(z, d, s):
        out = np.cos(s)[:, None] * z + np.sin(s)[:, None] * r * d
        return out * (r / np.linalg.norm(out, axis=1, keepdims=True))
    return move


@lru_cache(maxsize=512)
def _max_sphere_cached(f: PowerSeries, r: float, restarts: int, seed: int):
    starts = np.array(sample_sigma(f.dimension, r, restarts, seed).points)
    if f.is_constant():
        logf, _ = log_abs_and_euler(f, starts[:1])
        return float(logf[0]), starts[0]
    x, val = _ascend(_sphere_objective(f, r), starts, _sphere_move(r))
    best = int(np.argmax(val))
    pt = x[best].copy()
    pt.flags.writeable = False
    return float(val[best]), pt


def max_modulus_sphere(f: PowerSeries, r: float, restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                       allow_untrusted: bool = False) -> Tuple[float, np.ndarray]:
    """``(log M(r), argmax point)`` over the Euclidean sphere ``S(r)``.

    The value is a lower bound for the true maximum that is non-decreasing
    in ``restarts`` for a fixed ``seed``.
    """
    if r <= 0 or restarts < 1:
        raise ValueError("need r > 0 and restarts >= 1")
    _check_trust(f, r, True, allow_untrusted)
    return _max_sphere_cached(f, float(r), int(restarts), int(seed))


def _torus_objective(f: PowerSeries, r: float):
    def objective(theta):
        logf, euler = log_abs_and_euler(f, r * np.exp(1j * theta))
        g = -np.imag(euler)
        g = np.nan_to_num(g, nan=0.0, posinf=0.0, neginf=0.0)
        n = np.linalg.norm(g, axis=1)
        d = np.where(n[:, None] > 0, g / np.where(n > 0, n, 1.0)[:, None], 0.0)
        return logf, d
    return objective


def _torus_move(theta, d, s):
    return np.mod(theta + s[:, None] * d, 2 * np.pi)


@lru_cache(maxsize=512)
def _max_torus_cached(f: PowerSeries, r: float, restarts: int, seed: int):
    rng = np.random.default_rng(seed)
    starts = rng.uniform(0.0, 2 * np.pi, size=(restarts, f.dimension))
    if f.is_constant():
        logf, _ = log_abs_and_euler(f, r * np.exp(1j * starts[:1]))
        return float(logf[0]), TorusPoint(tuple(float(t) for t in starts[0]), r)
    x, val = _ascend(_torus_objective(f, r), starts, _torus_move)
    best = int(np.argmax(val))
    return float(val[best]), TorusPoint(tuple(float(t) for t in x[best]), r)


def max_modulus_torus(f: PowerSeries, r: float, restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                      allow_untrusted: bool = False) -> Tuple[float, TorusPoint]:
    """``(log max |f|, argmax)`` over the torus ``|z_1| = ... = |z_m| = r``."""
    if r <= 0 or restarts < 1:
        raise ValueError("need r > 0 and restarts >= 1")
    _check_trust(f, r, False, allow_untrusted)
    return _max_torus_cached(f, float(r), int(restarts), int(seed))


def random_unitary(m: int, seed: int) -> np.ndarray:
    """Haar-distributed unitary matrix (QR of a complex Gaussian, phase-fixed)."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
