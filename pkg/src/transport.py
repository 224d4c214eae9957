"""Inviscid transport: characteristics and the free evolution U(t, s).

The free evolution is semi-Lagrangian. Every collocation node is traced
backward along the flow from t to s, the initial field is summed there as a
trigonometric series, and the samples are projected back onto the truncation.
"""

from __future__ import annotations

import logging
import math
from typing import Iterator

import numpy as np

from .flows import FlowSpec
from .models import CharacteristicPath
from .spectral import (
    SpectralField,
    collocation_resolution,
    evaluate_lattice,
    grid_coordinates,
    grid_to_lattice,
)

logger = logging.getLogger("relaxlab.transport")


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def _segments(flow: FlowSpec, t0: float, t1: float) -> list[tuple[float, float]]:
    """Split [t0, t1] (either orientation) at the flow's switch times."""
    marks = [t0, *flow.breakpoints(t0, t1), t1]
    return [(a, b) for a, b in zip(marks, marks[1:]) if a != b]


def _rk4_steps(
    flow: FlowSpec, points: np.ndarray, a: float, b: float, dt: float
) -> Iterator[tuple[float, np.ndarray]]:
    """Classical RK4 over one switch-free segment, yielding (time, points)."""
    n_steps = max(1, math.ceil(abs(b - a) / dt - 1e-9))
    h = (b - a) / n_steps
    piece = 0.5 * (a + b)

    def rhs(x: np.ndarray, t: float) -> np.ndarray:
        u1, u2 = flow.velocity(x[..., 0], x[..., 1], t, piece)
        return np.stack([u1, u2], axis=-1)

    x = points
    for i in range(n_steps):
        t = a + i * h
        k1 = rhs(x, t)
        k2 = rhs(x + 0.5 * h * k1, t + 0.5 * h)
        k3 = rhs(x + 0.5 * h * k2, t + 0.5 * h)
        k4 = rhs(x + h * k3, t + h)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        yield (b if i == n_steps - 1 else t + h), x


def flow_map(
    flow: FlowSpec, points: np.ndarray, t0: float, t1: float, dt: float
) -> np.ndarray:
    """Positions at t1 of the characteristics through *points* at t0, unwrapped.

    t1 < t0 integrates the time-reversed system. Steps never straddle a
    switch time of the flow.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(points, dtype=float)
    for a, b in _segments(flow, t0, t1):
        for _, x in _rk4_steps(flow, x, a, b, dt):
            pass
    return x


def trace(flow: FlowSpec, x0, t0: float, t1: float, dt: float) -> CharacteristicPath:
    """Sample the characteristic through x0 at t0 up to t1 >= t0."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t1 < t0:
        raise ValueError(f"trace runs forward in time, got t0={t0} > t1={t1}")
    x = np.asarray(x0, dtype=float).reshape(2)
    times = [t0]
    points = [x.copy()]
    for a, b in _segments(flow, t0, t1):
        for t, x in _rk4_steps(flow, x, a, b, dt):
            times.append(t)
            points.append(x)
    wrapped = np.mod(np.array(points), 1.0)
    return CharacteristicPath(np.array(times), wrapped, dt, flow.kind)


# ---------------------------------------------------------------------------
# Free evolution
# ---------------------------------------------------------------------------

def backward_nodes(
    flow: FlowSpec, s: float, t: float, dt: float, resolution: int
) -> tuple[np.ndarray, np.ndarray]:
    """Foot points at time s of the characteristics reaching each node at time t."""
    x1, x2 = grid_coordinates(resolution)
    nodes = np.stack([x1, x2], axis=-1)
    feet = flow_map(flow, nodes, t, s, dt)
    return feet[..., 0], feet[..., 1]


def free_evolve(
    flow: FlowSpec,
    f: SpectralField,
    s: float,
    t: float,
    dt: float,
    resolution: int | None = None,
) -> SpectralField:
    """U(t, s) f: transport f from time s to time t without diffusion."""
    if s == t:
        return f
    resolution = resolution or collocation_resolution(f.n_trunc)
    y1, y2 = backward_nodes(flow, s, t, dt, resolution)
    values = evaluate_lattice(f.coeffs, y1, y2).real
    coeffs = grid_to_lattice(values, f.n_trunc)
    return SpectralField.from_lattice(f.n_trunc, coeffs, mean_zero=f.mean_zero)


def period_reduce(s: float, t: float, p: float) -> tuple[float, float]:
    """Shift (s, t) by a whole number of periods so that s lies in [0, p)."""
    if p <= 0.0:
        raise ValueError(f"period must be positive, got {p}")
    shift = p * math.floor(s / p)
    return s - shift, t - shift
