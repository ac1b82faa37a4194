"""Stability-contrast demos: potentials whose equilibria are NOT unstable.

The oscillating-bump potentials (``painleve``, ``laloy``) have critical
points that are not minima, yet arbitrarily close to the origin the
potential rises to a positive barrier, so every low-energy motion stays
trapped.  These runs are the foil for the valley potentials, where no such
barrier exists and trajectories escape along the floor.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .dynamics import IntegratorOptions, PhaseState, integrate_newton
from .errors import InvalidParameterError

Array = np.ndarray


@dataclass(frozen=True)
class BarrierInfo:
    """A positive barrier bracketing the origin, found by grid scan."""

    x_left: float
    x_right: float
    height: float
    window: float
    n_grid: int


def locate_barrier(potential, window: float = 0.25, n_grid: int = 40001,
                   refine_iters: int = 80) -> BarrierInfo:
    """Scan U on [-window, window] and return the tallest barrier pair.

    The scan takes the global maximum of U on each side of the origin and
    golden-section refines it; the barrier height is the smaller of the two
    peaks, which is what bounds crossings in one dimension.
    """
    if potential.dim != 1:
        raise InvalidParameterError("barrier location is a 1-d diagnostic")
    if window <= 0:
        raise InvalidParameterError("window must be positive")
    xs = np.linspace(-window, window, n_grid)
    us = potential.value_many(xs[:, None])

    def refine(lo: float, hi: float) -> tuple:
        phi = 0.5 * (np.sqrt(5.0) - 1.0)
        a, b = lo, hi
        c, d = b - phi * (b - a), a + phi * (b - a)
        fc = potential.value(np.array([c]))
        fd = potential.value(np.array([d]))
        for _ in range(refine_iters):
            if fc < fd:
                a, c, fc = c, d, fd
                d = a + phi * (b - a)
                fd = potential.value(np.array([d]))
            else:
                b, d, fd = d, c, fc
                c = b - phi * (b - a)
                fc = potential.value(np.array([c]))
        x = 0.5 * (a + b)
        return x, potential.value(np.array([x]))

    side = {}
    for name, mask in (("left", xs < 0), ("right", xs > 0)):
        sub = np.where(mask)[0]
        i = sub[np.argmax(us[sub])]
        lo = xs[max(i - 1, 0)]
        hi = xs[min(i + 1, n_grid - 1)]
        side[name] = refine(lo, hi)
    height = min(side["left"][1], side["right"][1])
    if height <= 0:
        raise InvalidParameterError(
            f"no positive barrier inside the window {window}: peak height {height:g}")
    return BarrierInfo(x_left=side["left"][0], x_right=side["right"][0],
                       height=float(height), window=window, n_grid=n_grid)


@dataclass(eq=False)
class TrapRecord:
    x0: float
    v0: float
    energy: float
    max_excursion: float
    trapped: bool
    companion_excursion: float = 0.0  # |y| reached by the untrapped coordinate, 2-d only


@dataclass(eq=False)
class TrapReport:
    """Verdicts for a batch of sub-barrier motions."""

    barrier: BarrierInfo
    t_end: float
    records: List[TrapRecord]

    @property
    def all_trapped(self) -> bool:
        return all(r.trapped for r in self.records)


def trapped_motion_check(potential, barrier: BarrierInfo, n_traj: int = 10,
                         t_end: float = 1e3, energy_fraction: float = 0.5,
                         opts: IntegratorOptions = IntegratorOptions(n_out=1001)) -> TrapReport:
    """Launch sub-barrier motions and verify none crosses the barrier.

    Energy conservation keeps a motion with E < barrier height inside the
    barrier interval; the check integrates to ``t_end`` and compares the
    recorded excursion against the barrier location.
    """
    if not (0.0 < energy_fraction < 1.0):
        raise InvalidParameterError("energy_fraction must lie in (0, 1)")
    inner = 0.6 * min(-barrier.x_left, barrier.x_right)
    x0s = np.linspace(-inner, inner, n_traj)
    target = energy_fraction * barrier.height
    records = []
    for x0 in x0s:
        u0 = potential.value(np.array([x0]))
        v0 = float(np.sqrt(max(0.0, 2.0 * (target - u0))))
        traj = integrate_newton(potential, PhaseState([x0], [v0]), t_end, opts)
        exc = float(np.abs(traj.x_int).max())
        records.append(TrapRecord(
            x0=float(x0), v0=v0, energy=0.5 * v0 * v0 + u0, max_excursion=exc,
            trapped=bool(barrier.x_left < -exc and exc < barrier.x_right)))
    return TrapReport(barrier=barrier, t_end=t_end, records=records)


def projection_trap_check(potential, barrier: BarrierInfo, n_traj: int = 6,
                          t_end: float = 12.0, energy_fraction: float = 0.5,
                          opts: IntegratorOptions = IntegratorOptions(n_out=1001)) -> TrapReport:
    """Trapping of the first coordinate of the 2-d contrast potential.

    The x dynamics decouples from y, so the x projection carries its own
    conserved energy and stays behind the 1-d barrier.  The y coordinate is
    repelled from 0 (the potential falls off quadratically that way) and
    grows exponentially; the default horizon keeps it finite while the
    contrast is made, and its excursion is recorded alongside.
    """
    if potential.dim != 2:
        raise InvalidParameterError("projection check expects a 2-d potential")
    inner = 0.6 * min(-barrier.x_left, barrier.x_right)
    x0s = np.linspace(-inner, inner, n_traj)
    target = energy_fraction * barrier.height
    records = []
    for x0 in x0s:
        ux = potential.value(np.array([x0, 0.0]))  # U(x0, 0) is the 1-d bump alone
        vx0 = float(np.sqrt(max(0.0, 2.0 * (target - ux))))
        traj = integrate_newton(potential, PhaseState([x0, 0.0], [vx0, 1e-3]), t_end, opts)
        exc = float(np.abs(traj.x_int[:, 0]).max())
        records.append(TrapRecord(
            x0=float(x0), v0=vx0, energy=0.5 * vx0 * vx0 + ux, max_excursion=exc,
            trapped=bool(barrier.x_left < -exc and exc < barrier.x_right),
            companion_excursion=float(np.abs(traj.x_int[:, 1]).max())))
    return TrapReport(barrier=barrier, t_end=t_end, records=records)
