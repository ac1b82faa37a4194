import numpy as np
import pytest

import flatvalley as fv
from flatvalley.errors import InvalidParameterError


@pytest.fixture(scope="module")
def barrier():
    return fv.locate_barrier(fv.painleve(), window=0.25)


def test_barrier_location_and_height(barrier):
    # independent refinement puts the inner peak at 1/(2.25 pi) with height
    # exp(-2.25 pi) sin(pi/4); the scan must reproduce both
    x_expect = 1.0 / (2.25 * np.pi)
    h_expect = np.exp(-2.25 * np.pi) * np.sin(np.pi / 4.0)
    assert barrier.x_right == pytest.approx(x_expect, abs=1e-6)
    assert barrier.x_left == pytest.approx(-x_expect, abs=1e-6)
    assert barrier.height == pytest.approx(h_expect, rel=1e-9)


def test_sub_barrier_motions_stay_trapped(barrier):
    P = fv.painleve()
    rep = fv.trapped_motion_check(P, barrier, n_traj=4, t_end=200.0)
    assert rep.all_trapped
    for r in rep.records:
        assert r.energy < barrier.height
        assert r.max_excursion < barrier.x_right


def test_projection_trapping_for_2d_contrast(barrier):
    L = fv.laloy()
    rep = fv.projection_trap_check(L, barrier, n_traj=4)
    assert rep.all_trapped
    # the second coordinate is NOT trapped: it must have moved visibly more
    # than the first stays within
    assert max(r.companion_excursion for r in rep.records) > barrier.x_right


def test_barrier_requires_1d():
    with pytest.raises(InvalidParameterError):
        fv.locate_barrier(fv.laloy())


def test_projection_requires_2d(barrier):
    with pytest.raises(InvalidParameterError):
        fv.projection_trap_check(fv.painleve(), barrier)
