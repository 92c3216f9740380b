import numpy as np
import pytest

from fatebands import EmptyArmError, FunctionalSample, TimeGrid, ValidationError


def test_uniform_grid():
    g = TimeGrid.uniform()
    assert len(g) == 43 and g.points[0] == 0 and g.points[-1] == 1
    assert g == TimeGrid(np.linspace(0, 1, 43))
    assert g != TimeGrid.uniform(42)


@pytest.mark.parametrize("points", [[0.0], [0.2, 0.1], [0.0, 0.5, 0.5], [0.0, 1.5], [-0.1, 0.5]])
def test_grid_rejects(points):
    with pytest.raises(ValidationError):
        TimeGrid(np.array(points))


def make(**kw):
    base = dict(grid=TimeGrid.uniform(3), Y=np.zeros((4, 3)), z=np.array([1, 0, 1, 0]),
                X=np.ones((4, 1)))
    base.update(kw)
    return FunctionalSample(**base)


def test_sample_properties():
    s = make(X=np.column_stack([np.ones(4), np.arange(4.0)]))
    assert (s.n, s.n1, s.n0, s.K) == (4, 2, 2, 1)
    X1, Y1 = s.arm(1)
    np.testing.assert_array_equal(X1[:, 1], [0.0, 2.0])
    with pytest.raises(ValueError):
        s.Y[0, 0] = 1.0  # read-only


def test_sample_rejects():
    with pytest.raises(EmptyArmError):
        make(z=np.ones(4, dtype=int))
    with pytest.raises(ValidationError):
        make(z=np.array([1, 0, 2, 0]))
    with pytest.raises(ValidationError):
        make(X=np.zeros((4, 1)))
    with pytest.raises(ValidationError):
        make(Y=np.zeros((4, 2)))
    with pytest.raises(ValidationError):
        make(Y=np.full((4, 3), np.nan))
