import numpy as np
import pytest

from erps import states as S


@pytest.fixture
def rng():
    return np.random.default_rng(20260101)


def one_mode_library():
    """Every built-in single-mode state family, with a representative parameter."""
    grid = np.linspace(-8, 8, 2001)
    psi = np.pi ** -0.25 * np.exp(-0.5 * (grid - 0.5) ** 2 + 0.7j * grid)
    return {
        "vacuum": S.vacuum_state(1),
        "coherent": S.CoherentState(1 + 0.5j),
        "squeezed": S.SqueezedState(0.8),
        "fock1": S.FockState(1),
        "fock2": S.FockState(2),
        "cat": S.CatState(2.0),
        "odd_cat": S.CatState(1.5, relative_sign=-1),
        "grid": S.GridState1D(-8, 8, psi),
    }


def within_se(values, target, k=5.0):
    values = np.asarray(values, dtype=float)
    se = values.std(ddof=1) / np.sqrt(values.size)
    return abs(values.mean() - target) <= k * se, values.mean(), se
