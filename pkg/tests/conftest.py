import numpy as np
import pytest

from cliqueopf_core.netcase import Bus, Line, PowerCase, generate_radial


def make_case(n, lines, c1, v_min=0.95, v_max=1.05, c2=None):
    c2 = [0.0] * n if c2 is None else c2
    buses = [Bus(id=i + 1, v_min=v_min, v_max=v_max, c1=float(c1[i]), c2=float(c2[i])) for i in range(n)]
    return PowerCase(buses=buses, lines=[Line(f, t, g, b) for f, t, g, b in lines])


@pytest.fixture
def line2():
    """2-bus line, y = 1, costs (1, -1)"""
    return make_case(2, [(1, 2, 1.0, 0.0)], [1.0, -1.0])


@pytest.fixture
def star3():
    """3-bus star centered at bus 3, y = j on both lines"""
    return make_case(3, [(1, 3, 0.0, 1.0), (2, 3, 0.0, 1.0)], [-2.0, -3.0, 4.0])


@pytest.fixture
def ring5():
    """Lines 1-2, 1-3, 2-4, 3-4, 4-5; the 4-cycle needs one fill edge"""
    lines = [(1, 2, 2.0, -6.0), (1, 3, 1.5, -4.0), (2, 4, 3.0, -7.0), (3, 4, 2.5, -5.0), (4, 5, 1.0, -3.0)]
    return make_case(5, lines, [5.0, -2.0, -3.0, -1.0, -4.0])


@pytest.fixture
def star_case():
    def factory(n, seed=0):
        return generate_radial(n, seed)
    return factory


@pytest.fixture
def radial_cases():
    return [generate_radial(6, seed, tree=True) for seed in range(5)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
