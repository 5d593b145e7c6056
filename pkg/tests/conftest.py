import numpy as np
import pytest

import fpt


@pytest.fixture(scope="session")
def ou():
    return fpt.builtin("ou")


@pytest.fixture(scope="session")
def dry_friction():
    return fpt.builtin("dry_friction", mu=1.0)


@pytest.fixture(scope="session")
def tanh2():
    # A(y) = -2 tanh y, psi = sech^2(y)/2
    return fpt.builtin("tanh", alpha=2.0, gamma=1.0)


@pytest.fixture(scope="session")
def abm():
    return fpt.builtin("abm", mu=1.0)


@pytest.fixture(scope="session")
def ou_table6(ou):
    ff, im = ou
    grid = fpt.HGrid(Z=-10.0, step=1 / 32, z_max=3.0)
    return fpt.build_table(ff, im, grid, r_max=6)


@pytest.fixture(scope="session")
def ou_phi_over_phi():
    """Closed-form h_1 for the OU field, Phi/phi, as an independent oracle."""
    from scipy.special import erfcx

    def h1(z):
        z = np.asarray(z, float)
        return np.sqrt(np.pi / 2.0) * erfcx(-z / np.sqrt(2.0))

    return h1
