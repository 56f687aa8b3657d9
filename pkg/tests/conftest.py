import numpy as np
import pytest

import survodds as so


@pytest.fixture(scope="session")
def s1():
    return so.builtin_scenario("s1")


@pytest.fixture(scope="session")
def s1_nuis(s1):
    return so.oracle_nuisances(s1.model, s1.censoring, s1.treatment)


@pytest.fixture(scope="session")
def s1_data(s1):
    rng = np.random.default_rng(1234)
    return so.generate_dataset(400, s1.model, s1.treatment, s1.censoring, rng)


@pytest.fixture(scope="session")
def grid600(s1):
    return so.make_grid(s1.model.tau, 600)


@pytest.fixture(scope="session")
def unit_model():
    # beta = log 2 with odds scale R(t, z) = t: every survival quantity has a
    # short closed form, so tests against it are exact.
    return so.OddsModel(beta=float(np.log(2.0)), odds=so.LogLogisticOdds(1.0, 1.0), tau=2.0)


@pytest.fixture(scope="session")
def z0():
    return np.array([0.0])
