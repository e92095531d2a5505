from __future__ import annotations

import numpy as np
import pytest

from causalproc import (
    make_af,
    make_af_deterministic,
    make_bw_extension,
    make_reduced_switch,
    make_switch,
)


@pytest.fixture(scope="session")
def switch_up():
    return make_switch(2)


@pytest.fixture(scope="session")
def reduced_switch():
    return make_reduced_switch(2)


@pytest.fixture(scope="session")
def af_process():
    return make_af()


@pytest.fixture(scope="session")
def af_dp():
    return make_af_deterministic()


@pytest.fixture(scope="session")
def bw_up():
    return make_bw_extension()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260816)
