import numpy as np
import pytest

from uvhedge import MarketSetup, PenaltyWeights, VanillaSpec, VolBand, vanilla_target


@pytest.fixture
def atm_call():
    return VanillaSpec("call", maturity=2.0, strike=1.0)


@pytest.fixture
def smooth_put_target():
    return vanilla_target(VanillaSpec("smooth-put", maturity=1.0, strike=0.9))


@pytest.fixture
def parity_put_target(atm_call):
    return vanilla_target(VanillaSpec("put", maturity=atm_call.maturity, strike=atm_call.strike))


@pytest.fixture
def weights():
    return PenaltyWeights(0.1, 0.1, 0.1, 0.1)


@pytest.fixture
def band():
    return VolBand(0.10, 0.35)


@pytest.fixture
def market(band):
    return MarketSetup(s0=1.0, sigma0=0.2, band=band)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
