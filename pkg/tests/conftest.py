import numpy as np
import pytest

from kvbeam.api.experiment import ExperimentConfig
from kvbeam.engine import beam_galerkin as bg
from kvbeam.engine import controller_synthesis as cs


@pytest.fixture(scope="session")
def flagship_config() -> ExperimentConfig:
    return ExperimentConfig()


@pytest.fixture(scope="session")
def flagship_params(flagship_config) -> bg.BeamParameters:
    return flagship_config.beam_parameters()


@pytest.fixture(scope="session")
def design_plant(flagship_params) -> bg.GalerkinModel:
    return bg.assemble_first_order(flagship_params, 39)


@pytest.fixture(scope="session")
def sim_plant(flagship_params) -> bg.GalerkinModel:
    return bg.assemble_first_order(flagship_params, 69)


@pytest.fixture(scope="session")
def flagship_options(flagship_config) -> cs.SynthesisOptions:
    return flagship_config.synthesis_options()


@pytest.fixture(scope="session")
def flagship_design(design_plant, flagship_options):
    """(controller, report) of the q=10, r=4 design."""
    return cs.synthesize_regulator(design_plant, flagship_options)


@pytest.fixture(scope="session")
def low_gain_model() -> cs.InternalModel:
    return cs.build_internal_model([k * np.pi for k in range(6)])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
