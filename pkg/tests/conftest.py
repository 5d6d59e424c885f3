import numpy as np
import pytest

from supertrack.signals import (
    ReferenceSet,
    SinusoidConfig,
    SwitchParams,
    make_reference_set,
)


@pytest.fixture
def default_config():
    return SinusoidConfig()


@pytest.fixture
def default_set(default_config):
    return make_reference_set(default_config, seed=7)


@pytest.fixture
def default_switch_params():
    return SwitchParams()


def zero_phase_set(config: SinusoidConfig) -> ReferenceSet:
    """All-zero phases: the three references coincide."""
    return ReferenceSet(config=config, phases=np.zeros((3, len(config.multiples))))


def single_component_config() -> SinusoidConfig:
    """One sinusoid at 0.15 Hz with unit amplitude and no scaling."""
    return SinusoidConfig(multiples=(6,), amplitudes=(1.0,), amplitude_scale=1.0)
