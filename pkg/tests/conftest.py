import numpy as np
import pytest

from drillcomm.channel import DrillStringSpec


# Geometry of the reference string: 10 pipes, 9 joints.
PIPE_LEN = 8.760
JOINT_LEN = 0.240
PIPE_AREA = 52.276e-4
JOINT_AREA = 248.186e-4
WAVE_SPEED = 5130.0
DENSITY = 7870.0


@pytest.fixture(scope="session")
def drill_spec():
    return DrillStringSpec.alternating(10, 9, PIPE_LEN, JOINT_LEN,
                                       PIPE_AREA, JOINT_AREA,
                                       WAVE_SPEED, DENSITY)


@pytest.fixture(scope="session")
def uniform_rod():
    return DrillStringSpec(segments=((12.5, 0.01),),
                           wave_speed=WAVE_SPEED, density=DENSITY)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
