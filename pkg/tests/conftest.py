import numpy as np
import pytest
from helpers import random_points

from fgwlabels.config import Scenario
from fgwlabels.synth import generate
from fgwlabels.types import FeatureMatrix, GroundTruth, PairProblem


@pytest.fixture
def rigid_pair() -> tuple[PairProblem, GroundTruth]:
    return generate(Scenario(kind="rigid", n_points=16, seed=3))


@pytest.fixture
def identity_problem() -> PairProblem:
    """Identical clouds with one-hot features."""
    pts = random_points(11, 8)
    feats = FeatureMatrix(np.eye(8))
    return PairProblem.uniform(feats, feats, pts, pts)
