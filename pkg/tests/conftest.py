import numpy as np
import pytest

from uncpool import SurveyData


def make_dixie(cdc_se_factor: float) -> SurveyData:
    """Three-survey Dixie County estimates; CDC SE is a multiple of the HS SE."""
    se = np.array([0.014, 0.028, 0.028 * cdc_se_factor])
    return SurveyData(
        labels=("SAHIE", "HS", "CDC"),
        y_hat=np.array([0.254, 0.361, 0.359]),
        v=se ** 2,
    )


def make_orange(sahie_se: float) -> SurveyData:
    """Three-survey Orange County estimates with a widened SAHIE SE."""
    se = np.array([sahie_se, 0.018, 0.009])
    return SurveyData(
        labels=("SAHIE", "HS", "CDC"),
        y_hat=np.array([0.294, 0.257, 0.179]),
        v=se ** 2,
    )


@pytest.fixture
def dixie_panel1() -> SurveyData:
    return make_dixie(0.5)
