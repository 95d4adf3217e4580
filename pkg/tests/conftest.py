"""Shared fixtures and hypothesis configuration."""

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "exobench",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("exobench")


@pytest.fixture(scope="session")
def golden_cohort():
    from exobench.outcomes import golden

    return golden.golden_cohort()


@pytest.fixture(scope="session")
def separable_classifier():
    from exobench import intent, signals
    from exobench.subject import preset_subject

    subject = preset_subject("separable", seed=0)
    script = [(label, 4.0) for label in intent.CLASS_ORDER]
    trace = signals.gen_emg_trace(subject.emg_profile("screen:train"), script)
    return intent.train_classifier(intent.labeled_windows(trace))
