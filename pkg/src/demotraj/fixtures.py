"""Bundled synthetic demonstration used by the tests and the repro pipeline.

A seed-pinned noisy reaching sweep on the 7-DoF model: slow (as hand-guided
demonstrations are), sampled at 10 Hz, with enough joint noise that the
non-causal jerk of the raw recording dwarfs the smoothed result.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import ingest, kin

REACH_SKELETON = np.array([
    [0.00, -0.50, 0.00, -2.10, 0.00, 1.80, 0.80],
    [0.11, -0.33, 0.03, -1.96, 0.03, 1.76, 0.86],
    [0.22, -0.16, 0.05, -1.82, 0.05, 1.73, 0.91],
    [0.33, 0.02, 0.03, -1.67, 0.03, 1.76, 0.97],
    [0.44, 0.20, 0.00, -1.52, 0.00, 1.80, 1.02],
])

DEMO_DURATION_S = 24.0
DEMO_NOISE_STD = 0.002
DEMO_RATE_HZ = 10.0
DEMO_SEED = 7

WAYPOINT_POS_THRESH = 0.01
WAYPOINT_ANG_THRESH = 0.1

# movement-primitive settings for the bundled baseline comparison: the softer
# conventional gain keeps the forcing magnitude (and with it the fit ripple)
# small on the sub-second smoothed motion, and the dense basis deliberately
# reproduces whatever the training data contains, noise included
DMP_ALPHA_Z = 25.0
DMP_BASIS = 200


def demo_spec(noise_std: float = DEMO_NOISE_STD, seed: int = DEMO_SEED) -> ingest.SynthSpec:
    return ingest.SynthSpec(
        skeleton=REACH_SKELETON,
        duration=DEMO_DURATION_S,
        noise_std=noise_std,
        rate_hz=DEMO_RATE_HZ,
        seed=seed,
        model_name="fr3",
    )


@lru_cache(maxsize=4)
def demo_model() -> kin.RobotModel:
    return kin.load_model("fr3")


@lru_cache(maxsize=4)
def noisy_demo() -> ingest.DemoRecording:
    return ingest.synth_demo(demo_spec())


@lru_cache(maxsize=4)
def clean_demo() -> ingest.DemoRecording:
    return ingest.synth_demo(demo_spec(noise_std=0.0))
