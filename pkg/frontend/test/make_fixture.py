"""Writes the small trajectory document the UI tests replay."""

import json
import sys

import numpy as np

from demotraj import spline

kv = spline.make_clamped_knots(6, 4)
P = np.column_stack([np.linspace(0.0, 0.7, 6), np.linspace(0.15, -0.35, 6)])
P[1] = P[0]
P[-2] = P[-1]
traj = spline.TimedTrajectory(spline.BSplineCurve(P, kv), 0.5)
doc = json.loads(spline.trajectory_to_json(traj))
doc["tau"] = [0.0, 0.35, 0.7, 1.0]
doc["tolerances"] = {"eps_p": [[0.02, 0.02, 0.02]] * 4, "eps_theta": [0.1] * 4}
doc["verification"] = {}
with open(sys.argv[1], "w") as f:
    json.dump(doc, f)
