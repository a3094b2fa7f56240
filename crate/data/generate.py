"""Regenerate the representative gait-cycle tables in this directory.

The curves are smooth interpolants through keypoints read off published
normative adult walking averages (natural cadence), scaled to a 75 kg
subject. They are representative shapes, not a measured dataset.

    python3 data/generate.py
"""
import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

MASS_KG = 75.0
PCT = np.linspace(0.0, 100.0, 101)

# ankle: dorsiflexion positive (deg); plantarflexor moment positive (N.m/kg)
ANKLE_ANGLE = [
    (0, 0.0), (6, -5.5), (12, -2.0), (20, 3.0), (30, 6.5), (40, 9.5),
    (47, 10.5), (52, 9.0), (57, 3.0), (62, -8.0), (66, -17.0), (70, -15.0),
    (76, -8.0), (82, -2.0), (88, 1.0), (94, 1.0), (100, 0.0),
]
ANKLE_MOMENT = [
    (0, 0.0), (3, -0.12), (7, -0.05), (12, 0.15), (20, 0.45), (30, 0.75),
    (40, 1.05), (46, 1.40), (50, 1.55), (54, 1.35), (58, 0.80), (62, 0.18),
    (66, 0.02), (70, 0.0), (100, 0.0),
]

# knee: flexion positive (deg); extensor moment positive (N.m/kg)
KNEE_ANGLE = [
    (0, 4.0), (5, 12.0), (12, 18.0), (16, 18.5), (25, 12.0), (35, 6.0),
    (40, 5.0), (45, 6.0), (52, 12.0), (57, 22.0), (62, 35.0), (66, 45.0),
    (73, 60.0), (80, 55.0), (87, 35.0), (93, 12.0), (100, 4.0),
]
KNEE_MOMENT = [
    (0, -0.10), (4, 0.20), (10, 0.65), (14, 0.70), (20, 0.45), (27, 0.10),
    (33, -0.15), (40, -0.25), (45, -0.20), (50, 0.0), (55, 0.15), (60, 0.10),
    (63, 0.05), (70, -0.05), (80, -0.10), (88, -0.25), (94, -0.20), (100, -0.10),
]


def table(angle_pts, moment_pts, path):
    a = np.array(angle_pts)
    m = np.array(moment_pts)
    angle = CubicSpline(a[:, 0], np.radians(a[:, 1]), bc_type="periodic")
    moment = PchipInterpolator(m[:, 0], m[:, 1] * MASS_KG)
    theta = angle(PCT)
    # d(theta)/d(phase) with phase in cycle fractions and a 1 s cycle
    vel = angle(PCT, 1) * 100.0
    tau = moment(PCT)
    with open(path, "w") as f:
        f.write("pct,angle,velocity,torque\n")
        for row in zip(PCT, theta, vel, tau):
            f.write("%g,%.9f,%.9f,%.9f\n" % row)


if __name__ == "__main__":
    import os
    here = os.path.dirname(os.path.abspath(__file__))
    table(ANKLE_ANGLE, ANKLE_MOMENT, os.path.join(here, "ankle_representative.csv"))
    table(KNEE_ANGLE, KNEE_MOMENT, os.path.join(here, "knee_representative.csv"))
