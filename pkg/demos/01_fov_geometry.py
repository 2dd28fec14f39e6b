# Build pinhole camera models and inspect the field-of-view geometry that the
# rest of the stack is built on.  The four image corners define four rays; each
# adjacent pair of rays spans a visibility plane through the pinhole, and a 3-D
# point is visible exactly when its margin (the sine of its angle past the
# plane) is nonnegative for all four inward normals.
#
# Outputs:
#  - printed corner rays, plane normals and sample-point margins for a unit
#    camera and for the default 640x480 camera
#  - a numeric check that the cone margins agree with the pixel-rectangle test

import numpy as np

from fovsafe.camera import Intrinsics, camera_model, unit_camera

np.set_printoptions(precision=6, suppress=True)

# ---- A camera small enough to check by hand ----
# fx = fy = 1, principal point (1, 1), sensor 2 x 2: the corner rays are the
# diagonals of a unit cube, and every plane normal has the same elevation.
cam = unit_camera()
print("unit camera corner rays (rows are unit vectors):")
print(cam.lines)
print("\nunit camera inward plane normals:")
print(cam.normals)

# The optical axis is one unit of margin away from the side planes and
# 1/sqrt(2) from each: the margin is the sine of the angle to the plane.
axis = np.array([0.0, 0.0, 1.0])
print("\nmargins of the optical axis:", cam.margins(axis))

# ---- The default desk-scale camera ----
vga = camera_model(Intrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0), 640.0, 480.0)
print("\n640x480 camera plane normals:")
print(vga.normals)

# ---- Cone margins agree with the pixel test ----
# Project random points in front of the camera; whenever all four margins are
# positive the pixel lands inside the sensor rectangle, and vice versa.
rng = np.random.default_rng(0)
agree = 0
for _ in range(2000):
    p = rng.normal(size=3) * np.array([0.8, 0.6, 0.0]) + np.array([0.0, 0.0, 1.5])
    margins = vga.margins(p)
    u = vga.intrinsics.fx * p[0] / p[2] + vga.intrinsics.cx
    v = vga.intrinsics.fy * p[1] / p[2] + vga.intrinsics.cy
    in_cone = margins.min() >= 0.0
    in_rect = (0.0 <= u <= vga.width) and (0.0 <= v <= vga.length)
    agree += in_cone == in_rect
print(f"\ncone test and pixel test agree on {agree}/2000 random points")
