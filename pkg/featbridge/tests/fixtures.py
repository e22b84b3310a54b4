"""Shared deterministic fixtures for the adapter tests.

The three-point fixture is the committed golden case: one 8x8 frame with a
known color pattern, identity pose, and three points placed so each lands on
a distinct pixel with agreeing depth.
"""

import numpy as np

from featbridge.projection import Frame

FX = FY = 8.0
CX = CY = 4.0


def three_point_fixture():
    rgb = np.zeros((8, 8, 3), dtype=np.uint8)
    rgb[:, :, 0] = np.arange(8, dtype=np.uint8)[None, :] * 30   # red ramp in u
    rgb[:, :, 1] = np.arange(8, dtype=np.uint8)[:, None] * 30   # green ramp in v
    rgb[:, :, 2] = 200
    depth = np.full((8, 8), 2.0)
    K = np.array([[FX, 0, CX], [0, FY, CY], [0, 0, 1.0]])
    pose = np.eye(4)
    frame = Frame(rgb=rgb, depth=depth, intrinsics=K, pose=pose)
    # points at depth 2 that project to pixel centers (u, v) in {1, 3, 6}
    points = np.array([
        [(1 - CX) / FX * 2.0, (3 - CY) / FY * 2.0, 2.0],
        [(3 - CX) / FX * 2.0, (6 - CY) / FY * 2.0, 2.0],
        [(6 - CX) / FX * 2.0, (1 - CY) / FY * 2.0, 2.0],
    ])
    colors = np.array([[10, 20, 30], [40, 50, 60], [70, 80, 90]],
                      dtype=np.uint8)
    instance_ids = np.array([0, 0, -1], dtype=np.int32)
    return frame, points, colors, instance_ids
