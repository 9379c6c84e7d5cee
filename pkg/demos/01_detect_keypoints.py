# %% [markdown]
# # DeGraF keypoints
#
# Every 3x3 window on a stride-9 grid contributes one point: the centroid of
# its intensities, or of the inverted intensities when that one carries more
# mass.  The result is a near-uniform grid that still snaps to local
# structure.

# %%
import time
from pathlib import Path

import numpy as np
from scipy import ndimage

from degraf_flow import DetectorParams, detect_grid, negative_centroid, positive_centroid
from degraf_flow.io import write_rgb, write_keypoints_csv

OUT = Path("demo_output")
OUT.mkdir(exist_ok=True)

# %% [markdown]
# A single window first.  The bright pixel pulls the positive centroid
# toward it; the inverted window has more mass, so it wins.

# %%
window = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 255.0], [0.0, 0.0, 0.0]])
pos, s_pos = positive_centroid(window)
neg, s_neg = negative_centroid(window)
print(f"positive ({pos.x:.3f}, {pos.y:.3f}) mass {s_pos:.0f}")
print(f"negative ({neg.x:.3f}, {neg.y:.3f}) mass {s_neg:.0f}")

# %% [markdown]
# Now a KITTI-sized frame of smoothed noise.

# %%
rng = np.random.default_rng(0)
frame = ndimage.gaussian_filter(rng.uniform(0, 255, (375, 1242)), 2.0)

t0 = time.perf_counter()
grid = detect_grid(frame, DetectorParams(window_w=3, window_h=3, step=9))
print(f"{len(grid)} points on a {grid.grid_shape} grid in {time.perf_counter() - t0:.3f} s")

# %% [markdown]
# Offsets from the window centers show how far each point moved.

# %%
centers_x = np.arange(grid.grid_shape[1]) * 9 + 1.0
centers_y = np.arange(grid.grid_shape[0]) * 9 + 1.0
cx, cy = np.meshgrid(centers_x, centers_y)
offset = grid.points - np.stack([cx.ravel(), cy.ravel()], axis=1)
print("mean |offset| (px):", np.abs(offset).mean(axis=0).round(3))

# %%
write_keypoints_csv(OUT / "keypoints.csv", grid.points)
overlay = np.repeat(np.clip(frame, 0, 255).astype(np.uint8)[..., None], 3, axis=2)
px, py = np.rint(grid.points).astype(int).T
overlay[py, px] = (255, 0, 0)
write_rgb(OUT / "keypoints_overlay.png", overlay)
print("wrote", OUT / "keypoints.csv", "and", OUT / "keypoints_overlay.png")
