"""
The correlation filter by itself
================================

Initialize the filter on one frame, localize on shifted copies, and
watch the response peak fall apart when the target disappears.
"""

import numpy as np

from fusetrack.frames import Frame
from fusetrack.geometry import BBox
from fusetrack.kcf import KcfParams, kcf_init, kcf_locate, kcf_update

rng = np.random.default_rng(0)

# A textured world: random noise makes every patch distinctive, so the
# filter has something to latch onto.
pixels = rng.integers(0, 256, size=(120, 160, 3), dtype=np.uint8)
frame = Frame(pixels)

# Train on a 24x24 box. The model stores FFT-domain coefficients for a
# window 2.5x the target size, resampled to a fixed template grid.
box = BBox(60, 48, 24, 24)
model = kcf_init(frame, box, KcfParams())
ww, wh = model.window_size
th, tw = model.learned_template.shape
print(f"window {ww:g}x{wh:g} px, template {tw}x{th} cells")

# Localizing on the training frame finds the training box exactly.
found, peak = kcf_locate(model, frame)
print(f"same frame:   box ({found.x:g},{found.y:g}) peak {peak:.3f}")

# Shift the whole world 5 px right and 3 px down; the filter follows.
shifted = Frame(np.roll(pixels, (3, 5), axis=(0, 1)))
found, peak = kcf_locate(model, shifted)
print(f"shifted +5+3: box ({found.x:g},{found.y:g}) peak {peak:.3f}")

# Update blends a small fraction of the new appearance into the model;
# functional style: the old model is untouched, a new one is returned.
model = kcf_update(model, shifted, found)

# Replace the world with a flat color: the response peak collapses,
# which is exactly the signal the fusion pipeline uses to detect that
# the filter has lost its target.
blank = Frame(np.full_like(pixels, 90))
_, peak = kcf_locate(model, blank)
print(f"blank frame:  peak {peak:.3f}  (below the usual 0.25 floor)")
