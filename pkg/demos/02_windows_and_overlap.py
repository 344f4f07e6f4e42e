"""Why overlapping windowed blocks reconstruct exactly.

Shows the two window families, the squared-window gain map, and the
reconstruction identity: an identity per-block filter returns the input to
within float32 rounding for any window/stride/size combination.
"""

import numpy as np

import mswiener as mw

# --- window tables -----------------------------------------------------------
rc = mw.make_window(mw.WindowSpec(mw.WindowKind.RAISED_COSINE, 8))
ga = mw.make_window(mw.WindowSpec(mw.WindowKind.GAUSSIAN, 8, alpha=0.3))
print("raised-cosine 8x8, center row:", np.array2string(rc.values[4], precision=3))
print("gaussian      8x8, center row:", np.array2string(ga.values[4], precision=3))
print(f"corner taper: raised-cosine {rc.values[0, 0]:.4f} vs gaussian {ga.values[0, 0]:.2e}")
print()

# --- the 2:1 half-cosine special case ---------------------------------------
# at half-block stride the squared raised-cosine windows tile to exactly 1,
# so overlap-add needs no normalization at all
window = mw.make_window(mw.WindowSpec(mw.WindowKind.RAISED_COSINE, 38))
plan = mw.make_plan((128, 128), 38, 2)
gain = mw.gain_map(window, plan, (128, 128))
print(f"half-cosine @ stride N/2: gain map deviation from 1 = "
      f"{float(np.max(np.abs(gain.data - 1.0))):.2e}")

# the Gaussian window does NOT have this property; the engine divides by the
# accumulated squared-window mask instead
window = mw.make_window(mw.WindowSpec(mw.WindowKind.GAUSSIAN, 38))
gain = mw.gain_map(window, plan, (128, 128))
print(f"gaussian    @ stride N/2: gain map spread = "
      f"[{float(gain.data.min()):.3f}, {float(gain.data.max()):.3f}] "
      f"-> normalization mask required")
print()

# --- reconstruction identity -------------------------------------------------
rng = np.random.default_rng(0)
img = mw.from_array(rng.uniform(size=(3, 128, 128)).astype(np.float32))
print("identity filter round trips (max abs error):")
for kind in mw.WindowKind:
    for denom in (2, 3, 4):
        window = mw.make_window(mw.WindowSpec(kind, 32))
        plan = mw.make_plan((128, 128), 32, denom)
        out = mw.run_single_scale(img, plan, window, mw.IdentityBlockFilter(window))
        err = float(np.max(np.abs(out.data - img.data)))
        print(f"  {kind.value:14s} stride 1/{denom}: {err:.2e}")
