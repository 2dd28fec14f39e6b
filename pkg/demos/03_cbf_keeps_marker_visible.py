# Reproduce the core safety behavior on the adversarial scenario: a scripted
# operator drags the marker toward an image border.  With the barrier filter
# off the marker leaves the image and tracking is lost; with the filter on the
# commanded twist is projected onto the safe set each step and the minimum
# corner margin rides just above zero for the whole push.
#
# Outputs:
#  - printed outcome of both runs (detection lost vs completed)
#  - demos/03_cbf_keeps_marker_visible.png (min barrier value over time)

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fovsafe.sim import adversarial_scenario, run_scenario

# ---- The same scripted push, with and without the filter ----
# robust_mode full_theta additionally immunizes the margins against the
# injected 2 cm / 5 degree calibration error, so the *physical* barriers stay
# nonnegative, not just the believed ones.
unsafe = run_scenario(adversarial_scenario(cbf_enabled=False))
safe = run_scenario(adversarial_scenario(robust_mode="full_theta"))

print(f"filter off: status = {unsafe.status}", end="")
if unsafe.detection_lost_time is not None:
    print(f" (marker left the image at t = {unsafe.detection_lost_time:.2f} s)")
print(f"filter on:  status = {safe.status}")
print(f"filter on:  worst physical corner margin = {safe.true_h.min():.4f}")

# ---- Plot the minimum corner margin for both runs ----
def min_margin(result):
    t = np.array([r.t for r in result.records])
    h = np.array([r.h_min for r in result.records])
    return t, h

fig, ax = plt.subplots(figsize=(7, 4))
t_u, h_u = min_margin(unsafe)
t_s, h_s = min_margin(safe)
ax.plot(t_u, h_u, "r", label="filter off (detection lost)")
ax.plot(t_s, h_s, "g", label="filter on (robustified)")
ax.axhline(0.0, color="k", lw=0.8)
ax.set_xlabel("time [s]")
ax.set_ylabel("min corner margin (physical camera)")
ax.set_title("barrier filter versus a scripted operator pushing toward the border")
ax.legend()
fig.tight_layout()
out = __file__.replace(".py", ".png")
fig.savefig(out, dpi=120)
print(f"\nwrote {out}")
