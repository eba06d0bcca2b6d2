# %% [markdown]
# # Attacking a classifier you can only talk to
#
# The attack code never needs the victim's weights: any process that speaks
# the newline-delimited JSON protocol can be attacked over TCP or stdio.
# This demo spawns a real torch-backed LeNet server from the companion
# spoofbridge package as a subprocess and fools it over the wire. If
# spoofbridge is not installed it falls back to the builtin protocol stub,
# which answers every query with the uniform distribution.

# %%
import subprocess
import sys
from pathlib import Path

import numpy as np

import spoofkit as sk

HERE = Path(__file__).resolve().parent
OUT = HERE / "output"
OUT.mkdir(exist_ok=True)
DATA = HERE.parent / "data" / "mnist"

try:
    import spoofbridge  # noqa: F401
    HAVE_BRIDGE = True
except ImportError:
    HAVE_BRIDGE = False

# %% Spawn a server subprocess speaking the protocol on stdin/stdout
if HAVE_BRIDGE:
    checkpoint = OUT / "lenet.pt"
    if not checkpoint.exists():
        print("training the bridge's LeNet victim (one-time, ~10s)...")
        subprocess.run(
            [sys.executable, "-m", "spoofbridge.cli", "train-lenet",
             "--data", str(DATA), "--out", str(checkpoint)],
            check=True,
        )
    command = [sys.executable, "-m", "spoofbridge.cli", "serve",
               "--model", "lenet", "--checkpoint", str(checkpoint), "--stdio"]
else:
    print("spoofbridge not installed; attacking the uniform stub instead")
    command = [sys.executable, "-m", "spoofkit.cli", "serve-stub", "--stdio"]

oracle = sk.RemoteOracle.spawn(command)
print(f"server says: {oracle.num_classes} classes, input {oracle.input_shape}, "
      f"extra {oracle.server_extra}")

# %% Fool it over the wire
results = sk.spoof_batch(oracle, [
    sk.AttackConfig(target_class=c, budget=1000, seed=0, early_stop_confidence=0.95)
    for c in range(min(oracle.num_classes, 10))
])
oracle.close()
for r in results:
    print(f"class {r.target_class}: confidence {r.final_confidence:.4f} "
          f"after {r.queries_used} queries")
print(f"median: {np.median([r.final_confidence for r in results]):.4f}")

# %% Save the wire-made fooling images
if HAVE_BRIDGE:
    for r in results:
        sk.save_png(r.final_image, OUT / f"05_wire_class_{r.target_class}.png")
    print(f"images written to {OUT}")
