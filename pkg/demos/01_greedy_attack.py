# %% [markdown]
# # Fooling a digit classifier one pixel at a time
#
# Train the builtin MLP on the bundled MNIST subset, then climb from an
# all-black canvas: propose one random pixel edit per query and keep it only
# if the victim's confidence in the target class goes up. A few hundred
# queries are enough to make the network certain it is looking at any digit
# we pick, even though the image is unrecognizable noise to a human.

# %%
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

import spoofkit as sk

HERE = Path(__file__).resolve().parent
OUT = HERE / "output"
OUT.mkdir(exist_ok=True)
DATA = HERE.parent / "data" / "mnist"

# %% Train the victim (or reuse a cached copy)
weights_path = OUT / "victim.spwt"
spec = sk.mlp_victim_spec()
train, test = sk.load_mnist_dir(DATA)
if weights_path.exists():
    weights = sk.load_weights(weights_path)
else:
    outcome = sk.train_dense(
        spec, train, test, sk.TrainConfig(learning_rate=0.5, epochs=10, batch_size=64, seed=0)
    )
    weights = outcome.weights
    sk.save_weights(weights, weights_path)
accuracy = sk.evaluate_accuracy(spec, weights, test.images, test.labels)
print(f"victim test accuracy: {accuracy:.4f}")

# %% Attack every digit class with a 500-query budget
oracle = sk.BuiltinOracle(spec, weights)
results = sk.spoof_batch(oracle, [
    sk.AttackConfig(target_class=c, budget=500, seed=0) for c in range(10)
])
for r in results:
    print(f"class {r.target_class}: confidence {r.final_confidence:.4f}  "
          f"pixels changed {r.pcr:.1%}  queries {r.queries_used}")

# %% The fooling images, labeled with the victim's confidence
fig, axes = plt.subplots(2, 5, figsize=(10, 4.4))
for r, ax in zip(results, axes.ravel()):
    ax.imshow(r.final_image[0], cmap="gray", vmin=0, vmax=1)
    ax.set_title(f"'{r.target_class}' @ {r.final_confidence:.2f}", fontsize=10)
    ax.axis("off")
fig.suptitle("Images the victim is sure are digits")
fig.tight_layout()
fig.savefig(OUT / "01_fooling_images.png", dpi=150)

# %% Confidence climbs monotonically: rejected proposals cost a query but change nothing
fig, ax = plt.subplots(figsize=(7, 4))
for r in results:
    xs, ys = zip(*r.trajectory)
    ax.plot(xs, ys, label=str(r.target_class), alpha=0.8)
ax.set_xlabel("queries")
ax.set_ylabel("target-class confidence")
ax.set_title("Greedy single-pixel search, one curve per target digit")
ax.legend(ncol=5, fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "01_trajectories.png", dpi=150)
print(f"figures written to {OUT}")
