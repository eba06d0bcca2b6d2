# %% [markdown]
# # Evolving fooling images with an archive of elites
#
# Instead of climbing pixel by pixel, evolve whole images: keep the best
# genome found so far for every target class (one archive bin per class),
# mutate a random elite each generation, and let every offspring compete
# for every bin. Two encodings are compared here: raw per-pixel genomes,
# and coordinate networks that map (x, y, r) to brightness and therefore
# produce globally regular, almost decorative patterns.

# %%
from pathlib import Path

import matplotlib.pyplot as plt

import spoofkit as sk

HERE = Path(__file__).resolve().parent
OUT = HERE / "output"
OUT.mkdir(exist_ok=True)
DATA = HERE.parent / "data" / "mnist"

# %% Reuse the victim from demo 01 (train it if missing)
spec = sk.mlp_victim_spec()
weights_path = OUT / "victim.spwt"
if not weights_path.exists():
    train, test = sk.load_mnist_dir(DATA)
    outcome = sk.train_dense(
        spec, train, test, sk.TrainConfig(learning_rate=0.5, epochs=10, batch_size=64, seed=0)
    )
    sk.save_weights(outcome.weights, weights_path)
weights = sk.load_weights(weights_path)

# %% Evolve both encodings with the same budget
runs = {}
for encoding in ("direct", "cppn"):
    oracle = sk.BuiltinOracle(spec, weights)
    cfg = sk.EvolutionConfig(encoding=encoding, population_size=20, generations=150, seed=0)
    runs[encoding] = sk.evolve(oracle, cfg)
    fitness = [b.fitness for b in runs[encoding].archive.bins]
    print(f"{encoding}: {oracle.query_count} queries, "
          f"bin confidences {min(fitness):.3f} .. {max(fitness):.3f}")

# %% Elite per class, per encoding
fig, axes = plt.subplots(2, 10, figsize=(16, 3.8))
for row, encoding in enumerate(("direct", "cppn")):
    archive = runs[encoding].archive
    channels, height, width = archive.shape
    for c in range(10):
        bin_ = archive.bins[c]
        image = sk.render(bin_.genome, height, width, channels)
        axes[row, c].imshow(image[0], cmap="gray", vmin=0, vmax=1)
        axes[row, c].set_title(f"'{c}' @ {bin_.fitness:.2f}", fontsize=8)
        axes[row, c].axis("off")
    axes[row, 0].set_ylabel(encoding, fontsize=10)
fig.suptitle("Archive elites: per-pixel genomes (top) vs coordinate networks (bottom)")
fig.tight_layout()
fig.savefig(OUT / "02_archive_elites.png", dpi=150)

# %% Best-so-far fitness per bin never decreases
fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
for ax, encoding in zip(axes, ("direct", "cppn")):
    for c, points in runs[encoding].trajectories.items():
        generations = [g for g, _, _ in points]
        fitness = [f for _, _, f in points]
        ax.plot(generations, fitness, alpha=0.7, label=str(c))
    ax.set_title(encoding)
    ax.set_xlabel("generation")
axes[0].set_ylabel("bin fitness (target confidence)")
axes[1].legend(ncol=2, fontsize=7, title="class")
fig.tight_layout()
fig.savefig(OUT / "02_bin_trajectories.png", dpi=150)
print(f"figures written to {OUT}")
