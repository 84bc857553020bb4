"""Train the nonlinear love manifold on synthetic signals, end to end.

Four Gaussian clusters in 20-D stand in for sensor data (one cluster per
state).  The network learns a 2-D embedding where the four states collapse
to tight clusters sitting at the prescribed margins; we then score the
geometry on held-out signals and draw the embedding space.
"""

from pathlib import Path

import affectmap as am

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

spec = am.ManifoldSpec.from_names(
    "love",
    am.canonical_state_names("love_nonlinear"),
    am.canonical_margins("love_nonlinear"),
    embedding_dim=2,
    input_dim=20,
)

dataset = am.synth_gaussian_dataset(s=4, per_state=500, d=20, separation=6.0, seed=1)
train_ds, test_ds = am.train_test_split(dataset, test_fraction=0.2, seed=0)
print(f"signals: {len(train_ds)} train / {len(test_ds)} held out, d={train_ds.dim}")

config = am.TrainConfig(seed=1)  # batch 32, equal loss weights, 10 epochs
network = am.init_network(am.default_layers(20, 2), config.seed)
model = am.train(train_ds, spec, config, network)

print("\nepoch  total     within-state  margin-mismatch")
for row in model.history:
    print(f"{row.epoch:5d}  {row.total:8.4f}  {row.positive:12.4f}  {row.negative:15.4f}")

report = am.evaluate(model, test_ds)
print(f"\nheld-out accuracy:   {report.accuracy:.3f}")
print(f"margin stress:       {report.margin_stress:.3f}")
print(f"within-state spread: {report.intra_state_spread.mean():.3f}")
print("\nrealized vs prescribed margins:")
for i in range(4):
    realized = " ".join(f"{v:5.2f}" for v in report.realized_margins[i])
    wanted = " ".join(f"{v:5.2f}" for v in spec.margins.entries[i])
    print(f"  {realized}   |   {wanted}")

am.save_model(model, OUT / "love_model.json")

from affectmap.network import forward

embeddings, _ = forward(model.network, test_ds.signals, mode="eval")
am.render_scatter_svg(embeddings, test_ds.state_labels, spec.state_names,
                      OUT / "love_space.svg")
print(f"\nwrote {OUT / 'love_model.json'} and {OUT / 'love_space.svg'}")

# a few inferences on fresh signals
fresh = am.synth_gaussian_dataset(s=4, per_state=2, d=20, separation=6.0, seed=42)
print("\nreactions to fresh signals:")
for x, label in zip(fresh.signals, fresh.state_labels):
    result = am.infer_state(model, x)
    marker = "" if result.state_id == label else "   (true: %s)" % spec.state_names[label]
    print(f"  feels {result.state_name:8s} "
          f"confidence {result.confidence[result.state_id]:.2f}{marker}")
