"""Compose a mind: love and joy manifolds reacting jointly to one signal.

Each manifold reads its own slice of a 40-wide sensor vector (the first 20
coordinates feed love, the last 20 feed joy), so one stimulus produces one
emotional reaction per characteristic group.
"""

from pathlib import Path

import numpy as np

import affectmap as am

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)


def trained_manifold(which, states, name, data_seed):
    spec = am.ManifoldSpec.from_names(
        name, am.canonical_state_names(which), am.canonical_margins(which), 2, 20
    )
    dataset = am.synth_gaussian_dataset(states, 300, 20, 6.0, seed=data_seed)
    config = am.TrainConfig(seed=data_seed)
    network = am.init_network(am.default_layers(20, 2), config.seed)
    return am.train(dataset, spec, config, network), dataset


love, love_data = trained_manifold("love_nonlinear", 4, "love", data_seed=1)
joy, joy_data = trained_manifold("joy", 6, "joy", data_seed=2)

mind = am.Mind((love, joy), input_slices=((0, 20), (20, 40)))
am.save_mind(mind, OUT / "mind.json")
print(f"mind with {len(mind)} manifolds saved to {OUT / 'mind.json'}")

# stitch signals: love channel + joy channel side by side
rng = np.random.default_rng(7)
print("\nstimulus -> reactions")
for _ in range(5):
    love_state = int(rng.integers(4))
    joy_state = int(rng.integers(6))
    love_part = love_data.signals[love_data.state_labels == love_state]
    joy_part = joy_data.signals[joy_data.state_labels == joy_state]
    x = np.concatenate([
        love_part[rng.integers(len(love_part))],
        joy_part[rng.integers(len(joy_part))],
    ])
    reactions = am.mind_react(mind, x)
    felt = ", ".join(
        f"{name}: {result.state_name}" for name, result in reactions.items()
    )
    truth = (f"(fed {love.spec.state_names[love_state]} + "
             f"{joy.spec.state_names[joy_state]})")
    print(f"  {felt:38s} {truth}")

# the same machinery keeps working after the mind round-trips through JSON
reloaded = am.load_mind(OUT / "mind.json")
x = np.concatenate([love_data.signals[0], joy_data.signals[0]])
assert {n: r.state_id for n, r in am.mind_react(reloaded, x).items()} == \
       {n: r.state_id for n, r in am.mind_react(mind, x).items()}
print("\nreloaded mind reacts identically")
