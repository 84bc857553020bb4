"""Check the hand-derived gradients against central finite differences.

All gradients in this package are written out by the chain rule, no autodiff.
The safety net is numerical: nudge each parameter by +/- h, difference the
loss, and compare with what backpropagation claims.  Agreement to ~1e-7
relative error means the calculus is right.
"""

import numpy as np

from affectmap import TrainConfig, linear_chain_margins
from affectmap.network import dense, gradient_check, init_network, prelu
from affectmap.training import make_triplet_loss_closure

rng = np.random.default_rng(0)

# a small embedding network: 12 -> 16 -> 2 with PReLU
layers = (dense(12, 16), prelu(16), dense(16, 2))
net = init_network(layers, seed=3)
print(f"network 12->16->2, {net.params.shape[0]} parameters")

# the full training loss on a batch of 8 triplets over 3 states
b = 8
margins = linear_chain_margins(3, 1.0)
anchor_states = rng.integers(0, 3, b)
negative_states = (anchor_states + 1 + rng.integers(0, 2, b)) % 3
stacked_signals = rng.normal(size=(3 * b, 12))
closure = make_triplet_loss_closure(margins, anchor_states, negative_states,
                                    TrainConfig())

report = gradient_check(net, stacked_signals, closure, step=1e-5)
print(f"max relative error, triplet loss: {report.max_rel_error:.3e}")

# a second, trivially-differentiable loss as a control
identity_report = gradient_check(net, stacked_signals,
                                 lambda emb: (float(emb.sum()), np.ones_like(emb)))
print(f"max relative error, linear loss:  {identity_report.max_rel_error:.3e}")

worst = np.argmax(np.abs(report.analytic - report.numeric))
print(f"\nworst parameter #{worst}: analytic {report.analytic[worst]:+.10f}, "
      f"numeric {report.numeric[worst]:+.10f}")
print("both computations disagree only in digits finite differences cannot see")
