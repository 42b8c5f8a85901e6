"""
Networks, gradients and checkpoints
===================================

The actor and critic are plain numpy MLPs with hand-written backpropagation.
This script checks the analytic gradient against central differences, fits
a small regression with Adam, and round-trips a checkpoint file.
"""

import tempfile
from pathlib import Path

import numpy as np

from hapsv2x.approximator import Adam, Mlp, load_mlp, save_mlp

rng = np.random.default_rng(0)
net = Mlp([11, 64, 64, 6], output_activation="tanh", rng=rng)
x = rng.uniform(-1, 1, (8, 11))
upstream = rng.normal(size=(8, 6))
grads, _ = net.backward(x, upstream)

eps, worst = 1e-5, 0.0
for i in rng.choice(net.num_parameters(), 100, replace=False):
    keep = net.flat[i]
    net.flat[i] = keep + eps
    up = np.sum(net.forward(x) * upstream)
    net.flat[i] = keep - eps
    down = np.sum(net.forward(x) * upstream)
    net.flat[i] = keep
    num = (up - down) / (2 * eps)
    worst = max(worst, abs(num - grads.flat[i]) / max(abs(num), abs(grads.flat[i]), 1e-7))
print(f"largest relative gradient error over 100 coordinates: {worst:.2e}")

# %%
# Fit y = sin(3x) with a small critic-shaped network
reg = Mlp([1, 32, 32, 1], rng=1)
opt = Adam(reg)
xs = np.linspace(-1, 1, 128)[:, None]
ys = np.sin(3 * xs)
for step in range(2001):
    pred, cache = reg.forward(xs, return_cache=True)
    g, _ = reg.backward(xs, 2 * (pred - ys) / len(xs), cache)
    opt.step(reg, g, 3e-3)
    if step % 500 == 0:
        print(f"step {step:4d}: mse {np.mean((pred - ys) ** 2):.5f}")

# %%
# Checkpoints are plain text and reload bit for bit
with tempfile.TemporaryDirectory() as d:
    path = Path(d) / "actor.mlp"
    save_mlp(net, path)
    print(path.read_text().splitlines()[:2])
    back = load_mlp(path, "tanh")
    print("identical after reload:", np.array_equal(back.flat, net.flat))
