"""Benchmark the compiled convolution kernels against the numpy fallback.

Two parts:
  * a microbenchmark of conv1d_forward / conv1d_backward on the shapes the
    package actually runs hot (denoiser layers and classifier layers), with
    a correctness cross-check between backends;
  * optionally (--end-to-end) a wall-clock comparison of one reverse-chain
    training run per backend, each in a subprocess so the import-time
    backend selection is exercised for real.

Run from the repository root:  python benchmarks/bench_kernels.py
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from cdnet import _convkernels
from cdnet.kernels import (_COMPILED_CHANNEL_LIMIT, _np_conv1d_backward,
                           _np_conv1d_forward)

# (label, batch, in_channels, out_channels, kernel width, padded length)
SHAPES = [
    ("denoiser in   ", 64, 1, 16, 5, 132),
    ("denoiser mid  ", 64, 16, 16, 5, 132),
    ("denoiser out  ", 64, 16, 1, 5, 132),
    ("classifier in ", 176, 1, 16, 7, 134),
    ("classifier mid", 176, 16, 32, 5, 132),
]

END_TO_END_SNIPPET = """
import time
import numpy as np
from cdnet.classifier import TrainConfig
from cdnet.diffusion import ChainKind, linear_schedule
from cdnet.kernels import BACKEND
from cdnet.reverse import train_reverse_chain
from cdnet.seeding import derive_rng
from cdnet.simgen import SimConfig, generate_sim_dataset

dataset = generate_sim_dataset(SimConfig(n_per_class=20, seed=0))
config = TrainConfig(chain_epochs=60)
schedule = linear_schedule(config.t_steps, config.beta_min, config.beta_max)
start = time.perf_counter()
train_reverse_chain(dataset, ChainKind(0, 0), schedule, config,
                    derive_rng(0, "bench"))
print(f"{BACKEND} {time.perf_counter() - start:.3f}")
"""


def _time_call(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def run_micro(repeats):
    rng = np.random.default_rng(0)
    print(f"{'layer':<15} {'pass':<8} {'numpy':>10} {'cython':>10} "
          f"{'speedup':>8}  dispatch")
    for label, batch, c_in, c_out, width, padded in SHAPES:
        picked = "cython" if c_in * c_out <= _COMPILED_CHANNEL_LIMIT else "numpy"
        xp = rng.standard_normal((batch, c_in, padded))
        kernels = rng.standard_normal((c_out, c_in, width))
        out_np = _np_conv1d_forward(xp, kernels)
        out_cy = _convkernels.conv1d_forward(xp, kernels)
        assert np.allclose(out_np, out_cy, atol=1e-12), label
        grad = rng.standard_normal(out_np.shape)
        gx_np, gk_np = _np_conv1d_backward(grad, xp, kernels)
        gx_cy, gk_cy = _convkernels.conv1d_backward(grad, xp, kernels)
        assert np.allclose(gx_np, gx_cy, atol=1e-12), label
        assert np.allclose(gk_np, gk_cy, atol=1e-12), label

        for name, np_fn, cy_fn, args in [
            ("forward", _np_conv1d_forward, _convkernels.conv1d_forward,
             (xp, kernels)),
            ("backward", _np_conv1d_backward, _convkernels.conv1d_backward,
             (grad, xp, kernels)),
        ]:
            t_np = _time_call(np_fn, args, repeats)
            t_cy = _time_call(cy_fn, args, repeats)
            print(f"{label:<15} {name:<8} {t_np * 1e6:>8.1f}us "
                  f"{t_cy * 1e6:>8.1f}us {t_np / t_cy:>7.2f}x  {picked}")


def run_end_to_end():
    print("\nreverse-chain training, 60 epochs, simgen defaults, n=20/class:")
    for backend in ("python", "cython"):
        env = dict(os.environ, CDNET_KERNEL_BACKEND=backend)
        proc = subprocess.run([sys.executable, "-c", END_TO_END_SNIPPET],
                              capture_output=True, text=True, env=env,
                              check=True)
        name, seconds = proc.stdout.split()
        print(f"  {name:<8} {float(seconds):7.3f}s")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=200,
                        help="timing repeats per kernel call (best-of)")
    parser.add_argument("--end-to-end", action="store_true",
                        help="also time one chain-training run per backend")
    args = parser.parse_args(argv)
    run_micro(args.repeats)
    if args.end_to_end:
        run_end_to_end()
    return 0


if __name__ == "__main__":
    sys.exit(main())
