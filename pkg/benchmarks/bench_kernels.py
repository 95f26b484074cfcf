"""Time the numba kernels against the pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N]

Also times one training epoch end to end under each backend (the backend is
fixed at import, so that part runs in a subprocess per backend).
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from paradisc import _kernels as K
from paradisc.numeric import make_rng


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_cases():
    rng = make_rng(0)
    cases = []
    for T, H in ((40, 32), (120, 300)):
        xw = rng.normal(size=(T, 4 * H))
        U = rng.normal(scale=0.1, size=(4 * H, H))
        hs, cs, gates = K.lstm_forward_np(xw, U)
        dh = rng.normal(size=(T, H))
        cases.append((f"lstm fwd T={T} H={H}", lambda m, xw=xw, U=U: m["lstm_forward"](xw, U)))
        cases.append((f"lstm bwd T={T} H={H}",
                      lambda m, dh=dh, g=gates, c=cs, U=U: m["lstm_backward"](dh, g, c, U)))
    for T in (4, 12):
        S = 8
        E = rng.normal(size=(T, S))
        tr, st, en = rng.normal(size=(S, S)), rng.normal(size=S), rng.normal(size=S)
        mask = np.ones((T, S), dtype=bool)
        cases.append((f"crf fwd T={T}", lambda m, a=(E, tr, st, en, mask): m["crf_forward"](*a)))
        cases.append((f"viterbi T={T}", lambda m, a=(E, tr, st, en): m["viterbi"](*a)))
    return cases


EPOCH_SNIPPET = """
import time
from paradisc import _kernels
from paradisc.config import TrainConfig
from paradisc.synth import SynthConfig, gen_synthetic
from paradisc.train import train
corpus = gen_synthetic(SynthConfig(n_train=300, n_dev=50, n_test=0), seed=0)
cfg = TrainConfig(hidden=32, word_dim=32, max_epochs=1)
train(cfg, corpus)  # warm-up
t = time.perf_counter()
train(cfg.replace(max_epochs=2), corpus, eval_test=False)
print(_kernels.BACKEND, (time.perf_counter() - t) / 2)
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-epoch", action="store_true")
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")

    np_fns = {"lstm_forward": K.lstm_forward_np, "lstm_backward": K.lstm_backward_np,
              "crf_forward": K.crf_forward_np, "viterbi": K.viterbi_np}
    nb_fns = {"lstm_forward": K.lstm_forward_nb, "lstm_backward": K.lstm_backward_nb,
              "crf_forward": K.crf_forward_nb, "viterbi": K.viterbi_nb}
    print(f"{'kernel':<24}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, fn in kernel_cases():
        a = best_of(lambda: fn(np_fns), args.repeat) * 1e3
        b = best_of(lambda: fn(nb_fns), args.repeat) * 1e3
        print(f"{name:<24}{a:>12.4f}{b:>12.4f}{a / b:>10.1f}")

    if args.skip_epoch:
        return
    print("\nfull training epoch (300 paragraphs, hidden 32):")
    for flag in ("1", "0"):
        env = dict(os.environ, PARADISC_PURE_NUMPY=flag)
        out = subprocess.run([sys.executable, "-c", EPOCH_SNIPPET], env=env, capture_output=True, text=True,
                             check=True).stdout.split()
        print(f"  {out[0]:<8}{float(out[1]):8.2f} s/epoch")


if __name__ == "__main__":
    main()
