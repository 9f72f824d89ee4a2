"""Compare the numba and numpy kernels of the plane sweep.

Run from the repository root::

    python3 benchmarks/bench_sweep.py --size 128 --hyps 64 --repeat 5

Each kernel is called once before timing so numba compilation is excluded.
"""
import argparse
import time

import numpy as np

from mvdbench import _jit, kernels, synth
from mvdbench.plane_sweep import SweepConfig, build_hypotheses, sweep_homographies


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--hyps", type=int, default=64)
    ap.add_argument("--patch", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    if not _jit.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    threads = _jit.set_threads(args.threads)

    s = synth.render(synth.plane_scene(size=args.size, n_other=1))
    cfg = SweepConfig(1.0, 4.0, args.hyps, args.patch)
    key, other = s.keyview, s.others[0]
    hs = sweep_homographies(key, other, build_hypotheses(cfg))
    img, ref = other.gray(), key.gray()
    h, w = ref.shape
    warped, wvalid = kernels._warp_stack_numba(img, hs, h, w)

    rows = []
    for name, nb, npy in [
        ("warp", lambda: kernels._warp_stack_numba(img, hs, h, w), lambda: kernels._warp_stack_numpy(img, hs, h, w)),
        ("zncc", lambda: kernels._zncc_volume_numba(ref, warped, wvalid, args.patch),
         lambda: kernels._zncc_volume_numpy(ref, warped, wvalid, args.patch)),
    ]:
        t_nb, t_np = best_of(nb, args.repeat), best_of(npy, args.repeat)
        rows.append((name, t_nb, t_np))

    # results must agree before timings mean anything
    c_nb, v_nb = kernels._zncc_volume_numba(ref, warped, wvalid, args.patch)
    c_np, v_np = kernels._zncc_volume_numpy(ref, warped, wvalid, args.patch)
    assert np.array_equal(v_nb, v_np) and np.allclose(c_nb, c_np, atol=1e-12)

    print(f"{args.size}x{args.size}, {args.hyps} hypotheses, patch radius {args.patch}, numba threads {threads}")
    print(f"{'kernel':<8}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, t_nb, t_np in rows:
        print(f"{name:<8}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
