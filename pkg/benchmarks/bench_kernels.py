"""Compare the compiled and pure-Python P-256 kernels.

    python3 benchmarks/bench_kernels.py [--n 200]

Times variable-base and fixed-base scalar multiplication on each backend,
then one OBU-sized butterfly pipeline (20 cocoon pairs, public and private
side) under whichever backend the package selected at import.
"""

from __future__ import annotations

import argparse
import random
import time

from scms import _kernel
from scms._p256_py import GX, GY, N


def _time(fn, args_list) -> float:
    t0 = time.perf_counter()
    for args in args_list:
        fn(*args)
    return (time.perf_counter() - t0) / len(args_list) * 1e3


def bench_backends(n: int, seed: int) -> list[tuple[str, str, float]]:
    rng = random.Random(seed)
    scalars = [rng.randrange(1, N) for _ in range(n)]
    rows = []
    for name, mod in sorted(_kernel.available_backends().items()):
        pt = mod.mul_base(rng.randrange(1, N))
        rows.append((name, "mul (variable base)", _time(mod.mul, [(k, *pt) for k in scalars])))
        rows.append((name, "mul_base (generator)", _time(mod.mul_base, [(k,) for k in scalars])))
        rows.append((name, "mul(k, G) via generic path", _time(mod.mul, [(k, GX, GY) for k in scalars])))
    return rows


def bench_pipeline(seed: int, batch: int = 20) -> float:
    from scms.bke import CocoonIndex, aca_respond, cocoon_privates, cocoon_publics, gen_caterpillar, recover_butterfly

    rng = random.Random(seed)
    cat = gen_caterpillar(rng)
    indices = [CocoonIndex(1, j) for j in range(batch)]
    t0 = time.perf_counter()
    for pair in cocoon_publics(cat.A, cat.P, cat.ck, cat.ek, indices):
        contrib = aca_respond(pair, rng)
        b, q = cocoon_privates(cat.a, cat.p, cat.ck, cat.ek, pair.index)
        recover_butterfly(b, q, contrib)
    return (time.perf_counter() - t0) * 1e3


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200, help="scalar multiplications per measurement")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    rows = bench_backends(args.n, args.seed)
    print(f"{'backend':<10} {'operation':<28} {'ms/op':>9}")
    for name, op, ms in rows:
        print(f"{name:<10} {op:<28} {ms:>9.4f}")
    by = {(b, op): ms for b, op, ms in rows}
    if ("compiled", "mul (variable base)") in by:
        ratio = by[("python", "mul (variable base)")] / by[("compiled", "mul (variable base)")]
        print(f"\ncompiled speed-up on variable-base mul: {ratio:.1f}x")
    print(f"\nbutterfly pipeline, batch 20, backend={_kernel.BACKEND}: {bench_pipeline(args.seed):.1f} ms")


if __name__ == "__main__":
    main()
