"""Compare the compiled and numpy assembly backends.

Usage::

    python benchmarks/bench_kernels.py [--sizes 33 65 129 257] [--repeat 5]

Prints one CSV row per (element, size, backend) with the best wall time of
``assemble`` and the speedup over the numpy fallback. Results are checked to
agree to rounding before timing.
"""
import argparse
import time

import numpy as np

from dmpfem.assembly import assemble
from dmpfem.kernels import available_backends
from dmpfem.model import make_case


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[33, 65, 129, 257])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("# compiled backend not built; timing the numpy fallback only")
    case = make_case("aniso2d")
    print("element,nodes_per_side,elements,backend,seconds,speedup")
    for element in ("tri", "quad"):
        for n in args.sizes:
            mesh = case.build_mesh(n, element)
            systems = {name: assemble(mesh, case.problem, backend=mod) for name, mod in backends.items()}
            ref = systems["python"].K
            for s in systems.values():
                assert abs(s.K - ref).max() <= 1e-12 * abs(ref).max()
            base = None
            for name, mod in backends.items():
                t = best_time(lambda: assemble(mesh, case.problem, backend=mod), args.repeat)
                base = base or t
                print(f"{element},{n},{mesh.n_elements},{name},{t:.6f},{base / t:.2f}")


if __name__ == "__main__":
    np.seterr(all="raise")
    main()
