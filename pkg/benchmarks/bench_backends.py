"""Compare the numba and numpy kernels, and one coupled time step per backend.

    python3 benchmarks/bench_backends.py [--repeat 200]

Kernel timings call both implementations directly; the coupled-step timing
re-imports the package in a subprocess with ``FSIROM_BACKEND`` set.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from fsirom import coupling as cp
from fsirom import fluid as fl
from fsirom import rom
from fsirom import signal as sg
from fsirom import solid as sd
from fsirom.fluid import FluidConfig, FluidSolver
from fsirom.mesh import Mesh1D, TubeState

STEP_SCRIPT = """
import json, sys, time
from fsirom import BACKEND, harness
cfg = harness.RunConfig(t_end=0.2)
harness.run_fom_fom(cfg)  # compile / warm up
t0 = time.perf_counter()
res, F, U, timing = harness.run_fom_fom(cfg.with_(t_end=3.0))
wall = time.perf_counter() - t0
json.dump({"backend": BACKEND, "wall_per_step": wall / res.n_steps, "T_f": timing["T_f"],
           "T_s": timing["T_s"]}, sys.stdout)
"""


def best(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=repeat, repeat=3)) / repeat


def kernel_cases(rng):
    n = 100
    mesh = Mesh1D()
    s = FluidSolver(mesh, FluidConfig(v_ref=6.0))
    st = TubeState.uniform(n, 1.0, 6.0, 0.0)
    x = fl._interleave(st.v + 0.01 * rng.standard_normal(n), st.p + rng.standard_normal(n))
    a = st.a * (1 + 1e-3 * rng.standard_normal(n))
    prm = s._params(a, 6.1)
    q = st.a * st.v
    out = np.empty_like(x)
    ab = np.zeros((2 * fl.BAND + 1, x.shape[0]))

    g = sd.GeomMaterial()
    law = sd.ConstitutiveLaw().as_array()
    p = rng.uniform(-20, 20, n)
    tol = 1e-12 * 12500 * g.h_wall

    C = rng.standard_normal((2000, 4))
    W = rng.standard_normal((2000, 4))
    T = rng.standard_normal((5, 4))
    z = rng.standard_normal(4)
    V = rng.standard_normal((n, 6))
    k = sg.DuffingParams().coeffs()

    return {
        "fluid residual": (lambda: fl._residual_numba(x, a, st.a, q, prm, out),
                           lambda: fl._residual_numpy(x, a, st.a, q, prm, out)),
        "fluid jacobian": (lambda: fl._jacobian_numba(x, a, st.a, q, prm, ab),
                           lambda: fl._jacobian_numpy(x, a, st.a, q, prm, ab)),
        "solid sections": (lambda: sd._section_kernel_numba(p, g.r0, g.h_wall, law, tol, 200),
                           lambda: sd._section_kernel_numpy(p, g.r0, g.h_wall, law, tol, 200)),
        "tps predict (2000 centres)": (lambda: rom._tps_predict_numba(z, C, W, T),
                                       lambda: rom._tps_predict_numpy(z, C, W, T)),
        "thin QR 100x6": (lambda: cp._thin_qr_numba(V), lambda: cp._thin_qr_numpy(V)),
        "RK4 one output step": (lambda: sg._rk4_numba(10.0, 0.0, k, 0.005, 1, 20),
                                lambda: sg._rk4_python(10.0, 0.0, k, 0.005, 1, 20)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--json", action="store_true", help="print machine-readable results")
    args = ap.parse_args(argv)

    rows = []
    for name, (f_nb, f_np) in kernel_cases(np.random.default_rng(0)).items():
        t_nb, t_np = best(f_nb, args.repeat), best(f_np, args.repeat)
        rows.append({"case": name, "numba_us": 1e6 * t_nb, "numpy_us": 1e6 * t_np,
                     "ratio": t_np / t_nb})

    steps = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, FSIROM_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", STEP_SCRIPT], env=env, capture_output=True,
                             text=True, check=True)
        steps[backend] = json.loads(out.stdout)

    if args.json:
        print(json.dumps({"kernels": rows, "coupled_step": steps}, indent=1))
        return
    print(f"{'kernel':30s} {'numba [us]':>12s} {'numpy [us]':>12s} {'numpy/numba':>12s}")
    for r in rows:
        print(f"{r['case']:30s} {r['numba_us']:12.2f} {r['numpy_us']:12.2f} {r['ratio']:12.1f}")
    print()
    for backend, s in steps.items():
        print(f"coupled FOM-FOM step [{backend:5s}]  {1e3 * s['wall_per_step']:8.3f} ms/step"
              f"   T_f={1e6 * s['T_f']:.1f} us  T_s={1e6 * s['T_s']:.1f} us")


if __name__ == "__main__":
    main()
