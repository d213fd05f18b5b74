"""Strong error between the SDE and RDE integrators, and between the two RDE schemes, versus dt."""

import argparse

import numpy as np

from oscillattr.coupling import build_laplacian
from oscillattr.dynamics import integrate_rde, integrate_sde, sde_to_rde
from oscillattr.energy import OscillatorParams
from oscillattr.noise import TimeGrid, ou_path


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dts", type=float, nargs="+", default=[4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4])
    args = ap.parse_args(argv)

    A = build_laplacian(4, 1, 1.0, "periodic")
    p = OscillatorParams.create(4, 10.0, 12.0, beta=1.0, f=0.3, eps=0.5)
    print(f"{'dt':>10} {'sde-rde':>12} {'expmid-rk4':>12}")
    prev = None
    for dt in args.dts:
        path = ou_path(args.seed, TimeGrid.span(0, args.T, dt), p.eps)
        u = lambda Y: Y[..., :4].copy()
        sde = integrate_sde(np.zeros(8), path, A, p, observe=u).states
        Y0 = sde_to_rde(np.zeros(8), path.z[0])
        rde = integrate_rde(Y0, path, A, p, "expmid", observe=u).states
        rk4 = integrate_rde(Y0, path, A, p, "rk4", observe=u).states
        e = np.abs(sde - rde).max()
        line = f"{dt:10.2e} {e:12.4e} {np.abs(rde - rk4).max():12.4e}"
        if prev is not None:
            line += f"   ratio {e / prev:.3f}"
        print(line)
        prev = e


if __name__ == "__main__":
    main()
