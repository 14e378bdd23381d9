"""Fit compound kernel and bell-type bounds for one model over a sweep of times.

    python3 demos/kernel_bounds.py [model]      (default stable-1d)
"""

import sys

from levykernel.bounds import bell_power_bound, fit_lower, fit_upper, prepare_sweep
from levykernel.models import preset


def main(name="stable-1d"):
    p = preset(name)
    sw = prepare_sweep(p.triplet, [1e-3, 1e-2, 1e-1], n_points=2048 if p.dim == 1 else 256, with_bar=True)
    for rep in (fit_upper(sw, "exp"), fit_lower(sw)):
        print(rep.summary())
        for row in rep.rows:
            print(f"   t={row['t']:.0e}  worst ratio {row['worst_ratio']:.6f}")
    if "power" in p.expected.get("bell", ()):
        bell = bell_power_bound(sw, p.expected["alpha_effective"])
        print(bell.summary(), f"(c1/c2 = {bell.extra['spread']:.3g})")


if __name__ == "__main__":
    main(*sys.argv[1:])
