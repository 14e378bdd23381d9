"""Shared fixtures data for the test modules (cached sweeps, acceptance log)."""

import functools

from levykernel.bounds import prepare_sweep
from levykernel.models import PRESETS, preset

SWEEP_T = (1e-3, 1e-2, 1e-1)
BASE_POINTS = {1: 2048, 2: 256}

ACCEPTANCE = []


def record(number, passed, detail):
    line = f"CRITERION {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def condition_a_presets():
    return [n for n, p in PRESETS.items() if p.expected.get("condition_A")]


def symmetric_presets():
    return [n for n in condition_a_presets() if PRESETS[n].triplet.symmetric]


def base_points(name, refine=1):
    return BASE_POINTS[preset(name).dim] * refine


@functools.lru_cache(maxsize=None)
def sweep(name, refine=1, with_bar=False, orders=None):
    return prepare_sweep(preset(name).triplet, SWEEP_T, n_points=base_points(name, refine),
                         with_bar=with_bar, orders=orders, jobs=1)
