"""Named model presets used by the CLI, the demos and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .levy_model import DirectionalStable, DiscretizedStable, IsotropicStable, LevyTriplet, triplet_from_config


@dataclass(frozen=True)
class ModelPreset:
    """A triplet plus the behaviour it is expected to show.

    ``expected`` keys: ``alpha_effective``, ``rho_exponent`` (slope of
    ``log rho_t`` against ``log t``), ``condition_A`` (bool) and
    ``bell`` (which bell-type bounds apply: ``"power"`` and/or ``"subexp"``).
    """

    name: str
    triplet: LevyTriplet
    expected: dict = field(default_factory=dict)
    description: str = ""

    @property
    def dim(self) -> int:
        return self.triplet.dim

    def to_config(self) -> dict:
        return self.triplet.to_config()


def _stable(name, measure, alpha, desc, bell=("power",)):
    return ModelPreset(name, LevyTriplet(measure),
                       {"alpha_effective": alpha, "rho_exponent": -1.0 / alpha,
                        "condition_A": True, "bell": tuple(bell)}, desc)


def _build():
    out = [
        _stable("stable-1d-cauchy", IsotropicStable(1.0, 1.0 / math.pi, 1), 1.0,
                "Cauchy process, psi(xi) = |xi|"),
        _stable("stable-1d", IsotropicStable.normalized(1.5, 1), 1.5,
                "symmetric 1.5-stable, psi*(r) = r^1.5"),
        _stable("stable-1d-alpha0.7", IsotropicStable.normalized(0.7, 1), 0.7,
                "symmetric 0.7-stable, psi*(r) = r^0.7"),
        _stable("stable-1d-alpha1.0", IsotropicStable.normalized(1.0, 1), 1.0,
                "symmetric 1-stable, psi*(r) = r"),
        _stable("stable-2d-cauchy", IsotropicStable(1.0, 1.0 / (2 * math.pi), 2), 1.0,
                "isotropic Cauchy in the plane, psi(xi) = |xi|"),
        _stable("stable-2d", IsotropicStable.normalized(1.5, 2), 1.5,
                "isotropic 1.5-stable in the plane, psi*(r) = r^1.5"),
        _stable("discretized-stable-2d", DiscretizedStable(1.0, 1.0, 2), 1.0,
                "shells of radius 2^-k and mass 2^k in the plane", bell=("subexp",)),
        ModelPreset("one-sided-stable-1d", LevyTriplet(DirectionalStable(0.8, 1.0, ((1.0,),))),
                    {"alpha_effective": 0.8, "rho_exponent": -1.25, "condition_A": True, "bell": ()},
                    "totally skewed 0.8-stable, jumps to the right only"),
        ModelPreset("axis-degenerate-2d",
                    LevyTriplet(DirectionalStable(1.5, 1.0, ((1.0, 0.0), (-1.0, 0.0)))),
                    {"alpha_effective": 1.5, "rho_exponent": None, "condition_A": False, "bell": ()},
                    "1.5-stable jumps along the first axis only"),
    ]
    return {p.name: p for p in out}


PRESETS = _build()


def preset(name: str) -> ModelPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError("model", f"unknown model {name!r}; known: {', '.join(PRESETS)}") from None


def list_presets() -> list:
    return list(PRESETS)


def resolve_model(spec) -> ModelPreset:
    """A preset from its name, or an ad-hoc one from an inline triplet mapping."""
    if isinstance(spec, ModelPreset):
        return spec
    if isinstance(spec, str):
        return preset(spec)
    if isinstance(spec, dict):
        if "preset" in spec:
            return preset(spec["preset"])
        tr = triplet_from_config(spec)
        return ModelPreset(spec.get("name", "inline"), tr, {}, "inline model")
    raise ConfigError("model", "expected a preset name or a triplet mapping")
