"""Loss functions over noisy targets, their gradients, and expected-loss minimizers.

Four loss kinds are supported: plain squared error ("l2"), squared error
normalized by the target ("rmse"), squared error normalized by the model
output ("hdr"), and the variant of the latter whose denominator is frozen
during differentiation ("hdr_star").  A tone map may be applied to both
sides of the loss, to the target only (with the model output living in
tone-mapped space), or to neither.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ContractError, DomainError
from .tonemap import ToneMap, make_tonemap

LOSS_KINDS = ("l2", "rmse", "hdr", "hdr_star")
PLACEMENTS = ("none", "target", "both")

_IDENTITY = make_tonemap("identity")


@dataclass(frozen=True)
class LossSpec:
    """One loss kind plus tone-map placement and the epsilon regularizer.

    With placement "target" the model output is interpreted as already
    tone-mapped; evaluation code inverts it back to linear scale itself.
    """

    kind: str
    placement: str = "none"
    epsilon: float = 0.01
    tonemap: ToneMap = field(default=_IDENTITY)

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ContractError(f"unknown loss kind {self.kind!r}; valid: {LOSS_KINDS}")
        if self.placement not in PLACEMENTS:
            raise ContractError(
                f"unknown placement {self.placement!r}; valid: {PLACEMENTS}"
            )
        if not (self.epsilon > 0.0):
            raise ContractError(f"epsilon must be > 0, got {self.epsilon}")
        if self.kind == "hdr_star" and self.placement != "none":
            raise ContractError("hdr_star is only defined without tone mapping")
        if self.placement == "none" and self.tonemap.name != "identity":
            raise ContractError(
                "placement 'none' requires the identity tone map, got "
                f"{self.tonemap.name!r}"
            )

    @property
    def label(self) -> str:
        if self.placement == "none":
            return self.kind
        return f"{self.kind}+{self.tonemap.name}/{self.placement}"

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "placement": self.placement,
            "epsilon": self.epsilon,
            "tonemap": self.tonemap.name,
        }

    @staticmethod
    def from_json_dict(d: Mapping) -> "LossSpec":
        return LossSpec(
            kind=d["kind"],
            placement=d.get("placement", "none"),
            epsilon=float(d.get("epsilon", 0.01)),
            tonemap=make_tonemap(d.get("tonemap", "identity")),
        )


@dataclass(frozen=True)
class MinimizerForm:
    """Closed-form global minimizer of expected loss plus the moments it used."""

    value: float
    moment_terms: dict


def _check_nonnegative(name, x):
    if np.any(np.asarray(x) < 0.0):
        raise DomainError(f"{name} must be >= 0, got {x!r}")


def _sides(spec: LossSpec, model_output, target):
    """Map (model_output, target) into the space the loss operates in."""
    if spec.placement == "both":
        return spec.tonemap.value(model_output), spec.tonemap.value(target)
    if spec.placement == "target":
        return np.asarray(model_output, dtype=float), spec.tonemap.value(target)
    return np.asarray(model_output, dtype=float), np.asarray(target, dtype=float)


def loss_value(spec: LossSpec, model_output, target):
    """Loss at (model_output, target); both must be nonnegative.

    Vectorized: scalar or elementwise array inputs.  hdr_star evaluates to
    the same value as hdr (the two differ only in the gradient).
    """
    _check_nonnegative("model_output", model_output)
    _check_nonnegative("target", target)
    a, t = _sides(spec, model_output, target)
    r2 = (a - t) ** 2
    if spec.kind == "l2":
        return r2
    if spec.kind == "rmse":
        return r2 / (t + spec.epsilon) ** 2
    # hdr and hdr_star
    return r2 / (a + spec.epsilon) ** 2


def loss_gradient(spec: LossSpec, model_output, target):
    """d loss / d model_output.

    For placement "both" the chain-rule factor of the tone map is included;
    for "target" the model output already lives in tone-mapped space, so the
    derivative is taken there.  For hdr_star the output-dependent denominator
    is held constant during differentiation.
    """
    _check_nonnegative("model_output", model_output)
    _check_nonnegative("target", target)
    a, t = _sides(spec, model_output, target)
    eps = spec.epsilon
    if spec.placement == "both":
        chain = spec.tonemap.derivative(model_output)
    else:
        chain = 1.0
    if spec.kind == "l2":
        return 2.0 * (a - t) * chain
    if spec.kind == "rmse":
        return 2.0 * (a - t) / (t + eps) ** 2 * chain
    if spec.kind == "hdr_star":
        return 2.0 * (a - t) / (a + eps) ** 2 * chain
    # hdr: quotient rule collapses to 2 (a - t)(t + eps) / (a + eps)^3
    return 2.0 * (a - t) * (t + eps) / (a + eps) ** 3 * chain


# Moment keys consumed by closed_form_minimizer.  All expectations are over
# the tone-mapped noisy target u = T(target) (u = target when no map applies):
#   mean          E[u]
#   second_moment E[u^2]
#   inv_sq        E[1 / (u + eps)^2]
#   ratio         E[u / (u + eps)^2]
#   inv_mean      E[1 / u]        (small-eps form only)
#   inv_sq_raw    E[1 / u^2]      (small-eps form only)
_REQUIRED_MOMENTS = {
    ("l2", False): ("mean",),
    ("l2", True): ("mean",),
    ("hdr", False): ("mean", "second_moment"),
    ("hdr", True): ("mean", "second_moment"),
    ("rmse", False): ("ratio", "inv_sq"),
    ("rmse", True): ("inv_mean", "inv_sq_raw"),
    ("hdr_star", False): ("mean",),
    ("hdr_star", True): ("mean",),
}


def closed_form_minimizer(
    spec: LossSpec, moments: Mapping[str, float], small_eps: bool = False
) -> MinimizerForm:
    """Closed-form global minimizer of the expected loss.

    `moments` supplies the named expectations of the tone-mapped target.
    The exact-epsilon forms are the default; `small_eps=True` selects the
    eps -> 0 approximations instead (useful for curve reproduction, but they
    degrade near zero targets).
    """
    needed = _REQUIRED_MOMENTS[(spec.kind, small_eps)]
    got = {}
    for key in needed:
        if key not in moments:
            raise ContractError(
                f"missing moment {key!r} for {spec.kind} minimizer; requires {needed}"
            )
        val = float(moments[key])
        if not np.isfinite(val):
            raise ContractError(f"moment {key!r} is not finite: {val}")
        got[key] = val
    if "mean" in got and "second_moment" in got:
        if got["second_moment"] < got["mean"] ** 2 * (1.0 - 1e-12):
            raise ContractError(
                "inconsistent moments: second_moment < mean^2 "
                f"({got['second_moment']} < {got['mean']}**2)"
            )

    eps = spec.epsilon
    if spec.kind in ("l2", "hdr_star"):
        u_star = got["mean"]
    elif spec.kind == "hdr":
        if small_eps:
            u_star = got["second_moment"] / got["mean"]
        else:
            u_star = (got["second_moment"] + eps * got["mean"]) / (got["mean"] + eps)
    else:  # rmse
        if small_eps:
            u_star = got["inv_mean"] / got["inv_sq_raw"]
        else:
            u_star = got["ratio"] / got["inv_sq"]

    if spec.placement == "none":
        value = u_star
    else:
        value = float(spec.tonemap.inverse(u_star))
    return MinimizerForm(value=float(value), moment_terms=got)


def sample_moments(spec: LossSpec, targets: np.ndarray) -> dict:
    """Moments of the tone-mapped targets needed by the exact minimizer forms."""
    if spec.placement == "none":
        u = np.asarray(targets, dtype=np.float64)
    else:
        u = spec.tonemap.value(targets)
    eps = spec.epsilon
    moments = {
        "mean": float(np.mean(u)),
        "second_moment": float(np.mean(u * u)),
    }
    if spec.kind == "rmse":
        w = 1.0 / (u + eps) ** 2
        moments["inv_sq"] = float(np.mean(w))
        moments["ratio"] = float(np.mean(u * w))
    return moments


def sweep_configs(
    epsilon: float = 0.01,
    tonemaps: tuple[str, ...] = ("reinhard", "gamma", "reinhard_gamma"),
) -> tuple[LossSpec, ...]:
    """The 22-configuration model-selection grid.

    Three loss kinds with no tone mapping, the same three crossed with each
    tone map in target-only and both placements, plus the frozen-denominator
    variant, which is only meaningful untransformed.
    """
    specs = [LossSpec(kind, "none", epsilon) for kind in ("l2", "rmse", "hdr")]
    for kind in ("l2", "rmse", "hdr"):
        for name in tonemaps:
            for placement in ("target", "both"):
                specs.append(LossSpec(kind, placement, epsilon, make_tonemap(name)))
    specs.append(LossSpec("hdr_star", "none", epsilon))
    return tuple(specs)
