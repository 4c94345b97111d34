"""Smooth-function core: expression DAGs, Taylor-mode jets and bump builders."""

from .bumps import (
    dilate_scale,
    linear_bump,
    monomial_bump,
    plateau,
    smooth_step,
    unit_linear_bump,
)
from .expr import (
    SmoothExpr,
    add,
    affine,
    atan_stretch,
    canonical,
    component,
    compose,
    const,
    coord,
    derivative,
    dilate,
    from_json,
    gexp,
    identity,
    is_zero,
    mul,
    power,
    quotient,
    scale,
    stack,
    support_bound,
    tan_stretch,
    to_json,
    translate,
    with_support,
    zero,
)
from .jets import (
    Jet,
    directional_jet,
    directional_jets,
    eval_jet,
    jets_1d,
    partial_jets,
    value,
)
from .series import CapabilityError, TaylorAlgebra, algebra, max_jet_order

__all__ = [name for name in dir() if not name.startswith("_")]
