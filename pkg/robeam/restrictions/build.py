__all__ = ["build_power_min"]

from ..conic import ConicProgram
from ..design import MethodTag
from ..scenario import ChannelSet, ScenarioConfig
from ..utils.structures import RESTRICTION_REGISTRY


def build_power_min(method, cs: ChannelSet, cfg: ScenarioConfig) -> ConicProgram:
    """
    Compiles the power-minimization program of `method` by looking its
    builder up in `RESTRICTION_REGISTRY`. MRT is a closed-form design and
    has no program, see `mrt_design`.
    """
    method = MethodTag.parse(method)
    return RESTRICTION_REGISTRY.get(method.builder_name)(cs, cfg)
