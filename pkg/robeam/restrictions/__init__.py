from ..design import MethodTag
from .baselines import build_power_min_nonrobust, mrt_design
from .bti import build_power_min_bti
from .build import build_power_min
from .ldi import build_power_min_ldi
from .params import RestrictionParams, chi2_inv_cdf, solve_v
from .sproc import build_power_min_sproc
