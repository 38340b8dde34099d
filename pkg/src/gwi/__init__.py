"""Generalized Wigner inequalities for N-qubit systems."""

__version__ = "0.1.0"

from .errors import ArityError, CapacityError, DomainError, GWIError, NumericalError, ValidationError
from .expression import (
    InequalityExpression,
    build_gwi,
    build_wigner_original,
    evaluate,
    expand_to_correlators,
    gwi_correlator,
    hardy_witness,
)
from .lhv import jpd_feasible, lhv_max, strategy_value, verify_marginal_identity
from .observables import SettingPair, SettingSet, setting_set_from_angles, xy_setting, xz_setting
from .optimize import OptimizerConfig, maximize, visibility_threshold
from .qstate import (
    MixedState,
    Observable,
    PureState,
    add_white_noise,
    expectation,
    joint_probability,
    make_cluster4,
    make_ghz,
    make_singlet,
    make_w,
)
