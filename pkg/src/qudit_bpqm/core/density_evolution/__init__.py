from .bags import RngStream, ChannelBag, BagStats, bag_stats, bag_bit_combine, bag_check_combine
from .polar import PolarDesignResult, SweepRow, polar_de, polar_channel_errors, design_info_set, design_from_errors, design_polar_code, rate_vs_lambda0_sweep, chain_rule_gap
from .ldpc import Verdict, LdpcDERun, BisectionStep, ThresholdResult, CurvePoint, ldpc_de_iteration, ldpc_de_run, threshold_bisect, holevo_limit_lambda0, ldpc_threshold_curve
