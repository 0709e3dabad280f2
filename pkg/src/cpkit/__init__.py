"""Distribution-free predictive inference: conformal prediction, risk control,
calibration and permutation tests."""
from .quantiles import (
    WeightedEmpirical, augmented_threshold_equiv, empirical_cdf, order_statistic,
    quantile, weighted_quantile,
)
from .sets import PredictionSet
from .scores import FittedScore, Score, eval_score, fit_predictor, score_matrix
from .conformal import (
    conformal_pvalue, full_set_discretized, full_set_finite, full_set_least_squares,
    pac_level, smoothed_pvalue, split_set, split_threshold,
)
from .conditional import GroupFn, SelectionRule, binwise_split_thresholds, mondrian_set, selective_set
from .weighted import (
    LikelihoodRatio, fixed_weight_set, localized_set, randomly_localized_set, shift_weights,
    weighted_full_set, weighted_split_set,
)
from .crossval import (
    cc_coverage_bound, cross_conformal_set, cv_plus_interval, jackknife_interval,
    make_folds, tournament_rowsum_check,
)
from .online import (
    MartingaleState, StreamState, TrackerState, martingale_update, online_pvalue_step,
    tracker_longrun_bound, tracker_step,
)
from .risk import bh_procedure, fwer_level, outlier_pvalues, risk_calibrate
from .aggregate import SetFamily, majority_vote, recalibrated_vote
from .calibration import (
    binned_ece_estimate, dce_estimate, ece_discrete, fit_calibrator, venn_abers,
)
from .independence import (
    binned_local_permutation_test, local_permutation_test, marginal_independence_test,
    regression_ci,
)

__version__ = "0.1.0"
