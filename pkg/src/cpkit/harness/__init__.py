"""Seeded scenarios and Monte Carlo verification suites."""
from .rng import generator, split_seed, trial_rng
from .suites import SUITES, Suite, default_suites, run_suite

__all__ = ["SUITES", "Suite", "default_suites", "generator", "run_suite", "split_seed", "trial_rng"]
