"""Enrichment/temptation recommender model, policies, estimation and experiments."""

import json

from . import _temptrec
from ._temptrec import (
    ConfigError,
    ContractError,
    EstimatedModel,
    ExperimentConfig,
    InputError,
    SandboxConfig,
    ScenarioConfig,
    TrainConfig,
    TrainingError,
    World,
    baseline_slate,
    brute_force_optimal,
    greedy_expected_value,
    greedy_slate,
    make_world,
    model_from_checkpoint,
    write_synthetic_ratings,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "EstimatedModel",
    "ExperimentConfig",
    "InputError",
    "SandboxConfig",
    "ScenarioConfig",
    "TrainConfig",
    "TrainingError",
    "World",
    "baseline_slate",
    "brute_force_optimal",
    "fit",
    "greedy_expected_value",
    "greedy_slate",
    "make_world",
    "model_from_checkpoint",
    "overall_individual_enrichment",
    "replicate",
    "run_movielens",
    "run_policy",
    "run_warmup",
    "write_synthetic_ratings",
]


def run_warmup(world, seed, rounds=25, slate_size=15):
    """Random warm-up slates; mutates `world` and returns the log as a dict."""
    return json.loads(_temptrec.run_warmup_json(world, seed, rounds, slate_size))


def run_policy(world, policy, seed, rounds=50, slate_size=15):
    """Perfect-information policy rounds; mutates `world` and returns the log as a dict."""
    return json.loads(_temptrec.run_policy_json(world, policy, seed, rounds, slate_size))


def overall_individual_enrichment(log, world):
    return _temptrec.overall_individual_enrichment_json(json.dumps(log), world)


def fit(log, num_users, num_items, config=None, expected_outside_enrichment=None):
    config = config or TrainConfig()
    outside = expected_outside_enrichment or [0.0] * num_users
    return _temptrec.fit_json(json.dumps(log), num_users, num_items, config, list(outside))


def replicate(config):
    """Run a full experiment and return the metrics report as a dict."""
    return json.loads(_temptrec.replicate_json(config))


def run_movielens(ratings_path, sandbox=None, rounds=50, epochs=600):
    return json.loads(_temptrec.movielens_report_json(str(ratings_path), sandbox or SandboxConfig(), rounds, epochs))
