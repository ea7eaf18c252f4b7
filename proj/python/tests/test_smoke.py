import json

import pytest

import temptrec


def small_world(seed=3, scenario="enriching"):
    config = temptrec.ScenarioConfig()
    config.m, config.n, config.k, config.seed = 6, 30, 5, seed
    config.scenario = scenario
    return temptrec.make_world(config)


def test_world_scores_and_round_trip():
    world = small_world()
    assert (world.num_users, world.num_items) == (6, 30)
    u, v = world.enrichment(0, 1), world.temptation(0, 1)
    back = temptrec.World.from_json(world.to_json())
    assert back.enrichment(0, 1) == u
    assert back.temptation(0, 1) == v
    assert json.loads(world.to_json())["format"] == "temptrec.world"


def test_greedy_slate_leads_with_best_expected_enrichment():
    world = small_world()
    slate = temptrec.greedy_slate(world, 0, 5)
    assert 0 < len(slate) <= 5
    values = [world.expected_enrichment(0, i) for i in range(world.num_items)]
    assert values[slate[0]] == max(values)
    ratings = temptrec.baseline_slate(world, "ratings_based", 0, 5)
    assert len(ratings) == 5


def test_greedy_matches_oracle_on_a_tiny_world():
    config = temptrec.ScenarioConfig()
    config.m, config.n, config.k, config.d, config.seed = 1, 3, 2, 1, 11
    world = temptrec.make_world(config)
    for rounds in (1, 2, 3):
        assert temptrec.greedy_expected_value(world, 0, rounds) == pytest.approx(
            temptrec.brute_force_optimal(world, 0, rounds), abs=1e-9
        )


def test_warmup_policy_and_fit():
    world = small_world()
    log = temptrec.run_warmup(world, seed=1, rounds=5)
    assert len(log["records"]) == 6 * 5
    config = temptrec.TrainConfig()
    config.epochs = 20
    outside = [world.expected_outside_enrichment(j) for j in range(world.num_users)]
    model = temptrec.fit(log, world.num_users, world.num_items, config, outside)
    assert model.sigma > 0
    for j in range(world.num_users):
        assert model.lambda_c(j) <= model.lambda_f(j)
    restored = temptrec.model_from_checkpoint(model.checkpoint(config))
    assert restored.enrichment(0, 0) == model.enrichment(0, 0)

    policy_log = temptrec.run_policy(world, "greedy_perfect", seed=2, rounds=3)
    assert len(policy_log["records"]) == 6 * 3
    assert isinstance(temptrec.overall_individual_enrichment(policy_log, world), float)


def test_replicate_report():
    config = temptrec.ExperimentConfig()
    config.scenario.m, config.scenario.n, config.scenario.k = 8, 30, 5
    config.warmup_rounds, config.policy_rounds, config.total_rounds = 5, 5, 10
    config.replications = 2
    config.seed = 4
    report = temptrec.replicate(config)
    assert report["format"] == "temptrec.report"
    assert len(report["results"]) == 5
    again = temptrec.replicate(config)
    report.pop("runtime_seconds")
    again.pop("runtime_seconds")
    assert report == again


def test_errors_map_to_python_exceptions(tmp_path):
    config = temptrec.ScenarioConfig()
    with pytest.raises(ValueError):
        config.scenario = "bogus"
    with pytest.raises(OSError):
        temptrec.run_movielens(tmp_path / "missing.csv")


def test_movielens_on_generated_ratings(tmp_path):
    path = tmp_path / "ratings.csv"
    temptrec.write_synthetic_ratings(str(path), users=120, movies=80, seed=2)
    sandbox = temptrec.SandboxConfig()
    sandbox.m_users, sandbox.n_movies, sandbox.resamples = 30, 30, 1
    report = temptrec.run_movielens(path, sandbox, rounds=5, epochs=20)
    assert [r["policy"] for r in report["results"]] == ["greedy_estimated", "ratings_based", "click_based"]
