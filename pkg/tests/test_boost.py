import json

import pytest

from n3l.boost import (
    BoostConfig, BoostRun, CheckpointLoadError, augment, derive_seed, greedy_baseline, run_boost,
)
from n3l.exact import solve_exact
from n3l.grid import GridConfig
from n3l.pool import PoolEntry, TopPool


def small(**kw):
    base = dict(n=5, generations=3, pool_capacity=40, configs_per_generation=30, train_steps=15,
                batch_size=8, dim=8, heads=2, layers=1, eval_every=5, seed=3)
    base.update(kw)
    return BoostConfig(**base)


def test_augment_examples():
    asym = GridConfig(5, [(0, 1), (2, 4), (3, 3)])
    assert len(augment([asym])) == 8
    corners = GridConfig(5, [(0, 0), (0, 4), (4, 0), (4, 4)])
    assert augment([corners]) == [[0, 4, 20, 24]]
    configs = [asym, corners, GridConfig(5, [(1, 1), (1, 2)])]
    assert len(augment(configs)) <= 8 * len(configs)
    assert all(seq == sorted(seq) for seq in augment(configs))


def test_augment_accepts_pool_entries():
    pool = TopPool(5)
    pool.insert(GridConfig(5, [(0, 1), (2, 4), (3, 3)]))
    assert isinstance(pool.snapshot()[0], PoolEntry)
    assert len(augment(pool.snapshot())) == 8


def test_config_validation():
    with pytest.raises(ValueError):
        BoostConfig.from_dict({"n": 5, "bogus": 1})
    with pytest.raises(ValueError):
        BoostConfig(n=5, generations=0)
    cfg = BoostConfig.from_dict({"n": 5, "pool_capacity": 30})
    assert cfg.initial_pool == 30
    assert BoostConfig.from_dict(cfg.to_dict()) == cfg


def test_derive_seed_distinct():
    seeds = {derive_seed(0, g, p) for g in range(5) for p in range(5)}
    assert len(seeds) == 25


def test_run_is_deterministic():
    _, a = run_boost(small(generations=2))
    _, b = run_boost(small(generations=2))
    assert a == b


def test_best_score_monotone():
    pool, reports = run_boost(small())
    bests = [r.best_score for r in reports]
    assert bests == sorted(bests)
    assert pool.best_score == bests[-1]
    pool.check()


def test_single_generation_equals_run_generation():
    cfg = small(generations=1)
    _, reports = run_boost(cfg)
    run = BoostRun(cfg)
    run.initialize()
    assert run.run_generation() == reports[0]


def test_optimal_pool_stays_optimal():
    cfg = small(generations=1, pool_capacity=5)
    run = BoostRun(cfg)
    opt = solve_exact(5).certificate
    run.pool.insert(opt)
    report = run.run_generation()
    assert report.best_score == 10


def test_checkpoint_layout_and_resume(tmp_path):
    cfg = small()
    full_dir, part_dir = tmp_path / "full", tmp_path / "part"
    _, full = run_boost(cfg, full_dir)
    for t in range(cfg.generations + 1):
        assert (full_dir / f"gen_{t}" / "pool.jsonl").exists()
    assert (full_dir / "gen_1" / "model.ckpt").exists()
    assert (full_dir / "train_log.csv").exists()

    # interrupted after one generation, then resumed
    run = BoostRun(cfg, part_dir)
    run.initialize()
    run.run_generation()
    resumed = BoostRun.resume(part_dir)
    assert resumed.generation == 1
    assert resumed.pool.snapshot() == run.pool.snapshot()
    resumed.run()
    assert resumed.reports == full
    for t in range(1, cfg.generations + 1):
        a = (full_dir / f"gen_{t}" / "pool.jsonl").read_bytes()
        assert a == (part_dir / f"gen_{t}" / "pool.jsonl").read_bytes()
    assert (full_dir / "train_log.csv").read_text() == (part_dir / "train_log.csv").read_text()


def test_resume_ignores_half_written_generation(tmp_path):
    cfg = small(generations=2)
    run = BoostRun(cfg, tmp_path)
    run.initialize()
    run.run_generation()
    run.run_generation()
    (tmp_path / "gen_2" / "report.json").unlink()
    resumed = BoostRun.resume(tmp_path)
    assert resumed.generation == 1
    resumed.run()
    assert resumed.reports == run.reports


def test_resume_can_extend_generations(tmp_path):
    run_boost(small(generations=1), tmp_path)
    pool, reports = run_boost(small(generations=2), tmp_path, resume=True)
    assert len(reports) == 2


def test_resume_rejects_changed_config(tmp_path):
    run_boost(small(generations=1), tmp_path)
    with pytest.raises(CheckpointLoadError):
        BoostRun.resume(tmp_path, small(generations=1, lr=0.5))


def test_corrupted_pool_reports_line(tmp_path):
    run_boost(small(generations=1), tmp_path)
    path = tmp_path / "gen_1" / "pool.jsonl"
    lines = path.read_text().splitlines()
    lines[2] = '{"n": 5, "score": 3, "tokens": [0, 1, 2]}'
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CheckpointLoadError, match="pool.jsonl:3"):
        BoostRun.resume(tmp_path)


def test_corrupted_model_checkpoint(tmp_path):
    run_boost(small(generations=1), tmp_path)
    (tmp_path / "gen_1" / "model.ckpt").write_text("{ nope")
    with pytest.raises(CheckpointLoadError, match="model.ckpt:1"):
        BoostRun.resume(tmp_path)


def test_reports_written_as_json(tmp_path):
    _, reports = run_boost(small(generations=1), tmp_path)
    rec = json.loads((tmp_path / "gen_1" / "report.json").read_text())
    assert rec["best_score"] == reports[0].best_score
    assert rec["candidates"] == 30


def test_greedy_baseline():
    best = greedy_baseline(6, 50, 0)
    assert len(best) >= 9
