"""PatternBoost outer loop: augment the pool, train, sample, repair, reinsert.

Checkpoint layout under the run directory::

    config.json
    train_log.csv
    gen_0/pool.jsonl            greedy-initialized pool
    gen_<t>/pool.jsonl
    gen_<t>/model.ckpt          weights plus optimizer state
    gen_<t>/train_log.csv
    gen_<t>/report.json         written last; marks the generation complete
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import nn
from .greedy import generate_pool
from .grid import GridConfig, encode, symmetry_images
from .lines import line_table
from .pool import InsertResult, PoolEntry, PoolLoadError, TopPool, load_file
from .seqmodel import ModelConfig, TrainingLog, Transformer, decode_and_repair, sample, train_steps

log = logging.getLogger(__name__)


class CheckpointLoadError(ValueError):
    pass


class BoostIOError(OSError):
    def __init__(self, message: str, report: "GenerationReport"):
        super().__init__(message)
        self.report = report


@dataclass
class BoostConfig:
    n: int
    generations: int = 5
    pool_capacity: int = 2000
    initial_pool: int | None = None
    configs_per_generation: int = 2000
    train_steps: int = 500
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 0.1
    layers: int = 2
    heads: int = 2
    dim: int = 32
    ff_dim: int | None = None
    temperature: float = 1.0
    seed: int = 0
    reset_model: bool = False
    holdout: float = 0.1
    eval_every: int = 100

    def __post_init__(self):
        for name in ("n", "generations", "pool_capacity", "configs_per_generation", "train_steps", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.initial_pool is None:
            self.initial_pool = self.pool_capacity

    @classmethod
    def from_dict(cls, d: dict) -> "BoostConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown boost config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def model_config(self, generation: int = 0) -> ModelConfig:
        init_seed = derive_seed(self.seed, generation if self.reset_model else 0, 3)
        return ModelConfig(self.n, self.layers, self.heads, self.dim, self.ff_dim,
                           self.temperature, init_seed)

    @property
    def candidate_budget(self) -> int:
        return self.initial_pool + self.generations * self.configs_per_generation


@dataclass
class GenerationReport:
    generation: int
    best_score: int
    mean_score: float
    pool_size: int
    train_loss: float | None
    test_loss: float | None
    candidates: int = 0
    accepted: int = 0
    candidate_best: int = 0
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return asdict(self)


def derive_seed(seed: int, generation: int, purpose: int) -> int:
    return int(np.random.SeedSequence([seed, generation, purpose]).generate_state(1)[0])


def augment(entries) -> list[list[int]]:
    """Every distinct symmetry image of every entry, as sorted token lists."""
    out: list[list[int]] = []
    for e in entries:
        config = e.config() if isinstance(e, PoolEntry) else e
        seen = set()
        for img in symmetry_images(config):
            toks = tuple(sorted(encode(img)))
            if toks not in seen:
                seen.add(toks)
                out.append(list(toks))
    return out


def pool_stats(pool: TopPool) -> tuple[int, float]:
    entries = pool.snapshot()
    if not entries:
        return 0, 0.0
    return entries[0].score, float(np.mean([e.score for e in entries]))


class BoostRun:
    def __init__(self, cfg: BoostConfig, out_dir=None):
        self.cfg = cfg
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.table = line_table(cfg.n)
        self.pool = TopPool(cfg.pool_capacity, cfg.n)
        self.model = Transformer(cfg.model_config())
        self.optimizer = self._make_optimizer()
        self.reports: list[GenerationReport] = []
        self.train_log = TrainingLog()
        self.global_step = 0

    def _make_optimizer(self) -> nn.Adam:
        return nn.AdamW(self.model.parameters(), lr=self.cfg.lr, weight_decay=self.cfg.weight_decay)

    @property
    def generation(self) -> int:
        return len(self.reports)

    def gen_dir(self, t: int) -> Path:
        return self.out_dir / f"gen_{t}"

    # -- lifecycle ---------------------------------------------------------------

    def initialize(self) -> None:
        cfg = self.cfg
        configs = generate_pool(cfg.n, cfg.initial_pool, derive_seed(cfg.seed, 0, 0))
        self.pool.insert_many(configs)
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            with open(self.out_dir / "config.json", "w") as f:
                json.dump(cfg.to_dict(), f, indent=2, sort_keys=True)
            self.gen_dir(0).mkdir(exist_ok=True)
            self.pool.save(self.gen_dir(0) / "pool.jsonl")

    def run_generation(self) -> GenerationReport:
        cfg = self.cfg
        t = self.generation + 1
        t0 = time.perf_counter()
        if cfg.reset_model:
            self.model = Transformer(cfg.model_config(t))
            self.optimizer = self._make_optimizer()
        data = augment(self.pool.snapshot())
        glog = train_steps(self.model, data, cfg.train_steps, seed=derive_seed(cfg.seed, t, 1),
                           batch_size=cfg.batch_size, holdout=cfg.holdout, eval_every=cfg.eval_every,
                           optimizer=self.optimizer, step_offset=self.global_step)
        self.global_step += cfg.train_steps
        seqs = sample(self.model, cfg.configs_per_generation, seed=derive_seed(cfg.seed, t, 2))
        repair_seed = derive_seed(cfg.seed, t, 4)
        candidates = [decode_and_repair(s, self.table, repair_seed + i) for i, s in enumerate(seqs)]
        tally = self.pool.insert_many(candidates)
        best, mean = pool_stats(self.pool)
        tail = glog.train_losses[-50:]
        tests = glog.test_losses
        report = GenerationReport(
            generation=t, best_score=best, mean_score=mean, pool_size=len(self.pool),
            train_loss=float(np.mean(tail)) if tail else None,
            test_loss=tests[-1][1] if tests else None,
            candidates=len(candidates), accepted=tally[InsertResult.ACCEPTED],
            candidate_best=max(map(len, candidates)),
            wall_time=time.perf_counter() - t0,
        )
        self.reports.append(report)
        self.train_log.extend(glog)
        log.info("generation %d: best=%d mean=%.3f pool=%d test_loss=%s", t, best, mean,
                 len(self.pool), report.test_loss)
        if self.out_dir is not None:
            try:
                self._checkpoint(t, glog, report)
            except OSError as e:
                raise BoostIOError(f"checkpoint for generation {t} failed: {e}", report) from e
        return report

    def _checkpoint(self, t: int, glog: TrainingLog, report: GenerationReport) -> None:
        d = self.gen_dir(t)
        d.mkdir(parents=True, exist_ok=True)
        self.pool.save(d / "pool.jsonl")
        nn.save_checkpoint(d / "model.ckpt", self.model, self.optimizer,
                           meta={"generation": t, "global_step": self.global_step,
                                 "model": self.model.cfg.to_dict()})
        glog.write_csv(d / "train_log.csv")
        glog.write_csv(self.out_dir / "train_log.csv", append=True)
        tmp = d / "report.json.tmp"
        with open(tmp, "w") as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        os.replace(tmp, d / "report.json")

    def run(self) -> list[GenerationReport]:
        while self.generation < self.cfg.generations:
            self.run_generation()
        return self.reports

    # -- resume --------------------------------------------------------------------

    @classmethod
    def resume(cls, out_dir, cfg: BoostConfig | None = None) -> "BoostRun":
        out_dir = Path(out_dir)
        cfg_path = out_dir / "config.json"
        try:
            with open(cfg_path) as f:
                saved = BoostConfig.from_dict(json.load(f))
        except json.JSONDecodeError as e:
            raise CheckpointLoadError(f"{cfg_path}:{e.lineno}: invalid JSON ({e.msg})") from None
        if cfg is not None and cfg.to_dict() != saved.to_dict():
            # only the generation count may be extended on resume
            a, b = cfg.to_dict(), saved.to_dict()
            a.pop("generations"), b.pop("generations")
            if a != b:
                raise CheckpointLoadError(f"{cfg_path}: config differs from the run being resumed")
            saved.generations = cfg.generations
        run = cls(saved, out_dir)
        done = 0
        while (out_dir / f"gen_{done + 1}" / "report.json").exists():
            done += 1
        try:
            for t in range(1, done + 1):
                rpath = out_dir / f"gen_{t}" / "report.json"
                try:
                    with open(rpath) as f:
                        run.reports.append(GenerationReport(**json.load(f)))
                except (json.JSONDecodeError, TypeError) as e:
                    line = getattr(e, "lineno", 1)
                    raise CheckpointLoadError(f"{rpath}:{line}: bad report ({e})") from None
            run.pool = load_file(out_dir / f"gen_{done}" / "pool.jsonl", saved.pool_capacity)
            run.pool.n = saved.n
            if done:
                if saved.reset_model:
                    run.model = Transformer(saved.model_config(done))
                    run.optimizer = run._make_optimizer()
                meta = nn.load_checkpoint(out_dir / f"gen_{done}" / "model.ckpt", run.model, run.optimizer)
                run.global_step = int(meta.get("global_step", done * saved.train_steps))
        except PoolLoadError as e:
            raise CheckpointLoadError(str(e)) from None
        except nn.CheckpointError as e:
            raise CheckpointLoadError(str(e)) from None
        # the run-level CSV may hold rows from a generation that never finished
        if done:
            logs = [out_dir / f"gen_{t}" / "train_log.csv" for t in range(1, done + 1)]
            with open(out_dir / "train_log.csv", "w") as out:
                out.write("step,train_loss,test_loss\n")
                for p in logs:
                    with open(p) as f:
                        out.writelines(f.readlines()[1:])
        elif (out_dir / "train_log.csv").exists():
            (out_dir / "train_log.csv").unlink()
        return run


def run_generation(run: BoostRun) -> GenerationReport:
    return run.run_generation()


def run_boost(cfg: BoostConfig, out_dir=None, resume: bool = False) -> tuple[TopPool, list[GenerationReport]]:
    if resume and out_dir is not None and (Path(out_dir) / "config.json").exists():
        run = BoostRun.resume(out_dir, cfg)
    else:
        run = BoostRun(cfg, out_dir)
        run.initialize()
    run.run()
    return run.pool, run.reports


def greedy_baseline(n: int, budget: int, seed: int) -> GridConfig:
    """Best of ``budget`` pure greedy saturations, seeded like the boost pool."""
    configs = generate_pool(n, budget, derive_seed(seed, 0, 0))
    return max(configs, key=len)
