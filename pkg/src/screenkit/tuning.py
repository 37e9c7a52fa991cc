"""Budgeted random hyperparameter search and a patience-based early stopper."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

from .rng import SplitMix64, derive_seed


@dataclass(frozen=True)
class RealParam:
    name: str
    low: float
    high: float
    log: bool = False

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"{self.name}: empty range [{self.low}, {self.high}]")
        if self.log and self.low <= 0:
            raise ValueError(f"{self.name}: log-scaled range must be positive")

    def sample(self, rng: SplitMix64) -> float:
        u = float(rng.random(1)[0])
        if self.log:
            v = math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low)))
        else:
            v = self.low + u * (self.high - self.low)
        return min(max(v, self.low), self.high)

    def contains(self, v) -> bool:
        return self.low <= v <= self.high


@dataclass(frozen=True)
class IntParam:
    name: str
    low: int
    high: int  # inclusive

    def __post_init__(self):
        if self.low > self.high:
            raise ValueError(f"{self.name}: empty range [{self.low}, {self.high}]")

    def sample(self, rng: SplitMix64) -> int:
        return self.low + int(rng.integers(self.high - self.low + 1, 1)[0])

    def contains(self, v) -> bool:
        return isinstance(v, int) and self.low <= v <= self.high


@dataclass(frozen=True)
class CategoricalParam:
    name: str
    choices: tuple

    def __post_init__(self):
        if not self.choices:
            raise ValueError(f"{self.name}: no choices")

    def sample(self, rng: SplitMix64):
        return self.choices[int(rng.integers(len(self.choices), 1)[0])]

    def contains(self, v) -> bool:
        return v in self.choices


@dataclass(frozen=True)
class SearchSpace:
    parameters: tuple

    def __post_init__(self):
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")

    def sample(self, seed: int) -> dict[str, Any]:
        rng = SplitMix64(seed)
        return {p.name: p.sample(rng) for p in self.parameters}

    def contains(self, params: dict) -> bool:
        return all(p.contains(params[p.name]) for p in self.parameters)


RF_SEARCH_SPACE = SearchSpace((
    IntParam("n_estimators", 50, 300),
    IntParam("max_depth", 8, 32),
    CategoricalParam("features_per_split", (0.25, 0.33, 0.5, 1.0)),
))


@dataclass(frozen=True)
class Trial:
    index: int
    params: dict
    objective: float | None  # None marks a failed trial
    duration: float = field(default=0.0, compare=False)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.objective is None

    def to_json(self) -> str:
        d = {"index": self.index, "params": self.params, "objective": self.objective,
             "duration": round(self.duration, 6)}
        if self.error:
            d["error"] = self.error
        return json.dumps(d, sort_keys=True)


@dataclass(frozen=True)
class StudyResult:
    trials: tuple[Trial, ...]
    best_trial: int
    seed: int

    @property
    def best(self) -> Trial:
        return self.trials[self.best_trial]

    def to_dict(self) -> dict:
        """Study outcome without timings, so replays compare byte-for-byte."""
        return {
            "seed": self.seed,
            "best_trial": self.best_trial,
            "best_params": self.best.params,
            "best_objective": self.best.objective,
            "trials": [{"index": t.index, "params": t.params, "objective": t.objective,
                        **({"error": t.error} if t.error else {})} for t in self.trials],
        }


class Sampler(Protocol):
    def propose(self, space: SearchSpace, budget: int, seed: int) -> list[dict]: ...


class RandomSampler:
    """Trial ``i`` draws from ``derive_seed(seed, i)``; a longer budget extends the same sequence."""

    def propose(self, space: SearchSpace, budget: int, seed: int) -> list[dict]:
        return [space.sample(derive_seed(seed, i)) for i in range(budget)]


def _run_trial(index: int, params: dict, objective: Callable[[dict], float]) -> Trial:
    t0 = time.perf_counter()
    try:
        value = objective(params)
        if value is None or not math.isfinite(value):
            return Trial(index, params, None, time.perf_counter() - t0, f"non-finite objective {value!r}")
        return Trial(index, params, float(value), time.perf_counter() - t0)
    except Exception as exc:  # a failed trial is a result, not an abort
        return Trial(index, params, None, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")


def random_search(space: SearchSpace, objective: Callable[[dict], float], budget: int = 20,
                  seed: int = 0, n_jobs: int = 1, sampler: Sampler | None = None,
                  log_path=None) -> StudyResult:
    """Evaluate ``budget`` sampled configurations and keep the minimum.

    All parameter samples are drawn before any evaluation, so ``n_jobs`` does
    not change what is evaluated or which trial wins.  The objective may raise
    or return a non-finite value; such trials are recorded as failed.

    Raises
    ------
    RuntimeError
        If every trial fails.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    proposals = (sampler or RandomSampler()).propose(space, budget, seed)
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trials = list(pool.map(lambda ip: _run_trial(ip[0], ip[1], objective), enumerate(proposals)))
    else:
        trials = [_run_trial(i, p, objective) for i, p in enumerate(proposals)]
    if log_path is not None:
        with open(log_path, "w", encoding="utf-8") as fh:
            for t in trials:
                fh.write(t.to_json() + "\n")
    done = [t for t in trials if not t.failed]
    if not done:
        raise RuntimeError(f"all {budget} trials failed; first error: {trials[0].error}")
    best = min(done, key=lambda t: (t.objective, t.index))
    return StudyResult(tuple(trials), best.index, int(seed))


class EarlyStopping:
    """Streaming patience rule over per-epoch validation losses.

    Training stops after the first epoch that lies ``patience`` epochs past
    the best epoch without a strict improvement.
    """

    def __init__(self, patience: int = 5):
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.patience = patience
        self.best_epoch = -1
        self.best_loss = math.inf
        self.epoch = -1

    def update(self, loss: float) -> bool:
        """Record one epoch's loss; returns True when training should stop."""
        self.epoch += 1
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = self.epoch
        return self.epoch - self.best_epoch >= self.patience


def early_stopping(losses, patience: int = 5) -> tuple[int, int]:
    """Apply :class:`EarlyStopping` to a stream.

    Returns ``(stop_epoch, best_epoch)``, where ``stop_epoch`` is the last
    epoch consumed (the final one if the rule never fires).
    """
    stopper = EarlyStopping(patience)
    for loss in losses:
        if stopper.update(loss):
            break
    if stopper.epoch < 0:
        raise ValueError("empty loss stream")
    return stopper.epoch, stopper.best_epoch
