"""The online hyperparameter controller.

Every hyperparameter dimension ``i`` is handled by its own family of
:class:`~hypercontroller.estimator.RidgeModel` predictors, keyed by the
context ``c_i`` (the last ``s`` grid indices chosen for that dimension) and
the candidate action ``a``. All predictors regress the next scalar reward on
the shared window of the last ``s`` rewards.

Interaction is a strict alternation::

    ctrl = HyperController(space, s=1, d=10, seed=0)
    for _ in range(n):
        sug = ctrl.suggest()
        ctrl.observe(train_one_iteration(sug.config))

During the first ``s`` iterations actions are drawn uniformly; afterwards
each dimension greedily takes the action with the largest predicted reward,
breaking exact ties uniformly at random.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import (
    PhaseError,
    SnapshotError,
    check_finite_scalar,
    check_positive_int,
    check_positive_real,
)
from .estimator import RidgeModel, RingBuffer
from .hyperspace import HyperSpace, build_grid, index_to_config

SNAPSHOT_FORMAT = "hypercontroller.snapshot"
SNAPSHOT_VERSION = 1

AWAITING_SUGGEST = "awaiting_suggest"
AWAITING_REWARD = "awaiting_reward"


@dataclass(frozen=True)
class Suggestion:
    """Configuration emitted for iteration ``iteration``.

    ``explored[i]`` is True when dimension ``i`` was sampled uniformly
    (warmup) rather than chosen greedily.
    """

    iteration: int
    index: tuple[int, ...]
    config: dict
    explored: tuple[bool, ...]

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "index": list(self.index),
            "config": dict(self.config),
            "explored": list(self.explored),
        }


def dimension_streams(seed: int, h: int) -> list[np.random.Generator]:
    """One independent generator per dimension, derived from ``seed``.

    Stream ``i`` depends only on ``(seed, i)``, not on ``h``.
    """
    return [np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(i,)))) for i in range(h)]


class HyperController(BaseEstimator):
    """Greedy per-dimension hyperparameter controller.

    Parameters
    ----------
    space : HyperSpace
        Box of hyperparameters to control.
    s : int, default=1
        Number of past rewards used as regressors (and length of the
        per-dimension action context).
    d : int, default=10
        Grid points per dimension.
    lam : float, default=1.0
        Ridge penalty of every predictor.
    seed : int, default=0
        Master seed; each dimension gets its own derived stream.

    Attributes
    ----------
    grid_ : Grid
    t_ : int
        Completed suggest/observe pairs.
    models_ : dict
        Materialized predictors keyed by ``(i, context, a)``.
    """

    def __init__(self, space: HyperSpace, s: int = 1, d: int = 10, lam: float = 1.0, seed: int = 0):
        self.space = space
        self.s = s
        self.d = d
        self.lam = lam
        self.seed = seed

    # -- setup -------------------------------------------------------------

    def _check_params(self):
        if not isinstance(self.space, HyperSpace):
            raise TypeError(f"space must be a HyperSpace, got {type(self.space).__name__}")
        check_positive_int(self.s, "s")
        check_positive_int(self.d, "d", minimum=2)
        check_positive_real(self.lam, "lam")
        check_positive_int(self.seed, "seed", minimum=0)

    def reset(self) -> "HyperController":
        """Discard all learned state and start again from iteration 0."""
        self._check_params()
        h = self.space.h
        self.grid_ = build_grid(self.space, self.d)
        self.t_ = 0
        self.window_ = RingBuffer(self.s)
        self.histories_ = [deque(maxlen=self.s) for _ in range(h)]
        self.models_: dict[tuple, RidgeModel] = {}
        self.rngs_ = dimension_streams(self.seed, h)
        self.phase_ = AWAITING_SUGGEST
        self.pending_: Suggestion | None = None
        self.pending_contexts_: tuple | None = None
        return self

    def _ensure_ready(self):
        if not hasattr(self, "t_"):
            self.reset()

    @property
    def phase(self) -> str:
        self._ensure_ready()
        return self.phase_

    @property
    def n_models(self) -> int:
        return len(getattr(self, "models_", ()))

    # -- selection and updates ------------------------------------------------

    def context(self, i: int) -> tuple[int, ...]:
        """Last ``s`` actions of dimension ``i``, oldest first."""
        self._ensure_ready()
        return tuple(self.histories_[i])

    def predictions(self, i: int, context=None, xi=None) -> np.ndarray:
        """Predicted reward of every action of dimension ``i``.

        Defaults to the current context and reward window. Unvisited
        (context, action) pairs predict exactly 0.
        """
        self._ensure_ready()
        context = self.context(i) if context is None else tuple(context)
        xi = self.window_.to_array() if xi is None else np.asarray(xi, dtype=float)
        out = np.zeros(self.d)
        for a in range(self.d):
            model = self.models_.get((i, context, a))
            if model is not None:
                out[a] = model.G @ xi
        return out

    def _select(self, i: int, xi: np.ndarray) -> int:
        preds = self.predictions(i, xi=xi)
        best = np.flatnonzero(preds == preds.max())
        if best.size == 1:
            return int(best[0])
        return int(best[self.rngs_[i].integers(best.size)])

    def suggest(self) -> Suggestion:
        """Choose the configuration for the current iteration."""
        self._ensure_ready()
        if self.phase_ != AWAITING_SUGGEST:
            raise PhaseError(f"suggest() called in phase {self.phase_!r}; observe() the pending reward first")
        warmup = self.t_ < self.s
        xi = None if warmup else self.window_.to_array()
        index, contexts = [], []
        for i in range(self.space.h):
            if warmup:
                a = int(self.rngs_[i].integers(self.d))
                contexts.append(None)
            else:
                a = self._select(i, xi)
                contexts.append(self.context(i))
            index.append(a)
        index = tuple(index)
        sug = Suggestion(
            iteration=self.t_,
            index=index,
            config=index_to_config(self.grid_, index),
            explored=(warmup,) * self.space.h,
        )
        self.pending_ = sug
        self.pending_contexts_ = tuple(contexts)
        self.phase_ = AWAITING_REWARD
        return sug

    def observe(self, reward: float) -> "HyperController":
        """Absorb the reward obtained with the pending suggestion."""
        self._ensure_ready()
        if self.phase_ != AWAITING_REWARD:
            raise PhaseError(f"observe() called in phase {self.phase_!r}; call suggest() first")
        reward = check_finite_scalar(reward, "reward")
        sug = self.pending_
        if self.t_ >= self.s:
            xi = self.window_.to_array()
            for i, (ctx, a) in enumerate(zip(self.pending_contexts_, sug.index)):
                key = (i, ctx, a)
                model = self.models_.get(key)
                if model is None:
                    model = self.models_[key] = RidgeModel.fresh(self.s, self.lam)
                model.update(xi, reward, t=self.t_)
        self.window_.append(reward)
        for hist, a in zip(self.histories_, sug.index):
            hist.append(a)
        self.t_ += 1
        self.pending_ = None
        self.pending_contexts_ = None
        self.phase_ = AWAITING_SUGGEST
        return self

    # -- persistence ----------------------------------------------------------

    def snapshot(self) -> dict:
        """JSON-serializable document capturing the complete state."""
        self._ensure_ready()
        pending = None
        if self.pending_ is not None:
            pending = self.pending_.to_dict()
            pending["contexts"] = [None if c is None else list(c) for c in self.pending_contexts_]
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "params": {
                "space": self.space.to_dicts(),
                "s": self.s,
                "d": self.d,
                "lam": self.lam,
                "seed": self.seed,
            },
            "t": self.t_,
            "phase": self.phase_,
            "window": self.window_.to_list(),
            "histories": [list(hst) for hst in self.histories_],
            "rng": [rng.bit_generator.state for rng in self.rngs_],
            "pending": pending,
            "models": [
                {"dim": i, "context": list(ctx), "action": a, **model.to_dict()}
                for (i, ctx, a), model in self.models_.items()
            ],
        }

    @classmethod
    def restore(cls, doc: dict) -> "HyperController":
        """Rebuild a controller from :meth:`snapshot` output.

        Raises
        ------
        SnapshotError
            On a version mismatch or any inconsistency in the document.
        """
        try:
            return cls._restore(doc)
        except SnapshotError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise SnapshotError(f"corrupted snapshot: {exc}") from exc

    @classmethod
    def _restore(cls, doc: dict) -> "HyperController":
        if not isinstance(doc, dict) or doc.get("format") != SNAPSHOT_FORMAT:
            raise SnapshotError("not a controller snapshot")
        if doc.get("version") != SNAPSHOT_VERSION:
            raise SnapshotError(f"unsupported snapshot version {doc.get('version')!r}")
        p = doc["params"]
        ctrl = cls(HyperSpace.from_dicts(p["space"]), s=p["s"], d=p["d"], lam=p["lam"], seed=p["seed"])
        ctrl.reset()
        s, d, h = ctrl.s, ctrl.d, ctrl.space.h

        t = doc["t"]
        if not isinstance(t, int) or t < 0:
            raise SnapshotError("t must be a non-negative integer")
        expected = min(t, s)
        window = doc["window"]
        if len(window) != expected:
            raise SnapshotError(f"reward window has {len(window)} entries, expected {expected}")
        histories = doc["histories"]
        if len(histories) != h or any(len(hst) != expected for hst in histories):
            raise SnapshotError("action histories inconsistent with t and s")
        for hst in histories:
            _check_actions(hst, d)
        ctrl.t_ = t
        ctrl.window_ = RingBuffer(s, [check_finite_scalar(x, "window entry") for x in window])
        ctrl.histories_ = [deque(hst, maxlen=s) for hst in histories]

        if len(doc["rng"]) != h:
            raise SnapshotError("expected one RNG state per dimension")
        for rng, state in zip(ctrl.rngs_, doc["rng"]):
            rng.bit_generator.state = state

        for entry in doc["models"]:
            i, ctx, a = entry["dim"], tuple(entry["context"]), entry["action"]
            if not (isinstance(i, int) and 0 <= i < h) or len(ctx) != s:
                raise SnapshotError(f"invalid model key {(i, ctx, a)}")
            _check_actions(ctx, d)
            _check_actions([a], d)
            ctrl.models_[(i, ctx, a)] = RidgeModel.from_dict(entry, s)

        phase = doc["phase"]
        if phase not in (AWAITING_SUGGEST, AWAITING_REWARD):
            raise SnapshotError(f"unknown phase {phase!r}")
        ctrl.phase_ = phase
        pending = doc["pending"]
        if (phase == AWAITING_REWARD) != (pending is not None):
            raise SnapshotError("pending suggestion inconsistent with phase")
        if pending is not None:
            index = tuple(pending["index"])
            if len(index) != h or pending["iteration"] != t:
                raise SnapshotError("pending suggestion inconsistent with state")
            _check_actions(index, d)
            contexts = tuple(None if c is None else tuple(c) for c in pending["contexts"])
            if len(contexts) != h or any(c is not None and len(c) != s for c in contexts):
                raise SnapshotError("pending contexts inconsistent with s")
            ctrl.pending_ = Suggestion(
                iteration=t,
                index=index,
                config=index_to_config(ctrl.grid_, index),
                explored=tuple(bool(x) for x in pending["explored"]),
            )
            ctrl.pending_contexts_ = contexts
        return ctrl


def _check_actions(actions, d: int):
    for a in actions:
        if isinstance(a, bool) or not isinstance(a, int) or not 0 <= a < d:
            raise SnapshotError(f"action index {a!r} out of range [0, {d})")
