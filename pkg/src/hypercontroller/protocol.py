"""Line-delimited JSON protocol for driving an external trainer.

The controller writes one JSON object per line to its output stream and
reads the trainer's replies from its input stream, strictly alternating::

    -> {"type": "init", "payload": {...}}
    -> {"type": "suggest", "iteration": 0, "config": {"lr": 0.001}}
    <- {"type": "reward", "iteration": 0, "value": 1.25}
    -> {"type": "suggest", "iteration": 1, "config": {...}}
    <- {"type": "stop"}

``iteration`` counts completed suggest/reward pairs from 0. A trainer may
answer any suggestion with ``stop`` instead of a reward; the suggestion then
stays pending and is re-issued after a resume.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, TextIO

from ._validation import SnapshotError
from .controller import AWAITING_REWARD, HyperController
from .hyperspace import HyperSpace

RUN_FORMAT = "hypercontroller.run"
RUN_VERSION = 1

EXIT_OK = 0
EXIT_PROTOCOL = 2
EXIT_DISCONNECTED = 3
EXIT_CONFIG = 4


class ProtocolError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    space: HyperSpace
    s: int = 1
    d: int = 10
    lam: float = 1.0
    seed: int = 0
    horizon: int = 1000
    snapshot_path: str | None = None

    def make_controller(self) -> HyperController:
        ctrl = HyperController(self.space, s=self.s, d=self.d, lam=self.lam, seed=self.seed)
        return ctrl.reset()

    def controller_params(self) -> dict:
        return {"space": self.space.to_dicts(), "s": self.s, "d": self.d, "lam": self.lam, "seed": self.seed}

    @classmethod
    def from_dict(cls, doc) -> "RunConfig":
        if not isinstance(doc, Mapping):
            raise ConfigError("run configuration must be a JSON object")
        if doc.get("format", RUN_FORMAT) != RUN_FORMAT or doc.get("version", RUN_VERSION) != RUN_VERSION:
            raise ConfigError("unsupported run configuration format/version")
        unknown = set(doc) - {"format", "version", "space", "controller", "horizon", "snapshot_path"}
        if unknown:
            raise ConfigError(f"unknown fields {sorted(unknown)}")
        try:
            space = HyperSpace.from_dicts(doc["space"])
        except KeyError:
            raise ConfigError("missing field 'space'") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"space: {exc}") from None
        ctrl = doc.get("controller", {})
        if not isinstance(ctrl, Mapping):
            raise ConfigError("controller must be an object")
        extra = set(ctrl) - {"s", "d", "lam", "seed"}
        if extra:
            raise ConfigError(f"controller: unknown fields {sorted(extra)}")
        cfg = cls(
            space=space,
            s=ctrl.get("s", 1),
            d=ctrl.get("d", 10),
            lam=ctrl.get("lam", 1.0),
            seed=ctrl.get("seed", 0),
            horizon=doc.get("horizon", 1000),
            snapshot_path=doc.get("snapshot_path"),
        )
        cfg.validate()
        return cfg

    def validate(self):
        if isinstance(self.horizon, bool) or not isinstance(self.horizon, int) or self.horizon < 1:
            raise ConfigError("horizon must be a positive integer")
        if self.snapshot_path is not None and not isinstance(self.snapshot_path, str):
            raise ConfigError("snapshot_path must be a string")
        try:
            HyperController(self.space, s=self.s, d=self.d, lam=self.lam, seed=self.seed)._check_params()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"controller: {exc}") from None

    def with_seed(self, seed: int) -> "RunConfig":
        cfg = replace(self, seed=seed)
        cfg.validate()
        return cfg


def load_run_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return RunConfig.from_dict(doc)


def save_snapshot(ctrl: HyperController, path) -> None:
    """Write a snapshot atomically (temp file plus rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name, dir=path.parent)
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(ctrl.snapshot(), fh)
    os.replace(tmp, path)


def load_snapshot(path) -> HyperController:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SnapshotError(f"{path}: invalid JSON: {exc}") from None
    return HyperController.restore(doc)


def encode(message: dict) -> str:
    return json.dumps(message, allow_nan=False, separators=(",", ":")) + "\n"


def suggest_message(sug) -> dict:
    return {"type": "suggest", "iteration": sug.iteration, "config": sug.config}


def error_message(text: str, **extra) -> dict:
    return {"type": "error", "payload": {"message": text, **extra}}


def parse_reply(line: str) -> dict:
    """Decode one trainer line; raise ProtocolError on malformed input."""
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON: {exc}") from None
    if not isinstance(msg, dict) or "type" not in msg:
        raise ProtocolError("message must be a JSON object with a 'type' field")
    if msg["type"] not in ("reward", "stop"):
        raise ProtocolError(f"unexpected message type {msg['type']!r}")
    return msg


class TuneSession:
    """Sequential request/response loop between a controller and a trainer."""

    def __init__(
        self,
        config: RunConfig,
        instream: TextIO,
        outstream: TextIO,
        controller: HyperController | None = None,
        snapshot_every: int = 0,
        snapshot_path=None,
    ):
        self.config = config
        self.instream = instream
        self.outstream = outstream
        self.controller = controller if controller is not None else config.make_controller()
        self.snapshot_every = snapshot_every
        self.snapshot_path = snapshot_path if snapshot_path is not None else config.snapshot_path

    def _send(self, message: dict):
        self.outstream.write(encode(message))
        self.outstream.flush()

    def _snapshot(self):
        if self.snapshot_path:
            save_snapshot(self.controller, self.snapshot_path)

    def _await_reward(self, iteration: int):
        """Block for the reply to ``iteration``; return a reward value or None on stop."""
        while True:
            line = self.instream.readline()
            if not line:
                raise EOFError
            if not line.strip():
                continue
            msg = parse_reply(line)
            if msg["type"] == "stop":
                return None
            if msg.get("iteration") != iteration:
                raise ProtocolError(f"reward for iteration {msg.get('iteration')!r}, expected {iteration}")
            value = msg.get("value")
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                self._send(error_message("reward value must be a finite number", iteration=iteration))
                continue
            return float(value)

    def run(self) -> int:
        ctrl = self.controller
        horizon = self.config.horizon
        self._send(
            {
                "type": "init",
                "payload": {
                    "dimensions": self.config.space.to_dicts(),
                    "grid_points": ctrl.d,
                    "start_iteration": ctrl.t_,
                    "horizon": horizon,
                },
            }
        )
        try:
            while ctrl.t_ < horizon:
                if ctrl.phase_ == AWAITING_REWARD:
                    sug = ctrl.pending_
                else:
                    sug = ctrl.suggest()
                self._send(suggest_message(sug))
                value = self._await_reward(sug.iteration)
                if value is None:
                    self._snapshot()
                    return EXIT_OK
                ctrl.observe(value)
                if self.snapshot_every and ctrl.t_ % self.snapshot_every == 0:
                    self._snapshot()
        except ProtocolError as exc:
            self._send(error_message(str(exc)))
            self._snapshot()
            return EXIT_PROTOCOL
        except EOFError:
            self._snapshot()
            return EXIT_DISCONNECTED
        self._send({"type": "stop", "payload": {"reason": "horizon", "iterations": ctrl.t_}})
        self._snapshot()
        return EXIT_OK


def resume_controller(config: RunConfig, path) -> HyperController:
    """Load a snapshot and check it belongs to ``config``."""
    ctrl = load_snapshot(path)
    snap = ctrl.snapshot()["params"]
    if snap != config.controller_params():
        raise SnapshotError("snapshot was taken with different space or controller settings")
    return ctrl


def cmd_tune(
    config: RunConfig,
    instream: TextIO,
    outstream: TextIO,
    snapshot_every: int = 0,
    resume=None,
    snapshot_path=None,
) -> int:
    controller = resume_controller(config, resume) if resume else None
    snapshot_path = snapshot_path or config.snapshot_path or resume
    session = TuneSession(config, instream, outstream, controller, snapshot_every, snapshot_path)
    return session.run()
