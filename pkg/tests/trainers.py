"""Scripted trainer used by the protocol and acceptance tests."""

import json

from hypercontroller.protocol import encode


class ScriptedTrainer:
    """In-process trainer wired to both streams of a tune session.

    Every suggest line written by the controller queues the trainer's reply,
    so readline() never blocks. ``script`` maps an iteration to a list of raw
    lines to send instead of the normal reward.
    """

    def __init__(self, objective, stop_at=None, script=None):
        self.objective = objective
        self.stop_at = stop_at
        self.script = script or {}
        self.lines = []
        self.queue = []

    # output side (controller -> trainer)
    def write(self, text):
        for line in text.splitlines():
            self.lines.append(line)
            msg = json.loads(line)
            if msg["type"] != "suggest":
                continue
            it = msg["iteration"]
            if self.stop_at is not None and it >= self.stop_at:
                self.queue.append(encode({"type": "stop"}))
            elif it in self.script:
                self.queue.extend(self.script.pop(it))
            else:
                value = self.objective(msg["config"], it)
                self.queue.append(encode({"type": "reward", "iteration": it, "value": value}))

    def flush(self):
        pass

    # input side (trainer -> controller)
    def readline(self):
        return self.queue.pop(0) if self.queue else ""

    def messages(self, kind=None):
        msgs = [json.loads(x) for x in self.lines]
        return [m for m in msgs if kind is None or m["type"] == kind]
