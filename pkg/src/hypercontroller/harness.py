"""Paired-seed regret experiments on generated LGDS environments.

Policies only see ``suggest()`` and ``observe(reward)``. The noise-free
component values used for regret never pass through that interface; the
two privileged baselines (``oracle`` and ``fixed_best_in_hindsight``) get
their information from the runner through dedicated channels.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol

import numpy as np

from .controller import HyperController
from .hyperspace import Dimension, HyperSpace
from .lgds import LgdsParams, generate_system, initial_state, step

PLAN_FORMAT = "hypercontroller.plan"
PLAN_VERSION = 1
CSV_COLUMNS = ("policy", "seed", "t", "instantaneous_regret", "cumulative_regret")
SUMMARY_COLUMNS = ("policy", "t", "n_seeds", "median", "q25", "q75")


class Policy(Protocol):
    def suggest(self) -> tuple[int, ...]: ...

    def observe(self, reward: float) -> None: ...


class PolicyError(RuntimeError):
    """A policy broke the suggest/observe contract."""


class PlanError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid plan:\n  " + "\n  ".join(problems))


class HyperControllerPolicy:
    def __init__(self, d: int, h: int, s: int = 1, lam: float = 1.0, seed: int = 0):
        space = HyperSpace(tuple(Dimension(f"x{i}", 0.0, 1.0) for i in range(h)))
        self.controller = HyperController(space, s=s, d=d, lam=lam, seed=seed)

    def suggest(self):
        return self.controller.suggest().index

    def observe(self, reward):
        self.controller.observe(reward)


class UniformRandomPolicy:
    """A fresh uniform configuration every iteration."""

    def __init__(self, d: int, h: int, seed: int = 0):
        self.d, self.h = d, h
        self.rng = np.random.default_rng(seed)

    def suggest(self):
        return tuple(int(a) for a in self.rng.integers(self.d, size=self.h))

    def observe(self, reward):
        pass


class RandomStartPolicy:
    """One uniform configuration drawn at the start and kept throughout."""

    def __init__(self, d: int, h: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.index = tuple(int(a) for a in rng.integers(d, size=h))

    def suggest(self):
        return self.index

    def observe(self, reward):
        pass


class FixedPolicy:
    def __init__(self, index):
        self.index = tuple(int(a) for a in index)

    def suggest(self):
        return self.index

    def observe(self, reward):
        pass


class OraclePolicy:
    """Plays the best component of the current latent state."""

    privileged = True

    def __init__(self, grid_shape):
        self.grid_shape = tuple(grid_shape)
        self._z = None

    def peek(self, z):
        self._z = z

    def suggest(self):
        if self._z is None:
            raise PolicyError("oracle policy was not given the latent state")
        return tuple(int(a) for a in np.unravel_index(int(np.argmax(self._z)), self.grid_shape))

    def observe(self, reward):
        self._z = None


POLICY_NAMES = ("hypercontroller", "uniform_random", "random_start", "fixed_best_in_hindsight", "oracle")


@dataclass(frozen=True)
class RegretRecord:
    t: int
    index: tuple[int, ...]
    best_value: float
    chosen_value: float
    regret: float
    cumulative: float


@dataclass(frozen=True)
class EnvironmentSpec:
    d: int = 5
    h: int = 2
    spectral_radius: float = 0.95
    process_noise: float = 1.0
    measurement_noise: float = 1.0

    @property
    def m(self) -> int:
        return self.d**self.h

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.d,) * self.h


@dataclass(frozen=True)
class ExperimentPlan:
    environment: EnvironmentSpec
    horizon: int
    seeds: tuple[int, ...]
    policies: tuple[str, ...]
    controller: Mapping = field(default_factory=lambda: {"s": 1, "lam": 1.0})

    @classmethod
    def from_dict(cls, doc) -> "ExperimentPlan":
        """Parse a plan document, reporting every problem at once."""
        problems = []
        if not isinstance(doc, Mapping):
            raise PlanError(["plan must be a JSON object"])
        if doc.get("format", PLAN_FORMAT) != PLAN_FORMAT:
            problems.append(f"format must be {PLAN_FORMAT!r}")
        if doc.get("version", PLAN_VERSION) != PLAN_VERSION:
            problems.append(f"unsupported version {doc.get('version')!r}")
        unknown = set(doc) - {"format", "version", "environment", "horizon", "seeds", "policies", "controller"}
        if unknown:
            problems.append(f"unknown fields {sorted(unknown)}")

        env_doc = doc.get("environment", {})
        env_fields = {"d", "h", "spectral_radius", "process_noise", "measurement_noise"}
        env = None
        if not isinstance(env_doc, Mapping):
            problems.append("environment must be an object")
        else:
            for key in sorted(set(env_doc) - env_fields):
                problems.append(f"environment.{key}: unknown field")
            kwargs = {k: env_doc[k] for k in env_fields & set(env_doc)}
            for key in ("d", "h"):
                if key in kwargs and not _is_int(kwargs[key], 2 if key == "d" else 1):
                    problems.append(f"environment.{key} must be an integer >= {2 if key == 'd' else 1}")
            rho = kwargs.get("spectral_radius", 0.95)
            if not _is_real(rho) or not 0 < rho < 1:
                problems.append("environment.spectral_radius must lie in (0, 1)")
            for key in ("process_noise", "measurement_noise"):
                if key in kwargs and (not _is_real(kwargs[key]) or kwargs[key] < 0):
                    problems.append(f"environment.{key} must be a non-negative number")
            if "process_noise" in kwargs and _is_real(kwargs["process_noise"]) and kwargs["process_noise"] == 0:
                problems.append("environment.process_noise must be positive")
            if not problems:
                env = EnvironmentSpec(**kwargs)
                if env.m > 4096:
                    problems.append(f"environment has d**h = {env.m} > 4096 states")

        horizon = doc.get("horizon")
        if not _is_int(horizon, 1):
            problems.append("horizon must be a positive integer")
        seeds = doc.get("seeds")
        if not isinstance(seeds, list) or not seeds or not all(_is_int(x, 0) for x in seeds):
            problems.append("seeds must be a non-empty list of non-negative integers")
        elif len(set(seeds)) != len(seeds):
            problems.append("seeds must be distinct")
        policies = doc.get("policies")
        if not isinstance(policies, list) or not policies:
            problems.append("policies must be a non-empty list")
        else:
            bad = [p for p in policies if p not in POLICY_NAMES]
            if bad:
                problems.append(f"unknown policies {bad}; valid names are {list(POLICY_NAMES)}")
            if len(set(map(str, policies))) != len(policies):
                problems.append("policies must be distinct")
        ctrl = doc.get("controller", {"s": 1, "lam": 1.0})
        if not isinstance(ctrl, Mapping):
            problems.append("controller must be an object")
        else:
            for key in sorted(set(ctrl) - {"s", "lam"}):
                problems.append(f"controller.{key}: unknown field")
            if not _is_int(ctrl.get("s", 1), 1):
                problems.append("controller.s must be a positive integer")
            lam = ctrl.get("lam", 1.0)
            if not _is_real(lam) or lam <= 0:
                problems.append("controller.lam must be positive")
        if problems:
            raise PlanError(problems)
        return cls(env, horizon, tuple(seeds), tuple(policies), {"s": ctrl.get("s", 1), "lam": float(ctrl.get("lam", 1.0))})


def _is_int(x, minimum) -> bool:
    return isinstance(x, int) and not isinstance(x, bool) and x >= minimum


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _streams(seed: int):
    """Independent (system, trajectory, policy) seeds for one paired seed."""
    return np.random.SeedSequence(seed).spawn(3)


def environment_for_seed(env: EnvironmentSpec, seed: int) -> LgdsParams:
    system_seed, _, _ = _streams(seed)
    return generate_system(
        env.m,
        env.spectral_radius,
        env.process_noise,
        env.measurement_noise,
        seed=system_seed,
        grid_shape=env.grid_shape,
    )


def best_fixed_index(params: LgdsParams, horizon: int, seed: int) -> tuple[int, ...]:
    """Configuration with the largest noise-free total over the episode."""
    _, traj_seed, _ = _streams(seed)
    state = initial_state(params, traj_seed)
    totals = np.zeros(params.m)
    first = (0,) * len(params.grid_shape)
    for _ in range(horizon):
        state, _, z = step(state, params, first)
        totals += z
    return tuple(int(a) for a in np.unravel_index(int(np.argmax(totals)), params.grid_shape))


def make_policy(name: str, params: LgdsParams, horizon: int, seed: int, controller: Mapping | None = None):
    controller = controller or {}
    d, h = params.grid_shape[0], len(params.grid_shape)
    if any(x != d for x in params.grid_shape):
        raise ValueError("policies need a uniform grid")
    _, _, policy_seed = _streams(seed)
    pseed = int(policy_seed.generate_state(1)[0])
    if name == "hypercontroller":
        return HyperControllerPolicy(d, h, s=controller.get("s", 1), lam=controller.get("lam", 1.0), seed=pseed)
    if name == "uniform_random":
        return UniformRandomPolicy(d, h, pseed)
    if name == "random_start":
        return RandomStartPolicy(d, h, pseed)
    if name == "fixed_best_in_hindsight":
        return FixedPolicy(best_fixed_index(params, horizon, seed))
    if name == "oracle":
        return OraclePolicy(params.grid_shape)
    raise ValueError(f"unknown policy {name!r}; valid names are {list(POLICY_NAMES)}")


def run_episode(params: LgdsParams, policy, horizon: int, seed: int) -> list[RegretRecord]:
    """Play ``horizon`` iterations and record pseudo-regret per step."""
    _, traj_seed, _ = _streams(seed)
    state = initial_state(params, traj_seed)
    privileged = getattr(policy, "privileged", False)
    records = []
    total = 0.0
    for t in range(horizon):
        if privileged:
            policy.peek(state.z.copy())
        try:
            A = policy.suggest()
            k = params.component(A)
        except Exception as exc:
            raise PolicyError(f"t={t}: policy {type(policy).__name__} failed to suggest: {exc}") from exc
        state, reward, z = step(state, params, A)
        best = float(z.max())
        chosen = float(z[k])
        regret = best - chosen
        total += regret
        records.append(RegretRecord(t, tuple(int(a) for a in A), best, chosen, regret, total))
        try:
            policy.observe(reward)
        except Exception as exc:
            raise PolicyError(f"t={t}: policy {type(policy).__name__} rejected reward: {exc}") from exc
    return records


def run_plan(plan: ExperimentPlan) -> dict[tuple[str, int], list[RegretRecord]]:
    """All (policy, seed) episodes, keyed in (policy, seed) plan order."""
    results = {}
    for seed in plan.seeds:
        params = environment_for_seed(plan.environment, seed)
        for name in plan.policies:
            policy = make_policy(name, params, plan.horizon, seed, plan.controller)
            results[(name, seed)] = run_episode(params, policy, plan.horizon, seed)
    return {key: results[key] for key in sorted(results, key=lambda k: (plan.policies.index(k[0]), k[1]))}


@dataclass(frozen=True)
class PolicySummary:
    policy: str
    n_seeds: int
    median: np.ndarray
    q25: np.ndarray
    q75: np.ndarray

    @property
    def final_median(self) -> float:
        return float(self.median[-1])

    @property
    def final_iqr(self) -> float:
        return float(self.q75[-1] - self.q25[-1])


def summarize(curves: Mapping[str, Iterable]) -> dict[str, PolicySummary]:
    """Median and quartiles of cumulative regret at every ``t``.

    ``curves`` maps a policy name to its per-seed cumulative-regret curves
    (equal lengths).
    """
    out = {}
    for name, per_seed in curves.items():
        arr = np.asarray([np.asarray(c, dtype=float) for c in per_seed])
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError(f"policy {name!r}: need at least one curve of equal length")
        q25, med, q75 = np.percentile(arr, [25, 50, 75], axis=0)
        out[name] = PolicySummary(name, arr.shape[0], med, q25, q75)
    return out


def curves_from_results(results) -> dict[str, list[np.ndarray]]:
    curves: dict[str, list[np.ndarray]] = {}
    for (name, _seed), records in results.items():
        curves.setdefault(name, []).append(np.array([r.cumulative for r in records]))
    return curves


def _fmt(x: float) -> str:
    return repr(float(x))


def write_records_csv(results, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for (name, seed), records in results.items():
        for r in records:
            writer.writerow((name, seed, r.t, _fmt(r.regret), _fmt(r.cumulative)))


def write_summary_csv(summaries: Mapping[str, PolicySummary], stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for name, summ in summaries.items():
        for t in range(len(summ.median)):
            writer.writerow((name, t, summ.n_seeds, _fmt(summ.median[t]), _fmt(summ.q25[t]), _fmt(summ.q75[t])))


class SchemaError(ValueError):
    pass


def read_records_csv(stream, source: str = "<csv>") -> dict[str, dict[int, list[tuple[int, float]]]]:
    """Parse a per-step regret CSV into ``{policy: {seed: [(t, R_t), ...]}}``.

    Errors cite the 1-based file line of the offending row.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError(f"{source}: empty file") from None
    if tuple(header) != CSV_COLUMNS:
        raise SchemaError(f"{source}: line 1: expected header {','.join(CSV_COLUMNS)}")
    data: dict[str, dict[int, list[tuple[int, float]]]] = {}
    for row in reader:
        line = reader.line_num
        if len(row) != len(CSV_COLUMNS):
            raise SchemaError(f"{source}: row {line}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
        policy, seed, t, inst, cum = row
        try:
            seed, t = int(seed), int(t)
            inst, cum = float(inst), float(cum)
        except ValueError:
            raise SchemaError(f"{source}: row {line}: malformed numeric field") from None
        if not policy or not (math.isfinite(inst) and math.isfinite(cum)) or t < 0:
            raise SchemaError(f"{source}: row {line}: invalid values")
        if inst < 0:
            raise SchemaError(f"{source}: row {line}: negative instantaneous regret")
        series = data.setdefault(policy, {}).setdefault(seed, [])
        if series and t != series[-1][0] + 1:
            raise SchemaError(f"{source}: row {line}: t={t} does not follow t={series[-1][0]}")
        if not series and t != 0:
            raise SchemaError(f"{source}: row {line}: series must start at t=0")
        series.append((t, cum))
    return data


def final_regret_table(data) -> list[tuple[str, int, float, float, float]]:
    """Rows ``(policy, n_seeds, median, q25, q75)`` of final cumulative regret, sorted by median."""
    rows = []
    for policy, per_seed in data.items():
        finals = np.array([series[-1][1] for series in per_seed.values()])
        q25, med, q75 = np.percentile(finals, [25, 50, 75])
        rows.append((policy, len(finals), float(med), float(q25), float(q75)))
    rows.sort(key=lambda r: (r[2], r[0]))
    return rows


def format_table(rows) -> str:
    buf = io.StringIO()
    buf.write(f"{'policy':<26}{'seeds':>6}{'median':>14}{'q25':>14}{'q75':>14}{'iqr':>14}\n")
    for policy, n, med, q25, q75 in rows:
        buf.write(f"{policy:<26}{n:>6}{med:>14.4f}{q25:>14.4f}{q75:>14.4f}{q75 - q25:>14.4f}\n")
    return buf.getvalue()
