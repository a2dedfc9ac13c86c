"""Seeded multi-policy regret experiments, CSV/SVG output and rate fitting.

An experiment is described by one JSON document, for example::

    {
      "instance": {"kind": "hard_subsampled", "d": 100, "s": 5, "kappa": 1.0},
      "policies": [{"name": "estc", "params": {"sparsity": 5}}, {"name": "linucb"}],
      "horizons": [1000],
      "replications": 20,
      "base_seed": 0
    }

Only ``instance.kind`` and ``policies`` are required. Replication ``r`` uses
the seed ``base_seed + r`` unless an explicit ``seeds`` list is given. Every
(policy, horizon, seed) run draws from its own named random stream, so
results do not depend on execution order or on the number of threads.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import json
import logging
import os
from pathlib import Path

import numpy as np

from .core import ContextSequence, RngStream
from .design import solve_e_optimal
from .instances import (ContextualSpec, HardInstanceSpec, basis_instance, contextual_instance,
                        estc_upper_bound, hard_instance, lower_bound, random_instance,
                        subsample_hard_instance)
from .plotting import regret_svg
from .policies import POLICIES, exploration_length

logger = logging.getLogger(__name__)

THREADS_ENV = "SPARSE_BANDIT_THREADS"
INSTANCE_KINDS = ("hard", "hard_subsampled", "contextual", "random", "basis")
BOUND_KINDS = ("lower", "estc_upper")
DESIGN_POLICIES = ("estc", "restricted_pe")
_INSTANCE_STREAM = 0
_POLICY_STREAM = 1

_INSTANCE_KEYS = {
    "hard": {"d", "s", "kappa", "epsilon", "noise_std"},
    "hard_subsampled": {"d", "s", "kappa", "epsilon", "noise_std", "n_informative", "n_uninformative"},
    "contextual": {"num_arms", "d", "s", "rho", "noise_std", "clip"},
    "random": {"n_arms", "d", "s", "signal", "distribution", "noise_std"},
    "basis": {"d", "gap", "noise_std"},
}


class ConfigError(ValueError):
    """The experiment description is invalid; raised before anything runs."""


@dataclass(frozen=True)
class PolicySpec:
    name: str
    label: str
    params: dict = field(default_factory=dict)
    c_min: object = "design"   # "design", "theory" (kappa^2 on hard instances) or a number

    def build(self):
        return POLICIES[self.name](**self.params)


@dataclass(frozen=True)
class ExperimentConfig:
    instance: dict
    policies: tuple
    horizons: tuple = (1000,)
    replications: int = 1
    base_seed: int = 0
    seeds: tuple | None = None
    instance_seed: int | None = None
    resample_instance: bool = False
    design_tol: float = 1e-2
    design_max_iter: int = 2000
    max_points: int = 1000
    threads: int | None = None
    bounds: tuple = ()
    outputs: dict = field(default_factory=dict)

    @property
    def seed_list(self):
        if self.seeds is not None:
            return tuple(self.seeds)
        return tuple(self.base_seed + r for r in range(self.replications))

    @property
    def kind(self):
        return self.instance["kind"]

    @classmethod
    def from_dict(cls, doc):
        """Validate a parsed JSON document; every problem raises :class:`ConfigError`."""
        if not isinstance(doc, dict):
            raise ConfigError("the config must be a JSON object")
        known = {"instance", "policies", "horizons", "replications", "base_seed", "seeds",
                 "instance_seed", "resample_instance", "design", "max_points", "threads",
                 "bounds", "outputs"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")

        inst = doc.get("instance")
        if not isinstance(inst, dict) or "kind" not in inst:
            raise ConfigError("config.instance must be an object with a 'kind'")
        kind = inst["kind"]
        if kind not in INSTANCE_KINDS:
            raise ConfigError(f"instance.kind must be one of {INSTANCE_KINDS}, got {kind!r}")
        extra = set(inst) - _INSTANCE_KEYS[kind] - {"kind"}
        if extra:
            raise ConfigError(f"instance kind {kind!r} does not take {sorted(extra)}")

        raw_policies = doc.get("policies")
        if not isinstance(raw_policies, list) or not raw_policies:
            raise ConfigError("config.policies must be a non-empty list")
        policies = []
        for k, p in enumerate(raw_policies):
            if isinstance(p, str):
                p = {"name": p}
            if not isinstance(p, dict) or p.get("name") not in POLICIES:
                raise ConfigError(f"policies[{k}] must name one of {sorted(POLICIES)}")
            params = dict(p.get("params", {}))
            c_min = params.pop("c_min", "design")
            if not (c_min in ("design", "theory") or (_is_number(c_min) and c_min > 0)):
                raise ConfigError(f"policies[{k}].params.c_min must be 'design', 'theory' "
                                  "or a positive number")
            if c_min == "theory" and kind not in ("hard", "hard_subsampled"):
                raise ConfigError(f"policies[{k}]: c_min='theory' is only defined for hard instances")
            if kind == "contextual" and p["name"] not in ("estc", "linucb"):
                raise ConfigError(f"policies[{k}]: {p['name']} needs a fixed action set")
            try:
                POLICIES[p["name"]](**params)
            except TypeError as exc:
                raise ConfigError(f"policies[{k}]: {exc}") from None
            policies.append(PolicySpec(p["name"], str(p.get("label", p["name"])), params, c_min))
        labels = [p.label for p in policies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"policy labels must be unique, got {labels}")

        horizons = doc.get("horizons", [1000])
        if (not isinstance(horizons, list) or not horizons
                or not all(_is_int(h) and h >= 1 for h in horizons)):
            raise ConfigError("horizons must be a non-empty list of positive integers")
        if any(b <= a for a, b in zip(horizons, horizons[1:])):
            raise ConfigError(f"horizons must be strictly increasing, got {horizons}")

        default_reps = len(doc["seeds"]) if isinstance(doc.get("seeds"), list) else 1
        replications = doc.get("replications", default_reps)
        if not _is_int(replications) or replications < 1:
            raise ConfigError("replications must be an integer >= 1")
        base_seed = doc.get("base_seed", 0)
        if not _is_int(base_seed) or base_seed < 0:
            raise ConfigError("base_seed must be a non-negative integer")
        seeds = doc.get("seeds")
        if seeds is not None:
            if (not isinstance(seeds, list) or len(seeds) != replications
                    or not all(_is_int(s) and s >= 0 for s in seeds) or len(set(seeds)) != len(seeds)):
                raise ConfigError("seeds must list one distinct non-negative integer per replication")
            seeds = tuple(seeds)
        instance_seed = doc.get("instance_seed")
        if instance_seed is not None and (not _is_int(instance_seed) or instance_seed < 0):
            raise ConfigError("instance_seed must be a non-negative integer")

        design = doc.get("design", {})
        if not isinstance(design, dict) or set(design) - {"tol", "max_iter"}:
            raise ConfigError("design accepts only 'tol' and 'max_iter'")
        tol = design.get("tol", 1e-2)
        max_iter = design.get("max_iter", 2000)
        if not _is_number(tol) or tol <= 0 or not _is_int(max_iter) or max_iter < 1:
            raise ConfigError("design.tol must be positive and design.max_iter a positive integer")

        max_points = doc.get("max_points", 1000)
        if not _is_int(max_points) or max_points < 2:
            raise ConfigError("max_points must be an integer >= 2")
        threads = doc.get("threads")
        if threads is not None and (not _is_int(threads) or threads < 1):
            raise ConfigError("threads must be a positive integer")
        bounds = doc.get("bounds", [])
        if not isinstance(bounds, list) or any(b not in BOUND_KINDS for b in bounds):
            raise ConfigError(f"bounds must be a list drawn from {BOUND_KINDS}")
        outputs = doc.get("outputs", {})
        allowed = {"results_csv", "summary_csv", "runs_csv", "svg"}
        if not isinstance(outputs, dict) or set(outputs) - allowed:
            raise ConfigError(f"outputs accepts only {sorted(allowed)}")

        config = cls(instance=dict(inst), policies=tuple(policies), horizons=tuple(horizons),
                     replications=replications, base_seed=base_seed, seeds=seeds,
                     instance_seed=instance_seed,
                     resample_instance=bool(doc.get("resample_instance", False)),
                     design_tol=float(tol), design_max_iter=max_iter, max_points=max_points,
                     threads=threads, bounds=tuple(bounds), outputs=dict(outputs))
        try:
            _instance_params(config)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"instance: {exc}") from None
        return config

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(doc)


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_number(v):
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def _instance_params(config):
    """Validated keyword arguments for the instance constructor."""
    p = {k: v for k, v in config.instance.items() if k != "kind"}
    kind = config.kind
    n_max = config.horizons[-1]
    if kind in ("hard", "hard_subsampled"):
        for key in ("d", "s"):
            if key not in p:
                raise ValueError(f"{key!r} is required")
        # the data-poor tuning of epsilon uses the largest horizon
        return HardInstanceSpec(horizon=n_max, **p)
    if kind == "contextual":
        p.pop("clip", None)
        return ContextualSpec(horizon=n_max, **p)
    if kind == "random":
        for key in ("n_arms", "d", "s"):
            if key not in p:
                raise ValueError(f"{key!r} is required")
        return p
    if "d" not in p or "gap" not in p:
        raise ValueError("'d' and 'gap' are required")
    return p


# --- problem preparation ----------------------------------------------------

@dataclass
class Problem:
    """Everything the policies share for one instance draw."""

    actions: object
    instance: object
    informative: frozenset = frozenset()
    design: object = None
    certificate: object = None
    theory_c_min: float | None = None


def build_problem(config, seed):
    kind = config.kind
    params = _instance_params(config)
    rng = RngStream(seed, _INSTANCE_STREAM)
    theory = None
    informative = frozenset()
    if kind == "hard":
        actions, instance, mask = hard_instance(params)
        informative = frozenset(np.flatnonzero(mask).tolist())
        theory = params.kappa**2
    elif kind == "hard_subsampled":
        actions, instance, mask = subsample_hard_instance(params, rng)
        informative = frozenset(np.flatnonzero(mask).tolist())
        theory = params.kappa**2
    elif kind == "contextual":
        actions, instance = contextual_instance(params, rng, clip=config.instance.get("clip", True))
    elif kind == "random":
        actions, instance = random_instance(rng=rng, **params)
    else:
        actions, instance = basis_instance(**params)

    problem = Problem(actions, instance, informative, theory_c_min=theory)
    if not isinstance(actions, ContextSequence) and any(p.name in DESIGN_POLICIES for p in config.policies):
        problem.design, problem.certificate = solve_e_optimal(
            actions, tol=config.design_tol, max_iter=config.design_max_iter)
    return problem


# --- running ----------------------------------------------------------------

@dataclass(frozen=True)
class RunRecord:
    policy: str
    horizon: int
    seed: int
    final_regret: float
    rounds: np.ndarray
    cum_regret: np.ndarray
    diagnostics: dict


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    c_min: dict = field(default_factory=dict)
    r_max: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def final_regrets(self, policy, horizon):
        return np.array([r.final_regret for r in self.records
                         if r.policy == policy and r.horizon == horizon])

    def summary(self):
        """``[(policy, horizon, median, iqr)]`` over seeds, in config order."""
        rows = []
        for p in self.config.policies:
            for n in self.config.horizons:
                vals = self.final_regrets(p.label, n)
                if vals.size:
                    q25, med, q75 = np.percentile(vals, [25, 50, 75])
                    rows.append((p.label, n, float(med), float(q75 - q25)))
        return rows


def downsample_rounds(n, max_points):
    """At most ``max_points`` evenly spread rounds in ``1..n``, always keeping ``n``."""
    if n <= max_points:
        return np.arange(1, n + 1)
    return np.unique(np.rint(np.linspace(1, n, max_points)).astype(np.int64))


def thread_count(config, n_tasks):
    requested = config.threads or os.cpu_count() or 1
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if cap < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1")
        requested = min(requested, cap)
    return max(1, min(requested, n_tasks))


_DIAGNOSTIC_KEYS = ("n_explore", "c_min", "kkt_residual", "lasso_converged", "support_size",
                    "support_fallback", "n_phases", "committed_action")


def _run_one(config, problem, policy, horizon, seed):
    actions = problem.actions
    if isinstance(actions, ContextSequence):
        actions = actions.truncate(horizon)
    c_min = None
    if policy.c_min == "theory":
        c_min = problem.theory_c_min
    elif policy.c_min != "design":
        c_min = float(policy.c_min)
    stream = RngStream(seed, _POLICY_STREAM).substream(f"{policy.label}/{horizon}")
    traj = policy.build().run(actions, problem.instance, horizon, rng=stream,
                              design=problem.design, c_min=c_min,
                              informative=problem.informative)
    kept = downsample_rounds(len(traj), config.max_points)
    cum = traj.cumulative
    diag = {k: traj.diagnostics[k] for k in _DIAGNOSTIC_KEYS if k in traj.diagnostics}
    diag["informative_pulls"] = traj.informative_pulls
    if problem.certificate is not None:
        diag["design_fw_gap"] = problem.certificate.fw_gap
    return RunRecord(policy.label, horizon, seed, traj.final_regret, kept,
                     cum[kept - 1] if len(cum) else np.zeros(0), diag)


def run_experiment(config):
    """Run every (policy, horizon, seed) combination of ``config``.

    With ``resample_instance`` false (the default) one instance, drawn from
    ``instance_seed`` (or ``base_seed``), is shared by all replications so
    that seeds only vary the rewards and the policies' randomisation.
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    seeds = config.seed_list
    problems = {}
    if config.resample_instance:
        for seed in seeds:
            problems[seed] = build_problem(config, seed)
    else:
        shared = build_problem(config, config.instance_seed if config.instance_seed is not None
                               else config.base_seed)
        problems = {seed: shared for seed in seeds}

    tasks = [(p, n, seed) for p in config.policies for n in config.horizons for seed in seeds]
    workers = thread_count(config, len(tasks))
    logger.info("running %d tasks on %d thread(s)", len(tasks), workers)

    def work(task):
        p, n, seed = task
        return _run_one(config, problems[seed], p, n, seed)

    if workers == 1:
        records = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(work, tasks))

    result = ExperimentResult(config, records)
    for seed in seeds:
        pr = problems[seed]
        if pr.certificate is not None:
            result.c_min[seed] = pr.certificate.objective
        if not isinstance(pr.actions, ContextSequence):
            result.r_max[seed] = pr.instance.max_abs_reward(pr.actions)
    return result


# --- rates ------------------------------------------------------------------

def loglog_slope(horizons, median_regrets):
    """Least-squares slope of ``log(regret)`` against ``log(n)``."""
    n = np.asarray(horizons, dtype=np.float64)
    r = np.asarray(median_regrets, dtype=np.float64)
    if n.shape != r.shape or n.ndim != 1:
        raise ValueError("horizons and regrets must be 1-d arrays of the same length")
    if n.size < 3:
        raise ValueError(f"need at least 3 horizons, got {n.size}")
    if np.any(n <= 0) or np.any(r <= 0):
        raise ValueError("horizons and regrets must be positive to take logarithms")
    slope, _ = np.polyfit(np.log(n), np.log(r), 1)
    return float(slope)


# --- output -----------------------------------------------------------------

def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if _is_int(v):
        return str(int(v))
    if _is_number(v):
        return repr(float(v))
    return "" if v is None else str(v)


def _write_text(path, text):
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
    return path


def results_csv_text(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "horizon", "seed", "round", "cum_regret"])
    for rec in (result.records if result is not None else ()):
        for t, c in zip(rec.rounds.tolist(), rec.cum_regret.tolist()):
            w.writerow([rec.policy, rec.horizon, rec.seed, t, _num(c)])
    return buf.getvalue()


def summary_csv_text(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "horizon", "median", "iqr"])
    for policy, n, med, iqr in (result.summary() if result is not None else ()):
        w.writerow([policy, n, _num(med), _num(iqr)])
    return buf.getvalue()


RUN_COLUMNS = ["policy", "horizon", "seed", "final_regret", "n_explore", "c_min", "kkt_residual",
               "lasso_converged", "design_fw_gap", "support_size", "support_fallback",
               "n_phases", "informative_pulls"]


def runs_csv_text(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for rec in (result.records if result is not None else ()):
        row = [rec.policy, rec.horizon, rec.seed, _num(rec.final_regret)]
        row += [_num(rec.diagnostics.get(k)) for k in RUN_COLUMNS[4:]]
        w.writerow(row)
    return buf.getvalue()


def emit_csv(result, path, summary_path=None, runs_path=None):
    """Write the long-form trajectory CSV and, optionally, summary and per-run files."""
    written = [_write_text(path, results_csv_text(result))]
    if summary_path is not None:
        written.append(_write_text(summary_path, summary_csv_text(result)))
    if runs_path is not None:
        written.append(_write_text(runs_path, runs_csv_text(result)))
    return written


def read_results_csv(path):
    """Parse a long-form results CSV into ``{(policy, horizon): {seed: (rounds, cum)}}``."""
    table = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"policy", "horizon", "seed", "round", "cum_regret"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            key = (row["policy"], int(row["horizon"]))
            runs = table.setdefault(key, {})
            rounds, cum = runs.setdefault(int(row["seed"]), ([], []))
            rounds.append(int(row["round"]))
            cum.append(float(row["cum_regret"]))
    return table


def read_summary_csv(path):
    """``{policy: (horizons, medians)}`` from a summary CSV, sorted by horizon."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"policy", "horizon", "median"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            out.setdefault(row["policy"], []).append((int(row["horizon"]), float(row["median"])))
    return {p: tuple(np.array(v) for v in zip(*sorted(rows))) for p, rows in out.items()}


def curves_from_table(table, horizon=None):
    """Median and quartile curves per policy at one horizon (default: the largest)."""
    curves = []
    policies = []
    for policy, _ in table:
        if policy not in policies:
            policies.append(policy)
    for policy in policies:
        horizons = sorted(n for p, n in table if p == policy)
        n = horizon if horizon is not None else horizons[-1]
        runs = table.get((policy, n))
        if not runs:
            continue
        rounds = np.asarray(next(iter(runs.values()))[0])
        stack = np.array([runs[s][1] for s in sorted(runs)])
        q25, med, q75 = np.percentile(stack, [25, 50, 75], axis=0)
        curves.append((f"{policy} (n={n})", rounds, med, q25, q75))
    return curves


def _table_from_result(result):
    table = {}
    for rec in result.records:
        table.setdefault((rec.policy, rec.horizon), {})[rec.seed] = (rec.rounds, rec.cum_regret)
    return table


def theory_bounds(result, rounds):
    """Requested regret-bound curves evaluated at ``rounds``."""
    config = result.config
    params = _instance_params(config)
    if config.kind not in ("hard", "hard_subsampled", "random", "basis"):
        logger.warning("bounds are only drawn for fixed action sets")
        return []
    inst = config.instance
    d = int(inst["d"])
    s = int(inst.get("s", 1))
    seeds = config.seed_list
    c_min = result.c_min.get(seeds[0])
    if c_min is None:
        c_min = params.kappa**2 if config.kind.startswith("hard") else 1.0 / d
    r_max = result.r_max.get(seeds[0], 1.0)
    rounds = np.asarray(rounds, dtype=np.float64)
    curves = []
    for kind in config.bounds:
        if kind == "lower":
            vals = [lower_bound(t, d, s, c_min) for t in rounds]
            curves.append(("lower bound", rounds, np.array(vals)))
        elif kind == "estc_upper":
            vals = [estc_upper_bound(t, d, s, r_max, c_min,
                                     exploration_length(int(t), d, s, r_max, c_min))
                    for t in rounds]
            curves.append(("ESTC upper bound", rounds, np.array(vals)))
    return curves


def emit_svg(result, path, horizon=None, title=None):
    """Median regret curves with IQR bands (plus any configured bounds) as SVG."""
    curves = curves_from_table(_table_from_result(result), horizon)
    bounds = []
    if result.config.bounds and curves:
        bounds = theory_bounds(result, curves[0][1])
    title = title or f"Cumulative regret ({result.config.kind} instance)"
    return _write_text(path, regret_svg(curves, bounds, title=title))


def write_outputs(result, output_dir=None):
    """Write every output named in the config; ``output_dir`` supplies defaults."""
    outputs = dict(result.config.outputs)
    if output_dir is not None:
        base = Path(output_dir)
        outputs.setdefault("results_csv", base / "results.csv")
        outputs.setdefault("summary_csv", base / "summary.csv")
        outputs.setdefault("runs_csv", base / "runs.csv")
        outputs.setdefault("svg", base / "regret.svg")
    written = []
    if "results_csv" in outputs:
        written += emit_csv(result, outputs["results_csv"])
    if "summary_csv" in outputs:
        written.append(_write_text(outputs["summary_csv"], summary_csv_text(result)))
    if "runs_csv" in outputs:
        written.append(_write_text(outputs["runs_csv"], runs_csv_text(result)))
    if "svg" in outputs:
        written.append(emit_svg(result, outputs["svg"]))
    return written
