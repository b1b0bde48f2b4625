"""Experiment configuration, seeded (optionally parallel) trials and CSV output."""

from __future__ import annotations

import hashlib
import logging
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import Aggregate, aggregate, dstar_curve
from .environment import FeedbackMode, OracleStats, RegretTrace, oracle_stats, run_episode
from .errors import ConfigurationError, RevealBanditError
from .graph_model import GraphSpec, InfluenceMatrix, generate, parse_graph_spec
from .policies import POLICY_NAMES, Bare, FixedOracle, GraphMOSS, RoundRobin, UniformRandom

log = logging.getLogger(__name__)

REGRET_HEADER = "policy,round,mean_regret,stderr_regret,mean_reward"
SUMMARY_HEADER = "policy,mean_T_star,sd_T_star,mean_D_star,sd_D_star"
DSTAR_HEADER = "n,D_star,T_star,Delta_star"


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    params: dict = field(default_factory=dict)
    feedback: FeedbackMode = FeedbackMode.FULL_SET

    @property
    def label(self) -> str:
        args = ",".join(f"{k}={self.params[k]}" for k in sorted(self.params))
        text = f"{self.kind}({args})" if args else self.kind
        if self.feedback is not FeedbackMode.FULL_SET:
            text += f"@{self.feedback.value}"
        return text

    def build(self, stats: OracleStats):
        if self.kind == "graphmoss":
            return GraphMOSS()
        if self.kind == "bare":
            return Bare(c=float(self.params.get("c", 1.0)))
        if self.kind == "uniform_random":
            return UniformRandom()
        if self.kind == "round_robin":
            return RoundRobin()
        if self.kind == "fixed_oracle":
            node = self.params.get("node")
            return FixedOracle(int(stats.argmax_r[0]) if node is None else int(node))
        raise ConfigurationError(f"unknown policy {self.kind!r}")


_POLICY_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\(([^)]*)\))?\s*(?:@\s*([a-z_]+))?\s*$")


def parse_policy(text: str) -> PolicySpec:
    """Parse ``name``, ``name(key=value,...)`` or either with ``@feedback``."""
    match = _POLICY_RE.match(text)
    if not match:
        raise ConfigurationError(f"cannot parse policy {text!r}")
    kind, args, mode = match.groups()
    if kind not in POLICY_NAMES:
        raise ConfigurationError(f"unknown policy {kind!r}; expected one of {', '.join(POLICY_NAMES)}")
    params = {}
    for item in filter(None, (s.strip() for s in (args or "").split(","))):
        if "=" not in item:
            raise ConfigurationError(f"policy argument {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        try:
            params[key] = int(value)
        except ValueError:
            try:
                params[key] = float(value)
            except ValueError:
                raise ConfigurationError(f"policy argument {item!r} is not numeric") from None
    try:
        feedback = FeedbackMode(mode) if mode else FeedbackMode.FULL_SET
    except ValueError:
        raise ConfigurationError(f"unknown feedback mode {mode!r}") from None
    spec = PolicySpec(kind, params, feedback)
    if kind == "bare" and feedback is not FeedbackMode.FULL_SET:
        raise ConfigurationError("bare needs full_set feedback")
    return spec


def _split_top_level(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


@dataclass(frozen=True)
class ExperimentConfig:
    graph: GraphSpec
    n: int
    trials: int
    policies: tuple
    seed: int = 0
    graph_seed: int | None = None
    out: str = "results"
    name: str = "experiment"
    p_values: tuple = ()

    def validate(self) -> None:
        self.graph.validate()
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if not self.policies:
            raise ConfigurationError("no policies configured")
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigurationError("duplicate policy entries")
        for p in self.policies:
            if p.kind == "bare" and p.feedback is not FeedbackMode.FULL_SET:
                raise ConfigurationError("bare needs full_set feedback")
        if self.graph.kind in ("file", "matrix") and not os.path.isfile(self.graph.params["path"]):
            raise ConfigurationError(f"dataset file not found: {self.graph.params['path']}")
        for p in self.p_values:
            if not (0 < p <= 1):
                raise ConfigurationError(f"swept probability {p} not in (0, 1]")

    def to_items(self) -> list[tuple[str, str]]:
        items = [
            ("name", self.name),
            ("graph", self.graph.to_string()),
            ("n", str(self.n)),
            ("trials", str(self.trials)),
            ("policies", ", ".join(p.label for p in self.policies)),
            ("seed", str(self.seed)),
        ]
        if self.graph_seed is not None:
            items.append(("graph_seed", str(self.graph_seed)))
        if self.p_values:
            items.append(("p_values", ",".join(repr(p) for p in self.p_values)))
        return items

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_items())

    def expand(self) -> list[tuple[str, "ExperimentConfig"]]:
        """One config per swept edge probability, or just this one."""
        if not self.p_values:
            return [("", self)]
        return [
            (f"p_{p!r}", replace(self, graph=replace(self.graph, p=float(p)), p_values=(), name=f"{self.name}_p{p!r}"))
            for p in self.p_values
        ]


# Horizons are about twice the node count, as in ba1000. BARE's first stopping
# check compares d with sqrt(d n), so n < d ends exploration immediately.
PRESETS: dict[str, dict[str, str]] = {
    "ba1000": {
        "name": "ba1000",
        "graph": "barabasi_albert:d=1000,m=10,p=0.8",
        "n": "2000",
        "trials": "100",
        "policies": "bare(c=0.01), graphmoss",
    },
    "facebook": {
        "name": "facebook",
        "graph": "file:path=data/facebook_combined.txt,symmetrize=true,p=0.8",
        "n": "8000",
        "trials": "100",
        "policies": "bare(c=0.01), graphmoss",
    },
    "enron": {
        "name": "enron",
        "graph": "file:path=data/Email-Enron.txt,symmetrize=true,p=0.8",
        "n": "75000",
        "trials": "100",
        "policies": "bare(c=0.01), graphmoss",
    },
    "gnutella": {
        "name": "gnutella",
        "graph": "file:path=data/p2p-Gnutella04.txt,symmetrize=true,p=0.8",
        "n": "22000",
        "trials": "100",
        "policies": "bare(c=0.01), graphmoss",
    },
    "psweep": {
        "name": "psweep",
        "graph": "barabasi_albert:d=1000,m=10,p=0.8",
        "n": "2000",
        "trials": "100",
        "policies": "bare(c=0.01), graphmoss",
        "p_values": "0.2,0.4,0.6,0.8,1.0",
    },
}

_KEYS = {"name", "graph", "n", "trials", "policies", "seed", "graph_seed", "out", "p_values", "dataset"}


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in stripped.split("=", 1))
            values[key] = value
    return values


def build_config(values: dict[str, str]) -> ExperimentConfig:
    """Turn flat string settings into a validated :class:`ExperimentConfig`.

    ``dataset = <path>`` replaces the path of a file-backed graph (so the
    dataset presets can point at user-supplied files).
    """
    unknown = set(values) - _KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("graph", "n", "trials", "policies"):
        if key not in values:
            raise ConfigurationError(f"missing config key {key!r}")
    graph = parse_graph_spec(values["graph"])
    if "dataset" in values:
        if graph.kind not in ("file", "matrix"):
            raise ConfigurationError("'dataset' only applies to file-backed graphs")
        graph = replace(graph, params={**graph.params, "path": values["dataset"]})
    try:
        config = ExperimentConfig(
            graph=graph,
            n=int(values["n"]),
            trials=int(values["trials"]),
            policies=tuple(parse_policy(p) for p in _split_top_level(values["policies"])),
            seed=int(values.get("seed", 0)),
            graph_seed=int(values["graph_seed"]) if "graph_seed" in values else None,
            out=values.get("out", "results"),
            name=values.get("name", "experiment"),
            p_values=tuple(float(p) for p in values.get("p_values", "").split(",") if p.strip()),
        )
    except ValueError as exc:
        if isinstance(exc, RevealBanditError):
            raise
        raise ConfigurationError(f"bad numeric config value: {exc}") from None
    config.validate()
    return config


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    values = dict(PRESETS[name])
    values.update({k: str(v) for k, v in overrides.items()})
    return build_config(values)


# ---------------------------------------------------------------------------
# Seeds and trials


def derive_seed(base_seed: int, policy_id: str, trial: int) -> int:
    """64-bit seed from BLAKE2b over ``"<base>:<policy>:<trial>"``."""
    digest = hashlib.blake2b(f"{base_seed}:{policy_id}:{trial}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def run_trial(matrix: InfluenceMatrix, stats: OracleStats, spec: PolicySpec, n: int, seed: int) -> RegretTrace:
    """One episode. The seed feeds two independent streams: environment and policy."""
    env_seq, policy_seq = np.random.SeedSequence(seed).spawn(2)
    policy = spec.build(stats).reset(matrix.d, n, np.random.default_rng(policy_seq))
    return run_episode(
        matrix, policy, n, spec.feedback, np.random.default_rng(env_seq), stats=stats, seed=seed, keep_choices=False
    )


_worker_state: dict = {}


def _init_worker(matrix, stats):
    _worker_state["matrix"] = matrix
    _worker_state["stats"] = stats


def _worker_trial(args):
    spec, n, seed = args
    return run_trial(_worker_state["matrix"], _worker_state["stats"], spec, n, seed)


@dataclass
class ResultTable:
    config: ExperimentConfig | None
    results: dict[str, Aggregate]
    r_star: float = math.nan
    wall_clock: float = 0.0


def build_matrix(config: ExperimentConfig) -> InfluenceMatrix:
    graph_seed = config.seed if config.graph_seed is None else config.graph_seed
    return generate(config.graph, seed=graph_seed)


def run_experiment(config: ExperimentConfig, workers: int = 1, matrix: InfluenceMatrix | None = None) -> ResultTable:
    """Run every (policy, trial) pair and aggregate per policy.

    Trial ``i`` of a policy uses ``derive_seed(seed, policy label, i)``, so the
    result does not depend on ``workers`` or on scheduling order.
    """
    config.validate()
    started = time.perf_counter()
    if matrix is None:
        matrix = build_matrix(config)
    stats = oracle_stats(matrix)
    tasks = [
        (spec, config.n, derive_seed(config.seed, spec.label, i))
        for spec in config.policies
        for i in range(config.trials)
    ]
    log.info("%s: d=%d, %d policies x %d trials, n=%d", config.name, matrix.d, len(config.policies), config.trials, config.n)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(matrix, stats)) as pool:
            traces = list(pool.map(_worker_trial, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        traces = [run_trial(matrix, stats, spec, n, seed) for spec, n, seed in tasks]
    results = {}
    for j, spec in enumerate(config.policies):
        results[spec.label] = aggregate(traces[j * config.trials : (j + 1) * config.trials])
    elapsed = time.perf_counter() - started
    log.info("%s: finished in %.1fs", config.name, elapsed)
    return ResultTable(config, results, stats.r_star, elapsed)


# ---------------------------------------------------------------------------
# Output


def _fmt(x) -> str:
    return repr(float(x))


def summary_path(path) -> str:
    root, ext = os.path.splitext(str(path))
    return f"{root}_summary{ext or '.csv'}"


def config_path(path) -> str:
    root, _ = os.path.splitext(str(path))
    return f"{root}_config.txt"


def emit_csv(table: ResultTable, path) -> list[str]:
    """Write the regret table, the T*/D* summary and a config echo.

    Returns the written paths. The config echo can be passed back to
    ``run --config`` to repeat the experiment.
    """
    written = []
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(REGRET_HEADER + "\n")
            for label, agg in table.results.items():
                for t, (m, s, w) in enumerate(
                    zip(agg.mean_regret.tolist(), agg.stderr_regret.tolist(), agg.mean_reward.tolist()), start=1
                ):
                    fh.write(f"{label},{t},{_fmt(m)},{_fmt(s)},{_fmt(w)}\n")
        written.append(str(path))
        spath = summary_path(path)
        with open(spath, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(SUMMARY_HEADER + "\n")
            for label, agg in table.results.items():
                if agg.mean_T_star is None:
                    continue
                fh.write(
                    f"{label},{_fmt(agg.mean_T_star)},{_fmt(agg.sd_T_star)},{_fmt(agg.mean_D_star)},{_fmt(agg.sd_D_star)}\n"
                )
        written.append(spath)
        if table.config is not None:
            cpath = config_path(path)
            with open(cpath, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(f"# r_star = {_fmt(table.r_star)}\n")
                fh.write(table.config.to_text())
            written.append(cpath)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results: {exc.strerror}", exc.filename or str(path)) from exc
    return written


def _label_of(line: str) -> tuple[str, list[str]]:
    # policy labels may contain commas inside parentheses
    head, sep, tail = line.rpartition(")")
    if sep and "(" in head:
        label = head + ")"
        rest = tail.lstrip(",")
        if rest.startswith("@"):
            mode, _, rest = rest.partition(",")
            label += mode
        return label, rest.split(",")
    parts = line.split(",")
    return parts[0], parts[1:]


def read_regret_csv(path) -> dict[str, dict[str, np.ndarray]]:
    """Load a file written by :func:`emit_csv` back into arrays per policy."""
    out: dict[str, dict[str, list]] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != REGRET_HEADER:
            raise ConfigurationError(f"{path}: unexpected header {header!r}")
        for line in fh:
            label, fields = _label_of(line.rstrip("\n"))
            cols = out.setdefault(label, {"round": [], "mean_regret": [], "stderr_regret": [], "mean_reward": []})
            cols["round"].append(int(fields[0]))
            cols["mean_regret"].append(float(fields[1]))
            cols["stderr_regret"].append(float(fields[2]))
            cols["mean_reward"].append(float(fields[3]))
    return {label: {k: np.asarray(v) for k, v in cols.items()} for label, cols in out.items()}


def dstar_rows(matrix: InfluenceMatrix, n_grid) -> list[tuple[int, int, int, float]]:
    return [(p.n, p.D_star, p.T_star, p.Delta_star) for p in dstar_curve(matrix, n_grid)]


def format_dstar_csv(rows) -> str:
    lines = [DSTAR_HEADER] + [f"{n},{dstar},{tstar},{_fmt(gap)}" for n, dstar, tstar, gap in rows]
    return "\n".join(lines) + "\n"


def write_dstar_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_dstar_csv(rows))
