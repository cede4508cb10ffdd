"""Experiment orchestration: configs, seeding, the training loop and grids.

A run directory holds ``config.json`` (the config echo), ``steps.csv`` (one
row per step and seller) and ``summary.json``.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
import hashlib
import itertools
import json
import logging
import os
from pathlib import Path

import numpy as np

from .econ import DemandSpec, MarketParams, compute_benchmarks
from .env import EnvConfig, build_action_grid, force_price, observe_all, reset, step
from .learn.checkpoint import save_brain
from .learn.dqn import DQNBrain, DQNParams
from .learn.ppo import PPOBrain, PPOParams
from .metrics import EpisodeAccumulator, summarize

log = logging.getLogger(__name__)

STEP_LOG_HEADER = "run_id,episode,step,agent_id,price,action_index,reward,capital,intervention"
ENV_STREAM = 2**31 - 1
OUT_ENV_VAR = "PRICE_LAB_OUT"


class ConfigError(ValueError):
    pass


def default_out_root():
    return Path(os.environ.get(OUT_ENV_VAR, "runs"))


def derive_seeds(master_seed, run_index, agent_index):
    """64-bit seed for one (run, agent) stream.

    Uses numpy's ``SeedSequence`` with ``run_index`` and ``agent_index`` as the
    spawn key, whose output is stable across numpy versions. The environment
    draws from agent slot ``ENV_STREAM``.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(run_index), int(agent_index)))
    return int(ss.generate_state(1, np.uint64)[0])


def _check_keys(d, allowed, where):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")


_MARKET_KEYS = ("m", "p_max", "c", "grid_unit")
_DEMAND_KEYS = ("tie_tolerance",)
_INTERVENTION_KEYS = ("episode", "step", "agent", "price")


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "A"
    n_agents: int = 3
    algorithm: str = "ppo"
    mu: float = 0.5
    episodes: int = 10_000
    steps_per_episode: int = 365
    action_space_size: int = 7
    master_seed: int = 0
    run_index: int = 0
    market: dict = field(default_factory=dict)
    demand: dict = field(default_factory=dict)
    algo_params: dict = field(default_factory=dict)
    reward_model: str = "quantity_at_min_price"
    update_rule: str = "softplus"
    init_price_low: float = 0.5
    init_price_high: float = 1.5
    log_every: int = 1
    interventions: tuple = ()
    convergence_threshold: float = 0.01
    convergence_window: int = 100
    convergence_reading: str = "rolling_std"
    save_checkpoints: bool = False

    def __post_init__(self):
        object.__setattr__(self, "interventions", tuple(dict(iv) for iv in self.interventions))
        self.validate()

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("run config must be a JSON object")
        _check_keys(d, [f.name for f in fields(cls)], "run config")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    def to_dict(self):
        d = asdict(self)
        d["interventions"] = [dict(iv) for iv in self.interventions]
        return d

    def validate(self):
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.algorithm not in ("ppo", "dqn"):
            raise ConfigError(f"algorithm must be 'ppo' or 'dqn', got {self.algorithm!r}")
        if self.log_every < 1:
            raise ConfigError("log_every must be >= 1")
        if self.convergence_reading not in ("rolling_std", "dispersion"):
            raise ConfigError(f"unknown convergence_reading {self.convergence_reading!r}")
        _check_keys(self.market, _MARKET_KEYS, "market")
        _check_keys(self.demand, _DEMAND_KEYS, "demand")
        for iv in self.interventions:
            _check_keys(iv, _INTERVENTION_KEYS, "intervention")
            if set(iv) != set(_INTERVENTION_KEYS):
                raise ConfigError(f"intervention needs keys {_INTERVENTION_KEYS}")
            if not 0 <= iv["agent"] < self.n_agents or not iv["price"] > 0:
                raise ConfigError(f"invalid intervention {iv}")
        try:
            self.env_config()
            self.algo_hyperparams()
        except (ValueError, TypeError) as e:
            raise ConfigError(str(e)) from None

    def market_params(self):
        return MarketParams(**self.market, reward_model=self.reward_model)

    def env_config(self):
        return EnvConfig(
            n_agents=self.n_agents,
            scenario=self.scenario,
            action_grid=build_action_grid(self.action_space_size),
            init_price_low=self.init_price_low,
            init_price_high=self.init_price_high,
            steps_per_episode=self.steps_per_episode,
            market=self.market_params(),
            demand=DemandSpec(mu=self.mu, **self.demand),
            update_rule=self.update_rule,
        )

    def algo_hyperparams(self):
        cls = PPOParams if self.algorithm == "ppo" else DQNParams
        _check_keys(self.algo_params, [f.name for f in fields(cls)], f"{self.algorithm} algo_params")
        return cls(**self.algo_params)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def cell_label(self):
        return f"{self.scenario}-{self.algorithm}-n{self.n_agents}-mu{self.mu:g}"

    def run_id(self):
        return f"{self.cell_label()}-r{self.run_index:03d}-{self.config_hash()[:8]}"


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class StepRow:
    run_id: str
    episode: int
    step: int
    agent_id: int
    price: float
    action_index: int
    reward: float
    capital: float
    intervention: bool = False


def format_row(r):
    return (f"{r.run_id},{r.episode},{r.step},{r.agent_id},{r.price:.6f},{r.action_index},"
            f"{r.reward!r},{r.capital!r},{int(r.intervention)}")


def write_step_log(fh, rows, flush=True):
    """Append ``rows`` to an open step log; the header is written separately."""
    for r in rows:
        fh.write(format_row(r))
        fh.write("\n")
    if flush:
        fh.flush()


def read_step_log(path):
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != STEP_LOG_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            f = line.rstrip("\n").split(",")
            rows.append(StepRow(f[0], int(f[1]), int(f[2]), int(f[3]), float(f[4]), int(f[5]),
                                float(f[6]), float(f[7]), f[8] == "1"))
    return rows


@dataclass
class RunArtifact:
    path: Path
    run_id: str
    summary: dict


def make_agents(config, env_cfg):
    n_actions = len(env_cfg.action_grid)
    hp = config.algo_hyperparams()
    agents = []
    for i in range(config.n_agents):
        rng = np.random.default_rng(derive_seeds(config.master_seed, config.run_index, i))
        if config.algorithm == "ppo":
            agents.append(PPOBrain(env_cfg.obs_size, n_actions, config.steps_per_episode, rng, hp))
        else:
            total = config.episodes * config.steps_per_episode
            agents.append(DQNBrain(env_cfg.obs_size, n_actions, total, rng, hp))
    return agents


def run_single(config, out_root=None):
    """Train all sellers for one run and write its artifact directory."""
    if isinstance(config, dict):
        config = RunConfig.from_dict(config)
    env_cfg = config.env_config()
    run_id = config.run_id()
    out = Path(out_root) if out_root is not None else default_out_root()
    run_dir = out / run_id
    steps_path = run_dir / "steps.csv"
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        _dump_json(run_dir / "config.json", config.to_dict())
        fh = open(steps_path, "w", encoding="utf-8", newline="\n")
    except OSError as e:
        raise OSError(f"cannot write run artifact under {run_dir}: {e.strerror}") from e

    agents = make_agents(config, env_cfg)
    env_rng = np.random.default_rng(derive_seeds(config.master_seed, config.run_index, ENV_STREAM))
    schedule = {}
    for iv in config.interventions:
        schedule.setdefault((iv["episode"], iv["step"]), []).append(iv)

    acc = EpisodeAccumulator()
    n, steps = config.n_agents, config.steps_per_episode
    capitals = None
    try:
        with fh:
            fh.write(STEP_LOG_HEADER + "\n")
            for ep in range(config.episodes):
                state, obs = reset(env_cfg, env_rng, capitals, ep)
                logged = ep % config.log_every == 0 or ep == config.episodes - 1
                rows = []
                for t in range(steps):
                    forced = schedule.get((ep, t))
                    if forced:
                        for iv in forced:
                            state = force_price(state, iv["agent"], float(iv["price"]))
                        obs = observe_all(state, env_cfg)
                    flagged = state.interventions
                    actions = [agents[i].act(obs[i]) for i in range(n)]
                    state, next_obs, rewards = step(state, actions, env_cfg)
                    last = t == steps - 1
                    for i in range(n):
                        agents[i].observe_step(obs[i], actions[i], float(rewards[i]), next_obs[i], last)
                    acc.add_step(state.prices, rewards)
                    if logged:
                        for i in range(n):
                            rows.append(StepRow(run_id, ep, t, i, float(state.prices[i]), actions[i],
                                                float(rewards[i]), float(state.capitals[i]), i in flagged))
                    obs = next_obs
                for i in range(n):
                    agents[i].end_episode(obs[i])
                capitals = state.capitals
                acc.end_episode()
                if rows:
                    write_step_log(fh, rows)
    except OSError as e:
        raise OSError(f"cannot write {steps_path}: {e.strerror}") from e

    series = acc.series()
    summary = {"run_id": run_id, "config_hash": config.config_hash()}
    summary.update(summarize(series, compute_benchmarks(env_cfg.market), n,
                             config.convergence_threshold, config.convergence_window,
                             config.convergence_reading))
    _dump_json(run_dir / "summary.json", summary)
    if config.save_checkpoints:
        (run_dir / "brains").mkdir(exist_ok=True)
        for i, a in enumerate(agents):
            save_brain(a, run_dir / "brains" / f"agent_{i}.json")
    log.info("run %s done: converged=%s delta=%.3f", run_id, summary["converged"], summary["delta"])
    return RunArtifact(run_dir, run_id, summary)


_AXIS_KEYS = ("scenario", "n_agents", "algorithm", "mu", "action_space_size", "update_rule", "reward_model")


@dataclass(frozen=True)
class GridSpec:
    base: RunConfig = field(default_factory=RunConfig)
    blocks: tuple = ()
    repeats: int = 5

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if not self.blocks:
            raise ConfigError("grid needs at least one block of axes")
        for axes in self.blocks:
            _check_keys(axes, _AXIS_KEYS, "grid axis")
            for k, vals in axes.items():
                if not isinstance(vals, (list, tuple)) or len(vals) == 0:
                    raise ConfigError(f"grid axis {k!r} is empty")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("grid config must be a JSON object")
        _check_keys(d, ("base", "axes", "blocks", "repeats"), "grid config")
        if ("axes" in d) == ("blocks" in d):
            raise ConfigError("grid config needs exactly one of 'axes' or 'blocks'")
        blocks = [d["axes"]] if "axes" in d else d["blocks"]
        base = RunConfig.from_dict(d.get("base", {}))
        return cls(base, tuple(dict(b) for b in blocks), int(d.get("repeats", 5)))

    def expand(self):
        """Every run config in grid order, with consecutive ``run_index`` values."""
        configs = []
        for axes in self.blocks:
            keys = list(axes)
            for combo in itertools.product(*(axes[k] for k in keys)):
                for _ in range(self.repeats):
                    configs.append(replace(self.base, run_index=len(configs), **dict(zip(keys, combo))))
        return configs


def study_grid(base=None, repeats=5):
    """Scenario A over both algorithms, Scenario B with PPO: 60 + 30 runs."""
    mus = [0.0, 0.5, 1.0]
    return GridSpec(
        base=base or RunConfig(),
        blocks=(
            {"scenario": ["A"], "n_agents": [3, 5], "algorithm": ["ppo", "dqn"], "mu": mus},
            {"scenario": ["B"], "n_agents": [3, 5], "algorithm": ["ppo"], "mu": mus},
        ),
        repeats=repeats,
    )


def _grid_worker(args):
    cfg_dict, out_root = args
    cfg = RunConfig.from_dict(cfg_dict)
    try:
        art = run_single(cfg, out_root)
        return {"status": "ok", "summary": art.summary}
    except Exception as e:  # one failed run must not abort its siblings
        log.exception("run %s failed", cfg.run_id())
        return {"status": "failed", "error": f"{type(e).__name__}: {e}"}


def run_grid(grid, out_root=None, parallelism=1):
    """Run every grid cell and repeat; returns the manifest entries."""
    if parallelism < 1:
        raise ConfigError("parallelism must be >= 1")
    out = Path(out_root) if out_root is not None else default_out_root()
    out.mkdir(parents=True, exist_ok=True)
    configs = grid.expand()
    jobs = [(c.to_dict(), str(out)) for c in configs]
    if parallelism == 1:
        results = [_grid_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_grid_worker, jobs))

    entries = []
    for cfg, res in zip(configs, results):
        entry = {
            "run_index": cfg.run_index,
            "run_id": cfg.run_id(),
            "cell": cfg.cell_label(),
            "scenario": cfg.scenario,
            "algorithm": cfg.algorithm,
            "n_agents": cfg.n_agents,
            "mu": cfg.mu,
            "path": cfg.run_id(),
            "status": res["status"],
        }
        if res["status"] != "ok":
            entry["error"] = res["error"]
        entries.append(entry)
    manifest = {
        "n_runs": len(entries),
        "n_failed": sum(e["status"] != "ok" for e in entries),
        "runs": entries,
    }
    _dump_json(out / "manifest.json", manifest)
    return manifest
