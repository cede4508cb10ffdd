import hashlib
import json
import time

import numpy as np
import pytest

from pricelab.runner import (
    STEP_LOG_HEADER, ConfigError, GridSpec, RunConfig, StepRow, derive_seeds, format_row,
    study_grid, read_step_log, run_grid, run_single, write_step_log,
)


def tiny(**kw):
    base = dict(episodes=2, steps_per_episode=3, n_agents=2, master_seed=11)
    base.update(kw)
    return RunConfig(**base)


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestSeeds:
    def test_stable(self):
        assert derive_seeds(5, 1, 2) == derive_seeds(5, 1, 2)

    def test_no_collisions(self):
        rng = np.random.default_rng(0)
        seen = set()
        for s in rng.integers(0, 2**62, 10_000):
            trio = {derive_seeds(int(s), 0, 0), derive_seeds(int(s), 0, 1), derive_seeds(int(s), 1, 0)}
            assert len(trio) == 3
            seen |= trio
        assert len(seen) == 30_000

    def test_master_seed_changes_trajectory(self, tmp_path):
        a = run_single(tiny(master_seed=1), tmp_path)
        b = run_single(tiny(master_seed=2), tmp_path)
        pa = [r.price for r in read_step_log(a.path / "steps.csv")]
        pb = [r.price for r in read_step_log(b.path / "steps.csv")]
        assert pa != pb


class TestConfig:
    def test_round_trip(self):
        c = tiny(algo_params={"lr": 1e-3}, market={"c": 0.9})
        assert RunConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c

    @pytest.mark.parametrize("bad", [
        {"episodes": 0}, {"n_agents": 1}, {"algorithm": "a2c"}, {"bogus": 1},
        {"market": {"cost": 1.0}}, {"algo_params": {"clip": 0.1}}, {"mu": 1.2},
        {"action_space_size": 6}, {"scenario": "C"}, {"interventions": [{"episode": 0}]},
    ])
    def test_rejects(self, bad):
        d = tiny().to_dict()
        d.update(bad)
        with pytest.raises(ConfigError):
            RunConfig.from_dict(d)

    def test_run_id_deterministic(self):
        assert tiny().run_id() == tiny().run_id()
        assert tiny().run_id() != tiny(run_index=1).run_id()


class TestStepLog:
    def test_header_and_format(self, tmp_path):
        art = run_single(tiny(), tmp_path)
        lines = (art.path / "steps.csv").read_text().splitlines()
        assert lines[0] == STEP_LOG_HEADER
        price = lines[1].split(",")[4]
        assert len(price.split(".")[1]) == 6
        assert b"\r" not in (art.path / "steps.csv").read_bytes()

    def test_row_count(self, tmp_path):
        art = run_single(tiny(), tmp_path)
        assert len(read_step_log(art.path / "steps.csv")) == 12

    def test_round_trip(self, tmp_path, rng):
        rows = [StepRow("r", e, t, i, float(rng.uniform(0, 3)), int(rng.integers(7)), float(rng.normal()),
                        float(rng.normal() * 100), bool(rng.random() < 0.2))
                for e in range(3) for t in range(4) for i in range(2)]
        path = tmp_path / "steps.csv"
        with open(path, "w", newline="\n") as fh:
            fh.write(STEP_LOG_HEADER + "\n")
            write_step_log(fh, rows)
        back = read_step_log(path)
        for a, b in zip(rows, back):
            assert b.price == round(a.price, 6)
            assert (a.run_id, a.episode, a.step, a.agent_id, a.action_index, a.reward, a.capital,
                    a.intervention) == (b.run_id, b.episode, b.step, b.agent_id, b.action_index,
                                        b.reward, b.capital, b.intervention)
        assert format_row(back[0]).split(",")[4] == f"{rows[0].price:.6f}"

    def test_log_every_keeps_last_episode(self, tmp_path):
        art = run_single(tiny(episodes=5, log_every=2), tmp_path)
        eps = sorted({r.episode for r in read_step_log(art.path / "steps.csv")})
        assert eps == [0, 2, 4]


class TestRunSingle:
    def test_artifact_files(self, tmp_path):
        art = run_single(tiny(), tmp_path)
        for name in ("config.json", "steps.csv", "summary.json"):
            assert (art.path / name).is_file()
        s = json.loads((art.path / "summary.json").read_text())
        assert set(s) == {"run_id", "config_hash", "converged", "t_euc", "delta",
                          "mean_price_post_conv", "mean_profit_post_conv"}
        assert RunConfig.from_dict(json.loads((art.path / "config.json").read_text())) == tiny()

    @pytest.mark.parametrize("algorithm", ["ppo", "dqn"])
    def test_byte_identical_repeats(self, tmp_path, algorithm):
        cfg = tiny(algorithm=algorithm, episodes=3, steps_per_episode=20,
                   algo_params={"learning_starts": 10, "batch_size": 8} if algorithm == "dqn" else {})
        a = run_single(cfg, tmp_path / "a")
        b = run_single(cfg, tmp_path / "b")
        for name in ("steps.csv", "summary.json", "config.json"):
            assert sha(a.path / name) == sha(b.path / name)

    def test_capital_is_cumulative(self, tmp_path):
        art = run_single(tiny(episodes=3), tmp_path)
        rows = read_step_log(art.path / "steps.csv")
        for agent in (0, 1):
            mine = [r for r in rows if r.agent_id == agent]
            assert mine[-1].capital == pytest.approx(sum(r.reward for r in mine), rel=1e-12)

    def test_intervention_logged_and_applied(self, tmp_path):
        cfg = tiny(interventions=[{"episode": 1, "step": 2, "agent": 1, "price": 1.01}])
        rows = read_step_log(run_single(cfg, tmp_path).path / "steps.csv")
        flagged = [r for r in rows if r.intervention]
        assert [(r.episode, r.step, r.agent_id) for r in flagged] == [(1, 2, 1)]
        deltas = dict(enumerate(cfg.env_config().action_grid.deltas))
        r = flagged[0]
        assert r.price == pytest.approx(np.log1p(np.exp(1.01 + deltas[r.action_index])), abs=1e-6)

    def test_ppo_smoke(self, tmp_path):
        art = run_single(RunConfig(episodes=50, steps_per_episode=32, n_agents=3, master_seed=3), tmp_path)
        rows = read_step_log(art.path / "steps.csv")
        assert len(rows) == 50 * 32 * 3
        assert all(r.price > 0 for r in rows)
        assert np.isfinite([r.reward for r in rows]).all()

    def test_dqn_scenario_b_smoke(self, tmp_path):
        cfg = RunConfig(algorithm="dqn", scenario="B", episodes=8, steps_per_episode=50,
                        algo_params={"learning_starts": 100}, master_seed=3)
        s = run_single(cfg, tmp_path).summary
        assert np.isfinite(s["delta"])

    def test_checkpoints(self, tmp_path):
        art = run_single(tiny(save_checkpoints=True), tmp_path)
        assert sorted(p.name for p in (art.path / "brains").iterdir()) == ["agent_0.json", "agent_1.json"]

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError, match=str(blocker)):
            run_single(tiny(), blocker)

    @pytest.mark.slow
    def test_wall_time_scales_linearly(self, tmp_path):
        def per_step(episodes):
            t0 = time.perf_counter()
            run_single(RunConfig(episodes=episodes, steps_per_episode=32, log_every=1000), tmp_path)
            return (time.perf_counter() - t0) / episodes

        per_step(2)  # warm caches
        small, large = per_step(10), per_step(40)
        assert 0.5 < large / small < 2.0


class TestGrid:
    def test_study_grid_counts(self):
        runs = study_grid().expand()
        assert len(runs) == 90
        assert sum(r.scenario == "A" for r in runs) == 60
        assert sum(r.scenario == "B" for r in runs) == 30
        assert len({r.run_index for r in runs}) == 90

    def test_repeats_distinct_seeds(self):
        grid = GridSpec(base=tiny(), blocks=({"mu": [0.5]},), repeats=5)
        runs = grid.expand()
        seeds = {derive_seeds(r.master_seed, r.run_index, 0) for r in runs}
        assert len(runs) == 5 and len(seeds) == 5

    def test_from_dict(self):
        g = GridSpec.from_dict({"base": {"episodes": 2}, "axes": {"mu": [0, 1], "n_agents": [2, 3]}, "repeats": 2})
        assert len(g.expand()) == 8
        for bad in ({"axes": {"mu": []}}, {"axes": {"seed": [1]}}, {}, {"axes": {"mu": [0]}, "blocks": []},
                    {"axes": {"mu": [0]}, "extra": 1}):
            with pytest.raises(ConfigError):
                GridSpec.from_dict(bad)

    def test_parallel_matches_serial(self, tmp_path):
        grid = GridSpec(base=tiny(steps_per_episode=5), blocks=({"mu": [0.0, 1.0], "algorithm": ["ppo", "dqn"]},),
                        repeats=1)
        m1 = run_grid(grid, tmp_path / "s", 1)
        m4 = run_grid(grid, tmp_path / "p", 4)
        assert m1 == m4 and m1["n_runs"] == 4 and m1["n_failed"] == 0
        for e in m1["runs"]:
            for name in ("steps.csv", "summary.json"):
                assert sha(tmp_path / "s" / e["path"] / name) == sha(tmp_path / "p" / e["path"] / name)
        assert sha(tmp_path / "s" / "manifest.json") == sha(tmp_path / "p" / "manifest.json")

    def test_failure_isolated(self, tmp_path, monkeypatch):
        import pricelab.runner as runner
        real = runner.run_single

        def flaky(cfg, out):
            if cfg.run_index == 1:
                raise RuntimeError("boom")
            return real(cfg, out)

        monkeypatch.setattr(runner, "run_single", flaky)
        grid = GridSpec(base=tiny(), blocks=({"mu": [0.5]},), repeats=3)
        m = run_grid(grid, tmp_path, 1)
        assert [e["status"] for e in m["runs"]] == ["ok", "failed", "ok"]
        assert "boom" in m["runs"][1]["error"] and m["n_failed"] == 1

    def test_out_root_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PRICE_LAB_OUT", str(tmp_path / "envroot"))
        art = run_single(tiny())
        assert art.path.parent == tmp_path / "envroot"
