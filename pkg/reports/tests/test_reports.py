import json
import os

import numpy as np
import pytest

from see_rl_reports import (ReportError, final_window_mean, group_statistics,
                            learning_curves, load_run, load_runs,
                            method_label, normalize_scores,
                            normalized_profile, profile_table)
from see_rl_reports.cli import main as cli_main

COLUMNS = ("step,episode,eval_return_mean,eval_return_stderr,"
           "train_episode_return,exploration_reward_mean,p_q_mean,"
           "exploit_critic_loss,exploit_actor_loss,explore_critic_loss,"
           "explore_actor_loss,wall_time")


def write_run(root, name, returns, steps=None, *, algo="sac", see=False,
              env_id="pendulum", variant="dense", seed=0, ablation=None):
    path = os.path.join(root, name)
    os.makedirs(path)
    config = {
        "algo": algo, "see_enabled": see, "env_id": env_id,
        "variant": variant, "seed": seed,
        "ablation": ablation or {"no_conditioning": False,
                                 "no_max_update": False, "no_mixing": False},
    }
    with open(os.path.join(path, "config.json"), "w") as fh:
        json.dump(config, fh)
    if steps is None:
        steps = list(range(0, 1000 * len(returns), 1000))
    lines = [COLUMNS]
    for step, ret in zip(steps, returns):
        lines.append(f"{step},0,{ret},0.0,nan,nan,nan,nan,nan,nan,nan,1.0")
    with open(os.path.join(path, "metrics.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


class TestLoading:
    def test_round_trip(self, tmp_path):
        path = write_run(tmp_path, "r0", [1.0, 2.0, 3.0])
        rec = load_run(path)
        np.testing.assert_array_equal(rec.steps, [0, 1000, 2000])
        np.testing.assert_array_equal(rec.returns, [1.0, 2.0, 3.0])
        assert rec.env_id == "pendulum"
        assert rec.variant == "dense"

    def test_rows_sorted_by_step(self, tmp_path):
        path = write_run(tmp_path, "r0", [3.0, 1.0, 2.0], steps=[200, 0, 100])
        rec = load_run(path)
        np.testing.assert_array_equal(rec.steps, [0, 100, 200])
        np.testing.assert_array_equal(rec.returns, [1.0, 2.0, 3.0])

    def test_missing_config_rejected(self, tmp_path):
        path = write_run(tmp_path, "r0", [1.0])
        os.remove(os.path.join(path, "config.json"))
        with pytest.raises(ReportError):
            load_run(path)

    def test_missing_column_rejected(self, tmp_path):
        path = write_run(tmp_path, "r0", [1.0])
        with open(os.path.join(path, "metrics.csv"), "w") as fh:
            fh.write("step,reward\n0,1.0\n")
        with pytest.raises(ReportError):
            load_run(path)

    def test_method_labels(self):
        assert method_label({"algo": "sac", "see_enabled": False}) == "sac"
        assert method_label({"algo": "td3", "see_enabled": True,
                             "ablation": {}}) == "td3+see"
        label = method_label({"algo": "sac", "see_enabled": True,
                              "ablation": {"no_mixing": True,
                                           "no_max_update": False}})
        assert label == "sac+see/no-mixing"


class TestGroupStatistics:
    def test_hand_mean_and_stderr(self, tmp_path):
        # two constant-return runs at 0 and 2: mean 1, stderr 1
        recs = load_runs([write_run(tmp_path, "a", [0.0, 0.0], seed=0),
                          write_run(tmp_path, "b", [2.0, 2.0], seed=1)])
        _, mean, stderr = group_statistics(recs)
        np.testing.assert_array_equal(mean, [1.0, 1.0])
        np.testing.assert_array_equal(stderr, [1.0, 1.0])

    def test_single_run_zero_band(self, tmp_path):
        recs = load_runs([write_run(tmp_path, "a", [5.0, 7.0])])
        _, mean, stderr = group_statistics(recs)
        np.testing.assert_array_equal(mean, [5.0, 7.0])
        np.testing.assert_array_equal(stderr, [0.0, 0.0])

    def test_unequal_grids_interpolated(self, tmp_path):
        recs = load_runs([
            write_run(tmp_path, "a", [0.0, 2.0], steps=[0, 200], seed=0),
            write_run(tmp_path, "b", [0.0, 1.0, 2.0], steps=[0, 100, 200],
                      seed=1)])
        grid, mean, _ = group_statistics(recs)
        np.testing.assert_array_equal(grid, [0, 100, 200])
        np.testing.assert_allclose(mean, [0.0, 1.0, 2.0])

    def test_disjoint_ranges_rejected(self, tmp_path):
        recs = load_runs([
            write_run(tmp_path, "a", [0.0, 1.0], steps=[0, 100], seed=0),
            write_run(tmp_path, "b", [0.0, 1.0], steps=[200, 300], seed=1)])
        with pytest.raises(ReportError):
            group_statistics(recs)


class TestNormalization:
    def test_three_point_min_max(self):
        normalized, degenerate = normalize_scores([-100.0, 0.0, 100.0])
        np.testing.assert_array_equal(normalized, [0.0, 0.5, 1.0])
        assert not degenerate

    def test_degenerate_all_zero(self):
        normalized, degenerate = normalize_scores([3.0, 3.0])
        np.testing.assert_array_equal(normalized, [0.0, 0.0])
        assert degenerate

    def test_final_window_is_last_tenth(self, tmp_path):
        returns = [0.0] * 18 + [10.0, 20.0]
        rec = load_run(write_run(tmp_path, "a", returns))
        assert final_window_mean(rec) == 15.0

    def test_profile_table_three_runs(self, tmp_path):
        paths = [write_run(tmp_path, f"r{i}", [v], seed=i)
                 for i, v in enumerate([-100.0, 0.0, 100.0])]
        table = profile_table(load_runs(paths))
        assert [row["normalized"] for row in table] == [0.0, 0.5, 1.0]
        assert all(not row["degenerate"] for row in table)

    def test_single_run_variant_flagged(self, tmp_path):
        table = profile_table(load_runs(
            [write_run(tmp_path, "only", [1.0])]))
        assert table[0]["degenerate"] is True
        assert table[0]["normalized"] == 0.0


class TestFigures:
    def _runs(self, root):
        return load_runs([
            write_run(root, "a", [0.0, 1.0], seed=0),
            write_run(root, "b", [1.0, 2.0], seed=1),
            write_run(root, "c", [0.5, 3.0], seed=2, see=True),
            write_run(root, "d", [-1.0, 0.0], seed=0, variant="adverse"),
        ])

    def test_learning_curves_one_panel_per_variant(self, tmp_path):
        out = os.path.join(tmp_path, "out")
        written = learning_curves(self._runs(tmp_path), out)
        names = sorted(os.path.basename(p) for p in written)
        assert names == ["curves_pendulum_adverse.svg",
                         "curves_pendulum_dense.svg"]

    def test_profile_outputs(self, tmp_path):
        out = os.path.join(tmp_path, "out")
        fig_path, table_path = normalized_profile(self._runs(tmp_path), out)
        assert os.path.exists(fig_path)
        with open(table_path) as fh:
            header = fh.readline().strip()
        assert header.startswith("env_id,variant,method,seed")

    def test_figures_byte_identical(self, tmp_path):
        recs = self._runs(tmp_path)
        blobs = []
        for name in ("out1", "out2"):
            out = os.path.join(tmp_path, name)
            paths = learning_curves(recs, out)
            paths += list(normalized_profile(recs, out))
            blobs.append([open(p, "rb").read() for p in sorted(paths)])
        assert blobs[0] == blobs[1]


class TestCli:
    def test_happy_path(self, tmp_path, capsys):
        runs = [write_run(tmp_path, f"r{i}", [float(i), float(i + 1)], seed=i)
                for i in range(2)]
        out = os.path.join(tmp_path, "out")
        code = cli_main(["--runs", *runs, "--out", out, "--profile"])
        assert code == 0
        printed = capsys.readouterr().out.strip().splitlines()
        assert any(p.endswith("profile.svg") for p in printed)
        assert any(p.endswith("profile.csv") for p in printed)

    def test_missing_run_dir_is_error(self, tmp_path, capsys):
        out = os.path.join(tmp_path, "out")
        code = cli_main(["--runs", os.path.join(tmp_path, "nope"),
                         "--out", out])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_required_flag(self):
        with pytest.raises(SystemExit):
            cli_main(["--out", "somewhere"])
