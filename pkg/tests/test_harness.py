import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import pytest

from spanembed.graph_core import gnp, iter_bits, paley
from spanembed.guest_prep import check_zero_free
from spanembed.harness import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    adversary_delete,
    csv_row,
    make_guest,
    parse_config_file,
    run_pipeline,
)
from spanembed.graph_core import bandwidth_of_labelling


class TestAdversary:
    def test_budget_zero_identity(self):
        g = gnp(200, 0.5, 1)
        assert adversary_delete(g, "random", 0.2, 2, 0.5, seed=1, budget=0) == g

    def test_floor_respected(self):
        g = gnp(400, 0.5, 2)
        out = adversary_delete(g, "random", 0.2, 2, 0.5, seed=2)
        floor = 0.7 * 0.5 * 400
        assert out.min_degree() >= floor - 1e-9
        assert out.m < g.m

    def test_tight_floor_identity(self):
        # on a regular host a floor just under the common degree freezes everything
        g = paley(101)
        gamma = 49.5 / (0.5 * 101) - 1 / 2
        out = adversary_delete(g, "random", gamma, 2, 0.5, seed=3)
        assert out == g

    def test_unsatisfiable_floor_rejected(self):
        g = gnp(100, 0.3, 4)
        with pytest.raises(ConfigError):
            adversary_delete(g, "random", 0.9, 2, 0.3, seed=4)

    def test_triangle_killer(self):
        # killing all triangles at a vertex costs ~p^2 n edges at each of its
        # neighbours, so the floor must sit well below (1 - p) pn
        g = gnp(500, 0.5, 9)
        out = adversary_delete(g, "triangle_killer", 0.1, 1, 0.5, seed=9, target=0)
        nbrs = list(iter_bits(out.adj[0]))
        for i, u in enumerate(nbrs):
            for v in nbrs[i + 1:]:
                assert not out.has_edge(u, v)
        assert out.min_degree() >= 0.1 * 0.5 * 500 - 1e-9
        assert out.adj[0] == g.adj[0]  # edges at the target itself survive

    def test_triangle_killer_blocked_raises(self):
        g = gnp(500, 0.5, 9)
        with pytest.raises(ConfigError):
            adversary_delete(g, "triangle_killer", 0.05, 2, 0.5, seed=9, target=0)

    def test_bipartite_push(self):
        g = gnp(400, 0.5, 5)
        out = adversary_delete(g, "bipartite_push", 0.2, 2, 0.5, seed=5)
        assert out.m < g.m
        assert out.min_degree() >= 0.7 * 0.5 * 400 - 1e-9


class TestMakeGuest:
    def test_hamilton_even(self):
        h, l, col, meta = make_guest("hamilton_cycle", 100, 0)
        assert meta["bandwidth"] == 2 and meta["k"] == 2
        assert col.is_proper(h) and not col.zero_vertices()

    def test_hamilton_odd_single_zero(self):
        h, l, col, meta = make_guest("hamilton_cycle", 101, 0)
        assert col.is_proper(h)
        zeros = col.zero_vertices()
        assert len(zeros) == 1
        assert l.pos[zeros[0]] == 100  # last position, far from the prefix

    def test_power_cycle(self):
        h, l, col, meta = make_guest("power_cycle:2", 60, 0)
        assert meta["k"] == 3 and meta["Delta"] == 4
        assert col.is_proper(h)
        assert all(h.degree(v) == 4 for v in range(60))
        assert meta["bandwidth"] <= 4

    def test_power_cycle_divisibility(self):
        with pytest.raises(ConfigError):
            make_guest("power_cycle:2", 61, 0)

    def test_power_path(self):
        h, l, col, meta = make_guest("power_path:2", 50, 0)
        assert col.is_proper(h) and meta["bandwidth"] == 2

    def test_bounded_tree(self):
        h, l, col, meta = make_guest("bounded_tree:3", 500, 7)
        assert h.m == 499  # a tree
        assert max(h.degree(v) for v in range(500)) <= 3
        assert col.is_proper(h)
        # colour classes near-balanced by construction
        ones = sum(1 for c in col.sigma if c == 1)
        assert abs(ones - 250) <= 5

    def test_f_factor(self):
        h, l, col, meta = make_guest("f_factor:triangle", 99, 0)
        assert meta["k"] == 3 and h.m == 99
        assert col.is_proper(h)
        h2, _, col2, meta2 = make_guest("f_factor:c4", 100, 0)
        assert meta2["k"] == 2 and col2.is_proper(h2)

    def test_metadata_honest(self):
        for fam, n in [("hamilton_cycle", 200), ("power_path:2", 120), ("bounded_tree:3", 300)]:
            h, l, col, meta = make_guest(fam, n, 3)
            assert meta["bandwidth"] == bandwidth_of_labelling(h, l)
            assert col.is_proper(h)
            assert check_zero_free(col, l, 10 / 0.01, max(32, 8 * meta["bandwidth"]) / (4 * meta["k"] * n), meta["k"])


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(p=0.0).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(mode="weird").validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(gamma=-1).validate()
        ExperimentConfig().validate()

    def test_config_file_parsing(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("n = 500\np = 0.35   # density\n\nguest_family = hamilton_cycle\n")
        vals = parse_config_file(str(path))
        assert vals == {"n": 500, "p": 0.35, "guest_family": "hamilton_cycle"}

    def test_config_file_bad_key(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("nonsense = 3\n")
        with pytest.raises(ConfigError):
            parse_config_file(str(path))


class TestRunPipeline:
    def test_dense_small_run(self):
        cfg = ExperimentConfig(n=200, p=1.0, k=2, gamma=0.2, eps=0.1, d=0.5,
                               adversary="none", seed=1, xi_guest=0.15)
        rec = run_pipeline(cfg)
        assert rec.success, (rec.failure_stage, rec.notes.get("error"))
        assert rec.r >= 2 and rec.failure_stage == ""

    def test_failure_is_recorded_not_raised(self):
        # two disjoint cliques fail the degree floor at the adversary stage
        cfg = ExperimentConfig(n=100, p=0.2, k=2, gamma=0.6, eps=0.25, d=0.1, seed=1)
        rec = run_pipeline(cfg)
        assert not rec.success
        assert rec.failure_stage.startswith("adversary")

    def test_csv_row_shape(self):
        cfg = ExperimentConfig(n=200, p=1.0, k=2, gamma=0.2, eps=0.1, d=0.5,
                               adversary="none", seed=1, xi_guest=0.15)
        rec = run_pipeline(cfg)
        row = csv_row(rec)
        assert len(row.split(",")) == len(CSV_HEADER.split(","))
        assert row.split(",")[0] == "1"

    def test_determinism_modulo_runtime(self):
        cfg = ExperimentConfig(n=300, p=0.5, k=2, gamma=0.2, eps=0.25, d=0.1,
                               adversary="random", seed=4, mu=0.15, xi_guest=0.15)
        r1, r2 = run_pipeline(cfg), run_pipeline(cfg)
        a = csv_row(r1).rsplit(",", 1)[0]
        b = csv_row(r2).rsplit(",", 1)[0]
        assert a == b

    def test_guest_k_mismatch(self):
        cfg = ExperimentConfig(n=60, p=1.0, k=2, guest_family="power_cycle:2",
                               adversary="none", eps=0.1, d=0.5, seed=0)
        rec = run_pipeline(cfg)
        assert not rec.success and "guest" in rec.failure_stage

    def test_degenerate_mode_tree(self):
        cfg = ExperimentConfig(n=1000, p=0.4, k=2, gamma=0.2, eps=0.3, d=0.1, D=1,
                               Delta=3, guest_family="bounded_tree:3", mode="degenerate",
                               adversary="random", seed=0, mu=0.15, xi_guest=0.45)
        rec = run_pipeline(cfg)
        assert rec.success, (rec.failure_stage, rec.notes.get("error"))
        bo = rec.notes["bounded_order_violations"]
        assert bo == {"back_degree": 0, "locality": 0, "buffer_locality": 0}

    def test_power_cycle_pipeline(self):
        cfg = ExperimentConfig(n=960, p=0.5, k=3, gamma=0.15, eps=0.35, d=0.1, Delta=4,
                               guest_family="power_cycle:2", adversary="random", seed=0,
                               mu=0.2, xi_guest=0.25)
        rec = run_pipeline(cfg)
        assert rec.success, (rec.failure_stage, rec.notes.get("error"))

    def test_power_cycle_with_exceptional_vertices_fails_honestly(self):
        # every vertex of a squared cycle lies in a triangle, so the anchored
        # pre-embedding has no candidates whenever V0 is nonempty
        cfg = ExperimentConfig(n=960, p=0.5, k=3, gamma=0.15, eps=0.35, d=0.1, Delta=4,
                               guest_family="power_cycle:2", adversary="random", seed=3,
                               mu=0.2, xi_guest=0.25)
        rec = run_pipeline(cfg)
        if not rec.success:
            assert rec.failure_stage.startswith("pre-embed")


class TestCli:
    def test_cli_run_writes_csv(self, tmp_path):
        out = tmp_path / "result.csv"
        cmd = [
            sys.executable, "-m", "spanembed.cli", "run",
            "--n", "200", "--p", "1.0", "--k", "2", "--gamma", "0.2",
            "--eps", "0.1", "--d", "0.5", "--adversary", "none",
            "--seed", "3", "--out", str(out),
        ]
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=300)
        assert proc.returncode == 0, proc.stderr
        lines = out.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert lines[1].split(",")[8] in ("true", "false")

    def test_cli_invalid_config_exit_code(self):
        cmd = [sys.executable, "-m", "spanembed.cli", "run", "--p", "2.0"]
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=60)
        assert proc.returncode == 1
        assert "error" in proc.stderr

    def test_cli_multi_seed_and_config_file(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "n = 200\np = 1.0\nk = 2\ngamma = 0.2\neps = 0.1\nd = 0.5\n"
            "adversary = none\nxi_guest = 0.15\n"
        )
        out = tmp_path / "rows.csv"
        cmd = [sys.executable, "-m", "spanembed.cli", "run", "--config", str(cfg),
               "--seed", "1", "--seeds", "2", "--out", str(out)]
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=300)
        assert proc.returncode == 0, proc.stderr
        lines = out.read_text().splitlines()
        assert len(lines) == 3
        assert lines[1].split(",")[0] == "1" and lines[2].split(",")[0] == "2"
