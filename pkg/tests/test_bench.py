import csv
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftrom.bench import (
    Workspace,
    default_scenario,
    load_snapshots,
    measure_speedup,
    run_scenario,
    save_snapshots,
    scenario_from_dict,
    train_test_split,
)
from ftrom.bench import io as ftrs
from ftrom.bench.cli import main
from ftrom.bench.report import REPORT_HEADER, report_rows, write_report
from ftrom.bench.scenarios import SCENARIO_IDS, load_config
from ftrom.errors import ConfigError, FormatError
from ftrom.fom import Trajectory


def traj(rows=2, cols=3, seed=0):
    rng = np.random.default_rng(seed)
    return Trajectory(np.arange(cols) * 0.5, rng.normal(size=(rows, cols)))


class TestFtrs:
    def test_round_trip_bit_exact(self, tmp_path):
        tr = traj()
        p = save_snapshots(tr, tmp_path / "a.ftrs")
        back = load_snapshots(p)
        assert back.states.tobytes() == tr.states.tobytes()
        assert back.times.tobytes() == tr.times.tobytes()

    @settings(max_examples=25, deadline=None)
    @given(rows=st.integers(1, 20), cols=st.integers(1, 20), seed=st.integers(0, 1000))
    def test_round_trip_property(self, rows, cols, seed):
        tr = traj(rows, cols, seed)
        tr.states[0, 0] = -0.0
        back = ftrs.decode(ftrs.encode(tr))
        assert back.states.tobytes() == tr.states.tobytes()

    def test_header_layout(self):
        buf = ftrs.encode(traj(2, 3))
        assert buf[:4] == b"FTRS"
        assert struct.unpack_from("<HHQQQ", buf, 4) == (1, 0, 2, 3, 3)
        assert len(buf) == 32 + 8 * 3 + 8 * 6
        # column major payload
        tr = traj(2, 3)
        first = struct.unpack_from("<dd", buf, 32 + 24)
        assert first == (tr.states[0, 0], tr.states[1, 0])

    def test_bad_magic(self, tmp_path):
        buf = bytearray(ftrs.encode(traj()))
        buf[:4] = b"XXXX"
        (tmp_path / "x.ftrs").write_bytes(bytes(buf))
        with pytest.raises(FormatError) as exc:
            load_snapshots(tmp_path / "x.ftrs")
        assert exc.value.offset == 0

    def test_truncated(self, tmp_path):
        buf = ftrs.encode(traj())
        (tmp_path / "t.ftrs").write_bytes(buf[:-5])
        with pytest.raises(FormatError) as exc:
            load_snapshots(tmp_path / "t.ftrs")
        assert exc.value.offset == len(buf) - 5

    def test_huge_dimensions(self, tmp_path):
        head = struct.pack("<4sHHQQQ", b"FTRS", 1, 0, 10**9, 10**9, 10**9)
        (tmp_path / "h.ftrs").write_bytes(head + b"\0" * 64)
        with pytest.raises(FormatError) as exc:
            load_snapshots(tmp_path / "h.ftrs")
        assert exc.value.offset == 8

    def test_bad_version_and_times(self):
        buf = bytearray(ftrs.encode(traj()))
        buf[4] = 2
        with pytest.raises(FormatError) as exc:
            ftrs.decode(bytes(buf))
        assert exc.value.offset == 4
        buf = bytearray(ftrs.encode(traj()))
        struct.pack_into("<Q", buf, 24, 7)
        with pytest.raises(FormatError) as exc:
            ftrs.decode(bytes(buf))
        assert exc.value.offset == 24

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        save_snapshots(traj(), tmp_path / "a.ftrs")
        save_snapshots(traj(seed=3), tmp_path / "a.ftrs")
        assert [p.name for p in tmp_path.iterdir()] == ["a.ftrs"]


class TestSplit:
    def test_four_columns(self):
        tr = Trajectory(np.arange(4.0), np.arange(8.0).reshape(2, 4))
        a, b = train_test_split(tr)
        np.testing.assert_array_equal(a.times, [0, 2])
        np.testing.assert_array_equal(b.times, [1, 3])

    def test_partition(self):
        tr = traj(3, 9)
        a, b = train_test_split(tr)
        t = np.concatenate([a.times, b.times])
        Q = np.hstack([a.states, b.states])[:, np.argsort(t)]
        np.testing.assert_array_equal(Q, tr.states)

    def test_disk_split(self):
        scn = default_scenario("moving_disk")
        scn.fom.grid = 33
        ws = Workspace()
        assert ws.trajectories(scn, "train")[0].n_times == 100
        assert ws.trajectories(scn, "test")[0].n_times == 100

    def test_single_column(self):
        with pytest.raises(ValueError):
            train_test_split(traj(2, 1))


class TestScenarios:
    def test_registry_defaults(self):
        rd = default_scenario("rd1d")
        assert rd.params.train == [0.2, 1.0]
        assert rd.params.test == [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        full = default_scenario("ard2d", full=True)
        assert full.params.train == [10.0, 30.0, 50.0, 70.0, 100.0]
        assert full.params.test == [20.0, 40.0, 60.0, 80.0, 90.0]
        desk = default_scenario("ard2d")
        assert (desk.fom.grid, desk.params.train, desk.params.test) == (128, [10.0, 100.0], [40.0])
        assert default_scenario("advect1d").params.train == [-2.0, 2.0]
        assert set(SCENARIO_IDS) == {"moving_disk", "topo_merge", "advect1d", "rd1d", "ard2d", "pod_decay"}

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            default_scenario("bunsen")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="decomposition.taux"):
            scenario_from_dict({"id": "rd1d", "decomposition": {"taux": 3}})

    def test_type_errors(self):
        with pytest.raises(ConfigError):
            scenario_from_dict({"id": "rd1d", "rom": {"ranks": 4}})
        with pytest.raises(ConfigError):
            scenario_from_dict({"id": "rd1d", "decomposition": {"tau": "big"}})
        with pytest.raises(ConfigError):
            scenario_from_dict({"id": "rd1d", "front": {"kind": "erf"}})

    def test_yaml_file(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("id: rd1d\nfom:\n  grid: 500\nrom:\n  ranks: [2, 3]\n")
        s = load_config(p)
        assert s.fom.grid == 500 and s.rom.ranks == [2, 3]
        assert s.decomposition.tau == 4.0

    def test_yaml_unknown_top_level(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("id: rd1d\nrom_typo: 1\n")
        with pytest.raises(ConfigError):
            load_config(p)


def small_rd():
    return scenario_from_dict({
        "id": "rd1d",
        "fom": {"grid": 400, "n_t": 21},
        "params": {"train": [0.2, 1.0], "test": [0.5]},
        "decomposition": {"max_iter": 400},
        "rom": {"ranks": [3], "sample_fractions": [1.0, 0.5]},
    })


class TestRunScenario:
    def test_rd_small_grid(self):
        run = run_scenario(small_rd())
        assert run.ok
        keys = {r.key for r in run.reports}
        assert keys == {("rd1d", "pod", 3, 1.0), ("rd1d", "ftr", 3, 1.0), ("rd1d", "ftr", 3, 0.5)}
        for r in run.reports:
            assert r.offline_err >= 0 and r.online_err >= 0 and r.speedup > 0
        ftr = {r.sample_fraction: r for r in run.reports if r.method == "ftr"}
        assert ftr[1.0].offline_err < [r for r in run.reports if r.method == "pod"][0].offline_err

    def test_failure_records(self):
        scn = small_rd()
        scn.rom.ranks = [3, 500]
        run = run_scenario(scn, methods=["pod"])
        assert not run.ok
        assert [(f.method, f.rank) for f in run.failures] == [("pod", 500)]
        assert [r.rank for r in run.reports] == [3]

    def test_deterministic_csv(self, tmp_path):
        a = run_scenario(small_rd(), methods=["ftr"], sample_fractions=[1.0])
        b = run_scenario(small_rd(), methods=["ftr"], sample_fractions=[1.0])
        write_report(a.reports, tmp_path / "a.csv", include_timing=False)
        write_report(b.reports, tmp_path / "b.csv", include_timing=False)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_projection_not_above_offline_on_training(self):
        # the best fit can only improve on the stored amplitudes
        from ftrom.bench.experiments import reduced_map
        from ftrom.decomp import projection_error

        scn = small_rd()
        ws = Workspace()
        basis, amps, offline, _ = ws.decomposition(scn, "ftr", 3)
        Q = ws.snapshot_matrix(scn, "train")
        err = projection_error(Q, reduced_map(scn, "ftr", basis), a_guess=amps)
        assert err <= offline + 1e-12

    def test_pod_decay_curve(self):
        scn = scenario_from_dict({"id": "pod_decay", "fom": {"grid": 300, "n_t": 150},
                                  "params": {"train": [1.0, 0.5, 0.25]}})
        run = run_scenario(scn)
        betas = [p["beta"] for p in run.curves["pod_decay"]]
        assert len(betas) == 3 and np.all(np.diff(betas) < 0)

    def test_workspace_reuses_files(self, tmp_path):
        scn = small_rd()
        ws = Workspace(tmp_path)
        ws.decomposition(scn, "ftr", 3)
        files = sorted(p.name for p in (tmp_path / "models").iterdir())
        assert files and all(f.endswith(".npz") for f in files)
        ws2 = Workspace(tmp_path)
        b1 = ws.decomposition(scn, "ftr", 3)[0]
        b2 = ws2.decomposition(scn, "ftr", 3)[0]
        np.testing.assert_array_equal(b1, b2)


class TestReport:
    def test_header(self, tmp_path):
        run = run_scenario(small_rd(), methods=["pod"])
        p = write_report(run.reports, tmp_path / "r.csv")
        with open(p) as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == REPORT_HEADER
        assert len(rows) == 2

    def test_missing_values_blank(self):
        from ftrom.bench.experiments import RunReport

        rows = report_rows([RunReport("topo_merge", "ftr", 2, 1.0, offline_err=0.01)])
        assert rows[1] == ["topo_merge", "ftr", "2", "1.0", "0.01", "", "", "", "", ""]


class TestSpeedup:
    def test_repeats_guard(self):
        with pytest.raises(ValueError):
            measure_speedup(small_rd(), 3, 1.0, repeats=2)

    def test_counts(self):
        res = measure_speedup(small_rd(), 3, 0.5, repeats=3)
        assert res.t_fom > 0 and res.t_rom > 0
        assert res.speedup == pytest.approx(res.t_fom / res.t_rom)
        assert res.rom_evals_per_rhs < res.fom_evals_per_rhs
        assert len(res.samples["fom"]) == 3


class TestCli:
    def test_generate_and_report(self, tmp_path, capsys):
        cfg = tmp_path / "topo.yaml"
        cfg.write_text("id: topo_merge\nfom:\n  grid: 48\n  n_t: 11\ndecomposition:\n  max_iter: 50\n")
        assert main(["generate", str(cfg), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "topo_merge_all_0.ftrs").exists()
        assert main(["report", str(cfg), "--rank", "1", "2", "--out", str(tmp_path)]) == 0
        for name in ("topo_merge_report.csv", "topo_merge_error_vs_rank.png", "topo_merge_topo_components.csv"):
            assert (tmp_path / name).exists()
        with open(tmp_path / "topo_merge_report.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 4

    def test_bad_config_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("id: rd1d\nwhatever: 1\n")
        assert main(["decompose", str(cfg), "--out", str(tmp_path)]) == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_rom_and_bench(self, tmp_path):
        cfg = tmp_path / "rd.yaml"
        cfg.write_text("id: rd1d\nfom:\n  grid: 300\n  n_t: 11\nparams:\n  test: [0.5]\n"
                       "decomposition:\n  max_iter: 100\n")
        assert main(["rom", str(cfg), "--rank", "2", "--method", "ftr", "--sample-fraction", "1.0",
                     "--out", str(tmp_path)]) == 0
        assert main(["bench", str(cfg), "--rank", "2", "--sample-fraction", "0.5", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "rd1d_speedup.csv").exists()

    def test_plot_ready_cpu_curve(self, tmp_path):
        cfg = tmp_path / "rd.yaml"
        cfg.write_text("id: rd1d\nfom:\n  grid: 300\n  n_t: 11\nparams:\n  test: [0.5]\n"
                       "decomposition:\n  max_iter: 100\n")
        assert main(["report", str(cfg), "--rank", "2", "--method", "ftr", "--sample-fraction", "1.0", "0.5",
                     "--out", str(tmp_path)]) == 0
        with open(tmp_path / "rd1d_error_vs_cpu.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:6] == ["scenario", "method", "rank", "sample_fraction", "t_rom_s", "online_err"]
        assert len(rows) == 3
