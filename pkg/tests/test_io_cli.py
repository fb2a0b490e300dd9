import hashlib
import shutil
from pathlib import Path

import numpy as np
import pytest
import yaml

from nsextremes import cli, io, pipeline
from nsextremes.basis import BasisSpec
from nsextremes.errors import ContractError
from nsextremes.gpd import PeaksSample
from nsextremes.model import PosteriorDraws
from nsextremes.retval import OCTANTS

FAST_MCMC = {"n_iterations": 60, "burn_in": 20}
FAST_MLE = {"k": 3, "m_bs": 5, "grid_xi": [1.0, 1000.0], "grid_nu": [1.0, 1000.0]}


def write_config(path, **data):
    base = {"seed": 1, "case": "case1", "n": 200, "basis": {"kind": "spline", "p": 6},
            "method": "mmala", "mcmc": FAST_MCMC, "mle": FAST_MLE,
            "return_values": {"factor": 1.0, "replicates": 50}}
    base.update(data)
    path.write_text(yaml.safe_dump(base))
    return str(path)


def checksums(directory, skip=("timing.yaml",)):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(Path(directory).iterdir()) if p.is_file() and p.name not in skip}


class TestRunConfig:
    def test_seed_mandatory(self):
        with pytest.raises(io.ConfigError, match="seed"):
            io.RunConfig.from_dict({"case": "case1"})
        with pytest.raises(io.ConfigError):
            io.RunConfig.from_dict({"seed": "7"})

    @pytest.mark.parametrize("data", [{"seed": 1, "colour": 1}, {"seed": 1, "method": "vi"},
                                      {"seed": 1, "n": -1}, {"seed": 1, "n": "lots"},
                                      {"seed": 1, "workers": 0}, {"seed": 1, "sample": "/no/such/file"},
                                      {"seed": 1, "mle": {"folds": 3}}, {"seed": 1, "mcmc": {"burn": 3}},
                                      {"seed": 1, "basis": {"xi": "spline", "mu": "gp"}}])
    def test_invalid(self, data):
        with pytest.raises(io.ConfigError if "mcmc" not in data else ContractError):
            io.RunConfig.from_dict(data)

    def test_round_trip_and_digest(self):
        cfg = io.RunConfig.from_dict({"seed": 3, "basis": {"xi": "constant", "nu": {"kind": "fourier",
                                                                                   "fourier_order": 2}},
                                      "method": "MH", "n": "poisson"})
        assert cfg.basis_xi == BasisSpec.constant() and cfg.basis_nu.p == 5
        again = io.RunConfig.from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()
        moved = io.RunConfig.from_dict(dict(cfg.to_dict(), out="elsewhere", workers=4))
        assert moved.digest() == cfg.digest()
        assert io.RunConfig.from_dict(dict(cfg.to_dict(), seed=4)).digest() != cfg.digest()
        assert cfg.chain_config().sampler == "mh"

    def test_load_config_overrides(self, tmp_path):
        path = write_config(tmp_path / "c.yaml")
        cfg = io.load_config(path, {"seed": 9, "out": None})
        assert cfg.seed == 9 and cfg.basis_xi.p == 6
        (tmp_path / "bad.yaml").write_text("seed: [1,\n")
        with pytest.raises(io.ConfigError):
            io.load_config(tmp_path / "bad.yaml")
        (tmp_path / "list.yaml").write_text("- 1\n")
        with pytest.raises(io.ConfigError):
            io.load_config(tmp_path / "list.yaml")

    def test_default_sample_size_follows_case(self):
        cfg = io.RunConfig.from_dict({"seed": 1, "case": "case4"})
        case, sample = pipeline.simulate(cfg)
        assert len(sample) == 5000
        cfg = io.RunConfig.from_dict({"seed": 1, "case": "case1", "n": "poisson"})
        assert pipeline.sample_size(cfg, case) is None


class TestTables:
    def test_round_trip(self, tmp_path):
        io.write_table(tmp_path / "t.csv", ["a", "b"], [[1, 0.1], [2, 1e-17]], {"config": "abc", "x": 1.5})
        meta, cols, rows = io.read_table(tmp_path / "t.csv")
        assert meta == {"config": "abc", "x": "1.5"}
        assert cols == ["a", "b"] and float(rows[1][1]) == 1e-17
        assert [p.name for p in tmp_path.iterdir()] == ["t.csv"]

    def test_malformed(self, tmp_path):
        (tmp_path / "a.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ContractError, match="header"):
            io.read_table(tmp_path / "a.csv")
        (tmp_path / "b.csv").write_text("# x=1\na,b\n1\n")
        with pytest.raises(ContractError, match="ragged"):
            io.read_table(tmp_path / "b.csv")

    def test_sample_round_trip(self, tmp_path, rng):
        s = PeaksSample(rng.exponential(size=20), rng.uniform(0, 360, 20), period=2.0)
        io.write_sample(tmp_path / "s.csv", s, "case2", 5, "h")
        back = io.read_sample(tmp_path / "s.csv")
        np.testing.assert_array_equal(back.sizes, s.sizes)
        np.testing.assert_array_equal(back.angles, s.angles)
        assert back.period == 2.0 and back.meta["case"] == "case2" and back.meta["seed"] == "5"
        assert (tmp_path / "s.csv").read_text().startswith("# case=case2 seed=5 period=2.0")

    def test_draws_round_trip(self, tmp_path, rng):
        spec = BasisSpec.spline(p=4)
        draws = PosteriorDraws(rng.normal(size=(6, 4)), rng.normal(size=(6, 4)), rng.gamma(2, size=6),
                               rng.gamma(2, size=6), spec, spec, "bootstrap",
                               converged=np.array([1, 1, 0, 1, 1, 1], bool))
        io.write_draws(tmp_path / "d.csv", draws, "h")
        back = io.read_draws(tmp_path / "d.csv", spec, spec)
        np.testing.assert_array_equal(back.beta_xi, draws.beta_xi)
        np.testing.assert_array_equal(back.lambda_nu, draws.lambda_nu)
        np.testing.assert_array_equal(back.converged, draws.converged)
        with pytest.raises(ContractError):
            io.read_draws(tmp_path / "d.csv", BasisSpec.spline(p=5), spec)


class TestCLI:
    def test_simulate_deterministic(self, tmp_path):
        args = ["simulate", "--case", "case1", "--seed", "1", "--n", "1000"]
        assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
        assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
        a = (tmp_path / "a" / "sample.csv").read_bytes()
        assert a == (tmp_path / "b" / "sample.csv").read_bytes()
        _, cols, rows = io.read_table(tmp_path / "a" / "sample.csv")
        assert cols == ["angle_deg", "size"] and len(rows) == 1000
        _, cols, rows = io.read_table(tmp_path / "a" / "truth.csv")
        assert cols == ["theta", "rho", "xi", "sigma"] and len(rows) == 360

    def test_simulate_case4(self, tmp_path):
        assert cli.main(["simulate", "--case", "case4", "--seed", "2", "--out", str(tmp_path)]) == 0
        assert len(io.read_sample(tmp_path / "sample.csv")) == 5000

    def test_usage_errors(self, tmp_path, capsys):
        assert cli.main(["simulate", "--case", "case9", "--seed", "1", "--out", str(tmp_path)]) == 2
        assert cli.main(["simulate", "--case", "case1", "--out", str(tmp_path)]) == 2
        assert cli.main(["nonsense"]) == 2
        assert cli.main(["compare", "--truth", "x", "--model", "y"]) == 2
        assert "error" in capsys.readouterr().err

    def test_io_errors(self, tmp_path):
        assert cli.main(["return-values", "--run", str(tmp_path / "missing"), "--out", str(tmp_path)]) == 4
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert cli.main(["simulate", "--case", "case1", "--seed", "1", "--out", str(blocker / "sub")]) == 4

    def test_fit_mmala_artifacts(self, tmp_path):
        cfg = write_config(tmp_path / "c.yaml", case="case2")
        out = tmp_path / "run"
        assert cli.main(["fit", "--config", cfg, "--out", str(out)]) == 0
        _, cols, rows = io.read_table(out / "curves.csv")
        assert len(rows) == 360 and cols[0] == "theta"
        assert cols[1:] == ["xi_q025", "xi_q500", "xi_q975", "sigma_q025", "sigma_q500", "sigma_q975"]
        curves = np.array(rows, dtype=float)
        assert np.all(curves[:, 1] <= curves[:, 2]) and np.all(curves[:, 2] <= curves[:, 3])
        _, cols, rows = io.read_table(out / "traces.csv")
        assert cols == ["index", "log_lik", "step_nu", "step_xi"] and len(rows) == 40
        summary = io.read_yaml(out / "summary.yaml")
        assert set(summary["acceptance"]) == {"beta_xi", "beta_nu"}
        assert io.read_yaml(out / "timing.yaml")["elapsed_hours"] > 0
        assert io.RunConfig.from_dict(io.read_yaml(out / "config.yaml")).digest() == summary["config"]

    def test_fit_deterministic(self, tmp_path):
        cfg = write_config(tmp_path / "c.yaml")
        sums = []
        for _ in range(2):
            shutil.rmtree(tmp_path / "run", ignore_errors=True)
            assert cli.main(["fit", "--config", cfg, "--out", str(tmp_path / "run")]) == 0
            sums.append(checksums(tmp_path / "run"))
        assert sums[0] == sums[1]

    def test_fit_mle_constant(self, tmp_path):
        cfg = write_config(tmp_path / "c.yaml", method="mle", basis="constant")
        out = tmp_path / "run"
        assert cli.main(["fit", "--config", cfg, "--out", str(out)]) == 0
        _, cols, rows = io.read_table(out / "cv.csv")
        assert len(rows) == 1
        meta, _, rows = io.read_table(out / "draws.csv")
        assert meta["source"] == "bootstrap" and len(rows) == 5

    def test_fit_from_sample_file(self, tmp_path):
        assert cli.main(["simulate", "--case", "case1", "--seed", "3", "--n", "150",
                         "--out", str(tmp_path / "sim")]) == 0
        cfg = write_config(tmp_path / "c.yaml", sample=str(tmp_path / "sim" / "sample.csv"))
        assert cli.main(["fit", "--config", cfg, "--out", str(tmp_path / "run")]) == 0
        assert cli.main(["ess", "--run", str(tmp_path / "run")]) == 0
        summary = io.read_yaml(tmp_path / "run" / "ess_summary.yaml")
        assert 0 < summary["min_ess"] <= 40 and summary["ess_per_hour"] > 0

    def test_return_values_truth(self, tmp_path):
        out = tmp_path / "truth"
        assert cli.main(["return-values", "--truth", "--case", "case1", "--seed", "5", "--replicates", "1",
                         "--out", str(out)]) == 0
        for name in OCTANTS.all_names:
            _, values = io.read_distribution(out / f"rv_{name}.csv")
            assert values.size == 1
        _, cols, rows = io.read_table(out / "percentiles.csv")
        assert cols[2] == "q375" and len(rows) == 9

    def test_return_values_cross_file_invariant(self, tmp_path):
        cfg = write_config(tmp_path / "c.yaml")
        run = tmp_path / "run"
        assert cli.main(["fit", "--config", cfg, "--out", str(run)]) == 0
        assert cli.main(["return-values", "--run", str(run), "--out", str(tmp_path / "rv")]) == 0
        dists = {n: io.read_distribution(tmp_path / "rv" / f"rv_{n}.csv")[1] for n in OCTANTS.all_names}
        octants = np.column_stack([dists[n] for n in OCTANTS.names])
        np.testing.assert_array_equal(dists["omni"], octants.max(axis=1))
        assert dists["omni"].size == 50

    def test_compare(self, tmp_path):
        truth = tmp_path / "truth"
        assert cli.main(["return-values", "--truth", "--case", "case1", "--seed", "5", "--replicates", "40",
                         "--factor", "1", "--out", str(truth)]) == 0
        assert cli.main(["compare", "--truth", str(truth), "--model", str(truth), "--out",
                         str(tmp_path / "cmp")]) == 0
        meta, cols, rows = io.read_table(tmp_path / "cmp" / "stats.csv")
        assert "config" in meta and len(rows) == 9 * 4
        assert all(float(r[3]) == 0.0 for r in rows)
        _, cols, rows = io.read_table(tmp_path / "cmp" / "box.csv")
        assert len(rows) == 36
        # one realisation: every box quantile equals the point value
        assert all(len(set(r[3:])) == 1 for r in rows)

    def test_compare_sector_mismatch(self, tmp_path):
        truth = tmp_path / "truth"
        cli.main(["return-values", "--truth", "--case", "case1", "--seed", "5", "--replicates", "5",
                  "--factor", "1", "--out", str(truth)])
        dists = pipeline.load_return_values(truth)
        partial = {k: v for k, v in dists.items() if k != "W"}
        with pytest.raises(ContractError, match="sector mismatch"):
            pipeline.compare(dists, partial)

    def test_end_to_end_determinism(self, tmp_path):
        cfg = write_config(tmp_path / "c.yaml", case="case2", basis={"kind": "fourier", "fourier_order": 1})
        root = tmp_path / "pipeline"
        sums = []
        for _ in range(2):
            shutil.rmtree(root, ignore_errors=True)
            assert cli.main(["simulate", "--config", cfg, "--out", str(root / "sim")]) == 0
            assert cli.main(["fit", "--config", cfg, "--out", str(root / "fit")]) == 0
            assert cli.main(["return-values", "--run", str(root / "fit"), "--out", str(root / "rv")]) == 0
            assert cli.main(["return-values", "--truth", "--config", cfg, "--out", str(root / "truth")]) == 0
            assert cli.main(["compare", "--truth", str(root / "truth"), "--model", str(root / "rv"),
                             "--out", str(root / "cmp")]) == 0
            sums.append({sub: checksums(root / sub) for sub in ("sim", "fit", "rv", "truth", "cmp")})
        assert sums[0] == sums[1]
        for path in root.rglob("*.csv"):
            assert "config=" in path.read_text().splitlines()[0]

    def test_numeric_exit_code(self, tmp_path, monkeypatch):
        from nsextremes.errors import NumericError

        def boom(*a, **k):
            raise NumericError("singular")

        monkeypatch.setattr(pipeline, "fit", boom)
        cfg = write_config(tmp_path / "c.yaml")
        assert cli.main(["fit", "--config", cfg, "--out", str(tmp_path / "run")]) == 3
