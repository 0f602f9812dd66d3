"""Command-line interface: subcommands, exit codes, determinism."""

import json

import numpy as np
import pytest

from bglr.cli import main
from bglr.config import RunConfig, parse_config_file


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestRunConfig:
    def test_defaults_follow_protocol(self):
        cfg = RunConfig()
        assert cfg.iterations == 20000
        assert cfg.burn_in == 10000
        assert cfg.chains == 4
        assert cfg.coef_prior_variance == 1e4
        assert cfg.alpha_prior_shape == 1.0 and cfg.alpha_prior_rate == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            RunConfig(iterations=100, burn_in=100)
        with pytest.raises(ValueError):
            RunConfig(chains=0)
        with pytest.raises(ValueError):
            RunConfig(models=("bglr", "mystery"))

    def test_models_from_string(self):
        cfg = RunConfig(models="bglr, slr")
        assert cfg.models == ("bglr", "slr")

    def test_config_file_round_trip(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# sampler\niterations = 500\nburn_in = 100\nchains = 2\n"
            "adapt = false\nmodels = bglr,slr\nseed = 9\n")
        values = parse_config_file(path)
        cfg = RunConfig(**values)
        assert cfg.iterations == 500 and cfg.chains == 2
        assert cfg.adapt is False
        assert cfg.models == ("bglr", "slr")

    def test_config_file_errors(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("nonsense_key = 1\n")
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config_file(bad)
        bad.write_text("iterations 500\n")
        with pytest.raises(ValueError, match="key = value"):
            parse_config_file(bad)


class TestGldCommand:
    def test_pdf_trivial(self, capsys):
        code, out, _ = run(["gld", "pdf", "--x", "0", "--theta", "0",
                            "--sigma", "1", "--alpha", "1"], capsys)
        assert code == 0
        assert out.strip() == "0.25"

    def test_cdf_and_quantile(self, capsys):
        code, out, _ = run(["gld", "cdf", "--x", "0", "--alpha", "2"], capsys)
        assert code == 0 and out.strip() == "0.25"
        code, out, _ = run(["gld", "quantile", "--prob", "0.25", "--alpha", "2"],
                           capsys)
        assert code == 0 and float(out) == pytest.approx(0.0, abs=1e-12)

    def test_sample_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            code, _, _ = run(["gld", "sample", "--n", "500", "--seed", "7",
                              "--theta", "1", "--sigma", "2", "--alpha", "0.5",
                              "--out", str(path)], capsys)
            assert code == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().splitlines()[0] == "x"

    def test_fit_recovers_sample(self, tmp_path, capsys):
        sample_path = tmp_path / "s.csv"
        run(["gld", "sample", "--n", "20000", "--seed", "3", "--theta", "0",
             "--sigma", "2", "--alpha", "3", "--out", str(sample_path)], capsys)
        code, out, _ = run(["gld", "fit", "--data", str(sample_path)], capsys)
        assert code == 0
        fields = dict(kv.split("=") for kv in out.split())
        assert float(fields["sigma"]) == pytest.approx(2.0, abs=0.25)
        assert float(fields["alpha"]) == pytest.approx(3.0, abs=0.9)

    def test_fit_collapse_exit_code(self, tmp_path, capsys):
        rng = np.random.default_rng(12)  # sample verified to diverge
        path = tmp_path / "gumbel.csv"
        path.write_text("x\n" + "\n".join(repr(float(v))
                                          for v in rng.gumbel(0, 1, 4000)) + "\n")
        code, _, err = run(["gld", "fit", "--data", str(path)], capsys)
        assert code == 1
        assert "alpha_to_infinity" in err

    def test_missing_required_value(self, capsys):
        code, _, err = run(["gld", "pdf"], capsys)
        assert code == 1
        assert "--x" in err


class TestFitCommand:
    @pytest.fixture
    def dataset_csv(self, tmp_path, capsys):
        path = tmp_path / "d.csv"
        code, _, _ = run(["simulate", "--kind", "dataset", "--n", "120",
                          "--seed", "2", "--out", str(path)], capsys)
        assert code == 0
        return path

    def test_rhat_needs_two_chains(self, dataset_csv, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["fit", "--data", str(dataset_csv), "--chains", "1", "--rhat",
                  "--iterations", "200", "--burn-in", "50"])
        assert exc.value.code == 2

    def test_outputs_and_determinism(self, dataset_csv, tmp_path, capsys):
        args = ["fit", "--data", str(dataset_csv), "--iterations", "600",
                "--burn-in", "200", "--chains", "2", "--seed", "4"]
        code, out, _ = run(args + ["--out", str(tmp_path / "r1")], capsys)
        assert code == 0
        assert "bglr" in out and "bnr" in out
        code, _, _ = run(args + ["--out", str(tmp_path / "r2")], capsys)
        assert code == 0
        for name in ("bglr_summary.json", "bglr_chain0.csv", "bnr_summary.json",
                     "slr_summary.json", "bglr_summary.csv"):
            a = (tmp_path / "r1" / name).read_bytes()
            b = (tmp_path / "r2" / name).read_bytes()
            assert a == b, name

    def test_nonconvergence_is_not_an_error(self, dataset_csv, tmp_path, capsys):
        # absurdly short run: R-hat will fail, exit code must stay 0
        code, out, _ = run(["fit", "--data", str(dataset_csv), "--iterations",
                            "40", "--burn-in", "10", "--chains", "2", "--seed",
                            "5", "--out", str(tmp_path / "r")], capsys)
        assert code == 0
        payload = json.loads((tmp_path / "r" / "bglr_summary.json").read_text())
        assert payload["converged"] in (True, False)

    def test_missing_file_exit_one(self, capsys):
        code, _, err = run(["fit", "--data", "/nonexistent/x.csv"], capsys)
        assert code == 1
        assert "error" in err


class TestCompareCommand:
    def make_summary(self, tmp_path, name, model, dic, digest="deadbeef"):
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps({
            "model": model,
            "dataset_digest": digest,
            "dic": {"dic": dic, "p_dic": 3.0},
        }))
        return path

    def test_preference_verdict(self, tmp_path, capsys):
        a = self.make_summary(tmp_path, "a", "bnr", 100.0)
        b = self.make_summary(tmp_path, "b", "bglr", 90.0)
        code, out, _ = run(["compare", str(a), str(b)], capsys)
        assert code == 0
        assert "dic_difference=10.0" in out
        assert "preferred=bglr" in out

    def test_swapped_order_flips_sign_same_verdict(self, tmp_path, capsys):
        a = self.make_summary(tmp_path, "a", "bnr", 100.0)
        b = self.make_summary(tmp_path, "b", "bglr", 90.0)
        _, out1, _ = run(["compare", str(a), str(b)], capsys)
        _, out2, _ = run(["compare", str(b), str(a)], capsys)
        assert "dic_difference=-10.0" in out2
        assert "preferred=bglr" in out1 and "preferred=bglr" in out2

    def test_equal_dic_no_preference(self, tmp_path, capsys):
        a = self.make_summary(tmp_path, "a", "bnr", 50.0)
        b = self.make_summary(tmp_path, "b", "bglr", 50.0)
        code, out, _ = run(["compare", str(a), str(b)], capsys)
        assert code == 0
        assert "no preference" in out

    def test_digest_mismatch(self, tmp_path, capsys):
        a = self.make_summary(tmp_path, "a", "bnr", 50.0, digest="d1")
        b = self.make_summary(tmp_path, "b", "bglr", 40.0, digest="d2")
        code, _, err = run(["compare", str(a), str(b)], capsys)
        assert code == 1
        assert "digest" in err


class TestPipelineCommand:
    def test_small_corpus_end_to_end(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        code, _, _ = run(["simulate", "--kind", "corpus", "--regions", "30",
                          "--days", "3", "--zero-day", "2", "--seed", "8",
                          "--out", str(corpus)], capsys)
        assert code == 0
        out_dir = tmp_path / "run"
        code, out, _ = run(["pipeline", "--regions", str(corpus / "Regions.csv"),
                            "--cases", str(corpus / "Cases.csv"),
                            "--iterations", "300", "--burn-in", "100",
                            "--chains", "2", "--seed", "1", "--threads", "1",
                            "--out", str(out_dir)], capsys)
        assert code == 0
        lines = (out_dir / "timeseries.csv").read_text().splitlines()
        assert len(lines) == 4  # header + 3 days
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["unfittable_days"] == [2]
        assert manifest["n_regions"] == 30

    def test_rerun_byte_identical(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        run(["simulate", "--kind", "corpus", "--regions", "25", "--days", "2",
             "--seed", "3", "--out", str(corpus)], capsys)
        args = ["pipeline", "--regions", str(corpus / "Regions.csv"),
                "--cases", str(corpus / "Cases.csv"), "--iterations", "200",
                "--burn-in", "50", "--chains", "2", "--seed", "2",
                "--threads", "1"]
        run(args + ["--out", str(tmp_path / "o1")], capsys)
        run(args + ["--out", str(tmp_path / "o2")], capsys)
        for name in ("timeseries.csv", "manifest.json"):
            assert ((tmp_path / "o1" / name).read_bytes()
                    == (tmp_path / "o2" / name).read_bytes())

    def test_alpha_regime_switch_corpus(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        code, _, _ = run(["simulate", "--kind", "corpus", "--regions", "60",
                          "--days", "4", "--alpha", "3.0", "--alpha2", "0.3",
                          "--switch-day", "3", "--seed", "6",
                          "--out", str(corpus)], capsys)
        assert code == 0
        out_dir = tmp_path / "run"
        code, _, _ = run(["pipeline", "--regions", str(corpus / "Regions.csv"),
                          "--cases", str(corpus / "Cases.csv"),
                          "--iterations", "4000", "--burn-in", "2000",
                          "--chains", "2", "--seed", "4", "--threads", "0",
                          "--models", "bglr", "--out", str(out_dir)], capsys)
        assert code == 0
        import csv

        with open(out_dir / "timeseries.csv") as fh:
            rows = list(csv.DictReader(fh))
        alphas = [float(r["bglr_alpha_median"]) for r in rows
                  if r["bglr_alpha_median"]]
        assert len(alphas) == 4
        # the exported shape series crosses 1 at the switch
        assert alphas[0] > 1 and alphas[1] > 1
        assert alphas[2] < 1 and alphas[3] < 1


class TestSimulateCommand:
    def test_dataset_determinism(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            run(["simulate", "--kind", "dataset", "--n", "50", "--seed", "9",
                 "--out", str(path)], capsys)
        assert a.read_bytes() == b.read_bytes()

    def test_corpus_files_exist(self, tmp_path, capsys):
        out = tmp_path / "c"
        code, _, _ = run(["simulate", "--kind", "corpus", "--regions", "10",
                          "--days", "2", "--seed", "1", "--out", str(out)],
                         capsys)
        assert code == 0
        assert (out / "Regions.csv").exists()
        assert (out / "Cases.csv").exists()
        header = (out / "Cases.csv").read_text().splitlines()[0]
        assert header == "Region,Day1,Day2"
