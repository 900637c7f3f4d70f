"""
End-to-end tests of the command-line front end.
"""
import json
import logging

import pytest

from csv_export import read_csv
from main import EXIT_CONFIG, EXIT_DEGRADED, EXIT_FAILURE, EXIT_OK, main
from utils import replication_seed


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestCommands:

    def test_plan(self, fast_config_file, capsys):
        assert main(["plan", "--config", str(fast_config_file)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "steps_standard" in out
        assert "m=2 L=2 n=4" in out

    def test_estimate_once(self, fast_config_file, capsys):
        assert main(["estimate", "--config", str(fast_config_file), "--once"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["method"] == "ais"
        assert len(report["per_level"]) == 3

    def test_estimate_once_with_threads(self, fast_config_file, capsys):
        assert main(["estimate", "--config", str(fast_config_file), "--once"]) == EXIT_OK
        single = json.loads(capsys.readouterr().out)
        assert main(["estimate", "--config", str(fast_config_file), "--once", "--threads", "2"]) == EXIT_OK
        threaded = json.loads(capsys.readouterr().out)
        assert threaded["estimate"] == single["estimate"]
        assert threaded["per_level"] == single["per_level"]

    def test_estimate_replications(self, fast_config_file, capsys):
        assert main(["estimate", "--config", str(fast_config_file), "--threads", "2"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "rmse" in out
        assert out.count("rep ") == 2

    def test_sweep_writes_rows_and_summaries(self, fast_config_file, tmp_path):
        out = tmp_path / "results" / "sweep.csv"
        assert main(["sweep", "--config", str(fast_config_file), "--out", str(out), "--seed", "5"]) == EXIT_OK
        rows = read_csv(out)
        assert [row.method for row in rows] == ["ais"] * 4 + ["ais-summary"] * 2
        assert rows[0].seed == replication_seed(5, 1, 1)
        assert rows[-1].seed == 5

    def test_sweep_is_reproducible(self, fast_config_file, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["sweep", "--config", str(fast_config_file), "--out", str(first)])
        main(["sweep", "--config", str(fast_config_file), "--out", str(second)])
        a = [row.model_dump(exclude={"wall_seconds"}) for row in read_csv(first)]
        b = [row.model_dump(exclude={"wall_seconds"}) for row in read_csv(second)]
        assert a == b

    def test_calibrate(self, fast_config_file, tmp_path, capsys):
        out = tmp_path / "traj.csv"
        assert main(["calibrate", "--config", str(fast_config_file), "--out", str(out),
                     "--level", "1", "--no-oracle"]) == EXIT_OK
        assert out.read_text().splitlines()[0] == "iter,theta,theta_avg"
        assert len(out.read_text().splitlines()) == 1 + 6
        assert "theta_final" in capsys.readouterr().out

    def test_oracle(self, fast_config_file, tmp_path):
        out = tmp_path / "oracle.csv"
        assert main(["oracle", "--config", str(fast_config_file), "--out", str(out)]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "level,theta,value,std_error"
        assert len(lines) == 1 + 4 * 41


    def test_oracle_weak_error_csv(self, fast_config_text, tmp_path, capsys):
        # near-zero volatility leaves the deterministic Euler bias of order 1/n
        config = write(tmp_path, "calm.cfg", fast_config_text.replace("sigma = 0.6", "sigma = 1e-8"))
        out = tmp_path / "oracle.csv"
        assert main(["oracle", "--config", config, "--out", str(out), "--weak-error", "100"]) == EXIT_OK
        lines = (tmp_path / "oracle_weak_error.csv").read_text().splitlines()
        assert lines[0] == "n,bias,std_error,slope,slope_stderr,alpha,c_psi"
        assert [line.split(",")[0] for line in lines[1:]] == ["4", "8", "16", "32"]
        assert "weak error" in capsys.readouterr().out


class TestExitCodes:

    def test_config_error(self, tmp_path):
        path = write(tmp_path, "bad.cfg", "s0 = 130\nK = 100\nr = 0\nsigma = 0.2\nT = 1\nm = 4\nL = 2\nrho = 0.4\n")
        assert main(["plan", "--config", path]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert main(["plan", "--config", str(tmp_path / "absent.cfg")]) == EXIT_CONFIG

    def test_negative_seed(self, fast_config_file):
        assert main(["plan", "--config", str(fast_config_file), "--seed", "-1"]) == EXIT_CONFIG

    def test_degraded_estimate(self, tmp_path):
        path = write(tmp_path, "blowup.cfg",
                     "s0 = 1\nK = 1\nr = 1000000\nsigma = 0.1\nT = 1\nm = 4\nL = 4\nalpha = 0.5\n"
                     "method = standard\n")
        assert main(["estimate", "--config", path, "--once"]) == EXIT_DEGRADED

    def test_overflowing_oracle_box(self, fast_config_text, tmp_path, caplog):
        caplog.set_level(logging.ERROR)
        config = write(tmp_path, "wide.cfg", fast_config_text + "box_half_width = 40\n")
        out = tmp_path / "oracle.csv"
        assert main(["oracle", "--config", config, "--out", str(out)]) == EXIT_FAILURE
        messages = [record.getMessage() for record in caplog.records]
        assert any("InvalidArgumentError" in message for message in messages)
        assert not any("Unhandled" in message for message in messages)

    def test_config_flag_required(self):
        with pytest.raises(SystemExit):
            main(["plan"])
