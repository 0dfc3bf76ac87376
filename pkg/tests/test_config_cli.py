import csv
import io

import pytest

from randgap.campaigns import HEADER
from randgap.cli import main
from randgap.config import ConfigError, Suite, build_config, parse_config_text


def run(argv, stdin="", environ=None):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, stdin=io.StringIO(stdin), stdout=out, stderr=err, environ=environ or {})
    return code, out.getvalue(), err.getvalue()


class TestConfig:
    def test_parse(self):
        v = parse_config_text("# comment\ndim = 3\npgh-prefactor=0.25  # inline\ndeltas = 0, 1e-3\n")
        assert v == {"dim": 3, "pgh_prefactor": 0.25, "deltas": (0.0, 1e-3)}

    @pytest.mark.parametrize("text", ["dim 3", "colour = red", "dim = three"])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config_text(text)

    def test_precedence(self):
        env = {"RANDGAP_SEED": "5"}
        assert build_config("gaps", {"dim": 2, "out": "x"}, {}, env).seed == 5
        assert build_config("gaps", {"dim": 2, "out": "x", "seed": 6}, {}, env).seed == 6
        assert build_config("gaps", {"dim": 2, "out": "x", "seed": 6}, {"seed": 7}, env).seed == 7
        assert build_config("gaps", {"dim": 2, "out": "x"}, {"dim": 3}, {}).dim == 3

    def test_defaults(self):
        cfg = build_config("gaps", {}, {"dim": 2, "out": "x"}, {})
        assert (cfg.seed, cfg.instances, cfg.experiments) == (0, 50, 200)
        assert (cfg.accept_threshold, cfg.pgh_prefactor) == (10_000, 0.5)
        assert cfg.suite is Suite.GAPS

    @pytest.mark.parametrize("suite,values,missing", [
        ("gaps", {"out": "x"}, "dim"),
        ("gaps", {"dim": 2}, "out"),
        ("controlmap", {"out": "x"}, "mode"),
        ("amplitude", {}, "out"),
    ])
    def test_missing_fields(self, suite, values, missing):
        with pytest.raises(ConfigError, match=f"missing required field: {missing}"):
            build_config(suite, values, {}, {})

    def test_suite_mismatch(self):
        with pytest.raises(ConfigError):
            build_config("gaps", {"suite": "amplitude", "dim": 2, "out": "x"}, {}, {})

    def test_bad_env_seed(self):
        with pytest.raises(ConfigError):
            build_config("gaps", {"dim": 2, "out": "x"}, {}, {"RANDGAP_SEED": "abc"})


class TestCli:
    def test_gaps_smoke(self, tmp_path):
        out = tmp_path / "r.csv"
        code, _, err = run(["gaps", "--dim", "2", "--instances", "5", "--experiments", "50",
                            "--seed", "7", "--out", str(out), "--accept-threshold", "1000"])
        assert code == 0, err
        rows = list(csv.reader(out.open()))
        assert tuple(rows[0]) == HEADER
        assert {r[1] for r in rows[1:]} == {"0", "1", "2", "3", "4", "median"}

    def test_missing_field_exit_1(self, tmp_path):
        code, _, err = run(["gaps", "--out", str(tmp_path / "r.csv")])
        assert code == 1
        assert "dim" in err

    def test_unknown_flag_exit_1(self):
        code, _, err = run(["gaps", "--dimension", "2"])
        assert code == 1
        assert "--dimension" in err

    def test_no_command(self):
        assert run([])[0] == 1

    def test_turnpike_stdin(self):
        code, out, _ = run(["turnpike"], stdin="1\n2\n3\n")
        assert code == 0
        spectra = sorted(tuple(float(x) for x in line.split()) for line in out.splitlines())
        assert spectra == [(0.0, 1.0, 3.0), (0.0, 2.0, 3.0)]

    def test_turnpike_file_and_bad_input(self, tmp_path):
        f = tmp_path / "g.txt"
        f.write_text("2\n5\n7\n")
        code, out, _ = run(["turnpike", str(f)])
        assert code == 0 and len(out.splitlines()) == 2
        assert run(["turnpike"], stdin="1\nx\n")[0] == 1

    def test_config_file_and_env(self, tmp_path):
        conf = tmp_path / "c.conf"
        out = tmp_path / "r.csv"
        conf.write_text(f"dim = 2\ninstances = 2\nexperiments = 10\naccept_threshold = 500\nout = {out}\n")
        a = run(["gaps", "--config", str(conf)], environ={"RANDGAP_SEED": "3"})
        first = out.read_text()
        b = run(["gaps", "--config", str(conf), "--seed", "3"])
        assert a[0] == b[0] == 0
        assert out.read_text() == first

    def test_unwritable_output_exit_2(self, tmp_path):
        code, _, err = run(["designcheck", "--samples", "10", "--out", str(tmp_path / "no" / "r.csv")])
        assert code == 2
        assert "cannot write" in err

    def test_missing_config_file(self, tmp_path):
        assert run(["gaps", "--config", str(tmp_path / "nope.conf")])[0] == 1
