import csv
import json

import pytest

from quantile_admission import cli
from quantile_admission import measure as msr
from quantile_admission.config import ExperimentConfig, parse_measure_arg
from quantile_admission.errors import ConfigError, StallError

MIXTURE_INI = """
[measure]
family = mixture
components = low, high

[measure.low]
weight = 0.25
family = atoms
locations = 0, 0.5
masses = 0.5, 0.5

[measure.high]
weight = 0.75
family = uniform
a = 0
b = 2

[process]
r = 1/3
n_admit = 2000
seed = 4

[ensemble]
n_replicas = 3

[output]
dir = out
trace_prefix = chain
thin = 100
"""


@pytest.fixture
def mixture_cfg(tmp_path):
    p = tmp_path / "mix.ini"
    p.write_text(MIXTURE_INI)
    return p


def test_inline_measures():
    assert isinstance(parse_measure_arg("uniform"), msr.Uniform)
    e = parse_measure_arg("exponential:rate=2.5")
    assert e.rate == 2.5
    g = parse_measure_arg("geometric_atomic:p=0.3")
    assert g.p == 0.3
    assert parse_measure_arg("normal:mean=1,stddev=2").stddev == 2.0


@pytest.mark.parametrize("text", ["cauchy", "uniform:a", "uniform:c=3", "exponential:rate=x"])
def test_inline_measure_errors(text):
    with pytest.raises(ConfigError):
        parse_measure_arg(text)


def test_mixture_config(mixture_cfg):
    cfg = ExperimentConfig.from_file(mixture_cfg)
    assert isinstance(cfg.measure, msr.Mixture)
    assert cfg.measure.atom_mass(0.5) == pytest.approx(0.125)
    assert cfg.measure.tail(1.0, "closed") == pytest.approx(0.375)
    assert cfg.r == pytest.approx(1 / 3)
    assert cfg.n_replicas == 3 and cfg.thin == 100 and cfg.seed == 4
    assert cfg.out_dir.endswith("out")


def test_tabulated_config(tmp_path):
    (tmp_path / "t.csv").write_text("0,1\n1,0.4\n2,0.1\n4,0\n")
    (tmp_path / "m.ini").write_text("[measure]\nfamily = tabulated\ncsv = t.csv\n")
    mu = parse_measure_arg(str(tmp_path / "m.ini"))
    assert isinstance(mu, msr.TabulatedContinuous)
    assert mu.tail(1.0, "closed") == pytest.approx(0.4)


@pytest.mark.parametrize(
    "patch",
    [("r = 1/3", "r = 1.5"), ("n_admit = 2000", "n_admit = 0"), ("r = 1/3", "rr = 1/3"),
     ("weight = 0.25", "weight = 0.3"), ("seed = 4", "seed = -1")],
)
def test_config_validation(tmp_path, patch):
    p = tmp_path / "bad.ini"
    p.write_text(MIXTURE_INI.replace(*patch))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(p)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "nope.ini")


# -- CLI -----------------------------------------------------------------------------------


def test_cli_simulate(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code = cli.main(["simulate", "--measure", "uniform", "--r", "1/4", "--n", "2000",
                     "--engine", "voting", "--seed", "3", "--trace", str(out), "--thin", "10"])
    assert code == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["k", "x_k", "m_k", "y_k", "y_plus_k", "t_k"] and len(rows) == 201
    info = json.loads(capsys.readouterr().out)
    assert info["n"] == 2000 and info["rounds"] >= 2000


def test_cli_drift_table_and_roots(tmp_path, capsys):
    out = tmp_path / "d.csv"
    assert cli.main(["drift", "--measure", "exponential", "--r", "0.5", "--grid", "65",
                     "--out", str(out)]) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["m", "rho", "rho_plus"] and len(rows) == 66
    assert cli.main(["drift", "roots", "--measure", "exponential", "--r", "0.5"]) == 0
    assert "crossing" in capsys.readouterr().out


def test_cli_classify(capsys):
    assert cli.main(["classify", "--measure", "uniform", "--r", "0.75"]) == 0
    text = capsys.readouterr().out
    assert "case III" in text and "verdict: deterministic" in text


def test_cli_limit(tmp_path):
    out = tmp_path / "l.csv"
    assert cli.main(["limit", "--measure", "uniform", "--r", "0.25", "--out", str(out),
                     "--points", "33"]) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["x", "density", "tail"] and len(rows) == 34


def test_cli_ensemble(mixture_cfg, tmp_path):
    assert cli.main(["ensemble", "--config", str(mixture_cfg), "--workers", "1"]) == 0
    files = sorted(p.name for p in (tmp_path / "out").iterdir())
    assert files == ["chain_0000.csv", "chain_0001.csv", "chain_0002.csv", "summary.json"]
    doc = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert len(doc["replicas"]) == 3


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["classify", "--measure", "nonsense", "--r", "0.5"]) == cli.EXIT_CONFIG
    assert cli.main(["simulate", "--measure", "uniform", "--r", "0.5", "--n", "0"]) == cli.EXIT_CONFIG
    assert cli.main(["simulate", "--measure", "uniform", "--r", "0.9", "--n", "100000",
                     "--engine", "conditional"]) == cli.EXIT_OK
    assert cli.main(["limit", "--measure", "uniform:a=0,b=1", "--r", "0.5", "--out",
                     str(tmp_path / "x.csv"), "--index", "99"]) == cli.EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--measure", "uniform", "--r", "2", "--n", "5"])
    assert exc.value.code == 2


def test_cli_numeric_error_exit(monkeypatch, capsys):
    def stalled(*args, **kwargs):
        raise StallError("stalled", bound=10)

    monkeypatch.setattr(cli, "run_chain", stalled)
    code = cli.main(["simulate", "--measure", "uniform", "--r", "0.9", "--n", "10"])
    assert code == cli.EXIT_NUMERIC
    assert "numeric error" in capsys.readouterr().err


def test_cli_verify_single_criterion(capsys):
    assert cli.main(["verify", "--only", "7"]) == cli.EXIT_OK
    assert "criterion  7: PASS" in capsys.readouterr().out


def test_cli_verify_failure_exit(monkeypatch, capsys):
    from quantile_admission import acceptance

    monkeypatch.setitem(acceptance.CRITERIA, 7, lambda: (False, "forced"))
    assert cli.main(["verify", "--only", "7"]) == cli.EXIT_ACCEPTANCE
