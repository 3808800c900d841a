import csv
import json

import numpy as np
import pytest

from movingfront.cli import main
from movingfront.config import EXAMPLE1_CONFIG, EXAMPLE2_CONFIG


@pytest.fixture
def configs(tmp_path):
    a = tmp_path / "ex1.cfg"
    b = tmp_path / "ex2.cfg"
    a.write_text(EXAMPLE1_CONFIG)
    b.write_text(EXAMPLE2_CONFIG)
    return a, b


def test_validate(configs, capsys):
    assert main(["validate", "--config", str(configs[0])]) == 0
    assert "assumption 1: PASS" in capsys.readouterr().out


def test_validate_failure(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("f = poly_x 1.5 0 1\nu0 = const -1\nu1 = const 4.3\nperiod = 2\nmu = 0.02\n")
    assert main(["validate", "--config", str(cfg)]) == 1


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("f = const 1\n")
    assert main(["validate", "--config", str(cfg)]) == 2


def test_asymptotic_csv(configs, tmp_path):
    out = tmp_path / "u0.csv"
    assert main(["asymptotic", "--config", str(configs[1]), "--grid-nx", "11", "--grid-nt", "5",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["x", "t", "u0", "branch", "x0_of_t", "xhat_l", "xhat_r"]
    assert len(rows) == 55
    assert float(rows[0]["x0_of_t"]) == pytest.approx(13 / 60)
    assert {r["branch"] for r in rows} == {"left", "right"}


def test_forward_csv_and_sidecar(configs, tmp_path):
    out = tmp_path / "fw.csv"
    assert main(["forward", "--config", str(configs[0]), "--grid-nx", "401", "--grid-nt", "101",
                 "--out", str(out)]) == 0
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["converged"] and meta["nx"] == 401
    assert sum(1 for _ in out.open()) == 401 * 101 + 1


def test_ip1_from_csv(configs, tmp_path, sol1):
    from movingfront.inverse import ip1_measurements

    meas = ip1_measurements(sol1, 1.0, 200, 0.001, seed=1)
    data = tmp_path / "omega.csv"
    with data.open("w") as fh:
        fh.write("x,omega\n")
        for x, w in zip(meas.nodes, meas.observations):
            fh.write(f"{float(x)!r},{float(w)!r}\n")
    out = tmp_path / "f.csv"
    assert main(["ip1", "--config", str(configs[0]), "--data", str(data), "--delta", "0.001",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    x = np.array([float(r["x"]) for r in rows])
    f = np.array([float(r["f_rec"]) for r in rows])
    assert np.sqrt(np.mean((f - x ** 2 - 1.5) ** 2)) < 0.1
    assert (tmp_path / "f_prefit.csv").exists()


def test_ip2_from_csv(configs, tmp_path, spec2, asym2):
    t = np.linspace(0, 4 * np.pi, 41)
    data = tmp_path / "triples.csv"
    with data.open("w") as fh:
        fh.write("t,u0,u1,xtp\n")
        for row in zip(t, spec2.u0(t), spec2.u1(t), asym2.x0(t)):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    out = tmp_path / "f.csv"
    assert main(["ip2", "--config", str(configs[1]), "--data", str(data), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    f = np.array([float(r["f_rec"]) for r in rows])
    np.testing.assert_allclose(f, np.cos(t) + 2, atol=1e-8)


def test_ip_requires_data(configs):
    with pytest.raises(SystemExit):
        main(["ip2", "--config", str(configs[1])])


def test_ip2_synthesize(configs, tmp_path):
    out = tmp_path / "f.csv"
    assert main(["ip2", "--config", str(configs[1]), "--synthesize", "--delta", "0.001",
                 "--seed", "3", "--out", str(out)]) == 0


def test_example_exit_codes(tmp_path):
    assert main(["example2", "--mode", "ip2", "--delta", "0.001", "--repetitions", "3",
                 "--out", str(tmp_path / "e2")]) == 0
    report = json.loads((tmp_path / "e2" / "example2-ip2-delta0.001.json").read_text())
    assert report["passed"] and "runtime" not in report
