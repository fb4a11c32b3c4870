import json
import os

from klab.cli import main, parse_config


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_sk_command_matches_enumeration(capsys):
    code, out = run(capsys, "sk", "--k", "2", "--q", "7")
    assert code == 0
    data = json.loads(out)
    assert data["entries"] == [[2, 1], [4, 4]]  # {4:4, 16 mod 7 = 2:1}
    assert data["stabilizer"] == [1]
    assert data["version"]
    assert data["config"]["k"] == 2


def test_exponent_lp_search(capsys):
    code, out = run(capsys, "exponent-lp", "--search", "--grid", "1e-3")
    assert code == 0
    data = json.loads(out)
    assert abs(data["delta_star"] - 1 / 26) < 1e-3
    assert abs(data["eta_star"] - 1 / 102) < 1e-3


def test_exponent_lp_verdicts(capsys):
    code, out = run(capsys, "exponent-lp", "--delta", "0.03")
    assert code == 0 and json.loads(out)["passed"] is True
    code, out = run(capsys, "exponent-lp", "--delta", "0.05")
    assert code == 0
    data = json.loads(out)
    assert data["passed"] is False and data["witnesses"]


def test_unknown_flag_exits_one(capsys):
    assert main(["sk", "--nope"]) == 1
    assert main(["not-a-command"]) == 1


def test_kl_check_small(capsys):
    code, out = run(capsys, "kl-check", "--k", "2", "--q", "11")
    assert code == 0
    data = json.loads(out)
    assert data["cross_check_max"] < 1e-10
    assert data["deligne_margin"] <= 1e-9


def test_shift_check_constraint_violation(capsys):
    code, out = run(capsys, "shift-check", "--k", "2", "--q", "101", "--M", "5",
                    "--N", "20", "--A", "2", "--B", "51", "--seed", "1")
    assert code == 2
    assert "failed" in json.loads(out)


def test_shift_check_ok(capsys):
    code, out = run(capsys, "shift-check", "--k", "2", "--q", "101", "--M", "5",
                    "--N", "20", "--A", "2", "--B", "3", "--offset", "40",
                    "--samples", "5", "--seed", "1")
    assert code == 0
    assert json.loads(out)["max_deviation"] < 1e-9


def test_deterministic_output_bytes(tmp_path, capsys):
    p1, p2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    assert main(["sumprod-scan", "--k", "2", "--q", "37", "--samples", "32",
                 "--seed", "9", "--ratios", "--out", p1]) == 0
    assert main(["sumprod-scan", "--k", "2", "--q", "37", "--samples", "32",
                 "--seed", "9", "--ratios", "--out", p2]) == 0
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_csv_emission(tmp_path):
    p = str(tmp_path / "rows.csv")
    code = main(["progression", "--x", "500", "--q", "11", "--format", "csv",
                 "--out", p])
    assert code == 0
    lines = open(p).read().splitlines()
    assert lines[0] == "x,q,a,raw,main,E,normalized"
    assert len(lines) == 11  # header + 10 invertible classes


def test_bilinear_sweep_hypothesis_exit(tmp_path, capsys):
    # MN = 2 <= q^{1/4}: the general bound's lower range fails
    code, out = run(capsys, "bilinear-sweep", "--k", "2", "--q", "101",
                    "--M", "2", "--N", "1", "--seed", "1")
    assert code == 2
    data = json.loads(out)
    assert data["hypothesis_flags"]


def test_opnorm_command(capsys):
    code, out = run(capsys, "opnorm", "--k", "2", "--q", "101", "--M", "6",
                    "--N", "6")
    assert code == 0
    data = json.loads(out)
    assert abs(data["sigma_max"] - data["dense_svd"]) < 1e-7


def test_moments_command(capsys):
    code, out = run(capsys, "moments", "--k", "3", "--q", "23", "--samples",
                    "6", "--seed", "4")
    assert code == 0
    data = json.loads(out)
    assert data["second_moment_dev_max"] < 30
    assert "noncorrelation_ratio_max" in data


def test_kl_table_cache_roundtrip(tmp_path, capsys, monkeypatch):
    cache = str(tmp_path / "cache")
    code, _ = run(capsys, "kl-table", "--k", "2", "--q", "13", "--cache", cache)
    assert code == 0
    assert os.listdir(cache) == ["kl_k2_q13_d1_intro.kltb"]
    # the cache is picked up through the environment
    monkeypatch.setenv("KLAB_CACHE_DIR", cache)
    code, out = run(capsys, "moments", "--k", "2", "--q", "13", "--samples",
                    "4", "--seed", "1")
    assert code == 0


def test_sumprod_scan_flag_route(tmp_path, capsys):
    p = str(tmp_path / "scan.csv")
    code = main(["sumprod-scan", "--k", "2", "--q", "19", "--samples", "50",
                 "--seed", "3", "--format", "csv", "--out", p])
    assert code == 0
    lines = open(p).read().splitlines()
    assert lines[0].startswith("q,k,c,b1,b2,b3,b4,lambda_set,statistic")
    assert len(lines) == 1 + 2 * 19**4  # exhaustive below the full-scan cap


def test_sk_scan_smallest(capsys):
    code, out = run(capsys, "sk", "--k", "3", "--scan-smallest", "--q-limit", "40")
    assert code == 0
    data = json.loads(out)
    assert data["smallest_conforming_q"]["2"] == 5
    assert data["smallest_conforming_q"]["3"] == 5


def test_report_command(capsys):
    code, out = run(capsys, "report", "--q", "23", "--k", "2", "--seed", "11")
    assert code == 0
    data = json.loads(out)
    assert data["kloosterman"]["deligne_margin"] <= 1e-9
    assert abs(data["exponent_lp"]["delta_star"] - 1 / 26) < 1e-3
    assert data["sk"]["stabilizer"] == [1]


def test_config_file_defaults(tmp_path, capsys):
    cfg = tmp_path / "klab.cfg"
    cfg.write_text("[sk]\nk = 2\nq = 7\n")
    code, out = run(capsys, "--config", str(cfg), "sk", "--k", "2")
    assert code == 0
    assert json.loads(out)["q"] == 7
    parsed = parse_config(str(cfg))
    assert parsed == {"sk": {"k": "2", "q": "7"}}


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[sk]\nbogus = 1\n")
    assert main(["--config", str(cfg), "sk", "--k", "2", "--q", "7"]) == 1
