"""Command-line surface: exit codes, output files, determinism."""

import json

import numpy as np
import pytest

from fishmarket.cli import main

ONE_BUYER = {"goods": 1, "buyers": [{"family": "linear", "valuations": [1.0], "budget": 1.0}]}
TWO_GOOD_LINEAR = {
    "goods": 2,
    "buyers": [{"family": "linear", "valuations": [1.0, 1.0], "budget": 1.0}],
}
CD_PAIR = {
    "goods": 2,
    "buyers": [
        {"family": "cobb_douglas", "valuations": [0.5, 0.5], "budget": 1.0},
        {"family": "cobb_douglas", "valuations": [0.5, 0.5], "budget": 1.0},
    ],
}


@pytest.fixture
def market_file(tmp_path):
    def write(doc, name="market.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    return write


def test_solve_one_buyer(market_file, tmp_path, capsys):
    code = main(["solve", "--market", market_file(ONE_BUYER), "--out", str(tmp_path / "o")])
    out = capsys.readouterr().out
    assert code == 0
    assert "p* = [1.000000]" in out
    assert (tmp_path / "o" / "prices.csv").exists()


def test_solve_cobb_douglas(market_file, capsys):
    assert main(["solve", "--market", market_file(CD_PAIR)]) == 0
    assert "p* = [1.000000, 1.000000]" in capsys.readouterr().out


def test_simulate_cycling_linear_market(market_file, tmp_path, capsys):
    gamma = 2.0
    code = main(
        [
            "simulate",
            "--market", market_file(TWO_GOOD_LINEAR),
            "--kernel", "entropic",
            "--gamma", str(gamma),
            "--p0", f"1,{np.exp(1.0 / gamma)}",
            "--out", str(tmp_path / "sim"),
            "--max-iters", "1000",
        ]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "status cycle_detected" in out
    assert (tmp_path / "sim" / "trajectory.csv").exists()


def test_simulate_converges(market_file, tmp_path, capsys):
    code = main(
        [
            "simulate",
            "--market", market_file(CD_PAIR),
            "--policy", "informed",
            "--p0", "2,0.5",
            "--out", str(tmp_path / "sim"),
        ]
    )
    assert code == 0
    assert "status converged" in capsys.readouterr().out


def test_verify_identities_exit_zero(capsys):
    assert main(["verify", "--suite", "identities", "--seed", "7"]) == 0
    assert "PASS identities" in capsys.readouterr().out


def test_verify_subgradient_exit_zero(capsys):
    assert main(["verify", "--suite", "subgradient", "--seed", "7"]) == 0
    assert "PASS subgradient" in capsys.readouterr().out


def test_unreadable_market_is_usage_error(tmp_path, capsys):
    assert main(["solve", "--market", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", "--market", str(bad)]) == 2


def test_batch_writes_summary(tmp_path, capsys):
    code = main(
        [
            "batch",
            "--buyers", "3",
            "--goods", "2",
            "--replications", "4",
            "--seed", "3",
            "--max-iters", "2000",
            "--jobs", "1",
            "--out", str(tmp_path / "out"),
        ]
    )
    assert code == 0
    assert (tmp_path / "out" / "summary.csv").exists()


def test_identical_invocations_identical_payload(market_file, tmp_path):
    market = market_file(CD_PAIR)
    for sub in ("a", "b"):
        main(
            [
                "simulate",
                "--market", market,
                "--gamma", "3",
                "--p0", "2,0.5",
                "--out", str(tmp_path / sub),
            ]
        )
    rows_a = (tmp_path / "a" / "trajectory.csv").read_text().splitlines()
    rows_b = (tmp_path / "b" / "trajectory.csv").read_text().splitlines()
    assert rows_a[0].startswith("# ")  # metadata line, exempt from comparison
    assert rows_a[1:] == rows_b[1:]


def test_heatmap_command(tmp_path):
    code = main(
        [
            "heatmap",
            "--buyers", "3",
            "--goods", "2",
            "--replications", "2",
            "--seed", "5",
            "--max-iters", "1500",
            "--jobs", "1",
            "--e-values", "0.3,0.7",
            "--gamma-values", "2,5",
            "--out", str(tmp_path / "hm"),
        ]
    )
    assert code == 0
    lines = (tmp_path / "hm" / "heatmap.csv").read_text().splitlines()
    assert lines[1] == "E,2,5"
    assert len(lines) == 4
