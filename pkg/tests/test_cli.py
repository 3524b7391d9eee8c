import csv
import hashlib
import json

import pytest
from hypothesis import given, settings, strategies as st

from factmod.cli import main
from factmod.config import SCHEMAS, ConfigError, build, load, parse
from factmod.modular import PrimeModulus
from factmod.representations import coverage_report, load_certificates, verify_certificate


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_wilson_check_run(tmp_path):
    code, out = run(tmp_path, "wilson-check", "--p_min", "3", "--p_max", "300")
    assert code == 0
    table = rows(out / "wilson.csv")
    assert table[0] == ["p", "even_lambda", "failures"]
    assert all(r[2] == "0" for r in table[1:])
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest) >= {"config", "version", "seed", "outputs", "runtime_ms", "started", "finished"}
    digest = hashlib.sha256((out / "wilson.csv").read_bytes()).hexdigest()
    assert manifest["outputs"] == [{"path": "wilson.csv", "sha256": digest}]


def test_growth_rows_are_exact(tmp_path):
    code, out = run(tmp_path, "growth", "--p", "10007", "--N", "50:200:50")
    assert code == 0
    table = rows(out / "growth.csv")
    head = table[0]
    from factmod.residues import build_factorial_set, product_set, quotient_set
    m = PrimeModulus(10007)
    for r in table[1:]:
        rec = dict(zip(head, r))
        A = build_factorial_set(m, int(rec["N"]))
        assert int(rec["card_A"]) == len(A)
        assert int(rec["card_AA"]) == len(product_set(A, A))
        assert int(rec["card_AoverA"]) == len(quotient_set(A, A))


def test_all_lambda_solve_matches_coverage_report(tmp_path):
    code, out = run(tmp_path, "solve", "--p", "211", "--shape", "k_term_product", "--k", "2", "--M", "40",
                    "--all", "true")
    assert code == 0
    cov = dict(zip(*rows(out / "coverage.csv")))
    rep = coverage_report(PrimeModulus(211), "k_term_product", 2, 40)
    assert int(cov["covered"]) == rep.covered
    assert float(cov["fraction"]) == rep.fraction
    certs = load_certificates(out / "certificates.json")
    assert len(certs) == rep.covered and all(verify_certificate(c) for c in certs)
    found = [r for r in rows(out / "solve.csv")[1:] if r[5] == "1"]
    assert len(found) == rep.covered


def test_exit_codes(tmp_path):
    assert main(["card", "--p", "10007", "--out", str(tmp_path / "a")]) == 2
    assert main(["card", "--p", "10008", "--N", "5", "--out", str(tmp_path / "b")]) == 2
    assert main(["card", "--p", "10007", "--N", "5", "--bogus", "1", "--out", str(tmp_path / "c")]) == 2
    assert main(["katz-shen", "--p", "101", "--out", str(tmp_path / "d")]) == 2
    code, out = run(tmp_path, "card", "--p", "10007", "--N", "300", "--budget", "100", name="e")
    assert code == 3
    assert not any(out.iterdir())


def test_verification_failure_exit(tmp_path, monkeypatch):
    import factmod.experiments as ex
    from factmod.representations import Verification
    monkeypatch.setattr(ex.rp, "verify_certificate", lambda cert: Verification(False, -1, False))
    code, out = run(tmp_path, "solve", "--p", "101", "--shape", "two_product", "--lambda", "5")
    assert code == 4
    assert not (out / "manifest.json").exists()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("command = card\n# sweep\np = 1009\nN = 10,20\n")
    code, out = run(tmp_path, "card", "--config", str(cfg), "--N", "30")
    assert code == 0
    assert [r[1] for r in rows(out / "card.csv")[1:]] == ["30"]
    with pytest.raises(ConfigError):
        load(cfg, command="growth")


@pytest.mark.parametrize("args", [
    ["ruzsa-check", "--p_min", "100", "--p_max", "2000", "--trials", "15", "--seed", "4"],
    ["katz-shen", "--p", "101", "--seed", "9", "--trials", "3"],
    ["growth", "--p", "10007", "--N", "100,300", "--strategy", "sampled", "--seed", "1", "--samples", "3000"],
    ["expsum", "--p", "10007", "--N", "100", "--kind", "max", "--strategy", "sampled", "--k", "50", "--seed", "2"],
    ["moments", "--p", "101,499", "--N", "10,25"],
])
def test_determinism(tmp_path, args):
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["outputs"] == mb["outputs"]


def test_help_lists_columns(capsys):
    with pytest.raises(SystemExit):
        main(["energy", "--help"])
    text = capsys.readouterr().out
    assert "energy.csv: p,left,N,right" in text


def test_every_command_has_schema_and_columns():
    from factmod.experiments import COLUMNS, RUNNERS
    assert set(SCHEMAS) == set(COLUMNS) == set(RUNNERS)


_EXAMPLES = [
    "command = solve\np = 101\nshape = two_product\nall = true\n",
    "command = moments\np = 101,499\nN = 10:30:10\nell = 1,2\n",
    "command = ruzsa-check\np_min = 5\np_max = 1e3\nseed = 3\n",
    "command = bounds\nprofile = theorem_interval\np = 10^6\nN = 100\nM = 50\nconstant = 0.5\n",
]


@pytest.mark.parametrize("text", _EXAMPLES)
def test_config_roundtrip(text):
    cfg = parse(text)
    assert parse(cfg.serialize()) == cfg


@settings(max_examples=50)
@given(st.lists(st.integers(1, 10**6), min_size=1, max_size=5), st.integers(0, 2**32), st.booleans())
def test_config_roundtrip_property(Ns, seed, timings):
    cfg = build({"command": "card", "p": "10007", "N": ",".join(map(str, Ns)), "seed": str(seed),
                 "timings": str(timings)})
    assert parse(cfg.serialize()) == cfg
