import json
import math

import pytest

from pseudoaffine import __version__
from pseudoaffine.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_construct_zero(tmp_path, capsys):
    stem = tmp_path / "t"
    code, out, _ = run(["construct", "--lambda", "0.3", "--theta", "zero", "--depth", "10",
                        "--out", str(stem)], capsys)
    assert code == 0
    summary = json.loads(out)
    assert summary["L"] == pytest.approx(0.4, abs=1e-14)
    doc = json.loads((tmp_path / "t.json").read_text())
    assert doc["version"] == __version__ and doc["config"]["depth"] == 10
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 ** 11 - 1


def test_construct_case_a_round_trip(tmp_path, capsys):
    from pseudoaffine.cantor import proportions_of, realize
    from pseudoaffine.proportions import ProportionPair
    stem = tmp_path / "a"
    code, _, _ = run(["construct", "--example", "a", "--s", "2", "--lambda", "0.3",
                      "--depth", "10", "--out", str(stem)], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "a.json").read_text())
    p = ProportionPair.from_dict(doc["proportions"])
    T = realize(p, doc["depth"])
    for n in range(9):
        w = "0" * n
        assert proportions_of(T, 1, w) == pytest.approx(0.3 + p.eps[n], rel=1e-10)


@pytest.mark.parametrize("argv,code", [
    (["construct", "--lambda", "0.6"], 1),
    (["construct", "--depth", "-1"], 1),
    (["construct", "--depth", "25"], 2),
    (["construct", "--example", "b", "--eps0", "0.9"], 1),
    (["construct", "--s", "0.5", "--example", "a"], 1),
    (["transfer", "--phi", "digits:1,2"], 1),
    (["transfer", "--depth", "14"], 2),
    (["render", "--table", "/nonexistent/table.json"], 3),
    (["bogus"], 1),
])
def test_exit_codes(argv, code, capsys):
    assert run(argv, capsys)[0] == code


def test_io_error_on_output(capsys):
    assert run(["construct", "--depth", "2", "--out", "/nonexistent/dir/x"], capsys)[0] == 3


def test_render_counts(tmp_path, capsys):
    out = tmp_path / "m.svg"
    assert run(["render", "--lambda", str(1 / 3), "--depth", "4", "--out", str(out)], capsys)[0] == 0
    svg = out.read_text()
    assert svg.count('class="gap') == 15
    stem = tmp_path / "b"
    run(["construct", "--example", "b", "--depth", "6", "--out", str(stem)], capsys)
    out = tmp_path / "b.svg"
    assert run(["render", "--table", str(stem) + ".json", "--highlight", "alternating",
                "--panels", "--out", str(out)], capsys)[0] == 0
    svg = out.read_text()
    assert svg.count('class="gap highlight"') == 3
    assert 'data-word="e"' in svg and 'data-word="0101"' in svg
    assert svg.count("<polyline") == 4


def test_render_derivative_panel_bumps_only_on_support(capsys):
    from pseudoaffine.families import example
    from pseudoaffine.ifs import build_branches
    from pseudoaffine.render import alternating_words
    p = example("b")
    B = build_branches(p, 6)
    T = B.table
    support = alternating_words(7)
    for n in range(6):
        for j in range(2 ** n):
            w = format(j, f"0{n}b") if n else ""
            a, b, _ = T.row(w)
            mid = 0.5 * (a + b)
            bumped = abs(B.eval_derivative(1, mid) - 0.3) > 1e-12
            assert bumped == (w in support)


def test_livsic_cli(capsys):
    code, out, _ = run(["livsic", "--example", "a", "--s", "2", "--maxlen", "8"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["result"]["pass"] is True and doc["result"]["n_words"] == 510
    assert doc["config"]["maxlen"] == 8 and doc["version"] == __version__
    code, out, _ = run(["livsic", "--perturbed", "0.3", "0.31", "--maxlen", "4"], capsys)
    doc = json.loads(out)
    assert doc["result"]["pass"] is False and doc["result"]["worst_word"] == "1"


def test_chi_cli(tmp_path, capsys):
    stem = tmp_path / "case-b"
    run(["construct", "--example", "b", "--depth", "3", "--out", str(stem)], capsys)
    code, out, _ = run(["chi", "--theta", str(stem) + ".json", "--eta", "zero",
                        "--coding", "(01)^inf", "--n", "40"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["result"]["verdict"] == "oscillates"
    code, out, _ = run(["chi", "--theta", "zero", "--eta", "a", "--random", "5", "--seed", "1"],
                       capsys)
    doc = json.loads(out)
    assert doc["result"]["verdict"] == "converges" and len(doc["traces"]) >= 2
    assert run(["chi", "--coding", "01(10)"], capsys)[0] == 1


def test_transfer_cli(tmp_path, capsys):
    csv = tmp_path / "h.csv"
    code, out, _ = run(["transfer", "--phi", "const:0", "--depth", "6", "--verify",
                        "--period-max", "3", "--csv", str(csv)], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["result"]["pressure"] == pytest.approx(math.log(3), abs=1e-10)
    assert doc["verify"]["max_rel_dev"] <= 1e-9
    assert doc["periodic"]["max_abs_sum"] == 0.0
    assert csv.read_text().splitlines()[0] == "x,h,T_hat"


def test_determinism(tmp_path, capsys, monkeypatch):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        d.mkdir()
        monkeypatch.chdir(d)
        run(["construct", "--example", "b", "--depth", "6", "--out", "t"], capsys)
        run(["render", "--table", "t.json", "--panels", "--highlight", "alternating",
             "--out", "t.svg"], capsys)
        run(["chi", "--eta", "a", "--random", "3", "--seed", "9", "--out", "c.json"], capsys)
        outs.append({f.name: f.read_bytes() for f in sorted(d.iterdir())})
    assert len(outs[0]) == 4
    assert outs[0] == outs[1]
