import json
import math

import numpy as np
import pytest
from scipy import stats

from pseudopoisson.cli import fmt, main
from pseudopoisson.data import ExpParams, LomaxParams, write_csv
from pseudopoisson.mle import INAPPLICABLE_NOTE

from conftest import simulate


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def neg_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("d") / "neg.csv"
    write_csv(simulate(ExpParams(2.0, -4.0, 0.6, 6.0), 400, seed=1), path)
    return path


def test_fmt():
    assert fmt(None) == "-"
    assert fmt(5e-5) == "≈0"
    assert fmt(3.0, boundary=True) == "≈∞"
    assert fmt(1867.2684) == "1867.268"
    assert fmt(math.inf) == "inf"


def test_fit_single_model_text(capsys, neg_csv):
    code, out, _ = run(capsys, "fit", "--data", str(neg_csv), "--model", "exp:c4", "--sign", "-")
    assert code == 0
    assert "m.m.e" in out and "AIC" in out and "LRT df=2" in out


def test_fit_all_json(capsys, neg_csv):
    code, out, _ = run(capsys, "fit", "--all", "--data", str(neg_csv), "--json")
    assert code == 0
    doc = json.loads(out)
    models = {m["model"]: m for m in doc["models"]}
    assert len(models) == 17  # 8 exponential, 9 Lomax
    assert models["lomax:full"]["mme"]["estimates"].keys() == {"alpha"}
    finite = {k: float(m["mle"]["aic"]) for k, m in models.items()
              if m["mle"]["aic"] not in ("inf", None)}
    for fam in ("exp", "lomax"):
        best = min((v, k) for k, v in finite.items() if k.startswith(fam))[1]
        assert doc["best"][fam] == best
    for m in doc["models"]:
        if m["mle"]["applicable"] and m["lrt"] is not None:
            assert m["lrt"]["stat"] >= 0


def test_fit_inapplicable_entries(capsys, tmp_path):
    path = tmp_path / "z.csv"
    write_csv(simulate(ExpParams(1.0, -1.0, 1.0, 2.0), 200, seed=3), path)
    code, out, _ = run(capsys, "fit", "--all", "--data", str(path))
    assert code == 0
    assert out.count(INAPPLICABLE_NOTE) == 4
    code, out, _ = run(capsys, "fit", "--all", "--data", str(path), "--strict")
    assert code == 4


def test_fit_reproducible(capsys, neg_csv, tmp_path):
    path = tmp_path / "a.json"
    run(capsys, "fit", "--all", "--data", str(neg_csv), "--json", "--out", str(path))
    first = path.read_bytes()
    run(capsys, "fit", "--all", "--data", str(neg_csv), "--json", "--out", str(path))
    assert path.read_bytes() == first


def test_fit_mirror(capsys, neg_csv):
    _, out, _ = run(capsys, "fit", "--data", str(neg_csv), "--mirror", "--model", "exp:c5", "--json")
    doc = json.loads(out)
    assert doc["mirror"] is True
    x = np.loadtxt(neg_csv, delimiter=",", skiprows=1)
    assert doc["sample"]["M1"] == pytest.approx(x[:, 1].mean())


def test_lrt_from_saved_report(capsys, neg_csv, tmp_path):
    rep = tmp_path / "all.json"
    run(capsys, "fit", "--all", "--data", str(neg_csv), "--json", "--out", str(rep))
    code, out, _ = run(capsys, "lrt", "--full", str(rep), "--full-model", "exp:full",
                       "--sub", str(rep), "--sub-model", "exp:c1-", "--data", str(neg_csv), "--json")
    assert code == 0
    doc = json.loads(out)
    models = {m["model"]: m for m in json.loads(rep.read_text())["models"]}
    assert doc["df"] == 1
    assert doc["stat"] == pytest.approx(models["exp:c1-"]["lrt"]["stat"], abs=1e-9)
    assert doc["closed_form_stat"] == pytest.approx(doc["stat"], abs=1e-6)
    code, _, err = run(capsys, "lrt", "--full", str(rep), "--full-model", "exp:c1-",
                       "--sub", str(rep), "--sub-model", "exp:full")
    assert code == 2 and "not nested" in err


def test_bounds(capsys):
    code, out, _ = run(capsys, "bounds", "--json")
    doc = json.loads(out)
    b = {m["model"]: m for m in doc["bounds"]}
    assert b["exp:c4+"]["upper"] == pytest.approx(math.sqrt((math.e - 1) / (2 * math.e - 1)))
    assert b["exp:c1-"]["lower"] == pytest.approx(-0.48162, abs=1e-3)
    code, out, _ = run(capsys, "bounds", "--model", "lomax:c4-")
    assert "-0.3146" in out


def test_simulate_and_study(capsys, tmp_path):
    out = tmp_path / "s.csv"
    code, _, _ = run(capsys, "simulate", "--model", "exp:full", "--params",
                     "alpha=5,beta=-20,gamma=0.5,delta=25", "--n", "300", "--seed", "9", "--out", str(out))
    assert code == 0
    first = out.read_text()
    run(capsys, "simulate", "--model", "exp:full", "--params",
        "alpha=5,beta=-20,gamma=0.5,delta=25", "--n", "300", "--seed", "9", "--out", str(out))
    assert out.read_text() == first and first.startswith("x1,x2")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": "exp:c4", "sign": "+", "params": {"alpha": 2, "delta": 1},
                               "n": 100, "reps": 4, "seed": 1}))
    code, out, _ = run(capsys, "study", "--config", str(cfg), "--json")
    doc = json.loads(out)
    assert code == 0 and doc["config"]["reps"] == 4
    assert doc["config"]["seed"] == 1
    _, out, _ = run(capsys, "study", "--config", str(cfg), "--seed", "8", "--json")
    assert json.loads(out)["config"]["seed"] == 8
    assert set(doc["estimates"]) == {"mme", "mle"}


def test_curve(capsys, tmp_path):
    code, out, _ = run(capsys, "curve", "--model", "exp:full", "--params",
                       "alpha=2,beta=3,gamma=0.5,delta=1", "--x1-max", "0")
    assert out.strip().splitlines() == ["x1,rate", "0,1"]
    p = LomaxParams(2.0, -1.5, 0.7, 2.0, 4.0)
    _, out, _ = run(capsys, "curve", "--model", "lomax:full", "--params",
                    "alpha=2,beta=-1.5,gamma=0.7,eta=2,delta=4", "--x1-max", "12", "--json")
    rows = json.loads(out)["rows"]
    assert [r["rate"] for r in rows] == pytest.approx(list(p.rate(np.arange(13.0))), rel=1e-15)
    # delta near zero: x1 = 0 sits at about 0, the rest sit at delta + beta
    _, out, _ = run(capsys, "curve", "--model", "exp:full", "--params",
                    "alpha=2.6,beta=0.8,gamma=2e6,delta=1e-9", "--x1-max", "5", "--json")
    rates = [r["rate"] for r in json.loads(out)["rows"]]
    assert rates[0] < 1e-4 and all(r == pytest.approx(0.8) for r in rates[1:])


def test_curve_with_data(capsys, neg_csv):
    _, out, _ = run(capsys, "curve", "--model", "exp:c4-", "--params", "alpha=2,delta=6",
                    "--data", str(neg_csv), "--x1-max", "30", "--json")
    rows = json.loads(out)["rows"]
    assert sum(r["freq"] for r in rows) == pytest.approx(1.0)


def test_pmf(capsys):
    p = ExpParams(1.5, 2.0, 0.8, 0.5)
    _, out, _ = run(capsys, "pmf", "--model", "exp:full", "--params", "alpha=1.5,beta=2,gamma=0.8,delta=0.5",
                    "--x1-max", "25", "--x2-max", "30", "--json")
    doc = json.loads(out)
    P = np.array(doc["pmf"])
    assert doc["total"] >= 1 - 1e-6
    assert P[0, 0] == pytest.approx(math.exp(-1.5) * math.exp(-0.5), rel=1e-14)
    i, j = np.meshgrid(np.arange(26), np.arange(31), indexing="ij")
    oracle = stats.poisson.pmf(i, 1.5) * stats.poisson.pmf(j, p.rate(i.astype(float)))
    np.testing.assert_allclose(P, oracle, rtol=1e-10, atol=1e-300)
    np.testing.assert_allclose(P.sum(axis=1), stats.poisson.pmf(np.arange(26), 1.5), rtol=1e-9)


def test_moments(capsys, neg_csv):
    _, out, _ = run(capsys, "moments", "--model", "lomax:full", "--params",
                    "alpha=2,beta=1,gamma=1,eta=2.5,delta=0.5", "--json")
    doc = json.loads(out)
    assert doc["rho_note"] == "series-evaluated" and 0 < doc["rho"] < 1
    code, out, _ = run(capsys, "moments", "--data", str(neg_csv))
    assert code == 0 and "S12" in out


def test_exit_codes(capsys, tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run(capsys, "fit", "--all", "--data", str(empty))[0] == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,x2\n1,2\n1,q\n")
    code, _, err = run(capsys, "fit", "--all", "--data", str(bad))
    assert code == 3 and ":3:" in err
    good = tmp_path / "good.csv"
    good.write_text("x1,x2\n1,2\n0,1\n")
    assert run(capsys, "fit", "--data", str(good))[0] == 2
    assert run(capsys, "bounds", "--model", "exp:nope")[0] == 2
    assert run(capsys, "curve", "--model", "exp:full", "--params", "alpha=1,beta=-2,gamma=1,delta=1")[0] == 2
    with pytest.raises(SystemExit) as e:
        main(["fit", "--bogus"])
    assert e.value.code == 2
    missing = tmp_path / "cfg.json"
    assert run(capsys, "study", "--config", str(missing))[0] == 3
