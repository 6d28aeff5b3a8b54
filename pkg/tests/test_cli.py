import json

import pytest

from multicalib.cli import main
from multicalib.config import load_experiment_config
from multicalib.core import SchemaError
from multicalib.io import load_dataset, load_model


@pytest.fixture
def synth(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["synth", "--n", "3000", "--seed", "1", "--default-shifts", "--out", str(out)]) == 0
    return out


def test_synth_then_measure_reproduces_recorded_metrics(synth, tmp_path):
    assert main(["measure", "--data", str(synth), "--groups", str(synth.with_suffix(".groups.json")), "--out", str(tmp_path / "m.json")]) == 0
    recorded = json.loads(synth.with_suffix(".metrics.json").read_text())
    recorded.pop("generator")
    assert json.loads((tmp_path / "m.json").read_text()) == recorded


def test_synth_is_byte_stable(tmp_path):
    for name in ("a", "b"):
        main(["synth", "--n", "500", "--seed", "9", "--shift", "north=0.1", "--out", str(tmp_path / f"{name}.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_measure_to_stdout(synth, capsys):
    main(["measure", "--data", str(synth), "--groups", str(synth.with_suffix(".groups.json"))])
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) >= {"ece", "max_ece", "smece", "max_smece", "accuracy", "groups"}


def test_calibrate_fit_and_apply(synth, tmp_path):
    m, out = tmp_path / "iso.json", tmp_path / "iso.csv"
    assert main(["calibrate", "--method", "isotonic", "--data", str(synth), "--model-out", str(m)]) == 0
    assert main(["calibrate", "--method", "isotonic", "--model", str(m), "--apply", str(synth), "--out", str(out)]) == 0
    model = load_model(m)
    base, calibrated = load_dataset(synth), load_dataset(out)
    assert calibrated.scores.tolist() == model.predict(base.scores).tolist()


def test_multicalibrate_replay_through_files(synth, tmp_path):
    groups = str(synth.with_suffix(".groups.json"))
    for method, extra in (("hkrr", ["--alpha", "0.025"]), ("hjz", ["--learner", "prod"])):
        m, out = tmp_path / f"{method}.json", tmp_path / f"{method}.csv"
        args = ["multicalibrate", "--method", method, "--groups", groups, "--data", str(synth), "--model-out", str(m)]
        assert main(args + extra + ["--apply", str(synth), "--out", str(out)]) == 0
        again = tmp_path / f"{method}2.csv"
        assert main(["multicalibrate", "--method", method, "--groups", groups, "--model", str(m), "--apply", str(synth), "--out", str(again)]) == 0
        assert out.read_bytes() == again.read_bytes()
        assert load_model(m).n_patches > 0


def test_required_flags(synth, capsys):
    groups = str(synth.with_suffix(".groups.json"))
    assert main(["multicalibrate", "--method", "hkrr", "--groups", groups, "--data", str(synth)]) == 1
    assert "--alpha" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["multicalibrate", "--method", "hkrr", "--alpha", "0.1", "--data", str(synth)])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["synth", "--n", "100", "--out", "x.csv"])


def test_bad_input_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("score,label,a\n0.1,0,1\n0.2,7,1\n")
    g = tmp_path / "g.yaml"
    g.write_text("- {kind: equals, field: a, value: 1}\n")
    assert main(["measure", "--data", str(p), "--groups", str(g)]) == 1
    assert "line 3" in capsys.readouterr().err


def write_config(tmp_path, synth, **extra):
    cfg = {
        "dataset": synth.name,
        "groups": synth.with_suffix(".groups.json").name,
        "split": {"calibration_fractions": [0.0, 0.4], "seed": 3, "n_splits": 2},
        "methods": [{"name": "erm"}, {"name": "hkrr", "alphas": [0.05]}, {"name": "platt"}],
        "output_dir": "out",
        **extra,
    }
    path = synth.parent / "exp.json"
    path.write_text(json.dumps(cfg))
    return path


def test_sweep_byte_identical(synth, tmp_path):
    cfg = write_config(tmp_path, synth)
    assert main(["sweep", "--config", str(cfg)]) == 0
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "again")]) == 0
    for name in ("table.csv", "results.json", "plot_data.csv"):
        assert (tmp_path / "out" / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_sweep_seed_and_cf_override(synth, tmp_path):
    cfg = write_config(tmp_path, synth)
    main(["sweep", "--config", str(cfg), "--seed", "11", "--cf", "0.2", "--out", str(tmp_path / "o")])
    doc = json.loads((tmp_path / "o" / "results.json").read_text())
    assert {r["cf"] for r in doc["runs"]} == {0.2}
    assert {r["seed"] for r in doc["runs"]} == {11, 12}


@pytest.mark.parametrize(
    "extra",
    [{"unknown_key": 1}, {"methods": [{"name": "svm"}]}, {"methods": []}, {"methods": [{"name": "platt", "alphas": [0.1]}]}],
)
def test_config_rejected(synth, tmp_path, extra):
    cfg = write_config(tmp_path, synth, **extra)
    with pytest.raises(SchemaError):
        load_experiment_config(cfg)
    assert main(["sweep", "--config", str(cfg)]) == 1


def test_config_hjz_subset(synth, tmp_path):
    cfg = write_config(tmp_path, synth, methods=[{"name": "hjz", "configs": [{"learner": "hedge", "adversary": "best_response"}]}])
    c, _ = load_experiment_config(cfg)
    assert len(c.method_specs()) == 1
