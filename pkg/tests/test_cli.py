import json

from irispad.cli import main


def run(args):
    return main([str(a) for a in args])


def test_synth_train_eval_round_trip(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    assert run(["synth", "--out", corpus, "--flat", "6", "--bumpy", "6", "--seed", "3"]) == 0
    manifest = corpus / "manifest.csv"
    assert manifest.is_file()

    models = tmp_path / "models"
    assert run(["train", "--manifest", manifest, "--out", models]) == 0
    for artifact in ("model3d.txt", "settings.txt", "ensemble/ensemble.txt", "train_scores_3d.csv"):
        assert (models / artifact).is_file()

    evaldir = tmp_path / "eval"
    assert run(["eval", "--manifest", manifest, "--out", evaldir, "--seed", "5"]) == 0
    report = json.loads((evaldir / "report_fusion.json").read_text())
    assert set(report["counts"]) == {"attacks", "bonafides", "attack_errors", "bonafide_errors"}
    assert (evaldir / "scatter.csv").is_file()
    out = capsys.readouterr().out
    assert "fusion accuracy" in out


def test_score_writes_audit(tmp_path):
    corpus = tmp_path / "corpus"
    models = tmp_path / "models"
    run(["synth", "--out", corpus, "--flat", "4", "--bumpy", "4"])
    run(["train", "--manifest", corpus / "manifest.csv", "--out", models])
    scores = tmp_path / "scores"
    assert run(["score", "--manifest", corpus / "manifest.csv", "--models", models,
                "--out", scores]) == 0
    lines = (scores / "audit.csv").read_text().splitlines()
    assert lines[0] == "sample_id,q,s2,d3,d2,fused,label,flags"
    assert len(lines) == 9


def test_missing_required_flag_is_usage_error(capsys):
    assert run(["train", "--out", "somewhere"]) == 1
    err = capsys.readouterr().err
    assert "--manifest" in err


def test_unknown_flag_and_bad_angle_are_usage_errors(capsys):
    assert run(["synth", "--out", "x", "--no-such-flag"]) == 1
    assert run(["synth", "--out", "x", "--light-angle", "95"]) == 1


def test_missing_manifest_file_is_data_error(tmp_path, capsys):
    assert run(["train", "--manifest", tmp_path / "nope.csv", "--out", tmp_path / "m"]) == 2
    err = capsys.readouterr().err
    assert "data error" in err


def test_eval_argument_conflicts(tmp_path, capsys):
    assert run(["eval", "--out", tmp_path]) == 1
    assert run(["eval", "--out", tmp_path, "--train-manifest", "a.csv"]) == 1
    assert run(["eval", "--out", tmp_path, "--manifest", "m.csv",
                "--train-manifest", "a.csv", "--test-manifest", "b.csv"]) == 1


def test_eval_subject_overlap_is_data_error(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    run(["synth", "--out", corpus, "--flat", "3", "--bumpy", "3"])
    manifest = corpus / "manifest.csv"
    assert run(["eval", "--out", tmp_path / "e", "--train-manifest", manifest,
                "--test-manifest", manifest]) == 2
    err = capsys.readouterr().err
    assert "share subjects" in err


def test_eval_pattern_protocol(tmp_path):
    corpus = tmp_path / "corpus"
    run(["synth", "--out", corpus, "--flat", "8", "--bumpy", "4", "--opaque", "4",
         "--seed", "2"])
    evaldir = tmp_path / "eval"
    assert run(["eval", "--manifest", corpus / "manifest.csv", "--out", evaldir,
                "--protocol", "pattern"]) == 0
    for tag in ("regular_to_irregular", "irregular_to_regular"):
        assert (evaldir / tag / "report_fusion.json").is_file()


def test_eval_kfold_summary(tmp_path):
    corpus = tmp_path / "corpus"
    run(["synth", "--out", corpus, "--flat", "6", "--bumpy", "6", "--seed", "4"])
    evaldir = tmp_path / "eval"
    assert run(["eval", "--manifest", corpus / "manifest.csv", "--out", evaldir,
                "--folds", "3"]) == 0
    summary = json.loads((evaldir / "summary.json").read_text())
    assert summary["fusion"]["folds"] == 3
    assert "mean" in summary["fusion"]["accuracy"]
    assert (evaldir / "fold0" / "report_fusion.json").is_file()


def test_eval_plot_writes_figures(tmp_path):
    corpus = tmp_path / "corpus"
    run(["synth", "--out", corpus, "--flat", "4", "--bumpy", "4"])
    evaldir = tmp_path / "eval"
    assert run(["eval", "--manifest", corpus / "manifest.csv", "--out", evaldir,
                "--plot"]) == 0
    assert (evaldir / "scatter.svg").is_file()
    assert (evaldir / "score_hist.svg").is_file()


def test_synth_is_byte_deterministic(tmp_path):
    for name in ("a", "b"):
        run(["synth", "--out", tmp_path / name, "--flat", "3", "--bumpy", "3", "--seed", "8"])
    for path_a in sorted((tmp_path / "a").iterdir()):
        path_b = tmp_path / "b" / path_a.name
        assert path_a.read_bytes() == path_b.read_bytes()


def test_config_dir_env_var_supplies_banks(tmp_path, monkeypatch):
    from irispad import save_filter_bank
    from irispad.bsif import default_filter_banks

    bank_dir = tmp_path / "banks"
    bank_dir.mkdir()
    for bank in default_filter_banks(sizes=(3, 5), bits=4):
        save_filter_bank(bank, bank_dir / f"{bank.name}.txt")
    corpus = tmp_path / "corpus"
    run(["synth", "--out", corpus, "--flat", "4", "--bumpy", "4"])
    monkeypatch.setenv("IRISPAD_CONFIG_DIR", str(bank_dir))
    models = tmp_path / "models"
    assert run(["train", "--manifest", corpus / "manifest.csv", "--out", models]) == 0
    saved = sorted(p.stem for p in (models / "banks").glob("*.txt"))
    assert saved == ["diff-3x3-4bit", "diff-5x5-4bit"]

    monkeypatch.setenv("IRISPAD_CONFIG_DIR", str(tmp_path / "nowhere"))
    assert run(["train", "--manifest", corpus / "manifest.csv",
                "--out", tmp_path / "m2"]) == 2
