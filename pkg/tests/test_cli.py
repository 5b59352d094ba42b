import json
import zlib
from pathlib import Path

import pytest

from confcascade.cli import main
from confcascade.manifest import ManifestError, load_manifest

from synth import build_run_dir


def snapshot(directory: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(directory)): p.read_bytes()
        for p in sorted(directory.rglob("*")) if p.is_file()
    }


def test_manifest_load_and_defaults(tmp_path):
    path = build_run_dir(tmp_path)
    m = load_manifest(path)
    assert m.k == 3
    assert m.backend.kind == "replay"
    assert m.timing == "zero"  # replay backend defaults to deterministic timing
    assert m.corpus_path == tmp_path / "corpus.jsonl"
    assert m.threshold == 0.95


def test_manifest_overrides_win(tmp_path):
    path = build_run_dir(tmp_path)
    m = load_manifest(path, overrides={"k": 4, "threshold": 0.8, "timing": "measured"})
    assert m.k == 4
    assert m.threshold == 0.8
    assert m.timing == "measured"


def test_manifest_missing_fields(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[data]\ncorpus = 'x.jsonl'\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="embeddings"):
        load_manifest(bad)
    with pytest.raises(ManifestError, match="not found"):
        load_manifest(tmp_path / "nope.toml")


def test_endpoint_env_override(tmp_path, monkeypatch):
    path = build_run_dir(tmp_path)
    monkeypatch.setenv("CONFCASCADE_ENDPOINT", "http://example.invalid:9/v1")
    m = load_manifest(path)
    assert m.backend.endpoint == "http://example.invalid:9/v1"


def test_cmd_train_writes_fold_models(tmp_path):
    manifest = build_run_dir(tmp_path, k=3)
    assert main(["train", str(manifest)]) == 0
    models = sorted((tmp_path / "run" / "models").iterdir())
    assert [p.name for p in models] == ["fold0.model", "fold1.model", "fold2.model"]
    crcs = [zlib.crc32(p.read_bytes()) for p in models]
    assert main(["train", str(manifest)]) == 0
    assert [zlib.crc32(p.read_bytes()) for p in sorted((tmp_path / "run" / "models").iterdir())] == crcs


def test_cmd_train_missing_embeddings_exit_2(tmp_path, capsys):
    manifest = build_run_dir(tmp_path)
    (tmp_path / "corpus.cgem").unlink()
    code = main(["train", str(manifest)])
    captured = capsys.readouterr()
    assert code == 2
    assert "corpus.cgem" in captured.err


def test_cmd_evaluate_bundle(tmp_path):
    manifest = build_run_dir(tmp_path, n_per_class=40, k=3, threshold=0.95)
    assert main(["evaluate", str(manifest)]) == 0
    outdir = tmp_path / "run"
    for name in ("manifest.toml", "effectiveness.csv", "effectiveness.txt",
                 "effectiveness.png", "ttest.csv", "audit.csv", "cost.csv",
                 "cost_phases.csv", "cost.txt", "reliability.csv", "reliability.png",
                 "summary.json", "outcomes-fold0.jsonl", "outcomes-fold2.jsonl"):
        assert (outdir / name).exists(), name
    cost_lines = (outdir / "cost.csv").read_text().strip().splitlines()
    assert cost_lines[0] == "dataset,method,per_fold_seconds,total_seconds,dollars,kg_co2"
    summary = json.loads((outdir / "summary.json").read_text())
    means = summary["macro_f1_mean"]
    # perfect replay oracle: cascade at least as good as local-only
    assert means["cascade"] >= means["local_only"]
    assert summary["thresholds_per_fold"] == [0.95, 0.95, 0.95]


def test_cmd_evaluate_rerun_byte_identical(tmp_path):
    manifest = build_run_dir(tmp_path, n_per_class=25, k=2)
    assert main(["evaluate", str(manifest)]) == 0
    first = snapshot(tmp_path / "run")
    assert main(["evaluate", str(manifest)]) == 0
    second = snapshot(tmp_path / "run")
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], name


def test_cmd_evaluate_tunes_when_no_threshold(tmp_path):
    manifest = build_run_dir(tmp_path, n_per_class=30, k=2, threshold=None,
                             grid=(0.6, 0.9))
    assert main(["evaluate", str(manifest)]) == 0
    summary = json.loads((tmp_path / "run" / "summary.json").read_text())
    assert all(t in (0.6, 0.9) for t in summary["thresholds_per_fold"])
    assert summary["threshold_mode"] in (0.6, 0.9)


def test_cmd_evaluate_k2_renders_df1_ttests(tmp_path):
    manifest = build_run_dir(tmp_path, n_per_class=20, k=2)
    assert main(["evaluate", str(manifest)]) == 0
    ttest = (tmp_path / "run" / "ttest.csv").read_text().strip().splitlines()
    assert len(ttest) == 4  # header + 3 method pairs
    assert "verdict" in ttest[0]


def test_cmd_sweep(tmp_path):
    manifest = build_run_dir(tmp_path, n_per_class=25, k=2, threshold=None,
                             grid=(0.6, 0.8, 0.95))
    assert main(["sweep", str(manifest)]) == 0
    csv_path = tmp_path / "run" / "sweep.csv"
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "threshold,macro_f1,instances_sent,pct,total_time_s"
    assert len(lines) == 4
    sent = [float(line.split(",")[2]) for line in lines[1:]]
    assert sent == sorted(sent)
    assert (tmp_path / "run" / "sweep.png").exists()
    before = csv_path.read_bytes()
    assert main(["sweep", str(manifest)]) == 0
    assert csv_path.read_bytes() == before


def test_cmd_route(tmp_path):
    manifest = build_run_dir(tmp_path, n_per_class=20, k=2)
    assert main(["train", str(manifest)]) == 0
    model = tmp_path / "run" / "models" / "fold0.model"
    assert main(["route", str(manifest), "--model", str(model)]) == 0
    outcomes = (tmp_path / "run" / "outcomes.jsonl").read_text().strip().splitlines()
    assert len(outcomes) == 40
    rec = json.loads(outcomes[0])
    assert set(rec) == {"id", "confidence", "route", "local_label", "llm_label",
                        "final_label", "latency"}
    assert (tmp_path / "run" / "audit.csv").exists()


def test_cmd_report_regenerates(tmp_path):
    manifest = build_run_dir(tmp_path, n_per_class=20, k=2)
    assert main(["evaluate", str(manifest)]) == 0
    outdir = tmp_path / "run"
    png = outdir / "effectiveness.png"
    original = png.read_bytes()
    png.unlink()
    (outdir / "effectiveness.txt").unlink()
    assert main(["report", str(outdir)]) == 0
    assert png.read_bytes() == original
    assert (outdir / "effectiveness.txt").exists()


def test_cmd_export_cassette(tmp_path):
    manifest = build_run_dir(tmp_path, n_per_class=5, k=2)
    out = tmp_path / "fresh.jsonl"
    assert main(["export-cassette", str(manifest), "--out", str(out), "--from-labels"]) == 0
    assert out.read_bytes() == (tmp_path / "oracle.jsonl").read_bytes()


def test_cli_flag_overrides_flow_through(tmp_path):
    manifest = build_run_dir(tmp_path, n_per_class=20, k=2)
    assert main(["evaluate", str(manifest), "--output-dir", str(tmp_path / "alt")]) == 0
    assert (tmp_path / "alt" / "summary.json").exists()


def test_cli_bad_manifest_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("not toml [", encoding="utf-8")
    assert main(["train", str(bad)]) == 2
    assert "error:" in capsys.readouterr().err
