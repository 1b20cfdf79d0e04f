import json

from plm_embedder.cli import main


def test_extract_command(checkpoint_dir, dataset_path, tmp_path, capsys):
    code = main([
        "extract",
        "--model", str(checkpoint_dir),
        "--data", str(dataset_path),
        "--out-shard", str(tmp_path / "emb.shard"),
        "--out-manifest", str(tmp_path / "manifest.jsonl"),
    ])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["dim"] == 32
    assert summary["n_samples"] == 8
    assert (tmp_path / "emb.shard").exists()
    assert (tmp_path / "manifest.jsonl").exists()


def test_parity_command(checkpoint_dir, dataset_path, vocab_txt, capsys):
    code = main([
        "parity",
        "--vocab", str(vocab_txt),
        "--model", str(checkpoint_dir),
        "--data", str(dataset_path),
        "--limit", "5",
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["n_compared"] == 5
    assert report["mismatch_rate"] <= 0.2


def test_missing_dataset_is_input_error(checkpoint_dir, tmp_path):
    code = main([
        "extract",
        "--model", str(checkpoint_dir),
        "--data", str(tmp_path / "missing.jsonl"),
        "--out-shard", str(tmp_path / "x.shard"),
        "--out-manifest", str(tmp_path / "x.jsonl"),
    ])
    assert code == 1


def test_unknown_flag_rejected(checkpoint_dir, dataset_path, tmp_path):
    code = main([
        "extract",
        "--model", str(checkpoint_dir),
        "--data", str(dataset_path),
        "--out-shard", str(tmp_path / "x.shard"),
        "--out-manifest", str(tmp_path / "x.jsonl"),
        "--nonsense",
    ])
    assert code == 1
