"""CLI subcommands, exit codes and artifact determinism."""

import json
from pathlib import Path

import pytest

from vmidecode.cli import main

REPO = Path(__file__).resolve().parents[1]
TINY = REPO / "configs" / "tiny.json"


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def tiny_out(tmp_path_factory):
    """One synth + preprocess chain shared by the read-only subcommand tests."""
    out = tmp_path_factory.mktemp("tiny")
    assert run("--config", TINY, "--out", out, "synth") == 0
    assert run("--config", TINY, "--out", out, "preprocess") == 0
    return out


# ---------------------------------------------------------------------------
# Exit codes

def test_no_config_and_no_seed_is_config_error(tmp_path):
    assert run("--out", tmp_path, "synth") == 2


def test_config_missing_seed(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"cv": {"folds": 2}}))
    assert run("--config", cfg, "--out", tmp_path, "synth") == 2


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "wat": 2}))
    assert run("--config", cfg, "--out", tmp_path, "synth") == 2


def test_invalid_json_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{broken")
    assert run("--config", cfg, "--out", tmp_path, "synth") == 2


def test_missing_input_recording_is_data_error(tmp_path):
    assert run("--config", TINY, "--out", tmp_path, "preprocess") == 3


def test_connect_before_preprocess_is_data_error(tmp_path):
    assert run("--config", TINY, "--out", tmp_path, "connect") == 3


def test_corrupt_recording_is_data_error(tmp_path):
    (tmp_path / "recording.eegb").write_bytes(b"EEGBx garbage")
    assert run("--config", TINY, "--out", tmp_path, "preprocess") == 3


# ---------------------------------------------------------------------------
# Subcommand artifacts

def test_synth_and_preprocess_artifacts(tiny_out):
    assert (tiny_out / "recording.eegb").exists()
    assert (tiny_out / "preprocessed.eegb").exists()
    manifest = json.loads((tiny_out / "manifest.json").read_text())
    assert "preprocessed.eegb" in manifest["artifacts"]


def test_connect_emits_per_class_matrices(tiny_out):
    assert run("--config", TINY, "--out", tiny_out, "connect") == 0
    for c in range(4):
        assert (tiny_out / f"plv_class{c}.csv").exists()
        assert (tiny_out / f"edges_class{c}.csv").exists()


def test_select_emits_ranking_and_channel_list(tiny_out):
    assert run("--config", TINY, "--out", tiny_out, "select", "-k", "4") == 0
    names = (tiny_out / "selected_4ch.txt").read_text().strip().split("\n")
    assert len(names) == 4
    ranking = (tiny_out / "channel_ranking.csv").read_text().strip().split("\n")
    assert ranking[0] == "rank,channel_index,channel_name,score"
    assert len(ranking) == 9  # 8 channels


def test_stats_emits_stat_map(tiny_out):
    assert run("--config", TINY, "--out", tiny_out, "stats") == 0
    lines = (tiny_out / "stat_map.csv").read_text().strip().split("\n")
    assert lines[0] == "channel,t,p,significant"
    assert len(lines) == 9


def test_ersp_emits_map(tiny_out):
    assert run("--config", TINY, "--out", tiny_out, "ersp",
               "--channel", "Oz") == 0
    lines = (tiny_out / "ersp_Oz.csv").read_text().strip().split("\n")
    assert len(lines[0].split(",")) == 401  # frequency column + 400 times


def test_psd_emits_per_class_spectra(tiny_out):
    assert run("--config", TINY, "--out", tiny_out, "psd") == 0
    for c in range(4):
        assert (tiny_out / f"psd_class{c}.csv").exists()


def test_train_csp_checkpoint(tiny_out):
    assert run("--config", TINY, "--out", tiny_out, "train-csp") == 0
    assert (tiny_out / "csp_model.eegb").exists()


def test_train_cnn_checkpoint(tiny_out):
    assert run("--config", TINY, "--out", tiny_out, "train-cnn") == 0
    from vmidecode import load_network
    net = load_network(tiny_out / "cnn_model.eegb")
    assert net.spec.n_channels == 8


def test_sweep_emits_table(tiny_out):
    assert run("--config", TINY, "--out", tiny_out, "sweep") == 0
    lines = (tiny_out / "sweep.csv").read_text().strip().split("\n")
    assert lines[0] == "method,2ch,4ch,8ch"
    assert (tiny_out / "report.json").exists()


# ---------------------------------------------------------------------------
# Full pipeline determinism

def test_report_manifests_byte_identical(tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert run("--config", TINY, "--out", out1, "report") == 0
    assert run("--config", TINY, "--out", out2, "report") == 0
    m1 = (out1 / "manifest.json").read_bytes()
    m2 = (out2 / "manifest.json").read_bytes()
    assert m1 == m2


def test_seed_override_changes_hashes(tmp_path):
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert run("--config", TINY, "--out", out1, "synth") == 0
    assert run("--config", TINY, "--seed", "8", "--out", out2, "synth") == 0
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m1["artifacts"]["recording.eegb"] != m2["artifacts"]["recording.eegb"]
    assert m2["seed"] == 8
