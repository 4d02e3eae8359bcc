"""End-to-end CLI behavior: exit codes, artifacts, sidecars, determinism."""

from __future__ import annotations

import json

import pytest
from PIL import Image

from conftest import write_corpus
from failforge.cli import main
from failforge.perturb.execution import read_directives
from failforge.protocol import answer_line_for
from failforge.samples import read_shard
from failforge.seeding import canonical_dumps


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv, "--json")
    return code, json.loads(out)


# -- usage and exit codes ------------------------------------------------------


def test_no_command_is_usage_error(capsys):
    assert main([]) == 64


@pytest.mark.parametrize(
    "argv",
    [
        ["definitely-not-a-command"],
        ["eval"],  # --shard is required
        ["gen-plan", "--target", "many"],
        ["export-train", "--shard", "x.jsonl", "--strategy", "osmosis"],
    ],
)
def test_usage_errors_exit_64(argv):
    with pytest.raises(SystemExit) as exc_info:
        main(argv)
    assert exc_info.value.code == 64


def test_version_banner(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["--version"])
    assert exc_info.value.code == 0
    assert capsys.readouterr().out.startswith("failforge ")


def test_missing_corpus_is_fatal(capsys, tmp_path):
    code, _ = run(capsys, "gen-plan", "--corpus", tmp_path / "nope", "--target", "4")
    assert code == 2


def test_zero_target_is_fatal(capsys, corpus_root):
    code, _ = run(capsys, "gen-plan", "--corpus", corpus_root)
    assert code == 2


# -- validate -----------------------------------------------------------------


def test_validate_clean_corpus(capsys, corpus_root):
    code, report = run_json(capsys, "validate", "--corpus", corpus_root)
    assert code == 0
    assert report["episodes"] == 10
    assert report["invalid"] == 0
    assert all(r["ok"] for r in report["reports"])


def test_validate_flags_missing_frame(capsys, tmp_path):
    root = tmp_path / "corpus"
    write_corpus(root)
    (root / "ep00" / "step0_a_front.png").unlink()
    code, report = run_json(capsys, "validate", "--corpus", root)
    assert code == 1
    assert report["invalid"] == 1
    bad = [r for r in report["reports"] if not r["ok"]]
    assert bad[0]["episode_id"] == "ep00"
    assert "step0_a_front.png" in str(bad[0]["errors"][0])


# -- generation ----------------------------------------------------------------


def test_gen_plan_is_deterministic(capsys, corpus_root, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    args = ("--corpus", corpus_root, "--seed", "7", "--target", "20")
    code_a, body_a = run_json(capsys, "gen-plan", *args, "--out", a)
    code_b, _ = run_json(capsys, "gen-plan", *args, "--out", b)
    assert code_a == code_b == 0
    assert body_a == {"out": str(a), "samples": 20}
    assert a.read_bytes() == b.read_bytes()

    meta = json.loads((tmp_path / "a.jsonl.meta.json").read_text("utf-8"))
    assert meta["tool_version"].startswith("failforge-")
    assert meta["master_seed"] == 7
    assert len(meta["config_hash"]) == 16
    # the sidecar itself is canonical
    assert (tmp_path / "a.jsonl.meta.json").read_text("utf-8") == canonical_dumps(meta) + "\n"


def test_gen_exec_writes_balanced_shard(capsys, corpus_root, tmp_path):
    out = tmp_path / "exec.jsonl"
    code, _ = run(
        capsys, "gen-exec", "--corpus", corpus_root, "--seed", "3", "--target", "12", "--out", out
    )
    assert code == 0
    samples = read_shard(out)
    assert len(samples) == 12
    assert sum(1 for s in samples if s.label.success) == 6
    assert all(s.kind.value == "execution" for s in samples)


# -- stats / export / grid ------------------------------------------------------


@pytest.fixture()
def plan_shard(capsys, corpus_root, tmp_path):
    out = tmp_path / "planning.jsonl"
    code, _ = run(
        capsys, "gen-plan", "--corpus", corpus_root, "--seed", "5", "--target", "10", "--out", out
    )
    assert code == 0
    return out


def test_stats_renders_table(capsys, plan_shard):
    code, text = run(capsys, "stats", plan_shard)
    assert code == 0
    assert "planning" in text
    code, doc = run_json(capsys, "stats", plan_shard)
    assert code == 0
    assert doc["shards"][0]["n"] == 10
    assert doc["shards"][0]["kind"] == "planning"


def test_export_train_vanilla(capsys, plan_shard, tmp_path):
    out = tmp_path / "train.jsonl"
    code, body = run_json(
        capsys, "export-train", "--shard", plan_shard, "--strategy", "vanilla", "--out", out
    )
    assert code == 0
    assert body["examples"] == 10
    rows = [json.loads(line) for line in out.read_text("utf-8").splitlines()]
    assert all(row["target"].startswith("ANSWER:") for row in rows)
    assert (tmp_path / "train.jsonl.meta.json").exists()


def test_export_train_thinking_needs_traces(capsys, plan_shard, tmp_path):
    code, _ = run(
        capsys, "export-train", "--shard", plan_shard, "--strategy", "thinking",
        "--out", tmp_path / "t.jsonl",
    )
    assert code == 2  # rule shards carry no reasoning traces yet


def test_compose_grid_renders_png(capsys, corpus_root, tmp_path):
    out = tmp_path / "grid.png"
    code, body = run_json(
        capsys, "compose-grid", "--episode", corpus_root / "ep00.json",
        "--corpus-root", corpus_root, "--step", "1", "--out", out,
    )
    assert code == 0
    assert body == {"out": str(out), "size": [32, 32], "views": 2}
    with Image.open(out) as img:
        assert img.size == (32, 32)  # 2 timesteps x 2 views of 16px frames
    assert (tmp_path / "grid.png.meta.json").exists()


# -- provenance ------------------------------------------------------------------


def test_verify_provenance_accepts_untampered(capsys, corpus_root, plan_shard):
    code, body = run_json(
        capsys, "verify-provenance", "--corpus", corpus_root, "--shard", plan_shard
    )
    assert code == 0
    assert body == {"checked": 10, "mismatches": 0, "skipped": 0}


def test_verify_provenance_catches_tampering(capsys, corpus_root, plan_shard):
    lines = plan_shard.read_text("utf-8").splitlines()
    doc = json.loads(lines[0])
    doc["plan"][0] = "juggle the spoon"
    lines[0] = canonical_dumps(doc)
    plan_shard.write_text("\n".join(lines) + "\n", encoding="utf-8")

    code, body = run_json(
        capsys, "verify-provenance", "--corpus", corpus_root, "--shard", plan_shard
    )
    assert code == 1
    assert body["mismatches"] == 1
    assert body["checked"] == 10


# -- directives and rollouts -------------------------------------------------------


def test_emit_and_ingest_sim_round_trip(capsys, corpus_root, tmp_path):
    directives_path = tmp_path / "directives.jsonl"
    code, body = run_json(
        capsys, "emit-directives", "--corpus", corpus_root, "--seed", "2",
        "--per-episode", "2", "--out", directives_path,
    )
    assert code in (0, 1)  # sim episodes without a usable mode are skipped
    directives = read_directives(directives_path)
    assert body["directives"] == len(directives) > 0

    rollout_dir = tmp_path / "rollouts"
    rollout_dir.mkdir()
    for i, d in enumerate(directives):
        manifest = json.loads((corpus_root / f"{d.episode_id}.json").read_text("utf-8"))
        manifest.setdefault("extensions", {})["directive_id"] = d.directive_id
        (rollout_dir / f"roll{i:02d}.json").write_text(json.dumps(manifest), encoding="utf-8")
    orphan = json.loads((corpus_root / "ep07.json").read_text("utf-8"))
    orphan.setdefault("extensions", {})["directive_id"] = "f" * 32
    (rollout_dir / "zz-orphan.json").write_text(json.dumps(orphan), encoding="utf-8")

    out = tmp_path / "sim.jsonl"
    code, body = run_json(
        capsys, "ingest-rollouts", "--directives", directives_path,
        "--rollouts", rollout_dir, "--out", out,
    )
    assert code == 1  # the orphan rollout names an unknown directive
    assert body["failed"] == 1
    samples = read_shard(out)
    assert len(samples) == len(directives)
    assert all(s.provenance.mode.startswith("sim:") for s in samples)
    assert all(not s.label.success for s in samples)


# -- gateway-backed commands ---------------------------------------------------------


def _write_config(path, stub, corpus_root, cache_dir):
    path.write_text(
        "\n".join(
            [
                f'corpus = ["{corpus_root}"]',
                "[gateway]",
                f'base_url = "{stub.base_url}"',
                f'cache_dir = "{cache_dir}"',
                "[gateway.retry]",
                "max_attempts = 2",
                "base_backoff_ms = 1",
            ]
        ),
        encoding="utf-8",
    )


def test_gen_cot_then_eval_against_stub(capsys, corpus_root, plan_shard, tmp_path):
    from failforge.testing import StubServer

    with StubServer() as stub:
        cfg = tmp_path / "config.toml"
        _write_config(cfg, stub, corpus_root, tmp_path / "cache")

        cot_path = tmp_path / "cot.jsonl"
        code, body = run_json(
            capsys, "gen-cot", "--config", cfg, "--shard", plan_shard,
            "--corpus-root", corpus_root, "--out", cot_path,
        )
        assert code == 0
        assert body == {"out": str(cot_path), "annotated": 10, "failed": 0}
        annotated = read_shard(cot_path)
        assert all(s.cot is not None for s in annotated)
        assert all(
            s.cot.strip().endswith(answer_line_for(s.label.category)) for s in annotated
        )

        audit = tmp_path / "audit.jsonl"
        code, report = run_json(
            capsys, "eval", "--config", cfg, "--shard", cot_path,
            "--corpus-root", corpus_root, "--audit", audit,
        )
        assert code == 0
        # the stub echoes the grammar's success line, i.e. an always-success detector
        assert report["binary_accuracy"] == 0.5
        assert report["n"] == 10
        assert len(audit.read_text("utf-8").splitlines()) == 10
        assert (tmp_path / "audit.jsonl.meta.json").exists()


def test_gen_cot_without_gateway_block_is_fatal(capsys, corpus_root, plan_shard, tmp_path):
    cfg = tmp_path / "bare.toml"
    cfg.write_text(f'corpus = ["{corpus_root}"]\n', encoding="utf-8")
    code, _ = run(capsys, "gen-cot", "--config", cfg, "--shard", plan_shard)
    assert code == 2
