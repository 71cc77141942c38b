"""File-level pipeline stages and the CLI contract."""

import json

import numpy as np
import pytest

from ole.cli import main
from ole.config import PipelineConfig, load_config
from ole.embeddings import LabeledEmbeddings, load_embeddings, save_embeddings
from ole.errors import ValidationError
from ole.pipeline import (
    ABLATION_ROWS,
    FULL_PROTOTYPES_FILE,
    RAW_PROTOTYPES_FILE,
    REFINED_PROTOTYPES_FILE,
    run_eval,
    run_fit,
    run_hard,
    run_pipeline,
    run_refine,
    run_score,
    run_synth,
    synth_paths,
)
from ole.prototypes import load_prototypes
from ole.synthetic import SynthConfig

SMALL_SYNTH = dict(
    dimension=24,
    id_class_count=10,
    outlier_label_count=120,
    noise_synonym_count=12,
    id_test_per_class=8,
    ood_test_count=80,
    outlier_concept_count=10,
    unseen_concept_count=2,
)


@pytest.fixture(scope="module")
def world_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("world")
    config = PipelineConfig(synth=SynthConfig(seed=7, **SMALL_SYNTH))
    run_synth(config, out)
    return out


@pytest.fixture(scope="module")
def pipeline_config(world_dir):
    return PipelineConfig(
        paths=synth_paths(world_dir),
        k=16,
        refine_percentile=50.0,
        fringe_per_cluster=1,
        temperature=0.06,
        seed=7,
    )


class TestStages:
    def test_fit_outputs(self, pipeline_config, tmp_path):
        model_path, proto_path = run_fit(pipeline_config, tmp_path)
        assert model_path.exists() and proto_path.exists()
        assert load_prototypes(proto_path).size == 16

    def test_fit_k_too_large(self, pipeline_config, tmp_path):
        import dataclasses

        bad = dataclasses.replace(pipeline_config, k=10_000)
        with pytest.raises(ValidationError):
            run_fit(bad, tmp_path)

    def test_refine_count_and_lambda(self, pipeline_config, tmp_path):
        run_fit(pipeline_config, tmp_path)
        refined_path, lambda_path = run_refine(pipeline_config, tmp_path)
        assert load_prototypes(refined_path).size == 8  # floor(50% of 16)
        payload = json.loads(lambda_path.read_text())
        assert payload["retained"] == 8 and payload["total"] == 16
        assert "lambda" in payload and "config_echo" in payload

    def test_hard_appends_in_order(self, pipeline_config, tmp_path):
        run_fit(pipeline_config, tmp_path)
        run_refine(pipeline_config, tmp_path)
        full_path = run_hard(pipeline_config, tmp_path)
        refined = load_prototypes(tmp_path / REFINED_PROTOTYPES_FILE)
        full = load_prototypes(full_path)
        assert full.size > refined.size
        np.testing.assert_array_equal(full.vectors[: refined.size], refined.vectors)
        assert set(full.tags[refined.size :]) == {"hard"}

    def test_score_csv_schema(self, pipeline_config, tmp_path):
        run_fit(pipeline_config, tmp_path)
        run_refine(pipeline_config, tmp_path)
        run_hard(pipeline_config, tmp_path)
        csv_path = run_score(
            pipeline_config,
            pipeline_config.path("id_test"),
            tmp_path / "scores.csv",
            prototypes_path=tmp_path / FULL_PROTOTYPES_FILE,
        )
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "index,label,score"
        n_images = load_embeddings(pipeline_config.path("id_test")).n
        assert len(lines) == 1 + n_images

    def test_score_baseline_ignores_prototypes(self, pipeline_config, tmp_path):
        run_fit(pipeline_config, tmp_path)
        a = run_score(
            pipeline_config,
            pipeline_config.path("id_test"),
            tmp_path / "a.csv",
            prototypes_path=tmp_path / RAW_PROTOTYPES_FILE,
            method="mcm",
        )
        b = run_score(
            pipeline_config,
            pipeline_config.path("id_test"),
            tmp_path / "b.csv",
            method="mcm",
        )
        assert a.read_text() == b.read_text()

    def test_clipn_requires_no_branch(self, pipeline_config, tmp_path):
        import dataclasses

        paths = dict(pipeline_config.paths)
        paths.pop("no_embeddings")
        config = dataclasses.replace(pipeline_config, paths=paths)
        with pytest.raises(ValidationError):
            run_score(config, config.path("id_test"), tmp_path / "x.csv", method="clipn")


class TestPaperScaleDefaults:
    def test_k500_fit_and_ten_percent_refine(self, tmp_path):
        # the headline configuration: 500 learned prototypes, keep the
        # furthest 10% -> exactly 50
        base = PipelineConfig(
            synth=SynthConfig(outlier_label_count=600, noise_synonym_count=40, seed=7)
        )
        run_synth(base, tmp_path / "world")
        config = PipelineConfig(
            paths=synth_paths(tmp_path / "world"), k=500, refine_percentile=10.0, seed=7
        )
        run_fit(config, tmp_path / "out")
        assert load_prototypes(tmp_path / "out" / RAW_PROTOTYPES_FILE).size == 500
        run_refine(config, tmp_path / "out")
        assert load_prototypes(tmp_path / "out" / REFINED_PROTOTYPES_FILE).size == 50


class TestComposition:
    def test_stagewise_equals_monolithic(self, pipeline_config, tmp_path):
        stage_dir = tmp_path / "stages"
        mono_dir = tmp_path / "mono"
        stage_dir.mkdir()
        run_fit(pipeline_config, stage_dir)
        run_refine(pipeline_config, stage_dir)
        run_hard(pipeline_config, stage_dir)
        run_score(
            pipeline_config,
            pipeline_config.path("id_test"),
            stage_dir / "scores_id.csv",
            prototypes_path=stage_dir / FULL_PROTOTYPES_FILE,
        )
        run_score(
            pipeline_config,
            pipeline_config.paths["ood_tests"]["ood"],
            stage_dir / "scores_ood.csv",
            prototypes_path=stage_dir / FULL_PROTOTYPES_FILE,
        )
        run_eval(
            pipeline_config,
            stage_dir / "scores_id.csv",
            {"ood": stage_dir / "scores_ood.csv"},
            stage_dir / "report.json",
        )
        run_pipeline(pipeline_config, mono_dir)
        for name in (FULL_PROTOTYPES_FILE, RAW_PROTOTYPES_FILE, REFINED_PROTOTYPES_FILE):
            assert (stage_dir / name).read_bytes() == (mono_dir / name).read_bytes()
        assert (stage_dir / "scores_id.csv").read_text() == (mono_dir / "scores_id.csv").read_text()
        assert (stage_dir / "scores_ood.csv").read_text() == (mono_dir / "scores_ood.csv").read_text()
        assert (stage_dir / "report.json").read_text() == (mono_dir / "report.json").read_text()

    def test_rerun_bit_identical(self, pipeline_config, tmp_path):
        first = tmp_path / "first"
        second = tmp_path / "second"
        run_pipeline(pipeline_config, first)
        run_pipeline(pipeline_config, second)
        for path in sorted(first.iterdir()):
            assert path.read_bytes() == (second / path.name).read_bytes()


class TestConfig:
    def test_defaults(self):
        config = PipelineConfig()
        assert config.k == 500
        assert config.refine_percentile == 10.0
        assert config.id_cluster_count == 5
        assert config.fringe_per_cluster == 30
        assert config.temperature == 0.01
        assert config.method == "clipn_ole"

    def test_flag_beats_file_beats_default(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"k": 32, "temperature": 0.5}))
        config = load_config(cfg_file, {"k": 64})
        assert config.k == 64  # flag wins
        assert config.temperature == 0.5  # file wins
        assert config.refine_percentile == 10.0  # default

    def test_unknown_key_rejected(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"kay": 32}))
        with pytest.raises(ValidationError):
            load_config(cfg_file)

    def test_synth_inherits_seed(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"seed": 123, "synth": {}}))
        config = load_config(cfg_file)
        assert config.synth.seed == 123


class TestCli:
    def write_config(self, tmp_path, world_dir, **extra):
        payload = {
            "paths": synth_paths(world_dir),
            "k": 16,
            "refine_percentile": 50.0,
            "fringe_per_cluster": 1,
            "temperature": 0.06,
            "seed": 7,
        }
        payload.update(extra)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(payload))
        return cfg

    def test_fit_refine_hard_score_eval_chain(self, world_dir, tmp_path, capsys):
        cfg = self.write_config(tmp_path, world_dir)
        out = str(tmp_path / "out")
        assert main(["fit", "--config", str(cfg), "--out", out]) == 0
        assert main(["refine", "--config", str(cfg), "--out", out]) == 0
        assert main(["hard", "--config", str(cfg), "--out", out]) == 0
        images = str(world_dir / "id_test.oleemb")
        assert (
            main(
                [
                    "score",
                    "--config",
                    str(cfg),
                    "--out",
                    out,
                    "--images",
                    images,
                    "--prototypes",
                    f"{out}/{FULL_PROTOTYPES_FILE}",
                    "--scores-out",
                    f"{out}/id.csv",
                ]
            )
            == 0
        )
        ood = str(world_dir / "ood_test.oleemb")
        assert (
            main(
                [
                    "score",
                    "--config",
                    str(cfg),
                    "--out",
                    out,
                    "--images",
                    ood,
                    "--prototypes",
                    f"{out}/{FULL_PROTOTYPES_FILE}",
                    "--scores-out",
                    f"{out}/ood.csv",
                ]
            )
            == 0
        )
        assert (
            main(
                [
                    "eval",
                    "--config",
                    str(cfg),
                    "--out",
                    out,
                    "--id-scores",
                    f"{out}/id.csv",
                    "--ood-scores",
                    f"ood={out}/ood.csv",
                ]
            )
            == 0
        )
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["datasets"][0]["name"] == "ood"

    def test_validation_exit_code(self, world_dir, tmp_path):
        cfg = self.write_config(tmp_path, world_dir, k=100_000)
        assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_clipn_without_no_branch_exit_code(self, world_dir, tmp_path):
        paths = synth_paths(world_dir)
        paths.pop("no_embeddings")
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"paths": paths, "k": 16, "seed": 7}))
        code = main(
            [
                "score",
                "--config",
                str(cfg),
                "--out",
                str(tmp_path / "o"),
                "--images",
                str(world_dir / "id_test.oleemb"),
                "--method",
                "clipn",
            ]
        )
        assert code == 2

    def test_synth_and_inspect(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 7, "synth": SMALL_SYNTH}))
        out = tmp_path / "world"
        assert main(["synth", "--config", str(cfg), "--out", str(out)]) == 0
        capsys.readouterr()
        assert main(["inspect", str(out / "id_labels.oleemb")]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n"] == SMALL_SYNTH["id_class_count"]
        assert payload["normalized"] is True

    def test_ablate_row_structure(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "k": 16,
                    "refine_percentile": 50.0,
                    "fringe_per_cluster": 1,
                    "temperature": 0.06,
                    "seed": 7,
                    "synth": SMALL_SYNTH,
                }
            )
        )
        out = tmp_path / "abl"
        assert main(["ablate", "--config", str(cfg), "--out", str(out)]) == 0
        payload = json.loads((out / "ablation.json").read_text())
        assert tuple(row["name"] for row in payload["rows"]) == ABLATION_ROWS
        # identical test inputs across rows: the score CSV label columns agree
        first = (out / "scores_ood_baseline.csv").read_text().splitlines()
        last = (out / "scores_ood_opl_refine_hopg.csv").read_text().splitlines()
        assert [l.rsplit(",", 1)[0] for l in first] == [l.rsplit(",", 1)[0] for l in last]

    def test_scores_round_trip_with_no_probs_file(self, world_dir, tmp_path):
        # precomputed no-probabilities ride the OLE-EMB format, flag unset
        ids = load_embeddings(world_dir / "id_labels.oleemb")
        images = load_embeddings(world_dir / "id_test.oleemb")
        rng = np.random.default_rng(0)
        probs = rng.uniform(size=(images.n, ids.n))
        probs_path = tmp_path / "noprobs.oleemb"
        save_embeddings(LabeledEmbeddings(probs), probs_path)
        cfg = self.write_config(tmp_path, world_dir)
        code = main(
            [
                "score",
                "--config",
                str(cfg),
                "--out",
                str(tmp_path / "o"),
                "--images",
                str(world_dir / "id_test.oleemb"),
                "--no-probs",
                str(probs_path),
                "--method",
                "clipn",
                "--scores-out",
                str(tmp_path / "np.csv"),
            ]
        )
        assert code == 0
        lines = (tmp_path / "np.csv").read_text().splitlines()
        assert len(lines) == 1 + images.n
