import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from hyst import datagen
from hyst.cli import main
from hyst.evaluation import EvalReport

runner = CliRunner()


@pytest.fixture(scope="module")
def project(tmp_path_factory):
    directory = tmp_path_factory.mktemp("project")
    config_path = datagen.write_project(directory, planner="scripted", dim=128, seed=7)
    result = runner.invoke(main, ["--config", str(config_path), "ingest"])
    assert result.exit_code == 0, result.output
    return directory


@pytest.fixture(scope="module")
def rules_project(tmp_path_factory):
    directory = tmp_path_factory.mktemp("rules_project")
    config_path = datagen.write_project(directory, planner="rules", dim=128, seed=7)
    result = runner.invoke(main, ["--config", str(config_path), "ingest"])
    assert result.exit_code == 0, result.output
    return directory


def invoke(project, *args, **kwargs):
    return runner.invoke(main, ["--config", str(project / "hyst.yaml"), *args], **kwargs)


class TestIngest:
    def test_counts_and_artifacts(self, tmp_path):
        config_path = datagen.write_project(tmp_path, planner="rules", dim=64, seed=3)
        result = runner.invoke(main, ["--config", str(config_path), "ingest"])
        assert result.exit_code == 0
        assert "136 records, 0 skipped" in result.output
        index_dir = tmp_path / "index"
        names = sorted(p.name for p in index_dir.iterdir())
        assert names == ["bm25.bin", "records.jsonl", "vectors_linearized.bin", "vectors_text.bin"]

    def test_rerun_is_byte_identical(self, tmp_path):
        config_path = datagen.write_project(tmp_path, planner="rules", dim=64, seed=3)
        runner.invoke(main, ["--config", str(config_path), "ingest"])
        index_dir = tmp_path / "index"
        before = {p.name: p.read_bytes() for p in index_dir.iterdir()}
        runner.invoke(main, ["--config", str(config_path), "ingest"])
        after = {p.name: p.read_bytes() for p in index_dir.iterdir()}
        assert before == after

    def test_skipped_rows_diagnosed(self, tmp_path):
        config_path = datagen.write_project(tmp_path, planner="rules", dim=64, seed=3)
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text(corpus.read_text(encoding="utf-8") + "{broken\n", encoding="utf-8")
        result = runner.invoke(main, ["--config", str(config_path), "ingest"])
        assert result.exit_code == 0
        assert "skipped line 137" in result.output
        assert "136 records, 1 skipped" in result.output

    def test_empty_corpus_warns(self, tmp_path):
        config_path = datagen.write_project(tmp_path, planner="rules", dim=64, seed=3)
        (tmp_path / "corpus.jsonl").write_text("", encoding="utf-8")
        result = runner.invoke(main, ["--config", str(config_path), "ingest"])
        assert result.exit_code == 0
        assert "0 records" in result.output
        assert "warning" in result.output


class TestPlan:
    def test_prints_filter_and_refined_query(self, project):
        result = invoke(project, "plan", "sturdy reliable paintball from Spyder")
        assert result.exit_code == 0
        assert '"BRAND": {"$eq": "Spyder"}' in result.output
        assert "refined query: sturdy reliable paintball from Spyder" in result.output

    def test_dropped_clause_shown_with_reason(self, tmp_path):
        config_path = datagen.write_project(tmp_path, planner="scripted", dim=64, seed=3)
        fixture = tmp_path / "llm_fixture.jsonl"
        fixture.write_text(
            json.dumps(
                {
                    "prompt_substring": "User question: odd query",
                    "response": '{"DATA_TIMELINE": {"$eq": "x"}, "BRAND": {"$eq": "Nike"}}',
                }
            )
            + "\n",
            encoding="utf-8",
        )
        result = runner.invoke(main, ["--config", str(config_path), "plan", "odd query"])
        assert result.exit_code == 0
        assert "dropped: DATA_TIMELINE (unknown column)" in result.output
        assert '"BRAND": {"$eq": "Nike"}' in result.output

    def test_json_format(self, project):
        result = invoke(project, "--format", "json", "plan", "sturdy reliable paintball from Spyder")
        assert result.exit_code == 0
        data = json.loads(result.output)
        assert data["filter"] == {"BRAND": {"$eq": "Spyder"}, "CATEGORY": {"$in": ["paintball"]}}

    def test_no_refine_echoes_input(self, rules_project):
        result = invoke(rules_project, "plan", "--no-refine", "colorful playful socks")
        assert "refined query: colorful playful socks" in result.output


class TestSearch:
    def test_hyst_puts_constraint_satisfying_item_first(self, project):
        result = invoke(project, "search", "sturdy reliable paintball from Spyder", "--method", "hyst", "--k", "3")
        assert result.exit_code == 0
        first = result.output.splitlines()[0].split("\t")
        assert first[0] == "1"
        assert first[1] == "t00"

    def test_linearized_retrieves_the_decoy(self, project):
        result = invoke(project, "search", "sturdy reliable paintball from Spyder", "--method", "linearized", "--k", "1")
        assert result.output.splitlines()[0].split("\t")[1] == "x00"

    def test_k_zero_is_usage_error(self, project):
        result = invoke(project, "search", "anything", "--k", "0")
        assert result.exit_code != 0

    def test_unknown_method_rejected(self, project):
        result = invoke(project, "search", "anything", "--method", "bm42")
        assert result.exit_code != 0

    def test_same_invocation_twice_identical_bytes(self, project):
        args = ("search", "sturdy reliable paintball from Spyder", "--method", "bm25", "--k", "5")
        first = invoke(project, *args)
        second = invoke(project, *args)
        assert first.output == second.output

    def test_run_file_format(self, project, tmp_path):
        run_file = tmp_path / "run.tsv"
        result = invoke(
            project,
            "search",
            "sturdy reliable paintball from Spyder",
            "--method",
            "hyst",
            "--k",
            "2",
            "--run-file",
            str(run_file),
            "--query-id",
            "q42",
        )
        assert result.exit_code == 0
        lines = run_file.read_text(encoding="utf-8").splitlines()
        fields = lines[0].split("\t")
        assert fields[0] == "q42"
        assert fields[1] == "t00"
        assert fields[2] == "1"
        assert fields[4] == "hyst"

    def test_missing_artifacts_is_error(self, tmp_path):
        config_path = datagen.write_project(tmp_path, planner="rules", dim=64, seed=3)
        result = runner.invoke(main, ["--config", str(config_path), "search", "x"])
        assert result.exit_code != 0
        assert "ingest" in result.output

    def test_filter_starvation_reported(self, rules_project):
        result = invoke(
            rules_project, "search", "sturdy reliable paintball from Kingman", "--method", "hyst"
        )
        assert result.exit_code == 0
        assert "zero records" in result.output


class TestEval:
    def test_all_methods_table(self, project):
        result = invoke(project, "eval", str(project / "queries.tsv"), str(project / "qrels.tsv"))
        assert result.exit_code == 0, result.output
        lines = result.output.splitlines()
        assert lines[0].startswith("Method")
        labels = [line.split()[0] for line in lines[2:8]]
        assert labels == ["bm25", "dense", "bm25+dense", "rrf", "linearized", "hyst"]
        assert "*" in result.output
        assert "queries: 30" in result.output

    def test_subset_of_methods(self, project):
        result = invoke(
            project, "eval", str(project / "queries.tsv"), str(project / "qrels.tsv"),
            "--methods", "bm25,hyst",
        )
        lines = [line.split()[0] for line in result.output.splitlines()[2:4]]
        assert lines == ["bm25", "hyst"]

    def test_unknown_method_listed(self, project):
        result = invoke(
            project, "eval", str(project / "queries.tsv"), str(project / "qrels.tsv"),
            "--methods", "bm25,wat",
        )
        assert result.exit_code != 0
        assert "wat" in result.output

    def test_json_format_parses_as_report(self, project):
        result = invoke(
            project, "--format", "json", "eval",
            str(project / "queries.tsv"), str(project / "qrels.tsv"), "--methods", "hyst",
        )
        report = EvalReport.from_json(result.output)
        assert report.query_count == 30
        assert report.rows[0].label == "hyst"

    def test_ablate_refine_two_labeled_rows(self, project):
        result = invoke(
            project, "--format", "json", "eval",
            str(project / "queries.tsv"), str(project / "qrels.tsv"), "--ablate-refine",
        )
        report = EvalReport.from_json(result.output)
        assert [row.label for row in report.rows] == ["w/o query refinement", "full"]
        assert all(row.method == "hyst" for row in report.rows)
        assert set(report.rows[0].metrics) == {"P@1", "P@5", "P@10", "R@20", "MRR"}

    def test_qrels_for_unknown_query_listed(self, project, tmp_path):
        bad_qrels = tmp_path / "bad_qrels.tsv"
        bad_qrels.write_text("ghost\tt00\n", encoding="utf-8")
        result = invoke(project, "eval", str(project / "queries.tsv"), str(bad_qrels))
        assert result.exit_code != 0
        assert "ghost" in result.output

    def test_run_file_written(self, project, tmp_path):
        run_file = tmp_path / "all.tsv"
        result = invoke(
            project, "eval", str(project / "queries.tsv"), str(project / "qrels.tsv"),
            "--methods", "hyst", "--run-file", str(run_file),
        )
        assert result.exit_code == 0
        lines = run_file.read_text(encoding="utf-8").splitlines()
        assert all(len(line.split("\t")) == 5 for line in lines)
        assert any(line.startswith("adv00\tt00\t1\t") for line in lines)

    def test_jobs_parallelism_matches_serial(self, project):
        args = ("eval", str(project / "queries.tsv"), str(project / "qrels.tsv"), "--methods", "hyst,bm25")
        serial = invoke(project, *args)
        parallel = runner.invoke(
            main, ["--config", str(project / "hyst.yaml"), "--jobs", "4", *args]
        )
        assert serial.output == parallel.output
