"""File-format checks: CSV round trips, config resolution, JSON output.

The writers are held to byte-identical reproducibility and the readers
to precise rejection: every malformed input must be refused with the
file, row, and column in the message, never repaired silently.
"""

import numpy as np
import pytest

from churnsim.difficulty import EpisodeLog
from churnsim.io import (
    ConfigError,
    RunConfig,
    SchemaError,
    atomic_write_text,
    canonical_config_text,
    dumps_report,
    load_config,
    load_datasets,
    read_difficulties_csv,
    read_episodes_csv,
    read_levels_csv,
    write_difficulties_csv,
    write_episodes_csv,
    write_json_report,
    write_levels_csv,
    write_scatter_csv,
)
from churnsim.series import LevelSeries
from churnsim.synthetic import generate_episode_logs, make_dataset


@pytest.fixture
def dataset():
    return make_dataset(n_levels=6, episodes_per_level=15, n_players=200, seed=8)


class TestEpisodesCsv:
    def test_round_trip_preserves_every_record(self, tmp_path, dataset):
        path = tmp_path / "episodes.csv"
        write_episodes_csv(path, dataset.episodes)
        assert read_episodes_csv(path) == dataset.episodes

    def test_rewrite_is_byte_identical(self, tmp_path, dataset):
        path_a = tmp_path / "a.csv"
        path_b = tmp_path / "b.csv"
        write_episodes_csv(path_a, dataset.episodes)
        write_episodes_csv(path_b, read_episodes_csv(path_a))
        assert path_a.read_bytes() == path_b.read_bytes()

    def test_episode_ids_count_within_each_level(self, tmp_path):
        episodes = [EpisodeLog(2, 1.0, True, 5), EpisodeLog(1, 0.5, False, None),
                    EpisodeLog(2, 1.0, True, 0)]
        path = tmp_path / "episodes.csv"
        write_episodes_csv(path, episodes)
        rows = path.read_text().splitlines()[1:]
        assert [r.split(",")[:2] for r in rows] == [
            ["2", "1"], ["1", "1"], ["2", "2"]]

    @pytest.mark.parametrize("row,fragment", [
        ("1,1,0.5,31,30,0,", "moves_used 31 exceeds budget"),
        ("1,1,1.5,10,30,1,20", "cleared_goals_frac 1.5 outside [0, 1]"),
        ("0,1,0.5,30,30,0,", "level_id must be >= 1"),
        ("1,1,0.5,10,30,2,20", "passed_with_human_budget must be 0 or 1"),
        ("1,1,0.5,30,30,0,3", "must be empty when"),
        ("1,1,1.0,10,30,1,19", "moves_left_on_pass 19 != budget 30 minus moves_used 10"),
        ("1,1,1.0,10,30,1,", "moves_left_on_pass must be an integer"),
        ("1,x,1.0,10,30,1,20", "episode_id must be an integer"),
    ])
    def test_bad_rows_name_row_and_column(self, tmp_path, row, fragment):
        path = tmp_path / "episodes.csv"
        header = ("level_id,episode_id,cleared_goals_frac,moves_used,"
                  "moves_budget_human,passed_with_human_budget,moves_left_on_pass")
        path.write_text(f"{header}\n{row}\n")
        with pytest.raises(SchemaError) as err:
            read_episodes_csv(path)
        assert fragment in str(err.value)
        assert ":2:" in str(err.value)

    def test_wrong_header_and_field_count(self, tmp_path):
        path = tmp_path / "episodes.csv"
        path.write_text("level_id,cleared\n1,0.5\n")
        with pytest.raises(SchemaError, match="header must be"):
            read_episodes_csv(path)
        header = ("level_id,episode_id,cleared_goals_frac,moves_used,"
                  "moves_budget_human,passed_with_human_budget,moves_left_on_pass")
        path.write_text(f"{header}\n1,1,0.5\n")
        with pytest.raises(SchemaError, match="expected 7 fields, got 3"):
            read_episodes_csv(path)

    def test_empty_inputs_rejected(self, tmp_path):
        path = tmp_path / "episodes.csv"
        path.write_text("")
        with pytest.raises(SchemaError, match="empty file"):
            read_episodes_csv(path)
        header = ("level_id,episode_id,cleared_goals_frac,moves_used,"
                  "moves_budget_human,passed_with_human_budget,moves_left_on_pass")
        path.write_text(header + "\n")
        with pytest.raises(SchemaError, match="no episode rows"):
            read_episodes_csv(path)


class TestLevelsCsv:
    def test_round_trip_is_exact(self, tmp_path, dataset):
        path = tmp_path / "levels.csv"
        write_levels_csv(path, dataset.truth)
        loaded = read_levels_csv(path)
        assert np.array_equal(loaded.pass_rates, dataset.truth.pass_rates)
        assert np.array_equal(loaded.churn_rates, dataset.truth.churn_rates)
        assert np.array_equal(loaded.level_ids, dataset.truth.level_ids)
        assert loaded.role == "truth"

    def test_out_of_range_rate_names_row_and_column(self, tmp_path):
        path = tmp_path / "levels.csv"
        path.write_text("level_id,human_pass_rate,human_churn_rate\n"
                        "1,0.5,0.1\n2,0.5,1.2\n")
        with pytest.raises(SchemaError) as err:
            read_levels_csv(path)
        message = str(err.value)
        assert ":3:" in message and "human_churn_rate" in message

    def test_level_ids_must_increase(self, tmp_path):
        path = tmp_path / "levels.csv"
        path.write_text("level_id,human_pass_rate,human_churn_rate\n"
                        "2,0.5,0.1\n2,0.5,0.1\n")
        with pytest.raises(SchemaError, match="not greater than"):
            read_levels_csv(path)


class TestDifficultiesAndScatter:
    def test_difficulties_round_trip(self, tmp_path):
        path = tmp_path / "difficulties.csv"
        ids = np.array([1, 3, 7], dtype=np.int64)
        values = np.array([0.1, 0.55, 0.97])
        write_difficulties_csv(path, ids, values)
        loaded_ids, loaded = read_difficulties_csv(path)
        assert np.array_equal(loaded_ids, ids)
        assert np.array_equal(loaded, values)

    def test_scatter_has_position_and_rates(self, tmp_path):
        series = LevelSeries(np.array([0.9, 0.7]), np.array([0.1, 0.2]),
                             level_ids=np.array([10, 20]))
        path = tmp_path / "scatter.csv"
        write_scatter_csv(path, series)
        lines = path.read_text().splitlines()
        assert lines[0] == "level_index,level_id,pass_rate,churn_rate"
        assert lines[1].split(",")[:2] == ["1", "10"]
        assert lines[2].split(",")[:2] == ["2", "20"]


class TestLoadDatasets:
    def test_matching_sets_load(self, tmp_path, dataset):
        write_episodes_csv(tmp_path / "e.csv", dataset.episodes)
        write_levels_csv(tmp_path / "l.csv", dataset.truth)
        episodes, truth = load_datasets(tmp_path / "e.csv", tmp_path / "l.csv")
        assert len(truth) == 6
        assert sorted({e.level_id for e in episodes}) == list(range(1, 7))

    def test_level_set_mismatch_rejected(self, tmp_path, dataset):
        episodes = generate_episode_logs(np.full(5, 0.4), 10, seed=0)
        write_episodes_csv(tmp_path / "e.csv", episodes)
        write_levels_csv(tmp_path / "l.csv", dataset.truth)
        with pytest.raises(SchemaError, match="level sets differ"):
            load_datasets(tmp_path / "e.csv", tmp_path / "l.csv")


class TestConfig:
    def test_defaults_without_a_file(self):
        config = load_config(None)
        assert isinstance(config, RunConfig)
        assert config.n_players == 2000
        assert config.optimizer.population_size == 120
        assert config.optimizer.no_improvement_generations == 100
        assert config.k == 5 and config.repeats == 5
        assert config.seed == 0 and config.out_dir == "out"
        assert config.difficulties_path is None

    def test_file_values_and_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[simulation]\nplayers = 500\ndisable_boredom = true\n"
                        "[cv]\nfolds = 3\n[run]\nseed = 4\n")
        config = load_config(path, seed=9, out_dir="elsewhere")
        assert config.n_players == 500
        assert config.flags.disable_boredom is True
        assert config.k == 3
        assert config.seed == 9
        assert config.optimizer.seed == 9
        assert config.out_dir == "elsewhere"

    def test_hash_tracks_resolved_settings(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[cv]\nfolds = 3\n")
        a = load_config(path)
        b = load_config(path)
        assert a.config_sha256 == b.config_sha256
        assert load_config(path, seed=1).config_sha256 != a.config_sha256
        assert load_config(None).config_sha256 != a.config_sha256

    def test_unknown_keys_are_errors(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[mystery]\nx = 1\n")
        with pytest.raises(ConfigError, match=r"unknown config section"):
            load_config(path)
        path.write_text("[cv]\nfold = 3\n")
        with pytest.raises(ConfigError, match=r"unknown config key cv.fold"):
            load_config(path)

    @pytest.mark.parametrize("text,fragment", [
        ("[cv]\nfolds = one\n", "cv.folds must be an integer"),
        ("[cv]\nfolds = 1\n", "cv.folds must be >= 2"),
        ("[cv]\nscheme = shuffled\n", "cv.scheme"),
        ("[simulation]\ndisable_boredom = maybe\n", "must be a boolean"),
        ("[simulation]\nconstant_difficulty = 1.5\n", "outside [0, 1]"),
        ("[regression]\nridge = -1\n", "ridge must be >= 0"),
        ("[params]\nstd_skill = -0.1\n", "std_skill"),
        ("[optimizer]\npopulation_size = 2\n", "population_size"),
    ])
    def test_bad_values_are_config_errors(self, tmp_path, text, fragment):
        path = tmp_path / "run.cfg"
        path.write_text(text)
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert fragment in str(err.value)

    def test_missing_file_raises_file_not_found(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "absent.cfg")

    def test_canonical_text_is_sorted_and_stable(self):
        text = canonical_config_text({"b": {"y": "2"}, "a": {"x": "1", "w": "0"}})
        assert text == "a.w=0\na.x=1\nb.y=2\n"


class TestJsonReports:
    def test_golden_serialization(self):
        payload = {
            "name": "run",
            "count": 3,
            "ok": True,
            "missing": None,
            "tenth": 0.1,
            "bad": float("nan"),
            "worse": float("inf"),
            "items": [1, 2.5],
            "empty_list": [],
            "empty_map": {},
            "vector": np.array([0.5, 1.0]),
            "np_int": np.int64(7),
            "np_float": np.float64(0.25),
        }
        text = dumps_report(payload)
        assert '"tenth": 0.10000000000000001' in text
        assert '"bad": null' in text and '"worse": null' in text
        assert '"empty_list": []' in text and '"empty_map": {}' in text
        assert '"np_int": 7' in text and '"np_float": 0.25' in text
        assert text == dumps_report(payload)
        assert text.endswith("}\n")

    def test_insertion_order_preserved(self):
        text = dumps_report({"zebra": 1, "apple": 2})
        assert text.index("zebra") < text.index("apple")

    def test_non_string_keys_rejected(self):
        with pytest.raises(TypeError):
            dumps_report({1: "x"})

    def test_write_json_report_round_trips(self, tmp_path):
        import json

        path = tmp_path / "r.json"
        write_json_report(path, {"value": 0.1, "flag": False})
        loaded = json.loads(path.read_text())
        assert loaded == {"value": 0.1, "flag": False}


class TestAtomicWrite:
    def test_writes_and_overwrites_without_leftovers(self, tmp_path):
        path = tmp_path / "sub" / "file.txt"
        atomic_write_text(path, "one")
        assert path.read_text() == "one"
        atomic_write_text(path, "two")
        assert path.read_text() == "two"
        assert [p.name for p in path.parent.iterdir()] == ["file.txt"]
