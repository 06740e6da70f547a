import pytest

from cinecho.config import (
    DEFAULTS,
    config_hash,
    display_from,
    format_config,
    geometry_from,
    lesion_from,
    load_config,
    parse_config,
    pipeline_from,
)
from cinecho.errors import FormatError
from cinecho.stacks import GEOMETRY_PRESETS


class TestParse:
    def test_empty_text_gives_defaults(self):
        assert parse_config("") == DEFAULTS

    def test_override_and_comment(self):
        config = parse_config(
            "percept.ssr = 14      # coarser sampling\n"
            "\n"
            "# a full-line comment\n"
            "display.l_max = 500\n")
        assert config["percept.ssr"] == 14.0
        assert config["display.l_max"] == 500.0
        assert config["display.l_min"] == DEFAULTS["display.l_min"]

    def test_unknown_key_names_source_line(self):
        with pytest.raises(FormatError, match=r"run\.txt:3: unknown key"):
            parse_config("percept.ssr = 7\n\npercept.ssrr = 7\n",
                         source="run.txt")

    def test_missing_equals_sign(self):
        with pytest.raises(FormatError, match=r"<config>:1: expected"):
            parse_config("percept.ssr 7\n")

    def test_type_coercion_follows_default(self):
        config = parse_config("observer.n_channels = 9\n"
                              "percept.taper = off\n"
                              "sweep.values = 1, 2.5, 7\n"
                              "generator.preset = dataset_a\n")
        assert config["observer.n_channels"] == 9
        assert isinstance(config["observer.n_channels"], int)
        assert config["percept.taper"] is False
        assert config["sweep.values"] == (1.0, 2.5, 7.0)
        assert config["generator.preset"] == "dataset_a"

    def test_bad_int(self):
        with pytest.raises(FormatError, match="expected an integer"):
            parse_config("trial.n_readers = 2.5\n")

    def test_bad_float(self):
        with pytest.raises(FormatError, match="expected a number"):
            parse_config("percept.ssr = seven\n")

    def test_bad_bool(self):
        with pytest.raises(FormatError, match="expected a boolean"):
            parse_config("percept.taper = maybe\n")

    def test_bad_tuple(self):
        with pytest.raises(FormatError, match="comma-separated"):
            parse_config("sweep.values = 1, two, 3\n")

    def test_load_config_none_is_defaults(self):
        assert load_config(None) == DEFAULTS

    def test_load_config_reads_file(self, tmp_path):
        path = tmp_path / "run.txt"
        path.write_text("trial.seed = 99\n", encoding="utf-8")
        assert load_config(path)["trial.seed"] == 99

    def test_load_config_error_names_file(self, tmp_path):
        path = tmp_path / "run.txt"
        path.write_text("nope = 1\n", encoding="utf-8")
        with pytest.raises(FormatError, match="run.txt:1"):
            load_config(path)


class TestCanonicalForm:
    def test_round_trip(self):
        config = parse_config("percept.ssr = 14\nsweep.values = 1,5,9\n")
        assert parse_config(format_config(config)) == config

    def test_round_trip_defaults(self):
        assert parse_config(format_config(dict(DEFAULTS))) == DEFAULTS

    def test_sorted_one_key_per_line(self):
        lines = format_config(dict(DEFAULTS)).splitlines()
        keys = [line.split(" = ")[0] for line in lines]
        assert keys == sorted(DEFAULTS)

    def test_float_values_survive_exactly(self):
        config = dict(DEFAULTS)
        config["percept.slice_rate"] = 0.1 + 0.2  # not representable as 0.3
        again = parse_config(format_config(config))
        assert again["percept.slice_rate"] == config["percept.slice_rate"]


class TestHash:
    def test_stable_across_calls(self):
        assert config_hash(dict(DEFAULTS)) == config_hash(dict(DEFAULTS))

    def test_twelve_hex_digits(self):
        digest = config_hash(dict(DEFAULTS))
        assert len(digest) == 12
        assert all(c in "0123456789abcdef" for c in digest)

    def test_sensitive_to_any_value(self):
        base = config_hash(dict(DEFAULTS))
        for key in ("percept.ssr", "trial.seed", "display.mapping"):
            changed = dict(DEFAULTS)
            changed[key] = (changed[key] + 1
                            if not isinstance(changed[key], str)
                            else "log_luminance")
            assert config_hash(changed) != base

    def test_insertion_order_irrelevant(self):
        forward = dict(DEFAULTS)
        backward = {k: DEFAULTS[k] for k in reversed(list(DEFAULTS))}
        assert config_hash(forward) == config_hash(backward)


class TestBuilders:
    def test_display_from_defaults(self):
        dm = display_from(dict(DEFAULTS))
        assert dm.l_min == 1.05
        assert dm.l_max == 1000.0
        assert dm.bit_depth == 10
        assert dm.mapping == "linear_luminance"

    def test_pipeline_from_defaults(self):
        pipeline = pipeline_from(dict(DEFAULTS))
        assert pipeline.ssr == 7.0
        assert pipeline.slice_rate == 25.0
        assert pipeline.n_channels == 15
        assert pipeline.combiner == "hotelling"

    def test_lesion_from_kind_defaults_resolved(self):
        lesion = lesion_from(dict(DEFAULTS))
        assert lesion.kind == "microcalc"
        # zero diameter/sigma_z in the config resolve to the kind defaults
        assert lesion.diameter_px == 8.0
        assert lesion.sigma_z == 1.0

    def test_geometry_from_preset(self):
        assert geometry_from(dict(DEFAULTS)) == GEOMETRY_PRESETS["dataset_b"]
        config = dict(DEFAULTS)
        config["generator.preset"] = "dataset_a"
        assert geometry_from(config) == GEOMETRY_PRESETS["dataset_a"]

    def test_geometry_from_unknown_preset(self):
        config = dict(DEFAULTS)
        config["generator.preset"] = "dataset_c"
        with pytest.raises(FormatError, match="unknown preset"):
            geometry_from(config)
