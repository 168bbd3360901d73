import numpy as np
import pytest
import yaml

from gfou import cli
from gfou.errors import ComparisonViolation, ConfigurationError, NumericalError, SpectralTruncationError
from gfou.gausscore import GridField, build_grid, half_space
from gfou.utils import read_csv, write_csv


def write_config(tmp_path, data):
    path = tmp_path / "experiment.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


@pytest.fixture
def compare_config(tmp_path):
    return write_config(tmp_path, {
        "common": {"s": 0.5, "resolution": 400},
        "compare": {"domain": {"kind": "half-space", "lam": 0.3}, "datum": {"family": "constant", "value": 1.0}},
        "kernel": {"x": [0.5, 1.0, 2.0, 3.0, 4.0]},
        "regularity": {"domain": {"kind": "half-space", "lam": 0.0}, "count": 2},
    })


class TestConfig:
    def test_sections_and_flags(self):
        data = {"common": {"s": 0.25, "resolution": 200}, "solve": {"resolution": 300, "route": "x"}}
        cfg = cli.build_config("solve", data, {"resolution": 500, "seed": None})
        assert cfg.s == 0.25
        assert cfg.resolution == 500
        assert cfg.options == {"route": "x"}

    def test_digest_ignores_the_output_directory(self):
        a = cli.build_config("solve", {}, {"out": "a"})
        b = cli.build_config("solve", {}, {"out": "b"})
        assert a.digest == b.digest
        assert len(a.digest) == 16

    @pytest.mark.parametrize("flags", [{"s": 1.5}, {"resolution": 32}, {"s": "half"}])
    def test_invalid(self, flags):
        with pytest.raises(ConfigurationError):
            cli.build_config("solve", {}, flags)

    def test_unreadable_file(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("common: [unclosed", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            cli.load_config(str(path))

    def test_domain_presets(self):
        assert cli.build_domain({"kind": "interval", "a": 1, "b": 3}).b == 3.0
        disk = cli.build_domain({"kind": "disk", "n": 21})
        square = cli.build_domain({"kind": "square", "n": 21})
        assert disk.dim == 2 and disk.measure < square.measure
        with pytest.raises(ConfigurationError):
            cli.build_domain({"kind": "annulus"})


class TestFieldCsv:
    def test_round_trip_is_bit_exact(self, tmp_path):
        dom = half_space(0.0)
        rule = build_grid(dom, 100)
        f = GridField.from_function(dom, rule, lambda x: np.sin(3.0 * x) * np.exp(-x), "wave")
        path = cli.export_field_csv(f, tmp_path / "wave.csv")
        g = cli.load_field_csv(path, dom, rule)
        assert np.array_equal(g.values, f.values)
        assert g.label == "wave"

    def test_empty_field(self, tmp_path):
        path = write_csv(tmp_path / "empty.csv", ["x1", "value"], [])
        dom = half_space(0.0)
        with pytest.raises(ConfigurationError, match="empty field"):
            cli.load_field_csv(path, dom, build_grid(dom, 100))

    def test_mismatched_grid(self, tmp_path):
        dom = half_space(0.0)
        f = GridField.from_function(dom, build_grid(dom, 100), lambda x: x)
        path = cli.export_field_csv(f, tmp_path / "f.csv")
        with pytest.raises(ConfigurationError, match="row 1"):
            cli.load_field_csv(path, dom, build_grid(dom, 120))

    def test_missing_nodes(self, tmp_path):
        dom = half_space(0.0)
        rule = build_grid(dom, 100)
        path = write_csv(tmp_path / "one.csv", ["x1", "value"], [(rule.x[0], 1.0)])
        with pytest.raises(ConfigurationError, match="no value"):
            cli.load_field_csv(path, dom, rule)


class TestCommands:
    def test_compare_confirms(self, tmp_path, compare_config):
        out = tmp_path / "out"
        assert cli.main(["compare", "--config", compare_config, "--out", str(out)]) == 0
        assert "verdict: confirmed" in (out / "report.txt").read_text(encoding="utf-8")
        header, rows, comments = read_csv(out / "profiles.csv")
        assert header == ["r", "U", "Psi", "u_star", "psi_star"]
        assert rows.shape[0] > 0
        assert any(c.startswith("config_hash: ") for c in comments)

    def test_compare_is_deterministic(self, tmp_path, compare_config):
        for name in ("a", "b"):
            assert cli.main(["compare", "--config", compare_config, "--out", str(tmp_path / name)]) == 0
        first = (tmp_path / "a" / "profiles.csv").read_bytes()
        assert first == (tmp_path / "b" / "profiles.csv").read_bytes()

    def test_bad_order(self, tmp_path, compare_config):
        assert cli.main(["compare", "--config", compare_config, "--out", str(tmp_path), "--s", "1.5"]) == 1

    def test_low_resolution(self, tmp_path):
        assert cli.main(["solve", "--out", str(tmp_path), "--resolution", "32"]) == 1

    def test_unknown_datum(self, tmp_path):
        path = write_config(tmp_path, {"solve": {"datum": {"family": "noise"}}})
        assert cli.main(["solve", "--config", path, "--out", str(tmp_path / "out")]) == 1

    def test_kernel_table(self, tmp_path, compare_config):
        out = tmp_path / "out"
        assert cli.main(["kernel", "--config", compare_config, "--out", str(out)]) == 0
        header, rows, comments = read_csv(out / "kernel.csv")
        assert header == ["x", "y", "G", "G1", "G2", "G3"]
        assert len(rows) == 20
        for row in rows:
            G, G1, G2, G3 = row[2:]
            assert abs(G - (G1 + G2 + G3)) <= 1e-9 * max(1.0, G)
        assert any(c.startswith("config_hash: ") for c in comments)

    def test_mehler_table(self, tmp_path):
        path = write_config(tmp_path, {"kernel": {"table": "mehler", "t": 0.5, "x": [0.0, 1.0], "y": [-1.0, 1.0]}})
        out = tmp_path / "out"
        assert cli.main(["kernel", "--config", path, "--out", str(out)]) == 0
        _, rows, _ = read_csv(out / "mehler.csv")
        assert len(rows) == 4
        assert np.all(rows[:, 3] > 0.0)

    @pytest.mark.parametrize("subcommand, name", [
        ("solve", "solution.csv"),
        ("extend", "extension.csv"),
        ("rearrange", "profile.csv"),
        ("regularity", "ratios.csv"),
    ])
    def test_outputs(self, tmp_path, compare_config, subcommand, name):
        out = tmp_path / "out"
        assert cli.main([subcommand, "--config", compare_config, "--out", str(out)]) == 0
        header, rows, _ = read_csv(out / name)
        assert header
        assert rows.shape[0] > 0


class TestExitCodes:
    def run_compare(self, tmp_path, compare_config):
        return cli.main(["compare", "--config", compare_config, "--out", str(tmp_path / "out")])

    @pytest.mark.parametrize("exc, code", [
        (ComparisonViolation("gap"), 2),
        (SpectralTruncationError("too few nodes"), 3),
        (NumericalError("diverged"), 4),
        (RuntimeError("boom"), 4),
    ])
    def test_mapping(self, tmp_path, compare_config, monkeypatch, exc, code):
        def failing(*args, **kwargs):
            raise exc

        monkeypatch.setattr(cli, "verify_comparison", failing)
        assert self.run_compare(tmp_path, compare_config) == code
