import numpy as np
import pytest

from gfou import datacontroller
from gfou.gausscore import half_space, interval
from gfou.utils import read_matrix, write_matrix


class TestMemory:
    def test_memoized(self):
        dom = half_space(0.2)
        a = datacontroller.get_spectral_model(dom, 5, 100)
        b = datacontroller.get_spectral_model(half_space(0.2), 5, 100)
        assert a is b

    def test_distinct_parameters(self):
        dom = half_space(0.2)
        a = datacontroller.get_spectral_model(dom, 5, 100)
        b = datacontroller.get_spectral_model(dom, 5, 120)
        assert a is not b

    def test_key_depends_on_method(self):
        dom = half_space(0.0)
        assert datacontroller.model_key(dom, 5, 100, "fd") != datacontroller.model_key(dom, 5, 100, "hermite")


class TestDiskCache:
    def test_round_trip_is_bit_exact(self, cache_dir):
        dom = interval(1.0, 3.0)
        built = datacontroller.get_spectral_model(dom, 6, 80)
        datacontroller.clear_memory()
        loaded = datacontroller.get_spectral_model(dom, 6, 80)
        assert loaded is not built
        assert np.array_equal(loaded.eigenvalues, built.eigenvalues)
        assert np.array_equal(loaded.vectors, built.vectors)
        assert loaded.rule.same_as(built.rule)
        assert loaded.rule.boundary == built.rule.boundary
        assert loaded.residuals is not None
        assert np.max(loaded.residuals) < 1e-6

    def test_listing(self, cache_dir):
        datacontroller.get_spectral_model(half_space(0.0), 4, 60)
        models = datacontroller.list_models()
        assert len(models) == 1
        assert models[0][1]["K"] == 4
        assert models[0][1]["method"] == "fd"

    def test_corrupted_nodes_are_rejected(self, cache_dir):
        dom = half_space(0.0)
        datacontroller.get_spectral_model(dom, 4, 60)
        key = datacontroller.model_key(dom, 4, 60, "fd")
        path = datacontroller.model_dir_for(key) / "nodes.csv"
        table = read_matrix(path)
        table[3, 0] += 1e-3
        write_matrix(path, ["x1", "weight"], table)
        assert datacontroller.load_model(dom, key) is None

    def test_hermite_models_are_cached(self, cache_dir):
        dom = half_space(0.0)
        built = datacontroller.get_spectral_model(dom, 3, 60, "hermite")
        datacontroller.clear_memory()
        loaded = datacontroller.get_spectral_model(dom, 3, 60, "hermite")
        assert loaded.method == "hermite"
        assert loaded.stiffness is None
        assert np.array_equal(loaded.vectors, built.vectors)


class TestMain:
    def test_needs_a_cache_directory(self, capsys):
        assert datacontroller.main(["list"]) == 1
        assert "not set" in capsys.readouterr().out

    def test_list_show_purge(self, cache_dir, capsys):
        dom = half_space(0.0)
        datacontroller.get_spectral_model(dom, 4, 60)
        key = datacontroller.model_key(dom, 4, 60, "fd")
        assert datacontroller.main(["list"]) == 0
        assert key in capsys.readouterr().out
        assert datacontroller.main(["show", key]) == 0
        assert '"K": 4' in capsys.readouterr().out
        assert datacontroller.main(["purge", "--all"]) == 0
        assert datacontroller.list_models() == []
        assert datacontroller.main(["show", key]) == 1

    def test_purge_needs_a_target(self, cache_dir):
        with pytest.raises(SystemExit):
            datacontroller.main(["purge"])
