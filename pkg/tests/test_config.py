import json

import numpy as np
import pytest

from unisplit.problems import (PRESETS, TABLE_PROBLEMS, ConfigError, build_from_config, build_preset, load_config,
                               load_problem, read_sidecar, write_sidecar)
from unisplit.problems.config import PROBLEM_KINDS


def _write(tmp_path, cfg, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestSidecar:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
        write_sidecar(tmp_path / "f.bin", values)
        np.testing.assert_array_equal(read_sidecar(tmp_path / "f.bin", (3, 5)), values)

    def test_layout_is_interleaved_little_endian(self, tmp_path):
        write_sidecar(tmp_path / "f.bin", np.array([1 + 2j, 3 - 4j]))
        raw = np.fromfile(tmp_path / "f.bin", dtype="<f8")
        np.testing.assert_array_equal(raw, [1, 2, 3, -4])

    def test_wrong_size(self, tmp_path):
        write_sidecar(tmp_path / "f.bin", np.zeros(5))
        with pytest.raises(ConfigError):
            read_sidecar(tmp_path / "f.bin", (2, 3))


class TestBuild:
    def test_helmholtz_with_sidecar(self, tmp_path):
        k2 = np.full(32, (2 * np.pi) ** 2 + 0j)
        k2[10:20] *= 2.25
        write_sidecar(tmp_path / "k2.bin", k2)
        cfg = {"problem": "helmholtz1d", "k2": {"sidecar": "k2.bin", "shape": [32]},
               "source": {"re": [0.0] * 16 + [8.0] + [0.0] * 15}, "spacing": [0.125], "absorber_width": 8}
        split = load_problem(_write(tmp_path, cfg))
        assert split.dim == 48
        assert split.certified_V_norm == pytest.approx(0.95)

    def test_helmholtz_dimension_checked(self, tmp_path):
        cfg = {"problem": "helmholtz2d", "k2": 1.0, "source": 0.0, "shape": [8], "spacing": [0.1]}
        with pytest.raises(ConfigError):
            build_from_config(cfg)

    def test_diffusion_scalar_fields(self):
        cfg = {"problem": "diffusion", "shape": [16], "D": 1.0, "a": 0.5, "source": 1.0, "spacing": [0.1]}
        split = build_from_config(cfg)
        assert split.dim == 32

    def test_pantograph_functions(self):
        cfg = {"problem": "pantograph", "lam": 0.5, "a": {"piecewise": [[0, 5.0], [6, [5.0, -10.0]]]},
               "b": 5.0, "x0": {"gaussian": {"center": 1.0, "rate": 50.0}}, "t0": 1.0, "t_end": 3.0, "dt": 0.01}
        split = build_from_config(cfg)
        assert split.dim == 200
        anti = build_from_config({**cfg, "antisymmetric": True})
        assert anti.dim == 400

    def test_schrodinger(self):
        split = build_from_config({"problem": "schrodinger", "double_ring": {"n": 16}})
        assert split.dim == 256

    def test_preset(self):
        split = build_from_config({"problem": "pantograph", "preset": "pantograph"})
        assert split.name == "pantograph"

    @pytest.mark.parametrize("cfg", [
        {"problem": "maxwell"},
        {"problem": "helmholtz1d", "k2": [1.0]},
        {"problem": "helmholtz1d", "preset": "nope"},
        {"problem": "diffusion", "D": 1.0, "a": 0.0, "source": 0.0, "spacing": [0.1]},
        {"problem": "helmholtz1d", "k2": {"re": [1.0, 2.0], "im": [0.0]}, "source": [0, 0], "spacing": [1]},
        {"problem": "pantograph", "lam": 0.5, "a": "x", "b": 1, "x0": 1, "t0": 1, "t_end": 2, "dt": 0.1},
    ])
    def test_invalid(self, cfg):
        with pytest.raises(ConfigError):
            build_from_config(cfg)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_kinds(self):
        assert set(PROBLEM_KINDS) == {"helmholtz1d", "helmholtz2d", "diffusion", "pantograph", "schrodinger"}


class TestCatalog:
    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_presets_are_canonical(self, name):
        split = build_preset(name)
        assert split.name == name
        assert split.certified_V_norm <= 0.95 + 1e-12
        if split.source.data.size:
            assert np.linalg.norm(split.source.data) > 0

    def test_table_rows(self):
        assert len(TABLE_PROBLEMS) == 8 and set(TABLE_PROBLEMS) <= set(PRESETS)

    def test_unknown(self):
        with pytest.raises(ValueError):
            build_preset("nope")

    def test_single(self):
        assert build_preset("pantograph", single=True).source.data.dtype == np.complex64
