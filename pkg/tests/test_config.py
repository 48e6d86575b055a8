import json

import pytest

from neckstokes.analysis import DEFAULT_EPS, MeshParams
from neckstokes.config import ConfigError, default, from_dict, load, parse_phi, phi_flux_density


def test_defaults():
    cfg = default()
    assert cfg.eps_list == list(DEFAULT_EPS)
    assert cfg.phi.name == "shear"
    assert cfg.mesh == MeshParams(h_max=0.3, h_min_ratio=6.0, c0=0.25)
    g = cfg.geom()
    assert g.epsilon == 0.04 and g.profile == "circle"
    assert cfg.geom(0.01).epsilon == 0.01


def test_quick_keeps_first_three():
    q = default().quick()
    assert q.eps_list == list(DEFAULT_EPS[:3])
    assert q.mesh.h_max > default().mesh.h_max


@pytest.mark.parametrize("data", [
    {"bogus": 1},
    {"geometry": {"epsilon": -0.1}},
    {"geometry": {"profile": "ellipse"}},
    {"mesh": {"h_max": 0.3, "layers": 5}},
    {"phi": "spin"},
    {"phi": {"matrix": [[0, 1], [0]]}},
    {"eps_list": []},
    {"tolerances": {"grad_slope": 0.5}},
])
def test_schema_rejects(data):
    with pytest.raises(ConfigError):
        from_dict(data)


@pytest.mark.parametrize("eps", [[0.04, 0.04, 0.01], [0.01, 0.04, 0.08]])
def test_eps_must_decrease(eps):
    with pytest.raises(ConfigError, match="strictly decreasing"):
        from_dict({"eps_list": eps})


def test_geometry_mesh_block():
    cfg = from_dict({"geometry": {"mesh": {"h_min": 0.002, "h_max": 0.2}}})
    assert cfg.mesh.h_max == 0.2 and cfg.mesh.h_min == 0.002


def test_tolerance_override():
    cfg = from_dict({"tolerances": {"grad_slope": [-0.7, -0.3], "floor_factor": 4}})
    assert cfg.tolerances == {"grad_slope": (-0.7, -0.3), "floor_factor": 4}


def test_inline_phi_and_flux():
    phi = parse_phi({"matrix": [[1, 0], [0, 1]]})
    assert phi.name == "inline" and phi.offset == (0.0, 0.0)
    assert phi_flux_density(phi) == 2.0
    assert phi_flux_density(parse_phi("mixed")) == 0.0


def test_load_malformed(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{ not json")
    with pytest.raises(ConfigError, match="malformed"):
        load(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load(p)
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.json")


def test_load_roundtrip(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"phi": "rotation", "eps_list": [0.08, 0.04, 0.02]}))
    cfg = load(p)
    assert cfg.phi.name == "rotation" and cfg.eps_list == [0.08, 0.04, 0.02]
