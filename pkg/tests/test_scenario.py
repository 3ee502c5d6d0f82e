import json

import pytest

from bogolib.errors import ScenarioError
from bogolib.lattice import Boundary
from bogolib.presets import healing_length_chain
from bogolib.scenario import load_scenario, parse_scenario

BASE = {
    "model": {"boundary": "dirichlet", "box_length_um": 2.0, "n_pixels": 8,
              "mean_density_per_um": 120.0, "healing_length_um": 0.25,
              "temperature_nK": 100.0},
}


def test_physical_params_match_preset():
    sc = parse_scenario(BASE)
    assert sc.physical_params() == healing_length_chain(2.0, 8, "dirichlet")
    assert sc.units.temperature_to_nK(sc.temperature()) == pytest.approx(100.0)


def test_equivalent_inputs():
    alt = {"model": {"boundary": "dirichlet", "box_length_um": 2.0, "pixel_size_um": 0.25,
                     "atom_count": 240, "healing_length_um": 0.25}}
    a = parse_scenario(BASE).physical_params()
    b = parse_scenario(alt).physical_params()
    assert a.n_pixels == b.n_pixels and a.mean_density == pytest.approx(b.mean_density)
    si = {"model": dict(BASE["model"], healing_length_um=None)}
    del si["model"]["healing_length_um"]
    si["model"]["coupling_g_si"] = parse_scenario(BASE).units.coupling_to_si(a.coupling_g)
    assert parse_scenario(si).physical_params().coupling_g == pytest.approx(a.coupling_g)


def test_default_regularization_depends_on_boundary():
    neu = parse_scenario({"model": dict(BASE["model"], boundary="neumann")}).physical_params()
    assert neu.zero_mode_mu == pytest.approx(1e-6 * neu.phi_scale)
    assert parse_scenario(BASE).physical_params().zero_mode_mu == 0.0


@pytest.mark.parametrize("patch,where", [
    ({"model": dict(BASE["model"], colour="red")}, "model.colour"),
    ({"model": BASE["model"], "extra_section": {}}, "extra_section"),
    ({"model": dict(BASE["model"], box_length_um=-1)}, "model.box_length_um"),
    ({"model": BASE["model"], "run": {"gap_tol": 0}}, "run.gap_tol"),
])
def test_rejections_name_the_path(patch, where):
    with pytest.raises(ScenarioError, match=where.replace(".", r"\.")):
        parse_scenario(patch)


def test_exactly_one_of_each_pair():
    bad = {"model": dict(BASE["model"], pixel_size_um=0.25)}
    with pytest.raises(ScenarioError, match="n_pixels"):
        parse_scenario(bad)
    bad = {"model": dict(BASE["model"], n_pixels=None, pixel_size_um=0.3)}
    with pytest.raises(ScenarioError, match="multiple"):
        parse_scenario(bad)


def test_override_and_digest():
    sc = parse_scenario(BASE)
    assert sc.override(boundary=None) is sc
    neu = sc.override(boundary="neumann", mu_relative=0.01)
    assert neu.physical_params().boundary is Boundary.NEUMANN
    assert neu.digest() != sc.digest()
    assert parse_scenario(json.loads(sc.canonical_json())).digest() == sc.digest()
    with pytest.raises(ScenarioError):
        sc.override(mu_relative=-1.0)


def test_sections_required_by_commands():
    sc = parse_scenario({"model": {k: v for k, v in BASE["model"].items()
                                   if k != "temperature_nK"}})
    for fn in (sc.temperature, sc.compression_protocol, sc.otto_spec):
        with pytest.raises(ScenarioError):
            fn()


def test_load_toml_and_json(tmp_path):
    toml = tmp_path / "s.toml"
    toml.write_text('[model]\nboundary = "dirichlet"\nbox_length_um = 2.0\nn_pixels = 8\n'
                    'mean_density_per_um = 120.0\nhealing_length_um = 0.25\n'
                    'temperature_nK = 100.0\n')
    js = tmp_path / "s.json"
    js.write_text(json.dumps(BASE))
    assert load_scenario(toml).digest() == load_scenario(js).digest()
    broken = tmp_path / "b.toml"
    broken.write_text("[model\n")
    with pytest.raises(ScenarioError, match="cannot parse"):
        load_scenario(broken)
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "missing.json")


def test_protocol_and_cycle_conversion():
    sc = parse_scenario(dict(BASE, protocol={"length_ratio_final": 0.9, "total_time_s": 0.1,
                                             "n_steps": 1000},
                             cycle={"ratio": 0.9, "t_comp_s": 0.05, "n_steps": 500,
                                    "T_hot_nK": 60, "T_cold_nK": 30, "gamma_per_s": 200,
                                    "t_bath_s": 0.05}))
    proto = sc.compression_protocol()
    assert sc.units.time_to_s(proto.total_time) == pytest.approx(0.1)
    spec = sc.otto_spec()
    assert spec.expansion.length_ratio_final == pytest.approx(1 / 0.9)
    assert sc.units.temperature_to_nK(spec.hot_bath.temperature) == pytest.approx(60)
    assert spec.hot_bath.coupling_gamma == pytest.approx(200 * sc.units.time_s)
