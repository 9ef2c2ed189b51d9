import math
import os
from pathlib import Path

import numpy as np
import pytest

import ekmix

SOURCE = Path(os.environ.get("EKMIX_SOURCE_DIR", Path(__file__).resolve().parents[2]))

SMALL = """
[model]
eps = 0.05
b = [[0.0, 1.0], [1.0, 0.0]]

[[model.species]]
h = "quadratic"
c = 1.0
kappa = "constant"
k = 0.01

[[model.species]]
h = "quadratic"
c = 1.0
kappa = "constant"
k = 0.01

[grid]
n_cells = 32

[solver]
t_end = 0.01
snapshots = 2

[init]
base = 1.0
amplitude = [0.1, -0.1]
velocity_amplitude = 0.1
"""


def pair_model(eps=0.05):
    law = ekmix.EnergyLaw.quadratic(1.0, ekmix.CapillarityKind.constant, 0.01)
    return ekmix.MixtureModel([law, law], np.array([[0.0, 1.0], [1.0, 0.0]]), eps)


def test_version():
    assert ekmix.__version__


def test_diffusion_matrix_pair():
    d = ekmix.diffusion_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, 1.0]))
    np.testing.assert_allclose(d, [[0.25, -0.25], [-0.25, 0.25]], atol=1e-15)
    u = ekmix.solve_constrained(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, 1.0]), np.array([1.0, -1.0]))
    np.testing.assert_allclose(u, [-0.5, 0.5], rtol=1e-14)
    assert ekmix.coercivity_constant(np.array([[0.0, 1.0], [1.0, 0.0]]), np.ones(2)) == pytest.approx(2.0)


def test_bad_friction_matrix():
    law = ekmix.EnergyLaw.quadratic(1.0)
    with pytest.raises(ekmix.ValidationError, match="not symmetric"):
        ekmix.MixtureModel([law, law], np.array([[0.0, 1.0], [2.0, 0.0]]), 0.1)
    assert not ekmix.friction_graph_connected(np.zeros((3, 3)))


def test_quantum_a4_margin():
    law = ekmix.EnergyLaw.gamma_law(1.0, 1.4, ekmix.CapillarityKind.quantum, 0.3)
    assert ekmix.a4_discriminant(law, 1.7) == 0.0
    assert ekmix.check_a4(law)["pass"]


def test_small_run_conserves_mass():
    model = pair_model()
    spec = ekmix.InitSpec()
    spec.base = [1.0, 1.0]
    spec.amplitude = [0.1, -0.1]
    spec.mode = [1, 1]
    spec.velocity_amplitude = 0.1
    init = ekmix.well_prepared_init(model, ekmix.Grid1D(32), spec)
    params = ekmix.SolverParams()
    params.t_end = 0.01
    params.snapshots = 2
    snaps, records = ekmix.run(model, init, params, ekmix.SystemKind.relaxation)
    assert len(snaps) == 3
    assert snaps[-1].t == pytest.approx(0.01)
    m0 = records[0]["masses"]
    m1 = records[-1]["masses"]
    for a, b in zip(m0, m1):
        assert abs(a - b) <= 1e-12 * abs(a)
    assert records[-1]["energy"] <= records[0]["energy"]
    assert ekmix.chi(model, snaps[0], snaps[0]) == 0.0


def test_convergence_rate():
    rows = [(e, 3.0 * e * e) for e in (0.08, 0.04, 0.02)]
    assert ekmix.convergence_rate(rows) == pytest.approx(2.0)


def test_config_round_trip():
    c = ekmix.parse_config(SMALL)
    assert c.n_cells == 32
    again = ekmix.parse_config(ekmix.emit_config(c))
    assert again == c
    assert ekmix.config_hash(again) == ekmix.config_hash(c)
    with pytest.raises(ekmix.ConfigError):
        ekmix.parse_config(SMALL.replace("n_cells = 32", "n_cells = 32\nwhatever = 1"))
    shipped = ekmix.load_config(str(SOURCE / "configs" / "ce_rate.toml"))
    assert shipped.eps_list == [0.08, 0.04, 0.02, 0.01]


def test_compare_starts_at_zero():
    r = ekmix.compare(ekmix.parse_config(SMALL), 0.05)
    assert r["chi"][0] <= 1e-14
    assert math.isfinite(r["sup_chi"])


def test_run_command_exit_codes(tmp_path):
    good = tmp_path / "good.toml"
    good.write_text(SMALL)
    assert ekmix.run_command("simulate", str(good), str(tmp_path / "out"), 1) == 0
    assert (tmp_path / "out" / "snapshots" / "snapshot_0002.csv").exists()
    bad = tmp_path / "bad.toml"
    bad.write_text(SMALL.replace("[[0.0, 1.0], [1.0, 0.0]]", "[[0.0, 1.0], [2.0, 0.0]]"))
    assert ekmix.run_command("simulate", str(bad), str(tmp_path / "bad"), 1) == 1
    assert ekmix.run_command("simulate", str(tmp_path / "missing.toml"), None, 1) == 1
