import math

import numpy as np
import pytest

import lagvort


def test_plane_kernel_closed_form():
    kx, ky = lagvort.plane_kernel(1.0, 0.0)
    assert kx == pytest.approx(0.0, abs=1e-16)
    assert ky == pytest.approx(1 / (2 * math.pi), rel=1e-15)
    with pytest.raises(lagvort.SingularInputError):
        lagvort.plane_kernel(0.0, 0.0)


def test_disk_kernel_center_source():
    kx, ky = lagvort.disk_kernel((0.5, 0.0), (0.0, 0.0))
    assert abs(kx) < 1e-16
    assert ky == pytest.approx(1 / math.pi, rel=1e-14)
    with pytest.raises(lagvort.DomainError):
        lagvort.disk_kernel((1.5, 0.0), (0.0, 0.0))


def test_regularized_kernel_and_phi():
    _, ky = lagvort.regularized_kernel((1.0, 0.0), (0.0, 0.0), 0.1, domain="plane")
    assert ky == pytest.approx(1 / (2 * math.pi * 1.01), rel=1e-15)
    phi = lagvort.modulus_phi(np.array([0.0, math.exp(-1.0), 1.0, 3.0]))
    assert phi == pytest.approx([0.0, 2 / math.e, 1.0, 1.0])


def test_velocity_direct_matches_treecode():
    rng = np.random.default_rng(3)
    r = 0.9 * np.sqrt(rng.uniform(size=3000))
    a = rng.uniform(0, 2 * math.pi, size=3000)
    pos = np.column_stack([r * np.cos(a), r * np.sin(a)])
    gam = rng.uniform(0.5, 1.5, size=3000) / 3000
    tgt = pos[:200]
    ud = lagvort.velocity(pos, gam, tgt, 0.01)
    ut = lagvort.velocity(pos, gam, tgt, 0.01, strategy="treecode")
    err = np.max(np.linalg.norm(ut - ud, axis=1)) / np.max(np.linalg.norm(ud, axis=1))
    assert err <= 1e-4


def test_forward_flow_conserves_circulation():
    spec = lagvort.disk_patch((0.3, 0.1), 0.25)
    hist = lagvort.forward_flow(spec, T=0.2, dt=0.05, h=0.04)
    assert list(hist.times) == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2])
    assert hist.positions(0.2).shape == (hist.particle_count, 2)
    assert hist.total_circulation(0.2) == pytest.approx(hist.total_circulation(0.0), rel=1e-12)
    assert hist.valid
    labels = hist.labels()
    back = hist.backward_flow(hist.positions(0.2), 0.2)
    assert np.mean(np.linalg.norm(back - labels, axis=1)) == pytest.approx(hist.composition_defect(0.2))
    vals = hist.solution(np.array([[0.3, 0.1], [-0.8, 0.0]]), 0.0)
    assert list(vals) == [1.0, 0.0]
    with pytest.raises(lagvort.HistoryError):
        hist.positions(0.07)


def test_eval_vorticity_and_config_errors():
    spec = {"kind": "oscillatory", "base": lagvort.disk_patch((0.0, 0.0), 0.5), "amplitude": 1.0, "frequency": 4}
    v = lagvort.eval_vorticity(spec, np.array([[math.pi / 8, 0.0], [0.6, 0.0]]))
    assert v == pytest.approx([2.0, 0.0])
    with pytest.raises(lagvort.ConfigError):
        lagvort.eval_vorticity({"kind": "sheet"}, np.zeros((1, 2)))
    with pytest.raises(lagvort.ConfigError):
        lagvort.run_experiment("simulate", ["numerics.nope=1"])


def test_run_experiment_summary(tmp_path):
    s = lagvort.run_experiment(
        "simulate", ["numerics.T=0.1", "numerics.dt=0.05", "numerics.h=0.05"], out=str(tmp_path)
    )
    assert s["status"] == "pass"
    assert s["config"]["numerics.T"] == "0.1"
    assert (tmp_path / "summary.json").exists()
    assert (tmp_path / "history" / "manifest.json").exists()
