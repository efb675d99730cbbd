import numpy as np
import pytest

import loctomo


@pytest.fixture(scope="module")
def phantom():
    return loctomo.make_phantom(shape=(24, 24, 24), count=4, seed=1)


@pytest.fixture(scope="module")
def angles():
    return loctomo.tilt_range(-60, 60, 3)


def test_phantom_shape_and_range(phantom):
    assert phantom.shape == (24, 24, 24)
    nonzero = phantom[phantom != 0]
    assert nonzero.size > 0
    assert nonzero.min() >= 0.5 and nonzero.max() <= 1.5


def test_project_and_noise(phantom, angles):
    stack = loctomo.project(phantom, angles)
    assert stack.shape == (41, 24, 24)
    even, odd = loctomo.add_noise_pair(stack, "gaussian", sigma=0.5, seed=2)
    assert not np.array_equal(even, odd)
    clean_a, clean_b = loctomo.add_noise_pair(stack, "none")
    assert np.array_equal(clean_a, clean_b)


def test_fbp_correlates_with_phantom(phantom):
    full = loctomo.tilt_range(-89, 89, 2)
    rec = loctomo.fbp(loctomo.project(phantom, full), full)
    assert rec.shape == phantom.shape
    assert loctomo.pearson(phantom, rec) > 0.8


def test_filter_annihilates_constants():
    stack = np.full((2, 4, 16), 3.0)
    out = loctomo.filter_stack(stack, "ramp", pad_factor=1)
    assert np.abs(out).max() < 1e-8


def test_fsc_self_not_crossed(phantom):
    curve = loctomo.fsc(phantom, phantom)
    assert np.allclose(curve["fsc"], 1.0)
    assert curve["resolution_0.5"] is None
    masked = loctomo.fsc(phantom, phantom, mask=(2, 2, 2, 20, 20, 20))
    assert len(masked["fsc"]) == len(curve["fsc"])


def test_scalar_metrics(phantom):
    assert loctomo.mse(phantom, phantom) == 0.0
    assert loctomo.pearson(phantom, -phantom) == pytest.approx(-1.0)


def test_wavelet_round_trip():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((10, 8, 12))
    bands = loctomo.dwt3(v, "bior4.4")
    assert len(bands) == 8
    assert bands[0].shape == (5, 4, 6)
    back = loctomo.idwt3(bands, "bior4.4", shape=v.shape)
    assert np.abs(back - v).max() < 1e-10


def test_mrc_and_tlt_round_trip(tmp_path, phantom, angles):
    path = tmp_path / "v.mrc"
    data = phantom.astype(np.float32).astype(np.float64)
    loctomo.write_mrc(data, path, voxel_size=2.0)
    back, voxel = loctomo.read_mrc(path)
    assert np.array_equal(back, data)
    assert voxel == pytest.approx(2.0)
    loctomo.write_tlt(angles, tmp_path / "a.tlt")
    assert np.allclose(loctomo.read_tlt(tmp_path / "a.tlt"), angles)


def test_typed_errors(tmp_path):
    bad = tmp_path / "bad.mrc"
    bad.write_bytes(b"\0" * 100)
    with pytest.raises(loctomo.Error):
        loctomo.read_mrc(bad)
    with pytest.raises(ValueError):
        loctomo.simulate_to(tmp_path / "x", {"patchsize": 21})


def test_pipeline(tmp_path):
    cfg = {
        "volume_size": 24,
        "patch_size": 9,
        "hidden": 8,
        "depth": 1,
        "feature_dim": 4,
        "pe_dim": 8,
        "batch_size": 8,
        "steps": 10,
        "tilt_drop_max": 5,
        "mode": "wavelet",
    }
    report = loctomo.simulate_to(tmp_path / "data", cfg)
    assert report["metrics"]["tilts"] == 41
    train = loctomo.train_to(tmp_path / "m.ckpt", [tmp_path / "data"], config=cfg)
    assert train["metrics"]["out_dim"] == 8

    model = loctomo.Model.load(tmp_path / "m.ckpt")
    assert model.mode == "wavelet"
    assert model.out_dim == 8
    stack, _ = loctomo.read_mrc(tmp_path / "data" / "tilts_even.mrc")
    angles = loctomo.read_tlt(tmp_path / "data" / "angles.tlt")
    rec = model.reconstruct(stack, angles)
    assert rec.shape == (24, 24, 24)
    assert np.isfinite(rec).all()

    patches = np.random.default_rng(1).standard_normal((5, 9, 9))
    out = np.array(model.forward(patches, angles[:5]))
    assert np.allclose(model.forward(3.0 * patches, angles[:5]), 3.0 * out)


def test_config_defaults():
    d = loctomo.config_defaults()
    assert d["patch_size"] == "21"
    assert d["filter"] == "cosine_ramp"
