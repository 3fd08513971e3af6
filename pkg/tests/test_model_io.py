import numpy as np
import numpy.testing as npt
import pytest

from venuecca.cca import fit_cca
from venuecca.dataio import DatasetError, PairedDataset
from venuecca.dcca import train_dcca
from venuecca.kcca import fit_kcca
from venuecca.model_io import load_index, load_model, save_index, save_model
from venuecca.neural import TrainConfig
from venuecca.retrieval import VenueIndex


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((5, 60))
    Y = 0.5 * X[:4] + 0.5 * rng.standard_normal((4, 60))
    return X, Y


def test_linear_model_round_trip(data, tmp_path):
    X, Y = data
    model = fit_cca(X, Y, k=3, r=1e-4)
    path = tmp_path / "linear.vcca"
    save_model(model, path)
    loaded = load_model(path)
    npt.assert_array_equal(loaded.Wx, model.Wx)
    npt.assert_array_equal(loaded.rho, model.rho)
    assert loaded.r == model.r and loaded.beta == model.beta
    npt.assert_array_equal(loaded.project(X, "image"), model.project(X, "image"))


def test_kernel_model_round_trip(data, tmp_path):
    X, Y = data
    model = fit_kcca(X, Y, k=2, r=1e-3)
    path = tmp_path / "kernel.vcca"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.sigma_x == model.sigma_x
    assert loaded.kernel == model.kernel
    Z = np.random.default_rng(1).standard_normal((5, 7))
    npt.assert_array_equal(loaded.project(Z, "image"), model.project(Z, "image"))
    npt.assert_array_equal(loaded.rho, model.rho)


def test_deep_model_round_trip(data, tmp_path):
    X, Y = data
    train = PairedDataset(
        X=X,
        Y=Y,
        venue_ids=[f"v{i}" for i in range(60)],
        categories=1 + np.arange(60) % 3,
        coords=np.zeros((60, 2)),
    )
    cfg = TrainConfig(
        learning_rate=1e-3,
        batch_size=30,
        epochs=2,
        k=2,
        hidden_sizes=(6,),
        dropout_rate=0.25,
        beta=0.3,
        r=1e-3,
    )
    model = train_dcca(train, cfg)
    path = tmp_path / "deep.vcca"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.config == cfg
    npt.assert_array_equal(loaded.history_objective, model.history_objective)
    npt.assert_array_equal(loaded.history_epoch, model.history_epoch)
    npt.assert_array_equal(loaded.project(X, "image"), model.project(X, "image"))
    npt.assert_array_equal(loaded.project(Y, "text"), model.project(Y, "text"))
    assert [l.activation for l in loaded.net_x.layers] == [
        l.activation for l in model.net_x.layers
    ]
    assert [l.dropout_rate for l in loaded.net_x.layers] == [
        l.dropout_rate for l in model.net_x.layers
    ]


def test_double_save_is_byte_identical(data, tmp_path):
    X, Y = data
    model = fit_cca(X, Y, k=2, r=1e-4)
    p1, p2 = tmp_path / "a.vcca", tmp_path / "b.vcca"
    save_model(model, p1)
    save_model(model, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_index_round_trip(data, tmp_path):
    X, Y = data
    index = VenueIndex(
        venue_ids=[f"v{i}" for i in range(10)],
        categories=1 + np.arange(10) % 4,
        coords=np.random.default_rng(2).uniform(-1, 1, (10, 2)),
        vectors=np.random.default_rng(3).standard_normal((3, 10)),
    )
    path = tmp_path / "venues.vidx"
    save_index(index, path)
    loaded = load_index(path)
    assert loaded.venue_ids == index.venue_ids
    npt.assert_array_equal(loaded.categories, index.categories)
    npt.assert_array_equal(loaded.coords, index.coords)
    npt.assert_array_equal(loaded.vectors, index.vectors)


def test_kind_mismatch_rejected(data, tmp_path):
    X, Y = data
    model = fit_cca(X, Y, k=2, r=1e-4)
    path = tmp_path / "model.vcca"
    save_model(model, path)
    with pytest.raises(DatasetError, match="kind"):
        load_index(path)

    index = VenueIndex(
        venue_ids=["a"],
        categories=np.array([1]),
        coords=np.zeros((1, 2)),
        vectors=np.zeros((2, 1)),
    )
    ipath = tmp_path / "venues.vidx"
    save_index(index, ipath)
    with pytest.raises(DatasetError, match="kind"):
        load_model(ipath)


def test_corrupt_file_rejected(tmp_path):
    path = tmp_path / "junk.vcca"
    path.write_bytes(b"not a container at all")
    with pytest.raises(DatasetError):
        load_model(path)


def test_unserializable_type_rejected(tmp_path):
    with pytest.raises(TypeError, match="serialize"):
        save_model(object(), tmp_path / "x.vcca")
