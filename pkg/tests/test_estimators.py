import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from okdmd import KDMD, OKDMD, LowRankDMD, baselines, core


@pytest.fixture(scope="module")
def rows(request):
    from okdmd import synthgen

    train, test = synthgen.generate_dataset(*synthgen.desk_config())
    return train.X.T, train.Y.T, test.X.T, test.Y.T


def test_params_round_trip():
    est = OKDMD(kernel="gauss:1", n_components=5, inverse="variational")
    params = est.get_params()
    assert params["kernel"] == "gauss:1" and params["n_components"] == 5
    assert clone(est).get_params() == params
    assert set(LowRankDMD().get_params()) == {"n_components", "rank_tol"}
    assert set(KDMD().get_params()) == {"kernel", "n_components", "rank_tol"}


def test_matches_functional_api(rows):
    X, Y, Xt, _ = rows
    est = OKDMD(kernel="log", n_components=6).fit(X, Y)
    model = core.fit(core.SnapshotSet(X.T, Y.T), "log", 6)
    np.testing.assert_allclose(est.predict(Xt), core.predict(model, Xt.T).T, rtol=1e-12)
    assert est.transform(Xt).shape == (Xt.shape[0], 6)
    np.testing.assert_allclose(est.eigenvalues_, model.lambda_)


def test_kdmd_truncation(rows):
    X, Y, Xt, _ = rows
    est = KDMD(kernel="log", n_components=4).fit(X, Y)
    model = baselines.kdmd_fit(core.SnapshotSet(X.T, Y.T), "log")
    np.testing.assert_allclose(est.predict(Xt, t=3), baselines.kdmd_predict(model, Xt.T, 3, 4).T, rtol=1e-12)
    assert est.transform(Xt[:2]).shape == (2, 20)


def test_lowrank(rows):
    X, Y, _, _ = rows
    est = LowRankDMD(n_components=20).fit(X, Y)
    assert est.model_.kernel.designation == "linear"
    assert est.score(X, Y) > 1 - 1e-10


def test_not_fitted():
    with pytest.raises(NotFittedError):
        OKDMD().predict(np.zeros((1, 3)))


def test_validation(rows):
    X, Y, _, _ = rows
    with pytest.raises(ValueError):
        OKDMD().fit(X, Y[:, :5])
    est = OKDMD(n_components=2).fit(X, Y)
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 5)))
    with pytest.raises(ValueError):
        OKDMD().fit(np.full((3, 2), np.nan), np.zeros((3, 2)))
