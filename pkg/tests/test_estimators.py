import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from jtfs.estimators import ScatteringTransformer
from jtfs.models import chirp_texture
from jtfs.time_scattering import log_compress, time_scatter

SR = 8000.0
N = 4000


def test_params_and_clone():
    est = ScatteringTransformer(SR, kind="joint", T=0.064)
    params = est.get_params()
    assert params["kind"] == "joint" and params["T"] == 0.064
    other = clone(est).set_params(Q=4)
    assert other.Q == 4 and est.Q == 8


@pytest.mark.parametrize("transform", ["s1", "time", "time+freq", "joint"])
def test_fit_transform_shape(rng, transform):
    X = rng.standard_normal((3, N))
    est = ScatteringTransformer(SR, kind=transform)
    F = est.fit_transform(X)
    assert F.shape == (3, est.n_features_out_)
    assert np.all(np.isfinite(F))


def test_matches_direct(rng):
    X = rng.standard_normal((2, N))
    F = ScatteringTransformer(SR, kind="time").fit_transform(X)
    c = log_compress(time_scatter(X[1], sample_rate=SR), 1e-3)
    expected = np.concatenate([c.s1.values, c.s2], axis=1).mean(axis=0)
    np.testing.assert_allclose(F[1], expected, rtol=1e-12)


def test_frames_concatenated(rng):
    X = rng.standard_normal((2, N))
    a = ScatteringTransformer(SR, frame_average=False, log_eps=None).fit(X)
    F = a.transform(X)
    c = time_scatter(X[0], sample_rate=SR)
    assert F.shape[1] == c.n_frames * (c.s1.values.shape[1] + c.s2.shape[1])


def test_errors(rng):
    X = rng.standard_normal((2, N))
    with pytest.raises(NotFittedError):
        ScatteringTransformer(SR).transform(X)
    with pytest.raises(ValueError):
        ScatteringTransformer(SR, kind="wavelet").fit(X)
    est = ScatteringTransformer(SR).fit(X)
    with pytest.raises(ValueError, match="samples per row"):
        est.transform(X[:, :-10])


def test_pipeline_separates_chirp_directions():
    X = np.stack([chirp_texture(SR, N / SR, direction=d, seed=s).samples
                  for s in range(6) for d in (1, -1)])
    y = np.tile([1, -1], 6)
    pipe = make_pipeline(ScatteringTransformer(SR, kind="joint", T=0.128),
                         StandardScaler(), LogisticRegression(max_iter=1000))
    pipe.fit(X[:8], y[:8])
    assert pipe.score(X[8:], y[8:]) == 1.0
