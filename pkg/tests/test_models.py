import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divgauge.errors import DomainError, FormatError
from divgauge.families import alpha, chi_squared, hellinger, kl
from divgauge.models import ExpWrapper, GaussianStatistics, Mlp, MlpSpec, Submanifold, load_params, save_params


def fd_gradient(model, params, X, upstream, h=1e-5):
    g = np.empty_like(params)
    for i in range(params.size):
        up, dn = params.copy(), params.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (upstream @ model.forward_batch(up, X)[0] - upstream @ model.forward_batch(dn, X)[0]) / (2 * h)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


def check_model(model, rng, n=6, scale=1.0):
    params = model.init(rng) + scale * rng.normal(0, 0.3, model.n_params)
    X = rng.normal(size=(n, model_input_dim(model)))
    out, cache = model.forward_batch(params, X)
    up = rng.normal(size=n)
    return rel_err(model.backward(params, cache, up), fd_gradient(model, params, X, up))


def model_input_dim(model):
    inner = getattr(model, "inner", model)
    if hasattr(inner, "spec"):
        return inner.spec.input_dim
    return inner.stats.d


def test_param_count_matches_layout():
    for spec in (MlpSpec(2, (16,)), MlpSpec(20, (64, 8)), MlpSpec(3, ())):
        assert spec.n_params == sum(sl.stop - sl.start for _, sl, _ in spec.layout())
        assert spec.layout()[-1][1].stop == spec.n_params
    assert MlpSpec(2, (16,)).n_params == 2 * 16 + 16 + 16 + 1


def test_linear_layer_gradient():
    m = Mlp(MlpSpec(3, ()))
    params = np.array([0.5, -1.0, 2.0, 0.25])
    x = np.array([[1.0, 2.0, 3.0]])
    out, cache = m.forward_batch(params, x)
    assert out[0] == pytest.approx(0.5 - 2.0 + 6.0 + 0.25)
    np.testing.assert_allclose(m.backward(params, cache, np.array([2.0])), 2.0 * np.array([1.0, 2.0, 3.0, 1.0]))


def test_zero_upstream_gives_zero_gradient(rng):
    m = Mlp(MlpSpec(4, (8,)))
    p = m.init(rng)
    _, cache = m.forward_batch(p, rng.normal(size=(5, 4)))
    assert not m.backward(p, cache, np.zeros(5)).any()


def test_he_init_and_zero_biases(rng):
    m = Mlp(MlpSpec(50, (200,)))
    p = m.init(rng)
    layers = m.unpack(p)
    W, b = layers[0]
    assert np.abs(W).max() <= np.sqrt(6 / 50)
    assert W.std() == pytest.approx(np.sqrt(2 / 50), rel=0.05)
    assert not b.any() and not layers[1][1].any()


def test_mlp_gradients_on_100_instances(rng):
    m = Mlp(MlpSpec(2, (16,)))
    errs = [check_model(m, rng) for _ in range(100)]
    assert max(errs) < 1e-5


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_exp_wrapper(rng, sign):
    w = ExpWrapper(Mlp(MlpSpec(3, (8, 4))), sign)
    assert w.output_kind == ("positive" if sign > 0 else "negative")
    p = w.init(rng)
    out, _ = w.forward_batch(p, rng.normal(size=(50, 3)) * 10)
    assert np.all(sign * out > 0)
    assert max(check_model(w, rng) for _ in range(20)) < 1e-5


@pytest.mark.parametrize("fam,mode", [(kl(), "generic"), (kl(), "kl-linear"), (hellinger(), "generic"),
                                      (alpha(0.25), "alpha-scale"), (alpha(2.0), "generic"),
                                      (chi_squared(), "generic")])
def test_submanifold_gradients(rng, fam, mode):
    sm = Submanifold(GaussianStatistics(3), fam, mode)
    assert sm.n_params == 9 + (1 if mode == "generic" else 0)
    errs = [check_model(sm, rng, scale=0.3) for _ in range(20)]
    assert max(errs) < 1e-5


def test_submanifold_output_kinds():
    assert Submanifold(GaussianStatistics(2), hellinger()).output_kind == "negative"
    assert Submanifold(GaussianStatistics(2), alpha(2.0)).output_kind == "positive"
    assert Submanifold(GaussianStatistics(2), kl(), "kl-linear").output_kind == "real"
    with pytest.raises(DomainError):
        Submanifold(GaussianStatistics(2), kl(), "alpha-scale")
    with pytest.raises(DomainError):
        Submanifold(GaussianStatistics(2), kl(), "cubic")


def test_submanifold_contains_exact_optimizer():
    # KL optimizer between N(0, 1/2) and N(0, 1) is log(dQ/dP) + 1 = log sqrt 2 + 1 - x^2 / 2
    sm = Submanifold(GaussianStatistics(1), kl(), "generic")
    params = np.array([0.0, -0.5, np.log(np.sqrt(2))])
    x = np.linspace(-2, 2, 7)
    out, _ = sm.forward_batch(params, x[:, None])
    np.testing.assert_allclose(out, np.log(np.sqrt(2)) + 1 - x**2 / 2, rtol=1e-13)


def test_gaussian_statistics():
    T = GaussianStatistics(3)
    assert T.n == 9
    row = T(np.array([[1.0, 2.0, 3.0]]))[0]
    np.testing.assert_allclose(row, [1, 2, 3, 1, 2, 3, 4, 6, 9])
    assert GaussianStatistics(10).n == 65


def test_checkpoint_round_trip(tmp_path, rng):
    p = rng.normal(size=123)
    path = tmp_path / "m.dgpm"
    save_params(path, p)
    raw = path.read_bytes()
    assert raw[:4] == b"DGPM" and len(raw) == 16 + 8 * 123
    np.testing.assert_array_equal(load_params(path), p)


def test_checkpoint_rejects_bad_files(tmp_path):
    path = tmp_path / "bad.dgpm"
    save_params(path, np.ones(4))
    raw = bytearray(path.read_bytes())
    for mutate in (lambda b: b.__setitem__(slice(0, 4), b"XXXX"), lambda b: b.__setitem__(4, 9),
                   lambda b: b.__delitem__(slice(-8, None))):
        data = bytearray(raw)
        mutate(data)
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError):
            load_params(path)
    path.write_bytes(b"DG")
    with pytest.raises(FormatError):
        load_params(path)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), width=st.integers(1, 12), depth=st.integers(0, 2))
def test_mlp_gradient_property(seed, width, depth):
    rng = np.random.default_rng(seed)
    m = Mlp(MlpSpec(3, (width,) * depth))
    assert check_model(m, rng, n=4) < 1e-5
