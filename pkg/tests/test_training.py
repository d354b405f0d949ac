import numpy as np
import pytest

from alignbench.errors import ContractError
from alignbench.models import CountingModel, RetrievalModel
from alignbench.optim import AdamState, adam_step
from alignbench.rng import Rng64
from alignbench.tasks import CountingConfig, RetrievalConfig, gen_counting, gen_retrieval
from alignbench.training import load_checkpoint, save_checkpoint, train


def test_adam_zero_gradient_leaves_params():
    x = Rng64(1).normal((3, 2))
    out = adam_step(AdamState(), {"x": x}, {"x": np.zeros((3, 2))})
    np.testing.assert_array_equal(out["x"], x)


def test_adam_first_step_is_sign_step():
    x = np.zeros((2, 2))
    g = np.array([[3.0, -0.5], [1e-3, -20.0]])
    out = adam_step(AdamState(lr=0.01), {"x": x}, {"x": g})
    np.testing.assert_allclose(out["x"], -0.01 * np.sign(g), rtol=1e-4)


def test_adam_rejects_bad_gradients():
    state = AdamState()
    with pytest.raises(ContractError):
        state.step({"x": np.zeros((2, 2))}, {"x": np.zeros((2, 3))})
    with pytest.raises(ContractError):
        state.step({"x": np.zeros((2, 2))}, {"y": np.zeros((2, 2))})


def test_adam_quadratic_bowl_decreases_monotonically():
    state = AdamState(lr=1e-2)
    params = {"x": Rng64(2).normal((4, 1))}
    losses = []
    for _ in range(100):
        x = params["x"]
        losses.append(float((x * x).sum()))
        params = state.step(params, {"x": 2 * x})
    assert all(b < a for a, b in zip(losses, losses[1:]))
    assert state.m["x"].shape == state.v["x"].shape == (4, 1)


def _tiny_retrieval():
    s = gen_retrieval(RetrievalConfig(train_size=40, pool_size=2), seed=3)
    m = RetrievalModel.init("general_star", 32, 8, seed=3)
    return m, m.prepare(s.train)


def test_training_is_bitwise_deterministic():
    a, data = _tiny_retrieval()
    b, _ = _tiny_retrieval()
    ra = train(a, data, epochs=3, batch_size=16, lr=1e-3, seed=5)
    rb = train(b, data, epochs=3, batch_size=16, lr=1e-3, seed=5)
    assert ra.losses == rb.losses
    for k in a.params:
        assert a.params[k].tobytes() == b.params[k].tobytes()


def test_training_reduces_loss():
    m, data = _tiny_retrieval()
    res = train(m, data, epochs=15, batch_size=16, lr=1e-2, seed=1)
    assert res.losses[-1] < res.losses[0]
    assert res.epochs_run == 15 and not res.diverged


def test_training_flags_divergence():
    s = gen_counting(CountingConfig(train_size=40, test_size=1), seed=1)
    m = CountingModel.init("dot", 6, 8, seed=1)
    m.params["head.W"] = np.full_like(m.params["head.W"], np.nan)
    res = train(m, m.prepare(s.train), epochs=3, batch_size=16, lr=1e-3, seed=1)
    assert res.diverged and res.epochs_run == 1


def test_stop_fn_ends_early():
    m, data = _tiny_retrieval()
    res = train(m, data, epochs=10, batch_size=16, lr=1e-3, seed=1, stop_fn=lambda ep: ep == 1)
    assert res.epochs_run == 2


def test_checkpoint_round_trip(tmp_path):
    m, _ = _tiny_retrieval()
    path = tmp_path / "model.ckpt"
    save_checkpoint(m.params, path)
    back = load_checkpoint(path)
    assert set(back) == set(m.params)
    for k, v in m.params.items():
        assert back[k].tobytes() == np.atleast_2d(v).tobytes()
    bad = tmp_path / "bad.ckpt"
    bad.write_text("nope\n")
    with pytest.raises(ContractError):
        load_checkpoint(bad)
