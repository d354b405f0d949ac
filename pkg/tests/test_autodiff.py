import numpy as np
import pytest

from alignbench import autodiff as ad
from alignbench.autodiff import Graph, reverse_sweep
from alignbench.errors import ContractError
from alignbench.gradcheck import check_gradients, relative_error
from alignbench.rng import Rng64


def test_sum_gradient_is_ones():
    g = Graph()
    x = g.param(Rng64(1).normal((3, 4)))
    grads = reverse_sweep(g, ad.sum(x))
    np.testing.assert_array_equal(grads[x.index], np.ones((3, 4)))


def test_quadratic_gradient_is_twice_x():
    g = Graph()
    v = Rng64(2).normal((5, 1))
    x = g.param(v)
    grads = g.backward(x.T @ x)
    np.testing.assert_allclose(grads[x.index], 2 * v, atol=1e-15)


def test_non_scalar_loss_rejected():
    g = Graph()
    x = g.param(np.ones((2, 2)))
    with pytest.raises(ContractError):
        g.backward(x @ x)


def test_graph_is_topological_and_adjoints_shaped():
    g = Graph()
    rng = Rng64(3)
    a, b = g.param(rng.normal((2, 3))), g.param(rng.normal((3, 2)))
    out = ad.sum(ad.layer_norm(ad.relu(a @ b), np.ones((1, 2)), np.zeros((1, 2))) * 2.0)
    g.backward(out)
    for node in g.nodes:
        assert all(p < node.index for p in node.parents)
        assert node.adjoint.shape == node.value.shape


def test_unused_parameter_gets_zero_gradient():
    g = Graph()
    x, unused = g.param(np.ones((2, 2))), g.param(np.ones((3, 1)))
    grads = g.backward(ad.sum(x))
    np.testing.assert_array_equal(grads[unused.index], np.zeros((3, 1)))


def probe(rng, shape):
    r = rng.normal(shape)
    return lambda node: ad.sum(node * r)


PRIMITIVES = {
    "matmul": (lambda n: n["a"] @ n["b"], {"a": (3, 4), "b": (4, 2)}, (3, 2)),
    "transpose": (lambda n: n["a"].T, {"a": (3, 4)}, (4, 3)),
    "add_broadcast": (lambda n: n["a"] + n["c"], {"a": (3, 4), "c": (1, 4)}, (3, 4)),
    "mul": (lambda n: n["a"] * n["d"], {"a": (3, 4), "d": (3, 4)}, (3, 4)),
    "row_softmax": (lambda n: ad.row_softmax(n["a"]), {"a": (3, 4)}, (3, 4)),
    "relu": (lambda n: ad.relu(n["a"]), {"a": (3, 4)}, (3, 4)),
    "layer_norm": (lambda n: ad.layer_norm(n["a"], n["gain"], n["shift"]),
                   {"a": (3, 4), "gain": (1, 4), "shift": (1, 4)}, (3, 4)),
    "concat": (lambda n: ad.concat([n["a"], n["d"]]), {"a": (3, 4), "d": (3, 4)}, (3, 8)),
    "split": (lambda n: ad.split(n["a"], [1, 3])[1], {"a": (3, 4)}, (3, 3)),
    "sum_axis": (lambda n: ad.sum(n["a"], axis=-1), {"a": (3, 4)}, (3, 1)),
    "normalize_rows": (lambda n: ad.normalize_rows(n["a"]), {"a": (3, 4)}, (3, 4)),
    "sigmoid": (lambda n: ad.sigmoid(n["row"]), {"row": (1, 5)}, (1, 5)),
    "hinge": (lambda n: ad.hinge(n["sq"], 0.2), {"sq": (4, 4)}, (4, 1)),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients(name):
    fn, shapes, out_shape = PRIMITIVES[name]
    rng = Rng64(sum(map(ord, name)))
    inputs = {k: rng.normal(s) for k, s in shapes.items()}
    p = probe(rng, out_shape)
    res = check_gradients(lambda g, n: p(fn(n)), inputs)
    assert res.passed, res.errors


def test_cross_entropy_gradient_and_value():
    rng = Rng64(7)
    z = rng.normal((4, 3))
    t = np.array([0, 2, 1, 2])
    g = Graph()
    loss = ad.cross_entropy(g.constant(z), t)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    assert loss.value[0, 0] == pytest.approx(-logp[np.arange(4), t].mean(), abs=1e-14)
    assert check_gradients(lambda g, n: ad.cross_entropy(n["z"], t), {"z": z}).passed


def test_hinge_matches_definition():
    s = np.array([[0.5, 0.1, 0.45], [0.0, 0.3, 0.9], [0.2, 0.2, 1.0]])
    g = Graph()
    out = ad.hinge(g.constant(s), 0.2).value[:, 0]
    np.testing.assert_allclose(out, [0.15, 0.8, 0.0], atol=1e-15)


UNARY = [ad.relu, ad.row_softmax, ad.normalize_rows, lambda x: x.T,
         lambda x: ad.layer_norm(x, np.ones((1, x.shape[-1])), np.zeros((1, x.shape[-1])))]


def _kink_margin(choices, inputs):
    """Smallest |pre-activation| reaching a relu, so draws near the kink can be rejected."""
    h, margin = inputs["x"], np.inf
    for c in choices:
        if c == 0:
            margin = min(margin, float(np.abs(h).min()))
        h = _apply_plain(c, h, inputs)
    return margin


def _apply_plain(c, h, inputs):
    g = Graph()
    node = g.constant(h)
    if c < len(UNARY):
        return UNARY[c](node).value
    if c == len(UNARY):
        return h @ inputs["y"]
    return h * inputs["y"] + inputs["x"]


@pytest.mark.parametrize("seed", range(12))
def test_random_composed_graphs(seed):
    """Random chains of depth <= 6 mixing unary ops with products against a second input."""
    rng = Rng64(1000 + seed)
    n = 3
    depth = 1 + seed % 6
    choices = rng.integers(len(UNARY) + 2, depth)
    while True:
        inputs = {"x": rng.normal((n, n)), "y": rng.normal((n, n))}
        if _kink_margin(choices, inputs) > 1e-3:
            break
    r = rng.normal((n, n))

    def build(g, nodes):
        h = nodes["x"]
        for c in choices:
            if c < len(UNARY):
                h = UNARY[c](h)
            elif c == len(UNARY):
                h = h @ nodes["y"]
            else:
                h = h * nodes["y"] + nodes["x"]
        return ad.sum(h * r)

    res = check_gradients(build, inputs)
    assert res.passed, (choices, res.errors)


def test_relative_error_guard():
    assert relative_error(np.array([0.0]), np.array([0.0])) == 0.0
    assert relative_error(np.array([1.0]), np.array([1.0 + 1e-6])) == pytest.approx(1e-6, rel=1e-3)
    assert relative_error(np.array([0.0]), np.array([1e-9])) == pytest.approx(0.1)
