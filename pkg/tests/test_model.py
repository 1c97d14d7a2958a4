import json

import numpy as np
import pytest

from src.gala.data_io import random_graph
from src.gala.exceptions import DataFormatError, NumericalError, ShapeError
from src.gala.graph_ops import smoothing_operator, spectral_radius
from src.gala.model import (
    ModelParams,
    backward,
    build_layer_specs,
    forward,
    init_params,
    layer_operators,
    load_checkpoint,
    relu_prime,
    save_checkpoint,
    validate_specs,
)
from src.gala.models import ArchitectureSection, LayerSpec
from src.gala.objectives import recon_loss
from tests.helpers import numeric_gradient, relative_error


def linear_smoothing_layer(dim: int = 1) -> LayerSpec:
    return LayerSpec(in_dim=dim, out_dim=dim, operator_kind="smoothing", activation="identity")


def test_build_layer_specs_mirrors_encoder():
    specs = build_layer_specs(5, ArchitectureSection(hidden_dims=[4, 2]))
    assert [(s.in_dim, s.out_dim) for s in specs] == [(5, 4), (4, 2), (2, 4), (4, 5)]
    assert [s.operator_kind for s in specs] == ["smoothing", "smoothing", "stable_sharpening", "stable_sharpening"]
    assert [s.activation for s in specs] == ["relu", "relu", "relu", "identity"]
    validate_specs(specs)


def test_validate_specs_rejects_bad_architectures():
    odd = [linear_smoothing_layer()] * 3
    with pytest.raises(ShapeError, match="even"):
        validate_specs(odd)
    with pytest.raises(ShapeError, match="even"):
        validate_specs([])
    sharpening_encoder = [
        LayerSpec(in_dim=1, out_dim=1, operator_kind="stable_sharpening", activation="relu"),
        linear_smoothing_layer(),
    ]
    with pytest.raises(ShapeError, match="encoder"):
        validate_specs(sharpening_encoder)
    broken_chain = [
        LayerSpec(in_dim=3, out_dim=2, operator_kind="smoothing", activation="relu"),
        LayerSpec(in_dim=4, out_dim=3, operator_kind="stable_sharpening", activation="identity"),
    ]
    with pytest.raises(ShapeError, match="in_dim"):
        validate_specs(broken_chain)


def test_init_params_glorot_bound_and_determinism():
    specs = [LayerSpec(in_dim=4, out_dim=2, operator_kind="smoothing", activation="relu")]
    first = init_params(specs, seed=7)
    second = init_params(specs, seed=7)
    np.testing.assert_array_equal(first.weights[0], second.weights[0])
    assert first.weights[0].shape == (4, 2)
    assert np.all(np.abs(first.weights[0]) <= 1.0)
    assert init_params([], seed=7).weights == []


def test_init_params_identity_scheme():
    specs = [LayerSpec(in_dim=2, out_dim=3, operator_kind="smoothing", activation="relu")]
    np.testing.assert_array_equal(init_params(specs, 0, "identity", 2.0).weights[0], 2.0 * np.eye(2, 3))
    with pytest.raises(ValueError):
        init_params(specs, 0, "orthogonal")


def test_forward_single_smoothing_layer(path2):
    specs = [linear_smoothing_layer()]
    trace = forward(np.array([[2.0], [0.0]]), ModelParams([np.eye(1)]), [smoothing_operator(path2)], specs)
    np.testing.assert_allclose(trace.reconstruction, [[1.0], [1.0]])

    zero = forward(np.array([[2.0], [0.0]]), ModelParams([np.zeros((1, 1))]), [smoothing_operator(path2)], specs)
    np.testing.assert_array_equal(zero.reconstruction, np.zeros((2, 1)))


def test_forward_relu_layer_clips_negative_pre_activations(path2):
    spec = LayerSpec(in_dim=2, out_dim=2, operator_kind="smoothing", activation="relu")
    x = np.array([[-1.0, 2.0], [-1.0, 2.0]])
    trace = forward(x, ModelParams([np.eye(2)]), [smoothing_operator(path2)], [spec])
    np.testing.assert_allclose(trace.pre_activations[0], x)
    np.testing.assert_allclose(trace.reconstruction, [[0.0, 2.0], [0.0, 2.0]])


def test_forward_names_the_mismatched_layer(path2):
    specs = [linear_smoothing_layer(), linear_smoothing_layer()]
    params = ModelParams([np.eye(1), np.eye(2)])
    ops = [smoothing_operator(path2)] * 2
    with pytest.raises(ShapeError, match="layer 1"):
        forward(np.ones((2, 1)), params, ops, specs)


def test_smoothing_layer_is_a_contraction():
    rng = np.random.default_rng(21)
    for i in range(50):
        g = random_graph(int(rng.integers(2, 40)), float(rng.uniform(0.05, 0.8)), seed=i, weighted=bool(i % 2))
        dim = int(rng.integers(1, 5))
        x = rng.normal(size=(g.n, dim))
        op = smoothing_operator(g)
        trace = forward(x, ModelParams([np.eye(dim)]), [op], [linear_smoothing_layer(dim)])
        radius = spectral_radius(op)
        assert radius <= 1 + 1e-12
        assert np.linalg.norm(trace.activations[1]) <= np.linalg.norm(x) * radius * (1 + 1e-12)


def test_relu_prime():
    np.testing.assert_array_equal(relu_prime(np.array([[-1.0, 0.0, 2.0]])), [[0, 0, 1]])
    np.testing.assert_array_equal(relu_prime(np.ones((2, 2))), np.ones((2, 2)))
    np.testing.assert_array_equal(relu_prime(-np.ones((2, 2))), np.zeros((2, 2)))


def test_backward_single_linear_layer_by_hand(path2):
    specs = [linear_smoothing_layer()]
    ops = [smoothing_operator(path2)]
    x = np.array([[2.0], [0.0]])
    params = ModelParams([np.array([[3.0]])])
    trace = forward(x, params, ops, specs)
    _, grad_out = recon_loss(x, trace.reconstruction)
    grads, _ = backward(trace, grad_out, params, ops, specs)
    px = ops[0].matrix @ x
    np.testing.assert_allclose(grads[0], px.T @ (trace.reconstruction - x))


def test_backward_zero_output_gradient(path2):
    specs = build_layer_specs(2, ArchitectureSection(hidden_dims=[3]))
    params = init_params(specs, 0)
    ops = layer_operators(path2, specs)
    trace = forward(np.ones((2, 2)), params, ops, specs)
    grads, latent = backward(trace, np.zeros((2, 2)), params, ops, specs)
    assert all(np.all(g == 0) for g in grads)
    assert np.all(latent == 0)


def test_backward_rejects_mismatched_trace(path2):
    specs = build_layer_specs(2, ArchitectureSection(hidden_dims=[3]))
    params = init_params(specs, 0)
    ops = layer_operators(path2, specs)
    trace = forward(np.ones((2, 2)), params, ops, specs)
    with pytest.raises(ShapeError):
        backward(trace, np.zeros((2, 2)), ModelParams(params.weights[:1]), ops, specs)
    with pytest.raises(ShapeError):
        backward(trace, np.zeros((3, 2)), params, ops, specs)


@pytest.mark.parametrize("decoder", ["smoothing", "naive_sharpening", "stable_sharpening"])
def test_reconstruction_gradients_match_finite_differences(decoder):
    checked = 0
    seed = 0
    while checked < 5:
        seed += 1
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 9))
        g = random_graph(n, 0.6, seed)
        if decoder == "naive_sharpening" and np.any(np.asarray(g.affinity.sum(axis=1)).ravel() == 0):
            continue
        x = rng.normal(size=(n, 3))
        specs = build_layer_specs(3, ArchitectureSection(hidden_dims=[4, 2], decoder_kind=decoder))
        params = init_params(specs, seed)
        ops = layer_operators(g, specs)
        trace = forward(x, params, ops, specs)
        relu_pre = [p for p, s in zip(trace.pre_activations, specs) if s.activation == "relu"]
        if min(np.min(np.abs(p)) for p in relu_pre) < 1e-3:
            continue

        _, grad_out = recon_loss(x, trace.reconstruction)
        grads, _ = backward(trace, grad_out, params, ops, specs)
        for m in range(len(specs)):
            loss = lambda w: recon_loss(x, forward(x, params, ops, specs).reconstruction)[0]
            numeric = numeric_gradient(loss, params.weights[m])
            assert relative_error(grads[m], numeric) < 1e-5
        checked += 1


def test_checkpoint_round_trip_is_exact(tmp_path):
    specs = build_layer_specs(3, ArchitectureSection(hidden_dims=[4, 2]))
    params = init_params(specs, 11)
    path = save_checkpoint(tmp_path / "checkpoint.json", specs, params)
    loaded_specs, loaded = load_checkpoint(path)
    assert loaded_specs == specs
    for original, restored in zip(params.weights, loaded.weights):
        np.testing.assert_array_equal(original, restored)


def test_checkpoint_rejects_foreign_files(tmp_path):
    path = tmp_path / "other.json"
    path.write_text('{"format": "something-else", "version": 1}', encoding="utf-8")
    with pytest.raises(DataFormatError):
        load_checkpoint(path)


def corrupt(document: dict, **changes) -> dict:
    damaged = json.loads(json.dumps(document))
    for key, value in changes.items():
        if value is None:
            damaged.pop(key)
        else:
            damaged[key] = value
    return damaged


def test_checkpoint_damage_is_a_data_format_error(tmp_path):
    specs = build_layer_specs(3, ArchitectureSection(hidden_dims=[2]))
    path = save_checkpoint(tmp_path / "checkpoint.json", specs, init_params(specs, 0))
    document = json.loads(path.read_text(encoding="utf-8"))
    bad_layer = dict(document["layers"][0], activation="tanh")
    cases = {
        "missing key": corrupt(document, weights=None),
        "invalid layer": corrupt(document, layers=[bad_layer, document["layers"][1]]),
        "layer not an object": corrupt(document, layers=[1, 2]),
        "shape entry": corrupt(document, weights=[{"shape": [3], "values": [0.0] * 3}] * 2),
        "wrong count": corrupt(document, weights=document["weights"][:1]),
        "wrong shape": corrupt(document, weights=[document["weights"][1], document["weights"][0]]),
    }
    for damaged in cases.values():
        path.write_text(json.dumps(damaged), encoding="utf-8")
        with pytest.raises(DataFormatError, match="checkpoint.json"):
            load_checkpoint(path)

    path.write_text('{"format": "gala-checkpoint",', encoding="utf-8")
    with pytest.raises(DataFormatError, match="invalid JSON"):
        load_checkpoint(path)


def test_forward_overflow_names_the_layer(path2):
    specs = [linear_smoothing_layer(), linear_smoothing_layer()]
    params = ModelParams([np.array([[1e300]]), np.array([[1e300]])])
    with np.errstate(over="ignore"), pytest.raises(NumericalError, match="layer 1") as info:
        forward(np.ones((2, 1)), params, [smoothing_operator(path2)] * 2, specs)
    assert info.value.layer == 1
