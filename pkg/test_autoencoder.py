from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from lib.autoencoder import (
    StackedEncoder,
    TiedAutoencoder,
    TrainConfig,
    ae_forward,
    ae_gradient,
    ae_objective,
    greedy_pretrain,
    init_autoencoder,
    stack_forward,
    stack_reconstruct,
    train_autoencoder,
)
from lib.config import GRADCHECK_TOLERANCE
from lib.errors import ConfigError, ShapeMismatchError, TrainingDivergedError
from lib.nn_core import ActivationKind, LossKind, finite_difference_grad, make_rng, relative_error


def test_init_shapes_and_expansion_warning():
    ae = init_autoencoder(8, 3, seed=0)
    assert ae.W.shape == (3, 8) and ae.b.shape == (3,) and ae.b_prime.shape == (8,)
    with pytest.warns(UserWarning):
        init_autoencoder(3, 8, seed=0)


def test_train_config_reports_every_problem():
    with pytest.raises(ConfigError) as info:
        TrainConfig(lr=0, epochs=0, batch_size=0, lam=-1)
    assert len(info.value.problems) == 4


@pytest.mark.parametrize("activation,loss_kind", [
    (ActivationKind.SIGMOID, LossKind.SQUARED_ERROR),
    (ActivationKind.SIGMOID, LossKind.CROSS_ENTROPY),
    (ActivationKind.TANH, LossKind.SQUARED_ERROR),
    (ActivationKind.IDENTITY, LossKind.SQUARED_ERROR),
])
def test_tied_gradient_matches_finite_differences(activation, loss_kind):
    rng = make_rng(11)
    ae = init_autoencoder(6, 4, seed=2, activation=activation, lam=0.01, loss_kind=loss_kind)
    ae = replace(ae, b=rng.normal(0, 0.1, 4), b_prime=rng.normal(0, 0.1, 6))
    x = rng.uniform(0.05, 0.95, size=(6, 5))
    numeric = finite_difference_grad(lambda p: ae_objective(ae.with_params(p), x), ae.params())
    assert relative_error(ae_gradient(ae, x), numeric) <= GRADCHECK_TOLERANCE


def test_training_lowers_objective_and_is_deterministic():
    x = make_rng(0).uniform(0, 1, size=(10, 80))
    cfg = TrainConfig(lr=0.5, epochs=30, batch_size=16, lam=1e-4, seed=4)
    ae = init_autoencoder(10, 4, seed=1)
    first, history = train_autoencoder(ae, x, cfg)
    second, _ = train_autoencoder(ae, x, cfg)
    assert history[-1] < history[0]
    for name, value in first.params().items():
        assert_array_equal(value, second.params()[name])


def test_divergence_is_reported_with_epoch_and_batch():
    x = make_rng(0).normal(0, 10, size=(4, 20))
    ae = init_autoencoder(4, 2, seed=0, activation=ActivationKind.IDENTITY)
    with np.errstate(all="ignore"), pytest.raises(TrainingDivergedError) as info:
        train_autoencoder(ae, x, TrainConfig(lr=1e6, epochs=50, batch_size=20, lam=0.0))
    assert info.value.epoch >= 0 and info.value.batch == 0


def test_input_shape_mismatch():
    ae = init_autoencoder(4, 2, seed=0)
    with pytest.raises(ShapeMismatchError):
        ae_objective(ae, np.zeros((5, 3)))


def test_greedy_pretrain_builds_trained_stack():
    x = make_rng(1).uniform(0, 1, size=(8, 60))
    cfg = TrainConfig(lr=0.5, epochs=3, batch_size=20, seed=0)
    stack = greedy_pretrain([8, 6, 4], x, cfg)
    assert stack.trained
    assert stack.dims == [8, 6, 4]
    assert len(stack.history) == 2 and all(len(h) == 3 for h in stack.history)
    assert stack_forward(stack, x).shape == (4, 60)
    assert stack_reconstruct(stack, x).shape == (8, 60)


def test_single_layer_stack_matches_train_autoencoder():
    x = make_rng(2).uniform(0, 1, size=(6, 40))
    cfg = TrainConfig(lr=0.5, epochs=4, batch_size=10, seed=9)
    stack = greedy_pretrain([6, 3], x, cfg)
    ae, _ = train_autoencoder(init_autoencoder(6, 3, seed=9, lam=cfg.lam), x, cfg)
    assert_array_equal(stack.layers[0].W, ae.W)


def test_stack_rejects_broken_chain():
    with pytest.raises(ShapeMismatchError):
        StackedEncoder((init_autoencoder(8, 4, seed=0), init_autoencoder(5, 2, seed=1)))


def test_divergence_in_stack_names_the_layer():
    x = make_rng(0).normal(0, 10, size=(4, 20))
    cfg = TrainConfig(lr=1e6, epochs=50, batch_size=20, lam=0.0)
    with np.errstate(all="ignore"), pytest.raises(TrainingDivergedError) as info:
        greedy_pretrain([4, 2], x, cfg, activation=ActivationKind.IDENTITY)
    assert "layer 1" in str(info.value)


def test_linear_autoencoder_reaches_pca_optimum():
    rng = make_rng(42)
    basis, _ = np.linalg.qr(rng.normal(size=(8, 2)))
    latents = rng.normal(size=(2, 500)) * np.array([[1.0], [0.6]])
    x = basis @ latents + 0.05 * rng.normal(size=(8, 500))

    eigvals = np.linalg.eigvalsh(np.cov(x, bias=True))
    optimum = float(np.sum(eigvals[:-2]))

    ae = init_autoencoder(8, 2, seed=0, activation=ActivationKind.IDENTITY, lam=0.0)
    cfg = TrainConfig(lr=0.05, epochs=2000, batch_size=500, lam=0.0, seed=0)
    trained, _ = train_autoencoder(ae, x, cfg)
    assert ae_objective(trained, x) <= 1.05 * optimum


def test_forward_uses_the_transposed_weights():
    ae = init_autoencoder(5, 2, seed=3)
    x = make_rng(0).uniform(0, 1, size=(5, 7))
    h, r = ae_forward(ae, x)
    assert h.shape == (2, 7) and r.shape == (5, 7)
    expected = 1.0 / (1.0 + np.exp(-(ae.W.T @ h + ae.b_prime[:, None])))
    np.testing.assert_allclose(r, expected, rtol=1e-12)
    assert ae_objective(replace(ae, lam=0.5), x) > ae_objective(ae, x)


def test_zero_weights_reconstruct_one_half():
    ae = TiedAutoencoder(W=np.zeros((3, 5)), b=np.zeros(3), b_prime=np.zeros(5))
    h, r = ae_forward(ae, make_rng(1).uniform(0, 1, size=(5, 4)))
    assert_array_equal(h, np.full((3, 4), 0.5))
    assert_array_equal(r, np.full((5, 4), 0.5))


def test_identity_weights_give_pure_decay_objective():
    ae = TiedAutoencoder(W=np.eye(2), b=np.zeros(2), b_prime=np.zeros(2), activation=ActivationKind.IDENTITY, lam=1.0)
    x = np.array([[1.0], [2.0]])
    assert_array_equal(ae_forward(ae, x)[1], x)
    assert ae_objective(ae, x) == 2.0


def test_decay_adds_two_lambda_w_to_the_gradient():
    ae = init_autoencoder(5, 3, seed=6, lam=0.0)
    x = make_rng(2).uniform(0, 1, size=(5, 4))
    diff = ae_gradient(replace(ae, lam=0.1), x)["W"] - ae_gradient(ae, x)["W"]
    np.testing.assert_allclose(diff, 0.2 * ae.W, rtol=1e-10, atol=1e-14)


def test_tied_gradient_sums_both_roles_of_w():
    rng = make_rng(8)
    ae = init_autoencoder(5, 3, seed=4, lam=0.01)
    ae = replace(ae, b=rng.normal(0, 0.1, 3), b_prime=rng.normal(0, 0.1, 5))
    x = rng.uniform(0, 1, size=(5, 4))
    n = x.shape[1]

    # same network with an independent decoder matrix V = W.T
    V = ae.W.T.copy()
    h = 1.0 / (1.0 + np.exp(-(ae.W @ x + ae.b[:, None])))
    r = 1.0 / (1.0 + np.exp(-(V @ h + ae.b_prime[:, None])))
    delta_out = 2.0 * (r - x) / n * r * (1.0 - r)
    grad_V = delta_out @ h.T
    delta_hidden = (V.T @ delta_out) * h * (1.0 - h)
    grad_W_enc = delta_hidden @ x.T

    tied = ae_gradient(ae, x)
    np.testing.assert_allclose(tied["W"], grad_W_enc + grad_V.T + 2.0 * ae.lam * ae.W, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(tied["b"], delta_hidden.sum(axis=1), rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(tied["b_prime"], delta_out.sum(axis=1), rtol=1e-10, atol=1e-14)


def test_full_batch_descent_never_increases_objective():
    x = make_rng(3).uniform(0, 1, size=(6, 40))
    cfg = TrainConfig(lr=1e-3, epochs=50, batch_size=40, lam=1e-4, seed=0)
    _, history = train_autoencoder(init_autoencoder(6, 3, seed=1), x, cfg)
    assert len(history) == 50
    assert all(later <= earlier + 1e-12 for earlier, later in zip(history, history[1:]))


def test_later_layers_leave_earlier_ones_untouched():
    x = make_rng(5).uniform(0, 1, size=(8, 60))
    cfg = TrainConfig(lr=0.5, epochs=3, batch_size=20, seed=2)
    shallow = greedy_pretrain([8, 6], x, cfg)
    deep = greedy_pretrain([8, 6, 4], x, cfg)
    for name, value in shallow.layers[0].params().items():
        assert_array_equal(deep.layers[0].params()[name], value)
    untrained = init_autoencoder(6, 4, seed=cfg.seed + 1, lam=cfg.lam)
    assert not np.array_equal(deep.layers[1].W, untrained.W)
