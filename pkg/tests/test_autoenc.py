import numpy as np
import pytest

from simosec.autoenc import (
    NetParams,
    TrainConfig,
    backward_batch,
    decode,
    encode,
    eve_best_response,
    evaluate,
    forward_batch,
    hard_decision,
    loss_e,
    loss_r,
    loss_total,
    softmax,
    train,
)
from simosec.autoenc.checkpoint import load_checkpoint, save_checkpoint
from simosec.autoenc.gradcheck import gradient_check
from simosec.autoenc.losses import loss_e_grad_logits, loss_r_grad_logits
from simosec.autoenc.net import LayerSpec, Mlp
from simosec.autoenc.system import LinkDraw, batch_losses, decoder_input, draw_links
from simosec.channel import ChannelConfig
from simosec.impair import ImpairmentConfig

CH = ChannelConfig()


@pytest.fixture
def params():
    return NetParams.init(16, 6, np.random.default_rng(3))


@pytest.fixture
def device():
    return ImpairmentConfig.draw_device(np.random.default_rng(11))


# losses


def test_loss_r_examples():
    assert loss_r(np.eye(16)[3], 3) == 0.0
    p = np.zeros(16)
    p[[2, 5]] = 0.5
    assert loss_r(p, 2) == pytest.approx(1.0, abs=1e-15)
    assert loss_r(np.full(16, 1 / 16), 7) == pytest.approx(4.0, abs=1e-12)


def test_loss_r_clamps_zero_probability():
    assert loss_r(np.eye(16)[0], 1) == pytest.approx(-np.log2(1e-12))


def test_loss_e_examples():
    assert loss_e(np.full(16, 1 / 16)) == pytest.approx(-np.log(16), abs=1e-12)
    assert loss_e(np.full(16, 1 / 16)) == pytest.approx(-2.7726, abs=5e-5)
    assert loss_e(np.eye(16)[4]) == 0.0


def test_loss_e_bounds_random():
    rng = np.random.default_rng(0)
    p = softmax(rng.standard_normal((1000, 16)) * rng.uniform(0, 30, (1000, 1)))
    per_row = np.sum(p * np.log(np.maximum(p, 1e-12)), axis=1)
    assert np.all(per_row <= 0) and np.all(per_row >= -np.log(16) - 1e-12)


def test_loss_total_examples():
    assert loss_total(4.0, -2.7726, 0.5) == pytest.approx(0.6137, abs=1e-12)
    assert loss_total(4.0, -2.7726, 1.0) == 4.0
    assert loss_total(4.0, -2.7726, 0.0) == -2.7726
    with pytest.raises(ValueError):
        loss_total(1.0, 1.0, 1.5)


def test_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((5, 16))
    labels = rng.integers(0, 16, 5)
    g_r = loss_r_grad_logits(softmax(z), labels)
    g_e = loss_e_grad_logits(softmax(z))
    eps = 1e-6
    for i, j in [(0, 0), (1, 3), (4, 15), (2, 7)]:
        d = np.zeros_like(z)
        d[i, j] = eps
        fd_r = (loss_r(softmax(z + d), labels) - loss_r(softmax(z - d), labels)) / (2 * eps)
        fd_e = (loss_e(softmax(z + d)) - loss_e(softmax(z - d))) / (2 * eps)
        assert g_r[i, j] == pytest.approx(fd_r, rel=1e-6, abs=1e-10)
        assert g_e[i, j] == pytest.approx(fd_e, rel=1e-6, abs=1e-10)


def test_softmax_is_distribution():
    rng = np.random.default_rng(2)
    p = softmax(rng.standard_normal((500, 16)) * 100)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_hard_decision_ties_and_scaling():
    p = np.array([0.1, 0.4, 0.4, 0.1])
    assert hard_decision(p) == 1
    rng = np.random.default_rng(4)
    z = rng.standard_normal((200, 16))
    for c in (0.01, 1.0, 7.5):
        np.testing.assert_array_equal(hard_decision(softmax(c * z)), hard_decision(softmax(z)))


# networks


def test_layer_spec_validation():
    with pytest.raises(ValueError):
        LayerSpec(0, 4)
    with pytest.raises(ValueError):
        LayerSpec(4, 4, "tanh")
    with pytest.raises(ValueError):
        Mlp([LayerSpec(3, 2)], params=[np.zeros((2, 3)), np.zeros(2)])


def test_architecture(params):
    assert [(s.fan_in, s.fan_out) for s in params.encoder.specs] == [(16, 64), (64, 64), (64, 2)]
    assert [(s.fan_in, s.fan_out) for s in params.legit.specs] == [(24, 128), (128, 128), (128, 16)]
    assert params.encoder.specs[-1].activation == "identity"
    assert params.n_rx == 6 and params.n_messages == 16


def test_mlp_backward_finite_difference():
    rng = np.random.default_rng(5)
    net = Mlp([LayerSpec(3, 5), LayerSpec(5, 2, "identity")], rng)
    x = rng.standard_normal((4, 3))
    w = rng.standard_normal((4, 2))
    out, cache = net.forward(x)
    dx = net.backward(cache, w)
    eps = 1e-6
    for i in range(4):
        for j in range(3):
            d = np.zeros_like(x)
            d[i, j] = eps
            fd = (np.sum(net(x + d) * w) - np.sum(net(x - d) * w)) / (2 * eps)
            assert dx[i, j] == pytest.approx(fd, rel=1e-6, abs=1e-9)


# encode / decode


def test_batch_power_normalization(params):
    rng = np.random.default_rng(6)
    for size in (1, 7, 256):
        x = encode(rng.integers(0, 16, size), params, batch_norm=True)
        assert np.mean(np.abs(x) ** 2) == pytest.approx(1.0, abs=1e-6)
    p2 = NetParams.init(16, 6, np.random.default_rng(3), power_limit=2.5)
    x = encode(rng.integers(0, 16, 256), p2, batch_norm=True)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(2.5, abs=1e-6)


def test_eval_power_frozen_over_uniform_mix(params):
    params.calibrate_power()
    assert np.mean(np.abs(params.constellation()) ** 2) == pytest.approx(1.0, abs=1e-12)
    b = encode(np.array([5, 1, 5]), params)
    assert b[0] == b[2]
    np.testing.assert_array_equal(b, encode(np.array([5, 1, 5]), params))
    assert encode(5, params) == pytest.approx(b[0], abs=1e-12)


def test_decode_outputs_and_dimension_check(params):
    rng = np.random.default_rng(7)
    y = rng.standard_normal((100, 6)) + 1j * rng.standard_normal((100, 6))
    h = rng.standard_normal((100, 6)) + 1j * rng.standard_normal((100, 6))
    p = decode(y, h, params.legit)
    assert p.shape == (100, 16)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
    with pytest.raises(ValueError):
        decode(y[:, :4], h[:, :4], params.legit)
    with pytest.raises(ValueError):
        decoder_input(y, h[:, :5])


def test_untrained_decoder_is_uninformative(params):
    rng = np.random.default_rng(8)
    h = (rng.standard_normal((1000, 6)) + 1j * rng.standard_normal((1000, 6))) / np.sqrt(2)
    x = encode(rng.integers(0, 16, 1000), params)
    y = h * x[:, None] + 0.3 * (rng.standard_normal((1000, 6)) + 1j * rng.standard_normal((1000, 6)))
    pmax = decode(y, h, params.legit).max(axis=1).mean()
    assert 1 / 16 < pmax < 3 / 16


def test_out_of_range_message(params):
    with pytest.raises(ValueError):
        encode(16, params)


# forward / backward


def test_forward_shapes_and_determinism(params, device):
    msgs = np.random.default_rng(9).integers(0, 16, 256)
    a = forward_batch(msgs, params, device, CH, np.random.default_rng(1))
    b = forward_batch(msgs, params, device, CH, np.random.default_rng(1))
    assert a[0].shape == a[1].shape == (256, 16)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_noiseless_clean_forward_feeds_h_times_x(params):
    msgs = np.arange(16)
    _, _, cache = forward_batch(msgs, params, None, CH, np.random.default_rng(2))
    links = cache.links
    quiet = LinkDraw(links.h_r, links.h_e, np.zeros_like(links.noise_r), np.zeros_like(links.noise_e),
                     np.zeros_like(links.sigma2))
    _, _, c = forward_batch(msgs, params, None, CH, links=quiet)
    x = encode(msgs, params, batch_norm=True)
    np.testing.assert_array_equal(c.y_r, links.h_r * x[:, None])
    np.testing.assert_array_equal(c.x, x)


def test_gradient_check_with_impairments(params, device):
    rng = np.random.default_rng(10)
    samples = gradient_check(params, rng.integers(0, 16, 32), device, CH, rng, n_params=60)
    valid = [s for s in samples if not s.kink]
    assert len(valid) == 60
    worst = max(s.rel_error for s in valid)
    assert worst < 1e-3, worst
    assert {s.network for s in valid} == {"encoder", "legit", "eve"}


def test_alpha_one_gives_zero_eve_gradients(params, device):
    msgs = np.random.default_rng(12).integers(0, 16, 64)
    _, _, cache = forward_batch(msgs, params, device, CH, np.random.default_rng(0))
    params.zero_grad()
    backward_batch(cache, params, 1.0)
    assert all(np.all(g == 0) for g in params.eve.grads)
    assert any(np.any(g != 0) for g in params.legit.grads)


def test_zero_input_batch_gives_finite_gradients(params):
    for i in range(0, len(params.encoder.params), 2):
        params.encoder.params[i][:] = 0.0
        params.encoder.params[i + 1][:] = 0.0
    msgs = np.arange(16)
    _, _, cache = forward_batch(msgs, params, None, CH, np.random.default_rng(0))
    assert np.all(cache.x == 0)
    params.zero_grad()
    backward_batch(cache, params, 0.5)
    for net in params.networks().values():
        assert all(np.all(np.isfinite(g)) for g in net.grads)


def test_total_loss_affine_in_alpha(params):
    msgs = np.random.default_rng(13).integers(0, 16, 128)
    _, _, cache = forward_batch(msgs, params, None, CH, np.random.default_rng(0))
    vals = {a: batch_losses(cache, a)[2] for a in (0.0, 0.25, 0.5, 1.0)}
    for a in (0.25, 0.5):
        assert vals[a] == pytest.approx((1 - a) * vals[0.0] + a * vals[1.0], abs=1e-12)


def test_backward_rejects_bad_alpha(params):
    _, _, cache = forward_batch(np.arange(4), params, None, CH, np.random.default_rng(0))
    with pytest.raises(ValueError):
        backward_batch(cache, params, -0.1)


# training


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(alpha=1.2)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)


def test_short_training_is_deterministic_and_learns():
    msgs = np.random.default_rng(0).integers(0, 16, 8192)
    # lr raised from the default so three epochs show a clear drop
    cfg = TrainConfig(epochs=3, val_size=2048, seed=5, lr0=3e-3)
    p1, h1 = train(msgs, cfg, None, CH)
    p2, h2 = train(msgs, cfg, None, CH)
    assert h1.as_dict() == h2.as_dict()
    for a, b in zip(p1.encoder.params, p2.encoder.params):
        np.testing.assert_array_equal(a, b)
    assert len(h1.loss_total) == 3
    assert h1.loss_r[-1] < h1.loss_r[0]
    assert h1.val_ber_legit[-1] < h1.val_ber_legit[0]


def test_link_draw_take_slices_every_field(device):
    full = draw_links(40, CH, np.random.default_rng(2), (0.0, 18.0), device)
    idx = np.array([3, 17, 0, 39])
    part = full.take(idx)
    for name in ("h_r", "h_e", "noise_r", "noise_e", "sigma2"):
        np.testing.assert_array_equal(getattr(part, name), getattr(full, name)[idx])
    np.testing.assert_array_equal(part.chain.mixer_phase, full.chain.mixer_phase[idx])
    np.testing.assert_array_equal(part.chain.vco_phase, full.chain.vco_phase[idx])
    assert draw_links(5, CH, np.random.default_rng(2), 10.0, None).take([1]).chain is None


def test_fixed_link_mode_draws_links_once(monkeypatch, device):
    import sys

    train_mod = sys.modules["simosec.autoenc.train"]
    calls = []
    real = train_mod.draw_links

    def counting(batch, *args, **kw):
        calls.append(batch)
        return real(batch, *args, **kw)

    monkeypatch.setattr(train_mod, "draw_links", counting)
    msgs = np.random.default_rng(0).integers(0, 16, 1024)
    cfg = TrainConfig(epochs=2, val_size=256, seed=5, link_mode="fixed")
    _, h1 = train(msgs, cfg, device, CH)
    # one draw covering the whole training set; the rest are validation draws
    assert calls.count(1024) == 1
    _, h2 = train(msgs, cfg, device, CH)
    assert h1.as_dict() == h2.as_dict()
    with pytest.raises(ValueError):
        TrainConfig(link_mode="sometimes")


def test_eve_best_response_deterministic():
    msgs = np.random.default_rng(0).integers(0, 16, 2048)
    cfg = TrainConfig(epochs=2, val_size=512, seed=5)
    base, _ = train(msgs, cfg, None, CH)
    enc_before = [p.copy() for p in base.encoder.params]
    legit_before = [p.copy() for p in base.legit.params]
    a, ha = eve_best_response(base, msgs, cfg, None, CH)
    w1 = [p.copy() for p in a.eve_br.params]
    b, hb = eve_best_response(base, msgs, cfg, None, CH)
    assert ha.as_dict() == hb.as_dict()
    for x, y in zip(w1, b.eve_br.params):
        np.testing.assert_array_equal(x, y)
    # the encoder and legit decoder stay frozen
    for x, y in zip(enc_before, base.encoder.params):
        np.testing.assert_array_equal(x, y)
    for x, y in zip(legit_before, base.legit.params):
        np.testing.assert_array_equal(x, y)


def test_evaluate_counts(params):
    msgs = np.random.default_rng(1).integers(0, 16, 1000)
    res = evaluate(params, msgs, 10.0, None, CH, np.random.default_rng(0))
    assert res["legit"].bits == 4000 and res["legit"].symbols == 1000
    assert 0 <= res["legit"].ber <= 1 and 0 <= res["eve"].ser <= 1


def test_checkpoint_round_trip(tmp_path, params, device):
    params.calibrate_power()
    cfg = TrainConfig(epochs=7)
    path = tmp_path / "m.npz"
    save_checkpoint(path, params, cfg, {"scenario": "impaired"})
    loaded, meta = load_checkpoint(path)
    assert meta["train_config"]["epochs"] == 7 and meta["extra"]["scenario"] == "impaired"
    assert loaded.power_scale == params.power_scale and loaded.eve_br is None
    for name, net in params.networks().items():
        for a, b in zip(net.params, loaded.networks()[name].params):
            assert b.dtype == np.float64
            np.testing.assert_array_equal(a, b)
    msgs = np.arange(16)
    r1 = evaluate(params, msgs, 8.0, device, CH, np.random.default_rng(0))
    r2 = evaluate(loaded, msgs, 8.0, device, CH, np.random.default_rng(0))
    assert r1 == r2
