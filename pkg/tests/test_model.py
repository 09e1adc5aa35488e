import numpy as np
import pytest
import torch

from graphdeeponet.data import BURGERS_DOMAIN
from graphdeeponet.errors import InvalidArgumentError
from graphdeeponet.geometry import DomainSpec, SensorSet, build_knn_graph, regular_sensors
from graphdeeponet.model import (
    DeepONet,
    DeepONetConfig,
    FieldPrediction,
    FourierFeatures,
    GraphDeepONet,
    LatentState,
    ModelConfig,
    TorchGraph,
    deeponet_baseline_forward,
    evaluate_field,
)
from graphdeeponet.rollout import predict_frames

SMALL = dict(width=16, depth=2)


def small_model(domain=BURGERS_DOMAIN, K=3, C=1, dtype=torch.float64, seed=0, **kw):
    torch.manual_seed(seed)
    cfg = ModelConfig(domain=domain, K=K, channels=C, d_lat=8, p=6, M=2, n_fourier_modes=4,
                      encoder=SMALL, phi=SMALL, psi=SMALL, gate=SMALL, feature=SMALL, trunk=SMALL, **kw)
    return GraphDeepONet(cfg).to(dtype)


def random_layout(n, seed=0, domain=BURGERS_DOMAIN):
    pos = np.sort(np.random.default_rng(seed).random(n)) * 16.0
    return SensorSet(pos[:, None], domain)


def randomize_psi_output(model):
    # the zero-initialised last layer would hide bugs in the processor
    with torch.no_grad():
        for p in model.psi[-1].last.parameters():
            p.normal_(0, 0.3)


def test_shapes():
    model = small_model(C=2)
    sensors = random_layout(20)
    graph = build_knn_graph(sensors)
    u = torch.randn(4, 3, 20, 2, dtype=torch.float64)
    latent = model.encode(u, graph)
    assert latent.f.shape == (4, 20, 8)
    preds = model(u, graph, 2, 0.1)
    assert len(preds) == 2 and preds[0].coeffs.shape == (4, 3, 2, 6)
    out = model.rollout_at(u, graph, 2, 0.1, np.linspace(0, 15, 11)[:, None])
    assert out.shape == (4, 6, 11, 2)


def test_encoder_rejects_wrong_bundle():
    model = small_model()
    graph = build_knn_graph(random_layout(10))
    with pytest.raises(InvalidArgumentError):
        model.encode(torch.zeros(1, 2, 10, 1), graph)


def test_encoder_is_pointwise():
    model = small_model()
    graph = build_knn_graph(random_layout(12))
    u = torch.randn(3, 12, 1, dtype=torch.float64)
    f0 = model.encode(u, graph).f
    u2 = u.clone()
    u2[:, 5] += 1.0
    f1 = model.encode(u2, graph).f
    changed = (f1 - f0).abs().sum(-1) > 0
    assert changed.tolist() == [i == 5 for i in range(12)]


def test_masked_messages_reduce_to_psi_of_zero():
    model = small_model()
    graph = build_knn_graph(random_layout(9))
    h = torch.randn(9, 8, dtype=torch.float64)
    out = model.message_passing_step(h, graph, 0, edge_mask=np.zeros(len(graph.receivers)))
    expected = model.psi[0](torch.cat([h, torch.zeros_like(h)], dim=-1))
    torch.testing.assert_close(out, expected, rtol=0, atol=0)


@pytest.mark.parametrize("dtype,tol", [(torch.float32, 1e-5), (torch.float64, 1e-10)])
@pytest.mark.parametrize("n", [5, 17, 50])
def test_permutation_symmetries(dtype, tol, n):
    model = small_model(dtype=dtype, knn=4)
    randomize_psi_output(model)
    sensors = random_layout(n, seed=n)
    graph = build_knn_graph(sensors, 4)
    perm = np.random.default_rng(n).permutation(n)
    pgraph = graph.relabel(perm)
    u = torch.randn(2, 3, n, 1, dtype=torch.float64).to(dtype)
    up = u[..., perm, :]

    lat, plat = model.encode(u, graph), model.encode(up, pgraph)
    torch.testing.assert_close(plat.f, lat.f[..., perm, :], rtol=0, atol=tol)
    lat, plat = model.process(lat), model.process(plat)
    torch.testing.assert_close(plat.f, lat.f[..., perm, :], rtol=0, atol=tol)
    t = [0.1, 0.7]
    torch.testing.assert_close(model.aggregate(plat, t), model.aggregate(lat, t), rtol=0, atol=tol)


def test_zeroed_processor_is_exact_identity():
    model = small_model()
    with torch.no_grad():
        for p in model.psi[-1].last.parameters():
            p.zero_()
    graph = build_knn_graph(random_layout(15))
    lat = model.encode(torch.randn(2, 3, 15, 1, dtype=torch.float64), graph)
    out = model.process(lat)
    assert torch.equal(out.f, lat.f)
    assert out.step_index == 1


def test_fresh_model_starts_with_identity_rollout():
    model = small_model()
    graph = build_knn_graph(random_layout(15))
    preds = model(torch.randn(1, 3, 15, 1, dtype=torch.float64), graph, 3, 0.2)
    # identical latents: each block differs only through its time input
    lat = model.encode(torch.randn(1, 3, 15, 1, dtype=torch.float64), graph)
    assert torch.equal(model.process(model.process(lat)).f, lat.f)
    assert preds[2].times[0] == pytest.approx(7 * 0.2)


def test_process_is_pure():
    model = small_model()
    randomize_psi_output(model)
    graph = build_knn_graph(random_layout(15))
    lat = model.encode(torch.randn(2, 3, 15, 1, dtype=torch.float64), graph)
    f_before = lat.f.clone()
    a, b = model.process(lat), model.process(lat)
    assert torch.equal(a.f, b.f)
    assert torch.equal(lat.f, f_before)


def test_single_node_aggregate_is_feature_network():
    model = small_model()
    graph = TorchGraph(
        positions=torch.tensor([[3.0]], dtype=torch.float64),
        receivers=torch.zeros(0, dtype=torch.long),
        senders=torch.zeros(0, dtype=torch.long),
        rel_pos=torch.zeros(0, 1, dtype=torch.float64),
    )
    lat = model.encode(torch.randn(3, 1, 1, dtype=torch.float64), graph)
    scores = model.attention_scores(lat)
    assert torch.all(scores == 1)
    t = torch.tensor([0.5, 1.5], dtype=torch.float64)
    nu = model.aggregate(lat, t)
    direct = model.feature(torch.cat([t[:, None], lat.f.expand(2, -1)], dim=-1))
    torch.testing.assert_close(nu.reshape(2, -1), direct, rtol=1e-12, atol=1e-12)


def test_attention_normalised_per_channel():
    model = small_model(C=2, dtype=torch.float32)
    graph = build_knn_graph(random_layout(40))
    lat = model.encode(torch.randn(5, 3, 40, 2), graph)
    sums = model.attention_scores(lat).sum(dim=-2)
    torch.testing.assert_close(sums, torch.ones_like(sums), rtol=0, atol=1e-6)


def test_trunk_is_periodic():
    model = small_model()
    x = torch.tensor([[0.0], [16.0], [3.3], [19.3], [-12.7]], dtype=torch.float64)
    tau = model.trunk_basis(x)
    assert torch.equal(tau[0], tau[1])
    torch.testing.assert_close(tau[2], tau[3], rtol=0, atol=1e-12)
    torch.testing.assert_close(tau[2], tau[4], rtol=0, atol=1e-12)


def test_fourier_features_layout():
    ff = FourierFeatures(DomainSpec.box(0.0, 2.0, 1), 3)
    assert ff.out_dim == 7
    out = ff(torch.tensor([[0.5]], dtype=torch.float64))[0]
    theta = 2 * np.pi * 0.25
    expected = [1.0] + [np.cos(n * theta) for n in (1, 2, 3)] + [np.sin(n * theta) for n in (1, 2, 3)]
    np.testing.assert_allclose(out.numpy(), expected, atol=1e-15)


def test_non_periodic_trunk_sees_raw_coordinates():
    dom = DomainSpec.box(-2.5, 2.5, 2, periodic=False)
    ff = FourierFeatures(dom, 4)
    assert ff.out_dim == 2
    x = torch.tensor([[0.3, -1.2]], dtype=torch.float64)
    assert torch.equal(ff(x), x)


def test_evaluate_field_with_constant_basis_sums_coefficients():
    coeffs = torch.randn(2, 4, 1, 5, dtype=torch.float64)
    pred = FieldPrediction(coeffs, torch.arange(4.0), lambda q: torch.ones(q.shape[0], 5, dtype=torch.float64), BURGERS_DOMAIN)
    out = evaluate_field(pred, np.linspace(0, 15, 7)[:, None])
    torch.testing.assert_close(out, coeffs.sum(-1)[..., None, :].expand(2, 4, 7, 1))


def test_evaluate_field_is_linear_in_coefficients():
    model = small_model()
    c1, c2 = torch.randn(2, 3, 1, 6, dtype=torch.float64)
    q = np.linspace(0, 16, 9, endpoint=False)[:, None]
    ev = lambda c: evaluate_field(FieldPrediction(c, torch.zeros(3), model.trunk_basis, model.domain), q)
    torch.testing.assert_close(ev(2.5 * c1 - 0.5 * c2), 2.5 * ev(c1) - 0.5 * ev(c2))


def test_same_weights_run_on_any_layout():
    model = small_model()
    queries = np.linspace(0, 16, 20, endpoint=False)[:, None]
    for n in (50, 37):
        s = random_layout(n, seed=n)
        out = predict_frames(model, torch.randn(1, 3, n, 1, dtype=torch.float64), s, 2, 0.1, queries)
        assert out.shape == (1, 6, 20, 1)
        assert torch.isfinite(out).all()


def test_encoder_called_once_per_rollout():
    model = small_model()
    graph = build_knn_graph(random_layout(10))
    model(torch.randn(1, 3, 10, 1, dtype=torch.float64), graph, 5, 0.1)
    assert model.encode_calls == 1


def test_block_times_measured_from_last_input():
    model = small_model(K=3)
    np.testing.assert_allclose(model.block_times(1, 0.5).numpy(), [0.5, 1.0, 1.5])
    np.testing.assert_allclose(model.block_times(2, 0.5).numpy(), [2.0, 2.5, 3.0])


def test_prediction_periodic_in_space():
    model = small_model(dtype=torch.float32)
    s = random_layout(30)
    x = np.random.default_rng(0).random((100, 1)) * 16
    u = torch.randn(1, 3, 30, 1)
    a = predict_frames(model, u, s, 1, 0.1, x)
    b = predict_frames(model, u, s, 1, 0.1, x + 16.0)
    assert (a - b).abs().max() < 1e-5


def test_config_round_trip():
    model = small_model()
    cfg = ModelConfig.from_dict(model.config.to_dict())
    assert cfg == model.config


# -- DeepONet baseline ------------------------------------------------------------


def _deeponet(n=8, K=2, seed=0):
    torch.manual_seed(seed)
    grid = regular_sensors(BURGERS_DOMAIN, n)
    cfg = DeepONetConfig(grid.positions, K=K, p=5, branch=(16, 2), trunk=(16, 2))
    return DeepONet(cfg).double(), grid


def test_deeponet_trunk_takes_time_and_space():
    model, _ = _deeponet()
    assert model.trunk.layers[0].in_features == 2
    dom2 = DomainSpec.box(0.0, 1.0, 2)
    m2 = DeepONet(DeepONetConfig(regular_sensors(dom2, 3).positions, K=1, p=4, branch=(8, 2), trunk=(8, 2)))
    assert m2.trunk.layers[0].in_features == 3


def test_deeponet_zero_branch_predicts_zero():
    model, grid = _deeponet()
    with torch.no_grad():
        for p in model.branch.last.parameters():
            p.zero_()
    out = model(torch.randn(3, 2, 8, 1, dtype=torch.float64), [0.1, 0.2], grid.positions)
    assert torch.all(out == 0)


def test_deeponet_rejects_other_layouts():
    model, grid = _deeponet()
    moved = regular_sensors(BURGERS_DOMAIN, 8, offset=0.5)
    with pytest.raises(InvalidArgumentError):
        predict_frames(model, torch.zeros(1, 2, 8, 1), moved, 1, 0.1)
    with pytest.raises(InvalidArgumentError):
        model.check_layout(regular_sensors(BURGERS_DOMAIN, 9))
    out = predict_frames(model, torch.zeros(1, 2, 8, 1, dtype=torch.float64), grid, 2, 0.1)
    assert out.shape == (1, 4, 8, 1)


def test_deeponet_scalar_forward_matches_batch():
    model, grid = _deeponet()
    u = torch.randn(2, 8, 1, dtype=torch.float64)
    batch = model(u, [0.3], np.array([[5.0]]))
    assert deeponet_baseline_forward(model, u, 0.3, [5.0]) == pytest.approx(float(batch.detach().reshape(-1)[0]))


def test_deeponet_keeps_layout_under_dtype_casts():
    model, grid = _deeponet()
    model.float()
    model.check_layout(grid)


def test_bundle_time_input_is_rescaled_raw_time():
    bundle = small_model(K=3)
    raw = small_model(K=3, time_input="raw")
    raw.load_state_dict(bundle.state_dict())
    graph = build_knn_graph(random_layout(12))
    u = torch.randn(1, 3, 12, 1, dtype=torch.float64)
    a = bundle(u, graph, 2, 0.2)
    lat = raw.encode(u, graph)
    for r, pred in enumerate(a, start=1):
        lat = raw.process(lat)
        torch.testing.assert_close(pred.coeffs, raw.aggregate(lat, pred.times / 0.6), rtol=1e-12, atol=1e-12)
    with pytest.raises(InvalidArgumentError):
        small_model(time_input="minutes")


def test_block_time_origin_restarts_the_clock_each_block():
    rollout = small_model(K=3)
    block = small_model(K=3, time_origin="block")
    block.load_state_dict(rollout.state_dict())
    graph = build_knn_graph(random_layout(12))
    u = torch.randn(1, 3, 12, 1, dtype=torch.float64)
    a, b = rollout(u, graph, 3, 0.2), block(u, graph, 3, 0.2)
    torch.testing.assert_close(a[0].coeffs, b[0].coeffs, rtol=0, atol=0)
    # physical target times are unchanged; only the decoder input restarts
    for pa, pb in zip(a, b):
        assert torch.equal(pa.times, pb.times)
    # with the identity processor every block decodes the same latent at the same inputs
    assert torch.equal(b[1].coeffs, b[2].coeffs)
    assert not torch.equal(a[1].coeffs, a[2].coeffs)
    with pytest.raises(InvalidArgumentError):
        small_model(time_origin="epoch")
