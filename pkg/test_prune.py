import numpy as np
import pytest

from data import apply_scaler, fit_scaler, make_rings
from network import ChebyAdaptiveLayer, build_network
from prune import (MaskSet, PruneDivergedError, forward_prune, group_norm, group_prune, layer_statistic,
                   percentile_tau, sweep_percentiles, threshold_prune)
from training import evaluate, train_network


@pytest.fixture
def problem():
    ds = make_rings(120, seed=4)
    X = apply_scaler(fit_scaler(ds), ds.X)
    return X, ds.y


def trained_net(problem, k=3, seed=0):
    X, y = problem
    net = build_network(2, [6], 2, kind="cheby", k=k, rng=np.random.default_rng(seed))
    train_network(net, X, y, lr=0.01, epochs=150, rng=np.random.default_rng(seed))
    return net


def make_fine_tune(problem, epochs=20):
    X, y = problem

    def fine_tune(net, masks):
        return train_network(net, X, y, lr=0.01, epochs=epochs, rng=np.random.default_rng(0), masks=masks)[-1]
    return fine_tune


def make_evaluate(problem):
    X, y = problem
    return lambda net: evaluate(net, X, y, 2)[0]


def test_threshold_prune_known_values():
    params = np.array([0.1, -0.05, 0.3])
    assert threshold_prune(params, 0.2).tolist() == [False, False, True]
    assert threshold_prune(params, 0.0).all()
    assert not threshold_prune(params, np.inf).any()
    with pytest.raises(ValueError):
        threshold_prune(params, -1.0)


def test_group_norm_known_values():
    C = np.array([[[3.0, 4.0], [0.0, 0.0]]])
    assert group_norm(C, 0, 0) == pytest.approx(5.0)
    assert group_norm(C, 0, 1) == 0.0
    assert group_norm(np.ones((1, 1, 4)), 0, 0) == pytest.approx(2.0)
    with pytest.raises(IndexError):
        group_norm(C, 1, 0)
    with pytest.raises(IndexError):
        group_norm(C, 0, 2)


def test_group_prune_masks_whole_groups():
    layer = ChebyAdaptiveLayer(np.array([[[3.0, 4.0], [0.1, 0.0]]]))
    mask = group_prune(layer, 1.0)
    assert mask.tolist() == [[[True, True], [False, False]]]
    assert group_prune(layer, 0.0).all()
    assert not group_prune(layer, 10.0).any()


def test_group_and_threshold_agree_at_k0():
    C = np.random.default_rng(0).normal(size=(3, 4, 1))
    layer = ChebyAdaptiveLayer(C)
    for tau in (0.0, 0.3, 0.8, 2.0):
        assert np.array_equal(group_prune(layer, tau), threshold_prune(C, tau))


def test_compression_is_monotone_in_tau():
    C = np.random.default_rng(1).normal(size=(4, 5, 3))
    layer = ChebyAdaptiveLayer(C)
    previous_threshold = previous_group = -1
    for tau in np.linspace(0.0, 3.0, 13):
        zeroed_threshold = int((~threshold_prune(C, tau)).sum())
        zeroed_group = int((~group_prune(layer, tau)).sum())
        assert zeroed_threshold >= previous_threshold
        assert zeroed_group >= previous_group
        previous_threshold, previous_group = zeroed_threshold, zeroed_group


def test_percentile_tau_zeroes_at_least_that_share():
    values = np.array([4.0, -1.0, 3.0, 2.0])
    tau = percentile_tau(values, 50)
    assert (~threshold_prune(values, tau)).sum() == 2
    assert percentile_tau(values, 0) == 0.0
    assert (~threshold_prune(values, percentile_tau(values, 100))).all()


def test_masks_stay_frozen_through_training(problem):
    X, y = problem
    net = build_network(2, [5], 2, k=2, rng=np.random.default_rng(1))
    masks = MaskSet.full(net)
    masks.set_layer_mask(0, threshold_prune(net.layers[0].C, 0.3))
    train_network(net, X, y, lr=0.05, epochs=30, masks=masks)
    assert not net.layers[0].C[~masks.layer_mask(0)].any()
    assert masks.masks[1].all()


def test_forward_prune_at_median_compresses_half(problem):
    net = trained_net(problem)

    def median(idx, layer):
        return percentile_tau(layer_statistic(layer, "threshold"), 50)

    net, masks, report = forward_prune(net, median, make_fine_tune(problem), evaluate=make_evaluate(problem))
    assert report.compression >= 50.0
    for idx, layer in enumerate(net.layers):
        assert not layer.C[~masks.layer_mask(idx)].any()
    assert report.accuracy_before is not None
    assert report.accuracy_after is not None


def test_forward_prune_first_layer_only(problem):
    net = trained_net(problem)
    _, masks, report = forward_prune(net, 0.2, make_fine_tune(problem), order=[0])
    assert masks.layer_mask(1).all()
    assert report.per_layer[1]["zeroed"] == 0


def test_forward_prune_tau_zero_changes_nothing(problem):
    net = trained_net(problem)
    before = [p.copy() for p in net.parameters()]
    evaluate_fn = make_evaluate(problem)
    net, _, report = forward_prune(net, 0.0, make_fine_tune(problem), evaluate=evaluate_fn)
    assert report.compression == 0.0
    assert report.accuracy_before == report.accuracy_after
    assert all(np.array_equal(a, b) for a, b in zip(before, net.parameters()))


def test_group_strategy_is_atomic_after_fine_tune(problem):
    net = trained_net(problem)
    net, masks, _ = forward_prune(net, 0.5, make_fine_tune(problem), strategy="group")
    for idx, layer in enumerate(net.layers):
        mask = masks.layer_mask(idx)
        assert np.all(mask.all(axis=2) | ~mask.any(axis=2))
        assert not layer.C[~mask].any()


def test_group_matches_threshold_on_k0_model(problem):
    base = trained_net(problem, k=0)
    _, _, by_threshold = forward_prune(base.copy(), 0.4, make_fine_tune(problem), strategy="threshold")
    _, _, by_group = forward_prune(base.copy(), 0.4, make_fine_tune(problem), strategy="group")
    threshold_doc = by_threshold.to_dict()
    group_doc = by_group.to_dict()
    threshold_doc.pop("strategy")
    group_doc.pop("strategy")
    assert threshold_doc == group_doc


def test_diverging_fine_tune_restores_checkpoint(problem):
    net = trained_net(problem)
    before = [p.copy() for p in net.parameters()]

    def broken(net, masks):
        return float("nan")

    with pytest.raises(PruneDivergedError) as info:
        forward_prune(net, 0.3, broken)
    assert info.value.layer == 0
    assert all(np.array_equal(a, b) for a, b in zip(before, net.parameters()))


def test_sweep_reports_every_percentile(problem):
    net = trained_net(problem)
    pruned, masks, report, frontier = sweep_percentiles(
        net, [50, 80], make_fine_tune(problem), make_evaluate(problem), tolerance=100.0)
    assert [row["percentile"] for row in frontier] == [50, 80]
    # with an unlimited tolerance the most compressed point wins
    assert report.percentile == 80
    assert report.compression >= 80.0
    assert net.layers[0].C.all()
