"""Fixed-effect Monte Carlo: the data-generating process and the harness."""

import numpy as np
import pandas as pd
import pytest

import seatrade.mc as mc
from seatrade.errors import ConfigError, DataError
from seatrade.extrap import pct_change_window
from seatrade.mc import (
    McConfig,
    rep_seed_sequence,
    run_mc,
    run_rep,
    simulate_rep,
    true_deltas,
)
from seatrade.months import add_months

LIGHT_GBT = dict(
    n_rounds=120, max_depth=3, learning_rate=0.1, min_child_weight=5.0,
    l2_reg=1.0, subsample_rows=1.0, subsample_cols=1.0, n_bins=256,
)


def light_config(**overrides):
    params = dict(n_reps=3, gbt=dict(LIGHT_GBT), master_seed=11)
    params.update(overrides)
    return McConfig(**params)


# ------------------------------------------------------------ configuration


def test_config_requires_disjoint_alpha_ranges():
    with pytest.raises(ConfigError, match="disjoint"):
        McConfig(alpha_train_range=(10.0, 18.0), alpha_test_range=(6.0, 12.0))


def test_config_validates_cutoff_and_counts():
    with pytest.raises(ConfigError):
        McConfig(cutoff_month=0)
    with pytest.raises(ConfigError):
        McConfig(cutoff_month=100)
    with pytest.raises(ConfigError):
        McConfig(n_train_ports=0)
    with pytest.raises(ConfigError):
        McConfig(noise_sd=-0.1)


def test_config_json_round_trip():
    cfg = light_config(beta=2.5, noise_sd=0.4)
    again = McConfig.from_json(cfg.to_json())
    assert again == cfg


# -------------------------------------------------------------- simulation


def test_simulate_rep_deterministic():
    cfg = light_config()
    a = simulate_rep(cfg, rep_seed_sequence(cfg.master_seed, 0))
    b = simulate_rep(cfg, rep_seed_sequence(cfg.master_seed, 0))
    pd.testing.assert_frame_equal(a["train"], b["train"])
    pd.testing.assert_frame_equal(a["test"], b["test"])
    pd.testing.assert_series_equal(a["true_delta"], b["true_delta"])


def test_simulate_rep_changes_with_rep_index():
    cfg = light_config()
    a = simulate_rep(cfg, rep_seed_sequence(cfg.master_seed, 0))
    b = simulate_rep(cfg, rep_seed_sequence(cfg.master_seed, 1))
    assert not a["train"]["y"].equals(b["train"]["y"])


def test_noiseless_zero_beta_gives_constant_ports():
    cfg = light_config(noise_sd=0.0, beta=0.0)
    sim = simulate_rep(cfg, rep_seed_sequence(cfg.master_seed, 0))
    spread = sim["test"].groupby("port_id")["y"].agg(lambda s: s.max() - s.min())
    assert np.allclose(spread, 0.0)
    assert np.allclose(sim["true_delta"], 0.0)


def test_noiseless_supports_are_disjoint():
    cfg = light_config(noise_sd=0.0, beta=1.5)
    sim = simulate_rep(cfg, rep_seed_sequence(cfg.master_seed, 2))
    train_alpha = sim["train"]["y"] - cfg.beta * sim["train"]["x"]
    test_alpha = sim["test"]["y"] - cfg.beta * sim["test"]["x"]
    assert train_alpha.min() >= cfg.alpha_train_range[0] - 1e-9
    assert train_alpha.max() <= cfg.alpha_train_range[1] + 1e-9
    assert test_alpha.min() >= cfg.alpha_test_range[0] - 1e-9
    assert test_alpha.max() <= cfg.alpha_test_range[1] + 1e-9
    assert test_alpha.max() < train_alpha.min()


def test_true_deltas_hand_computed():
    panel = pd.DataFrame(
        {
            "port_id": ["p"] * 4,
            "year_month": [add_months(mc.FIRST_MONTH, k) for k in range(4)],
            "x": [0.0] * 4,
            "y": [1.0, 3.0, 10.0, 14.0],
        }
    )
    delta = true_deltas(panel, cutoff_month=2, n_months=4)
    assert delta["p"] == pytest.approx((10.0 + 14.0) / 2 - (1.0 + 3.0) / 2)


def test_fixed_effect_cancels_for_linear_predictor():
    # With beta known and predictions alpha_hat + beta * X for any constant
    # alpha_hat, the predicted change equals the true change (noise-free).
    cfg = light_config(noise_sd=0.0, beta=3.0)
    sim = simulate_rep(cfg, rep_seed_sequence(cfg.master_seed, 4))
    test = sim["test"]
    alpha_hat = 123.456  # deliberately absurd level
    pre_hi = add_months(mc.FIRST_MONTH, cfg.cutoff_month - 1)
    post_lo = add_months(mc.FIRST_MONTH, cfg.cutoff_month)
    last = add_months(mc.FIRST_MONTH, cfg.n_months - 1)
    for port_id, group in test.groupby("port_id"):
        group = group.sort_values("year_month")
        linear_pred = alpha_hat + cfg.beta * group["x"].to_numpy()
        est = pct_change_window(
            group["year_month"].tolist(), linear_pred, post_lo,
            pre_window=(mc.FIRST_MONTH, pre_hi), post_window=(post_lo, last),
        )
        assert est.delta_log == pytest.approx(sim["true_delta"][port_id], abs=1e-9)


# ----------------------------------------------------------------- harness


def test_run_mc_shapes_and_determinism():
    cfg = light_config()
    a = run_mc(cfg)
    b = run_mc(cfg)
    assert list(a.per_rep.columns) == [
        "rep", "raw_r2", "anchored_r2", "delta_slope", "delta_corr",
    ]
    assert len(a.per_rep) == cfg.n_reps
    pd.testing.assert_frame_equal(a.per_rep, b.per_rep)
    assert a.aggregate == b.aggregate
    assert a.pooled == b.pooled
    # aggregates recomputable from the per-rep table
    assert a.aggregate["raw_r2"]["mean"] == pytest.approx(a.per_rep["raw_r2"].mean())


def test_run_mc_parallel_matches_serial():
    cfg = light_config(n_reps=4)
    serial = run_mc(cfg, jobs=1)
    parallel = run_mc(cfg, jobs=2)
    pd.testing.assert_frame_equal(serial.per_rep, parallel.per_rep)


def test_rep_results_do_not_depend_on_total_rep_count():
    # replication seeds derive from (master_seed, rep index) alone
    two = run_mc(light_config(n_reps=2)).per_rep
    three = run_mc(light_config(n_reps=3)).per_rep
    pd.testing.assert_frame_equal(two, three.iloc[:2])


def test_run_mc_qualitative_pattern_small():
    result = run_mc(light_config(n_reps=4))
    agg = result.aggregate
    assert agg["raw_r2"]["mean"] < 0.0
    assert agg["anchored_r2"]["mean"] > 0.8
    assert agg["delta_corr"]["mean"] > 0.9


def test_run_mc_failure_tolerance(monkeypatch):
    real_run_rep = run_rep

    def flaky(config, rep):
        if rep < 2:
            raise DataError("synthetic failure")
        return real_run_rep(config, rep)

    monkeypatch.setattr(mc, "run_rep", flaky)
    with pytest.raises(DataError, match="replications failed"):
        run_mc(light_config(n_reps=10))  # 2 of 10 failures > 5%


def test_noiseless_limit_recovers_changes_within_1e3():
    # With noise_sd = 0 the true delta is exactly beta * mean-x difference;
    # the fitted model's only error is its function-approximation residual,
    # so the slope and correlation converge to 1.
    cfg = McConfig(
        n_reps=12, noise_sd=0.0, beta=20.0, master_seed=5,
        gbt=dict(n_rounds=300, max_depth=4, learning_rate=0.1, min_child_weight=5.0,
                 l2_reg=1.0, subsample_rows=1.0, subsample_cols=1.0, n_bins=512),
    )
    result = run_mc(cfg)
    assert abs(result.aggregate["delta_slope"]["mean"] - 1.0) < 1e-3
    assert abs(result.aggregate["delta_corr"]["mean"] - 1.0) < 1e-3


def test_placebo_shuffled_x_kills_delta_recovery():
    # Permuting the X column across the whole test panel severs the only
    # signal path, so predicted changes decorrelate from true changes.
    cfg = light_config(n_reps=6)
    corrs = []
    rng = np.random.default_rng(99)
    from seatrade.gbt import GradientBoostedTrees

    for rep in range(cfg.n_reps):
        sim = simulate_rep(cfg, rep_seed_sequence(cfg.master_seed, rep))
        train, test = sim["train"], sim["test"]
        model = GradientBoostedTrees(seed=rep, **cfg.gbt)
        model.fit(train[["x"]].to_numpy(), train["y"].to_numpy())
        shuffled = test.copy()
        shuffled["x"] = shuffled["x"].to_numpy()[rng.permutation(len(shuffled))]
        shuffled["pred"] = model.predict(shuffled[["x"]].to_numpy())
        pre_hi = add_months(mc.FIRST_MONTH, cfg.cutoff_month - 1)
        post_lo = add_months(mc.FIRST_MONTH, cfg.cutoff_month)
        last = add_months(mc.FIRST_MONTH, cfg.n_months - 1)
        deltas = {}
        for port_id, group in shuffled.groupby("port_id"):
            group = group.sort_values("year_month")
            est = pct_change_window(
                group["year_month"].tolist(), group["pred"].to_numpy(), post_lo,
                pre_window=(mc.FIRST_MONTH, pre_hi), post_window=(post_lo, last),
            )
            deltas[str(port_id)] = est.delta_log
        truth = sim["true_delta"]
        ports = sorted(truth.index)
        corrs.append(
            np.corrcoef([truth[p] for p in ports], [deltas[p] for p in ports])[0, 1]
        )
    assert abs(float(np.mean(corrs))) < 0.25


def test_results_csv_schema(tmp_path):
    result = run_mc(light_config())
    path = tmp_path / "mc_results.csv"
    result.save_csv(path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == [
        "rep", "raw_r2", "anchored_r2", "delta_slope", "delta_corr",
    ]
    assert len(frame) == 3
