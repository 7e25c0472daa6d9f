import pytest

from lsoftmax import cli
from lsoftmax.artifacts import read_metrics
from lsoftmax.metrics import read_features

SEEDS = range(5)

pytestmark = pytest.mark.mnist


def test_margin_does_not_hurt_test_error(experiment):
    config = experiment("mnist_small.ini")
    errors = cli.cmd_compare(config, seeds=SEEDS)
    assert errors[4] <= errors[1]
    assert errors[1] <= 0.05 and errors[4] <= 0.05


def test_larger_margin_separates_2d_features(experiment, tmp_path):
    config = experiment("mnist_fig1.ini")
    summary = cli.cmd_figure1(config, margins=(1, 2, 3, 4), seeds=SEEDS)

    monotone, tighter = 0, 0
    for seed in SEEDS:
        rows = sorted((r for r in summary if r["seed"] == seed), key=lambda r: r["m"])
        proxies = [r["margin_proxy"] for r in rows]
        monotone += all(b >= a for a, b in zip(proxies, proxies[1:]))
        tighter += rows[-1]["mean_spread"] < rows[0]["mean_spread"]
        features, labels = read_features(tmp_path / f"seed_{seed}" / "features_m4.csv")
        assert features.shape == (5000, 2)
        assert labels.shape == (5000,)
    assert monotone >= 4
    assert tighter >= 4


def test_cli_train_and_eval_on_mnist(experiment, tmp_path):
    config = experiment(
        "mnist_small.ini",
        data={"fractions": [0.9, 0.1, 0.0]},
        optim={"max_iterations": 200, "val_interval": 50},
    )
    artifacts = cli.cmd_train(config)
    records = read_metrics(tmp_path / "metrics.csv")
    assert len(records) == 200
    assert [r.iteration for r in records if r.val_error is not None] == [49, 99, 149, 199]
    report = cli.cmd_eval(tmp_path / "final_params.bin", config)
    assert report.accuracy >= 0.8
    assert report.confusion.shape == (10, 10)
    assert artifacts.spec.feature_dim == 64
