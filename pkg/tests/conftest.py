import time

import numpy as np
import pytest

from simosec.autoenc import eve_best_response, train
from simosec.autoenc.checkpoint import save_checkpoint
from simosec.harness.config import ExperimentConfig
from simosec.harness.data import generate_dataset

# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE = []


def record(criterion: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.append((criterion, ok, detail))
    print(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")


@pytest.fixture(scope="session")
def default_experiment():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def trained(default_experiment, tmp_path_factory):
    """The default 100-epoch runs for both scenarios, each followed by a
    best-response eavesdropper; ``{scenario: (params, history, seconds, path)}``."""
    cfg = default_experiment
    train_msgs, _ = generate_dataset(cfg)
    out = tmp_path_factory.mktemp("models")
    runs = {}
    for scenario in cfg.scenarios:
        imp = cfg.scenario_impairments(scenario)
        t0 = time.process_time()
        params, hist = train(train_msgs, cfg.train, imp, cfg.channel)
        seconds = time.process_time() - t0
        params, _ = eve_best_response(params, train_msgs, cfg.train, imp, cfg.channel)
        path = out / f"model_{scenario}.npz"
        save_checkpoint(path, params, cfg.train, {"scenario": scenario})
        runs[scenario] = (params, hist, seconds, path)
    return runs


@pytest.fixture(scope="session")
def ae_records(default_experiment, trained):
    from simosec.harness.sweep import run_ber_sweep

    checkpoints = {s: run[0] for s, run in trained.items()}
    recs = run_ber_sweep(default_experiment, checkpoints, decoders=("AE-legit", "AE-eve", "AE-eve-br"))
    return {(r.scenario, r.decoder): [x for x in recs if (x.scenario, x.decoder) == (r.scenario, r.decoder)]
            for r in recs}


def pairwise_min_distance(points) -> float:
    d = np.abs(points[:, None] - points[None, :])
    return float(d[~np.eye(len(points), dtype=bool)].min())
