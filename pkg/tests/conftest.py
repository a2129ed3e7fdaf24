import warnings

import numpy as np
import pytest

from hostcap.rng import RngStream


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


@pytest.fixture
def stream():
    return RngStream(20240901)


@pytest.fixture(autouse=True)
def _quiet_model_warnings():
    # sampling-clip and soft-range warnings are expected in synthetic runs
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        yield


ACCEPTANCE_LABELS = {
    "test_criterion_1": "1 metrics vs brute-force oracles",
    "test_criterion_2": "2 monotonicity suite",
    "test_criterion_3": "3 flow correctness",
    "test_criterion_4": "4 flow training fidelity",
    "test_criterion_5": "5 clustering recovery and indices",
    "test_criterion_6": "6 power flow oracles",
    "test_criterion_7": "7 hosting-capacity trend reproduction",
    "test_criterion_8": "8 end-to-end determinism",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            name = getattr(rep, "nodeid", "").split("::")[-1]
            for key in ACCEPTANCE_LABELS:
                if name.startswith(key):
                    outcomes[key] = "PASS" if status == "passed" else "FAIL"
    if outcomes:
        terminalreporter.write_sep("-", "acceptance criteria")
        for key, label in ACCEPTANCE_LABELS.items():
            if key in outcomes:
                terminalreporter.write_line(f"criterion {label}: {outcomes[key]}")


@pytest.fixture(scope="session")
def demo_run(tmp_path_factory):
    """Tiny end-to-end pipeline run shared by pipeline/report tests."""
    from hostcap.cli import main
    from hostcap.pipeline import PipelineConfig

    root = tmp_path_factory.mktemp("demo")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        assert main(["fixture", "--out", str(root), "--seed", "11", "--days", "34",
                     "--scenarios", "8", "--grid", "4x5"]) == 0
        assert main(["run", "--config", str(root / "config.yaml")]) == 0
    cfg = PipelineConfig.from_yaml(root / "config.yaml")
    return {"root": root, "config_path": root / "config.yaml", "cfg": cfg}
