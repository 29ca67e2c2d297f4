"""Shared fixtures.

The temperature-grid campaigns are expensive (minutes each at the stock
configuration), so the reports consumed by several test modules are built
once per session and written into a session-scoped temp directory.  Each
campaign fixture returns a ``TimedReport`` so the acceptance tests can check
wall-clock budgets alongside the report contents.
"""

import time
from dataclasses import dataclass

import pytest

import fockgibbs as fg


@dataclass(frozen=True)
class TimedReport:
    report: fg.ConvergenceReport
    seconds: float


def _timed(runner, cfg) -> TimedReport:
    start = time.monotonic()
    report = runner(cfg)
    return TimedReport(report=report, seconds=time.monotonic() - start)


@pytest.fixture(scope="session")
def report_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("reports")


@pytest.fixture(scope="session")
def default_cfg(report_dir):
    return fg.default_config(out_dir=str(report_dir / "default"))


@pytest.fixture(scope="session")
def partition_report(default_cfg):
    return _timed(fg.run_partition_convergence, default_cfg)


@pytest.fixture(scope="session")
def dm_report(default_cfg):
    return _timed(fg.run_dm_convergence, default_cfg)


@pytest.fixture(scope="session")
def husimi_report(default_cfg):
    return _timed(fg.run_husimi_convergence, default_cfg)


@pytest.fixture(scope="session")
def proofstep_report(default_cfg):
    return _timed(fg.run_proof_step_suite, default_cfg)


@pytest.fixture(scope="session")
def p_campaign_report(report_dir):
    cfg = fg.p_campaign_config(out_dir=str(report_dir / "schatten2"))
    return _timed(fg.run_dm_convergence, cfg)
