import numpy as np
import pytest

from fsirom import harness

# (criterion, passed, detail) lines recorded by test_acceptance.py
ACCEPTANCE = {}


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class Pipeline:
    """Lazily computed benchmark runs shared across test modules."""

    MU1 = (2.0, 6.0)
    MU2 = (0.9, 4.0)

    def __init__(self):
        self.cfg = harness.RunConfig(mu=self.MU1, t_end=18.0)
        self._cache = {}

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def train(self):
        return self._get("train", lambda: harness.run_fom_fom(self.cfg))

    @property
    def model(self):
        return self._get("model", lambda: harness.train_from_snapshots(self.train[1], self.train[2],
                                                                         self.cfg))

    def fom(self, mu, horizon=120.0):
        cfg = self.cfg.with_(mu=list(mu))
        return self._get(("fom", mu, horizon), lambda: harness.run_fom_fom(cfg, horizon=horizon))

    def rom(self, mu, horizon=120.0):
        cfg = self.cfg.with_(mu=list(mu))
        return self._get(("rom", mu, horizon), lambda: harness.run_rom_fom(cfg, self.model,
                                                                           horizon=horizon))


_PIPELINE = Pipeline()


@pytest.fixture(scope="session")
def pipeline():
    return _PIPELINE
