import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "germlab" / "configs"


@pytest.fixture
def config_dir() -> Path:
    return CONFIG_DIR


def command_for(config: str) -> str:
    """CLI subcommand that runs a shipped config."""
    for prefix, command in (("compare", "compare"), ("extinction", "extinction"), ("simulate", "simulate"),
                            ("clamped", "recurse"), ("laplace", "recurse"), ("pioneer", "recurse")):
        if config.startswith(prefix):
            return command
    return "experiment"


@pytest.fixture(scope="session")
def shipped(tmp_path_factory):
    """Run a shipped config once per session through the CLI.

    Returns ``(exit code, output dir, seconds)``.
    """
    from germlab.cli import main

    cache = {}

    def get(config: str):
        if config not in cache:
            out = tmp_path_factory.mktemp(config.replace(".", "_"))
            start = time.perf_counter()
            code = main([command_for(config), "--config", str(CONFIG_DIR / config), "--out", str(out)])
            cache[config] = (code, out, time.perf_counter() - start)
        return cache[config]

    return get


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record and print one pass/fail line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.setdefault(number, []).append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            for line in lines[n]:
                terminalreporter.write_line(line)
