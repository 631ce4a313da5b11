import numpy as np
import pytest

from trojscan.imaging import ExampleSet
from trojscan.synthetic import SyntheticOracleSpec, make_synthetic_oracle

# One line per acceptance criterion, printed at the end of the session.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_acceptance():
    def _record(name: str, ok: bool, detail: str = ""):
        ACCEPTANCE_RESULTS.append((name, bool(ok), detail))
        assert ok, f"acceptance criterion failed: {name} ({detail})"

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        suffix = f"  [{detail}]" if detail else ""
        terminalreporter.write_line(f"{status}  {name}{suffix}")


def stripe_image(rng: np.random.Generator, dims=(32, 32)) -> np.ndarray:
    """Near-binary random pattern; classes separate even under worst-case triggers."""
    bits = rng.integers(0, 2, size=(*dims, 3)).astype(np.float64)
    return np.clip(bits * 0.96 + 0.02, 0.0, 1.0)


def stripe_examples(
    seed: int = 11, class_count: int = 5, per_class: int = 1, dims=(32, 32)
) -> ExampleSet:
    rng = np.random.default_rng(seed)
    return ExampleSet(
        by_class={
            n: [stripe_image(rng, dims) for _ in range(per_class)]
            for n in range(class_count)
        }
    )


@pytest.fixture
def small_examples():
    return stripe_examples(seed=11, class_count=5, per_class=2, dims=(32, 32))


@pytest.fixture
def clean_oracle(small_examples):
    spec = SyntheticOracleSpec(
        class_count=5, examples=small_examples, input_dims=(32, 32), descriptor="clean"
    )
    return make_synthetic_oracle(spec)
