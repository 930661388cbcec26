import numpy as np
import pytest

from flipdetect.data import Dataset, SynthSpec, gen_synthetic


def blobs(n=120, sep=6.0, d=2, seed=0, noise=0.0):
    return gen_synthetic(SynthSpec(n=n, d=d, class_sep=sep, label_noise=noise), seed,
                         name=f"blobs-{seed}")


def random_dataset(gen, n, d, name="rand"):
    X = gen.normal(size=(n, d))
    y = np.zeros(n, dtype=np.int64)
    y[: n // 2] = 1
    gen.shuffle(y)
    return Dataset(X, y, name)


@pytest.fixture
def easy():
    return blobs(n=200, sep=6.0, d=2, seed=3)


def pytest_terminal_summary(terminalreporter):
    import pipeline

    if pipeline.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in pipeline.REPORT:
            terminalreporter.write_line(line)
