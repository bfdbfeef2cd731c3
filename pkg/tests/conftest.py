import numpy as np
import pytest

from ahaclab.autodiff import backward, finite_diff_grad, record, value_of

FD_EPS = 1e-5
FD_RTOL = 1e-4
# gradients that are exactly or nearly zero cannot meet a relative tolerance
FD_ATOL = 1e-6


def tape_and_fd_grads(fn, inputs, seed=0):
    """Gradients of ``sum(w * fn(*inputs))`` from the tape and from central differences."""
    inputs = tuple(np.asarray(x, dtype=np.float64) for x in inputs)
    out = np.asarray(value_of(fn(*inputs)))
    w = np.random.default_rng(seed).uniform(0.5, 1.5, out.shape)
    _, tape = record(lambda *xs: fn(*xs), inputs)
    tape_grads = backward(tape, w)
    fd = []
    for i in range(len(inputs)):

        def scalar(xi, i=i):
            args = list(inputs)
            args[i] = xi
            return float(np.sum(w * np.asarray(value_of(fn(*args)))))

        fd.append(finite_diff_grad(scalar, inputs[i], FD_EPS))
    return tape_grads, fd


def assert_matches_fd(fn, *inputs, seed=0, rtol=FD_RTOL, atol=FD_ATOL):
    tape_grads, fd = tape_and_fd_grads(fn, inputs, seed)
    for g, f in zip(tape_grads, fd):
        np.testing.assert_allclose(g, f, rtol=rtol, atol=atol)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_collection_modifyitems(items):
    for item in items:
        if "_fd" in item.name:
            item.add_marker(pytest.mark.fd)


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def report(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title}" + (f" | {detail}" if detail else "")
        lines.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
