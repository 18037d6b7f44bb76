import json

import pytest


def write_group(tmp_path, name, spec):
    path = tmp_path / name
    path.write_text(json.dumps(spec))
    return str(path)


@pytest.fixture
def group_files(tmp_path):
    return {
        "z2": write_group(tmp_path, "z2.json", {"type": "cyclic", "n": 2}),
        "z3": write_group(tmp_path, "z3.json", {"type": "cyclic", "n": 3}),
        "z4sq": write_group(tmp_path, "z4sq.json", {"type": "vector", "n": 4, "d": 2}),
        "s3": write_group(tmp_path, "s3.json",
                          {"type": "permutation", "degree": 3, "generators": [[2, 1, 3], [2, 3, 1]]}),
    }


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
