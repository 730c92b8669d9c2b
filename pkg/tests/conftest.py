import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from loopiga.generators import generate_test_mesh  # noqa: E402


@pytest.fixture(scope="session")
def generator_meshes():
    return {kind: generate_test_mesh(kind, 1) for kind in
            ("quarter_cylinder", "octant_sphere", "full_cylinder", "sphere")}


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
