import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tarpo_lab.table import Table


@pytest.fixture
def medals():
    return Table(
        ("Nation", "Single", "Double", "Total"),
        (("A", "3", "1", "4"), ("B", "0", "2", "2"), ("C", "5", "0", "5")),
    )


@pytest.fixture
def grid3():
    return Table(("x", "y", "z"), (("1", "2", "3"), ("4", "5", "6"), ("7", "8", "9")))
