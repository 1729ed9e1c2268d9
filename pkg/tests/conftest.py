from pathlib import Path

import pytest
from hypothesis import settings

ROOT = Path(__file__).resolve().parents[1]
SOCIAL = ROOT / "schemas" / "social" / "social.gs"

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def write_files(base: Path, files: dict[str, str]) -> Path:
    for name, body in files.items():
        (base / name).write_text(body, encoding="utf-8")
    return base


@pytest.fixture
def social_schema_text() -> str:
    return SOCIAL.read_text(encoding="utf-8")


@pytest.fixture
def tiny_dir(tmp_path):
    """Small dictionaries used by hand-written schemas."""
    return write_files(tmp_path, {
        "colors.csv": "value,weight\nred,3\nblue,1\n",
        "shapes.csv": "value,weight\nsquare,1\ncircle,1\n",
        "shape_by_color.csv": "color,value,weight\nred,square,1\nblue,circle,1\n*,square,1\n",
    })


# acceptance criteria record their verdicts here; printed after the run
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        verdict, title, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{verdict}] {num:2d}. {title}: {detail}")
