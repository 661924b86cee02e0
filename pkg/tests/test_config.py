import pytest

from cytorus.config import SCHEMA, load_config, parse_config
from cytorus.errors import ConfigError


def test_defaults():
    cfg = parse_config("")
    assert cfg["problem.n"] == 2 and cfg["problem.m"] == 16
    assert cfg["atlas.N"] == (2, 4)
    assert set(cfg.echo()) == set(SCHEMA)


def test_values_and_comments(tmp_path):
    text = """
    # a comment
    problem.n = 1          # trailing
    problem.f = expr:0.2*cos(x1)
    monitors.estimates = off
    atlas.N = 2, 3
    output.dir = runs/a
    """
    path = tmp_path / "run.cfg"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg["problem.n"] == 1
    assert cfg["problem.f"] == "expr:0.2*cos(x1)"
    assert cfg["monitors.estimates"] is False
    assert cfg["atlas.N"] == (2, 3)
    assert cfg.resolve(cfg["output.dir"]) == tmp_path / "runs" / "a"
    assert cfg.explicit == {"problem.n": 1, "problem.f": "expr:0.2*cos(x1)",
                            "monitors.estimates": False, "atlas.N": (2, 3),
                            "output.dir": "runs/a"}
    assert cfg.section("atlas")["overlap"] == 0.1


@pytest.mark.parametrize("text, line", [
    ("problem.n = 2\nproblem.m 16\n", 2),
    ("problem.q = 2\n", 1),
    ("problem.n = 2\n\nproblem.n = 3\n", 3),
    ("problem.n = two\n", 1),
    ("monitors.identities = maybe\n", 1),
    ("bad key = 1\n", 1),
])
def test_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")
