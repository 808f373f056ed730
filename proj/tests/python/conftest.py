import json
import os
import pathlib
import re

import pytest

ROOT = pathlib.Path(os.environ.get("SVGSMITH_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
DATA = ROOT / "tests" / "data"
SCHEMAS = ROOT / "schemas"


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("SVGSMITH_CLI")
    if not path or not pathlib.Path(path).exists():
        pytest.skip("SVGSMITH_CLI not set")
    return path


@pytest.fixture(scope="session")
def unicorn():
    return (DATA / "unicorn.svg").read_text()


@pytest.fixture(scope="session")
def expansion():
    return (DATA / "expansion_reply.txt").read_text()


def fenced(svg):
    return "Sure.\n```svg\n" + svg + "\n```\n"


def generation_replies(expansion, svg, rounds, repeats):
    """Replies in the order one sequential generation run asks for them."""
    return ([expansion] + [fenced(svg)] * (rounds + 1)) * repeats


def drop_path(svg, path_id):
    out = re.sub(r'\s*<path id="%s"[^>]*/>' % re.escape(path_id), "", svg)
    assert out != svg
    return out


def removal_reply(svg, path_id):
    return (fenced(drop_path(svg, path_id)) +
            "1. Element Modification: []\n"
            "2. Element Removal: [%s]\n"
            "3. Element Addition: \"\", []\n" % path_id)


def schema(name):
    return json.loads((SCHEMAS / (name + ".json")).read_text())
