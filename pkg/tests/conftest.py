from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent
CORPUS = REPO / "corpus"


@pytest.fixture(scope="session")
def corpus_programs():
    """The three bundled benchmark sources, shortest first."""
    return [CORPUS / "programs" / name
            for name in ("chain.asm", "countdown.asm", "memloop.asm")]


@pytest.fixture(scope="session")
def chain_net_text():
    return (CORPUS / "circuits" / "chain.net").read_text()


@pytest.fixture(scope="session")
def ring_net_text():
    return (CORPUS / "circuits" / "ring.net").read_text()


@pytest.fixture(scope="session")
def toggle_net_text():
    return (CORPUS / "circuits" / "toggle.net").read_text()
