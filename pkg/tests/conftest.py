import pytest

from aifv.bitstrings import BitString
from aifv.forest import CodeForest, CodeTree
from aifv.modes import Mode

B = BitString.from_text


def make_mode(n, *texts):
    return Mode(frozenset(B(t) for t in texts), n)


def make_tree(n, mode_texts, entries):
    """entries: list of (codeword_text, link) per symbol."""
    return CodeTree(
        codewords=tuple(B(cw) for cw, _ in entries),
        links=tuple(link for _, link in entries),
        mode=make_mode(n, *mode_texts),
    )


@pytest.fixture(scope="session")
def demo_forest():
    """The worked five-tree forest over symbols a=0, b=1, c=2 (delay 3)."""
    trees = (
        make_tree(3, [""], [("", 1), ("0", 2), ("11", 0)]),
        make_tree(3, ["011", "10"], [("10", 3), ("011", 0), ("101", 4)]),
        make_tree(3, ["0", "10"], [("0", 3), ("10", 0), ("01", 4)]),
        make_tree(3, ["0", "100"], [("00", 0), ("01", 0), ("100", 0)]),
        make_tree(3, ["01", "1"], [("1", 4), ("01", 0), ("100", 0)]),
    )
    return CodeForest(trees, 3)
