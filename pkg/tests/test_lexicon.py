import numpy as np
import pytest

from sstd.errors import DuplicateEntry, ParseError
from sstd.g2p import identity_table
from sstd.lexicon import LexiconEntry, build_trie, cursor, load_lexicon, step


def entry(word, phones=None):
    return LexiconEntry(word, tuple(phones if phones is not None else word))


def test_load_lexicon_with_identity_table(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("manu\t\t\n# comment\nbun\tb u n\tclips/bun.feat\tspk1\n", encoding="utf-8")
    entries = load_lexicon(path, identity_table())
    assert [e.orthography for e in entries] == ["manu", "bun"]
    assert entries[0].phones == ("m", "a", "n", "u")
    assert entries[1].phones == ("b", "u", "n")
    assert entries[1].exemplars == [("clips/bun.feat", "spk1")]
    assert entries[1].exemplar_speaker == "spk1"


def test_load_lexicon_empty_file(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("", encoding="utf-8")
    assert load_lexicon(path) == []


def test_load_lexicon_duplicate_entry(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("manu\tm a n u\nmanu\tm a n u\n", encoding="utf-8")
    with pytest.raises(DuplicateEntry) as err:
        load_lexicon(path)
    assert "manu" in str(err.value)


def test_load_lexicon_requires_phones_or_table(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("manu\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_lexicon(path)


def test_trie_basic_branches():
    trie = build_trie([entry("manu"), entry("bun")])
    cur = cursor(trie)
    for phone in "man":
        cur = step(cur, phone)
        assert cur is not None
    assert not cur.is_word
    cur = step(cur, "u")
    assert cur.is_word and cur.words == {"manu"}

    cur = cursor(trie)
    for phone in "bu":
        cur = step(cur, phone)
    nxt = step(cur, "n")
    assert nxt.is_word and nxt.words == {"bun"}


def test_step_no_transition_leaves_cursor_unchanged():
    trie = build_trie([entry("manu")])
    cur = cursor(trie)
    assert step(cur, "z") is None
    assert cur.node is trie.root  # unchanged
    assert step(cur, "m") is not None


def test_single_phone_word():
    trie = build_trie([LexiconEntry("a", ("a",))])
    cur = step(cursor(trie), "a")
    assert cur.is_word


def test_prefix_word_node_is_final_and_extends():
    trie = build_trie([entry("ab"), entry("abc")])
    cur = step(step(cursor(trie), "a"), "b")
    assert cur.is_word and cur.words == {"ab"}
    assert step(cur, "c").is_word


def test_homophones_share_final_node():
    e1 = LexiconEntry("colour", ("k", "o", "l"))
    e2 = LexiconEntry("color", ("k", "o", "l"))
    trie = build_trie([e1, e2])
    assert trie.lookup(("k", "o", "l")) == {"colour", "color"}


def test_every_entry_walks_to_its_word():
    rng = np.random.default_rng(5)
    alphabet = list("abcdef")
    entries = []
    seen = set()
    for i in range(30):
        phones = tuple(rng.choice(alphabet, size=rng.integers(1, 6)))
        word = f"w{i}_{''.join(phones)}"
        entries.append(LexiconEntry(word, phones))
        seen.add(phones)
    trie = build_trie(entries)
    for e in entries:
        cur = cursor(trie)
        for phone in e.phones:
            cur = step(cur, phone)
            assert cur is not None
        assert e.orthography in cur.words


def test_non_prefix_fails_at_first_divergence():
    trie = build_trie([entry("manu"), entry("bun")])
    prefixes = {("m",), ("m", "a"), ("m", "a", "n"), ("m", "a", "n", "u"),
                ("b",), ("b", "u"), ("b", "u", "n")}
    cur = cursor(trie)
    walked = []
    for phone in ("m", "a", "z", "u"):
        nxt = step(cur, phone)
        if nxt is None:
            assert tuple(walked + [phone]) not in prefixes
            break
        walked.append(phone)
        cur = nxt
    else:
        pytest.fail("walk should have failed at 'z'")


def test_node_count_bound():
    entries = [entry("manu"), entry("man"), entry("bun")]
    trie = build_trie(entries)
    total_phones = sum(len(e.phones) for e in entries)
    assert trie.node_count() <= 1 + total_phones
