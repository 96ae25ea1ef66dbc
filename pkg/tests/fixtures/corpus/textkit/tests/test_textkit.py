from textkit import edit_distance, find_word, initial, slugify, tokens, version, width, word_score, words


def test_initial():
    assert initial("alice") == "A"


def test_slugify():
    assert slugify("Hello Big World") == "hello-big-world"


def test_tokens():
    assert tokens("a bb ccc") == ["bb", "ccc"]


def test_find_word_runs():
    find_word("find the needle", "needle")


def test_word_score():
    assert word_score("abc") == 18


def test_misc():
    assert version() == "1.0"
    assert list(words("x y")) == ["x", "y"]
    assert width(12345) == 5


def test_edit_distance():
    assert edit_distance("kitten", "sitting") == 3
