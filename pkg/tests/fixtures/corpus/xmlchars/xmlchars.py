"""Character classification for XML text."""


def isValidXmlChar(ch: int) -> bool:  # noqa: N802 - mirrors the original API
    return (ch == 0x9) \
        or (ch == 0xA) \
        or (ch == 0xD) \
        or (ch >= 0x20 and ch <= 0xD7FF) \
        or (ch >= 0xE000 and ch <= 0xFFFD) \
        or (ch >= 0x10000 and ch <= 0x10FFFF)


def count_lines(text: str) -> int:
    return text.count("\n") + 1
