"""Built-in 16-segment vector font, ASCII 32-126.

Glyphs are segment sets over a unit cell; each lit segment becomes one thin
quad, so text renders as flat geometry with no textures. Lowercase letters
reuse the uppercase forms, as classic segment displays do.

Segment layout (unit cell, x right, y up):

      A1   A2
    F    I     B
      H  |  J        diagonals H, J meet the center
      G1   G2
      K  |  M        diagonals K, M leave the center
    E    L     C
      D1   D2
"""

# segment index -> (x0, y0, x1, y1) in the unit cell
SEGMENTS = {
    "A1": (0.0, 1.0, 0.5, 1.0),
    "A2": (0.5, 1.0, 1.0, 1.0),
    "B": (1.0, 1.0, 1.0, 0.5),
    "C": (1.0, 0.5, 1.0, 0.0),
    "D1": (0.0, 0.0, 0.5, 0.0),
    "D2": (0.5, 0.0, 1.0, 0.0),
    "E": (0.0, 0.5, 0.0, 0.0),
    "F": (0.0, 1.0, 0.0, 0.5),
    "G1": (0.0, 0.5, 0.5, 0.5),
    "G2": (0.5, 0.5, 1.0, 0.5),
    "H": (0.0, 1.0, 0.5, 0.5),
    "I": (0.5, 1.0, 0.5, 0.5),
    "J": (1.0, 1.0, 0.5, 0.5),
    "K": (0.5, 0.5, 0.0, 0.0),
    "L": (0.5, 0.5, 0.5, 0.0),
    "M": (0.5, 0.5, 1.0, 0.0),
}

_G = {
    " ": "",
    "!": "I L",
    '"': "I J",
    "#": "B C D1 D2 G1 G2 I L",
    "$": "A1 A2 C D1 D2 F G1 G2 I L",
    "%": "C F J K",
    "&": "A1 D1 D2 E G1 H K M",
    "'": "I",
    "(": "J M",
    ")": "H K",
    "*": "G1 G2 H I J K L M",
    "+": "G1 G2 I L",
    ",": "K",
    "-": "G1 G2",
    ".": "D2",
    "/": "J K",
    "0": "A1 A2 B C D1 D2 E F J K",
    "1": "B C J",
    "2": "A1 A2 B D1 D2 E G1 G2",
    "3": "A1 A2 B C D1 D2 G2",
    "4": "B C F G1 G2",
    "5": "A1 A2 C D1 D2 F G1 G2",
    "6": "A1 A2 C D1 D2 E F G1 G2",
    "7": "A1 A2 B C",
    "8": "A1 A2 B C D1 D2 E F G1 G2",
    "9": "A1 A2 B C D1 D2 F G1 G2",
    ":": "I L",
    ";": "I K",
    "<": "J M",
    "=": "D1 D2 G1 G2",
    ">": "H K",
    "?": "A1 A2 B G2 L",
    "@": "A1 A2 B D1 D2 E F G2 I",
    "A": "A1 A2 B C E F G1 G2",
    "B": "A1 A2 B C D1 D2 G2 I L",
    "C": "A1 A2 D1 D2 E F",
    "D": "A1 A2 B C D1 D2 I L",
    "E": "A1 A2 D1 D2 E F G1",
    "F": "A1 A2 E F G1",
    "G": "A1 A2 C D1 D2 E F G2",
    "H": "B C E F G1 G2",
    "I": "A1 A2 D1 D2 I L",
    "J": "B C D1 D2 E",
    "K": "E F G1 J M",
    "L": "D1 D2 E F",
    "M": "B C E F H J",
    "N": "B C E F H M",
    "O": "A1 A2 B C D1 D2 E F",
    "P": "A1 A2 B E F G1 G2",
    "Q": "A1 A2 B C D1 D2 E F M",
    "R": "A1 A2 B E F G1 G2 M",
    "S": "A1 A2 C D1 D2 F G1 G2",
    "T": "A1 A2 I L",
    "U": "B C D1 D2 E F",
    "V": "E F J K",
    "W": "B C E F K M",
    "X": "H J K M",
    "Y": "H J L",
    "Z": "A1 A2 D1 D2 J K",
    "[": "A1 D1 E F",
    "\\": "H M",
    "]": "A2 B C D2",
    "^": "K M",
    "_": "D1 D2",
    "`": "H",
    "{": "A2 D2 G1 I L",
    "|": "I L",
    "}": "A1 D1 G2 I L",
    "~": "G1 G2",
}


def glyph_segments(ch: str):
    """Segment endpoint tuples for one character (lowercase folds to upper,
    unknown characters render as an empty cell)."""
    if ch not in _G and ch.upper() in _G:
        ch = ch.upper()
    names = _G.get(ch, "")
    return [SEGMENTS[n] for n in names.split()] if names else []
