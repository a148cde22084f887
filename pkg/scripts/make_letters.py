"""Render the 30x30 grayscale letters used by the sequence-predictor task.

Strokes are drawn at 4x resolution with Pillow, then box-downsampled, which
gives anti-aliased grayscale edges. Output: ``<dir>/{N,J,I,T}.pgm``.
"""
import argparse
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from memstdp.mnist import write_pgm

SIZE = 30
SCALE = 4

# polylines in 30x30 pixel coordinates
STROKES = {
    "N": [[(7, 25), (7, 5), (23, 25), (23, 5)]],
    "J": [[(10, 5), (24, 5)], [(19, 5), (19, 20), (16, 25), (11, 25), (7, 21)]],
    "I": [[(15, 5), (15, 25)], [(9, 5), (21, 5)], [(9, 25), (21, 25)]],
    "T": [[(5, 5), (25, 5)], [(15, 5), (15, 25)]],
}


def render(letter, width=3.0):
    big = Image.new("L", (SIZE * SCALE, SIZE * SCALE), 0)
    draw = ImageDraw.Draw(big)
    for line in STROKES[letter]:
        pts = [(x * SCALE, y * SCALE) for x, y in line]
        draw.line(pts, fill=255, width=int(width * SCALE), joint="curve")
        r = width * SCALE / 2
        for x, y in (pts[0], pts[-1]):
            draw.ellipse([x - r, y - r, x + r, y + r], fill=255)
    small = big.resize((SIZE, SIZE), Image.Resampling.BOX)
    return np.asarray(small, dtype=float) / 255.0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parents[1] / "src/memstdp/assets/letters")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for letter in STROKES:
        write_pgm(args.out / f"{letter}.pgm", render(letter))
        print(args.out / f"{letter}.pgm")


if __name__ == "__main__":
    main()
