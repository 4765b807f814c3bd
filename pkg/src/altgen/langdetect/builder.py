"""Profile builder dev tool.

Reads training corpora (one `<subtag>.txt` per language) and writes
rank-ordered trigram profiles (`<subtag>.profile`) next to the package so
they ship embedded. Usage:

    python -m altgen.langdetect.builder <corpus_dir> <output_dir>
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from altgen.langdetect import PROFILE_SIZE, dump_profile, profile_from_text


def build_profiles(corpus_dir: Path, output_dir: Path) -> list[Path]:
    output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for corpus in sorted(corpus_dir.glob("*.txt")):
        text = corpus.read_text(encoding="utf-8")
        profile = profile_from_text(corpus.stem, text)
        if len(profile.ranked_trigrams) < PROFILE_SIZE:
            print(
                f"warning: {corpus.stem} corpus yields only "
                f"{len(profile.ranked_trigrams)} trigrams (< {PROFILE_SIZE})",
                file=sys.stderr,
            )
        written.append(dump_profile(profile, output_dir))
    return written


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("corpus_dir", type=Path)
    parser.add_argument("output_dir", type=Path)
    args = parser.parse_args(argv)
    written = build_profiles(args.corpus_dir, args.output_dir)
    if not written:
        print(f"no *.txt corpora found in {args.corpus_dir}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
