#!/usr/bin/env python3
"""Generate the planted synthetic corpus (3 talks, EN->FR/DE, 12 events,
8 distractors) into a directory, with audio and word timestamps."""

import argparse
import json

from idrkit.synthcorpus import build_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", help="target directory for the corpus")
    parser.add_argument("--no-audio", action="store_true",
                        help="skip WAV synthesis (subtitles and lexicons only)")
    args = parser.parse_args()
    summary = build_corpus(args.out_dir, with_audio=not args.no_audio)
    print(json.dumps(summary, indent=2))
    print(f"\n{len(summary['events'])} planted events, "
          f"{len(summary['distractors'])} distractors -> {args.out_dir}")


if __name__ == "__main__":
    main()
