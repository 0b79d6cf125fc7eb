#!/usr/bin/env python3
"""End-to-end demo: build the planted corpus, write a pipeline config, run
every stage, and print each stage report."""

import argparse
import json
from pathlib import Path

from idrkit.config import load_config
from idrkit.pipeline import run_stage
from idrkit.synthcorpus import build_corpus

CONFIG = """\
[corpus]
root = "corpus"

[lexicons]
en = "corpus/lexicons/en.tsv"
fr = "corpus/lexicons/fr.tsv"
de = "corpus/lexicons/de.tsv"

[pairs]
directions = ["en->fr", "en->de"]

[output]
dir = "out"

[split]
train = 0.6
validation = 0.2
test = 0.2
seed = 13

[train]
model = "fusion"
seed = 0
epochs = 3
d = 16
proj_dim = 16
attn_heads = 2
conv_channels = 8

[review]
sample_size = 8
seed = 1
"""

STAGES = ("ingest", "mine", "segment", "align", "prosody", "assemble",
          "split", "stats", "train", "eval", "review-export")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("workdir", help="working directory (created if absent)")
    args = parser.parse_args()
    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    if not (work / "corpus" / "talks.json").exists():
        build_corpus(work / "corpus", with_audio=True)
        print("corpus built")
    (work / "pipeline.toml").write_text(CONFIG)
    cfg = load_config(work / "pipeline.toml")
    for stage in STAGES:
        result = run_stage(stage, cfg)
        print(f"--- {stage}: {result['status']}")
        print(json.dumps(result.get("report", {}), indent=2, default=str))


if __name__ == "__main__":
    main()
