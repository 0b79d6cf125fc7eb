"""Pipeline configuration: TOML file with per-stage sections.

Relative paths resolve against the config file's directory. The corpus root
must contain talks.json; per-talk files (subtitles, audio, word timestamps)
are referenced from there.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass
class SegmenterConfig:
    mode: str = "fallback"  # fallback | fixture | subprocess | http
    fixture: str = ""
    url: str = ""
    argv: list[str] = field(default_factory=list)
    few_shot: bool = True


@dataclass
class TrainSection:
    model: str = "fusion"  # fusion | tfidf_logreg | prosodic_logreg
    seed: int = 0
    epochs: int = 7
    grad_accum: int = 8
    d: int = 32
    proj_dim: int = 32
    attn_heads: int = 4
    conv_channels: int = 16
    backbone_seed: int = 7
    reg_lambda: float = 1e-3
    use_prosody: bool = True
    use_audio_stats: bool = True


@dataclass
class PipelineConfig:
    corpus_root: Path
    lexicons: dict[str, Path]
    pairs: list[tuple[str, str]]
    output_dir: Path
    ratio_low: float = 0.5
    ratio_high: float = 2.0
    min_overlap_frac: float = 0.5
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    split_ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    split_seed: int = 13
    split_language_defaults: bool = False
    train: TrainSection = field(default_factory=TrainSection)
    gold_path: Path | None = None
    review_sample_size: int | None = None
    review_seed: int = 0
    verdicts_path: Path | None = None
    n_mels: int = 128

    @property
    def talks_file(self) -> Path:
        return self.corpus_root / "talks.json"

    def validate(self) -> None:
        if not self.talks_file.exists():
            raise ConfigError(f"talks registry not found: {self.talks_file}")
        for lang, path in self.lexicons.items():
            if not path.exists():
                raise ConfigError(f"lexicon for {lang!r} not found: {path}")
        langs = set(self.lexicons)
        for src, tgt in self.pairs:
            if src not in langs or tgt not in langs:
                raise ConfigError(
                    f"pair {src}->{tgt} references a language without a lexicon")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError(
                f"split ratios must sum to 1.0, got {sum(self.split_ratios)}")
        if any(r < 0 for r in self.split_ratios):
            raise ConfigError("split ratios must be non-negative")
        if self.segmenter.mode not in ("fallback", "fixture", "subprocess", "http"):
            raise ConfigError(f"unknown segmenter mode {self.segmenter.mode!r}")
        if self.segmenter.mode == "fixture" and not Path(self.segmenter.fixture).exists():
            raise ConfigError(f"segmenter fixture not found: {self.segmenter.fixture}")


def _parse_direction(s: str) -> tuple[str, str]:
    for sep in ("->", "-", ":"):
        if sep in s:
            src, tgt = s.split(sep, 1)
            return src.strip(), tgt.strip()
    raise ConfigError(f"cannot parse language pair {s!r} (use 'en->fr')")


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    base = path.parent

    def resolve(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else (base / q)

    try:
        corpus_root = resolve(raw["corpus"]["root"])
        lexicons = {lang: resolve(p) for lang, p in raw["lexicons"].items()}
        pairs = [_parse_direction(d) for d in raw["pairs"]["directions"]]
        output_dir = resolve(raw.get("output", {}).get("dir", "out"))
    except KeyError as exc:
        raise ConfigError(f"missing required config key: {exc}") from None

    mining = raw.get("mining", {})
    seg = raw.get("segmenter", {})
    seg_cfg = SegmenterConfig(
        mode=seg.get("mode", "fallback"),
        fixture=str(resolve(seg["fixture"])) if seg.get("fixture") else "",
        url=seg.get("url", ""),
        argv=list(seg.get("argv", [])),
        few_shot=bool(seg.get("few_shot", True)),
    )
    split = raw.get("split", {})
    ratios = (float(split.get("train", 0.6)),
              float(split.get("validation", 0.2)),
              float(split.get("test", 0.2)))
    train_raw = raw.get("train", {})
    train = TrainSection(
        model=train_raw.get("model", "fusion"),
        seed=int(train_raw.get("seed", 0)),
        epochs=int(train_raw.get("epochs", 7)),
        grad_accum=int(train_raw.get("grad_accum", 8)),
        d=int(train_raw.get("d", 32)),
        proj_dim=int(train_raw.get("proj_dim", 32)),
        attn_heads=int(train_raw.get("attn_heads", 4)),
        conv_channels=int(train_raw.get("conv_channels", 16)),
        backbone_seed=int(train_raw.get("backbone_seed", 7)),
        reg_lambda=float(train_raw.get("reg_lambda", 1e-3)),
        use_prosody=bool(train_raw.get("use_prosody", True)),
        use_audio_stats=bool(train_raw.get("use_audio_stats", True)),
    )
    compare = raw.get("compare", {})
    review = raw.get("review", {})
    cfg = PipelineConfig(
        corpus_root=corpus_root,
        lexicons=lexicons,
        pairs=pairs,
        output_dir=output_dir,
        ratio_low=float(mining.get("ratio_low", 0.5)),
        ratio_high=float(mining.get("ratio_high", 2.0)),
        min_overlap_frac=float(mining.get("min_overlap_frac", 0.5)),
        segmenter=seg_cfg,
        split_ratios=ratios,
        split_seed=int(split.get("seed", 13)),
        split_language_defaults=bool(split.get("use_language_defaults", False)),
        train=train,
        gold_path=resolve(compare["gold"]) if compare.get("gold") else None,
        review_sample_size=(int(review["sample_size"])
                            if review.get("sample_size") else None),
        review_seed=int(review.get("seed", 0)),
        verdicts_path=resolve(review["verdicts"]) if review.get("verdicts") else None,
        n_mels=int(raw.get("prosody", {}).get("n_mels", 128)),
    )
    cfg.validate()
    return cfg
