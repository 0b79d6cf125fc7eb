"""Pipeline stages over a config: each stage reads upstream artifacts, writes
its outputs plus a provenance record, and is idempotent — re-running with
unchanged inputs does zero work and reproduces byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np

from . import audio as audio_mod
from . import containers, review, segmentation
from .baselines import (logreg_fit, LogRegModel, prosodic_features, tfidf_fit,
                        TfidfModel, tfidf_pair_features)
from .config import ConfigError, PipelineConfig
from .dataset import (DEFAULT_RATIOS, DatasetManifest, ManifestInstance,
                      SplitSpec, compare_to_gold, evaluate, load_gold,
                      split as split_manifest, stats_json, stats_text)
from .ingest import (ConnectiveEntry, RelationLabel, SubtitleSegment,
                     load_lexicon, parse_subtitles, serialize_segments_json)
from .mining import ConnectiveMatcher, mine_talk
from .model.backbone import StubBackbone, mark_pair, tokenize_with_markers
from .model.fusion import FusionConfig, Sample
from .model.training import (TrainConfig, class_weights, fit, predict,
                             save_history_csv)
from .prosody import (LogMel, ProsodyMatrix, ProsodyNormalizer, compute_logmel,
                      extract_prosody_raw)
from .text import split_sentences

STAGES = ("ingest", "mine", "segment", "align", "prosody", "assemble", "split",
          "stats", "train", "eval", "compare", "review-export", "review-import")

LABEL_ORDER = [lab.value for lab in RelationLabel]

FEATURE_VERSION = "v1"


class UpstreamMissing(RuntimeError):
    pass


class StageFailure(RuntimeError):
    pass


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash_inputs(config_slice: dict, files: list[Path]) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(config_slice, sort_keys=True, default=str).encode())
    for path in sorted(files):
        h.update(str(path).encode())
        h.update(_sha256_file(path).encode())
    return h.hexdigest()


def _log_event(cfg: PipelineConfig, stage: str, event: str, **fields):
    log_dir = cfg.output_dir / "logs"
    log_dir.mkdir(parents=True, exist_ok=True)
    row = {"ts": time.time(), "stage": stage, "event": event, **fields}
    with (log_dir / f"{stage}.jsonl").open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(row, sort_keys=True, default=str) + "\n")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False)
                    + "\n", encoding="utf-8")


def _write_jsonl(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line)
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()]


def _require(paths: list[Path], needed_stage: str):
    for p in paths:
        if not p.exists():
            raise UpstreamMissing(
                f"missing artifact {p}; run stage {needed_stage!r} first")


def _load_talks(cfg: PipelineConfig) -> list[dict]:
    return json.loads(cfg.talks_file.read_text(encoding="utf-8"))


def _segments_path(cfg, talk_id, lang) -> Path:
    return cfg.output_dir / "ingest" / "segments" / f"{talk_id}.{lang}.json"


def _load_segments(cfg, talk_id, lang) -> list[SubtitleSegment]:
    return parse_subtitles(_segments_path(cfg, talk_id, lang).read_bytes(),
                           "segments-json", talk_id=talk_id)


def _load_matchers(cfg: PipelineConfig) -> dict[str, ConnectiveMatcher]:
    matchers = {}
    for lang in cfg.lexicons:
        rows = json.loads((cfg.output_dir / "ingest" / "lexicons" /
                           f"{lang}.json").read_text(encoding="utf-8"))
        entries = [ConnectiveEntry(r["surface"], lang,
                                   RelationLabel(r["sense"]), False)
                   for r in rows]
        matchers[lang] = ConnectiveMatcher(entries)
    return matchers


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------


def stage_ingest(cfg: PipelineConfig) -> dict:
    talks = _load_talks(cfg)
    seg_counts = {}
    for talk in talks:
        for lang, sub in talk["subtitles"].items():
            raw = (cfg.corpus_root / sub["path"]).read_bytes()
            segments = parse_subtitles(raw, sub["format"], talk_id=talk["talk_id"])
            out = _segments_path(cfg, talk["talk_id"], lang)
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_bytes(serialize_segments_json(segments))
            seg_counts[f"{talk['talk_id']}.{lang}"] = len(segments)
    lex_counts = {}
    for lang, path in cfg.lexicons.items():
        entries = load_lexicon(path.read_bytes(), lang)
        rows = [{"surface": e.surface, "sense": e.sense.value} for e in entries]
        _write_json(cfg.output_dir / "ingest" / "lexicons" / f"{lang}.json", rows)
        lex_counts[lang] = len(rows)
    report = {"talks": len(talks), "segments": seg_counts, "lexicons": lex_counts}
    _write_json(cfg.output_dir / "ingest" / "report.json", report)
    return report


def stage_mine(cfg: PipelineConfig) -> dict:
    talks = _load_talks(cfg)
    matchers = _load_matchers(cfg)
    all_instances = []
    all_report = []
    for talk in sorted(talks, key=lambda t: t["talk_id"]):
        src = talk["source_language"]
        targets = sorted(t for s, t in cfg.pairs
                         if s == src and t in talk["translations"])
        if not targets:
            continue
        src_segments = _load_segments(cfg, talk["talk_id"], src)
        tgt_segments = {t: _load_segments(cfg, talk["talk_id"], t)
                        for t in targets}
        instances, report = mine_talk(
            talk["talk_id"], src, src_segments, tgt_segments,
            matchers[src], {t: matchers[t] for t in targets},
            tolerance=(cfg.ratio_low, cfg.ratio_high))
        all_instances.extend(instances)
        all_report.extend(report)
    all_instances.sort(key=lambda i: i.instance_id)
    _write_jsonl(cfg.output_dir / "mine" / "instances.jsonl",
                 [i.to_json() for i in all_instances])
    _write_jsonl(cfg.output_dir / "mine" / "report.jsonl", all_report)
    reasons: dict[str, int] = {}
    for row in all_report:
        if not row["emitted"] and row.get("drop_reason"):
            reasons[row["drop_reason"]] = reasons.get(row["drop_reason"], 0) + 1
    summary = {"candidates": len(all_report), "emitted": len(all_instances),
               "dropped_by_filter": len(all_report) - len(all_instances),
               "drop_reasons": reasons}
    _write_json(cfg.output_dir / "mine" / "summary.json", summary)
    return summary


def _make_port(cfg: PipelineConfig):
    mode = cfg.segmenter.mode
    if mode == "fallback":
        return None
    if mode == "fixture":
        return segmentation.FixtureSegmenter(cfg.segmenter.fixture)
    if mode == "subprocess":
        return segmentation.SubprocessSegmenter(cfg.segmenter.argv)
    if mode == "http":
        return segmentation.HttpSegmenter(cfg.segmenter.url)
    raise ConfigError(f"unknown segmenter mode {mode!r}")


def stage_segment(cfg: PipelineConfig) -> dict:
    instances = _read_jsonl(cfg.output_dir / "mine" / "instances.jsonl")
    port = _make_port(cfg)
    by_talk: dict[str, list[dict]] = {}
    for row in instances:
        by_talk.setdefault(row["talk_id"], []).append(row)
    contexts, drops = [], []
    for talk_id in sorted(by_talk):
        rows = by_talk[talk_id]
        src_lang = rows[0]["source_language"]
        segments = _load_segments(cfg, talk_id, src_lang)
        full_text = " ".join(s.text for s in segments)
        sent_spans = split_sentences(full_text)
        seg_offsets = {}
        offset = 0
        for s in segments:
            seg_offsets[s.index] = offset
            offset += len(s.text) + 1
        for row in rows:
            hit_index = row["context_segment_indices"][1]
            pos = next(i for i, s in enumerate(segments) if s.index == hit_index)
            ctx = segmentation.build_context(segments, pos)
            try:
                spans = segmentation.segment_arguments(
                    ctx, port, language=src_lang,
                    few_shot=cfg.segmenter.few_shot)
            except segmentation.InstanceDropped as drop:
                drops.append({"instance_id": row["instance_id"],
                              "reason": drop.reason})
                continue
            abs_hit = seg_offsets[hit_index]
            ordinal = len(sent_spans) - 1
            for i, (_s, e) in enumerate(sent_spans):
                if abs_hit < e:
                    ordinal = i
                    break
            cs, ce = ctx.current_span
            intra = (cs <= spans.arg1[0] and spans.arg1[1] <= ce
                     and cs <= spans.arg2[0] and spans.arg2[1] <= ce)
            contexts.append({
                "instance_id": row["instance_id"],
                "talk_id": talk_id,
                "source_language": src_lang,
                "origin_indices": list(ctx.origin[1]),
                "prev": ctx.prev, "current": ctx.current, "next": ctx.next,
                "text": ctx.text,
                "arg1": list(spans.arg1), "arg2": list(spans.arg2),
                "span_source": spans.source.value,
                "arg2_sentence_index": ordinal,
                "intra": intra,
            })
    contexts.sort(key=lambda r: r["instance_id"])
    _write_jsonl(cfg.output_dir / "segment" / "contexts.jsonl", contexts)
    _write_jsonl(cfg.output_dir / "segment" / "drops.jsonl", drops)
    summary = {"in": len(instances), "out": len(contexts),
               "dropped": len(drops)}
    _write_json(cfg.output_dir / "segment" / "summary.json", summary)
    return summary


def stage_align(cfg: PipelineConfig) -> dict:
    contexts = _read_jsonl(cfg.output_dir / "segment" / "contexts.jsonl")
    talks = {t["talk_id"]: t for t in _load_talks(cfg)}
    clips_dir = cfg.output_dir / "clips"
    clips_dir.mkdir(parents=True, exist_ok=True)
    spans_rows, drops = [], []
    wav_cache: dict[str, audio_mod.AudioClip] = {}
    words_cache: dict[str, list[audio_mod.WordTimestamp]] = {}
    for row in sorted(contexts, key=lambda r: r["instance_id"]):
        talk = talks[row["talk_id"]]
        talk_id = row["talk_id"]
        if talk_id not in words_cache:
            words_cache[talk_id] = audio_mod.load_word_timestamps(
                cfg.corpus_root / "words" / f"{talk_id}.jsonl")
            wav_cache[talk_id] = audio_mod.read_wav(cfg.corpus_root / talk["audio"])
        words = words_cache[talk_id]
        clip = wav_cache[talk_id]
        segments = _load_segments(cfg, talk_id, row["source_language"])
        by_index = {s.index: s for s in segments}
        indices = [i for i in row["origin_indices"] if i >= 0]
        window_start = min(by_index[i].start for i in indices) - 0.05
        window_end = max(by_index[i].end for i in indices) + 0.05
        in_window = [w for w in words
                     if w.start >= window_start and w.end <= window_end]
        out_row = {"instance_id": row["instance_id"], "talk_id": talk_id}
        try:
            for arg in ("arg1", "arg2"):
                s, e = row[arg]
                text = row["text"][s:e]
                tspan = audio_mod.align_span_to_time(text, in_window)
                cut = audio_mod.cut_audio(clip, tspan, talk_id=talk_id)
                name = f"{row['instance_id'].replace(':', '_')}.{arg}.wav"
                audio_mod.write_wav(cut, clips_dir / name)
                out_row[f"{arg}_time"] = [tspan.start, tspan.end]
                out_row[f"{arg}_clip"] = name
                out_row[f"{arg}_anomaly"] = audio_mod.energy_anomaly_flag(cut)
        except audio_mod.UnalignableSpanError as exc:
            drops.append({"instance_id": row["instance_id"],
                          "reason": f"UNALIGNABLE: {exc}"})
            continue
        spans_rows.append(out_row)
    _write_jsonl(cfg.output_dir / "align" / "spans.jsonl", spans_rows)
    _write_jsonl(cfg.output_dir / "align" / "drops.jsonl", drops)
    summary = {"in": len(contexts), "out": len(spans_rows), "dropped": len(drops)}
    _write_json(cfg.output_dir / "align" / "summary.json", summary)
    return summary


def _feature_path(cfg, instance_id: str, kind: str) -> Path:
    name = containers.feature_cache_key(instance_id, kind, FEATURE_VERSION)
    return cfg.output_dir / "features" / name


def stage_prosody(cfg: PipelineConfig) -> dict:
    spans_rows = _read_jsonl(cfg.output_dir / "align" / "spans.jsonl")
    talks = {t["talk_id"]: t for t in _load_talks(cfg)}
    (cfg.output_dir / "features").mkdir(parents=True, exist_ok=True)
    by_talk: dict[str, list[dict]] = {}
    for row in spans_rows:
        by_talk.setdefault(row["talk_id"], []).append(row)
    index_rows = []
    for talk_id in sorted(by_talk):
        words = audio_mod.load_word_timestamps(
            cfg.corpus_root / "words" / f"{talk_id}.jsonl")
        raw_mats: dict[tuple[str, str], ProsodyMatrix] = {}
        logmels: dict[tuple[str, str], LogMel] = {}
        for row in by_talk[talk_id]:
            for arg in ("arg1", "arg2"):
                t0, t1 = row[f"{arg}_time"]
                clip = audio_mod.read_wav(cfg.output_dir / "clips" /
                                          row[f"{arg}_clip"])
                rel_words = [
                    audio_mod.WordTimestamp(w.word, max(0.0, w.start - t0),
                                            min(t1, w.end) - t0)
                    for w in words if w.start < t1 and w.end > t0]
                raw_mats[(row["instance_id"], arg)] = extract_prosody_raw(
                    clip, rel_words)
                logmels[(row["instance_id"], arg)] = compute_logmel(
                    clip, n_mels=cfg.n_mels)
        normalizer = ProsodyNormalizer.fit(list(raw_mats.values()))
        for (instance_id, arg), raw in sorted(raw_mats.items()):
            normed = normalizer.transform(raw)
            p_path = _feature_path(cfg, f"{instance_id}.{arg}", "prosody")
            containers.write_feature_blob(p_path, containers.KIND_PROSODY,
                                          normed.rows)
            lm = logmels[(instance_id, arg)]
            m_path = _feature_path(cfg, f"{instance_id}.{arg}", "logmel")
            containers.write_feature_blob(m_path, containers.KIND_LOGMEL,
                                          lm.frames)
            index_rows.append({
                "instance_id": instance_id, "arg": arg,
                "prosody_blob": p_path.name, "logmel_blob": m_path.name,
                "words": int(normed.rows.shape[0]),
                "frames": int(lm.frames.shape[1]),
            })
    index_rows.sort(key=lambda r: (r["instance_id"], r["arg"]))
    _write_jsonl(cfg.output_dir / "prosody" / "index.jsonl", index_rows)
    summary = {"instances": len({r['instance_id'] for r in index_rows}),
               "blobs": 2 * len(index_rows)}
    _write_json(cfg.output_dir / "prosody" / "summary.json", summary)
    return summary


def stage_assemble(cfg: PipelineConfig) -> dict:
    instances = {r["instance_id"]: r
                 for r in _read_jsonl(cfg.output_dir / "mine" / "instances.jsonl")}
    contexts = {r["instance_id"]: r
                for r in _read_jsonl(cfg.output_dir / "segment" / "contexts.jsonl")}
    spans = {r["instance_id"]: r
             for r in _read_jsonl(cfg.output_dir / "align" / "spans.jsonl")}
    manifest_rows = []
    for iid in sorted(spans):
        mine_row, ctx_row, span_row = instances[iid], contexts[iid], spans[iid]
        text = ctx_row["text"]
        a1s, a1e = ctx_row["arg1"]
        a2s, a2e = ctx_row["arg2"]
        manifest_rows.append(ManifestInstance(
            instance_id=iid,
            talk_id=mine_row["talk_id"],
            language=mine_row["source_language"],
            label=RelationLabel(mine_row["label"]),
            arg1_text=text[a1s:a1e],
            arg2_text=text[a2s:a2e],
            arg1_clip=span_row["arg1_clip"],
            arg2_clip=span_row["arg2_clip"],
            witness_language=mine_row["witness_language"],
            arg2_sentence_index=ctx_row["arg2_sentence_index"],
            intra=ctx_row["intra"],
        ))
    manifest = DatasetManifest(instances=manifest_rows)
    manifest.save(cfg.output_dir / "manifest" / "manifest.jsonl")
    summary = {"instances": len(manifest_rows),
               "provenance_hash": manifest.provenance_hash}
    _write_json(cfg.output_dir / "manifest" / "summary.json", summary)
    return summary


def stage_split(cfg: PipelineConfig) -> dict:
    manifest = DatasetManifest.load(cfg.output_dir / "manifest" / "manifest.jsonl")
    by_lang: dict[str, list[ManifestInstance]] = {}
    for inst in manifest.instances:
        by_lang.setdefault(inst.language, []).append(inst)
    out_instances = []
    for lang in sorted(by_lang):
        ratios = cfg.split_ratios
        if cfg.split_language_defaults:
            ratios = DEFAULT_RATIOS.get(lang, cfg.split_ratios)
        spec = SplitSpec(ratios=ratios, seed=cfg.split_seed)
        part = split_manifest(DatasetManifest(instances=by_lang[lang]), spec)
        out_instances.extend(part.instances)
    out = DatasetManifest(instances=out_instances)
    out.save(cfg.output_dir / "split" / "manifest.jsonl")
    counts = {s: sum(1 for i in out.instances if i.split == s)
              for s in ("train", "validation", "test")}
    summary = {"instances": len(out.instances), "splits": counts,
               "provenance_hash": out.provenance_hash}
    _write_json(cfg.output_dir / "split" / "summary.json", summary)
    return summary


def stage_stats(cfg: PipelineConfig) -> dict:
    manifest = DatasetManifest.load(cfg.output_dir / "split" / "manifest.jsonl")
    (cfg.output_dir / "stats").mkdir(parents=True, exist_ok=True)
    (cfg.output_dir / "stats" / "stats.json").write_bytes(stats_json(manifest))
    (cfg.output_dir / "stats" / "stats.txt").write_text(stats_text(manifest),
                                                        encoding="utf-8")
    report = json.loads(stats_json(manifest))
    return {"total": report["total"], "languages": sorted(report["languages"])}


def _load_feature_index(cfg) -> dict[tuple[str, str], dict]:
    rows = _read_jsonl(cfg.output_dir / "prosody" / "index.jsonl")
    return {(r["instance_id"], r["arg"]): r for r in rows}


def _build_samples(cfg: PipelineConfig, manifest: DatasetManifest,
                   splits: tuple[str, ...],
                   backbone: StubBackbone) -> tuple[list[Sample], list[str]]:
    index = _load_feature_index(cfg)
    samples, ids = [], []
    for inst in manifest.instances:
        if inst.split not in splits:
            continue
        marked = mark_pair(inst.arg1_text, inst.arg2_text)
        tokens, spans = tokenize_with_markers(marked)
        ts = backbone.encode(tokens, spans)
        feats = {}
        for arg in ("arg1", "arg2"):
            row = index[(inst.instance_id, arg)]
            _k, pros = containers.read_feature_blob(
                cfg.output_dir / "features" / row["prosody_blob"])
            _k, mel = containers.read_feature_blob(
                cfg.output_dir / "features" / row["logmel_blob"])
            feats[arg] = (pros, LogMel(frames=mel,
                                       mask=np.ones(mel.shape[1], dtype=bool)))
        samples.append(Sample(
            token_states=ts,
            prosody1=feats["arg1"][0], prosody2=feats["arg2"][0],
            logmel1=feats["arg1"][1], logmel2=feats["arg2"][1],
            label=LABEL_ORDER.index(inst.label.value)))
        ids.append(inst.instance_id)
    return samples, ids


def _fusion_config(cfg: PipelineConfig) -> FusionConfig:
    t = cfg.train
    return FusionConfig(d=t.d, proj_dim=t.proj_dim, attn_heads=t.attn_heads,
                        n_mels=cfg.n_mels, conv_channels=t.conv_channels,
                        use_prosody=t.use_prosody,
                        use_audio_stats=t.use_audio_stats)


def stage_train(cfg: PipelineConfig) -> dict:
    manifest = DatasetManifest.load(cfg.output_dir / "split" / "manifest.jsonl")
    out_dir = cfg.output_dir / "train"
    out_dir.mkdir(parents=True, exist_ok=True)
    model_kind = cfg.train.model
    if model_kind == "fusion":
        fusion_cfg = _fusion_config(cfg)
        backbone = StubBackbone(d=fusion_cfg.d, seed=cfg.train.backbone_seed)
        train_samples, _ = _build_samples(cfg, manifest, ("train",), backbone)
        val_samples, _ = _build_samples(cfg, manifest, ("validation",), backbone)
        tc = TrainConfig(seed=cfg.train.seed, epochs=cfg.train.epochs,
                         grad_accum=cfg.train.grad_accum)
        result = fit(train_samples, val_samples, fusion_cfg, tc,
                     checkpoint_dir=out_dir / "checkpoints")
        containers.write_checkpoint(out_dir / "best.idrc",
                                    {"model": "fusion",
                                     **fusion_cfg.to_dict(),
                                     "backbone_seed": cfg.train.backbone_seed},
                                    result.params.arrays())
        save_history_csv(result.history, out_dir / "history.csv")
        summary = {"model": model_kind, "epochs_run": len(result.history),
                   "best_epoch": result.best_epoch,
                   "final_val_loss": result.history[-1]["val_loss"]}
    elif model_kind in ("tfidf_logreg", "prosodic_logreg"):
        train_rows = [i for i in manifest.instances if i.split == "train"]
        if not train_rows:
            raise StageFailure("no training instances")
        y = np.array([LABEL_ORDER.index(i.label.value) for i in train_rows])
        x, extra_cfg = _baseline_features(cfg, train_rows, model_kind, None)
        model = logreg_fit(x, y, class_weights=class_weights(y),
                           reg_lambda=cfg.train.reg_lambda)
        containers.write_checkpoint(
            out_dir / "best.idrc",
            {"model": model_kind, "reg_lambda": cfg.train.reg_lambda,
             **extra_cfg},
            {"weights": model.weights, "bias": model.bias})
        summary = {"model": model_kind, "features": int(x.shape[1]),
                   "train_instances": len(train_rows)}
    else:
        raise ConfigError(f"unknown train.model {model_kind!r}")
    _write_json(out_dir / "summary.json", summary)
    return summary


def _baseline_features(cfg, rows, model_kind, tfidf_model: TfidfModel | None):
    """Feature matrix for baseline models; returns (X, config-extras)."""
    extra: dict = {}
    blocks = []
    if model_kind in ("tfidf_logreg",):
        if tfidf_model is None:
            tfidf_model = tfidf_fit([i.arg1_text for i in rows]
                                    + [i.arg2_text for i in rows])
        blocks.append(tfidf_pair_features(
            tfidf_model, [i.arg1_text for i in rows],
            [i.arg2_text for i in rows]))
        extra["vocabulary"] = tfidf_model.vocabulary
        extra["idf"] = tfidf_model.idf.tolist()
    if model_kind in ("prosodic_logreg",):
        index = _load_feature_index(cfg)
        spans = {r["instance_id"]: r
                 for r in _read_jsonl(cfg.output_dir / "align" / "spans.jsonl")}
        feats = []
        for inst in rows:
            mats = []
            for arg in ("arg1", "arg2"):
                blob = index[(inst.instance_id, arg)]["prosody_blob"]
                _k, data = containers.read_feature_blob(
                    cfg.output_dir / "features" / blob)
                # word timings are not cached; spread the true arg duration
                # evenly so the duration-ratio feature stays a time ratio
                t0, t1 = spans[inst.instance_id][f"{arg}_time"]
                n = max(1, data.shape[0])
                step = (t1 - t0) / n
                refs = [audio_mod.WordTimestamp("w", i * step, (i + 1) * step)
                        for i in range(data.shape[0])]
                mats.append(ProsodyMatrix(data, refs))
            feats.append(prosodic_features(mats[0], mats[1]))
        blocks.append(np.stack(feats))
    return np.concatenate(blocks, axis=1), extra


def stage_eval(cfg: PipelineConfig) -> dict:
    manifest = DatasetManifest.load(cfg.output_dir / "split" / "manifest.jsonl")
    ckpt_cfg, tensors = containers.read_checkpoint(
        cfg.output_dir / "train" / "best.idrc")
    test_rows = [i for i in manifest.instances if i.split == "test"]
    gold = [i.label.value for i in test_rows]
    if ckpt_cfg["model"] == "fusion":
        fusion_cfg = FusionConfig.from_dict(
            {k: v for k, v in ckpt_cfg.items()
             if k not in ("model", "backbone_seed")})
        backbone = StubBackbone(d=fusion_cfg.d, seed=ckpt_cfg["backbone_seed"])
        from .model.fusion import init_params
        params = init_params(fusion_cfg,
                             np.random.Generator(np.random.PCG64(0)))
        params.load_arrays(tensors)
        samples, ids = _build_samples(cfg, manifest, ("test",), backbone)
        preds_idx = predict(params, fusion_cfg, samples)
        preds = [LABEL_ORDER[i] for i in preds_idx]
    else:
        model = LogRegModel(weights=tensors["weights"], bias=tensors["bias"],
                            reg_lambda=ckpt_cfg.get("reg_lambda", 0.0))
        tfidf_model = None
        if "vocabulary" in ckpt_cfg:
            tfidf_model = TfidfModel(vocabulary=ckpt_cfg["vocabulary"],
                                     idf=np.asarray(ckpt_cfg["idf"]))
        x, _ = _baseline_features(cfg, test_rows, ckpt_cfg["model"], tfidf_model)
        preds = [LABEL_ORDER[i] for i in model.predict(x)]
    metrics = evaluate(preds, gold)
    _write_json(cfg.output_dir / "eval" / "metrics.json", metrics)
    return {"accuracy": metrics["accuracy"], "macro_f1": metrics["macro_f1"],
            "test_instances": len(test_rows)}


def stage_compare(cfg: PipelineConfig) -> dict:
    if cfg.gold_path is None:
        raise ConfigError("compare stage requires [compare].gold in the config")
    manifest = DatasetManifest.load(cfg.output_dir / "manifest" / "manifest.jsonl")
    gold = load_gold(cfg.gold_path)
    report = compare_to_gold(manifest, gold)
    _write_json(cfg.output_dir / "compare" / "report.json", report)
    return report


def stage_review_export(cfg: PipelineConfig) -> dict:
    manifest = DatasetManifest.load(cfg.output_dir / "split" / "manifest.jsonl")
    meta = review.export_review_session(
        manifest, cfg.output_dir / "clips",
        cfg.output_dir / "review" / "session",
        sample_size=cfg.review_sample_size, seed=cfg.review_seed)
    return meta


def stage_review_import(cfg: PipelineConfig) -> dict:
    if cfg.verdicts_path is None:
        raise ConfigError("review-import requires [review].verdicts in the config")
    manifest = DatasetManifest.load(cfg.output_dir / "split" / "manifest.jsonl")
    verdicts = review.load_verdicts(cfg.verdicts_path)
    release, report = review.import_verdicts(manifest, verdicts)
    release.save(cfg.output_dir / "review" / "release_manifest.jsonl")
    _write_json(cfg.output_dir / "review" / "error_report.json", report)
    return {"released": len(release.instances),
            "excluded": len(report["excluded"]),
            "segmentation_error_rate": report["segmentation_error_rate"],
            "not_implicit_rate": report["not_implicit_rate"]}


# --------------------------------------------------------------------------
# provenance and dispatch
# --------------------------------------------------------------------------


def _corpus_files(cfg: PipelineConfig) -> list[Path]:
    files = [cfg.talks_file]
    for talk in _load_talks(cfg):
        for sub in talk["subtitles"].values():
            files.append(cfg.corpus_root / sub["path"])
    files.extend(cfg.lexicons.values())
    return files


def _out_files(cfg, *rels) -> list[Path]:
    return [cfg.output_dir / rel for rel in rels]


def _stage_spec(cfg: PipelineConfig, stage: str) -> dict:
    """Input files, config slice, upstream stage, and primary outputs."""
    o = cfg.output_dir
    seg_cfg = {"mode": cfg.segmenter.mode, "fixture": cfg.segmenter.fixture,
               "url": cfg.segmenter.url, "argv": cfg.segmenter.argv,
               "few_shot": cfg.segmenter.few_shot}
    train_cfg = cfg.train.__dict__
    def glob(rel: str, pattern: str) -> list[Path]:
        base = o / rel
        return sorted(base.glob(pattern)) if base.exists() else []

    ingest_outputs = (glob("ingest/segments", "*.json")
                      + glob("ingest/lexicons", "*.json"))
    corpus_words_audio: list[Path] = []
    if cfg.talks_file.exists():
        for talk in _load_talks(cfg):
            wpath = cfg.corpus_root / "words" / f"{talk['talk_id']}.jsonl"
            apath = cfg.corpus_root / talk["audio"]
            corpus_words_audio.extend(p for p in (wpath, apath) if p.exists())
    specs = {
        "ingest": dict(
            upstream=None, inputs=_corpus_files(cfg),
            slice={"lexicons": sorted(map(str, cfg.lexicons))},
            outputs=[o / "ingest" / "report.json"]),
        "mine": dict(
            upstream="ingest",
            inputs=[o / "ingest" / "report.json"] + ingest_outputs,
            slice={"pairs": cfg.pairs, "ratio": [cfg.ratio_low, cfg.ratio_high],
                   "min_overlap_frac": cfg.min_overlap_frac},
            outputs=[o / "mine" / "instances.jsonl",
                     o / "mine" / "report.jsonl",
                     o / "mine" / "summary.json"]),
        "segment": dict(
            upstream="mine",
            inputs=[o / "mine" / "instances.jsonl"] + ingest_outputs
            + ([Path(cfg.segmenter.fixture)] if cfg.segmenter.fixture else []),
            slice=seg_cfg,
            outputs=[o / "segment" / "contexts.jsonl",
                     o / "segment" / "summary.json"]),
        "align": dict(
            upstream="segment",
            inputs=[o / "segment" / "contexts.jsonl"] + corpus_words_audio,
            slice={},
            outputs=[o / "align" / "spans.jsonl",
                     o / "align" / "summary.json"]),
        "prosody": dict(
            upstream="align",
            inputs=[o / "align" / "spans.jsonl"] + glob("clips", "*.wav"),
            slice={"n_mels": cfg.n_mels},
            outputs=[o / "prosody" / "index.jsonl",
                     o / "prosody" / "summary.json"]),
        "assemble": dict(
            upstream="prosody",
            inputs=[o / "mine" / "instances.jsonl",
                    o / "segment" / "contexts.jsonl",
                    o / "align" / "spans.jsonl",
                    o / "prosody" / "index.jsonl"],
            slice={},
            outputs=[o / "manifest" / "manifest.jsonl"]),
        "split": dict(
            upstream="assemble",
            inputs=[o / "manifest" / "manifest.jsonl"],
            slice={"ratios": list(cfg.split_ratios), "seed": cfg.split_seed},
            outputs=[o / "split" / "manifest.jsonl"]),
        "stats": dict(
            upstream="split",
            inputs=[o / "split" / "manifest.jsonl"],
            slice={},
            outputs=[o / "stats" / "stats.json", o / "stats" / "stats.txt"]),
        "train": dict(
            upstream="split",
            inputs=[o / "split" / "manifest.jsonl",
                    o / "prosody" / "index.jsonl"] + glob("features", "*.idrf"),
            slice=train_cfg,
            outputs=[o / "train" / "best.idrc", o / "train" / "summary.json"]),
        "eval": dict(
            upstream="train",
            inputs=[o / "train" / "best.idrc",
                    o / "split" / "manifest.jsonl"],
            slice={},
            outputs=[o / "eval" / "metrics.json"]),
        "compare": dict(
            upstream="assemble",
            inputs=[o / "manifest" / "manifest.jsonl"]
            + ([cfg.gold_path] if cfg.gold_path else []),
            slice={"gold": str(cfg.gold_path)},
            outputs=[o / "compare" / "report.json"]),
        "review-export": dict(
            upstream="split",
            inputs=[o / "split" / "manifest.jsonl"],
            slice={"sample_size": cfg.review_sample_size,
                   "seed": cfg.review_seed},
            outputs=[o / "review" / "session" / "session.jsonl"]),
        "review-import": dict(
            upstream="split",
            inputs=[o / "split" / "manifest.jsonl"]
            + ([cfg.verdicts_path] if cfg.verdicts_path else []),
            slice={"verdicts": str(cfg.verdicts_path)},
            outputs=[o / "review" / "release_manifest.jsonl",
                     o / "review" / "error_report.json"]),
    }
    if stage not in specs:
        raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGES}")
    return specs[stage]


_STAGE_FUNCS = {
    "ingest": stage_ingest, "mine": stage_mine, "segment": stage_segment,
    "align": stage_align, "prosody": stage_prosody, "assemble": stage_assemble,
    "split": stage_split, "stats": stage_stats, "train": stage_train,
    "eval": stage_eval, "compare": stage_compare,
    "review-export": stage_review_export, "review-import": stage_review_import,
}


def run_stage(stage: str, cfg: PipelineConfig, force: bool = False,
              dry_run: bool = False) -> dict:
    spec = _stage_spec(cfg, stage)
    missing = [p for p in spec["inputs"] if not p.exists()]
    if missing:
        needed = spec["upstream"] or "corpus preparation"
        raise UpstreamMissing(
            f"missing inputs for stage {stage!r}: "
            f"{', '.join(str(m) for m in missing)}; run {needed!r} first")
    input_hash = _hash_inputs(spec.get("slice", {}), spec["inputs"])
    meta_path = cfg.output_dir / "meta" / f"{stage}.json"
    if not force and meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if (meta.get("input_hash") == input_hash
                and all(Path(pp).exists() for pp in meta.get("outputs", []))):
            _log_event(cfg, stage, "up-to-date")
            return {"stage": stage, "status": "up-to-date",
                    "report": meta.get("report", {})}
    if dry_run:
        return {"stage": stage, "status": "would-run",
                "inputs": [str(p) for p in spec["inputs"]],
                "outputs": [str(p) for p in spec["outputs"]]}
    _log_event(cfg, stage, "start")
    try:
        report = _STAGE_FUNCS[stage](cfg)
    except (UpstreamMissing, ConfigError):
        raise
    except Exception as exc:
        _log_event(cfg, stage, "failure", error=str(exc))
        raise StageFailure(f"stage {stage!r} failed: {exc}") from exc
    meta = {"stage": stage, "input_hash": input_hash,
            "outputs": [str(p) for p in spec["outputs"]], "report": report}
    _write_json(meta_path, meta)
    _log_event(cfg, stage, "done", report=report)
    return {"stage": stage, "status": "ok", "report": report}
