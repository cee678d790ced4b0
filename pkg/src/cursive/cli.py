"""Command-line entry points for every pipeline stage.

Exit codes: 0 success, 2 usage error (argparse), 3 bad configuration,
4 missing artifact, 1 anything else. Every subcommand accepts ``--config``
(a project JSON file) and ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 3
EXIT_MISSING = 4


def _load_config(args):
    from .config import ProjectConfig
    if getattr(args, "config", None):
        return ProjectConfig.load(args.config)
    return ProjectConfig()


def _read_records(path):
    from . import dataset as ds
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"records file not found: {p}")
    return ds.ingest_json(p.read_bytes())


def _load_checkpoint(path):
    from .training import load_checkpoint
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"checkpoint not found: {p}")
    return load_checkpoint(p)


def _tokenizer_for(ckpt, cfg):
    from .tokenizer import TokenizerConfig
    tok = cfg.tokenizer_config()
    if tok is None:
        extra = ckpt.extra.get("tokenizer") if ckpt is not None else None
        if extra:
            tok = TokenizerConfig.from_dict(extra)
    if tok is None:
        raise ValueError("tokenizer r_max is underived; set it in the config "
                         "or use a checkpoint that records it")
    return tok


def _write_or_print(data: bytes, out):
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))


def cmd_wordbank(args):
    from . import wordbank as wb
    cfg = _load_config(args)
    bank = wb.generate_bank(cfg.wordbank, args.n, rng=args.seed)
    if args.json:
        payload = json.dumps(bank, separators=(",", ":")).encode() + b"\n"
    else:
        payload = ("\n".join(bank) + "\n").encode("utf-8")
    _write_or_print(payload, args.out)
    return EXIT_OK


def cmd_synth(args):
    from . import dataset as ds
    from . import synth
    from . import wordbank as wb
    cfg = _load_config(args)
    bank = wb.generate_bank(cfg.wordbank, args.n, rng=args.seed)
    records = synth.render_bank(bank, seed=args.seed, jitter=args.jitter)
    _write_or_print(ds.export_json(records), args.out)
    return EXIT_OK


def cmd_ingest(args):
    from . import dataset as ds
    records = _read_records(args.input)
    _write_or_print(ds.export_json(records), args.out)
    print(f"ingested {len(records)} records", file=sys.stderr)
    return EXIT_OK


def cmd_build_corpus(args):
    from . import dataset as ds
    cfg = _load_config(args)
    records = _read_records(args.records)
    manifest = ds.build_corpus(
        records, args.train_count, args.test_count,
        tok_cfg=cfg.tokenizer_config(), cfg=cfg.dataset, seed=args.seed,
        workers=args.workers, out_dir=args.out,
        theta_bins=cfg.theta_bins, r_bins=cfg.r_bins,
    )
    manifest["project_config_hash"] = cfg.hash()
    (Path(args.out) / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")))
    print(json.dumps({k: manifest["splits"][k]["count"] for k in manifest["splits"]}))
    return EXIT_OK


def cmd_train(args):
    from . import dataset as ds
    from .tokenizer import TokenizerConfig
    from .training import train
    from .util import config_hash
    cfg = _load_config(args)
    corpus_dir = Path(args.corpus)
    manifest_path = corpus_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"corpus manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    expected = config_hash({"dataset": cfg.dataset.to_dict(),
                            "tokenizer": manifest["tokenizer_config"],
                            "seed": manifest["seed"]})
    if manifest["config_hash"] != expected:
        from .config import ConfigError
        raise ConfigError("corpus manifest was built under a different dataset "
                          "config; refusing to train against it")
    tok = TokenizerConfig.from_dict(manifest["tokenizer_config"])
    train_seqs = ds.load_corpus(corpus_dir, "train")
    test_seqs = ds.load_corpus(corpus_dir, "test")
    tc = cfg.train
    if args.steps is not None:
        from dataclasses import replace
        tc = replace(tc, total_steps=args.steps)
    ckpt = train(train_seqs, cfg.model, tc, tok.pad_id, checkpoint_dir=args.out,
                 test_corpus=test_seqs, init_seed=args.seed)
    ckpt.extra["tokenizer"] = tok.to_dict()
    ckpt.extra["project_config_hash"] = cfg.hash()
    from .training import save_checkpoint
    save_checkpoint(Path(args.out) / "final.npz", ckpt)
    print(f"trained to step {ckpt.step}; final loss "
          f"{ckpt.extra.get('final_train_loss'):.4f}")
    return EXIT_OK


def cmd_sample(args):
    from . import sampler as sp
    cfg = _load_config(args)
    ckpt = _load_checkpoint(args.checkpoint)
    tok = _tokenizer_for(ckpt, cfg)
    sc = sp.SamplingConfig(temperature=args.temperature, seed=args.seed,
                           max_tokens=args.max_tokens)
    page = sp.sample(ckpt, args.text, sc, tok)
    Path(args.out).write_text(page.to_json(), encoding="utf-8")
    if args.svg:
        Path(args.svg).write_bytes(sp.render_svg(page, args.line_width_chars))
    print(f"sampled {len(page.ids)} tokens, {page.word_count} words -> {args.out}")
    return EXIT_OK


def cmd_regen(args):
    from . import sampler as sp
    cfg = _load_config(args)
    ckpt = _load_checkpoint(args.checkpoint)
    page_path = Path(args.page)
    if not page_path.exists():
        raise FileNotFoundError(f"page not found: {page_path}")
    page = sp.GeneratedPage.from_json(page_path.read_text(encoding="utf-8"))
    indices = [int(x) for x in args.words.split(",") if x != ""]
    sc = sp.SamplingConfig(temperature=args.temperature, seed=args.seed,
                           max_tokens=args.max_tokens)
    out = sp.regenerate(ckpt, page, indices, sc)
    Path(args.out).write_text(out.to_json(), encoding="utf-8")
    if args.svg:
        Path(args.svg).write_bytes(sp.render_svg(out, args.line_width_chars))
    print(f"regenerated words {indices} -> {args.out}")
    return EXIT_OK


def cmd_render(args):
    from . import sampler as sp
    page_path = Path(args.page)
    if not page_path.exists():
        raise FileNotFoundError(f"page not found: {page_path}")
    page = sp.GeneratedPage.from_json(page_path.read_text(encoding="utf-8"))
    Path(args.out).write_bytes(sp.render_svg(page, args.line_width_chars))
    return EXIT_OK


def cmd_attn(args):
    from . import sampler as sp
    from .asciitok import AsciiTokenizer
    cfg = _load_config(args)
    ckpt = _load_checkpoint(args.checkpoint)
    page_path = Path(args.page)
    if not page_path.exists():
        raise FileNotFoundError(f"page not found: {page_path}")
    page = sp.GeneratedPage.from_json(page_path.read_text(encoding="utf-8"))
    maps = sp.extract_attention(ckpt, page.ids, AsciiTokenizer().encode(page.text))
    files = sp.plot_attention(maps, args.out, text=page.text)
    print(f"wrote {len(files)} attention maps to {args.out}")
    return EXIT_OK


def cmd_serve(args):
    import uvicorn
    from .service import create_app
    cfg = _load_config(args)
    app = create_app(cfg, store_path=args.store, checkpoint_path=args.checkpoint,
                     prompt_seed=args.seed, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cursive",
        description="Cursive handwriting synthesis: tokenize, train, sample, serve.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="project config JSON file")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("wordbank", help="emit synthetic prompt words")
    common(p)
    p.add_argument("--n", type=int, default=75)
    p.add_argument("--json", action="store_true", help="emit a JSON array")
    p.add_argument("--out")
    p.set_defaults(func=cmd_wordbank)

    p = sub.add_parser("synth", help="render synthetic stroke records")
    common(p)
    p.add_argument("--n", type=int, default=3500)
    p.add_argument("--jitter", type=float, default=0.02)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate and canonicalize a record export")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-corpus", help="assemble tokenized training corpora")
    common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--train-count", type=int, default=745_000)
    p.add_argument("--test-count", type=int, default=5_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("train", help="train the stroke model on a corpus")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--steps", type=int, help="override train.total_steps")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="generate handwriting for a text")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-tokens", type=int, default=1050)
    p.add_argument("--line-width-chars", type=int, default=24)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("regen", help="regenerate selected words of a page")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--page", required=True)
    p.add_argument("--words", required=True, help="comma-separated word indices")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-tokens", type=int, default=1050)
    p.add_argument("--line-width-chars", type=int, default=24)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_regen)

    p = sub.add_parser("render", help="render a page JSON to SVG")
    common(p)
    p.add_argument("--page", required=True)
    p.add_argument("--line-width-chars", type=int, default=24)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("attn", help="plot attention heatmaps for a page")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--page", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attn)

    p = sub.add_parser("serve", help="run the collection/generation service")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8712)
    p.add_argument("--checkpoint")
    p.add_argument("--store", default="samples.ndjson")
    p.add_argument("--ui-dir")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    from .config import ConfigError
    from .dataset import SchemaError
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigError, SchemaError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
