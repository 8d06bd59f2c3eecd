"""Command-line interface.

    segctc train CONFIG [--set section.key=value ...] [--resume CHECKPOINT]
    segctc decode CHECKPOINT FEATURES --mode {scrf,ctc} --out HYP [--labels LABELS] [--vocab VOCAB]
    segctc score REF HYP [--mapping MAPPING]
    segctc generate OUTDIR [--num-train N] [--num-valid N] [--vocab-size V] [--dim D] ...
    segctc selfcheck [--scale {small,full}]

``--set`` values override the config file, which overrides built-in defaults.
"""

import argparse
import logging
import shutil
import sys
import time
from pathlib import Path

from . import checkpoint as ckpt
from . import joint
from .config import ConfigError, config_template, load_config
from .data import (DataFormatError, PhoneMapping, Vocabulary, load_dataset, map_labels, read_features,
                   read_labels, synth_generate, write_dataset, write_labels)
from .evaluation import corpus_counts, edit_distance, emit_convergence_csv, format_per
from .numerics import NumericalError
from .selfcheck import FAULTS, run_selfcheck


class CommandError(Exception):
    pass


def _epoch_path(out_dir, epoch):
    return Path(out_dir) / f"epoch{epoch:03d}.ckpt"


def cmd_train(args):
    cfg = load_config(args.config, args.set or ())
    tc, mc = cfg.train, cfg.model
    vocab = Vocabulary.load(cfg.path("data", "vocab"))
    train_set = load_dataset(cfg.path("data", "train_features"), cfg.path("data", "train_labels"), vocab)
    valid_set = load_dataset(cfg.path("data", "valid_features"), cfg.path("data", "valid_labels"), vocab)
    if not train_set:
        raise CommandError("training set is empty")
    out_dir = Path(cfg.path("train", "output_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    config_text = cfg.to_text()
    mapping_path = cfg.path("data", "mapping")
    mapping = PhoneMapping.load(mapping_path) if mapping_path else None

    if args.resume:
        start = ckpt.load_checkpoint(args.resume)
        if start.vocab.symbols != vocab.symbols:
            raise CommandError("vocabulary of the resumed checkpoint differs from the config's")
        params, state = start.params, start.state
    else:
        params = joint.init_model(train_set[0].features.shape[1], len(vocab), mc, seed=tc.seed)
        state = joint.initial_state(tc)
        ckpt.save_checkpoint(_epoch_path(out_dir, 0), params, vocab, config_text, tc.seed, state)

    def on_epoch(p, st):
        ckpt.save_checkpoint(_epoch_path(out_dir, st.epoch), p, vocab, config_text, tc.seed, st)

    t0 = time.perf_counter()
    params, records = joint.train(train_set, valid_set, tc, params, state=state, on_epoch=on_epoch,
                                  mapping=mapping, vocab=vocab)
    if records:
        last = _epoch_path(out_dir, records[-1].epoch)
        shutil.copyfile(last, out_dir / "final.ckpt")
        emit_convergence_csv(records, out_dir / "convergence.csv")
        print(f"trained {records[-1].epoch} epochs in {time.perf_counter() - t0:.1f}s; "
              f"valid {format_per(records[-1].valid_per)}")
    else:
        print("epochs = 0: wrote initial checkpoint only")
    return 0


def cmd_decode(args):
    model = ckpt.load_checkpoint(args.checkpoint)
    vocab = model.vocab
    if args.vocab is not None and Vocabulary.load(args.vocab).symbols != vocab.symbols:
        raise CommandError("vocabulary mismatch between checkpoint and dataset")
    feats = read_features(args.features)
    if args.labels is not None:
        try:
            for uid, syms in read_labels(args.labels).items():
                vocab.encode(syms, where=f" in utterance {uid}")
        except DataFormatError as e:
            raise CommandError(f"vocabulary mismatch between checkpoint and dataset: {e}") from None
    in_dim = model.params.encoder.input_dim
    L = model.config.train.max_seg_len
    entries = []
    for uid, x in feats.items():
        if x.shape[1] != in_dim:
            raise CommandError(f"utterance {uid} has feature dim {x.shape[1]}, model expects {in_dim}")
        entries.append((uid, vocab.decode(joint.decode(model.params, x, args.mode, L))))
    write_labels(args.out, entries)
    return 0


def cmd_score(args):
    refs = read_labels(args.ref)
    hyps = read_labels(args.hyp)
    missing = sorted(set(refs) ^ set(hyps))
    if missing:
        raise CommandError(f"unmatched utterance id {missing[0]}")
    mapping = PhoneMapping.load(args.mapping) if args.mapping else None
    for uid in refs:
        ref, hyp = refs[uid], hyps[uid]
        if mapping is not None:
            ref, hyp = map_labels(ref, mapping), map_labels(hyp, mapping)
        c = edit_distance(ref, hyp)
        print(f"{uid} N={c.ref_length} S={c.substitutions} I={c.insertions} D={c.deletions}")
    total = corpus_counts(refs, hyps, mapping)
    print(f"corpus N={total.ref_length} S={total.substitutions} I={total.insertions} D={total.deletions}")
    print(format_per(total.per))
    return 0


def cmd_generate(args):
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    common = dict(vocab_size=args.vocab_size, feature_dim=args.dim, seg_len_range=tuple(args.seg_len),
                  noise_sigma=args.sigma, seed=args.seed, label_count_range=tuple(args.label_count))
    train = synth_generate(args.num_train, split=0, **common)
    valid = synth_generate(args.num_valid, split=1, **common)
    write_dataset(train.utterances, train.vocab, out / "train.feats", out / "train.labels", out / "vocab.txt")
    write_dataset(valid.utterances, valid.vocab, out / "valid.feats", out / "valid.labels")
    PhoneMapping.identity(train.vocab.symbols).write(out / "mapping.txt")
    (out / "train.cfg").write_text(config_template(
        train_features="train.feats", train_labels="train.labels", valid_features="valid.feats",
        valid_labels="valid.labels", vocab="vocab.txt", mapping="mapping.txt", output_dir="run"))
    print(f"wrote {len(train.utterances)} train / {len(valid.utterances)} valid utterances to {out}")
    return 0


def cmd_selfcheck(args):
    t0 = time.perf_counter()
    results = run_selfcheck(args.scale, fault=args.inject_fault)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"selfcheck ({args.scale}): {len(results) - len(failed)}/{len(results)} passed", flush=True)
    print(f"elapsed {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="segctc", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a joint model from a config file")
    p.add_argument("config")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
    p.add_argument("--resume", metavar="CHECKPOINT", help="continue from an epoch checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="decode a feature file with one of the two heads")
    p.add_argument("checkpoint")
    p.add_argument("features")
    p.add_argument("--mode", choices=("scrf", "ctc"), required=True)
    p.add_argument("--out", required=True, help="hypothesis file to write")
    p.add_argument("--labels", help="reference labels, checked against the checkpoint vocabulary")
    p.add_argument("--vocab", help="dataset vocabulary, must equal the checkpoint's")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("score", help="phone error rate of a hypothesis file")
    p.add_argument("ref")
    p.add_argument("hyp")
    p.add_argument("--mapping", help="phone mapping applied to both sides before scoring")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("generate", help="write a synthetic segmental dataset and config")
    p.add_argument("outdir")
    p.add_argument("--num-train", type=int, default=500)
    p.add_argument("--num-valid", type=int, default=100)
    p.add_argument("--vocab-size", type=int, default=5)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--seg-len", type=int, nargs=2, default=(4, 10), metavar=("MIN", "MAX"))
    p.add_argument("--label-count", type=int, nargs=2, default=(3, 8), metavar=("MIN", "MAX"))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("selfcheck", help="audit the dynamic programs and gradients")
    p.add_argument("--scale", choices=("small", "full"), default="small")
    p.add_argument("--inject-fault", choices=sorted(FAULTS), help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (CommandError, ConfigError, DataFormatError, ckpt.CheckpointError, NumericalError,
            ValueError, OSError) as e:
        print(f"segctc {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
