"""Command-line front end: graph building, decoding, compression, benchmarks.

Everything here is deterministic for fixed inputs and flags; there is no RNG
anywhere in the engine. ``TT_LOG`` sets the log level, ``TT_BACKEND`` picks
the kernel backend.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import logging
import os
import sys

import numpy as np

from . import compress as compress_mod
from . import container, decoder, features, metrics, wfst

log = logging.getLogger("ttasr")


def _setup_logging() -> None:
    level = os.environ.get("TT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _params_from_args(args) -> decoder.DecodeParams:
    gamma = decoder.FSD_SENTINEL if args.fsd else args.gamma
    return decoder.DecodeParams(beta_blank=args.beta, gamma_blank=gamma,
                                beam=args.beam, max_active=args.max_active)


def _add_decode_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=float, default=0.95,
                   help="blank skip threshold in probability domain (>1 disables skipping)")
    p.add_argument("--beta", type=float, default=2.0,
                   help="blank deweight, subtracted in the natural-log domain")
    p.add_argument("--fsd", action="store_true",
                   help="frame-synchronous mode: shorthand for a gamma sentinel > 1")
    p.add_argument("--beam", type=float, default=16.0)
    p.add_argument("--max-active", type=int, default=1000)


def cmd_graph(args) -> int:
    with open(args.lexicon) as fh:
        entries = wfst.parse_lexicon(fh.read())
    phone_syms = None
    if args.phones:
        with open(args.phones) as fh:
            phone_syms = wfst.SymbolTable.from_text(fh.read())
    lexicon = wfst.build_lexicon(entries, phone_syms=phone_syms)
    with open(args.grammar) as fh:
        grammar = wfst.build_grammar(fh.read(), word_syms=lexicon.osyms)
    lg = wfst.compose(lexicon, grammar)
    lg = wfst.rm_epsilon(lg)
    lg = wfst.determinize(lg)
    lg = wfst.minimize(lg)
    lg = wfst.strip_labels(lg, wfst.lexicon_disambig_ids(lexicon))
    lg = wfst.rm_epsilon(lg)
    wfst.save_graph_dir(args.out, lg)
    log.info("graph: %d states, %d arcs", lg.num_states, lg.num_arcs)
    return 0


def _decode_one(model, graph, prior, params, path, word_syms, phone_syms):
    utt = features.utt_id_for(path)
    feats = features.read_features(path, model.config.feat_dim)
    try:
        hyp, trace = decoder.decode_utterance(model, feats, params,
                                              graph=graph, prior=prior)
    except wfst.NoHypothesisError as exc:
        return utt, None, None, str(exc)
    if graph is not None:
        toks = [word_syms.sym_of(l) for l in hyp] if word_syms else [str(l) for l in hyp]
    else:
        toks = [phone_syms.sym_of(l) for l in hyp] if phone_syms else [str(l) for l in hyp]
    return utt, toks, trace, None


def _load_decode_inputs(args):
    model = container.load_model_file(args.model)
    graph = prior = None
    if args.graph:
        graph = wfst.load_graph_dir(args.graph)
    phone_syms = None
    if getattr(args, "phones", None):
        with open(args.phones) as fh:
            phone_syms = wfst.SymbolTable.from_text(fh.read())
    elif graph is not None:
        phone_syms = graph.isyms
    if getattr(args, "priors", None):
        if graph is None or graph.isyms is None:
            raise SystemExit("--priors needs a graph with a phone symbol table")
        with open(args.priors) as fh:
            prior = wfst.PhonePrior.from_text(fh.read(), graph.isyms,
                                              model.config.num_labels)
    return model, graph, prior, phone_syms


def cmd_decode(args) -> int:
    model, graph, prior, phone_syms = _load_decode_inputs(args)
    params = _params_from_args(args)
    word_syms = graph.osyms if graph is not None else None

    def work(path):
        return _decode_one(model, graph, prior, params, path, word_syms, phone_syms)

    if args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(work, args.features))
    else:
        results = [work(p) for p in args.features]

    out = open(args.output, "w") if args.output else sys.stdout
    trace_fh = open(args.trace, "w") if args.trace else None
    failures = 0
    try:
        for utt, toks, trace, err in results:
            if err is not None:
                failures += 1
                log.error("decode failed for %s: %s", utt, err)
                continue
            print(f"{utt} {' '.join(toks)}".rstrip(), file=out)
            if trace_fh:
                print(decoder.trace_report(utt, trace), file=trace_fh)
    finally:
        if args.output:
            out.close()
        if trace_fh:
            trace_fh.close()
    if failures:
        log.warning("%d/%d utterances produced no hypothesis", failures, len(results))
    return 0


def cmd_compress(args) -> int:
    model = container.load_model_file(args.input)
    spec = compress_mod.CompressionSpec(
        targets=tuple(args.targets) if args.targets else compress_mod.DEFAULT_TARGETS,
        rank=args.rank, energy=args.energy, quantize=args.quantize)
    before = model.param_count()
    model = compress_mod.svd_compress(model, spec)
    after = model.param_count()
    container.save_model_file(model, args.output)
    print(f"params_before={before} params_after={after} "
          f"ratio={after / before:.4f}")
    return 0


def cmd_quantize(args) -> int:
    model = container.load_model_file(args.input)
    targets = tuple(args.targets) if args.targets else compress_mod.DEFAULT_TARGETS
    model = compress_mod.quantize_int8(model, targets=targets)
    container.save_model_file(model, args.output)
    print(f"params={model.param_count()}")
    return 0


def _read_refs(path):
    refs = {}
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if parts:
                refs[parts[0]] = parts[1:]
    return refs


def cmd_bench(args) -> int:
    model, graph, prior, phone_syms = _load_decode_inputs(args)
    word_syms = graph.osyms if graph is not None else None
    refs = _read_refs(args.refs) if args.refs else None
    gammas = [float(g) for g in args.gammas.split(",")]
    betas = [float(b) for b in args.betas.split(",")]
    feats = [(features.utt_id_for(p), features.read_features(p, model.config.feat_dim))
             for p in args.features]
    audio_seconds = args.audio_seconds or sum(len(f) for _, f in feats) * 0.01

    header = "gamma beta alpha search_fraction rtf s_rtf"
    if refs:
        header += " sub del ins wer"
    print(header)
    for gamma in gammas:
        for beta in betas:
            params = decoder.DecodeParams(beta_blank=beta, gamma_blank=gamma,
                                          beam=args.beam, max_active=args.max_active)
            traces = []
            err = metrics.ErrorBreakdown(0, 0, 0, 0)
            for utt, mat in feats:
                try:
                    hyp, trace = decoder.decode_utterance(model, mat, params,
                                                          graph=graph, prior=prior)
                except wfst.NoHypothesisError:
                    log.error("bench: no hypothesis for %s at gamma=%s beta=%s",
                              utt, gamma, beta)
                    continue
                traces.append(trace)
                if refs is not None and utt in refs:
                    if graph is not None:
                        toks = [word_syms.sym_of(l) for l in hyp]
                    else:
                        toks = [phone_syms.sym_of(l) for l in hyp] if phone_syms \
                            else [str(l) for l in hyp]
                    err = err + metrics.align_and_count(refs[utt], toks)
            rep = metrics.speed_report(traces, audio_seconds)
            row = (f"{gamma:g} {beta:g} {rep.mean_blank_rate:.4f} "
                   f"{rep.search_fraction:.4f} {rep.rtf:.4f} {rep.s_rtf:.4f}")
            if refs:
                row += (f" {err.substitutions} {err.deletions} {err.insertions}"
                        f" {err.wer:.4f}")
            print(row)
    return 0


def cmd_info(args) -> int:
    model = container.load_model_file(args.model)
    for key, value in model.config.as_dict().items():
        print(f"{key}={value}")
    print(f"param_count={model.param_count()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ttasr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graph", help="build the decoding graph from lexicon + grammar")
    g.add_argument("--lexicon", required=True)
    g.add_argument("--grammar", required=True)
    g.add_argument("--phones", help="phone symbol table matching the model's label ids")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_graph)

    d = sub.add_parser("decode", help="decode feature files")
    d.add_argument("--model", required=True)
    d.add_argument("--graph", help="graph directory (omit for greedy phone output)")
    d.add_argument("--phones", help="phone symbol table for greedy output")
    d.add_argument("--priors", help="phone prior file: 'phone prob' lines")
    d.add_argument("--output", help="hypothesis file (default stdout)")
    d.add_argument("--trace", help="write key=value trace lines here")
    d.add_argument("--jobs", type=int, default=1)
    d.add_argument("features", nargs="+")
    _add_decode_params(d)
    d.set_defaults(func=cmd_decode)

    c = sub.add_parser("compress", help="low-rank factorization of projection layers")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--out", dest="output", required=True)
    c.add_argument("--rank", type=int)
    c.add_argument("--energy", type=float)
    c.add_argument("--quantize", action="store_true")
    c.add_argument("--targets", nargs="*")
    c.set_defaults(func=cmd_compress)

    q = sub.add_parser("quantize", help="int8-quantize projection layers")
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--out", dest="output", required=True)
    q.add_argument("--targets", nargs="*")
    q.set_defaults(func=cmd_quantize)

    b = sub.add_parser("bench", help="sweep skip threshold / deweight settings")
    b.add_argument("--model", required=True)
    b.add_argument("--graph")
    b.add_argument("--phones")
    b.add_argument("--priors")
    b.add_argument("--refs", help="reference transcripts: 'utt tok tok ...'")
    b.add_argument("--gammas", default="2.0,0.95,0.85,0.75")
    b.add_argument("--betas", default="0,2")
    b.add_argument("--beam", type=float, default=16.0)
    b.add_argument("--max-active", type=int, default=1000)
    b.add_argument("--audio-seconds", type=float)
    b.add_argument("features", nargs="+")
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("info", help="print model config and parameter count")
    i.add_argument("--model", required=True)
    i.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, container.ModelFormatError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
