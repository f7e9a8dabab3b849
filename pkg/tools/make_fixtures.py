#!/usr/bin/env python3
"""Generate the committed desk-scale fixture kit.

The fixture model is constructed, not trained: features carry one channel per
label, the subsampler passes the current frame through, the joint maps channel
l to label l's logit, and the predictor suppresses the label just emitted so
each phone fires exactly once. Weak phone instances (reduced amplitude) lose
the argmax to blank until the blank score is deweighted, which is what the
deweight sweep needs: deletions at beta=0 that disappear at beta=2.

Run from the repository root:  python tools/make_fixtures.py
Outputs are committed; regeneration is byte-identical (fixed seeds).
"""

from __future__ import annotations

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ttasr import cli, container
from ttasr.nnet import ConvLayer, DenseMap, DfsmnLayer, ModelConfig, TransducerModel

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")
OUT = os.path.join(ROOT, "tests", "fixtures")

PHONES = ["a", "e", "i", "o", "u", "k", "l", "m", "n", "p", "s", "t"]

LEXICON = [
    ("a", ["a"]),
    ("e", ["e"]),
    ("ka", ["k", "a"]),
    ("kal", ["k", "a", "l"]),
    ("ki", ["k", "i"]),
    ("ku", ["k", "u"]),
    ("la", ["l", "a"]),
    ("lim", ["l", "i", "m"]),
    ("lo", ["l", "o"]),
    ("ma", ["m", "a"]),
    ("men", ["m", "e", "n"]),
    ("mi", ["m", "i"]),
    ("na", ["n", "a"]),
    ("nos", ["n", "o", "s"]),
    ("pa", ["p", "a"]),
    ("pos", ["p", "o", "s"]),
    ("sea", ["s", "i"]),
    ("see", ["s", "i"]),
    ("ta", ["t", "a"]),
    ("tu", ["t", "u"]),
]

NUM_UTTS = 50
FRAMES_PER_PHONE = 8   # two subsampled frames
GAP_FRAMES = 4         # one subsampled silence frame between words
EDGE_FRAMES = 8        # leading/trailing silence
CLEAN_AMP = 2.0
WEAK_AMP = 0.734       # blank beats the phone by ~1 nat until deweighted
NOISE = 0.02
WEAK_PROB = 0.15

ALPHA_ENC = 8.0        # logit gain per label channel
BLANK_BONUS = 6.0      # standing blank logit
SUPPRESS = 4.0         # predictor feedback against the last emitted label


def build_model() -> TransducerModel:
    config = ModelConfig(feat_dim=13, encoder_dim=16, num_dfsmn_layers=2,
                         dfsmn_left=2, dfsmn_right=1, dfsmn_proj_dim=8,
                         joint_dim=16, embed_dim=16, pred_dim=16,
                         predictor_context=4, num_labels=13, blank_id=0)
    rng = np.random.default_rng(7)
    e, f, p = config.encoder_dim, config.feat_dim, config.dfsmn_proj_dim

    conv1_w = np.zeros((e, f, 3), dtype=np.float32)
    conv1_w[:f, :, 2] = np.eye(f, dtype=np.float32)
    conv2_w = np.zeros((e, e, 3), dtype=np.float32)
    conv2_w[:, :, 2] = np.eye(e, dtype=np.float32)

    def small(*shape, scale):
        return (rng.standard_normal(shape) * scale).astype(np.float32)

    dfsmn = [DfsmnLayer(DenseMap(small(p, e, scale=0.05)),
                        small(4, p, scale=0.1),
                        DenseMap(small(e, p, scale=0.05)),
                        np.zeros(e, dtype=np.float32))
             for _ in range(config.num_dfsmn_layers)]

    embedding = np.zeros((config.num_labels + 1, e), dtype=np.float32)
    for l in range(config.num_labels):
        embedding[l, l] = 1.0
    predictor_w = np.zeros((e, e, config.predictor_context), dtype=np.float32)
    predictor_w[:, :, -1] = np.eye(e, dtype=np.float32)

    w_out = np.zeros((config.num_labels, e), dtype=np.float32)
    for l in range(config.num_labels):
        w_out[l, l] = ALPHA_ENC
    b_out = np.zeros(config.num_labels, dtype=np.float32)
    b_out[config.blank_id] = BLANK_BONUS

    model = TransducerModel(
        config=config,
        subsampler=[ConvLayer(conv1_w, np.zeros(e, dtype=np.float32)),
                    ConvLayer(conv2_w, np.zeros(e, dtype=np.float32))],
        dfsmn=dfsmn,
        embedding=embedding,
        predictor_w=predictor_w,
        predictor_b=np.zeros(e, dtype=np.float32),
        joint_w_enc=np.eye(e, dtype=np.float32),
        joint_w_pred=(-SUPPRESS * np.eye(e)).astype(np.float32),
        joint_b=np.zeros(e, dtype=np.float32),
        joint_w_out=w_out,
        joint_b_out=b_out,
    )
    model.validate()
    return model


def synthesize(rng, phones, weak_flags):
    """Feature frames for a phone sequence with silences around words."""
    label_of = {p: i + 1 for i, p in enumerate(PHONES)}
    frames = []

    def emit(channel, amp, count):
        for _ in range(count):
            v = rng.standard_normal(13) * NOISE
            v[channel] += amp
            frames.append(np.abs(v) if channel == -1 else v)

    def silence(count):
        for _ in range(count):
            v = rng.standard_normal(13) * NOISE
            v[0] += CLEAN_AMP
            frames.append(v)

    silence(EDGE_FRAMES)
    for word_phones, word_weak in zip(phones, weak_flags):
        for ph, weak in zip(word_phones, word_weak):
            emit(label_of[ph], WEAK_AMP if weak else CLEAN_AMP, FRAMES_PER_PHONE)
        silence(GAP_FRAMES)
    silence(EDGE_FRAMES - GAP_FRAMES)
    return np.asarray(frames, dtype=np.float32)


def sample_corpus():
    rng = np.random.default_rng(2024)
    utts = []
    weak_total = 0
    for _ in range(NUM_UTTS):
        n_words = int(rng.integers(2, 5))
        words = []
        prons = []
        while len(words) < n_words:
            idx = int(rng.integers(0, len(LEXICON)))
            word, pron = LEXICON[idx]
            if prons and prons[-1][-1] == pron[0]:
                continue  # adjacent identical phones would be suppressed
            words.append(word)
            prons.append(pron)
        weak = []
        for pron in prons:
            flags = [bool(rng.random() < WEAK_PROB) for _ in pron]
            weak.append(flags)
            weak_total += sum(flags)
        utts.append((words, prons, weak))
    assert weak_total >= 10, f"only {weak_total} weak phone instances sampled"
    feats_rng = np.random.default_rng(515)
    rendered = [(words, prons, synthesize(feats_rng, prons, weak))
                for words, prons, weak in utts]
    return rendered


def write_corpus(rendered):
    feat_dir = os.path.join(OUT, "feats")
    os.makedirs(feat_dir, exist_ok=True)
    word_refs = []
    phone_refs = []
    paths = []
    for i, (words, prons, feats) in enumerate(rendered):
        utt = f"utt{i:03d}"
        path = os.path.join(feat_dir, f"{utt}.f32")
        feats.astype("<f4").tofile(path)
        paths.append(path)
        word_refs.append(f"{utt} {' '.join(words)}")
        phone_refs.append(f"{utt} {' '.join(p for pron in prons for p in pron)}")
    with open(os.path.join(OUT, "refs_words.txt"), "w") as fh:
        fh.write("\n".join(word_refs) + "\n")
    with open(os.path.join(OUT, "refs_phones.txt"), "w") as fh:
        fh.write("\n".join(phone_refs) + "\n")
    return paths


def write_lexicon_grammar():
    with open(os.path.join(OUT, "lexicon.txt"), "w") as fh:
        for word, pron in LEXICON:
            fh.write(f"{word} {' '.join(pron)}\n")
    with open(os.path.join(OUT, "phones.txt"), "w") as fh:
        fh.write("<eps> 0\n")
        for i, p in enumerate(PHONES):
            fh.write(f"{p} {i + 1}\n")

    rng = np.random.default_rng(99)
    words = [w for w, _ in LEXICON]
    bigrams = set()
    for w in words[:8]:
        bigrams.add(("<s>", w))
    while len(bigrams) < 40:
        a = words[int(rng.integers(0, len(words)))]
        b = words[int(rng.integers(0, len(words)))]
        bigrams.add((a, b))
    lines = ["\\data\\", f"ngram 1={len(words) + 2}", f"ngram 2={len(bigrams)}", "",
             "\\1-grams:", "-99 <s> -0.30103"]
    for w in words:
        lines.append(f"-1.30103 {w} -0.30103")
    lines.append("-1.30103 </s>")
    lines += ["", "\\2-grams:"]
    for a, b in sorted(bigrams):
        lines.append(f"-0.60206 {a} {b}")
    lines += ["", "\\end\\", ""]
    with open(os.path.join(OUT, "grammar.arpa"), "w") as fh:
        fh.write("\n".join(lines))


def main() -> None:
    os.makedirs(OUT, exist_ok=True)
    model = build_model()
    container.save_model_file(model, os.path.join(OUT, "model.ttrd"))
    write_lexicon_grammar()
    rendered = sample_corpus()
    paths = write_corpus(rendered)

    graph_dir = os.path.join(OUT, "graph")
    rc = cli.main(["graph",
                   "--lexicon", os.path.join(OUT, "lexicon.txt"),
                   "--grammar", os.path.join(OUT, "grammar.arpa"),
                   "--phones", os.path.join(OUT, "phones.txt"),
                   "--out", graph_dir])
    assert rc == 0

    model_path = os.path.join(OUT, "model.ttrd")
    goldens = [
        ("golden_fsd.txt", ["--fsd", "--beta", "2.0"], True),
        ("golden_psd.txt", ["--gamma", "0.10", "--beta", "2.0"], True),
        ("golden_greedy.txt", ["--beta", "2.0", "--gamma", "0.95",
                               "--phones", os.path.join(OUT, "phones.txt")], False),
    ]
    for name, flags, with_graph in goldens:
        argv = ["decode", "--model", model_path,
                "--output", os.path.join(OUT, name)]
        if with_graph:
            argv += ["--graph", graph_dir]
        argv += flags + paths
        rc = cli.main(argv)
        assert rc == 0, name
    print("fixtures written to", OUT)


if __name__ == "__main__":
    main()
