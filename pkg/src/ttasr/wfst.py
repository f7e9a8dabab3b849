"""Tropical-semiring WFSTs and the frame-driven token-passing search.

Weights are costs (negated natural-log probabilities): plus is min, times is
addition, and the best path is the Viterbi path. Label 0 is epsilon on both
tapes. The decoding graph is built as minimize(determinize(rm_epsilon(L o G)))
with homophone disambiguation symbols stripped at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

import numpy as np

EPSILON = 0
EPSILON_SYM = "<eps>"

LN10 = math.log(10.0)


class AlphabetError(ValueError):
    """Operand label alphabets are incompatible."""


class LexiconError(ValueError):
    """Bad lexicon entry."""


class GrammarFormatError(ValueError):
    """Malformed grammar source text."""


class BudgetExceededError(RuntimeError):
    """Determinization exceeded its state budget."""


class NoHypothesisError(RuntimeError):
    """No search token reached a final state."""


class SymbolTable:
    """Bijective symbol <-> id map; id 0 is always epsilon."""

    def __init__(self):
        self._sym2id: dict[str, int] = {EPSILON_SYM: 0}
        self._id2sym: dict[int, str] = {0: EPSILON_SYM}

    def add(self, sym: str) -> int:
        if sym in self._sym2id:
            return self._sym2id[sym]
        idx = len(self._sym2id)
        self._sym2id[sym] = idx
        self._id2sym[idx] = sym
        return idx

    def add_with_id(self, sym: str, idx: int) -> None:
        if sym in self._sym2id and self._sym2id[sym] != idx:
            raise ValueError(f"symbol {sym!r} already mapped to {self._sym2id[sym]}")
        if idx in self._id2sym and self._id2sym[idx] != sym:
            raise ValueError(f"id {idx} already mapped to {self._id2sym[idx]!r}")
        self._sym2id[sym] = idx
        self._id2sym[idx] = sym

    def id_of(self, sym: str) -> int:
        return self._sym2id[sym]

    def sym_of(self, idx: int) -> str:
        return self._id2sym[idx]

    def __contains__(self, sym: str) -> bool:
        return sym in self._sym2id

    def has_id(self, idx: int) -> bool:
        return idx in self._id2sym

    def __len__(self) -> int:
        return len(self._sym2id)

    def items(self):
        return sorted(self._sym2id.items(), key=lambda kv: kv[1])

    def to_text(self) -> str:
        return "".join(f"{sym} {idx}\n" for sym, idx in self.items())

    @classmethod
    def from_text(cls, text: str) -> "SymbolTable":
        table = cls()
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            sym, idx = line.split()
            table.add_with_id(sym, int(idx))
        return table


class Arc(NamedTuple):
    ilabel: int
    olabel: int
    weight: float
    nextstate: int


@dataclass
class Fst:
    arcs: list[list[Arc]] = field(default_factory=list)
    start: int = 0
    finals: dict[int, float] = field(default_factory=dict)
    isyms: Optional[SymbolTable] = None
    osyms: Optional[SymbolTable] = None

    def add_state(self) -> int:
        self.arcs.append([])
        return len(self.arcs) - 1

    def add_arc(self, src: int, ilabel: int, olabel: int, weight: float,
                dst: int) -> None:
        self.arcs[src].append(Arc(ilabel, olabel, float(weight), dst))

    def set_final(self, state: int, weight: float = 0.0) -> None:
        self.finals[state] = min(float(weight), self.finals.get(state, math.inf))

    @property
    def num_states(self) -> int:
        return len(self.arcs)

    @property
    def num_arcs(self) -> int:
        return sum(len(a) for a in self.arcs)

    def used_ilabels(self) -> set[int]:
        return {a.ilabel for arcs in self.arcs for a in arcs}

    def used_olabels(self) -> set[int]:
        return {a.olabel for arcs in self.arcs for a in arcs}

    def to_text(self) -> str:
        lines = []
        order = [self.start] + [s for s in range(self.num_states) if s != self.start]
        for s in order:
            for a in self.arcs[s]:
                lines.append(f"{s} {a.nextstate} {a.ilabel} {a.olabel} {a.weight!r}")
        for s in sorted(self.finals):
            lines.append(f"{s} {self.finals[s]!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, isyms: Optional[SymbolTable] = None,
                  osyms: Optional[SymbolTable] = None) -> "Fst":
        fst = cls(isyms=isyms, osyms=osyms)
        start: Optional[int] = None
        pending: list[tuple] = []
        max_state = -1
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if len(parts) == 5:
                src, dst, il, ol = (int(x) for x in parts[:4])
                w = float(parts[4])
                if start is None:
                    start = src
                pending.append(("arc", src, dst, il, ol, w))
                max_state = max(max_state, src, dst)
            elif len(parts) == 2:
                s, w = int(parts[0]), float(parts[1])
                pending.append(("final", s, w))
                max_state = max(max_state, s)
            elif len(parts) == 1:
                s = int(parts[0])
                pending.append(("final", s, 0.0))
                max_state = max(max_state, s)
            else:
                raise ValueError(f"bad fst text line: {line!r}")
        for _ in range(max_state + 1):
            fst.add_state()
        for item in pending:
            if item[0] == "arc":
                _, src, dst, il, ol, w = item
                fst.add_arc(src, il, ol, w, dst)
            else:
                _, s, w = item
                fst.set_final(s, w)
        fst.start = start if start is not None else 0
        if fst.num_states == 0:
            fst.add_state()
        return fst


def connect(f: Fst) -> Fst:
    """Trim states not on a start-to-final path; renumber in BFS order."""
    reach = set()
    stack = [f.start]
    while stack:
        s = stack.pop()
        if s in reach:
            continue
        reach.add(s)
        for a in f.arcs[s]:
            if a.nextstate not in reach:
                stack.append(a.nextstate)
    back: dict[int, list[int]] = {s: [] for s in range(f.num_states)}
    for s in range(f.num_states):
        for a in f.arcs[s]:
            back[a.nextstate].append(s)
    coreach = set()
    stack = [s for s in f.finals if s in reach]
    while stack:
        s = stack.pop()
        if s in coreach:
            continue
        coreach.add(s)
        for p in back[s]:
            if p not in coreach and p in reach:
                stack.append(p)
    keep = reach & coreach
    out = Fst(isyms=f.isyms, osyms=f.osyms)
    if f.start not in keep:
        out.add_state()
        return out
    mapping: dict[int, int] = {}
    queue = [f.start]
    mapping[f.start] = out.add_state()
    head = 0
    while head < len(queue):
        s = queue[head]
        head += 1
        for a in f.arcs[s]:
            if a.nextstate in keep and a.nextstate not in mapping:
                mapping[a.nextstate] = out.add_state()
                queue.append(a.nextstate)
    for s in queue:
        for a in f.arcs[s]:
            if a.nextstate in keep:
                out.add_arc(mapping[s], a.ilabel, a.olabel, a.weight, mapping[a.nextstate])
    for s, w in f.finals.items():
        if s in keep:
            out.finals[mapping[s]] = w
    return out


def compose(a: Fst, b: Fst) -> Fst:
    """Composition with a two-state epsilon-sequencing filter.

    The filter admits, between matched moves, only runs of a-side epsilon
    output moves followed by b-side epsilon input moves, so every epsilon
    interleaving is represented exactly once.
    """
    if a.osyms is not None and b.isyms is not None:
        for label in sorted(a.used_olabels()):
            if label == EPSILON:
                continue
            if not a.osyms.has_id(label):
                raise AlphabetError(f"left operand uses unnamed output label {label}")
            sym = a.osyms.sym_of(label)
            if sym not in b.isyms or b.isyms.id_of(sym) != label:
                raise AlphabetError(
                    f"output symbol {sym!r} (id {label}) missing from right input alphabet")

    b_by_label: list[dict[int, list[Arc]]] = []
    for arcs in b.arcs:
        d: dict[int, list[Arc]] = {}
        for arc in arcs:
            d.setdefault(arc.ilabel, []).append(arc)
        b_by_label.append(d)

    out = Fst(isyms=a.isyms, osyms=b.osyms)
    states: dict[tuple[int, int, int], int] = {}

    def state_id(key):
        if key not in states:
            states[key] = out.add_state()
            queue.append(key)
        return states[key]

    queue: list[tuple[int, int, int]] = []
    start_key = (a.start, b.start, 0)
    states[start_key] = out.add_state()
    queue.append(start_key)
    head = 0
    while head < len(queue):
        qa, qb, filt = queue[head]
        src = states[(qa, qb, filt)]
        head += 1
        for arc_a in a.arcs[qa]:
            if arc_a.olabel == EPSILON:
                if filt == 0:
                    dst = state_id((arc_a.nextstate, qb, 0))
                    out.add_arc(src, arc_a.ilabel, EPSILON, arc_a.weight, dst)
            else:
                for arc_b in b_by_label[qb].get(arc_a.olabel, ()):
                    dst = state_id((arc_a.nextstate, arc_b.nextstate, 0))
                    out.add_arc(src, arc_a.ilabel, arc_b.olabel,
                                arc_a.weight + arc_b.weight, dst)
        for arc_b in b_by_label[qb].get(EPSILON, ()):
            dst = state_id((qa, arc_b.nextstate, 2))
            out.add_arc(src, EPSILON, arc_b.olabel, arc_b.weight, dst)
        if qa in a.finals and qb in b.finals:
            out.set_final(src, a.finals[qa] + b.finals[qb])
    return connect(out)


def rm_epsilon(f: Fst) -> Fst:
    """Remove arcs that are epsilon on both tapes (shortest-distance closure)."""
    import heapq

    out = Fst(isyms=f.isyms, osyms=f.osyms, start=f.start)
    for _ in range(f.num_states):
        out.add_state()
    for s in range(f.num_states):
        dist: dict[int, float] = {s: 0.0}
        heap = [(0.0, s)]
        done: set[int] = set()
        while heap:
            d, t = heapq.heappop(heap)
            if t in done:
                continue
            done.add(t)
            for a in f.arcs[t]:
                if a.ilabel == EPSILON and a.olabel == EPSILON:
                    nd = d + a.weight
                    if nd < dist.get(a.nextstate, math.inf):
                        dist[a.nextstate] = nd
                        heapq.heappush(heap, (nd, a.nextstate))
        for t in sorted(dist):
            d = dist[t]
            for a in f.arcs[t]:
                if a.ilabel == EPSILON and a.olabel == EPSILON:
                    continue
                out.add_arc(s, a.ilabel, a.olabel, d + a.weight, a.nextstate)
            if t in f.finals:
                out.set_final(s, d + f.finals[t])
    return connect(out)


def determinize(f: Fst, budget_factor: int = 100) -> Fst:
    """Weighted subset determinization with delayed output strings.

    The input must be free of input-epsilon arcs (run :func:`rm_epsilon`
    first). Each result state has at most one arc per input label; at most one
    output symbol is emitted per arc, and output left over when a subset is
    final is realized as a chain of epsilon-input arcs. Nondeterminizable
    inputs are caught by the state budget.
    """
    for arcs in f.arcs:
        for a in arcs:
            if a.ilabel == EPSILON:
                raise ValueError("determinize requires an input-epsilon-free fst")

    budget = budget_factor * max(1, f.num_states)
    out = Fst(isyms=f.isyms, osyms=f.osyms)

    def canonical(elems: Iterable[tuple[int, float, tuple]]):
        return tuple(sorted(elems, key=lambda e: (e[0], e[2])))

    start = canonical([(f.start, 0.0, ())])
    subsets: dict[tuple, int] = {start: out.add_state()}
    queue = [start]
    head = 0
    while head < len(queue):
        subset = queue[head]
        src = subsets[subset]
        head += 1

        # leftover final outputs become epsilon-input chains
        by_leftover: dict[tuple, float] = {}
        for q, r, o in subset:
            if q in f.finals:
                w = r + f.finals[q]
                if w < by_leftover.get(o, math.inf):
                    by_leftover[o] = w
        for o in sorted(by_leftover):
            w = by_leftover[o]
            if not o:
                out.set_final(src, w)
                continue
            cur = src
            for i, sym in enumerate(o):
                nxt = out.add_state()
                if out.num_states > budget:
                    raise BudgetExceededError(
                        f"determinization exceeded {budget} states")
                out.add_arc(cur, EPSILON, sym, w if i == 0 else 0.0, nxt)
                cur = nxt
            out.set_final(cur, 0.0)

        by_label: dict[int, dict[tuple[int, tuple], float]] = {}
        for q, r, o in subset:
            for a in f.arcs[q]:
                o2 = o + (a.olabel,) if a.olabel != EPSILON else o
                key = (a.nextstate, o2)
                slot = by_label.setdefault(a.ilabel, {})
                w2 = r + a.weight
                if w2 < slot.get(key, math.inf):
                    slot[key] = w2
        for label in sorted(by_label):
            elems = by_label[label]
            arc_w = min(elems.values())
            outs = [o for (_, o) in elems]
            emit = EPSILON
            if all(o for o in outs):
                first = outs[0][0]
                if all(o[0] == first for o in outs):
                    emit = first
            new_elems = []
            for (q2, o2), w2 in elems.items():
                if emit != EPSILON:
                    o2 = o2[1:]
                new_elems.append((q2, w2 - arc_w, o2))
            key = canonical(new_elems)
            if key not in subsets:
                subsets[key] = out.add_state()
                if out.num_states > budget:
                    raise BudgetExceededError(
                        f"determinization exceeded {budget} states")
                queue.append(key)
            out.add_arc(src, label, emit, arc_w, subsets[key])
    return connect(out)


def minimize(f: Fst) -> Fst:
    """Merge behaviourally identical states of a deterministic machine.

    Moore partition refinement over exact (label, weight, class) signatures;
    weight pushing is intentionally not performed, so states differing only in
    weight distribution along paths stay distinct.
    """
    f = connect(f)
    n = f.num_states
    if n == 0:
        return f
    finals_key = {s: (s in f.finals, f.finals.get(s, 0.0)) for s in range(n)}
    classes = {}
    seen: dict[tuple, int] = {}
    for s in range(n):
        key = finals_key[s]
        if key not in seen:
            seen[key] = len(seen)
        classes[s] = seen[key]
    while True:
        seen2: dict[tuple, int] = {}
        new_classes = {}
        for s in range(n):
            sig = tuple(sorted(
                (a.ilabel, a.olabel, a.weight, classes[a.nextstate])
                for a in f.arcs[s]))
            key = (classes[s], sig)
            if key not in seen2:
                seen2[key] = len(seen2)
            new_classes[s] = seen2[key]
        if len(seen2) == len(set(classes.values())):
            classes = new_classes
            break
        classes = new_classes

    representatives: dict[int, int] = {}
    for s in range(n):
        representatives.setdefault(classes[s], s)
    out = Fst(isyms=f.isyms, osyms=f.osyms)
    mapping: dict[int, int] = {}
    queue = [classes[f.start]]
    mapping[classes[f.start]] = out.add_state()
    head = 0
    while head < len(queue):
        c = queue[head]
        head += 1
        rep = representatives[c]
        src = mapping[c]
        emitted = set()
        for a in f.arcs[rep]:
            tc = classes[a.nextstate]
            if tc not in mapping:
                mapping[tc] = out.add_state()
                queue.append(tc)
            arc = (a.ilabel, a.olabel, a.weight, mapping[tc])
            if arc not in emitted:
                emitted.add(arc)
                out.add_arc(src, *arc)
        if rep in f.finals:
            out.set_final(src, f.finals[rep])
    return out


def strip_labels(f: Fst, labels: set[int]) -> Fst:
    """Replace the given input labels with epsilon (weights and outputs kept)."""
    out = Fst(isyms=f.isyms, osyms=f.osyms, start=f.start)
    for _ in range(f.num_states):
        out.add_state()
    for s in range(f.num_states):
        for a in f.arcs[s]:
            il = EPSILON if a.ilabel in labels else a.ilabel
            out.add_arc(s, il, a.olabel, a.weight, a.nextstate)
    out.finals = dict(f.finals)
    return out


# ---------------------------------------------------------------------------
# Lexicon and grammar construction


def add_disambig(entries: list[tuple[str, tuple[str, ...]]]):
    """Append #1, #2, ... to pronunciations that repeat or prefix another."""
    counts: dict[tuple, int] = {}
    is_prefix: set[tuple] = set()
    for _, phones in entries:
        counts[phones] = counts.get(phones, 0) + 1
        for i in range(1, len(phones)):
            is_prefix.add(phones[:i])
    result = []
    last_used: dict[tuple, int] = {}
    max_disambig = 0
    for word, phones in entries:
        if counts[phones] == 1 and phones not in is_prefix:
            result.append((word, phones))
            continue
        k = last_used.get(phones, 0) + 1
        last_used[phones] = k
        max_disambig = max(max_disambig, k)
        result.append((word, phones + (f"#{k}",)))
    return result, max_disambig


def parse_lexicon(text: str) -> list[tuple[str, tuple[str, ...]]]:
    entries = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 2:
            raise LexiconError(f"empty pronunciation for {parts[0]!r}")
        entries.append((parts[0], tuple(parts[1:])))
    return entries


def build_lexicon(entries: list[tuple[str, tuple[str, ...]]],
                  phone_syms: Optional[SymbolTable] = None) -> Fst:
    """Phone-sequence -> word transducer, closed over word sequences.

    The word label sits on the first phone arc; homophones get disambiguation
    suffixes so determinization terminates. The returned fst's input table
    contains the phones plus the #k symbols (callers strip them after
    optimization).
    """
    if not entries:
        raise LexiconError("empty lexicon")
    for word, phones in entries:
        if not phones:
            raise LexiconError(f"empty pronunciation for {word!r}")
    if phone_syms is None:
        phone_syms = SymbolTable()
        for p in sorted({p for _, phones in entries for p in phones}):
            phone_syms.add(p)
    else:
        for word, phones in entries:
            for p in phones:
                if p not in phone_syms:
                    raise LexiconError(f"unknown phone {p!r} in entry for {word!r}")

    disambig_entries, max_disambig = add_disambig(entries)
    isyms = SymbolTable()
    for sym, idx in phone_syms.items():
        if idx != EPSILON:
            isyms.add_with_id(sym, idx)
    disambig_ids = set()
    base = max((idx for _, idx in isyms.items()), default=0)
    for k in range(1, max_disambig + 1):
        idx = base + k
        isyms.add_with_id(f"#{k}", idx)
        disambig_ids.add(idx)

    osyms = SymbolTable()
    fst = Fst(isyms=isyms, osyms=osyms)
    root = fst.add_state()
    fst.set_final(root, 0.0)
    for word, phones in disambig_entries:
        wid = osyms.add(word)
        cur = root
        for i, p in enumerate(phones):
            dst = root if i == len(phones) - 1 else fst.add_state()
            fst.add_arc(cur, isyms.id_of(p), wid if i == 0 else EPSILON, 0.0, dst)
            cur = dst
    return fst


def lexicon_disambig_ids(lexicon: Fst) -> set[int]:
    ids = set()
    if lexicon.isyms is not None:
        for sym, idx in lexicon.isyms.items():
            if sym.startswith("#"):
                ids.add(idx)
    return ids


def _parse_arpa(text: str, word_syms: Optional[SymbolTable]):
    lines = iter(text.splitlines())
    counts: dict[int, int] = {}
    for line in lines:
        if line.strip() == "\\data\\":
            break
    else:
        raise GrammarFormatError("missing \\data\\ header")
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("ngram"):
            try:
                order, count = line[len("ngram"):].split("=")
                counts[int(order)] = int(count)
            except ValueError as exc:
                raise GrammarFormatError(f"bad ngram count line: {line!r}") from exc
        else:
            break
    if not counts:
        raise GrammarFormatError("no ngram counts in \\data\\ section")
    max_order = max(counts)
    if max_order > 4:
        raise GrammarFormatError(f"order {max_order} not supported (max 4)")

    ngrams: dict[int, dict[tuple, tuple[float, float]]] = {k: {} for k in counts}
    line = line.strip()
    if not (line.startswith("\\") and line.endswith("-grams:")):
        raise GrammarFormatError(f"expected an n-gram section, got {line!r}")
    current = int(line.strip("\\").split("-")[0])
    if current not in counts:
        raise GrammarFormatError(f"section {line!r} not declared in \\data\\")
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line == "\\end\\":
            current = None
            break
        if line.startswith("\\") and line.endswith("-grams:"):
            current = int(line.strip("\\").split("-")[0])
            if current not in counts:
                raise GrammarFormatError(f"section {line!r} not declared in \\data\\")
            continue
        parts = line.split()
        if len(parts) < current + 1 or len(parts) > current + 2:
            raise GrammarFormatError(f"bad {current}-gram line: {line!r}")
        try:
            logp = float(parts[0])
            backoff = float(parts[current + 1]) if len(parts) == current + 2 else 0.0
        except ValueError as exc:
            raise GrammarFormatError(f"bad number in line: {line!r}") from exc
        gram = tuple(parts[1:current + 1])
        ngrams[current][gram] = (logp, backoff)
    if current is not None:
        raise GrammarFormatError("missing \\end\\ marker")

    if word_syms is not None:
        for order_grams in ngrams.values():
            for gram in order_grams:
                for w in gram:
                    if w not in ("<s>", "</s>", "<unk>") and w not in word_syms:
                        raise GrammarFormatError(f"grammar word {w!r} not in lexicon")
    return ngrams, max_order


def build_grammar(text: str, word_syms: Optional[SymbolTable] = None) -> Fst:
    """Word acceptor from ARPA text or from simple word-list / word-pair lines.

    ARPA weights are -log10 probabilities and are converted to natural-log
    costs; back-off transitions become epsilon arcs. Non-ARPA sources: lines
    ``word [prob]`` build a unigram loop, lines ``wordA wordB prob`` build a
    word-pair grammar (``<s>``/``</s>`` mark sentence boundaries).
    """
    if "\\data\\" in text:
        return _grammar_from_arpa(text, word_syms)
    return _grammar_from_pairs(text, word_syms)


def _grammar_from_pairs(text: str, word_syms: Optional[SymbolTable]) -> Fst:
    rows = [line.split() for line in text.splitlines() if line.split()]
    if not rows:
        raise GrammarFormatError("empty grammar source")
    widths = {len(r) for r in rows}
    if widths <= {1, 2}:
        mode = "unigram"
    elif widths == {3}:
        mode = "pairs"
    else:
        raise GrammarFormatError(f"inconsistent grammar line widths: {sorted(widths)}")

    osyms = SymbolTable()
    fst = Fst(isyms=osyms, osyms=osyms)

    def word_id(w: str) -> int:
        if word_syms is not None:
            if w not in word_syms:
                raise GrammarFormatError(f"grammar word {w!r} not in lexicon")
            wid = word_syms.id_of(w)
            osyms.add_with_id(w, wid)
            return wid
        return osyms.add(w)

    if mode == "unigram":
        loop = fst.add_state()
        fst.set_final(loop, 0.0)
        for row in rows:
            prob = float(row[1]) if len(row) == 2 else 1.0
            if prob <= 0:
                raise GrammarFormatError(f"nonpositive probability in line {row!r}")
            wid = word_id(row[0])
            fst.add_arc(loop, wid, wid, -math.log(prob), loop)
        return fst

    start = fst.add_state()
    states: dict[str, int] = {}

    def state_of(w: str) -> int:
        if w not in states:
            states[w] = fst.add_state()
        return states[w]

    has_bos = any(r[0] == "<s>" for r in rows)
    has_eos = any(r[1] == "</s>" for r in rows)
    for a, b, p in rows:
        prob = float(p)
        if prob <= 0:
            raise GrammarFormatError(f"nonpositive probability in line {a} {b} {p}")
        w = -math.log(prob)
        if b == "</s>":
            src = start if a == "<s>" else state_of(a)
            fst.set_final(src, w)
            continue
        wid = word_id(b)
        src = start if a == "<s>" else state_of(a)
        fst.add_arc(src, wid, wid, w, state_of(b))
    if not has_bos:
        for w in sorted(states):
            wid = word_id(w)
            fst.add_arc(start, wid, wid, 0.0, states[w])
    if not has_eos:
        for s in states.values():
            fst.set_final(s, 0.0)
    return connect(fst)


def _grammar_from_arpa(text: str, word_syms: Optional[SymbolTable]) -> Fst:
    ngrams, max_order = _parse_arpa(text, word_syms)

    osyms = SymbolTable()

    def word_id(w: str) -> int:
        if word_syms is not None:
            wid = word_syms.id_of(w)
            osyms.add_with_id(w, wid)
            return wid
        return osyms.add(w)

    fst = Fst(isyms=osyms, osyms=osyms)

    contexts: set[tuple] = {()}
    for order in range(1, max_order):
        for gram in ngrams.get(order, {}):
            if gram[-1] != "</s>":
                contexts.add(gram)
    state_of: dict[tuple, int] = {}
    for ctx in sorted(contexts):
        state_of[ctx] = fst.add_state()

    def backoff_target(ctx: tuple) -> tuple:
        while ctx not in state_of:
            ctx = ctx[1:]
        return ctx

    # back-off epsilon arcs
    for ctx in sorted(contexts):
        if not ctx:
            continue
        _, backoff = ngrams[len(ctx)].get(ctx, (0.0, 0.0))
        fst.add_arc(state_of[ctx], EPSILON, EPSILON, -backoff * LN10,
                    state_of[backoff_target(ctx[1:])])

    saw_eos = False
    for order in sorted(ngrams):
        for gram in sorted(ngrams[order]):
            logp, _ = ngrams[order][gram]
            hist, word = gram[:-1], gram[-1]
            if hist not in state_of:
                continue
            src = state_of[hist]
            if word == "<s>":
                continue
            if word == "</s>":
                fst.set_final(src, -logp * LN10)
                saw_eos = True
                continue
            wid = word_id(word)
            dst_ctx = gram if gram in state_of else backoff_target(gram[1:])
            fst.add_arc(src, wid, wid, -logp * LN10, state_of[dst_ctx])
    if not saw_eos:
        for s in state_of.values():
            fst.set_final(s, 0.0)
    fst.start = state_of[("<s>",)] if ("<s>",) in state_of else state_of[()]
    return connect(fst)


# ---------------------------------------------------------------------------
# Token-passing Viterbi beam search


@dataclass(frozen=True)
class PhonePrior:
    """Log-prior over label ids; the search divides phone scores by it."""

    log_prior: np.ndarray

    @classmethod
    def uniform(cls, num_labels: int, blank_id: int) -> "PhonePrior":
        prior = np.zeros(num_labels, dtype=np.float64)
        num_phones = num_labels - 1
        prior[:] = -math.log(num_phones)
        prior[blank_id] = 0.0
        return cls(prior)

    @classmethod
    def from_text(cls, text: str, phone_syms: SymbolTable, num_labels: int) -> "PhonePrior":
        prior = np.zeros(num_labels, dtype=np.float64)
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ValueError(f"bad prior line: {line!r}")
            sym, prob = parts[0], float(parts[1])
            if prob <= 0:
                raise ValueError(f"prior probability must be positive: {line!r}")
            prior[phone_syms.id_of(sym)] = math.log(prob)
        return cls(prior)


def save_graph_dir(path, graph: Fst) -> None:
    """Write lg.fst plus phones.txt / words.txt symbol tables into a directory."""
    import os

    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "lg.fst"), "w") as fh:
        fh.write(graph.to_text())
    if graph.isyms is not None:
        with open(os.path.join(path, "phones.txt"), "w") as fh:
            fh.write(graph.isyms.to_text())
    if graph.osyms is not None:
        with open(os.path.join(path, "words.txt"), "w") as fh:
            fh.write(graph.osyms.to_text())


def load_graph_dir(path) -> Fst:
    import os

    def read(name):
        with open(os.path.join(path, name)) as fh:
            return fh.read()

    isyms = SymbolTable.from_text(read("phones.txt"))
    osyms = SymbolTable.from_text(read("words.txt"))
    return Fst.from_text(read("lg.fst"), isyms=isyms, osyms=osyms)


class _OutNode(NamedTuple):
    prev: Optional["_OutNode"]
    label: int


@dataclass
class Token:
    state: int
    cost: float
    outs: Optional[_OutNode]


def start_tokens(graph: Fst) -> dict[int, Token]:
    tokens = {graph.start: Token(graph.start, 0.0, None)}
    _close_epsilon(graph, tokens)
    return tokens


def _offer(tokens: dict[int, Token], state: int, cost: float,
           outs: Optional[_OutNode]) -> bool:
    old = tokens.get(state)
    if old is None or cost < old.cost:
        tokens[state] = Token(state, cost, outs)
        return True
    return False


def _close_epsilon(graph: Fst, tokens: dict[int, Token]) -> None:
    work = sorted(tokens)
    head = 0
    while head < len(work):
        s = work[head]
        head += 1
        tok = tokens[s]
        for a in graph.arcs[s]:
            if a.ilabel != EPSILON:
                continue
            outs = tok.outs if a.olabel == EPSILON else _OutNode(tok.outs, a.olabel)
            if _offer(tokens, a.nextstate, tok.cost + a.weight, outs):
                work.append(a.nextstate)


def beam_search_step(graph: Fst, tokens: dict[int, Token], frame,
                     prior: Optional[PhonePrior], params) -> dict[int, Token]:
    """Advance all tokens through one non-skipped posterior frame.

    Each token either stays in place consuming the frame's blank score or
    advances along a phone arc, paying the arc weight, the negated phone
    score, and the phone prior. Epsilon arcs are closed afterwards, then the
    beam and the active-token cap prune the set.
    """
    scores = frame.scores
    new: dict[int, Token] = {}
    for s in sorted(tokens):
        tok = tokens[s]
        stay = tok.cost - frame.blank_log_score
        _offer(new, s, stay, tok.outs)
        for a in graph.arcs[s]:
            if a.ilabel == EPSILON:
                continue
            cost = tok.cost + a.weight
            cost = cost + -scores[a.ilabel]
            if prior is not None:
                cost = cost + prior.log_prior[a.ilabel]
            outs = tok.outs if a.olabel == EPSILON else _OutNode(tok.outs, a.olabel)
            _offer(new, a.nextstate, cost, outs)
    _close_epsilon(graph, new)

    if not new:
        return new
    best = min(t.cost for t in new.values())
    survivors = [t for _, t in sorted(new.items()) if t.cost <= best + params.beam]
    if params.max_active and len(survivors) > params.max_active:
        survivors.sort(key=lambda t: (t.cost, t.state))
        survivors = survivors[:params.max_active]
    return {t.state: t for t in survivors}


def best_path(tokens: dict[int, Token], graph: Fst) -> tuple[list[int], float]:
    """Min-cost final token's output labels (epsilons were never recorded)."""
    best_cost = math.inf
    best_tok: Optional[Token] = None
    for s in sorted(tokens):
        if s not in graph.finals:
            continue
        cost = tokens[s].cost + graph.finals[s]
        if cost < best_cost:
            best_cost = cost
            best_tok = tokens[s]
    if best_tok is None:
        raise NoHypothesisError("no token reached a final state")
    labels: list[int] = []
    node = best_tok.outs
    while node is not None:
        labels.append(node.label)
        node = node.prev
    labels.reverse()
    return labels, best_cost
