/**
 * Synthetic task: 12 phones, each tied to a fixed feature template, a small
 * lexicon of 20 words, and a sampler producing (features, phones, words)
 * triples. Deterministic under a fixed seed; templates are regenerated until
 * their pairwise distances clear a floor so phones stay distinguishable.
 */

import { ModelConfig } from "./config";
import { Rng } from "./rng";

export const PHONE_NAMES = ["a", "e", "i", "o", "u", "k", "l", "m", "n", "p", "s", "t"];

export const LEXICON: Array<[string, string[]]> = [
  ["a", ["a"]],
  ["e", ["e"]],
  ["ka", ["k", "a"]],
  ["kal", ["k", "a", "l"]],
  ["ki", ["k", "i"]],
  ["ku", ["k", "u"]],
  ["la", ["l", "a"]],
  ["lim", ["l", "i", "m"]],
  ["lo", ["l", "o"]],
  ["ma", ["m", "a"]],
  ["men", ["m", "e", "n"]],
  ["mi", ["m", "i"]],
  ["na", ["n", "a"]],
  ["nos", ["n", "o", "s"]],
  ["pa", ["p", "a"]],
  ["pos", ["p", "o", "s"]],
  ["sea", ["s", "i"]],
  ["see", ["s", "i"]],
  ["ta", ["t", "a"]],
  ["tu", ["t", "u"]],
];

export const FRAMES_PER_PHONE = 8;
export const EDGE_FRAMES = 4;
const TEMPLATE_AMP = 1.5;
const NOISE = 0.05;
const MIN_TEMPLATE_DIST = 1.0;

export function phoneId(name: string): number {
  return PHONE_NAMES.indexOf(name) + 1; // blank is 0
}

export interface Utterance {
  words: string[];
  phones: number[];
  feats: Float64Array[];
}

export class ToyTask {
  readonly templates: Float64Array[];

  constructor(readonly cfg: ModelConfig, templateSeed = 11) {
    const rng = new Rng(templateSeed);
    let tries = 0;
    for (;;) {
      tries += 1;
      if (tries > 1000) throw new Error("could not separate phone templates");
      const cand: Float64Array[] = [];
      for (let p = 0; p < PHONE_NAMES.length; p++) {
        const t = new Float64Array(cfg.feat_dim);
        for (let d = 0; d < cfg.feat_dim; d++) t[d] = rng.gauss();
        let norm = 0;
        for (let d = 0; d < cfg.feat_dim; d++) norm += t[d] * t[d];
        norm = Math.sqrt(norm);
        for (let d = 0; d < cfg.feat_dim; d++) t[d] = (t[d] / norm) * TEMPLATE_AMP;
        cand.push(t);
      }
      if (minPairwiseDistance(cand) >= MIN_TEMPLATE_DIST) {
        this.templates = cand;
        return;
      }
    }
  }

  render(rng: Rng, phones: number[]): Float64Array[] {
    const frames: Float64Array[] = [];
    const noise = () => {
      const v = new Float64Array(this.cfg.feat_dim);
      for (let d = 0; d < this.cfg.feat_dim; d++) v[d] = rng.gauss() * NOISE;
      return v;
    };
    for (let i = 0; i < EDGE_FRAMES; i++) frames.push(noise());
    for (const p of phones) {
      const tmpl = this.templates[p - 1];
      for (let i = 0; i < FRAMES_PER_PHONE; i++) {
        const v = noise();
        for (let d = 0; d < this.cfg.feat_dim; d++) v[d] += tmpl[d];
        frames.push(v);
      }
    }
    for (let i = 0; i < EDGE_FRAMES; i++) frames.push(noise());
    return frames;
  }

  sample(rng: Rng): Utterance {
    const nWords = 2 + rng.int(3);
    const words: string[] = [];
    const phones: number[] = [];
    while (words.length < nWords) {
      const [word, pron] = LEXICON[rng.int(LEXICON.length)];
      const first = phoneId(pron[0]);
      if (phones.length && phones[phones.length - 1] === first) continue;
      words.push(word);
      for (const p of pron) phones.push(phoneId(p));
    }
    return { words, phones, feats: this.render(rng, phones) };
  }

  corpus(seed: number, count: number): Utterance[] {
    const rng = new Rng(seed);
    return Array.from({ length: count }, () => this.sample(rng));
  }
}

export function minPairwiseDistance(templates: Float64Array[]): number {
  let best = Infinity;
  for (let i = 0; i < templates.length; i++) {
    for (let j = i + 1; j < templates.length; j++) {
      let d2 = 0;
      for (let d = 0; d < templates[i].length; d++) {
        const diff = templates[i][d] - templates[j][d];
        d2 += diff * diff;
      }
      best = Math.min(best, Math.sqrt(d2));
    }
  }
  return best;
}
