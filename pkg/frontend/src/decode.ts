/**
 * Greedy frame-synchronous decode, mirroring the engine's graph-free mode:
 * per encoder frame, score against the current history, deweight blank,
 * take the argmax (ties to the lowest id), advance the history on non-blank.
 */

import { sosId } from "./config";
import { encoderForward, jointForward, Model, predictorForward } from "./model";

export function greedyDecode(model: Model, feats: Float64Array[],
                             beta = 0): number[] {
  const cfg = model.cfg;
  const enc = encoderForward(model, feats).out;
  const hist: number[] = new Array(cfg.predictor_context).fill(sosId(cfg));
  let hPred = predictorForward(model, hist);
  const emitted: number[] = [];
  for (const hEnc of enc) {
    const { logp } = jointForward(model, hEnc, hPred);
    logp[cfg.blank_id] -= beta;
    let best = 0;
    for (let l = 1; l < cfg.num_labels; l++) {
      if (logp[l] > logp[best]) best = l;
    }
    if (best !== cfg.blank_id) {
      emitted.push(best);
      hist.shift();
      hist.push(best);
      hPred = predictorForward(model, hist);
    }
  }
  return emitted;
}

/** Unit error rate of hyp against ref (plain Levenshtein / ref length). */
export function errorRate(refs: number[][], hyps: number[][]): number {
  let errors = 0;
  let total = 0;
  for (let i = 0; i < refs.length; i++) {
    errors += editDistance(refs[i], hyps[i]);
    total += refs[i].length;
  }
  return total === 0 ? 0 : errors / total;
}

export function editDistance(a: number[], b: number[]): number {
  let prev = Array.from({ length: b.length + 1 }, (_, j) => j);
  for (let i = 1; i <= a.length; i++) {
    const cur = [i];
    for (let j = 1; j <= b.length; j++) {
      cur.push(Math.min(
        prev[j - 1] + (a[i - 1] === b[j - 1] ? 0 : 1),
        prev[j] + 1,
        cur[j - 1] + 1,
      ));
    }
    prev = cur;
  }
  return prev[b.length];
}
