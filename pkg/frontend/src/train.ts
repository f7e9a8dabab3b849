/**
 * Training: batched Adam over the monotonic transducer loss, teacher-forced
 * predictor histories, full (frame x history) joint grid per utterance.
 * Fine-tuning is the same loop on a model whose projections came back
 * factorized from the engine's compressor.
 */

import { Adam } from "./adam";
import { InfeasibleLossError, monotonicLoss } from "./loss";
import {
  encoderBackward, encoderForward, historyFor, jointBackward, jointForward,
  Model, parameters, predictorBackward, predictorForward, zeroGrads,
} from "./model";
import { Rng } from "./rng";
import { ToyTask, Utterance } from "./task";

export interface TrainOptions {
  steps: number;
  batchSize: number;
  lr: number;
  sampleSeed: number;
  logEvery?: number;
}

export const DEFAULT_TRAIN: TrainOptions = {
  steps: 800,
  batchSize: 8,
  lr: 5e-4,
  sampleSeed: 1234,
  logEvery: 0,
};

/** Accumulates gradients for one utterance; returns its NLL. */
export function utteranceLossAndGrad(model: Model, utt: Utterance): number {
  const cfg = model.cfg;
  const L = cfg.num_labels;
  const targets = utt.phones;
  const U = targets.length;

  const encCache = encoderForward(model, utt.feats);
  const enc = encCache.out;
  const T = enc.length;
  if (T < U) {
    throw new InfeasibleLossError(`utterance has ${T} frames for ${U} labels`);
  }

  const hists: number[][] = [];
  const hpred: Float64Array[] = [];
  for (let u = 0; u <= U; u++) {
    hists.push(historyFor(cfg, targets, u));
    hpred.push(predictorForward(model, hists[u]));
  }

  const joints = new Array(T * (U + 1));
  const logp = new Float64Array(T * (U + 1) * L);
  for (let t = 0; t < T; t++) {
    for (let u = 0; u <= U; u++) {
      const cache = jointForward(model, enc[t], hpred[u]);
      joints[t * (U + 1) + u] = cache;
      logp.set(cache.logp, (t * (U + 1) + u) * L);
    }
  }

  const { nll, dlogp } = monotonicLoss(logp, T, U, L, targets, cfg.blank_id);

  const dEnc = enc.map(() => new Float64Array(cfg.encoder_dim));
  const dPred = hpred.map(() => new Float64Array(cfg.pred_dim));
  const slice = new Float64Array(L);
  for (let t = 0; t < T; t++) {
    for (let u = 0; u <= U; u++) {
      const base = (t * (U + 1) + u) * L;
      let any = false;
      for (let l = 0; l < L; l++) {
        slice[l] = dlogp[base + l];
        if (slice[l] !== 0) any = true;
      }
      if (!any) continue;
      jointBackward(model, enc[t], hpred[u], joints[t * (U + 1) + u],
                    slice, dEnc[t], dPred[u]);
    }
  }
  for (let u = 0; u <= U; u++) predictorBackward(model, hists[u], dPred[u]);
  encoderBackward(model, encCache, dEnc);
  return nll;
}

export function trainStep(model: Model, batch: Utterance[], opt: Adam): number {
  zeroGrads(model);
  let loss = 0;
  for (const utt of batch) loss += utteranceLossAndGrad(model, utt);
  const scale = 1 / batch.length;
  for (const p of parameters(model)) {
    for (let i = 0; i < p.g.length; i++) p.g[i] *= scale;
  }
  opt.step();
  return loss / batch.length;
}

export function meanLoss(model: Model, batch: Utterance[]): number {
  // forward-only loss (gradients computed then discarded)
  zeroGrads(model);
  let loss = 0;
  for (const utt of batch) loss += utteranceLossAndGrad(model, utt);
  zeroGrads(model);
  return loss / batch.length;
}

export function train(model: Model, task: ToyTask,
                      opts: TrainOptions = DEFAULT_TRAIN): number[] {
  const opt = new Adam(parameters(model), opts.lr);
  const rng = new Rng(opts.sampleSeed);
  const losses: number[] = [];
  for (let step = 0; step < opts.steps; step++) {
    const batch = Array.from({ length: opts.batchSize }, () => task.sample(rng));
    const loss = trainStep(model, batch, opt);
    losses.push(loss);
    if (!Number.isFinite(loss)) {
      throw new Error(`training diverged at step ${step}: loss=${loss}`);
    }
    if (opts.logEvery && step % opts.logEvery === 0) {
      console.log(`step ${step} loss ${loss.toFixed(4)}`);
    }
  }
  return losses;
}
