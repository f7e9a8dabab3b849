/**
 * Toy transducer with hand-written backprop.
 *
 * The forward math mirrors the engine exactly: two causal stride-2 convs with
 * ReLU (output i sees inputs 2i-2..2i, zeros before the start), memory layers
 * (down-projection, tap-weighted combine over a finite window, up-projection,
 * bias, skip connection), an embedding + causal width-M conv predictor, and a
 * tanh joint with a log-softmax head. Everything runs in f64; weights are
 * rounded to f32 at export.
 */

import { ModelConfig, sosId } from "./config";
import { Rng } from "./rng";

export interface Param {
  v: Float64Array;
  g: Float64Array;
  shape: number[];
  name: string;
}

export function param(name: string, shape: number[]): Param {
  const size = shape.reduce((a, b) => a * b, 1);
  return { v: new Float64Array(size), g: new Float64Array(size), shape, name };
}

/** Dense or factorized linear map; factors train as separate parameters. */
export interface DenseLinear {
  kind: "dense";
  w: Param; // (rows, cols)
}
export interface LowRankLinear {
  kind: "lowrank";
  a: Param; // (rows, k)
  b: Param; // (k, cols)
}
export type Linear = DenseLinear | LowRankLinear;

export function linearRows(l: Linear): number {
  return l.kind === "dense" ? l.w.shape[0] : l.a.shape[0];
}
export function linearCols(l: Linear): number {
  return l.kind === "dense" ? l.w.shape[1] : l.b.shape[1];
}

function matvec(w: Float64Array, rows: number, cols: number,
                x: Float64Array, out: Float64Array): void {
  for (let r = 0; r < rows; r++) {
    let acc = 0;
    const base = r * cols;
    for (let c = 0; c < cols; c++) acc += w[base + c] * x[c];
    out[r] = acc;
  }
}

/** out += w^T dy */
function matvecT(w: Float64Array, rows: number, cols: number,
                 dy: Float64Array, out: Float64Array): void {
  for (let r = 0; r < rows; r++) {
    const base = r * cols;
    const d = dy[r];
    for (let c = 0; c < cols; c++) out[c] += w[base + c] * d;
  }
}

/** gw += dy (outer) x */
function accumOuter(gw: Float64Array, rows: number, cols: number,
                    dy: Float64Array, x: Float64Array): void {
  for (let r = 0; r < rows; r++) {
    const base = r * cols;
    const d = dy[r];
    if (d === 0) continue;
    for (let c = 0; c < cols; c++) gw[base + c] += d * x[c];
  }
}

export function linearApply(l: Linear, x: Float64Array): Float64Array {
  if (l.kind === "dense") {
    const [rows, cols] = l.w.shape;
    const out = new Float64Array(rows);
    matvec(l.w.v, rows, cols, x, out);
    return out;
  }
  const [k, cols] = l.b.shape;
  const mid = new Float64Array(k);
  matvec(l.b.v, k, cols, x, mid);
  const rows = l.a.shape[0];
  const out = new Float64Array(rows);
  matvec(l.a.v, rows, k, mid, out);
  return out;
}

/** Backward through a linear map; returns grad wrt x (fresh array). */
export function linearBackward(l: Linear, x: Float64Array,
                               dy: Float64Array): Float64Array {
  if (l.kind === "dense") {
    const [rows, cols] = l.w.shape;
    accumOuter(l.w.g, rows, cols, dy, x);
    const dx = new Float64Array(cols);
    matvecT(l.w.v, rows, cols, dy, dx);
    return dx;
  }
  const [rows, k] = l.a.shape;
  const cols = l.b.shape[1];
  const mid = new Float64Array(k);
  matvec(l.b.v, k, cols, x, mid); // recompute: cheaper than caching per frame
  accumOuter(l.a.g, rows, k, dy, mid);
  const dmid = new Float64Array(k);
  matvecT(l.a.v, rows, k, dy, dmid);
  accumOuter(l.b.g, k, cols, dmid, x);
  const dx = new Float64Array(cols);
  matvecT(l.b.v, k, cols, dmid, dx);
  return dx;
}

export interface MemLayer {
  inProj: Linear;  // (proj, enc)
  taps: Param;     // (left+1+right, proj)
  outProj: Linear; // (enc, proj)
  bias: Param;     // (enc,)
}

export interface Model {
  cfg: ModelConfig;
  conv1w: Param; // (enc, feat, 3)
  conv1b: Param;
  conv2w: Param; // (enc, enc, 3)
  conv2b: Param;
  layers: MemLayer[];
  embedding: Param; // (num_labels + 1, embed)
  predW: Param;     // (pred, embed, M)
  predB: Param;
  jointWenc: Param; // (joint, enc)
  jointWpred: Param; // (joint, pred)
  jointB: Param;
  jointWout: Param; // (labels, joint)
  jointBout: Param;
}

export function parameters(model: Model): Param[] {
  const out: Param[] = [model.conv1w, model.conv1b, model.conv2w, model.conv2b];
  for (const layer of model.layers) {
    if (layer.inProj.kind === "dense") out.push(layer.inProj.w);
    else out.push(layer.inProj.a, layer.inProj.b);
    out.push(layer.taps);
    if (layer.outProj.kind === "dense") out.push(layer.outProj.w);
    else out.push(layer.outProj.a, layer.outProj.b);
    out.push(layer.bias);
  }
  out.push(model.embedding, model.predW, model.predB, model.jointWenc,
           model.jointWpred, model.jointB, model.jointWout, model.jointBout);
  return out;
}

export function zeroGrads(model: Model): void {
  for (const p of parameters(model)) p.g.fill(0);
}

function initParam(p: Param, rng: Rng, fanIn: number, gain = 1.0): void {
  const std = gain / Math.sqrt(fanIn);
  for (let i = 0; i < p.v.length; i++) p.v[i] = rng.gauss() * std;
}

export function initModel(cfg: ModelConfig, seed: number): Model {
  const rng = new Rng(seed);
  const { feat_dim: F, encoder_dim: E, dfsmn_proj_dim: P, joint_dim: J,
          embed_dim: EM, pred_dim: PR, predictor_context: M,
          num_labels: L } = cfg;
  const K = cfg.dfsmn_left + 1 + cfg.dfsmn_right;
  const model: Model = {
    cfg,
    conv1w: param("subsampler.0.weight", [E, F, 3]),
    conv1b: param("subsampler.0.bias", [E]),
    conv2w: param("subsampler.1.weight", [E, E, 3]),
    conv2b: param("subsampler.1.bias", [E]),
    layers: [],
    embedding: param("embedding.weight", [L + 1, EM]),
    predW: param("predictor.conv.weight", [PR, EM, M]),
    predB: param("predictor.conv.bias", [PR]),
    jointWenc: param("joint.w_enc", [J, E]),
    jointWpred: param("joint.w_pred", [J, PR]),
    jointB: param("joint.bias", [J]),
    jointWout: param("joint.w_out", [L, J]),
    jointBout: param("joint.bias_out", [L]),
  };
  initParam(model.conv1w, rng, F * 3);
  initParam(model.conv2w, rng, E * 3);
  for (let i = 0; i < cfg.num_dfsmn_layers; i++) {
    const layer: MemLayer = {
      inProj: { kind: "dense", w: param(`dfsmn.${i}.in_proj`, [P, E]) },
      taps: param(`dfsmn.${i}.taps`, [K, P]),
      outProj: { kind: "dense", w: param(`dfsmn.${i}.out_proj`, [E, P]) },
      bias: param(`dfsmn.${i}.bias`, [E]),
    };
    initParam((layer.inProj as DenseLinear).w, rng, E);
    initParam(layer.taps, rng, K);
    initParam((layer.outProj as DenseLinear).w, rng, P);
    model.layers.push(layer);
  }
  initParam(model.embedding, rng, EM);
  initParam(model.predW, rng, EM * M);
  initParam(model.jointWenc, rng, E);
  initParam(model.jointWpred, rng, PR);
  initParam(model.jointWout, rng, J);
  return model;
}

// ---------------------------------------------------------------------------
// Forward with caches

export interface ConvCache {
  input: Float64Array[];
  pre: Float64Array[]; // pre-ReLU activations
  out: Float64Array[];
}

function convForward(w: Param, b: Param, input: Float64Array[]): ConvCache {
  const [outDim, inDim] = w.shape;
  const T = input.length;
  const S = Math.floor((T + 1) / 2);
  const pre: Float64Array[] = [];
  const out: Float64Array[] = [];
  for (let i = 0; i < S; i++) {
    const z = new Float64Array(outDim);
    z.set(b.v);
    for (let j = 0; j < 3; j++) {
      const src = 2 * i - 2 + j;
      if (src < 0 || src >= T) continue;
      const x = input[src];
      for (let o = 0; o < outDim; o++) {
        let acc = 0;
        const base = (o * inDim) * 3 + j;
        for (let c = 0; c < inDim; c++) acc += w.v[base + c * 3] * x[c];
        z[o] += acc;
      }
    }
    pre.push(z);
    const y = new Float64Array(outDim);
    for (let o = 0; o < outDim; o++) y[o] = Math.max(z[o], 0);
    out.push(y);
  }
  return { input, pre, out };
}

function convBackward(w: Param, b: Param, cache: ConvCache,
                      dout: Float64Array[]): Float64Array[] {
  const [outDim, inDim] = w.shape;
  const T = cache.input.length;
  const dx = cache.input.map(() => new Float64Array(inDim));
  for (let i = 0; i < cache.out.length; i++) {
    const dz = new Float64Array(outDim);
    for (let o = 0; o < outDim; o++) {
      dz[o] = cache.pre[i][o] > 0 ? dout[i][o] : 0;
      b.g[o] += dz[o];
    }
    for (let j = 0; j < 3; j++) {
      const src = 2 * i - 2 + j;
      if (src < 0 || src >= T) continue;
      const x = cache.input[src];
      const dxs = dx[src];
      for (let o = 0; o < outDim; o++) {
        const d = dz[o];
        if (d === 0) continue;
        const base = (o * inDim) * 3 + j;
        for (let c = 0; c < inDim; c++) {
          w.g[base + c * 3] += d * x[c];
          dxs[c] += w.v[base + c * 3] * d;
        }
      }
    }
  }
  return dx;
}

export interface MemCache {
  input: Float64Array[];
  proj: Float64Array[];
  mem: Float64Array[];
  out: Float64Array[];
}

function memForward(layer: MemLayer, left: number, right: number,
                    input: Float64Array[]): MemCache {
  const T = input.length;
  const P = layer.taps.shape[1];
  const E = linearRows(layer.outProj);
  const proj = input.map((x) => linearApply(layer.inProj, x));
  const mem: Float64Array[] = [];
  const out: Float64Array[] = [];
  for (let t = 0; t < T; t++) {
    const m = new Float64Array(P);
    for (let j = -left; j <= right; j++) {
      const src = t + j;
      if (src < 0 || src >= T) continue;
      const tap = (j + left) * P;
      const p = proj[src];
      for (let d = 0; d < P; d++) m[d] += layer.taps.v[tap + d] * p[d];
    }
    mem.push(m);
    const y = linearApply(layer.outProj, m);
    const x = input[t];
    for (let e = 0; e < E; e++) y[e] += layer.bias.v[e] + x[e];
    out.push(y);
  }
  return { input, proj, mem, out };
}

function memBackward(layer: MemLayer, left: number, right: number,
                     cache: MemCache, dout: Float64Array[]): Float64Array[] {
  const T = cache.input.length;
  const P = layer.taps.shape[1];
  const E = linearRows(layer.outProj);
  const dproj = cache.proj.map(() => new Float64Array(P));
  const dx = cache.input.map((_, t) => Float64Array.from(dout[t])); // skip path
  for (let t = 0; t < T; t++) {
    for (let e = 0; e < E; e++) layer.bias.g[e] += dout[t][e];
    const dmem = linearBackward(layer.outProj, cache.mem[t], dout[t]);
    for (let j = -left; j <= right; j++) {
      const src = t + j;
      if (src < 0 || src >= T) continue;
      const tap = (j + left) * P;
      const p = cache.proj[src];
      const dp = dproj[src];
      for (let d = 0; d < P; d++) {
        layer.taps.g[tap + d] += dmem[d] * p[d];
        dp[d] += layer.taps.v[tap + d] * dmem[d];
      }
    }
  }
  for (let t = 0; t < T; t++) {
    const dxt = linearBackward(layer.inProj, cache.input[t], dproj[t]);
    const acc = dx[t];
    for (let e = 0; e < acc.length; e++) acc[e] += dxt[e];
  }
  return dx;
}

export interface EncoderCache {
  conv1: ConvCache;
  conv2: ConvCache;
  mems: MemCache[];
  out: Float64Array[];
}

export function encoderForward(model: Model, feats: Float64Array[]): EncoderCache {
  const conv1 = convForward(model.conv1w, model.conv1b, feats);
  const conv2 = convForward(model.conv2w, model.conv2b, conv1.out);
  const mems: MemCache[] = [];
  let cur = conv2.out;
  for (const layer of model.layers) {
    const cache = memForward(layer, model.cfg.dfsmn_left, model.cfg.dfsmn_right, cur);
    mems.push(cache);
    cur = cache.out;
  }
  return { conv1, conv2, mems, out: cur };
}

export function encoderBackward(model: Model, cache: EncoderCache,
                                denc: Float64Array[]): void {
  let d = denc;
  for (let i = model.layers.length - 1; i >= 0; i--) {
    d = memBackward(model.layers[i], model.cfg.dfsmn_left,
                    model.cfg.dfsmn_right, cache.mems[i], d);
  }
  d = convBackward(model.conv2w, model.conv2b, cache.conv2, d);
  convBackward(model.conv1w, model.conv1b, cache.conv1, d);
}

// ---------------------------------------------------------------------------
// Predictor

export function historyFor(cfg: ModelConfig, targets: number[], u: number): number[] {
  const M = cfg.predictor_context;
  const hist: number[] = [];
  for (let j = u - M; j < u; j++) hist.push(j < 0 ? sosId(cfg) : targets[j]);
  return hist;
}

export function predictorForward(model: Model, hist: number[]): Float64Array {
  const { embed_dim: EM, pred_dim: PR, predictor_context: M } = model.cfg;
  const out = Float64Array.from(model.predB.v);
  for (let j = 0; j < M; j++) {
    const emb = model.embedding.v.subarray(hist[j] * EM, (hist[j] + 1) * EM);
    for (let o = 0; o < PR; o++) {
      let acc = 0;
      const base = (o * EM) * M + j;
      for (let c = 0; c < EM; c++) acc += model.predW.v[base + c * M] * emb[c];
      out[o] += acc;
    }
  }
  return out;
}

export function predictorBackward(model: Model, hist: number[],
                                  dpred: Float64Array): void {
  const { embed_dim: EM, pred_dim: PR, predictor_context: M } = model.cfg;
  for (let o = 0; o < PR; o++) model.predB.g[o] += dpred[o];
  for (let j = 0; j < M; j++) {
    const row = hist[j] * EM;
    const emb = model.embedding.v.subarray(row, row + EM);
    for (let o = 0; o < PR; o++) {
      const d = dpred[o];
      if (d === 0) continue;
      const base = (o * EM) * M + j;
      for (let c = 0; c < EM; c++) {
        model.predW.g[base + c * M] += d * emb[c];
        model.embedding.g[row + c] += model.predW.v[base + c * M] * d;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Joint

export interface JointCache {
  z: Float64Array;
  logp: Float64Array;
}

export function jointForward(model: Model, hEnc: Float64Array,
                             hPred: Float64Array): JointCache {
  const { joint_dim: J, num_labels: L } = model.cfg;
  const z = new Float64Array(J);
  matvec(model.jointWenc.v, J, model.cfg.encoder_dim, hEnc, z);
  const zp = new Float64Array(J);
  matvec(model.jointWpred.v, J, model.cfg.pred_dim, hPred, zp);
  for (let j = 0; j < J; j++) z[j] = Math.tanh(z[j] + zp[j] + model.jointB.v[j]);
  const logits = new Float64Array(L);
  matvec(model.jointWout.v, L, J, z, logits);
  let max = -Infinity;
  for (let l = 0; l < L; l++) {
    logits[l] += model.jointBout.v[l];
    if (logits[l] > max) max = logits[l];
  }
  let sum = 0;
  for (let l = 0; l < L; l++) sum += Math.exp(logits[l] - max);
  const lse = max + Math.log(sum);
  for (let l = 0; l < L; l++) logits[l] -= lse;
  return { z, logp: logits };
}

/** Accumulates parameter grads; adds grads wrt the encoder/predictor inputs. */
export function jointBackward(model: Model, hEnc: Float64Array,
                              hPred: Float64Array, cache: JointCache,
                              dlogp: Float64Array, dEnc: Float64Array,
                              dPred: Float64Array): void {
  const { joint_dim: J, num_labels: L } = model.cfg;
  let gsum = 0;
  for (let l = 0; l < L; l++) gsum += dlogp[l];
  const dlogits = new Float64Array(L);
  for (let l = 0; l < L; l++) {
    dlogits[l] = dlogp[l] - Math.exp(cache.logp[l]) * gsum;
    model.jointBout.g[l] += dlogits[l];
  }
  accumOuter(model.jointWout.g, L, J, dlogits, cache.z);
  const dz = new Float64Array(J);
  matvecT(model.jointWout.v, L, J, dlogits, dz);
  for (let j = 0; j < J; j++) {
    dz[j] *= 1 - cache.z[j] * cache.z[j];
    model.jointB.g[j] += dz[j];
  }
  accumOuter(model.jointWenc.g, J, model.cfg.encoder_dim, dz, hEnc);
  matvecT(model.jointWenc.v, J, model.cfg.encoder_dim, dz, dEnc);
  accumOuter(model.jointWpred.g, J, model.cfg.pred_dim, dz, hPred);
  matvecT(model.jointWpred.v, J, model.cfg.pred_dim, dz, dPred);
}
