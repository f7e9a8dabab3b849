/**
 * TTRD container writer/reader, byte-compatible with the engine:
 * magic "TTRD", version byte, u32-LE length-prefixed compact-JSON metadata
 * (config + ordered tensor manifest + low-rank records), then row-major
 * little-endian payloads. Weights round to f32 on export.
 */

import { ModelConfig } from "./config";
import { Linear, Model, Param, param } from "./model";

const MAGIC = "TTRD";
const VERSION = 1;

interface ManifestEntry {
  name: string;
  shape: number[];
  dtype: "f32" | "int8";
}

function f32Bytes(values: Float64Array): Buffer {
  const buf = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) buf.writeFloatLE(Math.fround(values[i]), i * 4);
  return buf;
}

export function saveModel(model: Model): Buffer {
  const manifest: ManifestEntry[] = [];
  const payloads: Buffer[] = [];
  const svdMeta: Record<string, { shape: number[]; rank: number }> = {};

  const emit = (p: Param) => {
    manifest.push({ name: p.name, shape: p.shape, dtype: "f32" });
    payloads.push(f32Bytes(p.v));
  };
  const emitLinear = (name: string, l: Linear) => {
    if (l.kind === "dense") {
      emit(l.w);
    } else {
      svdMeta[name] = {
        shape: [l.a.shape[0], l.b.shape[1]],
        rank: l.a.shape[1],
      };
      emit(l.a);
      emit(l.b);
    }
  };

  emit(model.conv1w);
  emit(model.conv1b);
  emit(model.conv2w);
  emit(model.conv2b);
  model.layers.forEach((layer, i) => {
    emitLinear(`dfsmn.${i}.in_proj`, layer.inProj);
    emit(layer.taps);
    emitLinear(`dfsmn.${i}.out_proj`, layer.outProj);
    emit(layer.bias);
  });
  emit(model.embedding);
  emit(model.predW);
  emit(model.predB);
  emit(model.jointWenc);
  emit(model.jointWpred);
  emit(model.jointB);
  emit(model.jointWout);
  emit(model.jointBout);

  const meta: Record<string, unknown> = { config: model.cfg, tensors: manifest };
  if (Object.keys(svdMeta).length) meta.svd = svdMeta;
  const doc = Buffer.from(JSON.stringify(meta), "utf-8");
  const header = Buffer.alloc(9);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt8(VERSION, 4);
  header.writeUInt32LE(doc.length, 5);
  return Buffer.concat([header, doc, ...payloads]);
}

export function loadModel(buf: Buffer): Model {
  if (buf.length < 9 || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error("not a TTRD container");
  }
  if (buf.readUInt8(4) !== VERSION) {
    throw new Error(`unsupported container version ${buf.readUInt8(4)}`);
  }
  const metaLen = buf.readUInt32LE(5);
  const meta = JSON.parse(buf.toString("utf-8", 9, 9 + metaLen));
  const cfg = meta.config as ModelConfig;

  let offset = 9 + metaLen;
  const tensors = new Map<string, Param>();
  for (const entry of meta.tensors as ManifestEntry[]) {
    const count = entry.shape.reduce((a: number, b: number) => a * b, 1);
    if (entry.dtype !== "f32") {
      throw new Error(`cannot train ${entry.dtype} tensor ${entry.name}`);
    }
    const p = param(entry.name, entry.shape);
    for (let i = 0; i < count; i++) p.v[i] = buf.readFloatLE(offset + i * 4);
    offset += count * 4;
    tensors.set(entry.name, p);
  }
  if (offset !== buf.length) throw new Error("trailing bytes in container");

  const take = (name: string): Param => {
    const p = tensors.get(name);
    if (!p) throw new Error(`missing tensor ${name}`);
    tensors.delete(name);
    return p;
  };
  const takeLinear = (name: string): Linear => {
    if (tensors.has(`${name}.a`)) {
      return { kind: "lowrank", a: take(`${name}.a`), b: take(`${name}.b`) };
    }
    return { kind: "dense", w: take(name) };
  };

  const model: Model = {
    cfg,
    conv1w: take("subsampler.0.weight"),
    conv1b: take("subsampler.0.bias"),
    conv2w: take("subsampler.1.weight"),
    conv2b: take("subsampler.1.bias"),
    layers: [],
    embedding: param("embedding.weight", [cfg.num_labels + 1, cfg.embed_dim]),
    predW: param("predictor.conv.weight",
                 [cfg.pred_dim, cfg.embed_dim, cfg.predictor_context]),
    predB: param("predictor.conv.bias", [cfg.pred_dim]),
    jointWenc: param("joint.w_enc", [cfg.joint_dim, cfg.encoder_dim]),
    jointWpred: param("joint.w_pred", [cfg.joint_dim, cfg.pred_dim]),
    jointB: param("joint.bias", [cfg.joint_dim]),
    jointWout: param("joint.w_out", [cfg.num_labels, cfg.joint_dim]),
    jointBout: param("joint.bias_out", [cfg.num_labels]),
  };
  for (let i = 0; i < cfg.num_dfsmn_layers; i++) {
    model.layers.push({
      inProj: takeLinear(`dfsmn.${i}.in_proj`),
      taps: take(`dfsmn.${i}.taps`),
      outProj: takeLinear(`dfsmn.${i}.out_proj`),
      bias: take(`dfsmn.${i}.bias`),
    });
  }
  for (const name of ["embedding.weight", "predictor.conv.weight",
                      "predictor.conv.bias", "joint.w_enc", "joint.w_pred",
                      "joint.bias", "joint.w_out", "joint.bias_out"]) {
    const p = take(name);
    const slot = {
      "embedding.weight": "embedding", "predictor.conv.weight": "predW",
      "predictor.conv.bias": "predB", "joint.w_enc": "jointWenc",
      "joint.w_pred": "jointWpred", "joint.bias": "jointB",
      "joint.w_out": "jointWout", "joint.bias_out": "jointBout",
    }[name] as keyof Model;
    (model as unknown as Record<string, Param>)[slot as string] = p;
  }
  if (tensors.size) {
    throw new Error(`unexpected tensors: ${[...tensors.keys()].join(", ")}`);
  }
  return model;
}
