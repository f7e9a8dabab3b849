/**
 * Builds the trained fixture kit consumed by the engine's cross-boundary
 * tests: TTRD model, feature files, reference transcripts, the trainer's own
 * greedy outputs, encoder dumps for forward-parity checks, and toy
 * lexicon/grammar/phone tables. Deterministic end to end.
 */

import * as fs from "fs";
import * as path from "path";

import { toyConfig } from "./config";
import { greedyDecode } from "./decode";
import { encoderForward, initModel, Model } from "./model";
import { ToyTask, LEXICON, PHONE_NAMES, Utterance } from "./task";
import { train, DEFAULT_TRAIN } from "./train";
import { loadModel, saveModel } from "./ttrd";

export const FIXTURE_DIR = path.join(__dirname, "..", "fixtures");
export const MODEL_SEED = 21;
export const HELDOUT_SEED = 9090;
export const HELDOUT_COUNT = 50;

function f32FileBytes(frames: Float64Array[]): Buffer {
  const dim = frames.length ? frames[0].length : 0;
  const buf = Buffer.alloc(frames.length * dim * 4);
  frames.forEach((frame, t) => {
    for (let d = 0; d < dim; d++) {
      buf.writeFloatLE(Math.fround(frame[d]), (t * dim + d) * 4);
    }
  });
  return buf;
}

export function trainToyModel(steps = DEFAULT_TRAIN.steps): Model {
  const cfg = toyConfig();
  const task = new ToyTask(cfg);
  const model = initModel(cfg, MODEL_SEED);
  train(model, task, { ...DEFAULT_TRAIN, steps });
  return model;
}

export function writeFixtures(outDir = FIXTURE_DIR,
                              steps = DEFAULT_TRAIN.steps): void {
  const cfg = toyConfig();
  const task = new ToyTask(cfg);
  fs.mkdirSync(path.join(outDir, "feats"), { recursive: true });

  const model = initModel(cfg, MODEL_SEED);
  train(model, task, { ...DEFAULT_TRAIN, steps });
  const blob = saveModel(model);
  fs.writeFileSync(path.join(outDir, "model.ttrd"), blob);

  // decode with the f32-rounded weights the engine will see
  const rounded = loadModel(blob);
  const heldout = task.corpus(HELDOUT_SEED, HELDOUT_COUNT);

  const wordRefs: string[] = [];
  const phoneRefs: string[] = [];
  const greedyLines: string[] = [];
  heldout.forEach((utt, i) => {
    const id = `t${String(i).padStart(3, "0")}`;
    fs.writeFileSync(path.join(outDir, "feats", `${id}.f32`),
                     f32FileBytes(utt.feats));
    wordRefs.push(`${id} ${utt.words.join(" ")}`);
    phoneRefs.push(`${id} ${utt.phones.map((p) => PHONE_NAMES[p - 1]).join(" ")}`);
    const hyp = greedyDecode(rounded, utt.feats, 0);
    greedyLines.push(`${id} ${hyp.map((p) => PHONE_NAMES[p - 1]).join(" ")}`.trimEnd());
  });
  fs.writeFileSync(path.join(outDir, "refs_words.txt"), wordRefs.join("\n") + "\n");
  fs.writeFileSync(path.join(outDir, "refs_phones.txt"), phoneRefs.join("\n") + "\n");
  fs.writeFileSync(path.join(outDir, "trainer_greedy.txt"),
                   greedyLines.join("\n") + "\n");

  // batch encoder outputs for the engine's streaming-parity check
  for (let i = 0; i < 3; i++) {
    const enc = encoderForward(rounded, heldout[i].feats).out;
    const id = `t${String(i).padStart(3, "0")}`;
    fs.writeFileSync(path.join(outDir, `enc_${id}.f32`), f32FileBytes(enc));
  }

  fs.writeFileSync(path.join(outDir, "phones.txt"),
                   "<eps> 0\n" + PHONE_NAMES.map((p, i) => `${p} ${i + 1}`).join("\n") + "\n");
  fs.writeFileSync(path.join(outDir, "lexicon.txt"),
                   LEXICON.map(([w, pron]) => `${w} ${pron.join(" ")}`).join("\n") + "\n");
  fs.writeFileSync(path.join(outDir, "grammar.txt"),
                   LEXICON.map(([w]) => `${w} 0.05`).join("\n") + "\n");
}

export function heldoutCorpus(): Utterance[] {
  const task = new ToyTask(toyConfig());
  return task.corpus(HELDOUT_SEED, HELDOUT_COUNT);
}
