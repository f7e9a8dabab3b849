import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { Adam } from "../src/adam";
import { toyConfig } from "../src/config";
import { errorRate, greedyDecode } from "../src/decode";
import { FIXTURE_DIR, heldoutCorpus } from "../src/fixtures";
import { initModel, parameters } from "../src/model";
import { Rng } from "../src/rng";
import { minPairwiseDistance, ToyTask, PHONE_NAMES } from "../src/task";
import { meanLoss, train, trainStep, DEFAULT_TRAIN } from "../src/train";
import { loadModel, saveModel } from "../src/ttrd";

describe("toy task", () => {
  it("is deterministic under a fixed seed", () => {
    const task = new ToyTask(toyConfig());
    const a = task.corpus(3, 4);
    const b = task.corpus(3, 4);
    expect(a.map((u) => u.words)).toEqual(b.map((u) => u.words));
    expect(Array.from(a[0].feats[0])).toEqual(Array.from(b[0].feats[0]));
  });

  it("keeps phone templates apart", () => {
    const task = new ToyTask(toyConfig());
    expect(minPairwiseDistance(task.templates)).toBeGreaterThan(0.5);
  });
});

describe("training", () => {
  it("one step with lr 0 leaves weights unchanged", () => {
    const cfg = toyConfig();
    const task = new ToyTask(cfg);
    const model = initModel(cfg, 1);
    const before = parameters(model).map((p) => Float64Array.from(p.v));
    const opt = new Adam(parameters(model), 0.0);
    trainStep(model, task.corpus(2, 4), opt);
    parameters(model).forEach((p, i) => {
      expect(Array.from(p.v)).toEqual(Array.from(before[i]));
    });
  });

  it("loss after 200 steps is below the starting loss", () => {
    const cfg = toyConfig();
    const task = new ToyTask(cfg);
    const model = initModel(cfg, 21);
    const probe = task.corpus(424242, 8);
    const before = meanLoss(model, probe);
    train(model, task, { ...DEFAULT_TRAIN, steps: 200 });
    const after = meanLoss(model, probe);
    expect(after).toBeLessThan(before);
  });

  it("reaches >= 95% greedy phone accuracy within two minutes", () => {
    const cfg = toyConfig();
    const task = new ToyTask(cfg);
    const model = initModel(cfg, 21);
    const t0 = Date.now();
    train(model, task, DEFAULT_TRAIN);
    const seconds = (Date.now() - t0) / 1000;
    const held = heldoutCorpus();
    const per = errorRate(held.map((u) => u.phones),
                          held.map((u) => greedyDecode(model, u.feats, 0)));
    expect(seconds).toBeLessThan(120);
    expect(per).toBeLessThanOrEqual(0.05);
  });
});

describe("cross-boundary parity (committed fixture kit)", () => {
  it("engine greedy decode matches the trainer's outputs exactly", () => {
    const featDir = path.join(FIXTURE_DIR, "feats");
    const featFiles = fs.readdirSync(featDir).sort()
      .map((n) => path.join(featDir, n));
    expect(featFiles.length).toBe(50);
    const out = path.join(os.tmpdir(), `engine_greedy_${process.pid}.txt`);
    execFileSync("python3", [
      "-m", "ttasr", "decode",
      "--model", path.join(FIXTURE_DIR, "model.ttrd"),
      "--phones", path.join(FIXTURE_DIR, "phones.txt"),
      "--beta", "0", "--gamma", "0.95",
      "--output", out, ...featFiles,
    ], { stdio: "pipe" });
    const engine = fs.readFileSync(out, "utf-8");
    const trainer = fs.readFileSync(
      path.join(FIXTURE_DIR, "trainer_greedy.txt"), "utf-8");
    expect(engine).toBe(trainer);
    fs.unlinkSync(out);
  });

  it("the committed model scores >= 95% on the held-out corpus", () => {
    const model = loadModel(
      fs.readFileSync(path.join(FIXTURE_DIR, "model.ttrd")));
    const held = heldoutCorpus();
    const per = errorRate(held.map((u) => u.phones),
                          held.map((u) => greedyDecode(model, u.feats, 0)));
    expect(per).toBeLessThanOrEqual(0.05);
  });

  it("fixture refs use the shared phone inventory", () => {
    const refs = fs.readFileSync(
      path.join(FIXTURE_DIR, "refs_phones.txt"), "utf-8").trim().split("\n");
    expect(refs.length).toBe(50);
    for (const line of refs) {
      for (const tok of line.split(" ").slice(1)) {
        expect(PHONE_NAMES).toContain(tok);
      }
    }
  });
});
