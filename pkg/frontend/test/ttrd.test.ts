import { describe, expect, it } from "vitest";

import { toyConfig } from "../src/config";
import { initModel, parameters } from "../src/model";
import { ToyTask } from "../src/task";
import { train, DEFAULT_TRAIN } from "../src/train";
import { loadModel, saveModel } from "../src/ttrd";

describe("container round trips", () => {
  it("write -> read -> write is byte-identical", () => {
    const model = initModel(toyConfig(), 5);
    const blob = saveModel(model);
    const again = saveModel(loadModel(blob));
    expect(again.equals(blob)).toBe(true);
  });

  it("read preserves f32-rounded weights", () => {
    const model = initModel(toyConfig(), 6);
    const loaded = loadModel(saveModel(model));
    const a = parameters(model);
    const b = parameters(loaded);
    expect(b.length).toBe(a.length);
    for (let i = 0; i < a.length; i++) {
      expect(b[i].name).toBe(a[i].name);
      for (let j = 0; j < a[i].v.length; j++) {
        expect(b[i].v[j]).toBe(Math.fround(a[i].v[j]));
      }
    }
  });

  it("rejects other containers", () => {
    expect(() => loadModel(Buffer.from("NOPE0000aaaa")))
      .toThrow(/not a TTRD/);
  });

  it("same seed and steps exports byte-identical models", () => {
    const run = () => {
      const cfg = toyConfig();
      const task = new ToyTask(cfg);
      const model = initModel(cfg, 21);
      train(model, task, { ...DEFAULT_TRAIN, steps: 30 });
      return saveModel(model);
    };
    expect(run().equals(run())).toBe(true);
  });
});
