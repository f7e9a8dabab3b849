import { toyConfig } from "./config";
import { greedyDecode, errorRate } from "./decode";
import { writeFixtures, FIXTURE_DIR } from "./fixtures";
import { initModel } from "./model";
import { ToyTask } from "./task";
import { train, DEFAULT_TRAIN } from "./train";

function cmdTrain(): void {
  const cfg = toyConfig();
  const task = new ToyTask(cfg);
  const model = initModel(cfg, 21);
  const t0 = Date.now();
  const losses = train(model, task, { ...DEFAULT_TRAIN, logEvery: 50 });
  const dev = task.corpus(555, 25);
  const hyps = dev.map((u) => greedyDecode(model, u.feats, 0));
  const per = errorRate(dev.map((u) => u.phones), hyps);
  console.log(`trained ${losses.length} steps in ${(Date.now() - t0) / 1000}s; `
              + `final loss ${losses[losses.length - 1].toFixed(4)}; `
              + `dev phone error rate ${(per * 100).toFixed(2)}%`);
}

function cmdFixtures(): void {
  const t0 = Date.now();
  writeFixtures();
  console.log(`fixture kit written to ${FIXTURE_DIR} in `
              + `${(Date.now() - t0) / 1000}s`);
}

const command = process.argv[2];
if (command === "train") cmdTrain();
else if (command === "fixtures") cmdFixtures();
else {
  console.error("usage: node dist/main.js [train|fixtures]");
  process.exit(2);
}
