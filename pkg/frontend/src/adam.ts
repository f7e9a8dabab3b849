import { Param } from "./model";

/** Plain Adam with bias correction; lr defaults to the training recipe. */
export class Adam {
  private m: Float64Array[];
  private v: Float64Array[];
  private t = 0;

  constructor(private params: Param[], public lr = 5e-4,
              private beta1 = 0.9, private beta2 = 0.999,
              private eps = 1e-8) {
    this.m = params.map((p) => new Float64Array(p.v.length));
    this.v = params.map((p) => new Float64Array(p.v.length));
  }

  step(): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (let i = 0; i < this.params.length; i++) {
      const p = this.params[i];
      const m = this.m[i];
      const v = this.v[i];
      for (let j = 0; j < p.v.length; j++) {
        const g = p.g[j];
        m[j] = this.beta1 * m[j] + (1 - this.beta1) * g;
        v[j] = this.beta2 * v[j] + (1 - this.beta2) * g * g;
        p.v[j] -= this.lr * (m[j] / c1) / (Math.sqrt(v[j] / c2) + this.eps);
      }
    }
  }
}
