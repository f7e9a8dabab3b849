/**
 * Monotonic transducer loss: every frame either emits the next target and
 * advances, or emits blank and stays. Needs T >= U. Forward-backward in the
 * log domain over the (T+1) x (U+1) lattice; returns exact gradients with
 * respect to the per-(frame, history) log-posteriors.
 */

export class InfeasibleLossError extends Error {}

const NEG_INF = -Infinity;

function logaddexp(a: number, b: number): number {
  if (a === NEG_INF) return b;
  if (b === NEG_INF) return a;
  const m = a > b ? a : b;
  return m + Math.log(Math.exp(a - m) + Math.exp(b - m));
}

export interface LossResult {
  nll: number;
  /** same layout as logp: (T, U+1, L); dNLL/dlogp */
  dlogp: Float64Array;
}

export function monotonicLoss(logp: Float64Array, T: number, U: number,
                              L: number, targets: number[],
                              blank: number): LossResult {
  if (targets.length !== U) throw new Error("targets length mismatch");
  if (T < U) {
    throw new InfeasibleLossError(
      `cannot emit ${U} labels in ${T} frames (one per frame max)`);
  }
  const idx = (t: number, u: number, l: number) => (t * (U + 1) + u) * L + l;

  const W = U + 1;
  const alpha = new Float64Array((T + 1) * W).fill(NEG_INF);
  alpha[0] = 0;
  for (let t = 0; t < T; t++) {
    for (let u = 0; u <= Math.min(t, U); u++) {
      const a = alpha[t * W + u];
      if (a === NEG_INF) continue;
      const stay = a + logp[idx(t, u, blank)];
      alpha[(t + 1) * W + u] = logaddexp(alpha[(t + 1) * W + u], stay);
      if (u < U) {
        const emit = a + logp[idx(t, u, targets[u])];
        alpha[(t + 1) * W + u + 1] = logaddexp(alpha[(t + 1) * W + u + 1], emit);
      }
    }
  }
  const total = alpha[T * W + U];
  const beta = new Float64Array((T + 1) * W).fill(NEG_INF);
  beta[T * W + U] = 0;
  for (let t = T - 1; t >= 0; t--) {
    for (let u = Math.min(t, U); u >= 0; u--) {
      let b = beta[(t + 1) * W + u] + logp[idx(t, u, blank)];
      if (u < U) {
        b = logaddexp(b, beta[(t + 1) * W + u + 1] + logp[idx(t, u, targets[u])]);
      }
      beta[t * W + u] = b;
    }
  }

  const dlogp = new Float64Array(logp.length);
  for (let t = 0; t < T; t++) {
    for (let u = 0; u <= Math.min(t, U); u++) {
      const a = alpha[t * W + u];
      if (a === NEG_INF) continue;
      const occStay = Math.exp(a + logp[idx(t, u, blank)]
                               + beta[(t + 1) * W + u] - total);
      dlogp[idx(t, u, blank)] -= occStay;
      if (u < U) {
        const occEmit = Math.exp(a + logp[idx(t, u, targets[u])]
                                 + beta[(t + 1) * W + u + 1] - total);
        dlogp[idx(t, u, targets[u])] -= occEmit;
      }
    }
  }
  return { nll: -total, dlogp };
}
