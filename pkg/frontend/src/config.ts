/** Mirrors the engine's model config; key order matters for container bytes. */
export interface ModelConfig {
  feat_dim: number;
  encoder_dim: number;
  num_dfsmn_layers: number;
  dfsmn_left: number;
  dfsmn_right: number;
  dfsmn_proj_dim: number;
  joint_dim: number;
  embed_dim: number;
  pred_dim: number;
  predictor_context: number;
  num_labels: number;
  blank_id: number;
  subsample_factor: number;
}

/** Toy scale: small enough to train in seconds, every layer type exercised. */
export function toyConfig(): ModelConfig {
  return {
    feat_dim: 8,
    encoder_dim: 32,
    num_dfsmn_layers: 2,
    dfsmn_left: 2,
    dfsmn_right: 1,
    dfsmn_proj_dim: 16,
    joint_dim: 16,
    embed_dim: 16,
    pred_dim: 16,
    predictor_context: 4,
    num_labels: 13,
    blank_id: 0,
    subsample_factor: 4,
  };
}

export function sosId(cfg: ModelConfig): number {
  return cfg.num_labels;
}
