"""Streaming phone-transducer inference engine with a blank-skipping WFST
decoder and SVD/int8 model compression."""

from .backend import backend_name
from .container import load_model, load_model_file, save_model, save_model_file
from .decoder import (DecodeParams, DecodeTrace, PosteriorFrame, blank_rate,
                      decode_posteriors, decode_utterance, deweight_blank,
                      is_blank_frame)
from .linalg import SvdFactors, log_scores, matvec, svd
from .metrics import ErrorBreakdown, SpeedReport, align_and_count, speed_report
from .nnet import (EncoderState, ModelConfig, PredictorState, TransducerModel,
                   encoder_flush, encoder_push, joint_step, predictor_step)

__version__ = "0.1.0"
