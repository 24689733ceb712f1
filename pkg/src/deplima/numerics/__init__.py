"""Shared numeric substrate: tensors with reverse-mode gradients, recurrent
encoders, CRF machinery, the optimizer, and model serialization."""

from .tensor import (
    Tensor,
    add,
    as_tensor,
    concat,
    exp,
    grad_enabled,
    init_matrix,
    init_table,
    init_vector,
    log,
    logsumexp,
    matmul,
    mean,
    mul,
    no_grad,
    pick,
    pick_sum,
    reshape,
    row,
    rows,
    sigmoid,
    stack,
    sub,
    tanh,
    transpose,
    tsum,
)
from .rnn import BiRnnParams, GruCell, birnn_forward
from .crf import (
    CrfParams,
    crf_forward_backward,
    crf_gold_score,
    crf_log_partition,
    crf_negative_log_likelihood,
    viterbi_decode,
    viterbi_score,
)
from .optim import OptimizerState, ensure_grads, optimizer_step
from .gradcheck import grad_check
from .container import (
    load_container,
    parse_vocab_section,
    save_container,
    vocab_section,
)

__all__ = [
    "Tensor", "add", "as_tensor", "concat", "exp", "grad_enabled",
    "init_matrix", "init_table", "init_vector", "log", "logsumexp", "matmul",
    "mean", "mul", "no_grad", "pick", "pick_sum", "reshape", "row", "rows",
    "sigmoid", "stack", "sub", "tanh", "transpose", "tsum",
    "BiRnnParams", "GruCell", "birnn_forward",
    "CrfParams", "crf_forward_backward", "crf_gold_score",
    "crf_log_partition", "crf_negative_log_likelihood",
    "viterbi_decode", "viterbi_score",
    "OptimizerState", "ensure_grads", "optimizer_step", "grad_check",
    "load_container", "save_container", "vocab_section", "parse_vocab_section",
]
