from .gradcheck import finite_diff_check, numeric_grad, relative_error
from .ops import (
    IndexOutOfRange,
    NonFiniteValue,
    ShapeMismatch,
    ZeroLength,
    bag_matrix,
    bce_grad,
    bce_logit_grad,
    bce_loss,
    dense,
    dense_backward,
    dropout_mask,
    embedding_backward,
    embedding_lookup,
    entropy_regularizer,
    entropy_regularizer_grad,
    lstm_backward,
    lstm_backward_projected,
    lstm_forward,
    lstm_forward_projected,
    lstm_step,
    lstm_step_backward,
    masked_mean_pool,
    masked_mean_pool_backward,
    sigmoid,
    sigmoid_attention_pool,
    sigmoid_attention_pool_backward,
    softmax_attention_pool,
    softmax_attention_pool_backward,
)
from .params import ParamStore, adamax_step, embedding_init, glorot_uniform, lstm_init
