"""Independent numpy oracles: a step-by-step BiLSTM recurrence, a dense graph
convolution and a straight-line forward pass, all written against the model's
documented semantics rather than its torch implementation."""

import numpy as np
import torch


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _run_direction(x, w_ih, w_hh, b_ih, b_hh, reverse):
    T = x.shape[0]
    H = w_hh.shape[1]
    h = np.zeros(H)
    c = np.zeros(H)
    outs = np.zeros((T, H))
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        gates = w_ih @ x[t] + b_ih + w_hh @ h + b_hh
        i = _sigmoid(gates[0:H])
        f = _sigmoid(gates[H:2 * H])
        g = np.tanh(gates[2 * H:3 * H])
        o = _sigmoid(gates[3 * H:4 * H])
        c = f * c + i * g
        h = o * np.tanh(c)
        outs[t] = h
    return outs, h


def bilstm_oracle(x, lstm_params, layers, hidden):
    """x: T x d input. Returns (T x 2H layer-2 outputs, final fwd/bwd states)."""
    inputs = x
    for layer in range(layers):
        fwd, h_fwd = _run_direction(
            inputs, lstm_params[f"weight_ih_l{layer}"], lstm_params[f"weight_hh_l{layer}"],
            lstm_params[f"bias_ih_l{layer}"], lstm_params[f"bias_hh_l{layer}"], False)
        bwd, h_bwd = _run_direction(
            inputs, lstm_params[f"weight_ih_l{layer}_reverse"],
            lstm_params[f"weight_hh_l{layer}_reverse"],
            lstm_params[f"bias_ih_l{layer}_reverse"],
            lstm_params[f"bias_hh_l{layer}_reverse"], True)
        inputs = np.concatenate([fwd, bwd], axis=1)
    return inputs, np.concatenate([h_fwd, h_bwd])


def batchnorm_eval_oracle(x, bn):
    rm = bn.running_mean.detach().numpy()
    rv = bn.running_var.detach().numpy()
    w = bn.weight.detach().numpy()
    b = bn.bias.detach().numpy()
    return (x - rm) / np.sqrt(rv + bn.eps) * w + b


def gcn_oracle(a_hat_dense, h, w):
    """Dense ReLU(A_hat @ H @ W)."""
    return np.maximum(a_hat_dense @ h @ w, 0.0)


def forward_oracle(model, ids, a_hat_dense):
    """Straight-line eval-mode forward pass for one example (numpy, float64)."""
    p = {k: v.detach().numpy().astype(np.float64) for k, v in model.state_dict().items()}
    emb = p["embedding.weight"][ids]
    lstm_params = {k.split("lstm.", 1)[1]: p[k] for k in p if k.startswith("lstm.")}
    H_seq, h_final = bilstm_oracle(emb, lstm_params, model.cfg.lstm_layers,
                                   model.cfg.lstm_hidden)
    nodes = batchnorm_eval_oracle(H_seq, model.bn1)
    z = gcn_oracle(a_hat_dense, nodes, p["gcn_weight"])
    z = batchnorm_eval_oracle(z, model.bn2)
    f = np.maximum(z @ p["ffnn.weight"].T + p["ffnn.bias"], 0.0)
    pooled = f.mean(axis=0) if model.cfg.pooling == "mean" else f.max(axis=0)
    logits = np.concatenate([pooled, h_final]) @ p["classifier.weight"].T + p["classifier.bias"]
    exp = np.exp(logits - logits.max())
    return logits, exp / exp.sum()


def finite_difference_grads(model, loss_fn, h=1e-5):
    """Central-difference gradients of loss_fn() w.r.t. every trainable tensor."""
    grads = {}
    for name, param in model.named_parameters():
        if not param.requires_grad:
            continue
        grad = torch.zeros_like(param)
        flat = param.data.view(-1)
        gflat = grad.view(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads[name] = grad
    return grads
