"""Damped FastICA fixed point with symmetric decorrelation.

Operates on pre-whitened patch matrices. The orthogonal matrix starts at the
identity; each outer step applies the damped update

    W <- (1/N) [ alpha * V phi(W^T V)^T - W diag(phi'(W^T V) 1) ]

with phi = tanh (the logcosh contrast derivative), followed by an inner
decorrelation loop (normalize by the spectral norm, then Newton steps
W <- 3/2 W - 1/2 W W^T W). Gradients flow by taping the iterations that
actually ran.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import NumericError


def _ica_core(v: ad.Var, cfg):
    if cfg.contrast != "logcosh":
        raise NumericError(f"unsupported contrast {cfg.contrast!r}")
    d, n = v.shape
    w = v.tape.leaf(np.eye(d))
    w_star = w
    for _ in range(cfg.max_outer):
        y = ad.matmul(ad.transpose(w), v)
        g = ad.tanh(y)
        gprime_rowsum = ad.asum(1.0 - g * g, axis=1)
        w = (
            cfg.alpha * ad.matmul(v, ad.transpose(g))
            - ad.matmul(w, ad.diag_matrix(gprime_rowsum))
        ) * (1.0 / n)
        # symmetric decorrelation
        w = w / ad.sqrt(ad.eig_max(ad.matmul(ad.transpose(w), w)))
        w_prev = w
        for _ in range(cfg.max_inner):
            w = 1.5 * w - 0.5 * ad.matmul(w, ad.matmul(ad.transpose(w), w))
            if float(np.linalg.norm(w.value - w_prev.value)) < cfg.tol:
                break
            w_prev = w
        if float(np.linalg.norm(w.value - w_star.value)) < cfg.tol:
            break
        w_star = w
    return ad.matmul(ad.transpose(w), v), w


def ica_layer_t(v: ad.Var, cfg) -> ad.Var:
    """Taped ICA layer; returns P = W^T V with decorrelated rows."""
    p, _ = _ica_core(v, cfg)
    return p


def ica_layer(v: np.ndarray, cfg) -> np.ndarray:
    tape = ad.Tape()
    return ica_layer_t(tape.leaf(v), cfg).value


def ica_fit(v: np.ndarray, cfg):
    """Run the layer on plain data; returns (P, W) for structural checks."""
    tape = ad.Tape()
    p, w = _ica_core(tape.leaf(v), cfg)
    return p.value, w.value
