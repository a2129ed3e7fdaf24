"""Affine coupling stack: exactly invertible transforms with analytic log-det.

Each layer passes one alternating half of the dimensions through
unchanged and applies an elementwise affine map to the other half, with
log-scale and shift produced by a conditioner network that sees the
pass-through half plus the standardized conditioning scalar. Log-scales
are softly capped to [-scale_cap, scale_cap] via tanh, so the cap never
breaks differentiability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import Mlp


def alternating_pass_masks(n_dims: int, n_layers: int) -> list[np.ndarray]:
    """Boolean pass-through masks, first half / second half alternating."""
    half = n_dims // 2
    masks = []
    for i in range(n_layers):
        m = np.zeros(n_dims, dtype=bool)
        if i % 2 == 0:
            m[:half] = True
        else:
            m[half:] = True
        masks.append(m)
    return masks


@dataclass
class _LayerCache:
    mlp_cache: tuple
    s: np.ndarray
    exp_neg_s: np.ndarray
    out_trans: np.ndarray  # transformed half on the z side


class CouplingStack:
    """Stack of affine coupling layers acting in standardized profile space."""

    def __init__(self, n_dims: int, n_layers: int, hidden_units: int,
                 scale_cap: float, rng: np.random.Generator):
        self.n_dims = n_dims
        self.scale_cap = float(scale_cap)
        self.pass_masks = alternating_pass_masks(n_dims, n_layers)
        self.nets: list[Mlp | None] = []
        for mask in self.pass_masks:
            n_trans = int((~mask).sum())
            if n_trans == 0:
                self.nets.append(None)  # nothing to transform (odd layers at T=1)
            else:
                self.nets.append(Mlp(int(mask.sum()) + 1, hidden_units, 2 * n_trans, rng))

    # -- parameter plumbing -------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        out = []
        for net in self.nets:
            if net is not None:
                out.extend(net.parameters)
        return out

    def set_parameters(self, params: list[np.ndarray]) -> None:
        i = 0
        for net in self.nets:
            if net is not None:
                net.set_parameters(params[i:i + 6])
                i += 6

    def copy_parameters(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    # -- evaluation ---------------------------------------------------------

    def _scale_shift(self, net: Mlp, passed: np.ndarray, w_std: np.ndarray,
                     want_cache: bool = False):
        inp = np.concatenate([passed, w_std[:, None]], axis=1)
        out, cache = net.forward(inp)
        n_trans = out.shape[1] // 2
        s_raw, t = out[:, :n_trans], out[:, n_trans:]
        s = self.scale_cap * np.tanh(s_raw / self.scale_cap)
        return (s, t, cache) if want_cache else (s, t, None)

    def forward(self, Z: np.ndarray, w_std: np.ndarray):
        """Base space to standardized profile space; returns (X_std, sum_log_scale)."""
        U = np.array(Z, dtype=float)
        sum_s = np.zeros(U.shape[0])
        for idx, (mask, net) in enumerate(zip(self.pass_masks, self.nets)):
            if net is None:
                continue
            s, t, _ = self._scale_shift(net, U[:, mask], w_std)
            U[:, ~mask] = U[:, ~mask] * np.exp(s) + t
            if not np.all(np.isfinite(U)):
                raise FloatingPointError(f"coupling layer {idx} produced non-finite values")
            sum_s += s.sum(axis=1)
        return U, sum_s

    def inverse(self, X_std: np.ndarray, w_std: np.ndarray, want_cache: bool = False):
        """Standardized profile space to base space.

        Returns ``(Z, sum_log_scale, caches)``; the log-det of this inverse
        map is ``-sum_log_scale``.
        """
        U = np.array(X_std, dtype=float)
        sum_s = np.zeros(U.shape[0])
        caches: list[_LayerCache | None] = [None] * len(self.nets)
        for idx in range(len(self.nets) - 1, -1, -1):
            mask, net = self.pass_masks[idx], self.nets[idx]
            if net is None:
                continue
            s, t, mlp_cache = self._scale_shift(net, U[:, mask], w_std, want_cache)
            exp_neg_s = np.exp(-s)
            U[:, ~mask] = (U[:, ~mask] - t) * exp_neg_s
            if not np.all(np.isfinite(U)):
                raise FloatingPointError(f"coupling layer {idx} produced non-finite values")
            sum_s += s.sum(axis=1)
            if want_cache:
                caches[idx] = _LayerCache(mlp_cache=mlp_cache, s=s, exp_neg_s=exp_neg_s,
                                          out_trans=U[:, ~mask].copy())
        return U, sum_s, caches

    def backward_nll(self, caches, Z: np.ndarray) -> list[np.ndarray]:
        """Gradients of the batch-mean NLL w.r.t. every conditioner parameter.

        The NLL decomposes (up to constants) as
        ``mean(0.5*||z||^2 + sum_of_log_scales)``; both terms are
        backpropagated through the inverse pass recorded in ``caches``.
        """
        batch = Z.shape[0]
        g_U = Z / batch
        delta = 1.0 / batch  # direct d(mean sum_s)/ds contribution
        grads: list[list[np.ndarray] | None] = [None] * len(self.nets)
        # the inverse ran layers last-to-first, so backprop walks first-to-last
        for idx, (mask, net) in enumerate(zip(self.pass_masks, self.nets)):
            if net is None:
                continue
            c = caches[idx]
            g_out_trans = g_U[:, ~mask]
            g_s = -g_out_trans * c.out_trans + delta
            g_t = -g_out_trans * c.exp_neg_s
            g_in_trans = g_out_trans * c.exp_neg_s
            g_s_raw = g_s * (1.0 - (c.s / self.scale_cap) ** 2)
            g_mlp_out = np.concatenate([g_s_raw, g_t], axis=1)
            g_mlp_in, param_grads = net.backward(c.mlp_cache, g_mlp_out)
            grads[idx] = param_grads
            g_V = np.empty_like(g_U)
            g_V[:, ~mask] = g_in_trans
            g_V[:, mask] = g_U[:, mask] + g_mlp_in[:, :-1]  # drop the w column
            g_U = g_V
        out: list[np.ndarray] = []
        for g in grads:
            if g is not None:
                out.extend(g)
        return out
