"""Residual denoising network: B identical blocks plus a reconstruction convolution.

Each block is an L-layer subnetwork (Conv+BN+ReLU for layers 1..L-1, plain Conv for layer L)
that predicts the residual noise S_i of its input; the block output is Y_i = Y_{i-1} - S_i.
After the last block a reconstruction layer combines the P denoised channel slices into a
single Ma x Mb channel-matrix estimate.
"""

import copy
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError, StateError
from .layers import BatchNorm2D, Conv2D, Dense, ReLU

RECON_CONV1X1 = "conv1x1"
RECON_DENSE = "dense"
RECON_KINDS = (RECON_CONV1X1, RECON_DENSE)


@dataclass(frozen=True)
class DenoiserHyper:
    """Architecture hyperparameters.

    blocks (B) and layers_per_block (L) follow the reference realization defaults B=3, L=8
    with 64 intermediate filters.  kernel_size is 3 for the standard network; 1 gives the
    purely channel-mixing configuration used by the linear analysis.  recon selects the
    reconstruction layer: a per-pixel 1x1 convolution over the P slices (default) or the
    literal full-volume affine map (ablation).
    """

    blocks: int = 3
    layers_per_block: int = 8
    filters: int = 64
    ma: int = 8
    mb: int = 8
    pilots: int = 2
    kernel_size: int = 3
    recon: str = RECON_CONV1X1

    def __post_init__(self):
        if self.blocks < 1:
            raise ParameterError(f"need at least one denoising block, got {self.blocks}")
        if self.layers_per_block < 2:
            raise ParameterError(f"need at least 2 layers per block, got {self.layers_per_block}")
        if self.filters < 1:
            raise ParameterError("filters must be positive")
        if self.ma < 1 or self.mb < 1 or self.pilots < 1:
            raise ParameterError("input geometry (ma, mb, pilots) must be positive")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ParameterError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.recon not in RECON_KINDS:
            raise ParameterError(f"recon must be one of {RECON_KINDS}, got {self.recon!r}")


class DenoisingBlock:
    """L-layer residual-noise subnetwork; maps Ma x Mb x P to itself."""

    def __init__(self, hyper: DenoiserHyper, rng: np.random.Generator):
        p, k, f = hyper.pilots, hyper.kernel_size, hyper.filters
        n_layers = hyper.layers_per_block
        self.convs: list[Conv2D] = []
        self.bns: list[BatchNorm2D] = []
        self.relus: list[ReLU] = []
        for layer in range(1, n_layers + 1):
            c_in = p if layer == 1 else f
            c_out = p if layer == n_layers else f
            self.convs.append(Conv2D(c_in, c_out, kernel_size=k, rng=rng))
            if layer < n_layers:
                self.bns.append(BatchNorm2D(c_out))
                self.relus.append(ReLU())

    def forward(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (Y_out, S) with S the predicted residual noise and Y_out = Y - S."""
        s = y
        for i, conv in enumerate(self.convs):
            s = conv.forward(s)
            if i < len(self.bns):
                s = self.relus[i].forward(self.bns[i].forward(s))
        if s.shape != y.shape:
            raise ShapeError(f"block produced shape {s.shape}, expected {y.shape}")
        return y - s, s

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        # Y_out = Y - S(Y): the subnetwork sees dL/dS = -grad_out, and the input
        # collects both the skip path and the subnetwork path
        g = -grad_out
        for i in range(len(self.convs) - 1, -1, -1):
            if i < len(self.bns):
                g = self.bns[i].backward(self.relus[i].backward(g))
            g = self.convs[i].backward(g)
        return grad_out + g

    def layers(self):
        return self.convs, self.bns, self.relus


class ResidualDenoiser:
    """The assembled network.  Construct via build_model(); set a mode before forward."""

    def __init__(self, hyper: DenoiserHyper, rng: np.random.Generator):
        self.hyper = hyper
        self.blocks = [DenoisingBlock(hyper, rng) for _ in range(hyper.blocks)]
        if hyper.recon == RECON_CONV1X1:
            self.recon = Conv2D(hyper.pilots, 1, kernel_size=1, rng=rng)
        else:
            self.recon = Dense(hyper.ma * hyper.mb * hyper.pilots, hyper.ma * hyper.mb, rng=rng)
        self.mode: str | None = None
        self._analysis = False

    # -- mode management -------------------------------------------------

    def train_mode(self) -> "ResidualDenoiser":
        self.mode = "train"
        for block in self.blocks:
            for bn in block.bns:
                bn.mode = BatchNorm2D.TRAIN
        return self

    def eval_mode(self) -> "ResidualDenoiser":
        self.mode = "eval"
        for block in self.blocks:
            for bn in block.bns:
                bn.mode = BatchNorm2D.EVAL
        return self

    @property
    def analysis(self) -> bool:
        """Linear-analysis mode: batch norm bypassed, ReLU replaced by identity."""
        return self._analysis

    @analysis.setter
    def analysis(self, flag: bool) -> None:
        self._analysis = bool(flag)
        for block in self.blocks:
            for bn in block.bns:
                bn.bypass = self._analysis
            for relu in block.relus:
                relu.identity = self._analysis

    # -- forward / backward ----------------------------------------------

    def _check_input(self, y: np.ndarray) -> tuple[np.ndarray, bool]:
        if self.mode is None:
            raise StateError("model mode not set: call train_mode() or eval_mode() first")
        y = np.asarray(y, dtype=np.float64)
        single = y.ndim == 3
        if single:
            y = y[None]
        hp = self.hyper
        if y.ndim != 4 or y.shape[1:] != (hp.ma, hp.mb, hp.pilots):
            raise ShapeError(
                f"input shape {y.shape} does not match geometry "
                f"({hp.ma}, {hp.mb}, {hp.pilots})"
            )
        return y, single

    def forward(self, y: np.ndarray) -> np.ndarray:
        """Run all blocks then the reconstruction layer; (.., Ma, Mb, P) -> (.., Ma, Mb)."""
        y, single = self._check_input(y)
        for block in self.blocks:
            y, _ = block.forward(y)
        x_hat = self._recon_forward(y)
        return x_hat[0] if single else x_hat

    def _recon_forward(self, y: np.ndarray) -> np.ndarray:
        hp = self.hyper
        if hp.recon == RECON_CONV1X1:
            return self.recon.forward(y)[..., 0]
        flat = self.recon.forward(y.reshape(y.shape[0], -1))
        return flat.reshape(y.shape[0], hp.ma, hp.mb)

    def backward(self, grad_xhat: np.ndarray) -> np.ndarray:
        """Reverse-mode pass; takes d loss / d X_hat, returns d loss / d input."""
        grad_xhat = np.asarray(grad_xhat, dtype=np.float64)
        single = grad_xhat.ndim == 2
        if single:
            grad_xhat = grad_xhat[None]
        hp = self.hyper
        if hp.recon == RECON_CONV1X1:
            g = self.recon.backward(grad_xhat[..., None])
        else:
            g = self.recon.backward(grad_xhat.reshape(grad_xhat.shape[0], -1))
            g = g.reshape(grad_xhat.shape[0], hp.ma, hp.mb, hp.pilots)
        for block in reversed(self.blocks):
            g = block.backward(g)
        return g[0] if single else g

    # -- parameter plumbing ----------------------------------------------

    def named_parameters(self) -> dict[str, np.ndarray]:
        """Trainable parameters as live views, in deterministic serialization order."""
        out: dict[str, np.ndarray] = {}
        for bi, block in enumerate(self.blocks):
            for li, conv in enumerate(block.convs, start=1):
                out.update(conv.named_parameters(f"block{bi}.conv{li}"))
                if li <= len(block.bns):
                    out.update(block.bns[li - 1].named_parameters(f"block{bi}.bn{li}"))
        out.update(self.recon.named_parameters("recon"))
        return out

    def named_gradients(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for bi, block in enumerate(self.blocks):
            for li, conv in enumerate(block.convs, start=1):
                out.update(conv.named_gradients(f"block{bi}.conv{li}"))
                if li <= len(block.bns):
                    out.update(block.bns[li - 1].named_gradients(f"block{bi}.bn{li}"))
        out.update(self.recon.named_gradients("recon"))
        return out

    def named_running_stats(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for bi, block in enumerate(self.blocks):
            for li in range(1, len(block.bns) + 1):
                out.update(block.bns[li - 1].running_stats(f"block{bi}.bn{li}"))
        return out

    def num_parameters(self) -> int:
        return sum(p.size for p in self.named_parameters().values())

    def state_dict(self) -> dict[str, np.ndarray]:
        """Deep copy of all parameters and BN running statistics."""
        state = {name: arr.copy() for name, arr in self.named_parameters().items()}
        state.update({name: arr.copy() for name, arr in self.named_running_stats().items()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        live = dict(self.named_parameters())
        live.update(self.named_running_stats())
        if set(state) != set(live):
            missing = set(live) - set(state)
            extra = set(state) - set(live)
            raise ParameterError(f"state dict mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
        for name, arr in live.items():
            src = np.asarray(state[name])
            if src.shape != arr.shape:
                raise ShapeError(f"state entry {name!r} has shape {src.shape}, expected {arr.shape}")
            np.copyto(arr, src)

    def clone(self) -> "ResidualDenoiser":
        return copy.deepcopy(self)


def build_model(hyper: DenoiserHyper, rng: np.random.Generator | int | None = None) -> ResidualDenoiser:
    """Construct a freshly initialized network (He-uniform conv weights, zero biases)."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return ResidualDenoiser(hyper, rng)
