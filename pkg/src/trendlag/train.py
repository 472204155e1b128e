"""Training protocol: MSE loss, Adam, early stopping with best-weight
restoration, learning-rate reduction on plateau, fixed chronological batches.

Runs are deterministic given (data, config, run label): batches are drawn in
chronological order by default and every random draw comes from a labeled
stream, so repeating a run reproduces the weight checksum bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from trendlag import rng as rng_mod
from trendlag.nn.kernels import adam_kernel_update
from trendlag.nn.layers import Network, NetworkSpec, NonFiniteError, build_network
from trendlag.nn.serialize import weight_checksum
from trendlag.series import SplitDataset, stack_inputs, stack_targets


# network-internal conditioning: targets map to [0, 1]; input channels are
# standardized with train-segment statistics. Predictions are mapped back, so
# every reported metric stays on the 0-100 scale.
INPUT_SCALE = 100.0


@dataclass(frozen=True)
class InputNormalizer:
    """Per-channel affine map fitted on the training windows."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x_train: np.ndarray) -> "InputNormalizer":
        flat = x_train.reshape(-1, x_train.shape[-1])
        mean = flat.mean(axis=0)
        # continuous channels are centered and brought near unit scale with a
        # shared divisor; one-hot dummies already sit on a comparable scale
        scale = np.full(flat.shape[-1], 25.0)
        binary = np.all((flat == 0.0) | (flat == 1.0), axis=0)
        mean[binary] = 0.0
        scale[binary] = 1.0
        return cls(mean, scale)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    max_epochs: int = 500
    early_stop_patience: int = 15
    plateau_patience: int = 5
    plateau_factor: float = 0.1
    min_lr: float = 1e-9
    initial_lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    shuffle: bool = False

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")
        if self.early_stop_patience < 1 or self.plateau_patience < 1:
            raise ValueError("patiences must be >= 1")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ValueError("plateau factor must lie strictly between 0 and 1")
        if self.min_lr <= 0 or self.initial_lr <= 0:
            raise ValueError("learning rates must be positive")


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean of squared residuals over every element."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: predictions {pred.shape}, targets {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def _mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    return 2.0 * (pred - target) / pred.size


class Adam:
    """Adam with bias correction; epsilon sits outside the square root."""

    def __init__(
        self,
        params,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]
        self._scratch = [np.empty(p.value.size) for p in self.params]

    def step(self) -> None:
        self.t += 1
        for param, m, v, scratch in zip(self.params, self.m, self.v, self._scratch):
            ok = adam_kernel_update(
                param.value.reshape(-1),
                param.grad.reshape(-1),
                m.reshape(-1),
                v.reshape(-1),
                self.lr,
                self.beta1,
                self.beta2,
                self.epsilon,
                self.t,
                scratch,
            )
            if not ok:
                raise NonFiniteError(f"non-finite gradient for parameter {param.name}")


class EarlyStopping:
    """Counts consecutive epochs without strict improvement; fires at patience."""

    def __init__(self, patience: int = 15):
        self.patience = patience
        self.best = math.inf
        self.counter = 0
        self.should_stop = False

    def update(self, val_loss: float) -> bool:
        """Feed one epoch's validation loss; returns True when it improved."""
        if val_loss < self.best:
            self.best = val_loss
            self.counter = 0
            return True
        self.counter += 1
        if self.counter >= self.patience:
            self.should_stop = True
        return False


class PlateauScheduler:
    """Multiplies lr by `factor` after `patience` non-improvements, floored at min_lr."""

    def __init__(self, initial_lr: float, patience: int = 5, factor: float = 0.1, min_lr: float = 1e-9):
        self.lr = initial_lr
        self.patience = patience
        self.factor = factor
        self.min_lr = min_lr
        self.best = math.inf
        self.counter = 0

    def update(self, val_loss: float) -> bool:
        """Feed one epoch's validation loss; returns True when lr was reduced."""
        if val_loss < self.best:
            self.best = val_loss
            self.counter = 0
            return False
        self.counter += 1
        if self.counter >= self.patience:
            self.lr = max(self.lr * self.factor, self.min_lr)
            self.counter = 0
            return True
        return False


@dataclass(frozen=True)
class EpochRecord:
    epoch: int  # 1-based
    train_loss: float
    val_loss: float
    lr: float  # rate in effect during this epoch
    events: tuple[str, ...] = ()


@dataclass
class TrainedModel:
    network: Network
    history: list[EpochRecord]
    best_epoch: int
    stop_reason: str
    checksum: str
    config: TrainConfig
    run_label: str
    normalizer: "InputNormalizer" = None

    @property
    def best_val_loss(self) -> float:
        return self.history[self.best_epoch - 1].val_loss

    def predict(self, windows: np.ndarray) -> np.ndarray:
        """Forecast on the 0-100 scale from raw (B, in_len, channels) windows."""
        x = self.normalizer.apply(np.asarray(windows, dtype=np.float64))
        return self.network.forward(x, train=False) * INPUT_SCALE

    def validation_loss_of(self, data: SplitDataset) -> float:
        """Internal-scale validation MSE, comparable with history entries."""
        x = self.normalizer.apply(stack_inputs(data.validation))
        y = stack_targets(data.validation) / INPUT_SCALE
        return mse_loss(self.network.forward(x, train=False), y)


def train(
    spec: NetworkSpec, data: SplitDataset, cfg: TrainConfig, run_label: str = "run"
) -> TrainedModel:
    """Fit the network on the split dataset under the full training protocol."""
    if not data.train or not data.validation:
        raise ValueError("train() needs non-empty train and validation window sets")
    normalizer = InputNormalizer.fit(stack_inputs(data.train))
    x_train = normalizer.apply(stack_inputs(data.train))
    y_train = stack_targets(data.train) / INPUT_SCALE
    x_val = normalizer.apply(stack_inputs(data.validation))
    y_val = stack_targets(data.validation) / INPUT_SCALE
    n = x_train.shape[0]

    network = build_network(spec, in_len=x_train.shape[1], in_channels=x_train.shape[2])
    network.initialize(lambda name: rng_mod.stream(cfg.seed, f"init/{run_label}/{name}"))
    dropout_rng = rng_mod.stream(cfg.seed, f"dropout/{run_label}")
    shuffle_rng = rng_mod.stream(cfg.seed, f"shuffle/{run_label}") if cfg.shuffle else None

    adam = Adam(network.parameters(), cfg.initial_lr, cfg.beta1, cfg.beta2, cfg.epsilon)
    early = EarlyStopping(cfg.early_stop_patience)
    plateau = PlateauScheduler(cfg.initial_lr, cfg.plateau_patience, cfg.plateau_factor, cfg.min_lr)

    history: list[EpochRecord] = []
    best_snapshot = network.snapshot()
    best_epoch = 0
    stop_reason = "max_epochs"

    for epoch in range(1, cfg.max_epochs + 1):
        lr_in_effect = plateau.lr
        adam.lr = lr_in_effect
        order = shuffle_rng.permutation(n) if shuffle_rng is not None else np.arange(n)
        total_se = 0.0
        try:
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                network.zero_grad()
                out = network.forward(x_train[idx], train=True, rng=dropout_rng)
                batch_targets = y_train[idx]
                loss = mse_loss(out, batch_targets)
                if not math.isfinite(loss):
                    raise TrainingDivergedError(epoch)
                total_se += loss * out.size
                network.backward(_mse_grad(out, batch_targets))
                adam.step()
            train_loss = total_se / y_train.size

            val_loss = mse_loss(network.forward(x_val, train=False), y_val)
        except NonFiniteError as exc:
            raise TrainingDivergedError(epoch) from exc
        if not math.isfinite(val_loss):
            raise TrainingDivergedError(epoch)

        events: list[str] = []
        if plateau.update(val_loss):
            events.append("reduce_lr")
        if early.update(val_loss):
            best_snapshot = network.snapshot()
            best_epoch = epoch
            events.append("improved")
        if early.should_stop:
            events.append("early_stop")
        history.append(EpochRecord(epoch, train_loss, val_loss, lr_in_effect, tuple(events)))
        if early.should_stop:
            stop_reason = "early_stopping"
            break

    network.restore(best_snapshot)
    return TrainedModel(
        network=network,
        history=history,
        best_epoch=best_epoch,
        stop_reason=stop_reason,
        checksum=weight_checksum(network),
        config=cfg,
        run_label=run_label,
        normalizer=normalizer,
    )


def render_training_log(model: TrainedModel) -> str:
    """Plain-text audit table: epoch, losses, lr and scheduler events."""
    lines = [
        f"# run: {model.run_label}",
        f"# stop_reason: {model.stop_reason}  best_epoch: {model.best_epoch}",
        f"# weight_checksum: {model.checksum}",
        f"{'epoch':>5}  {'train_loss':>18}  {'val_loss':>18}  {'lr':>10}  events",
    ]
    for rec in model.history:
        lines.append(
            f"{rec.epoch:>5}  {rec.train_loss:>18.12e}  {rec.val_loss:>18.12e}  "
            f"{rec.lr:>10.3e}  {','.join(rec.events)}"
        )
    return "\n".join(lines) + "\n"
