"""Full-batch training loop with Adam and a smooth L1 objective."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aggregate import AggregatorModel, forward_molecule, forward_molecule_with_grad
from .graphdata import PreparedMolecule


def smooth_l1(pred: float, target: float, beta: float = 1.0) -> float:
    """Huber-style loss: quadratic within beta of the target, linear outside."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    d = pred - target
    if abs(d) < beta:
        return 0.5 * d * d / beta
    return abs(d) - 0.5 * beta


def dsmooth_l1(pred: float, target: float, beta: float = 1.0) -> float:
    """Derivative of smooth_l1 with respect to the prediction."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    d = pred - target
    if abs(d) < beta:
        return d / beta
    return 1.0 if d > 0 else -1.0


def r2_score(targets, preds) -> float:
    """Coefficient of determination of preds against targets."""
    y = np.asarray(targets, dtype=np.float64)
    f = np.asarray(preds, dtype=np.float64)
    if y.shape != f.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {f.shape}")
    if y.size < 2:
        raise ValueError("r2_score needs at least two samples")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("r2_score undefined for constant targets")
    ss_res = float(np.sum((y - f) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    lr: float = 0.01
    lr_decay_gamma: float = 0.99
    beta1: float = 0.9
    beta2: float = 0.9
    eps: float = 1e-8
    smooth_l1_beta: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0 < self.lr_decay_gamma <= 1:
            raise ValueError(f"lr_decay_gamma must be in (0, 1], got {self.lr_decay_gamma}")


def lr_at(config: TrainConfig, epoch: int) -> float:
    # Epoch 0 runs at the base rate.
    return config.lr * config.lr_decay_gamma**epoch


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zero(cls, n_params: int) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params))


def adam_step(state: AdamState, params, grad, lr: float, config: TrainConfig):
    """One bias-corrected Adam update. Returns the new parameter vector."""
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient passed to adam_step")
    state.t += 1
    state.m = config.beta1 * state.m + (1 - config.beta1) * grad
    state.v = config.beta2 * state.v + (1 - config.beta2) * grad * grad
    m_hat = state.m / (1 - config.beta1**state.t)
    v_hat = state.v / (1 - config.beta2**state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + config.eps)


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def batch_loss_and_grad(model: AggregatorModel, molecules, beta: float, threads: int = 1):
    """Mean smooth L1 over the batch and its gradient in model parameters."""

    def one(mol: PreparedMolecule):
        pred, dpred, _ = forward_molecule_with_grad(model, mol)
        loss = smooth_l1(pred, mol.target, beta)
        return loss, dsmooth_l1(pred, mol.target, beta) * dpred

    results = _map(one, molecules, threads)
    # Fixed summation order keeps the result identical across thread counts.
    loss = sum(r[0] for r in results) / len(results)
    grad = np.zeros(model.total_params)
    for _, g in results:
        grad += g
    grad /= len(results)
    return loss, grad


def evaluate(model: AggregatorModel, molecules, beta: float, threads: int = 1):
    """Loss and R^2 of the model on a molecule set, plus raw predictions.

    R^2 is nan when undefined (single molecule or constant targets) so
    that tiny sanity-check runs still work; the loss is always real.
    """
    preds = np.array(_map(lambda m: forward_molecule(model, m)[0], molecules, threads))
    targets = np.array([m.target for m in molecules])
    loss = float(np.mean([smooth_l1(p, t, beta) for p, t in zip(preds, targets)]))
    try:
        r2 = r2_score(targets, preds)
    except ValueError:
        r2 = float("nan")
    return loss, r2, preds, targets


@dataclass
class TrainResult:
    history: list = field(default_factory=list)
    best_epoch: int = -1
    best_test_loss: float = np.inf
    best_train_loss: float = np.inf
    best_params: np.ndarray | None = None
    best_row: dict | None = None
    final_params: np.ndarray | None = None


def train_loop(
    model: AggregatorModel,
    train_mols,
    test_mols,
    config: TrainConfig,
    threads: int = 1,
    callback=None,
) -> TrainResult:
    """Full-batch Adam over the train split, checkpointing on test loss.

    Every epoch: compute the mean gradient over all training molecules,
    apply one Adam update at the decayed learning rate, then evaluate
    both splits with the updated parameters. The parameters achieving
    the lowest test loss are kept alongside the final ones.
    """
    if not train_mols or not test_mols:
        raise ValueError("both splits must be non-empty")
    state = AdamState.zero(model.total_params)
    result = TrainResult()
    beta = config.smooth_l1_beta
    for epoch in range(config.epochs):
        _, grad = batch_loss_and_grad(model, train_mols, beta, threads)
        lr = lr_at(config, epoch)
        model.set_params(adam_step(state, model.get_params(), grad, lr, config))

        train_loss, train_r2, _, _ = evaluate(model, train_mols, beta, threads)
        test_loss, test_r2, _, _ = evaluate(model, test_mols, beta, threads)
        if not (np.isfinite(train_loss) and np.isfinite(test_loss)):
            raise FloatingPointError(f"non-finite loss at epoch {epoch}")
        row = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": train_loss,
            "train_r2": train_r2,
            "test_loss": test_loss,
            "test_r2": test_r2,
        }
        result.history.append(row)
        result.best_train_loss = min(result.best_train_loss, train_loss)
        if test_loss < result.best_test_loss:
            result.best_test_loss = test_loss
            result.best_epoch = epoch
            result.best_params = model.get_params()
            result.best_row = dict(row)
        if callback is not None:
            callback(row)
    result.final_params = model.get_params()
    return result
