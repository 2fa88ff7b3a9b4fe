from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence
from tqdm import tqdm
from core.dataset_parser import LabeledImageSet
from core.errors import ConfigError, DivergenceError, NonFiniteError
from core.helpers import setup_logger
from core.random_stream import RandomStream, SHUFFLE_DOMAIN, TRAINING_DOMAIN
from core.tensor_ops import softmax_cross_entropy
from network.network import Network
from network.train_config import TrainConfig
from utilities.metrics_io import MetricsRecord
import numpy as np
import math
import time

EVAL_BATCH_SIZE = 500

@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    learning_rate: float
    loss: float
    error: float
    batches: int

def sgd_momentum_step(params: List[np.ndarray], velocities: List[np.ndarray], grads: List[np.ndarray], learning_rate: float, momentum: float):
    '''
    v <- momentum * v - learning_rate * grad; w <- w + v, in place.
    '''
    for param, velocity, grad in zip(params, velocities, grads):
        velocity *= momentum
        velocity -= learning_rate * grad
        param += velocity

def epoch_order(stream: RandomStream, epoch_index: int, count: int) -> np.ndarray:
    return stream.spawn(SHUFFLE_DOMAIN, epoch_index).permutation(count)

def train_epoch(network: Network, dataset: LabeledImageSet, cfg: TrainConfig, epoch_index: int, stream: RandomStream, show_progress: bool = False) -> EpochMetrics:
    '''
    One pass of mini-batch SGD with momentum over a shuffled dataset.

    Args:
        network: Network to update in place.
        dataset: Training examples.
        cfg: Batch size, momentum and learning-rate schedule.
        epoch_index: 0-based epoch, selecting the learning rate and the
            shuffle and dropout streams.
        stream: Root stream of the experiment.
        show_progress: Show a tqdm bar over the mini-batches.

    Returns:
        Mean loss per example and the train-mode error rate of the epoch.

    Raises:
        ConfigError: If the dataset is empty.
        DivergenceError: If the loss or any activation stops being finite.
    '''
    count = len(dataset)
    if count == 0:
        raise ConfigError('Cannot train on an empty dataset')
    learning_rate = cfg.learning_rate_at(epoch_index)
    order = epoch_order(stream, epoch_index, count)
    batch_stream = stream.spawn(TRAINING_DOMAIN, epoch_index)
    starts = range(0, count, cfg.batch_size)
    if show_progress:
        starts = tqdm(starts, desc=f'Epoch {epoch_index + 1}', unit='batch', leave=False)

    total_loss = 0.0
    mistakes = 0
    batches = 0
    for batch_number, start in enumerate(starts):
        indices = order[start:start + cfg.batch_size]
        images = dataset.images[indices]
        labels = dataset.labels[indices]
        try:
            logits, cache = network.forward(images, 'train', batch_stream, example_indices=indices)
        except NonFiniteError:
            raise DivergenceError(epoch_index, batch_number, learning_rate, float('nan'))
        loss, grad_logits = softmax_cross_entropy(logits, labels)
        if not math.isfinite(loss):
            raise DivergenceError(epoch_index, batch_number, learning_rate, loss)
        grads = network.backward(cache, grad_logits)
        sgd_momentum_step(network.params, network.velocities, grads, learning_rate, cfg.momentum)
        total_loss += loss * len(indices)
        mistakes += int(np.count_nonzero(np.argmax(logits, axis=1) != labels))
        batches += 1
    return EpochMetrics(epoch_index, learning_rate, total_loss / count, mistakes / count, batches)

def evaluate(network: Network, dataset: LabeledImageSet, test_pooling_mode: Optional[str] = None, batch_size: int = EVAL_BATCH_SIZE) -> float:
    '''
    Deterministic classification error under a test-time pooling mode.

    Args:
        network: Network to evaluate.
        dataset: Examples to classify.
        test_pooling_mode: 'max', 'scaled_max', 'prob_weighted' or
            'stochastic_weighted'; defaults to the configured test mode.
        batch_size: Examples per forward pass; does not affect the result.

    Returns:
        Fraction of examples whose argmax logit differs from the label.
    '''
    count = len(dataset)
    if count == 0:
        raise ConfigError('Cannot evaluate on an empty dataset')
    mistakes = 0
    for start in range(0, count, batch_size):
        logits, _ = network.forward(dataset.images[start:start + batch_size], 'test', pooling=test_pooling_mode)
        mistakes += int(np.count_nonzero(np.argmax(logits, axis=1) != dataset.labels[start:start + batch_size]))
    return mistakes / count

class Trainer:
    '''
    Runs the epochs of one experiment and evaluates the same parameters
    under every requested test-pooling mode after each epoch.
    '''

    def __init__(self, network: Network, cfg: TrainConfig, stream: Optional[RandomStream] = None, show_progress: bool = False):
        self.logger = setup_logger('Trainer')
        self.network = network
        self.cfg = cfg
        self.stream = stream if stream is not None else RandomStream(cfg.seed)
        self.show_progress = show_progress

    def fit(self, train_set: LabeledImageSet, test_set: LabeledImageSet, test_modes: Sequence[str], train_modes: Sequence[str] = (), timing: bool = False, on_epoch: Optional[Callable[[MetricsRecord], None]] = None) -> List[MetricsRecord]:
        '''
        Train for cfg.epochs epochs.

        Args:
            train_set: Training examples.
            test_set: Held-out examples evaluated after every epoch.
            test_modes: Test-pooling modes to evaluate on the test set.
            train_modes: Test-pooling modes to also evaluate on the training set.
            timing: Record the epoch wall time in the metrics (otherwise 0,
                which keeps the CSV byte-identical across runs).
            on_epoch: Called with each record as soon as it is complete.

        Returns:
            One MetricsRecord per epoch.
        '''
        if not test_modes:
            raise ConfigError('At least one test-pooling mode must be evaluated')
        if not self.cfg.lr_drop_epochs:
            self.logger.warning(f'No learning-rate drops for a {self.cfg.epochs}-epoch run')
        self.logger.info(
            f'Training {self.network.spec.text} ({self.network.parameter_count} parameters) on {len(train_set)} examples '
            f'for {self.cfg.epochs} epochs; dropout: {self.cfg.dropout.describe()}, pooling: {self.cfg.pool_train_mode}'
        )
        records = []
        for epoch_index in range(self.cfg.epochs):
            start_time = time.time()
            metrics = train_epoch(self.network, train_set, self.cfg, epoch_index, self.stream, self.show_progress)
            test_errors = {mode: evaluate(self.network, test_set, mode) for mode in test_modes}
            train_errors = {mode: evaluate(self.network, train_set, mode) for mode in train_modes}
            elapsed = time.time() - start_time
            record = MetricsRecord(
                epoch=epoch_index + 1,
                learning_rate=metrics.learning_rate,
                train_loss=metrics.loss,
                train_error=metrics.error,
                test_errors=test_errors,
                train_errors=train_errors,
                wall_seconds=elapsed if timing else 0.0
            )
            summary = ', '.join(f'{mode}={error:.4f}' for mode, error in test_errors.items())
            self.logger.info(
                f'Epoch {epoch_index + 1}/{self.cfg.epochs}: lr={metrics.learning_rate:g} loss={metrics.loss:.4f} '
                f'train_error={metrics.error:.4f} test_error[{summary}] ({elapsed:.1f}s)'
            )
            records.append(record)
            if on_epoch is not None:
                on_epoch(record)
        return records
