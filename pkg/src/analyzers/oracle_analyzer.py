'''
Oracle suites behind the `gradcheck` subcommand. Each suite checks one
closed-form claim against brute force (mask enumeration, sampling,
finite differences) and reports the worst deviation against its tolerance.
'''
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence
from analyzers.model_count_analyzer import (
    CountQuery, MAXPOOL_DROPOUT, STOCHASTIC, base_b, log_count_ratio
)
from core.dropout import DropoutPlacement
from core.errors import ArchitectureError
from core.helpers import setup_logger, init_worker
from core.random_stream import RandomStream, ORACLE_DOMAIN
from network.arch_spec import parse_arch
from network.gradient_check import check_network_gradients
from network.network import build_network
from network.train_config import TrainConfig
from pooling.pool_layers import prob_weighted_pool, stochastic_pool_forward, stochastic_pool_test
from pooling.pool_spec import PoolSpec
from pooling.region_distribution import (
    region_distribution_maxdrop, region_distribution_stochastic,
    enumerate_mask_distribution, enumerated_expectation
)
import numpy as np
import logging
import math
import time
import os

WORKED_REGION = (1.0, 6.0, 5.0, 3.0)

MNIST_ARCH = '1x28x28-6C5-2P2-12C5-2P2-1000N-10N'
CIFAR_ARCH = '3x32x32-96C5-3P2-128C3-3P2-256C3-3P2-2000N-2000N-10N'

MALFORMED_ARCHS = (
    '',
    '1x28',
    '1x28x',
    '1x28x28',
    'x28x28-10N',
    '1y28x28-10N',
    '1x28x28-',
    '1x28x28-6C',
    '1x28x28-6Q5-10N',
    '1x28x28-0C5-10N',
    '1x28x28-6C0-10N',
    '1x28x28-6C29-10N',
    '1x28x28-6C5-2P3-10N',
    '1x28x28-2P2-10N',
    '1x28x28-6C5-2P2',
    '1x28x28-6C5-2P2-10N-',
    '1x28x28-6C5-2P2-10N ',
    '1x28x28-10N-6C5-10N',
    '0x28x28-6C5-10N',
    '1x28x28-6C5-30P2-10N'
)

@dataclass(frozen=True)
class OracleResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    detail: str
    seconds: float = 0.0

def _stream(suite: int, seed: int) -> RandomStream:
    return RandomStream(seed).spawn(ORACLE_DOMAIN, suite)

def multinomial_suite(seed: int = 0, regions: int = 1000) -> OracleResult:
    '''
    Max-pooling dropout: the closed-form multinomial over sorted units
    against the pooled-value distribution of all 2**n masks.
    '''
    generator = _stream(0, seed).generator()
    sizes = (2, 4, 9, 12)
    retain_ps = (0.1, 0.3, 0.5, 0.7, 0.9)
    worst = 0.0
    for index in range(regions):
        n = sizes[index % len(sizes)]
        p = retain_ps[(index // len(sizes)) % len(retain_ps)]
        acts = generator.uniform(0.0, 10.0, size=n)
        closed_form = region_distribution_maxdrop(acts, p).value_distribution()
        enumerated = enumerate_mask_distribution(acts, p)
        if closed_form.keys() != enumerated.keys():
            return OracleResult('multinomial', False, math.inf, 1e-12, f'outcome sets differ for region {acts.tolist()} at p={p}')
        worst = max(worst, max(abs(closed_form[value] - enumerated[value]) for value in closed_form))
    return OracleResult('multinomial', worst <= 1e-12, worst, 1e-12, f'{regions} regions, n in {sizes}, p in {retain_ps}')

def expectation_suite(seed: int = 0, regions: int = 1000) -> OracleResult:
    '''
    Probabilistic weighted pooling against the exact mean over all masks,
    including the worked region (1, 6, 5, 3) at p = 0.5 -> 4.6875.
    '''
    generator = _stream(1, seed).generator()
    worked = prob_weighted_pool(np.array(WORKED_REGION).reshape(1, 2, 2), PoolSpec(2, 2, 'max_dropout', 'prob_weighted', 0.5))
    worst = abs(float(worked[0, 0, 0]) - 4.6875)
    retain_ps = (0.1, 0.3, 0.5, 0.7, 0.9)
    for index in range(regions):
        window = 2 if index % 2 == 0 else 3
        p = retain_ps[(index // 2) % len(retain_ps)]
        acts = generator.uniform(0.0, 10.0, size=(1, window, window))
        pooled = prob_weighted_pool(acts, PoolSpec(window, window, 'max_dropout', 'prob_weighted', p))
        worst = max(worst, abs(float(pooled[0, 0, 0]) - enumerated_expectation(acts, p)))
    return OracleResult('expectation', worst <= 1e-12, worst, 1e-12, f'worked region -> {float(worked[0, 0, 0])}; {regions} random regions')

def stochastic_suite(seed: int = 0, draws: int = 100_000) -> OracleResult:
    '''
    Stochastic pooling: test output sum(a^2)/sum(a) = 71/15 on (1, 6, 5, 3),
    and train-time selection frequencies within 3 sigma of a_i / sum(a).
    '''
    region = np.array(WORKED_REGION).reshape(1, 2, 2)
    spec = PoolSpec(2, 2, 'stochastic', 'stochastic_weighted')
    test_value = float(stochastic_pool_test(region, spec)[0, 0, 0])
    test_error = abs(test_value - 71.0 / 15.0)

    batch = np.broadcast_to(region, (draws, 1, 2, 2)).copy()
    _, selected = stochastic_pool_forward(batch, spec, _stream(2, seed))
    counts = np.bincount(selected.ravel(), minlength=4)
    expected = region_distribution_stochastic(WORKED_REGION).selection_probs
    sigma = np.sqrt(expected * (1.0 - expected) / draws)
    z_scores = np.abs(counts / draws - expected) / sigma
    passed = test_error <= 1e-12 and bool(np.all(z_scores <= 3.0))
    return OracleResult(
        'stochastic', passed, test_error, 1e-12,
        f'test output {test_value!r} (71/15 = {71.0 / 15.0!r}); max |z| over {draws} draws = {z_scores.max():.2f}'
    )

def counting_suite(seed: int = 0) -> OracleResult:
    '''
    Bases at t = 4, the r=96, s=1024, t=4 ratio and the base bounds for t = 1..64.
    '''
    errors = [
        abs(base_b(4, MAXPOOL_DROPOUT) - 5.0 ** 0.25),
        abs(base_b(4, STOCHASTIC) - 4.0 ** 0.25)
    ]
    ratio = log_count_ratio(CountQuery(96, 1024, 4, MAXPOOL_DROPOUT), CountQuery(96, 1024, 4, STOCHASTIC))
    expected = 24576 * math.log(5.0 / 4.0)
    relative = abs(ratio - expected) / expected
    bounds_hold = all(
        1.0 < base_b(t, MAXPOOL_DROPOUT) <= 2.0 and 1.0 <= base_b(t, STOCHASTIC) <= 3.0 ** (1.0 / 3.0)
        for t in range(1, 65)
    )
    worst = max(errors)
    passed = worst <= 1e-12 and relative <= 1e-9 and bounds_hold
    return OracleResult(
        'counting', passed, worst, 1e-12,
        f'log10 ratio = {ratio / math.log(10.0):.1f} (relative error {relative:.2e}); bounds hold: {bounds_hold}'
    )

GRADIENT_CASES = (
    ('max', '1x8x8-3C3-2P2-5N-3N', 'max', False, DropoutPlacement()),
    ('max_dropout mask', '1x9x9-3C3-3P2-5N-3N', 'max_dropout', False, DropoutPlacement(pool_input=0.5)),
    ('max_dropout multinomial', '1x8x8-3C3-2P2-5N-3N', 'max_dropout', True, DropoutPlacement(pool_input=0.5)),
    ('stochastic', '1x9x9-3C3-3P2-5N-3N', 'stochastic', False, DropoutPlacement()),
    ('conv+fc dropout', '1x10x10-2C3-2P2-3C2-2P1-6N-3N', 'max', False, DropoutPlacement(conv_input=0.5, fc_input=0.5, first_fc_input=0.8))
)

def gradients_suite(seed: int = 0) -> OracleResult:
    '''
    Full-network finite differences with frozen masks and selections,
    one small network per pooling train mode.
    '''
    worst = 0.0
    details = []
    for case_index, (label, arch, train_mode, multinomial, placement) in enumerate(GRADIENT_CASES):
        cfg = TrainConfig(epochs=1, seed=seed, dropout=placement, pool_train_mode=train_mode, multinomial_path=multinomial)
        spec = parse_arch(arch)
        network = build_network(spec, cfg)
        generator = _stream(3 + case_index, seed).generator()
        images = generator.uniform(0.0, 1.0, size=(4,) + spec.input_shape)
        labels = generator.integers(0, spec.class_count, size=4)
        report = check_network_gradients(network, images, labels, _stream(10 + case_index, seed), np.arange(4))
        worst = max(worst, report.max_error)
        details.append(f'{label}: {report.max_error:.2e} ({network.parameter_count} params)')
    return OracleResult('gradients', worst < 1e-5, worst, 1e-5, '; '.join(details))

def parser_suite(seed: int = 0) -> OracleResult:
    '''
    Both reference architectures propagate to their shape chains and every
    malformed string fails with a positioned error.
    '''
    problems = []
    mnist = parse_arch(MNIST_ARCH).shapes()
    if mnist != [(1, 28, 28), (6, 24, 24), (6, 12, 12), (12, 8, 8), (12, 4, 4), (1000,), (10,)]:
        problems.append(f'MNIST chain {mnist}')
    cifar = parse_arch(CIFAR_ARCH).shapes()
    if [shape[1] for shape in cifar[1:7]] != [28, 13, 11, 5, 3, 1]:
        problems.append(f'CIFAR chain {cifar}')
    for text in MALFORMED_ARCHS:
        try:
            parse_arch(text)
            problems.append(f'{text!r} parsed')
        except ArchitectureError as e:
            if not isinstance(e.position, int) or e.position < 0:
                problems.append(f'{text!r} has no position')
    return OracleResult('parser', not problems, float(len(problems)), 0.0, '; '.join(problems) or f'{len(MALFORMED_ARCHS)} malformed strings rejected')

def _timed(suite: Callable[..., OracleResult], seed: int) -> OracleResult:
    start_time = time.time()
    result = suite(seed)
    return OracleResult(result.name, result.passed, result.max_error, result.tolerance, result.detail, time.time() - start_time)

class OracleAnalyzer:
    '''
    Registry of oracle suites, run sequentially or in a process pool.
    '''

    def __init__(self, seed: int = 0, parallel: bool = False, max_workers: int = 0):
        self.logger = setup_logger('OracleAnalyzer')
        self.seed = seed
        self.parallel_execution = parallel
        self.max_workers = max_workers or os.cpu_count() or 1
        self.suite_registry = self._register_suites()

    def _register_suites(self) -> Dict[str, Callable[..., OracleResult]]:
        return {
            'multinomial': multinomial_suite,
            'expectation': expectation_suite,
            'stochastic': stochastic_suite,
            'counting': counting_suite,
            'gradients': gradients_suite,
            'parser': parser_suite
        }

    def _get_suites_to_run(self, names: Optional[Sequence[str]]) -> List[str]:
        if not names:
            return list(self.suite_registry)
        unknown = [name for name in names if name not in self.suite_registry]
        if unknown:
            raise ValueError(f'Unknown oracle suite(s): {", ".join(unknown)}. Available: {", ".join(self.suite_registry)}')
        return list(names)

    def run_suites(self, names: Optional[Sequence[str]] = None) -> List[OracleResult]:
        suites = self._get_suites_to_run(names)
        if self.parallel_execution and len(suites) > 1:
            max_workers = min(len(suites), self.max_workers)
            self.logger.info(f'Running {len(suites)} oracle suites in parallel with {max_workers} workers')
            level = logging.getLogger('OracleAnalyzer').level
            with ProcessPoolExecutor(max_workers=max_workers, initializer=init_worker, initargs=(level,)) as executor:
                futures = [executor.submit(_timed, self.suite_registry[name], self.seed) for name in suites]
                results = [future.result() for future in futures]
        else:
            results = [_timed(self.suite_registry[name], self.seed) for name in suites]
        for result in results:
            log = self.logger.info if result.passed else self.logger.error
            log(f'{result.name}: {"PASS" if result.passed else "FAIL"} (max error {result.max_error:.3e}, tolerance {result.tolerance:g}, {result.seconds:.2f}s) {result.detail}')
        return results
