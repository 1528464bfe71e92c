"""End-to-end streaming training loop.

Each incoming image is preprocessed, optionally cut into small regions that
are trained on as if they were independent signals, and fed one sample at a
time through: sparse coding -> FFT -> forgetting-weighted accumulation ->
dictionary update.  The held-out quality metric is the summed sparse coding
objective over a test set under the current dictionary.

Log records carry a *virtual* elapsed-seconds column: a deterministic cost
model of the work performed (nominal 1 Gflop/s), not wall-clock time, so that
two runs with the same seed produce byte-identical logs.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .cbpdn import CbpdnConfig, cbpdn_solve
from .errors import InvalidInputError, OcdlError
from .learner import (
    Accumulator,
    Dictionary,
    FistaConfig,
    accumulate,
    fista_d_update,
    forgetting_factor,
)
from .transforms import fft2

__all__ = [
    "RegionSampling",
    "TrainConfig",
    "TrainLogRecord",
    "TrainState",
    "evaluate_dictionary",
    "online_train",
    "preprocess",
    "sample_regions",
    "train_step",
]


@dataclass(frozen=True)
class RegionSampling:
    """Region-sampling mode: train on small windows cut from each image.

    ``grid`` tiles the image with non-overlapping windows in row-major order,
    discarding partial edge tiles; ``random`` draws ``count`` windows at
    uniform top-left offsets.
    """

    height: int
    width: int
    strategy: str = "grid"
    count: int = 1

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise InvalidInputError("region size must be positive")
        if self.strategy not in ("grid", "random"):
            raise InvalidInputError(f"unknown region strategy {self.strategy!r}")
        if self.strategy == "random" and self.count < 1:
            raise InvalidInputError("random sampling needs count >= 1")


@dataclass(frozen=True)
class TrainConfig:
    """Everything needed to reproduce a training run (see also the manifest)."""

    steps: int
    filters: int
    filter_shape: tuple
    lmbda: float = 0.1
    p: float = 5.0
    cbpdn: CbpdnConfig = None
    fista: FistaConfig = FistaConfig()
    regions: RegionSampling = None
    eval_every: int = 5
    seed: int = 0
    preprocess: str = "mean"

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidInputError("steps must be at least 1")
        if self.filters < 1:
            raise InvalidInputError("need at least one filter")
        if len(self.filter_shape) != 2 or min(self.filter_shape) < 1:
            raise InvalidInputError(f"bad filter shape {self.filter_shape}")
        if not self.lmbda > 0:
            raise InvalidInputError("lmbda must be positive")
        if self.p < 0:
            raise InvalidInputError("forgetting exponent must be nonnegative")
        if self.eval_every < 1:
            raise InvalidInputError("eval_every must be at least 1")
        if self.preprocess not in ("mean", "none"):
            raise InvalidInputError(f"unknown preprocess mode {self.preprocess!r}")
        if self.regions is not None and (
            self.regions.height < self.filter_shape[0]
            or self.regions.width < self.filter_shape[1]
        ):
            raise InvalidInputError("region size must be at least the filter size")

    def effective_cbpdn(self):
        """Solver config with the run's lambda as the single source of truth."""
        if self.cbpdn is None:
            return CbpdnConfig(lmbda=self.lmbda)
        return replace(self.cbpdn, lmbda=self.lmbda)


@dataclass
class TrainLogRecord:
    t: int
    elapsed_seconds: float
    alpha: float
    cbpdn_iters: int
    fista_iters: int
    test_functional: float = None


@dataclass
class TrainState:
    dictionary: Dictionary
    accumulator: Accumulator
    t: int
    rng: np.random.Generator
    elapsed: float = 0.0

    @classmethod
    def initialize(cls, cfg, dims):
        """Fresh state for working grid ``dims``; all randomness stems from cfg.seed."""
        n1, n2 = dims
        l1, l2 = cfg.filter_shape
        if l1 > n1 or l2 > n2:
            raise InvalidInputError(
                f"filters {l1}x{l2} do not fit inside working grid {n1}x{n2}"
            )
        dict_seed, sample_seed = np.random.SeedSequence(cfg.seed).spawn(2)
        dictionary = Dictionary.random(
            cfg.filters, cfg.filter_shape, np.random.default_rng(dict_seed)
        )
        return cls(
            dictionary=dictionary,
            accumulator=Accumulator.zeros(cfg.filters, n1, n2),
            t=0,
            rng=np.random.default_rng(sample_seed),
        )


def preprocess(image, mode):
    """Per-image preprocessing; intensity scaling to [0, 1] already happened at load."""
    image = np.asarray(image, dtype=np.float64)
    if mode == "none":
        return image
    if mode == "mean":
        return image - image.mean()
    raise InvalidInputError(f"unknown preprocess mode {mode!r}")


def sample_regions(image, size, strategy="grid", rng=None, count=1):
    """Cut region signals out of one image.

    Grid mode tiles row-major with non-overlapping windows and drops partial
    edge tiles; random mode draws ``count`` windows at uniform offsets from
    ``rng``.  Regions are copies, never views.
    """
    image = np.asarray(image)
    r1, r2 = int(size[0]), int(size[1])
    n1, n2 = image.shape
    if r1 > n1 or r2 > n2:
        raise InvalidInputError(f"region {r1}x{r2} larger than image {n1}x{n2}")
    out = []
    if strategy == "grid":
        for row in range(n1 // r1):
            for col in range(n2 // r2):
                out.append(image[row * r1:(row + 1) * r1, col * r2:(col + 1) * r2].copy())
    elif strategy == "random":
        if rng is None:
            raise InvalidInputError("random region sampling requires an rng")
        tops = rng.integers(0, n1 - r1, size=count, endpoint=True)
        lefts = rng.integers(0, n2 - r2, size=count, endpoint=True)
        for top, left in zip(tops, lefts):
            out.append(image[top:top + r1, left:left + r2].copy())
    else:
        raise InvalidInputError(f"unknown region strategy {strategy!r}")
    return out


def _virtual_seconds(cbpdn_iters, fista_iters, m, n1, n2):
    # Deterministic cost model (nominal 1 Gflop/s); keeps logs reproducible
    # where wall-clock time could not be.
    f = n1 * (n2 // 2 + 1)
    flops = cbpdn_iters * 24.0 * m * f + fista_iters * (4.0 * m + 20.0) * m * f
    return 1e-9 * flops


def train_step(state, sample, cfg):
    """One pass of the learning loop body on a single sample.

    Sparse-codes the sample with the current dictionary, folds the result
    into the accumulator under the forgetting factor for step ``t+1``, and
    refits the dictionary.  Mutates ``state`` and returns it with the step's
    log record.
    """
    sample = np.asarray(sample, dtype=np.float64)
    acc = state.accumulator
    if sample.shape != (acc.n1, acc.n2):
        raise InvalidInputError(
            f"sample shape {sample.shape} does not match the run's working grid "
            f"({acc.n1}, {acc.n2}); dimensions are fixed at run start"
        )
    t_next = state.t + 1
    try:
        maps, solve_stats = cbpdn_solve(sample, state.dictionary, cfg.effective_cbpdn())
        x_hat = fft2(maps)
        s_hat = fft2(sample)
        alpha = forgetting_factor(t_next, cfg.p)
        accumulate(acc, x_hat, s_hat, alpha)
        state.dictionary, fista_stats = fista_d_update(
            acc, state.dictionary, (acc.n1, acc.n2), cfg.fista
        )
    except OcdlError as err:
        raise type(err)(f"training step {t_next}: {err}") from err
    state.t = t_next
    state.elapsed += _virtual_seconds(
        solve_stats.iterations, fista_stats.iterations, acc.m, acc.n1, acc.n2
    )
    record = TrainLogRecord(
        t=t_next,
        elapsed_seconds=state.elapsed,
        alpha=alpha,
        cbpdn_iters=solve_stats.iterations,
        fista_iters=fista_stats.iterations,
    )
    return state, record


def evaluate_dictionary(dictionary, test_set, lmbda, cbpdn_cfg=None):
    """Summed sparse coding objective over a test set (the quality metric).

    Each test image is coded against ``dictionary`` and the objectives are
    added in list order.  An empty test set is worth 0 and warns.
    """
    test_set = list(test_set)
    if not test_set:
        warnings.warn("evaluating on an empty test set", RuntimeWarning, stacklevel=2)
        return 0.0
    cfg = CbpdnConfig(lmbda=lmbda) if cbpdn_cfg is None else replace(cbpdn_cfg, lmbda=lmbda)
    total = 0.0
    for signal in test_set:
        _, stats = cbpdn_solve(signal, dictionary, cfg)
        total += stats.objective
    return total


def online_train(stream, cfg, test_set=None):
    """Run the full streaming loop over an ordered source of images.

    Images are preprocessed and (in region mode) cut into windows that join
    the training sequence in row-major tile order.  The working grid is fixed
    by the first sample.  Training stops after ``cfg.steps`` samples or when
    the stream is exhausted, whichever comes first.  Every ``cfg.eval_every``
    steps the test functional is evaluated on a snapshot (skipped when
    ``test_set`` is None).

    Returns the final dictionary and the per-step log records.  Deterministic
    given the seed and the stream order.
    """
    state = None
    records = []
    eval_cfg = cfg.effective_cbpdn()
    for image in stream:
        image = preprocess(image, cfg.preprocess)
        if cfg.regions is None:
            samples = [image]
        else:
            # State (and its rng) must exist before random offsets are drawn.
            if state is None and cfg.regions.strategy == "random":
                state = TrainState.initialize(cfg, (cfg.regions.height, cfg.regions.width))
            samples = sample_regions(
                image,
                (cfg.regions.height, cfg.regions.width),
                strategy=cfg.regions.strategy,
                rng=state.rng if state is not None else None,
                count=cfg.regions.count,
            )
        for sample in samples:
            if state is None:
                state = TrainState.initialize(cfg, sample.shape)
            state, record = train_step(state, sample, cfg)
            if test_set is not None and state.t % cfg.eval_every == 0:
                record.test_functional = evaluate_dictionary(
                    state.dictionary, test_set, cfg.lmbda, eval_cfg
                )
            records.append(record)
            if state.t >= cfg.steps:
                return state.dictionary, records
    if state is None:
        raise InvalidInputError("training stream yielded no images")
    return state.dictionary, records
