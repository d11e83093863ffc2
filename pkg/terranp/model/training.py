import logging
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from terranp.autodiff.optim import AdamState, StepLR, adam_step
from terranp.autodiff.tensor import Tape
from terranp.core.configuration import Config
from terranp.core.exceptions import EmptySetError, NonFiniteError, NumericError
from terranp.core.processor import Processors
from terranp.model.sampling import sample_context_target
from terranp.model.scnp import SemanticNP
from terranp.pipeline import FrameInputs, frame_sets

logger = logging.getLogger(__name__)

TRAINING_LOG_HEADER = ["epoch", "step", "elbo", "nll_term", "kl_term", "lr"]


class StepRecord(NamedTuple):
    epoch: int
    step: int
    frame: str
    elbo: float
    nll: float
    kl: float
    lr: float

    def row(self) -> List[str]:
        return [
            str(self.epoch),
            str(self.step),
            f"{self.elbo:.6f}",
            f"{self.nll:.6f}",
            f"{self.kl:.6f}",
            f"{self.lr:.6g}",
        ]


class EpochSummary(NamedTuple):
    epoch: int
    steps: int
    mean_loss: float
    first_loss: float
    last_loss: float
    lr: float


def train(
    model: SemanticNP,
    inputs: Sequence[FrameInputs],
    config: Config,
    processors: Optional[Processors] = None,
) -> List[EpochSummary]:
    """
    Fits ``model`` by minimising the negative ELBO, one frame per Adam step,
    frames shuffled every epoch. The learning rate follows :obj:`StepLR`.

    Frames without ground truth are skipped. All randomness comes from one
    generator seeded with ``train.seed``.

    Raises:
        :obj:`terranp.core.exceptions.NumericError`: the loss or a gradient
          went non-finite; the parameters are rolled back to the last good step
    """
    processors = processors or Processors()
    cfg = config.train
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    state = AdamState(params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    schedule = StepLR(state, cfg.epochs)
    summaries: List[EpochSummary] = []
    step = 0

    processors.train_started(config.dict())
    logger.info(
        "training %r on %d frames for %d epochs", model, len(inputs), cfg.epochs
    )
    for epoch in range(cfg.epochs):
        lr = schedule.set_epoch(epoch)
        losses: List[float] = []
        for i in rng.permutation(len(inputs)):
            frame_inputs = inputs[i]
            try:
                sample = sample_context_target(
                    frame_inputs.context, frame_inputs.gt, config.model, rng, training=True
                )
            except EmptySetError:
                logger.warning("skipping %s: no ground truth", frame_inputs.name)
                continue
            noise = rng.standard_normal(config.model.z_dim)
            good = model.state()
            try:
                with Tape() as tape:
                    context, targets, _ = frame_sets(model, frame_inputs, sample)
                    terms = model.elbo_loss(context, targets, sample.target_heights, noise)
                grads = tape.backward(terms.loss)
                g = [tape.grad(grads, p) for p in params]
                if not all(np.all(np.isfinite(x)) for x in g):
                    raise NonFiniteError("non-finite gradient")
                adam_step(params, g, state)
            except NonFiniteError as e:
                model.load_state(good)
                processors.train_completed(summaries)
                logger.error(
                    "epoch %d step %d (%s): %s, keeping the last good parameters",
                    epoch,
                    step,
                    frame_inputs.name,
                    e,
                )
                raise NumericError(f"training diverged at epoch {epoch}, step {step}: {e}") from e

            loss = terms.loss.item()
            losses.append(loss)
            record = StepRecord(
                epoch, step, frame_inputs.name, -loss, terms.nll.item(), terms.kl.item(), lr
            )
            logger.debug(
                "epoch %d step %d %s: loss %.4f (nll %.4f, kl %.4f), %d context, %d targets",
                epoch,
                step,
                frame_inputs.name,
                loss,
                record.nll,
                record.kl,
                len(sample.context_cells),
                len(sample.target_cells),
            )
            processors.step_completed(record)
            step += 1

        if losses:
            summary = EpochSummary(
                epoch, len(losses), float(np.mean(losses)), losses[0], losses[-1], lr
            )
        else:
            summary = EpochSummary(epoch, 0, float("nan"), float("nan"), float("nan"), lr)
        summaries.append(summary)
        logger.info(
            "epoch %d: %d steps, mean loss %.4f, lr %.3g",
            epoch,
            summary.steps,
            summary.mean_loss,
            lr,
        )
        processors.epoch_completed(summary)

    processors.train_completed(summaries)
    return summaries
