# observer.py
# -----------------------------------------------------------------------------
# Multi-slice channelized Hotelling observer, the "train a 2D observer on
# central slices, apply it across the lesion-affected slices, then combine"
# variant:
#
#   stage 1   channel responses v = U' x of each slice through a bank of
#             Laguerre-Gauss channels; Hotelling template t solving
#             (S + ridge I) t = (mean_lesion - mean_healthy) with S the
#             average intra-class channel covariance
#   stage 2   per-slice scores over the slice range are merged to one score
#             per stack by a second 1D Hotelling rule over the score vector
#             (default), or by max or mean
#
# Training is deterministic given its inputs; trained models are immutable
# and safe to share across threads for scoring.
# -----------------------------------------------------------------------------

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import eval_laguerre

from .errors import TrainingError

__all__ = [
    "COMBINERS",
    "RIDGE_LADDER",
    "COND_LIMIT",
    "ChannelBank",
    "ChoModel",
    "MsChoModel",
    "lg_channel_bank",
    "channelize",
    "channelize_slices",
    "hotelling_template",
    "train_cho",
    "score_slice",
    "train_mscho_b",
    "train_mscho_from_responses",
    "score_responses",
    "score_stack",
]

COMBINERS = ("hotelling", "max", "mean")

# regularization ladder: fractions of trace(cov)/n tried in order until the
# conditioning limit is met
RIDGE_LADDER = (1e-12, 1e-9, 1e-6)
COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class ChannelBank:
    """Laguerre-Gauss channel templates on a pixel grid.

    matrix has one flattened W x H channel per column; channel j is
    exp(-pi r^2 / a^2) * L_j(2 pi r^2 / a^2) at radius r pixels from the
    image center, with a = spread and L_j the j-th Laguerre polynomial.
    """

    width: int
    height: int
    n_channels: int
    spread: float
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class ChoModel:
    """Trained 2D channelized Hotelling observer.

    template solves (cov + ridge I) template = mean_diff, where cov is the
    average of the two intra-class channel covariances and mean_diff the
    lesion-minus-healthy mean channel response.
    """

    bank: ChannelBank
    template: np.ndarray
    mean_diff: np.ndarray
    cov: np.ndarray
    ridge: float


@dataclass(frozen=True, eq=False)
class MsChoModel:
    """Multi-slice observer: a stage-1 2D model, the slice range it reads,
    and the stage-2 combiner (weights present for the hotelling rule)."""

    stage1: ChoModel
    slice_range: tuple
    combiner: str
    stage2_weights: np.ndarray | None
    stage2_ridge: float | None


def lg_channel_bank(width: int, height: int, n_channels: int = 15,
                    spread: float = 10.0) -> ChannelBank:
    """Build the channel bank on a width x height pixel grid.

    Channels are centered at the image center pixel (width//2, height//2)
    and are deterministic for identical parameters.
    """
    if n_channels < 1:
        raise ValueError("need at least one channel")
    if not spread > 0:
        raise ValueError("spread must be positive")
    rows = np.arange(width, dtype=np.float64) - width // 2
    cols = np.arange(height, dtype=np.float64) - height // 2
    r2 = rows[:, None] ** 2 + cols[None, :] ** 2
    x = 2.0 * np.pi * r2 / (spread * spread)
    envelope = np.exp(-0.5 * x)
    matrix = np.empty((width * height, n_channels), dtype=np.float64)
    for j in range(n_channels):
        matrix[:, j] = (envelope * eval_laguerre(j, x)).ravel()
    return ChannelBank(width=width, height=height, n_channels=n_channels,
                       spread=spread, matrix=matrix)


def channelize(image, bank: ChannelBank) -> np.ndarray:
    """Channel response vector of one W x H image: matrix' * flatten(image)."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.shape != (bank.width, bank.height):
        raise ValueError(
            f"image shape {arr.shape} does not match bank "
            f"({bank.width}, {bank.height})")
    return bank.matrix.T @ arr.ravel()


def channelize_slices(stack_data, bank: ChannelBank, slice_indices) -> np.ndarray:
    """Channel responses of selected slices of a W x H x K stack.

    Returns an (n_slices, n_channels) array; row i is the response of the
    slice at slice_indices[i].  Same arithmetic as channelize per slice.
    """
    arr = np.asarray(stack_data, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[:2] != (bank.width, bank.height):
        raise ValueError(
            f"stack shape {arr.shape} does not match bank "
            f"({bank.width}, {bank.height})")
    idx = np.asarray(slice_indices, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= arr.shape[2]):
        raise ValueError("slice index out of range")
    planes = arr[:, :, idx].reshape(bank.width * bank.height, idx.size)
    return planes.T @ bank.matrix


def _condition_number(sym: np.ndarray) -> float:
    eigs = np.linalg.eigvalsh(sym)
    lo, hi = float(eigs[0]), float(eigs[-1])
    if hi <= 0.0:
        return np.inf
    if lo <= 0.0:
        return np.inf
    return hi / lo


def hotelling_template(healthy_responses, lesion_responses,
                       ridge_ladder=RIDGE_LADDER):
    """Hotelling discriminant from per-class response matrices.

    Inputs are (N, d) arrays, one sample per row.  Returns
    (template, mean_diff, cov, ridge) with cov the average of the two
    sample covariances (N-1 divisor).  ridge is 0 when cov is well
    conditioned, otherwise the smallest rung of the ladder (as a fraction
    of trace(cov)/d) that brings the condition number within bounds.
    """
    resp_h = np.asarray(healthy_responses, dtype=np.float64)
    resp_l = np.asarray(lesion_responses, dtype=np.float64)
    if resp_h.ndim != 2 or resp_l.ndim != 2 or resp_h.shape[1] != resp_l.shape[1]:
        raise ValueError("expected (N, d) response matrices with matching d")
    d = resp_h.shape[1]
    if resp_h.shape[0] < d + 1 or resp_l.shape[0] < d + 1:
        raise TrainingError(
            f"need at least {d + 1} samples per class to estimate a "
            f"{d}-dimensional covariance; got {resp_h.shape[0]} healthy, "
            f"{resp_l.shape[0]} lesion")
    mean_diff = resp_l.mean(axis=0) - resp_h.mean(axis=0)
    cov_h = np.cov(resp_h, rowvar=False)
    cov_l = np.cov(resp_l, rowvar=False)
    cov = 0.5 * (np.atleast_2d(cov_h) + np.atleast_2d(cov_l))
    trace = float(np.trace(cov))
    if trace <= 0.0:
        raise TrainingError("zero covariance: all samples identical per class")
    ridge = 0.0
    if _condition_number(cov) > COND_LIMIT:
        for fraction in ridge_ladder:
            candidate = fraction * trace / d
            if _condition_number(cov + candidate * np.eye(d)) <= COND_LIMIT:
                ridge = candidate
                break
        else:
            raise TrainingError(
                "covariance could not be conditioned by the ridge ladder")
    template = np.linalg.solve(cov + ridge * np.eye(d), mean_diff)
    return template, mean_diff, cov, ridge


def train_cho(healthy_slices, lesion_slices, bank: ChannelBank,
              ridge_ladder=RIDGE_LADDER) -> ChoModel:
    """Train the 2D stage on labeled slices (lists of W x H images)."""
    resp_h = np.array([channelize(s, bank) for s in healthy_slices])
    resp_l = np.array([channelize(s, bank) for s in lesion_slices])
    if resp_h.ndim != 2 or resp_l.ndim != 2:
        raise TrainingError("empty training class")
    template, mean_diff, cov, ridge = hotelling_template(
        resp_h, resp_l, ridge_ladder)
    return ChoModel(bank=bank, template=template, mean_diff=mean_diff,
                    cov=cov, ridge=ridge)


def score_slice(image, model: ChoModel) -> float:
    """Stage-1 score of one slice: template' * channelize(slice)."""
    return float(model.template @ channelize(image, model.bank))


def _stack_data(stack):
    return stack.data if hasattr(stack, "data") else np.asarray(stack)


def train_mscho_from_responses(resp_h, resp_l, central_pos: int,
                               slice_range, combiner: str = "hotelling",
                               bank: ChannelBank | None = None,
                               ridge_ladder=RIDGE_LADDER) -> MsChoModel:
    """Train from precomputed channel responses.

    resp_h and resp_l are (N, m, n_channels) arrays over the m slices of
    slice_range; central_pos is the position of the stack's central slice
    within that range.  Stage 1 is trained on the central-slice responses
    only; the hotelling combiner is then trained on the per-slice score
    vectors of the same stacks.
    """
    if combiner not in COMBINERS:
        raise ValueError(f"combiner must be one of {COMBINERS}")
    resp_h = np.asarray(resp_h, dtype=np.float64)
    resp_l = np.asarray(resp_l, dtype=np.float64)
    if resp_h.ndim != 3 or resp_l.ndim != 3:
        raise ValueError("expected (N, m, n_channels) response arrays")
    m = resp_h.shape[1]
    if not 0 <= central_pos < m:
        raise ValueError("central_pos outside the slice range")
    template, mean_diff, cov, ridge = hotelling_template(
        resp_h[:, central_pos, :], resp_l[:, central_pos, :], ridge_ladder)
    stage1 = ChoModel(bank=bank, template=template, mean_diff=mean_diff,
                      cov=cov, ridge=ridge)

    stage2_weights = None
    stage2_ridge = None
    if combiner == "hotelling":
        if m == 1:
            stage2_weights = np.array([1.0])
            stage2_ridge = 0.0
        else:
            scores_h = resp_h @ template
            scores_l = resp_l @ template
            stage2_weights, _, _, stage2_ridge = hotelling_template(
                scores_h, scores_l, ridge_ladder)
    return MsChoModel(stage1=stage1, slice_range=tuple(int(s) for s in slice_range),
                      combiner=combiner, stage2_weights=stage2_weights,
                      stage2_ridge=stage2_ridge)


def train_mscho_b(healthy_stacks, lesion_stacks, bank: ChannelBank,
                  slice_range, combiner: str = "hotelling",
                  ridge_ladder=RIDGE_LADDER) -> MsChoModel:
    """Train the multi-slice observer on labeled W x H x K stacks.

    slice_range must contain the central slice K//2 (stage 1 trains on it)
    and stay within the stack depth.
    """
    slice_range = tuple(int(s) for s in slice_range)
    if not slice_range:
        raise ValueError("slice_range is empty")
    stacks_h = [_stack_data(s) for s in healthy_stacks]
    stacks_l = [_stack_data(s) for s in lesion_stacks]
    if not stacks_h or not stacks_l:
        raise TrainingError("empty training class")
    depth = stacks_h[0].shape[2]
    central = depth // 2
    if central not in slice_range:
        raise ValueError(
            f"slice_range {slice_range} must include the central slice {central}")
    if min(slice_range) < 0 or max(slice_range) >= depth:
        raise ValueError("slice_range outside stack depth")
    central_pos = slice_range.index(central)
    resp_h = np.array([channelize_slices(s, bank, slice_range) for s in stacks_h])
    resp_l = np.array([channelize_slices(s, bank, slice_range) for s in stacks_l])
    model = train_mscho_from_responses(resp_h, resp_l, central_pos, slice_range,
                                       combiner, bank=bank,
                                       ridge_ladder=ridge_ladder)
    return model


def score_responses(responses, model: MsChoModel) -> float:
    """Score precomputed (m, n_channels) responses over the slice range."""
    resp = np.asarray(responses, dtype=np.float64)
    if resp.ndim != 2 or resp.shape[0] != len(model.slice_range):
        raise ValueError("responses do not match the model's slice range")
    slice_scores = resp @ model.stage1.template
    if model.combiner == "hotelling":
        return float(model.stage2_weights @ slice_scores)
    if model.combiner == "max":
        return float(slice_scores.max())
    return float(slice_scores.mean())


def score_stack(perceived, model: MsChoModel) -> float:
    """One scalar score for a perceived stack (PerceivedStack or array)."""
    data = _stack_data(perceived)
    if data.ndim != 3:
        raise ValueError("expected a W x H x K stack")
    if max(model.slice_range) >= data.shape[2] or min(model.slice_range) < 0:
        raise ValueError("stack depth does not cover the model's slice range")
    resp = channelize_slices(data, model.stage1.bank, model.slice_range)
    return score_responses(resp, model)
