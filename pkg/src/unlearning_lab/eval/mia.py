"""
Min-K% Prob membership inference.
One sequence is one attack unit; members come from U and non-members from A.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from ..config import MiaConfig
from ..errors import ModelInputError
from ..lm import ModelParams, batch_token_log_probs

logger = logging.getLogger(__name__)


@dataclass
class MiaResult:
    best_k: float
    best_auc: float
    auc_per_k: Dict[float, float] = field(default_factory=dict)


def min_k_count(k_percent: float, positions: int) -> int:
    """ceil(k% of T), at least one position."""
    return max(1, math.ceil(round(k_percent * positions / 100.0, 9)))


def min_k_from_log_probs(log_probs: Sequence[float], k_percent: float) -> float:
    """Mean of the lowest ceil(k% * T) per-token log-probabilities."""
    values = np.sort(np.asarray(log_probs, dtype=np.float64))
    if values.size == 0:
        raise ModelInputError("Min-K% score needs at least one predicted position")
    if not 0 < k_percent <= 100:
        raise ValueError(f"k must lie in (0, 100], got {k_percent}")
    return float(values[: min_k_count(k_percent, values.size)].mean())


def min_k_score(model: ModelParams, sequence: Sequence[int], k_percent: float) -> float:
    return min_k_from_log_probs(batch_token_log_probs(model, [sequence])[0], k_percent)


def auc(member_scores: Sequence[float], non_member_scores: Sequence[float]) -> float:
    """P(member score > non-member score) with ties counted half (Mann-Whitney midranks)."""
    members = np.asarray(member_scores, dtype=np.float64)
    non_members = np.asarray(non_member_scores, dtype=np.float64)
    if members.size == 0 or non_members.size == 0:
        raise ValueError("AUC needs non-empty member and non-member score lists")
    ranks = rankdata(np.concatenate([members, non_members]), method="average")
    n1, n2 = members.size, non_members.size
    u_stat = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    return float(u_stat / (n1 * n2))


def mia_auc_sweep(
    model: ModelParams, members: Sequence[Sequence[int]], non_members: Sequence[Sequence[int]], cfg: MiaConfig
) -> MiaResult:
    """AUC for every k of the sweep; the best k is the highest AUC, smallest k on ties."""
    if not members or not non_members:
        raise ValueError("member and non-member sets must be non-empty")
    member_lp = batch_token_log_probs(model, members)
    non_member_lp = batch_token_log_probs(model, non_members)
    table: Dict[float, float] = {}
    for k in sorted(cfg.k_percents):
        table[k] = auc(
            [min_k_from_log_probs(lp, k) for lp in member_lp],
            [min_k_from_log_probs(lp, k) for lp in non_member_lp],
        )
    best_k = sorted(table)[0]
    for k in sorted(table):
        if table[k] > table[best_k]:
            best_k = k
    logger.debug(f"[EVAL] MIA sweep {table}; best k={best_k} auc={table[best_k]:.4f}")
    return MiaResult(best_k=best_k, best_auc=table[best_k], auc_per_k=table)


def mia_table(results: Dict[str, MiaResult]) -> pd.DataFrame:
    """Long table with one row per (model label, k)."""
    rows: List[Dict[str, Union[str, float, bool]]] = []
    for label, result in results.items():
        for k, value in result.auc_per_k.items():
            rows.append({"model": label, "k_percent": k, "auc": value, "best": k == result.best_k})
    return pd.DataFrame(rows, columns=["model", "k_percent", "auc", "best"])


def mia_table_csv(results: Dict[str, MiaResult], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mia_table(results).to_csv(path, index=False, float_format="%.10g")
    return path
