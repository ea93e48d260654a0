"""Distribution comparisons used by every statistical check."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps

from . import tolerances
from .errors import SupportMismatch

KINDS = ("tv", "ks", "chi2")


@dataclass(frozen=True)
class StatReport:
    kind: str
    statistic: float
    sizes: tuple
    threshold: float
    passed: bool
    p_value: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        return d


def total_variation(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise SupportMismatch(f"weight vectors have shapes {p.shape} and {q.shape}")
    return 0.5 * float(np.sum(np.abs(p - q)))


def compare_distributions(a, b, kind: str, threshold: float | None = None) -> StatReport:
    """Compare two distributions.

    ``kind="tv"``: ``a`` and ``b`` are weight vectors; passes when the total
    variation distance is at most ``threshold`` (default ``tv_threshold``).
    ``kind="ks"``: ``a`` and ``b`` are real samples; two-sample KS, passes when
    the p-value is at least ``threshold`` (default ``significance``).
    ``kind="chi2"``: ``a`` is a sample of integer cells, ``b`` weights over the
    cells; Pearson chi-square goodness of fit, pass rule as for KS.
    """
    tol = tolerances.current()
    if kind == "tv":
        threshold = tol.tv_threshold if threshold is None else threshold
        tv = total_variation(a, b)
        return StatReport("tv", tv, (len(a), len(b)), threshold, tv <= threshold)
    if kind == "ks":
        threshold = tol.significance if threshold is None else threshold
        a, b = np.asarray(a, dtype=float).ravel(), np.asarray(b, dtype=float).ravel()
        if a.size == 0 or b.size == 0:
            raise SupportMismatch("KS needs non-empty samples")
        res = sps.ks_2samp(a, b)
        return StatReport("ks", float(res.statistic), (a.size, b.size), threshold, bool(res.pvalue >= threshold), float(res.pvalue))
    if kind == "chi2":
        threshold = tol.significance if threshold is None else threshold
        cells = np.asarray(a)
        w = np.asarray(b, dtype=float)
        if cells.size == 0 or w.size == 0:
            raise SupportMismatch("chi-square needs a sample and weights")
        if cells.min() < 0 or cells.max() >= w.size:
            raise SupportMismatch(f"sample cells outside [0, {w.size})")
        observed = np.bincount(cells.astype(np.int64), minlength=w.size).astype(float)
        live = w > 0
        if observed[~live].any():
            raise SupportMismatch("sample hits cells of zero weight")
        expected = w[live] / w[live].sum() * cells.size
        res = sps.chisquare(observed[live], expected)
        return StatReport("chi2", float(res.statistic), (cells.size, w.size), threshold, bool(res.pvalue >= threshold), float(res.pvalue))
    raise ValueError(f"unknown comparison kind {kind!r}; expected one of {KINDS}")
