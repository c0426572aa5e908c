"""Statistical evaluation of attribute tables and latent codes.

Provides the linear-time kernel two-sample test with per-dimension Gaussian
bandwidths from Scott's rule, partial-correlation tables between attributes
and latent codes via precision matrices, and the mutual-information-gap
disentanglement score with equal-frequency binning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateAttribute,
    DegenerateColumn,
    SingularCovariance,
    TooFewSamples,
)

CONTINUOUS = "cont"
BINARY = "bin"
CATEGORICAL = "cat"


@dataclass(frozen=True)
class AttributeTable:
    """N rows of D named real-valued columns (morphometrics or factors)."""

    names: tuple
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("values must be a 2-D array")
        if arr.shape[1] != len(self.names):
            raise ValueError("column count does not match names")
        if arr.shape[1] < 1:
            raise ValueError("at least one column required")
        if arr.shape[0] < 2:
            raise ValueError("at least two rows required")
        if not np.isfinite(arr).all():
            raise ValueError("values must be finite (no NaN/inf)")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", arr)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


def parse_code_kind(tag: str) -> tuple[str, int]:
    """Parse a column type tag: ``cont``, ``bin`` or ``cat:K``."""
    if tag == CONTINUOUS:
        return (CONTINUOUS, 0)
    if tag == BINARY:
        return (BINARY, 2)
    if tag.startswith(CATEGORICAL + ":"):
        k = int(tag.split(":", 1)[1])
        if k < 1:
            raise ValueError(f"categorical arity must be >= 1, got {k}")
        return (CATEGORICAL, k)
    raise ValueError(f"unknown code type tag {tag!r}")


@dataclass(frozen=True)
class CodeTable:
    """Latent-code columns, each tagged continuous, binary or categorical(K)."""

    names: tuple
    values: np.ndarray
    kinds: tuple  # of (kind, K) pairs as produced by parse_code_kind

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != len(self.names) or len(self.kinds) != len(self.names):
            raise ValueError("values/names/kinds are inconsistent")
        for d, (kind, k) in enumerate(self.kinds):
            col = arr[:, d]
            if kind == BINARY and not np.isin(col, (0.0, 1.0)).all():
                raise ValueError(f"binary column {self.names[d]!r} has values outside {{0, 1}}")
            if kind == CATEGORICAL:
                if not (col == np.rint(col)).all() or col.min() < 0 or col.max() >= k:
                    raise ValueError(
                        f"categorical column {self.names[d]!r} has values outside 0..{k - 1}"
                    )
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "values", arr)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MMDTestResult:
    """Linear-time squared-MMD estimate with its normal-approximation p-value."""

    statistic: float
    std_error: float
    p_value: float
    bandwidths: np.ndarray
    n_used: int
    alternative: str = "one-sided (statistic > 0)"


@dataclass(frozen=True)
class ExpandedCodes:
    """Real-valued code matrix after one-hot expansion of categoricals."""

    names: tuple
    values: np.ndarray
    source: tuple  # original column index per expanded column
    source_kinds: tuple  # kind of the original column per expanded column


@dataclass(frozen=True)
class PartialCorrTable:
    """Partial correlations, rows = attributes, columns = expanded codes."""

    attributes: tuple
    codes: tuple
    matrix: np.ndarray


@dataclass(frozen=True)
class MIGReport:
    """Mutual-information gap per attribute, its mean, and the MI matrix."""

    attributes: tuple
    codes: tuple
    per_attribute: np.ndarray
    overall: float
    mutual_information: np.ndarray
    binning: dict = field(default_factory=dict)


def scott_bandwidths(table: AttributeTable) -> np.ndarray:
    """Scott's-rule bandwidth per dimension: N**(-1/(D+4)) * std (ddof=1)."""
    x = table.values
    n, d = x.shape
    std = x.std(axis=0, ddof=1)
    bad = np.nonzero(std == 0)[0]
    if bad.size:
        names = ", ".join(table.names[i] for i in bad)
        raise DegenerateColumn(f"zero-variance column(s): {names}")
    return n ** (-1.0 / (d + 4.0)) * std


def _gauss_kernel(a: np.ndarray, b: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * (((a - b) ** 2) / sigma2).sum(axis=1))


def mmd_linear_test(x: AttributeTable, y: AttributeTable) -> MMDTestResult:
    """Linear-time kernel two-sample test between two attribute tables.

    Both tables are truncated to the same even length n; the Gaussian
    product kernel adds the squared Scott bandwidths of the two tables per
    dimension.  The statistic averages
    h_i = k(x1, x2) + k(y1, y2) - k(x1, y2) - k(x2, y1) over disjoint pairs
    and the p-value is the one-sided normal tail of statistic / std.error.
    """
    if x.names != y.names:
        raise ValueError(f"column mismatch: {x.names} vs {y.names}")
    n = 2 * (min(x.n_rows, y.n_rows) // 2)
    if n < 4:
        raise TooFewSamples(f"need at least 4 paired rows, have {n}")
    xv = x.values[:n]
    yv = y.values[:n]
    bx = scott_bandwidths(AttributeTable(x.names, xv))
    by = scott_bandwidths(AttributeTable(y.names, yv))
    sigma2 = bx**2 + by**2

    x1, x2 = xv[0::2], xv[1::2]
    y1, y2 = yv[0::2], yv[1::2]
    h = (
        _gauss_kernel(x1, x2, sigma2)
        + _gauss_kernel(y1, y2, sigma2)
        - _gauss_kernel(x1, y2, sigma2)
        - _gauss_kernel(x2, y1, sigma2)
    )
    statistic = float(h.mean())
    std_error = float(h.std(ddof=1) / math.sqrt(h.size))
    if std_error == 0.0:
        p_value = 1.0 if statistic <= 0 else 0.0
    else:
        p_value = 0.5 * math.erfc(statistic / std_error / math.sqrt(2.0))
    return MMDTestResult(
        statistic=statistic,
        std_error=std_error,
        p_value=p_value,
        bandwidths=np.sqrt(sigma2),
        n_used=n,
    )


def dummy_expand(codes: CodeTable) -> ExpandedCodes:
    """Expand categorical columns to one-hot dummies, keeping bookkeeping.

    Continuous and binary columns pass through; a categorical(K) column
    becomes K columns named ``name[k]``.  ``source`` maps every expanded
    column back to its original column index so sibling dummies can be
    recognised later.
    """
    cols = []
    names = []
    source = []
    source_kinds = []
    for d, (kind, k) in enumerate(codes.kinds):
        col = codes.values[:, d]
        if kind == CATEGORICAL:
            for level in range(k):
                cols.append((col == level).astype(np.float64))
                names.append(f"{codes.names[d]}[{level}]")
                source.append(d)
                source_kinds.append(CATEGORICAL)
        else:
            cols.append(col.astype(np.float64))
            names.append(codes.names[d])
            source.append(d)
            source_kinds.append(kind)
    return ExpandedCodes(
        names=tuple(names),
        values=np.column_stack(cols),
        source=tuple(source),
        source_kinds=tuple(source_kinds),
    )


def _control_columns(expanded: ExpandedCodes, target: int) -> list:
    """Columns to control for when scoring expanded column ``target``.

    Sibling dummies of the target's own categorical code are excluded
    entirely; every other categorical code contributes all but its last
    dummy (its centred dummies are exactly collinear, and the controlled
    span is the same whichever one is dropped).
    """
    target_src = expanded.source[target]
    controls = []
    for i in range(len(expanded.names)):
        if i == target:
            continue
        src = expanded.source[i]
        if expanded.source_kinds[i] == CATEGORICAL:
            if src == target_src and expanded.source_kinds[target] == CATEGORICAL:
                continue
            siblings = [j for j in range(len(expanded.names)) if expanded.source[j] == src]
            if i == siblings[-1]:
                continue
        controls.append(i)
    return controls


def _near_collinear(columns: np.ndarray, names: list) -> str:
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(columns.T)
    pairs = []
    for a in range(corr.shape[0]):
        for b in range(a + 1, corr.shape[0]):
            if not np.isfinite(corr[a, b]) or abs(corr[a, b]) > 0.999:
                pairs.append(f"({names[a]}, {names[b]})")
    return ", ".join(pairs) if pairs else "none identified"


def partial_correlations(y: AttributeTable, codes: CodeTable) -> PartialCorrTable:
    """Partial correlation of every attribute with every (expanded) code.

    Each entry is the correlation between the attribute and one code,
    controlling for the remaining codes, read off the precision matrix of
    the stacked columns: r = -P[0,1] / sqrt(P[0,0] P[1,1]).
    """
    if y.n_rows != codes.n_rows:
        raise ValueError(f"row mismatch: {y.n_rows} attributes vs {codes.n_rows} codes")
    expanded = dummy_expand(codes)
    n_attr = len(y.names)
    n_code = len(expanded.names)
    matrix = np.zeros((n_attr, n_code))
    for j in range(n_attr):
        for i in range(n_code):
            controls = _control_columns(expanded, i)
            stack = np.column_stack(
                [y.values[:, j], expanded.values[:, i], expanded.values[:, controls]]
            )
            cov = np.cov(stack.T, ddof=1)
            if not np.isfinite(cov).all() or np.linalg.cond(cov) > 1e12:
                names = [y.names[j], expanded.names[i]] + [expanded.names[c] for c in controls]
                raise SingularCovariance(
                    f"attribute {y.names[j]!r} vs code {expanded.names[i]!r}: "
                    f"near-collinear columns: {_near_collinear(stack, names)}"
                )
            prec = np.linalg.inv(cov)
            matrix[j, i] = -prec[0, 1] / math.sqrt(prec[0, 0] * prec[1, 1])
    return PartialCorrTable(
        attributes=tuple(y.names),
        codes=expanded.names,
        matrix=np.clip(matrix, -1.0, 1.0),
    )


def equal_frequency_bins(values: np.ndarray, bins: int) -> np.ndarray:
    """Quantile-block labels 0..bins-1 from max-ranks, so ties never split
    and any strictly monotone transform of the values gives identical labels."""
    values = np.asarray(values)
    n = values.shape[0]
    order = np.sort(values)
    ranks = np.searchsorted(order, values, side="right")
    return ((ranks * bins - 1) // n).astype(np.int64)


def _entropy(labels: np.ndarray) -> float:
    p = np.bincount(labels) / labels.size
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def _mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    na = int(a.max()) + 1
    nb = int(b.max()) + 1
    joint = np.bincount(a * nb + b, minlength=na * nb).reshape(na, nb) / a.size
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    mask = joint > 0
    return float((joint[mask] * np.log(joint[mask] / np.outer(pa, pb)[mask])).sum())


def mig(y: AttributeTable, codes: CodeTable, bins: int = 20) -> MIGReport:
    """Mutual information gap between the two codes most informative of each
    attribute, normalised by the attribute's entropy.

    Attributes and continuous codes are discretised into equal-frequency
    bins; binary and categorical codes are used as-is.  Mutual information
    is the plug-in estimate on the joint histogram.
    """
    if y.n_rows != codes.n_rows:
        raise ValueError(f"row mismatch: {y.n_rows} attributes vs {codes.n_rows} codes")
    if bins < 2:
        raise ValueError("need at least 2 bins")
    y_disc = [equal_frequency_bins(y.values[:, j], bins) for j in range(len(y.names))]
    c_disc = []
    for d, (kind, _) in enumerate(codes.kinds):
        col = codes.values[:, d]
        if kind == CONTINUOUS:
            c_disc.append(equal_frequency_bins(col, bins))
        else:
            c_disc.append(col.astype(np.int64))

    n_attr, n_code = len(y_disc), len(c_disc)
    info = np.zeros((n_attr, n_code))
    gaps = np.zeros(n_attr)
    for j in range(n_attr):
        h = _entropy(y_disc[j])
        if h == 0.0:
            raise DegenerateAttribute(f"attribute {y.names[j]!r} has zero entropy")
        for i in range(n_code):
            info[j, i] = _mutual_information(y_disc[j], c_disc[i])
        top = np.sort(info[j])[::-1]
        second = top[1] if n_code > 1 else 0.0
        gaps[j] = min(max((top[0] - second) / h, 0.0), 1.0)
    return MIGReport(
        attributes=tuple(y.names),
        codes=tuple(codes.names),
        per_attribute=gaps,
        overall=float(gaps.mean()),
        mutual_information=info,
        binning={"bins": bins, "scheme": "equal-frequency (rank blocks)"},
    )
