"""
ctxrep Aggregation
Combines a method's code vector with its selected context vectors, for one
method (classification) or a method pair (clone detection).

Days is one-dimensional: pooling schemes pool the D-dimensional vectors and
append days afterwards.
"""

from typing import List, Tuple

import numpy as np

from ctxrep.engines.context_encoder import EncodedMethod
from ctxrep.errors import DimensionMismatch
from ctxrep.models import AggregationScheme, ContextSelection, Task


def context_vectors(m: EncodedMethod, sel: ContextSelection) -> List[np.ndarray]:
    """Selected D-dimensional contexts: history, then caller and callee"""
    vectors = []
    if sel.use_history:
        vectors.append(m.history)
    if sel.use_call_hierarchy:
        vectors.extend([m.caller, m.callee])
    return vectors


def select_vectors(m: EncodedMethod, sel: ContextSelection) -> List[np.ndarray]:
    """[code, history?, caller?, callee?, days?]"""
    vectors = [m.code] + context_vectors(m, sel)
    if sel.use_days:
        vectors.append(m.days)
    return vectors


def _check_pair(a: EncodedMethod, b: EncodedMethod) -> None:
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"pair operands have dimensions {a.dimension} and {b.dimension}")


def concat_single(m: EncodedMethod, sel: ContextSelection) -> np.ndarray:
    return np.concatenate(select_vectors(m, sel))


def maxpool(vectors: List[np.ndarray]) -> np.ndarray:
    """Elementwise maximum of equally sized vectors"""
    if not vectors:
        raise DimensionMismatch("max-pooling needs at least one vector")
    shapes = {v.shape for v in vectors}
    if len(shapes) != 1:
        raise DimensionMismatch(f"max-pooling needs equal dimensions, got {sorted(s[0] for s in shapes)}")
    return np.max(np.stack(vectors), axis=0)


def pool_single(m: EncodedMethod, sel: ContextSelection) -> np.ndarray:
    pooled = maxpool([m.code] + context_vectors(m, sel))
    if sel.use_days:
        return np.concatenate([pooled, m.days])
    return pooled


def pair_concat_absdiff(a: EncodedMethod, b: EncodedMethod, sel: ContextSelection) -> np.ndarray:
    _check_pair(a, b)
    return np.abs(concat_single(a, sel) - concat_single(b, sel))


def pair_maxpool(a: EncodedMethod, b: EncodedMethod, sel: ContextSelection) -> np.ndarray:
    _check_pair(a, b)
    pooled = maxpool([a.code] + context_vectors(a, sel) + [b.code] + context_vectors(b, sel))
    if sel.use_days:
        return np.concatenate([pooled, np.maximum(a.days, b.days)])
    return pooled


def pair_diff_then_concat(a: EncodedMethod, b: EncodedMethod, sel: ContextSelection) -> np.ndarray:
    """|code_a - code_b|, then a's selected contexts, then b's. Not swap-symmetric."""
    _check_pair(a, b)
    return np.concatenate(
        [np.abs(a.code - b.code)] + select_vectors(a, sel)[1:] + select_vectors(b, sel)[1:]
    )


def aggregate_single(m: EncodedMethod, sel: ContextSelection, scheme: AggregationScheme) -> np.ndarray:
    if scheme == AggregationScheme.CONCAT:
        return concat_single(m, sel)
    if scheme == AggregationScheme.MAXPOOL:
        return pool_single(m, sel)
    raise ValueError(f"{scheme.value} needs a method pair")


def aggregate_pair(
    a: EncodedMethod,
    b: EncodedMethod,
    sel: ContextSelection,
    scheme: AggregationScheme,
) -> np.ndarray:
    if scheme == AggregationScheme.CONCAT:
        return pair_concat_absdiff(a, b, sel)
    if scheme == AggregationScheme.MAXPOOL:
        return pair_maxpool(a, b, sel)
    return pair_diff_then_concat(a, b, sel)


def feature_dimension(scheme: AggregationScheme, sel: ContextSelection, dimension: int, task: Task = Task.CLONE) -> int:
    """Output dimension as a pure function of (scheme, selection, D)"""
    contexts = dimension * (int(sel.use_history) + 2 * int(sel.use_call_hierarchy))
    days = int(sel.use_days)
    if scheme == AggregationScheme.MAXPOOL:
        return dimension + days
    if scheme == AggregationScheme.CONCAT:
        return dimension + contexts + days
    if task == Task.CLASSIFY:
        raise ValueError(f"{scheme.value} needs a method pair")
    return dimension + 2 * (contexts + days)


def aggregate_pairs(
    pairs: List[Tuple[EncodedMethod, EncodedMethod]],
    sel: ContextSelection,
    scheme: AggregationScheme,
) -> np.ndarray:
    """Feature matrix, one row per pair"""
    return np.stack([aggregate_pair(a, b, sel, scheme) for a, b in pairs])


def aggregate_methods(methods: List[EncodedMethod], sel: ContextSelection, scheme: AggregationScheme) -> np.ndarray:
    return np.stack([aggregate_single(m, sel, scheme) for m in methods])
