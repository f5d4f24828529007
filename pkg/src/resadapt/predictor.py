"""Resolution predictors: regression forest, mean baseline, viewer-held-out CV.

Trees are grown by greedy variance reduction: at each node a seeded random
subset of features is scanned for the split minimizing the summed squared
error of the two children. Categorical features enter as one-hot columns,
so a threshold on a {0,1} column acts as a category membership test.

Everything is reproducible: each tree draws its bootstrap sample and
feature subsets from a generator seeded by SeedSequence([*seed_path,
tree_index]), so results are bit-identical for identical data,
hyperparameters, and seed, regardless of scheduling.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import ACTIVITIES, GENDERS, TRAITS
from .errors import ValidationError
from .serialize import dumps

MODEL_FORMAT_FOREST = "resadapt-forest"
MODEL_FORMAT_MEAN = "resadapt-mean"
MODEL_VERSION = 1


# --------------------------------------------------------------------------
# Feature encoding


def feature_names(include_ti: bool = True, include_traits: bool = True) -> list:
    names = ["si"]
    if include_ti:
        names.append("ti")
    names += ["age", "glasses"]
    names += [f"activity={a}" for a in ACTIVITIES]
    names += [f"gender={g}" for g in GENDERS]
    if include_traits:
        names += [f"dominant={t}" for t in TRAITS]
        names += [f"pct_{t}" for t in TRAITS]
    return names


def encode_row(row, names) -> np.ndarray:
    """Encode one flat feature mapping into the model's column order."""
    out = np.empty(len(names), dtype=np.float64)
    for j, name in enumerate(names):
        if "=" in name:
            key, level = name.split("=", 1)
            key = {"dominant": "dominant_trait"}.get(key, key)
            if key not in row:
                raise ValidationError(f"feature row lacks field {key!r}")
            out[j] = 1.0 if str(row[key]).lower() == level else 0.0
        else:
            if name not in row:
                raise ValidationError(f"feature row lacks field {name!r}")
            out[j] = float(row[name])
    return out


def encode_features(rows, include_ti: bool = True):
    """Encode AnalysisRow-style mappings into (X, y, names, viewer_ids).

    Trait columns are included exactly when every row carries them; a mix
    of rows with and without personality data is rejected.
    """
    rows = list(rows)
    if not rows:
        raise ValidationError("no rows to encode")
    mappings = [r.features() if hasattr(r, "features") else dict(r) for r in rows]
    have_traits = ["dominant_trait" in m for m in mappings]
    if any(have_traits) and not all(have_traits):
        raise ValidationError("rows mix personality and non-personality records")
    names = feature_names(include_ti=include_ti, include_traits=all(have_traits))
    X = np.stack([encode_row(m, names) for m in mappings])
    y = np.array([float(m["final_resolution"]) for m in mappings])
    viewers = [getattr(r, "participant_id", None) for r in rows]
    return X, y, names, viewers


# --------------------------------------------------------------------------
# Trees and forests


def _leaf(y):
    return {"value": float(np.mean(y)), "n": int(len(y))}


def _best_split(X, y, features, min_leaf):
    best = None  # (sse, feature, threshold)
    for j in features:
        col = X[:, j]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        ys = y[order]
        n = len(ys)
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        sizes = np.arange(min_leaf, n - min_leaf + 1)
        if sizes.size == 0:
            continue
        valid = xs[sizes - 1] < xs[sizes]  # cannot split between equal values
        if not np.any(valid):
            continue
        left = sizes[valid]
        sse_l = csq[left - 1] - csum[left - 1] ** 2 / left
        right = n - left
        sum_r = csum[-1] - csum[left - 1]
        sq_r = csq[-1] - csq[left - 1]
        sse_r = sq_r - sum_r**2 / right
        sse = np.maximum(sse_l, 0.0) + np.maximum(sse_r, 0.0)
        i = int(np.argmin(sse))  # ties keep the lowest threshold
        if best is None or sse[i] < best[0]:
            threshold = 0.5 * (xs[left[i] - 1] + xs[left[i]])
            best = (float(sse[i]), int(j), float(threshold))
    return best


def _grow(X, y, depth, max_depth, min_leaf, m, rng):
    if (max_depth is not None and depth >= max_depth) or len(y) < 2 * min_leaf:
        return _leaf(y)
    if np.ptp(y) == 0.0:
        return _leaf(y)
    p = X.shape[1]
    subset = np.sort(rng.choice(p, size=min(m, p), replace=False))
    best = _best_split(X, y, subset, min_leaf)
    if best is None:
        return _leaf(y)
    _, feature, threshold = best
    mask = X[:, feature] <= threshold
    return {
        "feature": feature,
        "threshold": threshold,
        "left": _grow(X[mask], y[mask], depth + 1, max_depth, min_leaf, m, rng),
        "right": _grow(X[~mask], y[~mask], depth + 1, max_depth, min_leaf, m, rng),
    }


def _predict_node(node, x):
    while "feature" in node:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    return node["value"]


@dataclass
class RegressionTree:
    root: dict
    max_depth: int | None
    min_leaf: int

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.array([_predict_node(self.root, x) for x in X])


def _resolve_subset(feature_subset, p):
    if feature_subset in (None, "all"):
        return p
    if feature_subset == "sqrt":
        return max(1, math.ceil(math.sqrt(p)))
    m = int(feature_subset)
    if m < 1:
        raise ValidationError(f"feature subset size must be >= 1, got {m}")
    return min(m, p)


def _tree_rng(seed_path, tree_index):
    entropy = list(seed_path) + [tree_index]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def train_tree(X, y, max_depth=None, min_leaf=2, feature_subset="all",
               rng=None) -> RegressionTree:
    """Grow one CART regression tree by SSE-minimizing splits."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise ValidationError("empty training set")
    if len(y) < min_leaf:
        raise ValidationError(f"need at least min_leaf={min_leaf} rows, got {len(y)}")
    if rng is None:
        rng = np.random.default_rng(0)
    m = _resolve_subset(feature_subset, X.shape[1])
    root = _grow(X, y, 0, max_depth, min_leaf, m, rng)
    return RegressionTree(root=root, max_depth=max_depth, min_leaf=min_leaf)


@dataclass
class ForestModel:
    trees: list
    n_trees: int
    max_depth: int | None
    min_leaf: int
    feature_subset: object
    bootstrap: bool
    seed_path: tuple
    feature_names: list = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        per_tree = np.stack([tree.predict(X) for tree in self.trees])
        out = per_tree.mean(axis=0)
        # unanimous trees must yield that exact value (averaging k identical
        # floats can lose an ulp when k is not a power of two)
        unanimous = np.all(per_tree == per_tree[0], axis=0)
        out[unanimous] = per_tree[0][unanimous]
        return out

    def predict_rows(self, rows) -> np.ndarray:
        X = np.stack([encode_row(r, self.feature_names) for r in rows])
        return self.predict(X)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT_FOREST,
            "version": MODEL_VERSION,
            "hyperparameters": {
                "n_trees": self.n_trees,
                "max_depth": self.max_depth,
                "min_leaf": self.min_leaf,
                "feature_subset": self.feature_subset,
                "bootstrap": self.bootstrap,
            },
            "seed_path": list(self.seed_path),
            "feature_names": list(self.feature_names),
            "trees": [tree.root for tree in self.trees],
        }


def train_forest(X, y, n_trees=100, max_depth=None, min_leaf=2,
                 feature_subset="sqrt", bootstrap=True, seed=None,
                 feature_names=None, threads=None) -> ForestModel:
    """Train a bagged forest of regression trees.

    *seed* is mandatory (an int, or a tuple forming a seed path); tree i
    draws from SeedSequence([*seed, i]).
    """
    if seed is None:
        raise ValidationError("a seed is required to train a forest")
    if n_trees < 1:
        raise ValidationError(f"n_trees must be >= 1, got {n_trees}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    seed_path = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)

    def build(i):
        rng = _tree_rng(seed_path, i)
        if bootstrap:
            idx = rng.integers(0, len(y), size=len(y))
            Xi, yi = X[idx], y[idx]
        else:
            Xi, yi = X, y
        return train_tree(Xi, yi, max_depth=max_depth, min_leaf=min_leaf,
                          feature_subset=feature_subset, rng=rng)

    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(build, range(n_trees)))
    else:
        trees = [build(i) for i in range(n_trees)]

    return ForestModel(
        trees=trees, n_trees=n_trees, max_depth=max_depth, min_leaf=min_leaf,
        feature_subset=feature_subset, bootstrap=bootstrap, seed_path=seed_path,
        feature_names=list(feature_names or []),
    )


@dataclass
class MeanRegressor:
    mean: float
    feature_names: list = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.full(X.shape[0], self.mean)

    def predict_rows(self, rows) -> np.ndarray:
        return np.full(len(list(rows)), self.mean)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT_MEAN,
            "version": MODEL_VERSION,
            "mean": self.mean,
            "feature_names": list(self.feature_names),
        }


def mean_regressor(y, feature_names=None) -> MeanRegressor:
    """Baseline that always predicts the training-target mean."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValidationError("empty training set")
    return MeanRegressor(mean=float(np.mean(y)), feature_names=list(feature_names or []))


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model.to_dict()))


def load_model(path):
    import json

    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    fmt = doc.get("format")
    if fmt == MODEL_FORMAT_MEAN:
        return MeanRegressor(mean=float(doc["mean"]),
                             feature_names=list(doc.get("feature_names", [])))
    if fmt == MODEL_FORMAT_FOREST:
        hp = doc["hyperparameters"]
        trees = [RegressionTree(root=root, max_depth=hp["max_depth"],
                                min_leaf=hp["min_leaf"])
                 for root in doc["trees"]]
        return ForestModel(
            trees=trees, n_trees=hp["n_trees"], max_depth=hp["max_depth"],
            min_leaf=hp["min_leaf"], feature_subset=hp["feature_subset"],
            bootstrap=hp["bootstrap"], seed_path=tuple(doc["seed_path"]),
            feature_names=list(doc.get("feature_names", [])),
        )
    raise ValidationError(f"unknown model format {fmt!r}")


# --------------------------------------------------------------------------
# Evaluation


@dataclass
class Metrics:
    accuracy: float
    mae: float
    rmse: float


@dataclass
class FoldMetrics:
    viewer: str
    n_rows: int
    accuracy: float
    mae: float
    rmse: float


@dataclass
class EvalMetrics:
    folds: list
    accuracy_mean: float
    accuracy_std: float
    mae_mean: float
    mae_std: float
    rmse_mean: float
    rmse_std: float

    def to_dict(self) -> dict:
        return {
            "folds": [
                {"viewer": f.viewer, "n_rows": f.n_rows, "accuracy": f.accuracy,
                 "mae": f.mae, "rmse": f.rmse}
                for f in self.folds
            ],
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "mae_mean": self.mae_mean,
            "mae_std": self.mae_std,
            "rmse_mean": self.rmse_mean,
            "rmse_std": self.rmse_std,
        }


def metrics(predictions, targets) -> Metrics:
    """Accuracy (100 minus MAPE), MAE, and RMSE of predictions vs targets."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValidationError("predictions and targets must be equally long 1-D series")
    if p.size == 0:
        raise ValidationError("cannot score an empty prediction set")
    if np.any(t <= 0):
        raise ValidationError("targets must be positive for the percentage error")
    err = p - t
    mape = float(np.mean(np.abs(err) / t)) * 100.0
    return Metrics(
        accuracy=100.0 - mape,
        mae=float(np.mean(np.abs(err))),
        rmse=float(np.sqrt(np.mean(err * err))),
    )


def loocv_by_viewer(rows, builder, viewers=None) -> EvalMetrics:
    """Leave-one-viewer-out cross-validation.

    *builder* is called as ``builder(train_rows, fold_index)`` and must
    return a model exposing ``predict_rows``. One fold per viewer; a viewer
    listed in *viewers* but owning no rows is skipped with a warning.
    """
    rows = list(rows)
    by_viewer = {}
    for row in rows:
        vid = row.participant_id if hasattr(row, "participant_id") else row["participant_id"]
        by_viewer.setdefault(vid, []).append(row)
    if viewers is None:
        viewers = sorted(by_viewer)
    else:
        viewers = list(viewers)
        for v in viewers:
            if v not in by_viewer:
                warnings.warn(f"viewer {v!r} has no rows; skipping its fold")
        viewers = [v for v in viewers if v in by_viewer]
    if len(viewers) < 2:
        raise ValidationError(f"leave-one-viewer-out needs >= 2 viewers, got {len(viewers)}")

    folds = []
    for fold_index, held_out in enumerate(viewers):
        train = [r for v in viewers if v != held_out for r in by_viewer[v]]
        test = by_viewer[held_out]
        model = builder(train, fold_index)
        test_maps = [r.features() if hasattr(r, "features") else dict(r) for r in test]
        preds = model.predict_rows(test_maps)
        targets = [m["final_resolution"] for m in test_maps]
        m = metrics(preds, targets)
        folds.append(FoldMetrics(viewer=held_out, n_rows=len(test),
                                 accuracy=m.accuracy, mae=m.mae, rmse=m.rmse))

    def agg(attr):
        values = np.array([getattr(f, attr) for f in folds])
        return float(values.mean()), float(values.std())

    acc = agg("accuracy")
    mae = agg("mae")
    rmse = agg("rmse")
    return EvalMetrics(folds=folds, accuracy_mean=acc[0], accuracy_std=acc[1],
                       mae_mean=mae[0], mae_std=mae[1],
                       rmse_mean=rmse[0], rmse_std=rmse[1])


def make_forest_builder(seed, include_ti=True, **params):
    """LOOCV builder for forests; fold f trains with seed path (seed, f)."""
    if seed is None:
        raise ValidationError("a seed is required to train a forest")

    def build(train_rows, fold_index):
        X, y, names, _ = encode_features(train_rows, include_ti=include_ti)
        return train_forest(X, y, seed=(int(seed), fold_index),
                            feature_names=names, **params)

    return build


def make_mean_builder():
    def build(train_rows, fold_index):
        maps = [r.features() if hasattr(r, "features") else dict(r) for r in train_rows]
        return mean_regressor([m["final_resolution"] for m in maps])

    return build


def per_personality_eval(rows, seed, include_ti=True, **params) -> dict:
    """Viewer-held-out evaluation within each dominant-trait subset.

    Subsets with fewer than 2 viewers cannot form folds and are excluded
    with a notice. Returns {"included": {trait: {...}}, "excluded":
    {trait: reason}}.
    """
    rows = list(rows)
    by_trait = {}
    for row in rows:
        trait = row.dominant_trait if hasattr(row, "dominant_trait") else row["dominant_trait"]
        if trait is None:
            raise ValidationError("per-personality evaluation needs personality data")
        by_trait.setdefault(trait, []).append(row)

    included, excluded = {}, {}
    for trait in sorted(by_trait):
        subset = by_trait[trait]
        viewers = {r.participant_id if hasattr(r, "participant_id") else r["participant_id"]
                   for r in subset}
        if len(viewers) < 2:
            excluded[trait] = f"only {len(viewers)} viewer(s) with this dominant trait"
            continue
        included[trait] = {
            "n_viewers": len(viewers),
            "n_rows": len(subset),
            "forest": loocv_by_viewer(
                subset, make_forest_builder(seed, include_ti=include_ti, **params)
            ).to_dict(),
            "mean": loocv_by_viewer(subset, make_mean_builder()).to_dict(),
        }
    return {"included": included, "excluded": excluded}
