"""The batch AutoML preset: phase scheduling under a wall-clock budget.

Training order is fixed cheapest-first: linear, expert GBM (leaf-wise),
tuned GBM (leaf-wise), expert GBM (oblivious), tuned GBM (oblivious). The
linear phase always runs; every later phase receives a share of the
remaining time and is skipped outright when the remainder cannot plausibly
cover it. A two-level stack is built for multiclass tasks by default, and the
final level's models are combined by coordinate-descent blending.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .autotype import TypingReport, apply_typing, infer_feature_kind, select_category_encoding
from .budget import TimeBudget
from .data import Column, Dataset, DatasetMeta, RawTable, Task, dataset_from_raw_with_schema
from .encoders import EncoderSpec
from .ensemble import (BlendWeights, StackTopology, apply_blend, blend_weights,
                       build_stack_features)
from .errors import BudgetError, ConfigError, DataError
from .gbm import GBMParams, fit_booster
from .learners import GBMView, TrainedModel, fit_gbm, fit_linear
from .metrics import MetricSpec, evaluate
from .selection import cutoff_select, forward_select, permutation_importance
from .tuning import expert_params, tune_gbm
from .validation import CVScheme, FoldAssignment, make_folds, kfold_vector

FORMAT_VERSION = 1

SELECTION_STRATEGIES = ("none", "cutoff", "forward")
STACK_POLICIES = ("auto", "always", "never")

PHASE_SHARES = (
    ("linear", 0.10),
    ("gbm_leaf_expert", 0.15),
    ("gbm_leaf_tuned", 0.25),
    ("gbm_sym_expert", 0.15),
    ("gbm_sym_tuned", 0.25),
)
STACK_SHARE = 0.10
BLEND_RESERVE = 0.05
SELECTION_SHARE = 0.15
SELECTION_TREE_CAP = 200
MIN_PHASE_SECONDS = 0.5  # below this a phase cannot do useful work: skip it


@dataclass(frozen=True)
class PresetConfig:
    cv: CVScheme | None = None
    selection_strategy: str = "cutoff"
    stack_policy: str = "auto"
    tuning_enabled: bool = True
    budget_seconds: float = 600.0
    seed: int = 42
    use_linear: bool = True
    use_gbm_leaf: bool = True
    use_gbm_sym: bool = True
    metric: str | None = None
    typing_alpha: float = 2.0
    typing_q: int = 10
    forward_block_size: int | None = None

    def __post_init__(self) -> None:
        if self.selection_strategy not in SELECTION_STRATEGIES:
            raise ConfigError(f"unknown selection strategy {self.selection_strategy!r}")
        if self.stack_policy not in STACK_POLICIES:
            raise ConfigError(f"unknown stack policy {self.stack_policy!r}")
        if self.budget_seconds <= 0:
            raise ConfigError("budget_seconds must be positive")
        if not (self.use_linear or self.use_gbm_leaf or self.use_gbm_sym):
            raise ConfigError("at least one learner must be enabled")


@dataclass(frozen=True)
class PhasePlan:
    """Ordered model phases with time shares; order is fixed cheapest-first."""

    phases: tuple[tuple[str, float], ...]

    @classmethod
    def for_config(cls, config: PresetConfig, stack_active: bool) -> "PhasePlan":
        phases = []
        for name, share in PHASE_SHARES:
            if name == "linear" and not config.use_linear:
                continue
            if name.startswith("gbm_leaf") and not config.use_gbm_leaf:
                continue
            if name.startswith("gbm_sym") and not config.use_gbm_sym:
                continue
            if name.endswith("_tuned") and not config.tuning_enabled:
                continue
            phases.append((name, share))
        if stack_active:
            phases.append(("stack", STACK_SHARE))
        return cls(tuple(phases))

    def share_of(self, name: str) -> float:
        for n, s in self.phases:
            if n == name:
                return s
        raise ConfigError(f"phase {name!r} is not in the plan")


def allocate_time(budget: TimeBudget, plan: PhasePlan,
                  observed: dict[str, float | None], phase: str) -> float | None:
    """Seconds for the next phase, or None to skip it.

    The linear phase always gets an allocation. Tuned phases are skipped when
    the remaining time is under twice the observed duration of the matching
    expert phase. Shares renormalize over the phases still pending, and a 5%
    reserve of the total stays earmarked for blending.
    """
    remaining = budget.remaining()
    reserve = BLEND_RESERVE * budget.total_seconds
    if phase.endswith("_tuned"):
        expert_phase = phase.replace("_tuned", "_expert")
        if expert_phase in observed and observed[expert_phase] is None:
            return None  # no expert baseline to refine
        expert_elapsed = observed.get(expert_phase)
        if expert_elapsed is not None and remaining < 2.0 * expert_elapsed:
            return None
    pending_shares = sum(s for n, s in plan.phases if n not in observed)
    share = plan.share_of(phase) / pending_shares if pending_shares > 0 else 1.0
    alloc = min(remaining * share, remaining - reserve)
    if phase == "linear":
        return max(alloc, 1.0)
    if alloc < MIN_PHASE_SECONDS:
        return None
    return alloc


@dataclass
class AutoMLModel:
    """The final fitted artifact: everything needed to predict and audit."""

    version: int
    task: Task
    config: dict
    reference: Dataset  # stripped of row data; keeps schema and dictionaries
    typing_report: TypingReport
    enc_specs: dict[str, EncoderSpec]
    selected: list[str]
    level1: list[TrainedModel]
    level2: list[TrainedModel]
    stack: StackTopology | None
    blend: BlendWeights
    oof: np.ndarray
    oof_mask: np.ndarray
    metric_oof: float
    report: dict

    def final_models(self) -> list[TrainedModel]:
        return self.level2 if self.stack is not None else self.level1

    def predict_raw_table(self, raw: RawTable) -> np.ndarray:
        ds = dataset_from_raw_with_schema(raw, self.reference, self.selected)
        return self.predict_dataset(ds)

    def predict_dataset(self, ds: Dataset) -> np.ndarray:
        level1_preds = [m.predict(ds) for m in self.level1]
        if self.stack is None:
            return apply_blend(level1_preds, self.blend)
        X2, names, _ = _stack_matrix_from_preds(self.level1, level1_preds)
        ds2 = _features_only_dataset(stack_feature_transform(X2, self.task),
                                     names, self.task)
        level2_preds = [m.predict(ds2) for m in self.level2]
        return apply_blend(level2_preds, self.blend)


def stack_feature_transform(X: np.ndarray, task: Task) -> np.ndarray:
    """Map stacked probability columns to log-odds (log-probabilities for
    multiclass) so a level-2 linear model can represent any single level-1
    model exactly; regression predictions pass through."""
    if task.kind == "regression":
        return X
    P = np.clip(X, 1e-6, 1.0 - 1e-6)
    if task.kind == "binary":
        return np.log(P / (1.0 - P))
    return np.log(P)


def _features_only_dataset(X: np.ndarray, names: list[str], task: Task) -> Dataset:
    columns = {n: Column(n, "numeric", X[:, j].astype(np.float64))
               for j, n in enumerate(names)}
    meta = DatasetMeta(n_rows=X.shape[0], n_features=len(names))
    roles = {n: "numeric" for n in names}
    schema = {n: {"kind": "numeric"} for n in names}
    return Dataset(columns, roles, np.zeros(X.shape[0]), "__target__", task, meta, schema)


def _stack_matrix_from_preds(models: list[TrainedModel],
                             preds: list[np.ndarray]) -> tuple[np.ndarray, list[str], None]:
    cols = []
    names = []
    for model, p in zip(models, preds):
        if p.ndim == 2:
            for c in range(p.shape[1]):
                cols.append(p[:, c])
                names.append(f"{model.learner_tag}__c{c}")
        else:
            cols.append(p)
            names.append(f"{model.learner_tag}__c0")
    return np.column_stack(cols), names, None


def strip_dataset(dataset: Dataset) -> Dataset:
    """Drop row data but keep schema, dictionaries, task, and metadata."""
    slim_cols = {}
    for name, col in dataset.columns.items():
        empty = np.empty(0, dtype=col.values.dtype)
        slim_cols[name] = Column(name, col.kind, empty, dictionary=col.dictionary,
                                 from_float_literals=col.from_float_literals,
                                 datetime_format=col.datetime_format)
    return Dataset(slim_cols, dict(dataset.roles), np.empty(0), dataset.target_name,
                   dataset.task, dataset.meta, dataset.schema)


def default_cv_scheme(task: Task, seed: int) -> CVScheme:
    if task.kind in ("binary", "multiclass"):
        return CVScheme("stratified_kfold", k=5, seed=seed)
    return CVScheme("kfold", k=5, seed=seed)


def _typing_folds(folds: FoldAssignment, n: int, seed: int) -> FoldAssignment:
    if folds.partitions_rows() and folds.k >= 2:
        return folds
    scheme = CVScheme("kfold", k=5, seed=seed)
    return FoldAssignment(kfold_vector(n, 5, seed), 5, scheme)


def _flavor_of(phase: str) -> str:
    return "leaf_wise" if "leaf" in phase else "symmetric_depth_wise"


def fit_preset(dataset: Dataset, config: PresetConfig) -> AutoMLModel:
    """Run the full pipeline under the configured budget."""
    budget = TimeBudget(config.budget_seconds)
    if config.metric is not None:
        task = Task(dataset.task.kind, dataset.task.n_classes,
                    MetricSpec(config.metric), dataset.task.labels)
        dataset = replace(dataset, task=task)
    task = dataset.task
    metric = task.metric
    y = dataset.target
    report: dict = {"seed": config.seed, "budget_seconds": config.budget_seconds,
                    "task": task.kind, "metric": metric.name,
                    "phases": [], "skipped": [], "warnings": []}

    scheme = config.cv or default_cv_scheme(task, config.seed)
    folds = make_folds(scheme, dataset)
    report["cv"] = {"kind": scheme.kind, "k": folds.k, "seed": scheme.seed}
    report["warnings"].extend(folds.warnings)
    report["warnings"].extend(dataset.meta.warnings)

    t0 = time.monotonic()
    typing_folds = _typing_folds(folds, dataset.n_rows, config.seed)
    typing_report = infer_feature_kind(dataset, typing_folds,
                                       alpha=config.typing_alpha, q=config.typing_q)
    dataset = apply_typing(dataset, typing_report)
    enc_specs: dict[str, EncoderSpec] = {}
    for name in dataset.category_feature_names():
        col = dataset.columns[name]
        enc_specs[name] = select_category_encoding(
            col.values, y, typing_folds, task.kind, task.n_classes,
            cardinality=int(col.dictionary.shape[0]), alpha=config.typing_alpha)
    report["typing"] = typing_report.to_json()
    report["encoders"] = {k: v.kind for k, v in enc_specs.items()}
    report["phases"].append({"name": "typing", "elapsed": time.monotonic() - t0})

    selected, selection_info = _run_selection(dataset, folds, enc_specs, config,
                                              budget, report)
    report["selection"] = selection_info

    stack_active = _stack_active(config, task, folds)
    plan = PhasePlan.for_config(config, stack_active)
    observed: dict[str, float | None] = {}
    roster: list[TrainedModel] = []
    tuned_params: dict[str, GBMParams] = {}
    histories: dict[str, list] = {}

    for phase, _share in plan.phases:
        if phase == "stack":
            continue
        alloc = allocate_time(budget, plan, observed, phase)
        if alloc is None:
            observed[phase] = None
            report["skipped"].append(phase)
            continue
        start = time.monotonic()
        model = None
        try:
            if phase == "linear":
                model = fit_linear(dataset, folds, budget=budget.sub(alloc),
                                   selected=selected)
            elif phase.endswith("_expert"):
                flavor = _flavor_of(phase)
                params = expert_params(task, dataset.n_rows, len(selected), flavor)
                model = fit_gbm(dataset, folds, params, budget=budget.sub(alloc),
                                enc_specs=enc_specs, selected=selected,
                                seed=config.seed, tag=phase)
            else:
                flavor = _flavor_of(phase)
                tune_budget = budget.sub(alloc * 0.5)
                best_params, history = tune_gbm(
                    dataset, folds, flavor, tune_budget, seed=config.seed,
                    enc_specs=enc_specs, selected=selected)
                histories[phase] = history.to_json()
                if len(history) == 0:
                    observed[phase] = None
                    report["skipped"].append(phase)
                    continue
                tuned_params[phase] = best_params
                refit_budget = budget.sub(max(alloc - (time.monotonic() - start), 1.0))
                model = fit_gbm(dataset, folds, best_params, budget=refit_budget,
                                enc_specs=enc_specs, selected=selected,
                                seed=config.seed, tag=phase)
        except DataError as exc:
            observed[phase] = None
            report["skipped"].append(phase)
            report["warnings"].append(f"{phase}: {exc}")
            continue
        elapsed = time.monotonic() - start
        observed[phase] = elapsed
        roster.append(model)
        report["phases"].append({"name": phase, "allocated": alloc,
                                 "elapsed": elapsed, "truncated": model.truncated,
                                 "metric_oof": model.metric_oof})

    if not roster:
        raise DataError("no model could be trained under the budget")

    level2: list[TrainedModel] = []
    stack: StackTopology | None = None
    if stack_active and len(roster) >= 1:
        start = time.monotonic()
        alloc = allocate_time(budget, plan, observed, "stack") or 1.0
        level2 = _fit_stack(dataset, roster, folds, task, budget.sub(alloc), config)
        if level2:
            stack = StackTopology((tuple(m.learner_tag for m in roster),
                                   tuple(m.learner_tag for m in level2)))
            observed["stack"] = time.monotonic() - start
            report["phases"].append({"name": "stack",
                                     "elapsed": observed["stack"],
                                     "models": [m.learner_tag for m in level2]})

    final = level2 if stack is not None else roster
    mask = np.ones(dataset.n_rows, dtype=bool)
    for m in final:
        mask &= m.oof_mask
    blend = blend_weights([m.oof for m in final], y, metric, mask=mask)
    report["blend"] = blend.to_json()
    report["models"] = {m.learner_tag: m.metric_oof for m in roster + level2}
    report["tuning"] = histories

    keep = [i for i in range(len(final)) if blend.weights[i] > 0]
    kept_models = [final[i] for i in keep]
    kept_weights = blend.weights[keep]
    kept_blend = BlendWeights(kept_weights / kept_weights.sum(), blend.dropped,
                              blend.metric_value, blend.sweep_trace)

    oof = apply_blend([m.oof[mask] for m in kept_models], kept_blend)
    full_shape = (dataset.n_rows,) if oof.ndim == 1 else (dataset.n_rows, oof.shape[1])
    oof_full = np.full(full_shape, np.nan)
    oof_full[mask] = oof
    metric_oof = evaluate(metric, y[mask], oof)
    report["metric_oof_blend"] = metric_oof
    report["wallclock_seconds"] = budget.elapsed()

    if stack is not None:
        level1_keep = roster
        level2_keep = kept_models
    else:
        level1_keep = kept_models
        level2_keep = []

    return AutoMLModel(
        version=FORMAT_VERSION, task=task, config=_config_snapshot(config),
        reference=strip_dataset(dataset), typing_report=typing_report,
        enc_specs=enc_specs, selected=selected, level1=level1_keep,
        level2=level2_keep, stack=stack, blend=kept_blend, oof=oof_full,
        oof_mask=mask, metric_oof=metric_oof, report=report)


def _config_snapshot(config: PresetConfig) -> dict:
    cv = config.cv
    return {
        "selection_strategy": config.selection_strategy,
        "stack_policy": config.stack_policy,
        "tuning_enabled": config.tuning_enabled,
        "budget_seconds": config.budget_seconds,
        "seed": config.seed,
        "use_linear": config.use_linear,
        "use_gbm_leaf": config.use_gbm_leaf,
        "use_gbm_sym": config.use_gbm_sym,
        "metric": config.metric,
        "typing_alpha": config.typing_alpha,
        "typing_q": config.typing_q,
        "cv": None if cv is None else {
            "kind": cv.kind, "k": cv.k, "seed": cv.seed,
            "holdout_fraction": cv.holdout_fraction,
            "group_column": cv.group_column, "time_column": cv.time_column},
    }


def _stack_active(config: PresetConfig, task: Task, folds: FoldAssignment) -> bool:
    if config.stack_policy == "never":
        return False
    if not folds.partitions_rows():
        return False  # stacking needs full OOF coverage
    if config.stack_policy == "always":
        return True
    return task.kind == "multiclass"


def _fit_stack(dataset: Dataset, roster: list[TrainedModel], folds: FoldAssignment,
               task: Task, budget: TimeBudget, config: PresetConfig) -> list[TrainedModel]:
    X2, names, mask = build_stack_features(roster, task)
    if not mask.all():
        return []
    ds2 = _features_only_dataset(stack_feature_transform(X2, task), names, task)
    ds2 = replace(ds2, target=dataset.target)
    models = []
    params = expert_params(task, ds2.n_rows, len(names), "leaf_wise")
    try:
        models.append(fit_gbm(ds2, folds, params, budget=budget,
                              seed=config.seed, tag="stack_gbm"))
    except DataError:
        pass
    try:
        models.append(fit_linear(ds2, folds, budget=budget, tag="stack_linear"))
    except (DataError, BudgetError):
        pass
    return models


def _run_selection(dataset: Dataset, folds: FoldAssignment,
                   enc_specs: dict[str, EncoderSpec], config: PresetConfig,
                   budget: TimeBudget, report: dict) -> tuple[list[str], dict]:
    names = dataset.feature_names()
    info: dict = {"strategy": config.selection_strategy, "kept": names}
    if config.selection_strategy == "none" or len(names) <= 1:
        return names, info
    reserve = BLEND_RESERVE * budget.total_seconds
    alloc = min(budget.remaining() * SELECTION_SHARE, budget.remaining() - reserve)
    if alloc <= 0.5:
        info["skipped"] = "insufficient budget"
        return names, info

    start = time.monotonic()
    sub_budget = budget.sub(alloc)
    task = dataset.task
    view = GBMView(alpha=2.0).fit(dataset, enc_specs)
    X = view.train_matrix(dataset, folds)
    y = dataset.target
    _, tr, va = next(iter(folds.iter_splits()))
    groups = [(name, idx) for name, idx in view.groups.items()]
    params = replace(expert_params(task, len(tr), len(names), "leaf_wise"),
                     n_estimators_cap=SELECTION_TREE_CAP)

    if config.selection_strategy == "cutoff":
        res = fit_booster(X[tr], y[tr], params, task.kind, task.n_classes,
                          X_val=X[va], y_val=y[va], metric=task.metric,
                          budget=sub_budget, seed=config.seed)
        imp = permutation_importance(res.estimator, X[va], y[va], task.metric,
                                     seed=config.seed, groups=groups)
        kept = cutoff_select(imp)
        info["importances"] = imp.as_dict()
    else:
        block = config.forward_block_size or max(1, int(np.ceil(len(groups) / 20)))

        def fit_fn(Xs, ys):
            return fit_booster(Xs, ys, params, task.kind, task.n_classes,
                               budget=sub_budget, seed=config.seed).estimator

        kept, trace = forward_select(X[tr], y[tr], X[va], y[va], fit_fn, block,
                                     task.metric, groups=groups,
                                     seed=config.seed)
        info["ranked"] = trace.ranked
        info["block_scores"] = trace.block_scores
        info["accepted"] = trace.accepted

    if not kept:
        report["warnings"].append("selection kept no features; falling back to all")
        kept = names
    kept = [n for n in names if n in set(kept)]  # restore dataset order
    info["kept"] = kept
    info["elapsed"] = time.monotonic() - start
    report["phases"].append({"name": "selection", "elapsed": info["elapsed"]})
    return kept, info


# ---------------------------------------------------------------------------
# Time utilization


@dataclass
class UtilizedModel:
    """Weighted blend of complete AutoML runs with varying configs/seeds.

    Runs sharing a config are plain-averaged; the per-config averages are
    then combined with coordinate-descent weights.
    """

    version: int
    task: Task
    runs: list[AutoMLModel]
    group_of_run: list[int]
    blend: BlendWeights
    metric_oof: float
    report: dict

    def predict_raw_table(self, raw: RawTable) -> np.ndarray:
        preds = [run.predict_raw_table(raw) for run in self.runs]
        return self._combine(preds)

    def predict_dataset(self, ds: Dataset) -> np.ndarray:
        # each run re-applies its own typing, so go through raw tables only
        raise ConfigError("utilized models predict from raw tables")

    def _combine(self, preds: list[np.ndarray]) -> np.ndarray:
        groups = sorted(set(self.group_of_run))
        averaged = []
        for g in groups:
            members = [p for p, gi in zip(preds, self.group_of_run) if gi == g]
            averaged.append(np.mean(members, axis=0))
        return apply_blend(averaged, self.blend)


def utilized_fit(dataset: Dataset, configs: list[PresetConfig],
                 seeds_per_config: list[list[int]],
                 budget: TimeBudget | None = None) -> AutoMLModel | UtilizedModel:
    """Spend a large budget on multiple preset runs and blend them.

    Configs run in priority order, each over its seed list. After the first
    run, further runs launch only while the remaining budget covers the first
    run's observed duration. A budget that admits only one run returns that
    run unchanged.
    """
    if not configs:
        raise ConfigError("utilized_fit needs at least one config")
    if len(seeds_per_config) != len(configs):
        raise ConfigError("seeds_per_config must align with configs")
    planned = [(ci, seed) for ci, cfg in enumerate(configs)
               for seed in seeds_per_config[ci]]
    if not planned:
        raise ConfigError("no runs planned")
    total = budget.total_seconds if budget is not None else sum(
        c.budget_seconds for c in configs)
    budget = budget or TimeBudget(total)
    slice_seconds = total / len(planned)

    runs: list[AutoMLModel] = []
    group_of_run: list[int] = []
    first_duration: float | None = None
    for ci, seed in planned:
        if first_duration is not None and budget.remaining() < first_duration:
            break
        cfg = replace(configs[ci], seed=seed,
                      budget_seconds=max(min(slice_seconds, budget.remaining()), 1.0))
        t0 = time.monotonic()
        run = fit_preset(dataset, cfg)
        if first_duration is None:
            first_duration = time.monotonic() - t0
        runs.append(run)
        group_of_run.append(ci)

    if len(runs) == 1:
        return runs[0]

    mask = np.ones(dataset.n_rows, dtype=bool)
    for run in runs:
        mask &= run.oof_mask
    groups = sorted(set(group_of_run))
    averaged = []
    for g in groups:
        members = [run.oof for run, gi in zip(runs, group_of_run) if gi == g]
        averaged.append(np.mean(members, axis=0))
    metric = dataset.task.metric if configs[0].metric is None else MetricSpec(configs[0].metric)
    blend = blend_weights([a[mask] for a in averaged], dataset.target[mask], metric)
    oof = apply_blend([a[mask] for a in averaged], blend)
    metric_oof = evaluate(metric, dataset.target[mask], oof)
    report = {"runs": [r.report for r in runs], "blend": blend.to_json(),
              "groups": group_of_run, "metric_oof": metric_oof}
    return UtilizedModel(FORMAT_VERSION, dataset.task, runs, group_of_run,
                         blend, metric_oof, report)


def predict_automl(artifact: AutoMLModel | UtilizedModel, raw: RawTable) -> np.ndarray:
    """Apply stored typing, encoders, models, stack, and blend to new data."""
    return artifact.predict_raw_table(raw)
