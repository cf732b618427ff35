"""Pipeline stages: prepare, optimize, annotate, adjudicate, evaluate, agreement, report.

Each stage reads its inputs from the workspace, checks them against their
manifests and writes its own artifacts with a manifest linking the input hashes.
"""

import asyncio
import json
from pathlib import Path
from typing import Mapping, Sequence

import pandas as pd
from loguru import logger

from opinion_forge.adjudication import (
    AdjudicationMode,
    LlmAdjudicator,
    adjudicator_id,
    count_notes,
    group_by_sentence,
    run_adjudication,
)
from opinion_forge.annotators import Annotator, rank_annotators, run_annotator
from opinion_forge.corpora import (
    DatasetSplit,
    DevPartition,
    RunManifest,
    SplitName,
    load_split,
    partition_dev,
    read_run,
    write_run,
)
from opinion_forge.errors import ConfigError, IntegrityError, MissingArtifact, UsageError
from opinion_forge.gateway import Backend, Gateway, MockBackend, OpenAIBackend, ResponseCache
from opinion_forge.metrics import agreement_suite, annotations_by_id, element_report, error_cases
from opinion_forge.metrics.reports import (
    adjudication_gain,
    agreement_frame,
    agreement_table,
    element_table,
    joint_table,
    metrics_frame,
    render_text,
    write_table,
)
from opinion_forge.opinions import AnnotationRecord, ParseStatus
from opinion_forge.pipeline.config import ADJUDICATOR, PipelineConfig
from opinion_forge.pipeline.workspace import Workspace, manifest_path
from opinion_forge.prompts import IclSelectionReport, PromptProgram, program_hash, sample_demos, select_icl_count
from opinion_forge.utils import atomic_write_text, sha256_file, write_json


METRICS_DTYPES = {"dataset": str, "annotator": str, "projection": str}
AGREEMENT_DTYPES = {"dataset": str, "element": str}


def build_backend(config: PipelineConfig) -> Backend:
    if config.backend == "mock":
        if config.mock_fixture is None or not config.mock_fixture.is_file():
            raise ConfigError(f"mock fixture not found: {config.mock_fixture}")
        return MockBackend.from_fixture(config.mock_fixture)
    return OpenAIBackend()


def build_gateway(config: PipelineConfig, backend: Backend | None = None) -> Gateway:
    return Gateway(
        backend or build_backend(config),
        cache=ResponseCache(config.cache_dir),
        max_inflight=config.max_inflight,
    )


def _manifest(config: PipelineConfig, stage: str, annotator_id: str = "", **fields) -> RunManifest:
    return RunManifest(
        stage=stage,
        dataset=config.dataset.name,
        task=str(config.task),
        annotator_id=annotator_id,
        seed=config.seed,
        **fields,
    )


def load_dataset(config: PipelineConfig, name: SplitName) -> DatasetSplit:
    path = config.dataset.dev if name is SplitName.DEV else config.dataset.test
    if not Path(path).is_file():
        raise ConfigError(f"dataset file not found: {path}")
    return load_split(path, config.task, config.dataset.name, name)


def load_partition(config: PipelineConfig, ws: Workspace) -> tuple[DevPartition, RunManifest]:
    data, manifest = ws.read_json(ws.partition, "partition", "run prepare first")
    if data["seed"] != config.seed:
        raise IntegrityError(f"the partition was prepared with seed {data['seed']}, not {config.seed}; rerun prepare")
    dev = load_dataset(config, SplitName.DEV)
    if sha256_file(config.dataset.dev) != manifest.inputs["dev"]:
        raise IntegrityError(f"{config.dataset.dev} changed since prepare; rerun prepare")
    by_id = {e.sentence.id: e for e in dev.entries}
    partition = DevPartition(
        icl_pool=tuple(by_id[i] for i in data["icl_pool"]),
        eval_half=tuple(by_id[i] for i in data["eval_half"]),
        seed=data["seed"],
    )
    return partition, manifest


def load_test(config: PipelineConfig, partition_manifest: RunManifest) -> DatasetSplit:
    test = load_dataset(config, SplitName.TEST)
    if sha256_file(config.dataset.test) != partition_manifest.inputs["test"]:
        raise IntegrityError(f"{config.dataset.test} changed since prepare; rerun prepare")
    return test


def prepare(config: PipelineConfig) -> DevPartition:
    """Parse both splits and persist the seeded dev partition."""
    ws = Workspace(config)
    dev = load_dataset(config, SplitName.DEV)
    test = load_dataset(config, SplitName.TEST)
    partition = partition_dev(dev.entries, config.seed)

    sha = write_json(ws.partition, {
        "dataset": config.dataset.name,
        "task": str(config.task),
        "seed": config.seed,
        "icl_pool": partition.pool_ids,
        "eval_half": partition.eval_ids,
    })
    _manifest(
        config,
        "prepare",
        inputs={"dev": sha256_file(config.dataset.dev), "test": sha256_file(config.dataset.test)},
        output_sha256=sha,
        extra={"n_dev": len(dev), "n_test": len(test), "n_pool": len(partition.icl_pool), "n_eval": len(partition.eval_half)},
    ).write(manifest_path(ws.partition))
    logger.info(
        f"prepare: {config.dataset.name} dev {len(dev)} -> pool {len(partition.icl_pool)} / eval {len(partition.eval_half)}, "
        f"test {len(test)}; wrote {ws.partition}"
    )
    return partition


def build_annotator(config: PipelineConfig, annotator_id: str, gateway: Gateway) -> Annotator:
    settings = config.annotator(annotator_id)
    return Annotator(
        annotator_id=annotator_id,
        task=config.task,
        params=settings.chat_params(),
        gateway=gateway,
        instruction=settings.instruction,
    )


def _persist_selection(
    config: PipelineConfig,
    ws: Workspace,
    owner: str,
    report: IclSelectionReport,
    program: PromptProgram,
    model: str,
    inputs: Mapping[str, str],
) -> None:
    selection = ws.selection(owner)
    sha = write_json(selection, report.to_dict())
    _manifest(
        config,
        "optimize",
        report.annotator_id,
        model=model,
        icl_k=report.chosen_k,
        prompt_hash=program_hash(program),
        inputs=dict(inputs),
        output_sha256=sha,
        extra={"scores": {str(k): f1 for k, f1 in sorted(report.scores.items())}, "demo_ids": program.demo_ids},
    ).write(manifest_path(selection))

    eval_run = ws.eval_half_run(owner)
    run_sha = write_run(report.records[report.chosen_k], eval_run)
    _manifest(
        config,
        "optimize",
        report.annotator_id,
        model=model,
        icl_k=report.chosen_k,
        prompt_hash=program_hash(program),
        inputs={"selection": sha},
        output_sha256=run_sha,
    ).write(manifest_path(eval_run))
    logger.info(f"optimize: {report.annotator_id} chose k={report.chosen_k} (F1 {report.best_f1:.4f}); wrote {selection}")


def update_ranking(config: PipelineConfig, ws: Workspace) -> list[str]:
    """Rank every annotator optimized so far by its eval-half F1."""
    scores, inputs = {}, {}
    for annotator_id in config.annotator_ids:
        if not ws.selection(annotator_id).is_file():
            continue
        data, manifest = ws.read_json(ws.selection(annotator_id), "selection", "")
        scores[annotator_id] = IclSelectionReport.from_dict(data).best_f1
        inputs[annotator_id] = manifest.output_sha256
    order = rank_annotators(scores)
    complete = len(scores) == len(config.annotators)
    sha = write_json(ws.ranking, {"scores": scores, "order": order, "complete": complete})
    _manifest(config, "rank", inputs=inputs, output_sha256=sha).write(manifest_path(ws.ranking))
    logger.info(f"ranking: {' > '.join(order)}{'' if complete else ' (incomplete)'}")
    return order


def load_ranking(config: PipelineConfig, ws: Workspace) -> list[str]:
    hint = "run optimize for every annotator"
    data, _ = ws.read_json(ws.ranking, "ranking", hint)
    if not data["complete"] or set(data["order"]) != set(config.annotators):
        raise MissingArtifact(f"missing ranking: not every configured annotator is ranked ({hint})")
    return data["order"]


def annotator_order(config: PipelineConfig, ws: Workspace) -> list[str]:
    """A1..Ak when a complete ranking exists, otherwise the sorted annotator ids."""
    try:
        return load_ranking(config, ws)
    except MissingArtifact:
        return config.annotator_ids


def build_adjudicator(
    config: PipelineConfig,
    ws: Workspace,
    gateway: Gateway,
    candidates: Mapping[str, Sequence[AnnotationRecord]] | None = None,
) -> LlmAdjudicator:
    """The adjudicator runs A1's model unless [adjudication] names another one."""
    best = config.annotator(load_ranking(config, ws)[0])
    overrides = {
        key: value
        for key, value in {"model": config.adjudication.model, "endpoint": config.adjudication.endpoint}.items()
        if value is not None
    }
    settings = best.model_copy(update=overrides)
    return LlmAdjudicator(
        config.task, settings.chat_params(), gateway, candidates=candidates or {}, n_annotators=len(config.annotators)
    )


def adjudicator_program(
    config: PipelineConfig,
    ws: Workspace,
    adjudicator: LlmAdjudicator,
    partition: DevPartition,
    partition_manifest: RunManifest,
) -> tuple[PromptProgram, dict[str, str]]:
    selection = ws.selection(ADJUDICATOR)
    inputs = {}
    if selection.is_file():
        data, manifest = ws.read_json(selection, "adjudicator selection", "")
        current = {"partition": partition_manifest.output_sha256}
        for annotator_id in config.annotator_ids:
            eval_manifest = manifest_path(ws.eval_half_run(annotator_id))
            if eval_manifest.is_file():
                current[f"eval_half:{annotator_id}"] = RunManifest.read(eval_manifest).output_sha256
        manifest.verify_inputs(current, selection, f"rerun optimize --annotator {ADJUDICATOR}")
        k = data["chosen_k"]
        inputs["adjudicator_selection"] = manifest.output_sha256
    else:
        k = config.adjudication.icl_k
        logger.info(f"adjudicate: no optimized adjudication prompt, using icl_k={k}")
    return adjudicator.program_for(sample_demos(partition.icl_pool, k, config.seed)), inputs


def optimize(config: PipelineConfig, annotator_id: str, backend: Backend | None = None) -> IclSelectionReport:
    """Pick the ICL count of one annotator, or of the adjudicator, on the eval half."""
    if annotator_id == ADJUDICATOR:
        return optimize_adjudicator(config, backend)

    config.annotator(annotator_id)
    ws = Workspace(config)
    partition, partition_manifest = load_partition(config, ws)
    annotator = build_annotator(config, annotator_id, build_gateway(config, backend))
    report = asyncio.run(select_icl_count(annotator, partition, config.icl_counts, seed=config.seed))

    program = annotator.program_for(sample_demos(partition.icl_pool, report.chosen_k, config.seed))
    _persist_selection(
        config, ws, annotator_id, report, program, annotator.params.model,
        {"partition": partition_manifest.output_sha256},
    )
    update_ranking(config, ws)
    return report


def _eval_half_runs(config: PipelineConfig, ws: Workspace) -> tuple[list[list[AnnotationRecord]], dict[str, str]]:
    runs, inputs = [], {}
    for annotator_id in load_ranking(config, ws):
        path = ws.eval_half_run(annotator_id)
        manifest = ws.require(path, f"eval-half run of {annotator_id}", f"run optimize --annotator {annotator_id}")
        runs.append(read_run(path))
        inputs[f"eval_half:{annotator_id}"] = manifest.output_sha256
    return runs, inputs


def optimize_adjudicator(config: PipelineConfig, backend: Backend | None = None) -> IclSelectionReport:
    """Select the adjudication prompt's ICL count, adjudicating the annotators' eval-half runs."""
    ws = Workspace(config)
    partition, partition_manifest = load_partition(config, ws)
    runs, inputs = _eval_half_runs(config, ws)
    if len(runs) < 2:
        raise UsageError(f"LLM adjudication needs at least two annotators, got {len(runs)}")

    candidates = group_by_sentence(partition.eval_half, runs)
    adjudicator = build_adjudicator(config, ws, build_gateway(config, backend), candidates)
    report = asyncio.run(select_icl_count(adjudicator, partition, config.icl_counts, seed=config.seed))

    program = adjudicator.program_for(sample_demos(partition.icl_pool, report.chosen_k, config.seed))
    _persist_selection(
        config, ws, ADJUDICATOR, report, program, adjudicator.params.model,
        {"partition": partition_manifest.output_sha256, **inputs},
    )
    return report


def annotate(config: PipelineConfig, annotator_id: str, backend: Backend | None = None) -> list[AnnotationRecord]:
    """Annotate the test split with the annotator's selected prompt program."""
    settings = config.annotator(annotator_id)
    ws = Workspace(config)
    partition, partition_manifest = load_partition(config, ws)
    data, selection_manifest = ws.read_json(
        ws.selection(annotator_id), f"selection for {annotator_id}", f"run optimize --annotator {annotator_id}"
    )
    selection_manifest.verify_inputs(
        {"partition": partition_manifest.output_sha256},
        ws.selection(annotator_id),
        f"rerun optimize --annotator {annotator_id}",
    )
    report = IclSelectionReport.from_dict(data)
    test = load_test(config, partition_manifest)

    annotator = build_annotator(config, annotator_id, build_gateway(config, backend))
    annotator.program = annotator.program_for(sample_demos(partition.icl_pool, report.chosen_k, config.seed))
    path = ws.test_run(annotator_id)
    records = asyncio.run(run_annotator(annotator, test.entries, path))

    _manifest(
        config,
        "annotate",
        annotator_id,
        model=settings.model,
        icl_k=report.chosen_k,
        prompt_hash=program_hash(annotator.program),
        inputs={
            "partition": partition_manifest.output_sha256,
            "selection": selection_manifest.output_sha256,
            "test": partition_manifest.inputs["test"],
        },
        output_sha256=sha256_file(path),
        extra={
            "chosen_k": report.chosen_k,
            "selection_scores": {str(k): f1 for k, f1 in sorted(report.scores.items())},
            "eval_f1": report.best_f1,
            "demo_ids": annotator.program.demo_ids,
            "parse_status": {str(s): sum(r.parse_status is s for r in records) for s in ParseStatus},
        },
    ).write(manifest_path(path))
    return records


def require_annotator_run(
    ws: Workspace, annotator_id: str, partition_manifest: RunManifest
) -> tuple[list[AnnotationRecord], RunManifest]:
    """A test run, checked against its own hash and the current partition, test split and selection."""
    path = ws.test_run(annotator_id)
    hint = f"run annotate --annotator {annotator_id}"
    manifest = ws.require(path, f"run for {annotator_id}", hint)
    current = {"partition": partition_manifest.output_sha256, "test": partition_manifest.inputs["test"]}
    selection = ws.selection(annotator_id)
    if selection.is_file():
        current["selection"] = ws.require(selection, f"selection for {annotator_id}", "").output_sha256
    manifest.verify_inputs(current, path, hint)
    return read_run(path), manifest


def annotator_runs(
    config: PipelineConfig, ws: Workspace, partition_manifest: RunManifest
) -> tuple[list[str], list[list[AnnotationRecord]], dict[str, str]]:
    order = annotator_order(config, ws)
    runs, inputs = [], {}
    for annotator_id in order:
        records, manifest = require_annotator_run(ws, annotator_id, partition_manifest)
        runs.append(records)
        inputs[f"run:{annotator_id}"] = manifest.output_sha256
    return order, runs, inputs


def adjudicate(
    config: PipelineConfig,
    mode: AdjudicationMode | str | None = None,
    backend: Backend | None = None,
) -> list[AnnotationRecord]:
    """Combine the annotators' test runs into one adjudicated run."""
    mode = AdjudicationMode(mode or config.adjudication.mode)
    ws = Workspace(config)
    partition, partition_manifest = load_partition(config, ws)
    test = load_test(config, partition_manifest)
    order, runs, inputs = annotator_runs(config, ws, partition_manifest)

    adjudicator, model, icl_k, prompt = None, None, None, None
    if mode is AdjudicationMode.LLM:
        if len(runs) < 2:
            raise UsageError(f"LLM adjudication needs at least two annotators, got {len(runs)}")
        adjudicator = build_adjudicator(config, ws, build_gateway(config, backend))
        adjudicator.program, selection_inputs = adjudicator_program(config, ws, adjudicator, partition, partition_manifest)
        inputs.update(selection_inputs)
        model, icl_k, prompt = adjudicator.params.model, adjudicator.program.k, program_hash(adjudicator.program)

    path = ws.adjudicated_run(mode)
    records = asyncio.run(run_adjudication(test.entries, runs, mode, path, adjudicator))
    _manifest(
        config,
        "adjudicate",
        adjudicator_id(model, mode),
        model=model,
        icl_k=icl_k,
        prompt_hash=prompt,
        inputs=inputs,
        output_sha256=sha256_file(path),
        extra={"mode": str(mode), "annotator_order": order, **count_notes(records)},
    ).write(manifest_path(path))
    return records


def evaluate(config: PipelineConfig) -> pd.DataFrame:
    """Score every annotator run and every adjudicated run against the test gold."""
    ws = Workspace(config)
    partition_manifest = ws.require(ws.partition, "partition", "run prepare first")
    test = load_test(config, partition_manifest)
    gold = test.gold_by_id()

    runs: dict[str, list[AnnotationRecord]] = {}
    inputs = {}
    for annotator_id in config.annotator_ids:
        runs[annotator_id], manifest = require_annotator_run(ws, annotator_id, partition_manifest)
        inputs[f"run:{annotator_id}"] = manifest.output_sha256

    upstream = dict(inputs)
    adjudicator_selection = ws.selection(ADJUDICATOR)
    if adjudicator_selection.is_file():
        upstream["adjudicator_selection"] = ws.require(adjudicator_selection, "adjudicator selection", "").output_sha256
    for path in ws.adjudicated_runs():
        hint = f"rerun adjudicate --mode {path.parent.name.removeprefix(ADJUDICATOR + '-')}"
        manifest = ws.require(path, f"run {path.parent.name}", hint)
        manifest.verify_inputs(upstream, path, hint)
        runs[manifest.annotator_id] = read_run(path)
        inputs[f"run:{manifest.annotator_id}"] = manifest.output_sha256

    rows, cases = [], []
    for name, records in runs.items():
        pred = annotations_by_id(records)
        rows += element_report(gold, pred, config.task, config.eval.projections, dataset=config.dataset.name, annotator=name)
        cases += [{"annotator": name, **case} for case in error_cases(gold, pred, config.task)]

    frame = metrics_frame(rows)
    csv_path, txt_path = write_table(frame, ws.metrics.with_suffix(""))
    atomic_write_text(ws.errors, "".join(json.dumps(c, ensure_ascii=False, sort_keys=True) + "\n" for c in cases))
    _manifest(
        config,
        "evaluate",
        inputs=inputs,
        output_sha256=sha256_file(csv_path),
        extra={"errors_sha256": sha256_file(ws.errors), "n_error_cases": len(cases)},
    ).write(manifest_path(csv_path))
    logger.info(f"evaluate: {len(runs)} runs, {len(rows)} rows; wrote {csv_path}, {txt_path}, {ws.errors}")
    return frame


def agreement(config: PipelineConfig) -> pd.DataFrame:
    """Krippendorff's alpha between the annotators' test runs, before adjudication."""
    ws = Workspace(config)
    partition_manifest = ws.require(ws.partition, "partition", "run prepare first")
    test = load_test(config, partition_manifest)
    _, runs, inputs = annotator_runs(config, ws, partition_manifest)

    rows = agreement_suite(runs, test.sentences, config.task, dataset=config.dataset.name)
    frame = agreement_frame(rows)
    csv_path, txt_path = write_table(frame, ws.agreement.with_suffix(""))
    _manifest(config, "agreement", inputs=inputs, output_sha256=sha256_file(csv_path)).write(manifest_path(csv_path))
    unlocatable = sum(r.unlocatable for r in rows)
    if unlocatable:
        logger.warning(f"agreement: {unlocatable} terms could not be located in their sentence")
    logger.info(f"agreement: wrote {csv_path}, {txt_path}")
    return frame


def current_runs(root: Path) -> dict[str, str | None]:
    """Output hash of every test run of one dataset, keyed like the evaluate inputs."""
    current = {}
    for manifest_file in sorted(root.glob("*/test.manifest.json")):
        manifest = RunManifest.read(manifest_file)
        current[f"run:{manifest.annotator_id}"] = manifest.output_sha256
    return current


def _collect(
    ws: Workspace, name: str, dtypes: Mapping[str, type], stage: str, exact: bool
) -> pd.DataFrame | None:
    """One table over every dataset of the workdir that has it."""
    frames = []
    for root in sorted(p for p in ws.root.parent.iterdir() if p.is_dir()):
        path = root / name
        if path.is_file():
            recorded = ws.require(path, name, "")
            recorded.verify_inputs(current_runs(root), path, f"rerun {stage} for {root.name}", exact=exact)
            frames.append(pd.read_csv(path, dtype=dtypes, keep_default_na=False))
    return pd.concat(frames, ignore_index=True) if frames else None


def report(config: PipelineConfig) -> dict[str, pd.DataFrame]:
    """Render the report tables from the metric files alone."""
    ws = Workspace(config)
    ws.require(ws.metrics, "metrics", "run evaluate first")
    metrics = _collect(ws, ws.metrics.name, METRICS_DTYPES, "evaluate", exact=True)

    tables = {
        "joint": joint_table(metrics),
        "elements": element_table(metrics),
        "gain": adjudication_gain(metrics),
    }
    agreement_rows = _collect(ws, ws.agreement.name, AGREEMENT_DTYPES, "agreement", exact=False)
    if agreement_rows is None:
        logger.warning("report: no agreement table found, run agreement to include alpha")
    else:
        tables["agreement"] = agreement_table(agreement_rows)

    for name, table in tables.items():
        write_table(table, ws.report_dir / name)
    summary = "\n".join(f"== {name} ==\n{render_text(table)}" for name, table in tables.items())
    atomic_write_text(ws.report_dir / "report.txt", summary)
    logger.info(f"report: wrote {len(tables)} tables to {ws.report_dir}")
    return tables
