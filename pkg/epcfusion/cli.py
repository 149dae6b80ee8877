"""Command-line entry point: ``epcfusion <command> --config run.toml``.

Every command writes its artifacts into the configured output directory
and records them in ``manifest.json``. Failures end with one JSON line on
stderr and the exit code of the error class (2 config, 3 data, 4 training
diverged, 5 internal)."""

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np
from loguru import logger

from .config import RunConfig
from .datahub.features import FeatureBatch
from .datahub.ingest import ingest, load_embedding_table
from .datahub.records import PropertyTable, TEXT_FIELDS
from .datahub.split import Split, joint_stratified_split
from .datahub.synth import SIGNALS, write_synthetic
from .diffcore.checkpoint import file_hash
from .diffcore.gradcheck import grad_check_report
from .errors import EpcFusionError, GradCheckFailed, MissingFile, SchemaMismatch
from .explain import (boundary_permutation, gate_weight_stats, saliency_frame, select_background,
                      shapley_importance, spatial_permutation_report, text_field_occlusion)
from .fusionnet.model import FusionModel, load_model, save_model
from .fusionnet.predictor import Predictor
from .log import configure_logging
from .manifest import record
from .retrofit import ScenarioSpec, compare_scenarios, evaluate_scenario
from .stages import WorkException
from .trainer import loss as losses
from .trainer.ablation import config_name, run_ablation
from .trainer.data import prepare, prepare_with
from .trainer.evaluate import evaluate
from .trainer.loop import train
from .trainer.metrics import subgroup_report

EXPLAIN_KINDS = ('gate', 'shapley', 'occlusion', 'spatial', 'boundary', 'saliency')
SPLIT_FILE = 'split.json'
CHECKPOINT_FILE = 'model.npz'


class Run:
    """Resolved configuration plus the artifacts a command has written."""

    def __init__(self, command: str, config: RunConfig):
        self.command = command
        self.config = config
        self.out = Path(config.paths.output_dir)
        self.artifacts: list[Path] = []

    def path(self, name: str) -> Path:
        path = self.out / name
        self.artifacts.append(path)
        return path

    def write_json(self, name: str, payload) -> Path:
        path = self.path(name)
        path.write_text(json.dumps(payload, indent=1, sort_keys=True, default=_json_default) + '\n',
                        encoding='utf-8')
        return path

    def write_frame(self, name: str, frame) -> Path:
        path = self.path(name)
        frame.to_csv(path, index=False, float_format='%.10g')
        return path

    def finish(self, **extra):
        record(self.out, self.command, self.config.hash(), self.config.seed, self.artifacts, extra or None)


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def run_options(fn):
    """Options shared by every command that reads a run configuration."""
    @click.option('--config', 'config_path', type=click.Path(dir_okay=False, path_type=Path),
                  help='TOML run configuration.')
    @click.option('--seed', type=int, default=None, help='Overrides the config and EPCFUSION_SEED.')
    @click.option('--output-dir', type=click.Path(file_okay=False, path_type=Path), default=None)
    @click.option('--workers', type=int, default=None, help='Worker count for parallel stages.')
    @click.option('--log-level', default='INFO', show_default=True)
    @functools.wraps(fn)
    def wrapper(config_path, seed, output_dir, workers, log_level, **kwargs):
        config = RunConfig.load(config_path).with_overrides(**{
            'seed': seed, 'paths.output_dir': output_dir, 'parallel.workers': workers})
        out = Path(config.paths.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        configure_logging(log_level, out / 'epcfusion.log')
        command = click.get_current_context().info_name
        logger.info("{} (config {}, seed {})", command, config.hash()[:12], config.seed)
        return fn(Run(command, config), **kwargs)
    return wrapper


def _load_table(config: RunConfig) -> PropertyTable:
    config.paths.require('properties', 'boundaries', 'text_embeddings')
    records, report = ingest(config.paths.properties, config.paths.boundaries, config.paths.text_embeddings,
                             config.model.h, config.model.L, config.parallel.workers,
                             config.parallel.multi_process)
    logger.info("linked {} records ({} dropped)", report.linked, report.dropped)
    return PropertyTable.from_records(records, config.model.h, config.model.L)


def _load_split(run: Run, table: PropertyTable) -> Split:
    """The split written by ``split`` when present, otherwise a fresh one."""
    path = run.out / SPLIT_FILE
    if path.exists():
        try:
            split = Split.read(path)
        except (ValueError, KeyError) as e:
            raise SchemaMismatch(f"{path} is not a split file: {e}") from e
        known = set(table.uprns.tolist())
        unknown = [u for u in split.train + split.val + split.test if u not in known]
        if unknown:
            raise SchemaMismatch(f"{path} names {len(unknown)} uprns missing from the data",
                                 first=unknown[0])
        return split
    config = run.config
    split = joint_stratified_split(table, config.bands, (config.split.train, config.split.val, config.split.test),
                                   config.seed)
    split.write(run.path(SPLIT_FILE))
    return split


def _load_checkpoint(run: Run, checkpoint: Path | None):
    path = Path(checkpoint) if checkpoint else run.out / CHECKPOINT_FILE
    if not path.exists():
        raise MissingFile(f"checkpoint not found: {path}", path=path)
    model, scaler, preprocessor, header = load_model(path)
    return model, scaler, preprocessor, file_hash(path)


@click.group()
@click.version_option(package_name='epcfusion')
def cli():
    """Gated multimodal SAP / EI prediction from EPC records, text and footprints."""


@cli.command('ingest')
@run_options
def ingest_command(run: Run):
    """Link the three input files and report what was kept and dropped."""
    config = run.config
    config.paths.require('properties', 'boundaries', 'text_embeddings')
    records, report = ingest(config.paths.properties, config.paths.boundaries, config.paths.text_embeddings,
                             config.model.h, config.model.L, config.parallel.workers,
                             config.parallel.multi_process)
    run.write_json('ingest_report.json', report.to_dict())
    run.finish(linked=report.linked)
    click.echo(f"linked {report.linked} records, dropped {report.dropped}")


@cli.command('split')
@run_options
def split_command(run: Run):
    """Joint-stratified train / val / test split into split.json."""
    config = run.config
    table = _load_table(config)
    split = joint_stratified_split(table, config.bands, (config.split.train, config.split.val, config.split.test),
                                   config.seed)
    split.write(run.path(SPLIT_FILE))
    run.finish(train=len(split.train), val=len(split.val), test=len(split.test))
    click.echo(f"train {len(split.train)} val {len(split.val)} test {len(split.test)}")


@cli.command('train')
@click.option('--epochs', type=int, default=None, help='Overrides optim.max_epochs.')
@click.option('--batch-size', type=int, default=None, help='Overrides optim.batch_size.')
@click.option('--lr', type=float, default=None, help='Overrides optim.lr.')
@run_options
def train_command(run: Run, epochs, batch_size, lr):
    """Train the fusion model; writes model.npz, history.csv and metrics.json."""
    run.config = config = run.config.with_overrides(**{
        'optim.max_epochs': epochs, 'optim.batch_size': batch_size, 'optim.lr': lr})
    table = _load_table(config)
    data = prepare(table, _load_split(run, table))
    model = FusionModel(config.model, data.preprocessor.vocab_sizes, config.seed)
    report = train(model, data, config)
    save_model(run.path(CHECKPOINT_FILE), model, data.scaler, data.preprocessor, config.hash(), config.seed,
               {'best_epoch': report.best_epoch})
    run.write_frame('history.csv', report.history_frame())
    run.write_json('train_report.json', report.to_dict())
    run.write_json('metrics.json', {'test': report.test_metrics, 'best_epoch': report.best_epoch,
                                    'best_val_loss': report.best_val_loss})
    run.finish(best_epoch=report.best_epoch)
    click.echo(f"best epoch {report.best_epoch}, val loss {report.best_val_loss:.6f}")


@cli.command('evaluate')
@click.option('--checkpoint', type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option('--group', 'groups', multiple=True, default=('property_type', 'built_form'), show_default=True,
              help='Categorical field for a subgroup report; repeatable.')
@run_options
def evaluate_command(run: Run, checkpoint, groups):
    """Test-set metrics, band accuracy, confusion matrices and subgroups."""
    config = run.config
    model, scaler, preprocessor, digest = _load_checkpoint(run, checkpoint)
    table = _load_table(config)
    test = table.select_uprns(_load_split(run, table).test)
    data = prepare_with(test, preprocessor, scaler)
    result = evaluate(Predictor(model, scaler), data.features['test'], test, config.bands)
    payload = result.to_dict()
    pred = result.predictions[['sap_pred', 'ei_pred']].to_numpy()
    payload['subgroups'] = {}
    for key in groups:
        sub = subgroup_report(test.column(key), pred, test.targets, config.bands, key,
                              config.explain.min_group_size)
        run.write_frame(f'subgroup_{key}.csv', sub.frame)
        payload['subgroups'][key] = sub.spread
    run.write_json('evaluation.json', payload)
    run.write_frame('predictions.csv', result.predictions)
    run.write_frame(f'confusion_{config_name(model.modalities)}.csv', result.confusion)
    run.finish(checkpoint=digest)
    click.echo(f"Mean_MAE {result.metrics.mean_mae:.4f}")


@cli.command('ablate')
@run_options
def ablate_command(run: Run):
    """Train and test all seven modality subsets on the same split."""
    config = run.config
    table = _load_table(config)
    result = run_ablation(prepare(table, _load_split(run, table)), config)
    run.write_frame('ablation.csv', result.table)
    for name, frame in result.confusion.items():
        run.write_frame(f'confusion_{name}.csv', frame)
    if result.failures:
        run.write_json('ablation_failures.json', result.failures)
    run.finish(failures=len(result.failures))
    click.echo(result.table.to_string(index=False))


@cli.command('explain')
@click.argument('kind', type=click.Choice(EXPLAIN_KINDS))
@click.option('--checkpoint', type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option('--samples', type=int, default=None, help='Samples to explain (shapley, saliency).')
@click.option('--group', default='property_type', show_default=True, help='Grouping for gate weights.')
@run_options
def explain_command(run: Run, kind, checkpoint, samples, group):
    """Attribution analyses over the test split."""
    config = run.config
    seed = config.seed
    model, scaler, preprocessor, digest = _load_checkpoint(run, checkpoint)
    table = _load_table(config)
    split = _load_split(run, table)
    test = table.select_uprns(split.test)
    features = preprocessor.transform(test)
    predict = Predictor(model, scaler)

    if kind == 'gate':
        stats = gate_weight_stats(model, features, config.explain.histogram_bin, test.column(group), group)
        run.write_frame('gate_summary.csv', stats.summary)
        run.write_frame('gate_histogram.csv', stats.histogram)
        run.write_frame(f'gate_{group}.csv', stats.groups)
    elif kind == 'shapley':
        train_features = preprocessor.transform(table.select_uprns(split.train))
        background = select_background(train_features, config.explain.background, seed)
        chosen = _choose(len(features), samples or config.explain.shapley_samples, seed)
        report = shapley_importance(predict, features.take(chosen), train_features.take(background), seed,
                                    digest, config.parallel.workers, config.parallel.multi_process,
                                    f"{len(background)} train rows, seed {seed}")
        report.write_csv(run.path('shapley.csv'))
    elif kind == 'occlusion':
        config.paths.require('mask_embeddings')
        masks = load_embedding_table(config.paths.mask_embeddings, config.model.h, 'field')
        report = text_field_occlusion(predict, features, masks, TEXT_FIELDS, seed, digest)
        report.write_csv(run.path('text_occlusion.csv'))
    elif kind == 'spatial':
        report = spatial_permutation_report(predict, features, seed, digest)
        report.write_csv(run.path('spatial_permutation.csv'))
    elif kind == 'boundary':
        result = boundary_permutation(predict, features, test.targets, seed, digest)
        run.write_json('boundary_permutation.json', result.to_dict())
    else:
        for i in _choose(len(features), samples or config.explain.saliency_samples, seed):
            uprn = str(test.uprns[i])
            report = saliency_frame(model, scaler, features.take([i]), uprn, seed, digest)
            report.write_csv(run.path(f'saliency_{uprn}.csv'))
    run.finish(kind=kind, checkpoint=digest)
    click.echo(f"explain {kind}: {len(run.artifacts)} file(s) in {run.out}")


def _choose(n: int, k: int, seed: int) -> np.ndarray:
    if n == 0:
        return np.arange(0)
    if k >= n:
        return np.arange(n)
    return np.sort(np.random.default_rng([seed, 2]).choice(n, k, replace=False))


@cli.command('scenario')
@click.argument('files', nargs=-1, required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option('--checkpoint', type=click.Path(dir_okay=False, path_type=Path), default=None)
@run_options
def scenario_command(run: Run, files, checkpoint):
    """Project one or more retrofit scenarios over every linked property."""
    config = run.config
    specs = [ScenarioSpec.from_json(f) for f in files]
    replacements = {}
    if any(s.text_replacements for s in specs):
        config.paths.require('replacement_embeddings')
        replacements = load_embedding_table(config.paths.replacement_embeddings, config.model.h, 'key')
    model, scaler, preprocessor, digest = _load_checkpoint(run, checkpoint)
    table = _load_table(config)
    predict = Predictor(model, scaler)
    results = []
    for spec in specs:
        result = evaluate_scenario(predict, preprocessor, table, spec, replacements)
        result.write_csv(run.path(f'scenario_report_{spec.name}.csv'))
        result.write_geojson(run.path(f'scenario_{spec.name}.geojson'))
        run.write_json(f'scenario_summary_{spec.name}.json',
                       {'aggregates': result.aggregates, 'exceptions': result.exceptions})
        results.append(result)
        click.echo(f"{spec.name}: {result.aggregates['n_eligible']} eligible, "
                   f"total cost reduction {result.aggregates['total_d_cost']:.2f}")
    run.write_frame('scenario_comparison.csv', compare_scenarios(results))
    run.finish(checkpoint=digest, scenarios=[s.name for s in specs])


def gradcheck_batch(config: RunConfig, n: int, seed: int) -> tuple[FeatureBatch, list[int]]:
    """Random model inputs of the configured shapes; every row keeps at
    least one text field present."""
    rng = np.random.default_rng(seed)
    h, L = config.model.h, config.model.L
    vocab_sizes = [4] * 5
    text_mask = (rng.random((n, len(TEXT_FIELDS))) < 0.7).astype(np.float64)
    text_mask[:, 0] = 1.0
    batch = FeatureBatch(rng.integers(0, 4, (n, 5)), rng.normal(size=(n, 4)),
                         rng.normal(size=(n, len(TEXT_FIELDS), h)), text_mask,
                         rng.normal(scale=0.5, size=(n, L, 2)), rng.normal(size=(n, 3)))
    return batch, vocab_sizes


@cli.command('gradcheck')
@click.option('--samples', type=int, default=4, show_default=True)
@click.option('--coords', type=int, default=20, show_default=True, help='Coordinates checked per parameter.')
@click.option('--tolerance', type=float, default=1e-4, show_default=True)
@run_options
def gradcheck_command(run: Run, samples, coords, tolerance):
    """Reverse-mode gradients of the full loss against central differences."""
    config = run.config
    batch, vocab_sizes = gradcheck_batch(config, samples, config.seed)
    model = FusionModel(config.model, vocab_sizes, config.seed).eval()
    scores = np.random.default_rng([config.seed, 3]).uniform(1, 100, (samples, 2))
    labels = losses.band_labels(scores, config.bands)
    y_norm = (scores - 50.0) / 20.0

    def objective():
        return losses.total_loss(model(batch), y_norm, labels, config.loss).total

    result = grad_check_report(objective, model.parameters(), max_coords=coords, seed=config.seed)
    run.write_json('gradcheck.json', {'max_relative_error': result.max_error, 'checked': result.checked,
                                      'kinks': result.kinks, 'worst': result.worst, 'tolerance': tolerance})
    run.finish(passed=result.passed(tolerance))
    click.echo(f"max relative error {result.max_error:.3e} over {result.checked} coordinates "
               f"({result.kinks} at kinks)")
    if not result.passed(tolerance):
        raise GradCheckFailed(f"max relative error {result.max_error:.3e} exceeds {tolerance:g}",
                              worst=result.worst)


@cli.command('synth')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option('--n', type=int, default=2000, show_default=True)
@click.option('--h', type=int, default=64, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--signal', 'signals', multiple=True, type=click.Choice(SIGNALS), default=SIGNALS,
              show_default=True, help='Modalities that carry signal; repeatable.')
@click.option('--log-level', default='INFO', show_default=True)
def synth_command(out_dir, n, h, seed, signals, log_level):
    """Write a synthetic dataset with known coefficients and a matching config."""
    configure_logging(log_level)
    paths = write_synthetic(out_dir, n, h, seed, tuple(signals))
    config = RunConfig.load(paths['config'])
    record(Path(out_dir), 'synth', config.hash(), seed, list(paths.values()), {'n': n, 'h': h})
    click.echo(f"wrote {n} records to {out_dir}")


def _report_failure(payload: dict):
    click.echo(json.dumps(payload, sort_keys=True), err=True)


def main(argv=None):
    try:
        code = cli.main(args=argv, prog_name='epcfusion', standalone_mode=False)
    except click.ClickException as e:
        e.show()
        _report_failure({'error': type(e).__name__, 'kind': 'config', 'message': e.format_message(),
                         'exit_code': 2})
        sys.exit(2)
    except click.Abort:
        _report_failure({'error': 'Abort', 'kind': 'internal', 'message': 'aborted', 'exit_code': 5})
        sys.exit(5)
    except (EpcFusionError, WorkException) as e:
        error = e.orig_exc if isinstance(e, WorkException) else e
        if not isinstance(error, EpcFusionError):
            logger.opt(exception=error).error("internal error")
            _report_failure({'error': type(error).__name__, 'kind': 'internal', 'message': str(error),
                             'exit_code': 5})
            sys.exit(5)
        logger.error("{}: {}", type(error).__name__, error.message)
        _report_failure(error.to_dict())
        sys.exit(error.exit_code)
    except Exception as e:
        logger.exception("internal error")
        _report_failure({'error': type(e).__name__, 'kind': 'internal', 'message': str(e), 'exit_code': 5})
        sys.exit(5)
    sys.exit(code if isinstance(code, int) else 0)


if __name__ == '__main__':
    main()
