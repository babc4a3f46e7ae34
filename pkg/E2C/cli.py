#!/usr/bin/env python

"""Command line of the E2C package: spreads, forest training, evaluation, feature importance and synthetic data"""

import argparse
import logging
import sys
import time

import numpy as np
from astropy.table import MaskedColumn, Table

from E2C import dataset, evaluation, forest, importance, metrics, synth
from E2C.config import RunConfig, load_config, save_config
from E2C.exceptions import DataFormatError, DomainError, E2CException, PipelineError
from E2C.output_directory import output_directory
from E2C.table_io import read_csv, write_csv

log = logging.getLogger(__name__)

# RunConfig fields that a flag of the same destination overrides
OVERRIDES = ('recovery', 'global_recovery', 'lambda_', 'maturity', 'n_trees', 'n_features', 'max_depth',
             'firm_fraction', 'date_fraction', 'trim_fraction', 'seed', 'workers', 'out_dir')

SWEEP_PARAMETERS = ('n_trees', 'n_features', 'max_depth')

SUBSETS = ('all', 'in', 'out')

# Split settings stored in the forest file, so that evaluate and importance rebuild the same training matrix
SPLIT_CARDS = (('FIRMFRAC', 'firm_fraction', 'Fraction of firms removed from the training set'),
               ('DATEFRAC', 'date_fraction', 'Fraction of dates removed from the training set'),
               ('SPLITSED', 'seed', 'Seed of the in/out-of-sample split'))

MODEL_CARDS = (('RECOVERY', 'recovery', 'Recovery rate R'),
               ('GLOBREC', 'global_recovery', 'Global recovery rate'),
               ('LAMBDA', 'lambda_', 'Barrier uncertainty lambda'),
               ('MATURITY', 'maturity', 'Maturity T (years)'))


def _common_arguments():

    common = argparse.ArgumentParser(add_help=False)

    common.add_argument("--config", help="Configuration file of 'key = value' lines", default=None)
    common.add_argument("--seed", help="Master seed", type=int, default=None)
    common.add_argument("--workers", help="Number of concurrent workers (-1 uses every core)", type=int, default=None)
    common.add_argument("--out-dir", dest='out_dir', help="Directory receiving the outputs", default=None)

    common.add_argument("--recovery", help="Recovery rate R", type=float, default=None)
    common.add_argument("--global-recovery", dest='global_recovery', help="Global recovery rate", type=float,
                        default=None)
    common.add_argument("--lambda", dest='lambda_', help="Barrier uncertainty", type=float, default=None)
    common.add_argument("--maturity", help="Maturity in years", type=float, default=None)

    common.add_argument("--n-trees", dest='n_trees', help="Number of trees B", type=int, default=None)
    common.add_argument("--n-features", dest='n_features', help="Features drawn at each node m", type=int,
                        default=None)
    common.add_argument("--max-depth", dest='max_depth', help="Maximum depth of the trees", type=int, default=None)

    common.add_argument("--firm-fraction", dest='firm_fraction', help="Fraction of firms kept out of sample",
                        type=float, default=None)
    common.add_argument("--date-fraction", dest='date_fraction', help="Fraction of dates kept out of sample",
                        type=float, default=None)
    common.add_argument("--trim-fraction", dest='trim_fraction', help="Fraction trimmed at each end in bucket tables",
                        type=float, default=None)

    return common


def build_parser():

    parser = argparse.ArgumentParser(prog='e2c', description='Equity-to-credit spreads and their random forest')

    parser.add_argument("--loglevel", help="Level of log detail (DEBUG, INFO, WARNING)", default='info')
    parser.add_argument("--logfile", help="Also write the log to this file", default=None)

    common = _common_arguments()

    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    spread = commands.add_parser('spread', parents=[common], help='Compute the E2C and CreditGrades spreads')
    spread.add_argument("input", help="Firm-snapshot CSV")
    spread.add_argument("--output", help="Output CSV (default: <out-dir>/spreads.csv)", default=None)

    train = commands.add_parser('train', parents=[common], help='Train a forest on an in-sample split')
    train.add_argument("dataset", help="Firm-snapshot CSV")
    train.add_argument("--repeats", help="Number of splits (seeds seed, seed + 1, ...)", type=int, default=1)

    evaluate = commands.add_parser('evaluate', parents=[common], help='Compare the CDS with its approximations')
    evaluate.add_argument("forest", help="Forest file written by train")
    evaluate.add_argument("dataset", help="Firm-snapshot CSV")
    evaluate.add_argument("--subset", help="Rows to evaluate: all, in (training) or out (out of sample)",
                          choices=SUBSETS, default='all')

    importance_parser = commands.add_parser('importance', parents=[common], help='MDI and permutation importance')
    importance_parser.add_argument("forest", help="Forest file written by train")
    importance_parser.add_argument("dataset", help="The firm-snapshot CSV the forest was trained on")

    synth_parser = commands.add_parser('synth', parents=[common], help='Generate a synthetic firm-snapshot panel')
    synth_parser.add_argument("--n-firms", dest='n_firms', help="Number of firms", type=int, default=300)
    synth_parser.add_argument("--n-dates", dest='n_dates', help="Number of weekly dates", type=int, default=150)
    synth_parser.add_argument("--missing-rate", dest='missing_rate', help="Share of snapshots losing a variable",
                              type=float, default=0.0)
    synth_parser.add_argument("--bayes-r2", dest='bayes_r2', help="Share of the label variance explained by the "
                                                                   "signal (1 for no noise)",
                              type=float, default=synth.TARGET_R2)
    synth_parser.add_argument("--output", help="Output CSV (default: <out-dir>/synthetic.csv)", default=None)

    robustness = commands.add_parser('robustness', parents=[common], help='Remove one sector at a time')
    robustness.add_argument("dataset", help="Firm-snapshot CSV")
    robustness.add_argument("--repeats", help="Number of splits per sector", type=int, default=1)

    sweep = commands.add_parser('sweep', parents=[common], help='Out-of-sample R2 over a hyperparameter grid')
    sweep.add_argument("dataset", help="Firm-snapshot CSV")
    sweep.add_argument("--parameter", help="Hyperparameter to vary", choices=SWEEP_PARAMETERS, required=True)
    sweep.add_argument("--values", help="Comma separated grid, e.g. 10,20,50", required=True)
    sweep.add_argument("--repeats", help="Number of splits per grid point", type=int, default=1)
    sweep.add_argument("--timing", help="Add the training seconds (the only non-reproducible column)",
                       action='store_true')

    return parser


def setup_logging(loglevel, logfile=None):

    level = getattr(logging, str(loglevel).upper(), None)

    if not isinstance(level, int):

        raise DataFormatError("Unknown log level %s" % loglevel)

    handlers = [logging.StreamHandler(sys.stderr)]

    if logfile is not None:

        handlers.append(logging.FileHandler(logfile))

    logging.basicConfig(level=level, format='%(asctime)s %(name)s %(levelname)s: %(message)s', handlers=handlers,
                        force=True)


def resolve_config(args):
    """Defaults, then the --config file, then the explicit flags"""

    config = load_config(args.config) if args.config is not None else RunConfig()

    return config.updated(**{name: getattr(args, name, None) for name in OVERRIDES})


def _matrix(filename, config, layout=None):

    records = dataset.load_records(filename, config.model_params())

    return dataset.prepare_matrix(records, layout)


def _r2(fitted, matrix):

    series = metrics.PairedSeries.build(matrix.y, forest.predict_matrix(fitted, matrix.x), matrix.firm_ids,
                                        matrix.dates)

    return metrics.r_squared(series)


def fit_split(matrix, config, seed):
    """
    One in/out-of-sample split, one forest and its two R2

    :return: (SampleSplit, Forest, in-sample R2, out-of-sample R2)
    """

    split = dataset.split_in_out(matrix, config.firm_fraction, config.date_fraction, seed)

    if split.out_of_sample.n_rows == 0:

        raise PipelineError("The split leaves no out-of-sample row (firm fraction %s, date fraction %s)"
                            % (config.firm_fraction, config.date_fraction))

    if split.in_sample.n_rows == 0:

        raise PipelineError("The split leaves no in-sample row")

    fitted = forest.fit_forest(split.in_sample, n_trees=config.n_trees, n_features=config.n_features,
                               max_depth=config.max_depth, master_seed=seed, workers=config.workers)

    return split, fitted, _r2(fitted, split.in_sample), _r2(fitted, split.out_of_sample)


def _mean_std(values):

    values = np.asarray(values, dtype=float)

    return float(values.mean()), (float(values.std(ddof=1)) if values.size > 1 else 0.0)


def _check_repeats(repeats):

    if repeats < 1:

        raise DomainError("The number of repeats must be >= 1, got %s" % repeats)


def cmd_spread(args, config):

    params = config.model_params()

    table = read_csv(args.input, dataset.REQUIRED_COLUMNS)

    snapshots = dataset.snapshots_from_table(table)

    derived = {name: [] for name in ('e2c_bps', 'creditgrades_bps', 'debt_per_share', 'selected_vol')}
    reasons = []

    for snapshot in snapshots:

        try:

            result = dataset.derive_spreads(snapshot, params)

        except DomainError as e:

            for values in derived.values():

                values.append(np.nan)

            reasons.append(str(e))

            continue

        derived['e2c_bps'].append(result.e2c_bps)
        derived['creditgrades_bps'].append(result.creditgrades_bps)
        derived['debt_per_share'].append(result.debt_per_share)
        derived['selected_vol'].append(result.selected_vol)

        reasons.append('')

    output = table.copy()

    for name, values in derived.items():

        output[name] = MaskedColumn(data=values, mask=np.isnan(values), dtype=float)

    output['reason'] = MaskedColumn(data=reasons, mask=[not reason for reason in reasons], dtype=str)

    with output_directory(config.out_dir) as path:

        filename = args.output if args.output is not None else path('spreads.csv')

        write_csv(output, filename, config.provenance())

    failed = sum(1 for reason in reasons if reason)

    log.info("Spreads computed for %s of %s rows" % (len(reasons) - failed, len(reasons)))

    return 0


def cmd_train(args, config):

    _check_repeats(args.repeats)

    matrix = _matrix(args.dataset, config)

    rows = []
    saved = None

    for k in range(args.repeats):

        seed = config.seed + k

        split, fitted, r2_in, r2_out = fit_split(matrix, config, seed)

        log.info("Repeat %s (seed %s): in-sample R2 %.4f, out-of-sample R2 %.4f" % (k, seed, r2_in, r2_out))

        rows.append([k, seed, split.in_sample.n_rows, split.out_of_sample.n_rows, split.out_fraction, r2_in, r2_out])

        if k == 0:

            saved = (split, fitted)

    split, fitted = saved

    metrics_table = Table(rows=rows, names=['repeat', 'seed', 'rows_in', 'rows_out', 'out_fraction', 'r2_in',
                                            'r2_out'])

    summary = Table()
    summary['statistic'] = ['mean', 'std']

    for name in ('r2_in', 'r2_out'):

        summary[name] = list(_mean_std(metrics_table[name]))

    extra_header = [(card, getattr(config, field), comment) for card, field, comment in SPLIT_CARDS + MODEL_CARDS]

    manifest = Table()
    manifest['kind'] = ['firm'] * len(split.removed_firms) + ['date'] * len(split.removed_dates)
    manifest['value'] = [str(v) for v in split.removed_firms + split.removed_dates]

    with output_directory(config.out_dir) as path:

        forest.save_forest(fitted, path('forest.fits'), extra_header)

        write_csv(manifest, path('split_manifest.csv'), config.provenance())
        write_csv(metrics_table, path('train_metrics.csv'), config.provenance())
        write_csv(summary, path('train_summary.csv'), config.provenance())

        save_config(config, path('config.txt'))

    return 0


def _stored_config(header, config):
    """The configuration with the split and model settings of the forest file"""

    stored = {field: header[card] for card, field, _ in SPLIT_CARDS + MODEL_CARDS if card in header}

    changed = [k for k, v in stored.items() if getattr(config, k) != v]

    if len(changed) > 0:

        log.info("Using the settings of the forest file for %s" % ", ".join(changed))

    return config.updated(**stored)


def _load(forest_file, dataset_file, config):
    """Forest, configuration it was trained with, and the dataset encoded with its layout"""

    fitted, header = forest.load_forest(forest_file)

    config = _stored_config(header, config)

    layout = dataset.FeatureLayout.from_columns(fitted.columns, fitted.dropped)

    return fitted, config, _matrix(dataset_file, config, layout)


def cmd_evaluate(args, config):

    fitted, config, matrix = _load(args.forest, args.dataset, config)

    if args.subset != 'all':

        split = dataset.split_in_out(matrix, config.firm_fraction, config.date_fraction, config.seed)

        matrix = split.in_sample if args.subset == 'in' else split.out_of_sample

        if matrix.n_rows == 0:

            raise PipelineError("No row in the %s-sample subset" % args.subset)

    report = evaluation.build_report(matrix, forest.predict_matrix(fitted, matrix.x), config.trim_fraction)

    with output_directory(config.out_dir):

        report.write(config.out_dir, config.provenance() + [('subset', args.subset)])

    return 0


def importance_tables(report, columns):
    """Per-feature table (in column order) and side by side rankings"""

    per_feature = Table()

    per_feature['feature'] = [c.name for c in columns]
    per_feature['kind'] = [c.kind for c in columns]
    per_feature['mdi'] = report.mdi
    per_feature['vi'] = report.vi

    mdi_rank = np.empty(len(columns), dtype=int)
    vi_rank = np.empty(len(columns), dtype=int)

    mdi_rank[list(report.mdi_ranking)] = np.arange(1, len(columns) + 1)
    vi_rank[list(report.vi_ranking)] = np.arange(1, len(columns) + 1)

    per_feature['mdi_rank'] = mdi_rank
    per_feature['vi_rank'] = vi_rank

    ranked = Table()

    ranked['rank'] = np.arange(1, len(columns) + 1)
    ranked['mdi_feature'] = [report.names[j] for j in report.mdi_ranking]
    ranked['mdi'] = report.mdi[list(report.mdi_ranking)]
    ranked['vi_feature'] = [report.names[j] for j in report.vi_ranking]
    ranked['vi'] = report.vi[list(report.vi_ranking)]

    return per_feature, ranked


def cmd_importance(args, config):

    fitted, stored, matrix = _load(args.forest, args.dataset, config)

    train = dataset.split_in_out(matrix, stored.firm_fraction, stored.date_fraction, stored.seed).in_sample

    mdi = importance.mdi_importance(fitted, train)
    vi = importance.permutation_importance(fitted, train, seed=config.seed, workers=config.workers)

    report = mdi.merged(vi)

    log.info("Most important feature: %s (MDI), %s (permutation)"
             % (report.names[report.mdi_ranking[0]], report.names[report.vi_ranking[0]]))

    per_feature, ranked = importance_tables(report, fitted.columns)

    extra = [('permutation_seed', config.seed), ('trees_used', report.n_trees_used)]

    with output_directory(config.out_dir) as path:

        write_csv(per_feature, path('importance.csv'), stored.provenance(), extra)
        write_csv(ranked, path('importance_ranked.csv'), stored.provenance(), extra)

    return 0


def cmd_synth(args, config):

    table = synth.generate_panel(n_firms=args.n_firms, n_dates=args.n_dates, seed=config.seed,
                                 missing_rate=args.missing_rate, bayes_r2=args.bayes_r2,
                                 params=config.model_params())

    extra = [('n_firms', args.n_firms), ('n_dates', args.n_dates), ('missing_rate', args.missing_rate),
             ('bayes_r2', args.bayes_r2)]

    with output_directory(config.out_dir) as path:

        write_csv(table, args.output if args.output is not None else path('synthetic.csv'), config.provenance(),
                  extra)

    return 0


def _repeated_r2(matrix, config, repeats):

    r2_in, r2_out = [], []

    for k in range(repeats):

        _, _, r_in, r_out = fit_split(matrix, config, config.seed + k)

        r2_in.append(r_in)
        r2_out.append(r_out)

    return _mean_std(r2_in) + _mean_std(r2_out)


def cmd_robustness(args, config):

    _check_repeats(args.repeats)

    records = dataset.load_records(args.dataset, config.model_params())

    complete = dataset.drop_incomplete(records)

    rows = []

    for sector in [None] + sorted(set(r.sector for r in complete)):

        kept = complete if sector is None else dataset.drop_sector(complete, sector)

        log.info("Removing sector %s: %s observations left" % (sector, len(kept)))

        try:

            matrix = dataset.prepare_matrix(kept)

            summary = _repeated_r2(matrix, config, args.repeats)

        except (PipelineError, DomainError) as e:

            log.warning("Removing sector %s: %s" % (sector, e))

            summary = (np.nan,) * 4

        rows.append(['none' if sector is None else sector, len(kept)] + list(summary))

    table = Table(rows=rows, names=['sector_removed', 'obs', 'r2_in_mean', 'r2_in_std', 'r2_out_mean',
                                    'r2_out_std'])

    with output_directory(config.out_dir) as path:

        write_csv(table, path('robustness.csv'), config.provenance(), [('repeats', args.repeats)])

    return 0


def _grid(text):

    try:

        values = [int(v) for v in text.split(',') if v.strip()]

    except ValueError:

        raise DomainError("Grid values must be comma separated integers, got '%s'" % text)

    if len(values) == 0:

        raise DomainError("Empty grid")

    return values


def cmd_sweep(args, config):

    _check_repeats(args.repeats)

    values = _grid(args.values)

    matrix = _matrix(args.dataset, config)

    rows = []

    for value in values:

        point = config.updated(**{args.parameter: value})

        start = time.perf_counter()

        summary = _repeated_r2(matrix, point, args.repeats)

        seconds = (time.perf_counter() - start) / args.repeats

        log.info("%s = %s: out-of-sample R2 %.4f" % (args.parameter, value, summary[2]))

        rows.append([value] + list(summary[2:]) + ([seconds] if args.timing else []))

    names = [args.parameter, 'r2_out_mean', 'r2_out_std'] + (['seconds'] if args.timing else [])

    with output_directory(config.out_dir) as path:

        write_csv(Table(rows=rows, names=names), path('sweep_%s.csv' % args.parameter), config.provenance(),
                  [('repeats', args.repeats)])

    return 0


COMMANDS = {'spread': cmd_spread, 'train': cmd_train, 'evaluate': cmd_evaluate, 'importance': cmd_importance,
            'synth': cmd_synth, 'robustness': cmd_robustness, 'sweep': cmd_sweep}


def main(argv=None):
    """
    Run a command

    :param argv: command line arguments (sys.argv[1:] if None)
    :return: the exit code (0 success, 2 input format, 3 pipeline precondition, 4 compatibility)
    """

    args = build_parser().parse_args(argv)

    try:

        setup_logging(args.loglevel, args.logfile)

        config = resolve_config(args)

        log.debug("Configuration: %s" % config)

        return COMMANDS[args.command](args, config)

    except E2CException as e:

        log.error(str(e))

        return e.exit_code

    except OSError as e:

        log.error("I/O error: %s" % e)

        return DataFormatError.exit_code


if __name__ == "__main__":

    sys.exit(main())
