"""
Command-line front end.

    extprof classify  --p 1.5 --a 0.1
    extprof threshold --p 1.5 --tol-a 1e-9 --format json
    extprof profile   --p 1.5 --a 0.1 --r-max 50 --format csv
    extprof psi       --p 1.5 --a 1 --y-end 0.999
    extprof selfsim   --p 1.5 --a 1 --T 1 --t 0.5 --x-max 5 --nx 101
    extprof sweep     --p 1.5 --points 50
    extprof validate  [--quick]

Exit status: 0 on success, 1 on a numerical error (or a failed validation),
2 on a usage error.
"""
import argparse
import logging
import os
import sys
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ExtprofError, ParameterError
from .models.params import Params
from .services.asymptotics import integrate_for_fit, reconstruct_selfsimilar
from .services.classifier import classify, find_threshold
from .services.ode_core import StepControl
from .services.profile_ivp import check_residuals, integrate_profile
from .services.psi_plane import integrate_psi, tail_estimate
from .services.sweep import labels_monotone, sweep
from .utils.output import OutputRecord, emit_csv, emit_json, render_csv, render_json
from .utils.validation import DEFAULT_PS, run_validation

logger = logging.getLogger(__name__)

COMMANDS = ('classify', 'threshold', 'profile', 'psi', 'selfsim', 'sweep', 'validate')
NEEDS_A = ('classify', 'profile', 'psi', 'selfsim')
FORMATS = ('csv', 'json')

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines one invocation; embedded in every output file"""

    command: str
    p: Optional[float] = None
    a: Optional[float] = None
    rel_tol: Optional[float] = None
    abs_tol: Optional[float] = None
    max_steps: Optional[int] = None
    margin: Optional[float] = None
    plane: str = 'profile'
    tol_a: Optional[float] = None
    r_max: Optional[float] = None
    y_end: Optional[float] = None
    T: float = 1.0
    t: float = 0.0
    x_max: float = 5.0
    nx: int = 101
    a_min: Optional[float] = None
    a_max: Optional[float] = None
    points: int = 50
    fit: bool = True
    quick: bool = False
    pairs: int = 10
    output: Optional[str] = None
    format: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ParameterError(f'unknown command {self.command!r}', 'invalid_argument')
        if self.format is not None and self.format not in FORMATS:
            raise ParameterError(f'unknown format {self.format!r}', 'invalid_argument')
        if self.command != 'validate' and self.p is None:
            raise ParameterError(f'{self.command} needs --p', 'invalid_argument')
        if self.p is not None:
            Params(self.p)
        if self.command in NEEDS_A and self.a is None:
            raise ParameterError(f'{self.command} needs --a', 'invalid_argument')
        if self.a is not None and not self.a > 0.0:
            raise ParameterError(f'--a must be positive, got {self.a}', 'invalid_a')
        if self.command == 'sweep' and (self.a_min is None) != (self.a_max is None):
            raise ParameterError('--a-min and --a-max go together', 'invalid_argument')

    def step_control(self) -> StepControl:
        overrides = {k: v for k, v in (('rel_tol', self.rel_tol), ('abs_tol', self.abs_tol),
                                       ('max_steps', self.max_steps)) if v is not None}
        return StepControl.default(**overrides)

    def to_dict(self):
        return asdict(self)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='extprof',
        description='Extinction profiles of the singular p-Laplacian: classification, threshold, tails',
    )
    parser.add_argument('--env', choices=['development', 'production', 'testing'],
                        help='Configuration to use (sets EXTPROF_ENV)')
    parser.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Diagnostic verbosity on stderr')
    sub = parser.add_subparsers(dest='command', required=True)

    def common(cmd, p_required=True):
        cmd.add_argument('--p', type=float, required=p_required, help='Exponent in (1, 2)')
        cmd.add_argument('--rel-tol', type=float, help='Integrator relative tolerance')
        cmd.add_argument('--abs-tol', type=float, help='Integrator absolute tolerance')
        cmd.add_argument('--max-steps', type=int, help='Step budget per integration')
        cmd.add_argument('--output', '-o', help='Write the record to this file instead of stdout')
        cmd.add_argument('--format', choices=FORMATS, help='Output format')
        return cmd

    cmd = common(sub.add_parser('classify', help='Regime of one shooting parameter'))
    cmd.add_argument('--a', type=float, required=True)
    cmd.add_argument('--margin', type=float)
    cmd.add_argument('--plane', choices=['profile', 'psi'], default='profile')

    cmd = common(sub.add_parser('threshold', help='Bisect for the critical parameter a*'))
    cmd.add_argument('--tol-a', type=float)
    cmd.add_argument('--r-max', type=float)

    cmd = common(sub.add_parser('profile', help='Profile f(r) on its nodes'))
    cmd.add_argument('--a', type=float, required=True)
    cmd.add_argument('--r-max', type=float)

    cmd = common(sub.add_parser('psi', help='Transform psi(y) and phi(y) on its nodes'))
    cmd.add_argument('--a', type=float, required=True)
    cmd.add_argument('--y-end', type=float)

    cmd = common(sub.add_parser('selfsim', help='Slice u(t, x) of the self-similar solution'))
    cmd.add_argument('--a', type=float, required=True)
    cmd.add_argument('--T', type=float, default=1.0)
    cmd.add_argument('--t', type=float, default=0.0)
    cmd.add_argument('--x-max', type=float, default=5.0)
    cmd.add_argument('--nx', type=int, default=101)
    cmd.add_argument('--r-max', type=float)

    cmd = common(sub.add_parser('sweep', help='Labels and tail fits on a logarithmic a-grid'))
    cmd.add_argument('--a-min', type=float)
    cmd.add_argument('--a-max', type=float)
    cmd.add_argument('--points', type=int, default=50)
    cmd.add_argument('--margin', type=float)
    cmd.add_argument('--no-fit', dest='fit', action='store_false')

    cmd = common(sub.add_parser('validate', help='Run the invariant suite'), p_required=False)
    cmd.add_argument('--quick', action='store_true', help='Skip threshold and tail-constant checks')
    cmd.add_argument('--pairs', type=int, default=10)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    fields = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__ and v is not None}
    return RunConfig(**fields)


def _emit(config: RunConfig, record: OutputRecord, default_format: str):
    fmt = config.format or default_format
    if config.output:
        (emit_csv if fmt == 'csv' else emit_json)(record, config.output)
        return
    sys.stdout.write(render_csv(record) if fmt == 'csv' else render_json(record))


def _scalar_record(config: RunConfig, params: Params, values: dict, diagnostics=None) -> OutputRecord:
    if (config.format or 'json') == 'csv':
        return OutputRecord.from_rows(config.to_dict(), params.to_dict(), [values], diagnostics=diagnostics)
    return OutputRecord.from_values(config.to_dict(), params.to_dict(), values, diagnostics=diagnostics)


def _run_classify(config: RunConfig, params: Params, ctrl: StepControl) -> int:
    label = classify(params, config.a, margin=config.margin, plane=config.plane, ctrl=ctrl)
    if config.format is None and config.output is None:
        print(label.regime)
        return EXIT_OK
    _emit(config, _scalar_record(config, params, dict(a=config.a, **label.to_dict())), 'json')
    return EXIT_OK


def _run_threshold(config: RunConfig, params: Params, ctrl: StepControl) -> int:
    result = find_threshold(params, tol_a=config.tol_a, ctrl=ctrl, r_max=config.r_max)
    values = result.to_dict()
    verification = values.pop('verification')
    _emit(config, _scalar_record(config, params, values, {'verification': verification}), 'json')
    return EXIT_OK


def _run_profile(config: RunConfig, params: Params, ctrl: StepControl) -> int:
    traj = integrate_profile(params, config.a, r_max=config.r_max, ctrl=ctrl)
    diagnostics = {'terminal_reason': traj.path.terminal_reason, 'r_end': traj.r_end}
    if traj.crossing is not None:
        diagnostics.update(R=traj.crossing.R, slope=traj.crossing.slope)
    if traj.path.n_nodes >= 3:
        diagnostics['residuals'] = check_residuals(traj).to_dict()
    record = OutputRecord.from_rows(config.to_dict(), params.to_dict(), traj.to_rows(),
                                    columns=['r', 'f', 'fprime', 'g'], diagnostics=diagnostics)
    _emit(config, record, 'csv')
    return EXIT_OK


def _run_psi(config: RunConfig, params: Params, ctrl: StepControl) -> int:
    traj = integrate_psi(params, config.a, y_end=config.y_end, ctrl=ctrl, strict=False)
    diagnostics = {'terminal_reason': traj.path.terminal_reason, 'y_end': traj.y_end,
                   'y_a': traj.y_a, 'Y_a': traj.Y_a, 'phi_peak': traj.phi_peak}
    try:
        diagnostics['tail'] = tail_estimate(traj).to_dict()
    except ExtprofError as exc:
        diagnostics['tail_error'] = exc.kind
    record = OutputRecord.from_rows(config.to_dict(), params.to_dict(), traj.to_rows(),
                                    columns=['y', 'psi', 'phi'], diagnostics=diagnostics)
    _emit(config, record, 'csv')
    return EXIT_OK


def _run_selfsim(config: RunConfig, params: Params, ctrl: StepControl) -> int:
    label = classify(params, config.a, ctrl=ctrl)
    if config.r_max is not None:
        profile = integrate_profile(params, config.a, r_max=config.r_max, ctrl=ctrl)
    else:
        profile = integrate_for_fit(params, config.a, label, ctrl)
    x_grid = np.linspace(-config.x_max, config.x_max, config.nx)
    slice_ = reconstruct_selfsimilar(profile, config.T, config.t, x_grid)
    diagnostics = {'regime': label.regime}
    if profile.crossing is not None:
        diagnostics['R'] = profile.crossing.R
    record = OutputRecord.from_rows(config.to_dict(), params.to_dict(), slice_.to_rows(),
                                    columns=['x', 'u'], diagnostics=diagnostics)
    _emit(config, record, 'csv')
    return EXIT_OK


def _run_sweep(config: RunConfig, params: Params, ctrl: StepControl) -> int:
    a_values = None
    if config.a_min is not None:
        a_values = np.geomspace(config.a_min, config.a_max, config.points)
    records = sweep(params, a_values, margin=config.margin, ctrl=ctrl, fit=config.fit)
    record = OutputRecord.from_rows(config.to_dict(), params.to_dict(), records,
                                    diagnostics={'labels_monotone': labels_monotone(records)})
    _emit(config, record, 'csv')
    return EXIT_OK


def _run_validate(config: RunConfig, ctrl: StepControl) -> int:
    ps = (config.p,) if config.p is not None else DEFAULT_PS
    report = run_validation(ps=ps, pairs=config.pairs, quick=config.quick, ctrl=ctrl)
    print(report.table())
    print(f'{len(report.checks) - len(report.failures)}/{len(report.checks)} checks passed')
    if config.output:
        rows = [asdict(c) for c in report.checks]
        record = OutputRecord.from_rows(config.to_dict(), {}, rows, diagnostics={'passed': report.passed})
        (emit_csv if (config.format or 'csv') == 'csv' else emit_json)(record, config.output)
    return EXIT_OK if report.passed else EXIT_FAILURE


HANDLERS = {
    'classify': _run_classify,
    'threshold': _run_threshold,
    'profile': _run_profile,
    'psi': _run_psi,
    'selfsim': _run_selfsim,
    'sweep': _run_sweep,
}


def run(config: RunConfig) -> int:
    """Dispatch one command; library errors propagate to the caller"""
    ctrl = config.step_control()
    if config.command == 'validate':
        return _run_validate(config, ctrl)
    return HANDLERS[config.command](config, Params(config.p), ctrl)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.env:
        os.environ['EXTPROF_ENV'] = args.env
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s', stream=sys.stderr)
    try:
        config = config_from_args(args)
    except ParameterError as exc:
        parser.print_usage(sys.stderr)
        print(f'extprof: error: {exc}', file=sys.stderr)
        return EXIT_USAGE
    try:
        return run(config)
    except ExtprofError as exc:
        print(f'extprof: {exc.kind}: {exc}', file=sys.stderr)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
