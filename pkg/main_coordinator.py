"""
Main Coordinator: Distributed compressive sensing workbench
==========================================================

This is the main entry point for the entire system.

Coordinates:
- Bounds Analyzer: per-subset measurement conditions (known P, converse, unknown P)
- Matching Analyzer: bipartite dependency graph and Hall's condition
- Recovery Engine: known-P and unknown-P joint recovery

and runs seeded Monte Carlo sweeps over allocations. Trial t uses the seed
base_seed + t (mod 2^64) for both the random ensemble (when a generator is
configured) and the measurement matrices, so identical configs give identical
output.
"""

import argparse
import json
import math
import sys
import time
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from agents.bounds_analyzer import BoundsAnalyzerAgent
from agents.matching_analyzer import MatchingAnalyzerAgent
from agents.recovery_engine import INFEASIBLE, UNIQUE, RecoveryEngineAgent
from utils.ensemble_model import (EnsembleModel, LocationMatrix, SignalEnsemble,
                                  ensemble_sparsity, is_feasible, minimal_witnesses,
                                  random_ensemble)
from utils.errors import (ConfigError, DCSError, InfeasibleModelError, PreconditionError,
                          RecoveryGuaranteeError)
from utils.experiment_config import ExperimentConfig, load_experiment_config
from utils.measurement import measure, sample_sensing
from utils.records import TrialRecord, emit, records_to_frame, summarize
from utils.settings import Settings, load_settings
from utils.solver_interface import LinearSolver

EXACTNESS_TOL = 1e-8
SEED_MODULUS = 2 ** 64


class DCSWorkbench:
    """
    Main coordinator
    Owns the shared solver and the three agents, and turns experiment
    configs into trial records and reports
    """

    def __init__(self, settings: Optional[Settings] = None, verbose: Optional[bool] = None):
        """Initialize the agents around one shared linear solver"""
        self.settings = settings or Settings()
        self.verbose = self.settings.verbose if verbose is None else verbose

        self.say("📡 INITIALIZING DCS WORKBENCH")
        self.say("=" * 50)

        self.solver = LinearSolver()
        self.bounds_agent = BoundsAnalyzerAgent(verbose=self.verbose)
        self.matching_agent = MatchingAnalyzerAgent(self.bounds_agent, verbose=self.verbose)
        self.recovery_agent = RecoveryEngineAgent(self.solver, self.matching_agent, self.bounds_agent,
                                                  verbose=False)

        self.session_state = {
            'experiments_run': 0,
            'trials_run': 0,
            'guarantee_violations': 0,
        }
        self.say("✅ All agents initialized successfully\n")

    def say(self, message: str):
        if self.verbose:
            print(message, file=sys.stderr)

    # ------------------------------------------------------------------
    # Experiment plumbing
    # ------------------------------------------------------------------

    def _tol(self, cfg: ExperimentConfig) -> float:
        return cfg.tol if cfg.tol is not None else self.settings.recovery_tol

    def _known_location(self, cfg: ExperimentConfig, X: SignalEnsemble, model: EnsembleModel) -> LocationMatrix:
        if cfg.location is not None:
            return cfg.location.to_location_matrix()
        _, witness = ensemble_sparsity(X, model, tol=self.settings.feasibility_tol, solver=self.solver)
        return witness

    def _reference_location(self, cfg: ExperimentConfig, X: SignalEnsemble,
                            model: EnsembleModel) -> Optional[LocationMatrix]:
        """The P a fixed ensemble is recovered with (known mode) or checked against (unknown mode)"""
        if cfg.mode == 'known':
            return self._known_location(cfg, X, model)
        if not cfg.assert_guarantees:
            return None
        try:
            return self._known_location(cfg, X, model)
        except InfeasibleModelError as e:
            # unknown-P recovery may still run, there is just nothing to check it against
            self.say(f"⚠️ Skipping guarantee checks: {e}")
            return None

    def _trial_ensemble(self, cfg: ExperimentConfig, model: EnsembleModel, seed: int,
                        fixed: Optional[Tuple[SignalEnsemble, Optional[LocationMatrix]]]
                        ) -> Tuple[SignalEnsemble, Optional[LocationMatrix]]:
        if fixed is not None:
            return fixed
        X, P, _ = random_ensemble(model, seed)
        return X, P

    def _check_guarantees(self, cfg: ExperimentConfig, allocation: Tuple[int, ...], X: SignalEnsemble,
                          P: Optional[LocationMatrix], model: EnsembleModel, status: str, err: float) -> List[str]:
        """Contradictions with the recovery guarantees for one trial"""
        if P is None:
            return []
        exact = status == UNIQUE and err <= EXACTNESS_TOL * (1.0 + float(np.max(np.abs(X.X))))
        feasible = is_feasible(P, X, tol=self.settings.feasibility_tol, solver=self.solver)
        problems = []
        if cfg.mode == 'known' and feasible:
            if self.bounds_agent.check_known_p(allocation, P).satisfied and not exact:
                problems.append(f"known-P bound holds for {list(allocation)} but recovery was {status} (err {err:.3e})")
            if not self.bounds_agent.check_converse(allocation, P).satisfied and status == UNIQUE:
                problems.append(f"converse bound violated for {list(allocation)} but recovery reported unique")
        if cfg.mode == 'unknown' and feasible and model.admits(P):
            if self.bounds_agent.check_unknown_p(allocation, P).satisfied and not exact:
                problems.append(f"unknown-P bound holds for {list(allocation)} but recovery was {status} (err {err:.3e})")
        return problems

    def iter_trials(self, cfg: ExperimentConfig, violations: Optional[List[str]] = None) -> Iterator[TrialRecord]:
        """One record per (allocation, trial), allocation-major, in a fixed order"""
        model = cfg.ensemble_model()
        tol = self._tol(cfg)

        fixed = None
        if cfg.ensemble is not None:
            X = cfg.ensemble.to_ensemble()
            fixed = (X, self._reference_location(cfg, X, model))

        for allocation in cfg.allocation_list():
            for t in range(cfg.trials):
                seed = (cfg.base_seed + t) % SEED_MODULUS
                started = time.perf_counter()

                X, P = self._trial_ensemble(cfg, model, seed, fixed)
                S = sample_sensing(X.N, allocation, seed)
                Y = measure(S, X)

                if cfg.mode == 'known':
                    outcome = self.recovery_agent.recover_known_p(Y, S, P, tol)
                    status, candidates = outcome.status, outcome.candidates_examined
                    x_hat = outcome.x_hat
                else:
                    try:
                        outcome = self.recovery_agent.recover_unknown_p(Y, S, model, tol)
                        status, candidates, x_hat = outcome.status, outcome.candidates_examined, outcome.x_hat
                    except PreconditionError:
                        status, candidates, x_hat = INFEASIBLE, 0, None

                err = float(np.max(np.abs(x_hat.X - X.X))) if x_hat is not None else math.nan
                elapsed = round((time.perf_counter() - started) * 1000.0, 3) if cfg.record_timing else 0.0

                if cfg.assert_guarantees and violations is not None:
                    for problem in self._check_guarantees(cfg, allocation, X, P, model, status, err):
                        violations.append(f"trial {t} (seed {seed}): {problem}")

                yield TrialRecord(t, seed, tuple(allocation), cfg.mode, status, err, candidates, elapsed)

    def bound_reports(self, cfg: ExperimentConfig) -> List[Dict]:
        """Known-P, converse, unknown-P and necessary-condition reports per allocation"""
        model = cfg.ensemble_model()
        if cfg.ensemble is not None:
            X = cfg.ensemble.to_ensemble()
            if cfg.location is not None:
                locations = [cfg.location.to_location_matrix()]
            else:
                locations = minimal_witnesses(X, model, tol=self.settings.feasibility_tol, solver=self.solver)
        else:
            _, P, _ = random_ensemble(model, cfg.base_seed)
            locations = [P]

        reports = []
        for P in locations:
            entry = {
                'location_matrix': P.to_json_dict(),
                'num_columns': P.num_columns,
                'frontier': {
                    'known': [list(a) for a in self.bounds_agent.minimal_allocations(P, 'known')],
                    'unknown': [list(a) for a in self.bounds_agent.minimal_allocations(P, 'unknown')],
                },
                'allocations': [],
            }
            for allocation in cfg.allocation_list():
                entry['allocations'].append({
                    'allocation': list(allocation),
                    'known': self.bounds_agent.check_known_p(allocation, P).to_json_dict(),
                    'converse': self.bounds_agent.check_converse(allocation, P).to_json_dict(),
                    'unknown': self.bounds_agent.check_unknown_p(allocation, P).to_json_dict(),
                    'necessary': self.bounds_agent.check_necessary(allocation, P).to_json_dict(),
                })
            reports.append(entry)
        return reports

    def run_experiment(self, cfg: ExperimentConfig) -> Dict:
        """
        Main entry point: run every (allocation, trial) of a config

        Returns the records, a per-allocation summary and, for bounds-only
        runs, the bound reports instead of records.
        """
        self.say(f"🚀 RUNNING EXPERIMENT '{cfg.name}'")
        self.say("=" * 50)
        self.say(f"🧪 Mode: {cfg.mode}, trials: {cfg.trials}, allocations: {len(cfg.allocation_list())}")

        # solver usage is reported per experiment
        self.solver.reset_counters()

        try:
            if cfg.mode == 'bounds-only':
                reports = self.bound_reports(cfg)
                self.session_state['experiments_run'] += 1
                return {'success': True, 'records': [], 'summary': summarize([]),
                        'bound_reports': reports, 'violations': []}

            violations: List[str] = []
            records = list(self.iter_trials(cfg, violations))
        except DCSError as e:
            error_msg = f"Experiment failed: {e}"
            self.say(f"❌ {error_msg}")
            return self._create_error_response(error_msg, e)

        summary = summarize(records)
        self.session_state['experiments_run'] += 1
        self.session_state['trials_run'] += len(records)
        self.session_state['guarantee_violations'] += len(violations)

        result = {
            'success': True,
            'records': records,
            'summary': summary,
            'bound_reports': [],
            'violations': violations,
        }
        self._print_final_results(result)
        return result

    def recover_single(self, cfg: ExperimentConfig) -> Dict:
        """One instance: first allocation, trial 0"""
        model = cfg.ensemble_model()
        allocation = cfg.allocation_list()[0]
        seed = cfg.base_seed % SEED_MODULUS
        try:
            if cfg.ensemble is not None:
                X = cfg.ensemble.to_ensemble()
                P = self._known_location(cfg, X, model) if cfg.mode == 'known' else None
            else:
                X, P, _ = random_ensemble(model, seed)
            S = sample_sensing(X.N, allocation, seed)
            Y = measure(S, X)
            mode = 'unknown' if cfg.mode == 'unknown' else 'known'
            result = self.recovery_agent.process(Y, S, mode=mode, P=P, M=model, tol=self._tol(cfg))
        except DCSError as e:
            return self._create_error_response(str(e), e)

        if not result['success']:
            return self._create_error_response(result['error'])
        outcome = result['outcome']
        report = outcome.to_json_dict()
        report['allocation'] = list(allocation)
        report['seed'] = seed
        report['max_abs_err'] = float(np.max(np.abs(outcome.x_hat.X - X.X))) if outcome.x_hat is not None else None
        return {'success': True, 'report': report}

    def matching_report(self, cfg: ExperimentConfig) -> Dict:
        """Graph and matching for the known location matrix at the first allocation"""
        model = cfg.ensemble_model()
        try:
            if cfg.ensemble is not None:
                X = cfg.ensemble.to_ensemble()
                P = self._known_location(cfg, X, model)
            else:
                _, P, _ = random_ensemble(model, cfg.base_seed)
        except DCSError as e:
            return self._create_error_response(str(e), e)

        result = self.matching_agent.process(P, cfg.allocation_list()[0])
        if not result['success']:
            return self._create_error_response(result['error'])
        return {
            'success': True,
            'report': {
                'location_matrix': P.to_json_dict(),
                'allocation': list(cfg.allocation_list()[0]),
                'graph': result['graph'].to_json_dict(),
                'matching': result['matching'].to_json_dict(),
                'hall_feasible': result['hall_feasible'],
            },
            'dot': self.matching_agent.to_dot(result['graph'], result['matching']),
        }

    # ------------------------------------------------------------------

    def _create_error_response(self, error_message: str, exc: Optional[Exception] = None) -> Dict:
        """Standardized error response"""
        return {
            'success': False,
            'error': error_message,
            'error_type': type(exc).__name__ if exc is not None else 'DCSError',
            'records': [],
            'violations': [],
        }

    def _print_final_results(self, result: Dict):
        """Print the per-allocation summary"""
        if not self.verbose:
            return
        self.say("\n🎉 EXPERIMENT COMPLETE!")
        self.say("=" * 50)
        for row in result['summary'].itertuples(index=False):
            self.say(f"📊 M={row.allocation}: {row.successes}/{row.trials} unique ({row.success_rate:.1%})")
        if result['violations']:
            self.say(f"⚠️  {len(result['violations'])} guarantee violations")
        self.say(f"🧮 Solver calls: {self.solver.get_metrics()['svd_calls']}")
        self.say("=" * 50)

    def get_system_status(self) -> Dict:
        """Get current system status and metrics"""
        return {
            'session_state': self.session_state.copy(),
            'solver_usage': self.solver.get_metrics(),
            'agent_status': {
                'bounds': self.bounds_agent.get_metrics(),
                'matching': self.matching_agent.get_metrics(),
                'recovery': self.recovery_agent.get_metrics(),
            },
        }


# ----------------------------------------------------------------------
# Command line interface
# ----------------------------------------------------------------------

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_GUARANTEE = 3


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', required=True, help="experiment config (JSON)")
    common.add_argument('--out', help="output path (stdout when omitted)")
    common.add_argument('--format', choices=['csv', 'json'], help="record format for simulate")
    common.add_argument('--trials', type=int, help="override the number of trials")
    common.add_argument('--seed', type=int, help="override the base seed (uint64)")
    common.add_argument('--mode', choices=['known', 'unknown', 'bounds-only'], help="override the mode")
    common.add_argument('--verbose', action='store_true', help="progress lines on stderr")

    parser = argparse.ArgumentParser(prog='dcs-workbench',
                                     description="Distributed compressive sensing workbench")
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('analyze', parents=[common], help="measurement bounds and Pareto frontier")
    matching = sub.add_parser('matching', parents=[common], help="dependency graph and matching dump")
    matching.add_argument('--dot', help="also write the graph as a DOT file")
    sub.add_parser('recover', parents=[common], help="single recovery instance")
    sub.add_parser('simulate', parents=[common], help="Monte Carlo sweep over allocations and seeds")
    return parser


def _write_text(text: str, path: Optional[str]):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
    except OSError as e:
        raise DCSError(f"Cannot write {path}: {e}") from e


def _write_json(payload, path: Optional[str]):
    _write_text(json.dumps(payload, indent=2) + "\n", path)


def main_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Command line interface for the workbench"""
    args = _build_parser().parse_args(argv)

    try:
        settings = load_settings()
        cfg = load_experiment_config(args.config).with_overrides(
            trials=args.trials, base_seed=args.seed, mode=args.mode)
    except ConfigError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_CONFIG

    workbench = DCSWorkbench(settings, verbose=args.verbose or settings.verbose)
    fmt = args.format or settings.output_format

    try:
        if args.command == 'analyze':
            _write_json({'bound_reports': workbench.bound_reports(cfg)}, args.out)
            return EXIT_OK

        if args.command == 'matching':
            result = workbench.matching_report(cfg)
            if not result['success']:
                print(f"❌ {result['error']}", file=sys.stderr)
                return EXIT_FAILURE
            _write_json(result['report'], args.out)
            if args.dot:
                _write_text(result['dot'], args.dot)
            return EXIT_OK

        if args.command == 'recover':
            result = workbench.recover_single(cfg)
            if not result['success']:
                print(f"❌ {result['error']}", file=sys.stderr)
                return EXIT_FAILURE
            _write_json(result['report'], args.out)
            return EXIT_OK

        result = workbench.run_experiment(cfg)
        if not result['success']:
            print(f"❌ {result['error']}", file=sys.stderr)
            return EXIT_FAILURE
        if cfg.mode == 'bounds-only':
            _write_json({'bound_reports': result['bound_reports']}, args.out)
        elif args.out:
            emit(result['records'], args.out, fmt, cfg.J)
        elif fmt == 'csv':
            _write_text(records_to_frame(result['records'], cfg.J).to_csv(index=False, lineterminator='\n'), None)
        else:
            _write_json([r.to_json_dict() for r in result['records']], None)

        if cfg.assert_guarantees and result['violations']:
            for problem in result['violations']:
                print(f"⚠️  {problem}", file=sys.stderr)
            raise RecoveryGuaranteeError(f"{len(result['violations'])} guarantee violations")
        return EXIT_OK

    except RecoveryGuaranteeError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_GUARANTEE
    except ConfigError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DCSError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main_cli())
