"""Command dispatch: scenario objects -> check jobs -> a deterministic Report.

Each command handler returns a list of jobs plus the command's computed
outputs. A job owns its random generator, seeded from the run seed and the
job key, so results do not depend on worker count or scheduling order.
"""

import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from ..core.conditional_norms import (ConditionalNorm, ball_membership, cond_norm, holder_check,
                                      p_monotonicity_check, rnm_axiom_check)
from ..core.conjugation import (biconjugation_check, classify_domain, closedness_check, conjugate,
                                conjugate_locality_check, conjugate_oracle_agreement_check,
                                dual_representation, dual_representation_check, family_biconjugate,
                                feasible_set_equivalence_check, fenchel_young_check, penalty, subgradient)
from ..core.extension import (extension_axiom_check, extension_conjugate_check, feasible_hull_identity,
                              independence_suite, linf_lipschitz_check, round_trip_check)
from ..core.geometry import (bipolar_check, gauge, gauge_probes, gauge_sandwich_check, gauge_seminorm_check,
                             polar_checks, separate, separation_check, separation_sweep, support_seminorm,
                             support_seminorm_check)
from ..core.gexp_bsde import (backward_solve, comparison_check, convergence_study, gexp_axiom_suite,
                              recursion_check, rho, terminal_payoff, time_consistency_check, zero_driver_check)
from ..core.prob_core import concatenation_identity_check, local_sup_reduction_check
from ..core.risk_library import (avar_feasibility_check, axiom_check, evaluate, family_ordering_check,
                                 risk_oracle)
from ..models.report import CheckResult, Report, ReportState, Witness
from ..models.risk import DualDensity, RiskFamily
from ..models.scenario import COMMANDS, Scenario
from ..models.tree import Driver
from ..utils.config import get_config
from ..utils.errors import PreconditionError, RCAError, ValidationError
from ..utils.performance import get_timing_monitor

logger = logging.getLogger(__name__)

ALL_COMMANDS = COMMANDS + ('suite-all',)

# checks built on inner optimizations run fewer trials than the cheap identities
HEAVY_TRIALS = 100
ORACLE_TRIALS = 20

Job = Tuple[str, Callable[[np.random.Generator], List[CheckResult]]]
Handler = Callable[['RunContext'], Tuple[List[Job], Dict[str, Any]]]


@dataclass
class RunContext:
    """Everything a handler needs: the scenario and the effective run settings."""

    scenario: Scenario
    seed: int
    trials: int
    budget: Optional[int] = None

    @property
    def heavy(self) -> int:
        return min(self.trials, HEAVY_TRIALS)

    @property
    def norm(self) -> ConditionalNorm:
        return ConditionalNorm(self.scenario.norm_p, self.scenario.algebra)

    def rng(self, key: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(key.encode('utf-8'))])


def verify_axioms(ctx: RunContext) -> Tuple[List[Job], Dict[str, Any]]:
    scenario = ctx.scenario
    algebra = scenario.algebra
    jobs: List[Job] = []
    outputs: Dict[str, Any] = {'risk_values': {}, 'cond_norms': {}}

    for key, spec in sorted(scenario.risks.items()):
        def risk_job(rng, spec=spec):
            results = axiom_check(spec, ctx.trials, rng)
            oracle = risk_oracle(spec)
            results.append(concatenation_identity_check(oracle, algebra, rng, ctx.trials, name=spec.name))
            generators = list(scenario.vectors.values())[:3]
            if generators:
                results.append(local_sup_reduction_check(oracle, generators, algebra, budget=ctx.budget,
                                                         name=spec.name))
            if spec.family is RiskFamily.AVAR:
                results.append(avar_feasibility_check(spec, ctx.trials, rng))
            return results
        jobs.append((f'axioms/{key}', risk_job))
        outputs['risk_values'][key] = {v: evaluate(spec, x) for v, x in sorted(scenario.vectors.items())}

    norm = ctx.norm
    p = norm.p

    def norm_job(rng):
        holder_p = p if 1 < p < np.inf else 2.0
        exponents = sorted({1.0, 2.0, float(p), np.inf})
        return (rnm_axiom_check(norm, ctx.trials, rng)
                + [holder_check(holder_p, algebra, ctx.trials, rng),
                   p_monotonicity_check(exponents, algebra, ctx.trials, rng)])
    jobs.append(('norms', norm_job))
    jobs.append(('ordering', lambda rng: family_ordering_check(algebra, (0.5, 1.0, 2.0), ctx.trials, rng)))

    for v, x in sorted(scenario.vectors.items()):
        value = cond_norm(x, norm)
        outputs['cond_norms'][v] = {
            'norm': norm.label(),
            'value': value,
            'in_unit_ball': ball_membership(x, np.ones(algebra.atom_count), norm),
        }
    return jobs, outputs


def conjugate_command(ctx: RunContext) -> Tuple[List[Job], Dict[str, Any]]:
    scenario = ctx.scenario
    algebra = scenario.algebra
    jobs: List[Job] = []
    outputs: Dict[str, Any] = {}
    duals = dict(scenario.duals)
    duals.setdefault('uniform', DualDensity.uniform(algebra).y)
    for key, spec in sorted(scenario.convex_risks().items()):
        jobs.append((f'conjugate/{key}', lambda rng, spec=spec: [
            fenchel_young_check(spec, ctx.trials, rng),
            conjugate_locality_check(spec, ctx.trials, rng),
            conjugate_oracle_agreement_check(spec, min(ctx.trials, ORACLE_TRIALS), rng),
        ]))
        outputs[key] = {}
        for name, y in sorted(duals.items()):
            value = conjugate(spec, y)
            outputs[key][name] = {'y': y, 'value': value.value, 'method': value.method}
    return jobs, outputs


def dual_rep(ctx: RunContext) -> Tuple[List[Job], Dict[str, Any]]:
    scenario = ctx.scenario
    jobs: List[Job] = []
    outputs: Dict[str, Any] = {}
    for key, spec in sorted(scenario.convex_risks().items()):
        jobs.append((f'dual-rep/{key}', lambda rng, spec=spec: [
            dual_representation_check(spec, ctx.heavy, rng),
            feasible_set_equivalence_check(spec, ctx.heavy, rng),
        ]))
        outputs[key] = {}
        for v, x in sorted(scenario.vectors.items()):
            value, density = dual_representation(spec, x)
            direct = evaluate(spec, x)
            grad = subgradient(spec, x, ctx.rng(f'subgradient/{key}/{v}'))
            outputs[key][v] = {
                'value': value,
                'direct': direct,
                'gap': float(np.max(np.abs(value - direct))),
                'maximizer': density.y,
                'measure': density.measure(),
                'feasibility_violation': density.max_violation(),
                'penalty': penalty(spec, density),
                'subgradient': grad.u,
                'subgradient_verified': grad.verified,
            }
    return jobs, outputs


def biconjugate_command(ctx: RunContext) -> Tuple[List[Job], Dict[str, Any]]:
    scenario = ctx.scenario
    algebra = scenario.algebra
    jobs: List[Job] = []
    outputs: Dict[str, Any] = {}
    for key, spec in sorted(scenario.convex_risks().items()):
        def job(rng, spec=spec):
            probes = list(scenario.vectors.values()) + [rng.normal(scale=2.0, size=algebra.atom_count)
                                                        for _ in range(10)]
            return [biconjugation_check(spec, ctx.heavy, rng)] + closedness_check(
                spec, probes, algebra, spec.name, family=spec, rng=rng)
        jobs.append((f'biconjugate/{key}', job))
        outputs[key] = {v: family_biconjugate(spec, x).value for v, x in sorted(scenario.vectors.items())}
        if scenario.vectors:
            outputs[key]['domain'] = classify_domain(risk_oracle(spec), list(scenario.vectors.values()),
                                                     algebra).to_dict()
    return jobs, outputs


def separate_command(ctx: RunContext) -> Tuple[List[Job], Dict[str, Any]]:
    scenario = ctx.scenario
    norm = ctx.norm
    jobs: List[Job] = []
    outputs: Dict[str, Any] = {}
    for key, body in sorted(scenario.bodies.items()):
        def job(rng, body=body):
            results = [separation_sweep(body, norm, ctx.heavy, rng)]
            results += [separation_check(x, body, norm, name=f'{body.name}/{v}')
                        for v, x in sorted(scenario.vectors.items())]
            return results
        jobs.append((f'separate/{key}', job))
        outputs[key] = {}
        for v, x in sorted(scenario.vectors.items()):
            certificate = separate(x, body, norm)
            outputs[key][v] = certificate.to_dict()
    return jobs, outputs


def gauge_command(ctx: RunContext) -> Tuple[List[Job], Dict[str, Any]]:
    scenario = ctx.scenario
    jobs: List[Job] = []
    outputs: Dict[str, Any] = {}
    for key, body in sorted(scenario.bodies.items()):
        if not (body.claims_balanced and body.claims_absorbent):
            logger.info(f"gauge: skipping body {key!r} (not claimed balanced and absorbent)")
            continue

        def job(rng, body=body):
            flags = body.verify_flags(rng)
            if not flags.passed:
                return [flags]
            return [flags, gauge_sandwich_check(body, gauge_probes(body, rng, ctx.trials)),
                    gauge_seminorm_check(body, ctx.heavy, rng)]
        jobs.append((f'gauge/{key}', job))
        outputs[key] = {v: gauge(body, x) for v, x in sorted(scenario.vectors.items())}
    return jobs, outputs


def polar_command(ctx: RunContext) -> Tuple[List[Job], Dict[str, Any]]:
    scenario = ctx.scenario
    algebra = scenario.algebra
    jobs: List[Job] = []
    outputs: Dict[str, Any] = {}
    for key, generators in sorted(scenario.generator_sets.items()):
        jobs.append((f'polar/{key}', lambda rng, g=generators, key=key: (
            polar_checks(g, algebra, rng, probes=ctx.trials, name=key)
            + support_seminorm_check(g, algebra, ctx.heavy, rng, name=key))))
        outputs[key] = {v: support_seminorm(x, generators, algebra) for v, x in sorted(scenario.vectors.items())}
    return jobs, outputs


def bipolar_command(ctx: RunContext) -> Tuple[List[Job], Dict[str, Any]]:
    scenario = ctx.scenario
    jobs: List[Job] = []
    for key, generators in sorted(scenario.generator_sets.items()):
        jobs.append((f'bipolar/{key}', lambda rng, g=generators, key=key: [
            bipolar_check(g, scenario.algebra, rng, probes=ctx.trials, name=key, budget=ctx.budget)]))
    return jobs, {}


def extend_command(ctx: RunContext) -> Tuple[List[Job], Dict[str, Any]]:
    scenario = ctx.scenario
    algebra = scenario.algebra
    jobs: List[Job] = []
    for key, spec in sorted(scenario.risks.items()):
        def job(rng, spec=spec):
            oracle = risk_oracle(spec)
            results = [independence_suite(oracle, algebra, ctx.trials, rng, name=spec.name)]
            results += linf_lipschitz_check(oracle, algebra, ctx.trials, rng, name=spec.name)
            results += extension_axiom_check(oracle, algebra, ctx.heavy, rng, name=spec.name)
            if spec.family.is_convex:
                results.append(extension_conjugate_check(spec, min(ctx.trials, ORACLE_TRIALS), rng))
            return results
        jobs.append((f'extend/{key}', job))
    jobs.append(('extend/round-trip', lambda rng: [round_trip_check(algebra, ctx.trials, rng)]))
    for mode in ('none', 'linf', 'lgamma'):
        jobs.append((f'extend/feasible-hull/{mode}', lambda rng, mode=mode: [
            feasible_hull_identity(algebra, 2.0, mode, ctx.trials, rng)]))
    return jobs, {}


def gexp_command(ctx: RunContext) -> Tuple[List[Job], Dict[str, Any]]:
    jobs: List[Job] = []
    outputs: Dict[str, Any] = {}
    for key, spec in sorted(ctx.scenario.trees.items()):
        tree, driver = spec.tree, spec.driver
        # every shipped driver with Lipschitz constant mu lies below mu|z|
        upper = Driver.named('abs', driver.mu)

        def job(rng, tree=tree, driver=driver, upper=upper, t=spec.time):
            return (gexp_axiom_suite(tree, driver, ctx.trials, rng, t=t)
                    + [comparison_check(tree, driver, upper, ctx.heavy, rng),
                       time_consistency_check(tree, driver, ctx.heavy, rng),
                       zero_driver_check(tree, ctx.heavy, rng),
                       recursion_check(tree, driver, ctx.heavy, rng)])
        jobs.append((f'gexp/{key}', job))

        payoff = terminal_payoff(tree, spec.payoff, spec.strike)
        solution = backward_solve(tree, driver, -payoff)
        outputs[key] = {
            'tree': spec.to_dict(),
            'rho': rho(tree, driver, payoff, spec.time),
            'Z0': solution.Z[0],
        }
        if spec.study:
            table = convergence_study(driver, spec.payoff, spec.study, tree.horizon, spec.strike)
            outputs[key]['convergence'] = table.to_dict(orient='records')
    return jobs, outputs


HANDLERS: Dict[str, Handler] = {
    'verify-axioms': verify_axioms,
    'conjugate': conjugate_command,
    'dual-rep': dual_rep,
    'biconjugate': biconjugate_command,
    'separate': separate_command,
    'gauge': gauge_command,
    'polar': polar_command,
    'bipolar': bipolar_command,
    'extend': extend_command,
    'gexp': gexp_command,
}


def _run_job(ctx: RunContext, key: str, job: Callable[[np.random.Generator], List[CheckResult]],
             state: ReportState):
    """Run one job; a failed precondition becomes a failed record rather than aborting the run."""
    monitor = get_timing_monitor()
    with monitor.measure(key) as timer:
        try:
            results = job(ctx.rng(key))
        except PreconditionError as e:
            logger.warning(f"{key}: precondition failed: {e}")
            failed = CheckResult(f'{key}/precondition', 'precondition of the check', trials=1,
                                 details={'error': str(e)})
            failed.add_violation(Witness(description=str(e), inputs={'job': key, 'seed': ctx.seed}))
            results = [failed.finish()]
    share = timer.elapsed / max(len(results), 1)
    for result in results:
        if result.seed is None:
            result.seed = ctx.seed
        result.details.setdefault('job', key)
        state.add(result, share)


def run(command: str, scenario: Scenario, flags: Optional[Dict[str, Any]] = None) -> Report:
    """Dispatch ``command`` on ``scenario``; errors are folded into the report with their exit code.

    Recognized flags: seed, tol, budget, workers, trials.
    """
    flags = dict(flags or {})
    config = get_config()
    seed = flags.get('seed')
    if seed is None:
        seed = scenario.seed if scenario.seed is not None else config.run.default_seed
    report = Report(command=command, scenario=scenario.name, seed=int(seed))

    if command not in ALL_COMMANDS:
        report.error = f"unknown command {command!r}; expected one of {list(ALL_COMMANDS)}"
        report.error_code = ValidationError.exit_code
        return report

    selected = list(scenario.suites) if command == 'suite-all' else [command]
    state = ReportState()
    try:
        with config.overridden(scenario.tolerances, tol=flags.get('tol'), budget=flags.get('budget'),
                               seed=seed, workers=flags.get('workers')) as cfg:
            ctx = RunContext(scenario, int(seed), int(flags.get('trials') or scenario.trials
                                                      or cfg.run.default_trials), flags.get('budget'))
            jobs: List[Job] = []
            for name in selected:
                handler_jobs, outputs = HANDLERS[name](ctx)
                jobs.extend(handler_jobs)
                if outputs:
                    report.outputs[name] = outputs
            logger.info(f"{command}: {len(jobs)} jobs on {cfg.run.workers} worker(s), {ctx.trials} trials")
            if cfg.run.workers > 1:
                with ThreadPoolExecutor(max_workers=cfg.run.workers) as pool:
                    futures = [pool.submit(_run_job, ctx, key, job, state) for key, job in jobs]
                    for future in futures:
                        future.result()
            else:
                for key, job in jobs:
                    _run_job(ctx, key, job, state)
            report.outputs['config'] = cfg.snapshot()
    except RCAError as e:
        logger.error(f"{command} failed: {e}")
        report.error = f"{command}: {e}"
        report.error_code = e.exit_code
    report.records = state.records
    logger.info(f"{command}: {len(report.records)} records, exit code {report.exit_code}")
    return report
