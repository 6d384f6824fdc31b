"""Scenario file parsing; every error names the failing field path."""

import json
import logging
import re
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from ..core.bodies import ConvexBody
from ..core.gexp_bsde import PAYOFFS
from ..models.risk import DualDensity, RiskFamily, RiskMeasureSpec
from ..models.scenario import COMMANDS, SCHEMA_VERSION, Scenario, TreeSpec
from ..models.space import FiniteProbSpace, SigmaAlgebra
from ..models.tree import BinaryTree, Driver
from .config import ToleranceConfig
from .errors import ValidationError

logger = logging.getLogger(__name__)

# family(key=value, ...) as written in scenario files
RISK_TEXT_PATTERN = re.compile(r'^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$')

BODY_TYPES = ('box', 'linf_ball', 'generators', 'block_points')


class ScenarioValidator:
    """Validation of scenario documents; every error names the failing field path."""

    @classmethod
    def _fail(cls, path: str, message: str):
        raise ValidationError(f"{path}: {message}")

    @classmethod
    def require_mapping(cls, value: Any, path: str) -> Dict[str, Any]:
        if not isinstance(value, dict):
            cls._fail(path, "must be a JSON object")
        return value

    @classmethod
    def require_list(cls, value: Any, path: str) -> List[Any]:
        if not isinstance(value, list):
            cls._fail(path, "must be a JSON array")
        return value

    @classmethod
    def validate_number(cls, value: Any, path: str, positive: bool = False) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            cls._fail(path, f"must be a number (got {value!r})")
        value = float(value)
        if not np.isfinite(value):
            cls._fail(path, "must be finite")
        if positive and value <= 0:
            cls._fail(path, "must be positive")
        return value

    @classmethod
    def validate_count(cls, value: Any, path: str, minimum: int = 1) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            cls._fail(path, f"must be an integer (got {value!r})")
        if value < minimum:
            cls._fail(path, f"must be at least {minimum}")
        return value

    @classmethod
    def validate_vector(cls, value: Any, space: FiniteProbSpace, path: str) -> np.ndarray:
        """A numeric list with one entry per atom, or a scalar broadcast to every atom."""
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value] * space.atom_count
        values = cls.require_list(value, path)
        if len(values) != space.atom_count:
            cls._fail(path, f"has {len(values)} entries, the space has {space.atom_count} atoms")
        for i, v in enumerate(values):
            cls.validate_number(v, f"{path}[{i}]")
        return np.asarray(values, dtype=float)

    @classmethod
    def validate_space(cls, data: Any) -> FiniteProbSpace:
        data = cls.require_mapping(data, 'space')
        try:
            if 'uniform' in data:
                return FiniteProbSpace.uniform(cls.validate_count(data['uniform'], 'space.uniform'))
            if 'probs' in data:
                probs = cls.require_list(data['probs'], 'space.probs')
                return FiniteProbSpace(np.asarray(
                    [cls.validate_number(p, f'space.probs[{i}]') for i, p in enumerate(probs)]))
        except ValidationError as e:
            if str(e).startswith('space.'):
                raise
            cls._fail('space.probs', str(e))
        cls._fail('space', "needs either 'uniform' or 'probs'")

    @classmethod
    def validate_algebra(cls, data: Any, space: FiniteProbSpace) -> SigmaAlgebra:
        if data == 'trivial':
            return SigmaAlgebra.trivial(space)
        if data == 'finest':
            return SigmaAlgebra.finest(space)
        data = cls.require_mapping(data, 'algebra')
        try:
            if 'labels' in data:
                return SigmaAlgebra(space, np.asarray(cls.require_list(data['labels'], 'algebra.labels')))
            if 'blocks' in data:
                blocks = cls.require_list(data['blocks'], 'algebra.blocks')
                return SigmaAlgebra.from_blocks(
                    space, [cls.require_list(b, f'algebra.blocks[{i}]') for i, b in enumerate(blocks)])
            if 'contiguous' in data:
                return SigmaAlgebra.contiguous(space, cls.validate_count(data['contiguous'], 'algebra.contiguous'))
        except ValidationError as e:
            if str(e).startswith('algebra.'):
                raise
            cls._fail('algebra', str(e))
        cls._fail('algebra', "needs 'labels', 'blocks', 'contiguous', or the strings 'trivial' / 'finest'")

    @classmethod
    def validate_norm(cls, data: Any) -> float:
        if data is None:
            return float('inf')
        data = cls.require_mapping(data, 'norm')
        p = data.get('p', 'inf')
        if p in ('inf', 'infinity', float('inf')):
            return float('inf')
        p = cls.validate_number(p, 'norm.p')
        if p < 1:
            cls._fail('norm.p', f"exponent must be >= 1 (got {p:g})")
        return p

    @classmethod
    def parse_risk_text(cls, text: str, path: str) -> Dict[str, Any]:
        """Turn 'entropic(beta=1)' into {'family': 'entropic', 'beta': 1.0}."""
        match = RISK_TEXT_PATTERN.match(text)
        if not match:
            cls._fail(path, f"cannot parse risk measure {text!r}")
        data: Dict[str, Any] = {'family': match.group(1)}
        for item in filter(None, (s.strip() for s in (match.group(2) or '').split(','))):
            key, sep, value = item.partition('=')
            if not sep:
                cls._fail(path, f"expected key=value in {text!r}")
            try:
                data[key.strip()] = float(value)
            except ValueError:
                cls._fail(path, f"parameter {key.strip()!r} must be numeric in {text!r}")
        return data

    @classmethod
    def validate_risk(cls, data: Any, algebra: SigmaAlgebra, path: str, name: str) -> RiskMeasureSpec:
        if isinstance(data, str):
            data = cls.parse_risk_text(data, path)
        data = cls.require_mapping(data, path)
        family = data.get('family')
        if family not in {f.value for f in RiskFamily}:
            cls._fail(f'{path}.family', f"unknown risk family {family!r}")
        lam = data.get('lambda')
        if lam is not None:
            lam = cls.validate_vector(lam, algebra.space, f'{path}.lambda')
        densities = []
        for i, y in enumerate(data.get('densities', [])):
            densities.append(cls.validate_vector(y, algebra.space, f'{path}.densities[{i}]'))
        for i, q in enumerate(data.get('measures', [])):
            q = cls.validate_vector(q, algebra.space, f'{path}.measures[{i}]')
            densities.append(-q / algebra.space.probs)
        try:
            return RiskMeasureSpec(
                family=RiskFamily(family),
                algebra=algebra,
                beta=data.get('beta'),
                lam=lam,
                densities=tuple(DualDensity(y, algebra) for y in densities),
                name=name,
            )
        except ValidationError as e:
            cls._fail(path, str(e))

    @classmethod
    def validate_body(cls, data: Any, scenario_sets: Dict[str, List[np.ndarray]], algebra: SigmaAlgebra,
                      path: str, name: str) -> ConvexBody:
        data = cls.require_mapping(data, path)
        kind = data.get('type')
        if kind not in BODY_TYPES:
            cls._fail(f'{path}.type', f"must be one of {list(BODY_TYPES)} (got {kind!r})")
        flags = {
            'claims_balanced': bool(data.get('balanced', False)),
            'claims_absorbent': bool(data.get('absorbent', False)),
            'name': name,
        }
        space = algebra.space
        try:
            if kind == 'box':
                lower = cls.validate_vector(data.get('lower'), space, f'{path}.lower')
                upper = cls.validate_vector(data.get('upper'), space, f'{path}.upper')
                if np.any(lower > upper):
                    cls._fail(path, "lower bound exceeds upper bound")
                return ConvexBody.box(algebra, lower, upper, **flags)
            if kind == 'linf_ball':
                radius = cls.validate_vector(data.get('radius', 1.0), space, f'{path}.radius')
                return ConvexBody.linf_ball(algebra, radius, name=name)
            if kind == 'generators':
                if 'set' in data:
                    if data['set'] not in scenario_sets:
                        cls._fail(f'{path}.set', f"unknown generator set {data['set']!r}")
                    generators = scenario_sets[data['set']]
                else:
                    generators = cls.validate_generators(data.get('generators'), space, f'{path}.generators')
                return ConvexBody.from_generators(algebra, generators, **flags)
            points = cls.require_list(data.get('points'), f'{path}.points')
            if len(points) != algebra.block_count:
                cls._fail(f'{path}.points', f"needs one point list per block ({algebra.block_count})")
            return ConvexBody.from_block_points(algebra, points, **flags)
        except ValidationError as e:
            if str(e).startswith(path):
                raise
            cls._fail(path, str(e))

    @classmethod
    def validate_generators(cls, data: Any, space: FiniteProbSpace, path: str) -> List[np.ndarray]:
        items = cls.require_list(data, path)
        if not items:
            cls._fail(path, "needs at least one generator")
        return [cls.validate_vector(g, space, f'{path}[{i}]') for i, g in enumerate(items)]

    @classmethod
    def validate_tree(cls, data: Any, path: str, name: str) -> TreeSpec:
        data = cls.require_mapping(data, path)
        steps = cls.validate_count(data.get('steps'), f'{path}.steps')
        horizon = cls.validate_number(data.get('horizon', 1.0), f'{path}.horizon', positive=True)
        mu = cls.validate_number(data.get('mu', 0.0), f'{path}.mu')
        payoff = data.get('payoff', 'brownian')
        if payoff not in PAYOFFS:
            cls._fail(f'{path}.payoff', f"must be one of {list(PAYOFFS)} (got {payoff!r})")
        time = cls.validate_count(data.get('time', 0), f'{path}.time', minimum=0)
        if time > steps:
            cls._fail(f'{path}.time', f"time index {time} exceeds the {steps} tree steps")
        study = tuple(cls.validate_count(n, f'{path}.study[{i}]')
                      for i, n in enumerate(cls.require_list(data.get('study', []), f'{path}.study')))
        try:
            return TreeSpec(
                name=name,
                tree=BinaryTree(steps, horizon),
                driver=Driver.named(data.get('driver', 'zero'), mu),
                payoff=payoff,
                strike=cls.validate_number(data.get('strike', 0.0), f'{path}.strike'),
                time=time,
                study=study,
            )
        except ValidationError as e:
            if str(e).startswith(path):
                raise
            cls._fail(path, str(e))

    @classmethod
    def validate_tolerances(cls, data: Any) -> Dict[str, float]:
        data = cls.require_mapping(data or {}, 'tolerances')
        known = {f.name for f in fields(ToleranceConfig)}
        out = {}
        for key, value in data.items():
            if key not in known:
                cls._fail(f'tolerances.{key}', f"unknown tolerance; expected one of {sorted(known)}")
            out[key] = cls.validate_number(value, f'tolerances.{key}', positive=True)
        return out

    @classmethod
    def validate_scenario(cls, document: Any, name: str = 'scenario') -> Scenario:
        """Validate a parsed scenario document eagerly and build the Scenario."""
        document = cls.require_mapping(document, '$')
        if document.get('schema') != SCHEMA_VERSION:
            cls._fail('schema', f"must be {SCHEMA_VERSION!r} (got {document.get('schema')!r})")

        space = cls.validate_space(document.get('space'))
        algebra = cls.validate_algebra(document.get('algebra', 'trivial'), space)

        vectors = {k: cls.validate_vector(v, space, f'vectors.{k}')
                   for k, v in cls.require_mapping(document.get('vectors', {}), 'vectors').items()}
        duals = {k: cls.validate_vector(v, space, f'duals.{k}')
                 for k, v in cls.require_mapping(document.get('duals', {}), 'duals').items()}
        generator_sets = {k: cls.validate_generators(v, space, f'generator_sets.{k}')
                          for k, v in cls.require_mapping(document.get('generator_sets', {}),
                                                          'generator_sets').items()}
        bodies = {k: cls.validate_body(v, generator_sets, algebra, f'bodies.{k}', k)
                  for k, v in cls.require_mapping(document.get('bodies', {}), 'bodies').items()}
        risks = {k: cls.validate_risk(v, algebra, f'risks.{k}', k)
                 for k, v in cls.require_mapping(document.get('risks', {}), 'risks').items()}
        trees = {k: cls.validate_tree(v, f'trees.{k}', k)
                 for k, v in cls.require_mapping(document.get('trees', {}), 'trees').items()}

        suites = document.get('suites', list(COMMANDS))
        suites = tuple(cls.require_list(suites, 'suites'))
        seed = document.get('seed')
        if seed is not None:
            seed = cls.validate_count(seed, 'seed', minimum=0)
        trials = document.get('trials')
        if trials is not None:
            trials = cls.validate_count(trials, 'trials')

        scenario = Scenario(
            name=document.get('name', name),
            space=space,
            algebra=algebra,
            norm_p=cls.validate_norm(document.get('norm')),
            vectors=vectors,
            duals=duals,
            bodies=bodies,
            generator_sets=generator_sets,
            risks=risks,
            trees=trees,
            suites=suites,
            seed=seed,
            trials=trials,
            tolerances=cls.validate_tolerances(document.get('tolerances')),
        )
        logger.info(f"Loaded scenario {scenario.name!r}: {space.atom_count} atoms, "
                    f"{algebra.block_count} blocks, {len(risks)} risks, {len(bodies)} bodies, "
                    f"{len(trees)} trees")
        return scenario


def parse_scenario(text: str, name: str = 'scenario') -> Scenario:
    """Parse and validate scenario JSON text."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{name}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    return ScenarioValidator.validate_scenario(document, name)


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read, parse and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ValidationError(f"cannot read scenario {str(path)!r}: {e.strerror}") from e
    try:
        return parse_scenario(text, path.stem)
    except ValidationError as e:
        logger.error(f"Scenario validation error in {path}: {e}")
        raise
