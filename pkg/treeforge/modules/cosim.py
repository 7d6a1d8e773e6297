"""
Co-simulation of a Base-L discrete-event controller with a continuous plant.

A scenario is a Base-L module followed by two sections::

    plant
      state level := 2.5
      deriv level := 0.5 - (if valve = 1 then 1.0 else 0.0)
      output level <- level
      h := 0.1
    cosim
      H := 0.1
      end := 20.0
      agenda ctrl every 0.1

The master is fixed-step: at each sync point the plant outputs are copied
into the controller's shared state, the controller runs up to the next sync
point, its shared writes become plant inputs, and the plant is integrated
with forward Euler over the step. Values are frozen between sync points.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Tuple

from treeforge import TIME_EPSILON
from .baselang import SECTIONS, BaseModule, BaseParser, Value, format_value
from .errors import ConfigError, CosimError, ParseError, TreeforgeError
from .interpreter import EvalContext, exec_operation, initial_state, interpreter_dispatcher
from .lexer import INT, REAL, Token
from .treekit import Diagnostic, Node, traverse
from .typecheck import NUMERIC, module_env, type_of

__all__ = [
    "AgendaEntry",
    "Access",
    "DeSession",
    "PlantSpec",
    "CosimConfig",
    "Scenario",
    "TimelineRow",
    "parse_scenario",
    "run_until",
    "plant_step",
    "cosimulate",
    "render_timeline",
    "export_access_log",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AgendaEntry:
    op: str
    period: float


@dataclass(frozen=True)
class Access:
    time: float
    name: str
    kind: str
    value: Value


@dataclass
class DeSession:
    """Discrete-event side: a module, its state, an agenda and a clock."""

    module: BaseModule
    state: Dict[str, Value]
    agenda: Tuple[AgendaEntry, ...] = ()
    clock: float = 0.0
    access_log: List[Access] = field(default_factory=list)
    epsilon: float = TIME_EPSILON

    def __post_init__(self):
        _check_epsilon(self.epsilon)

    @classmethod
    def start(cls, module: BaseModule, agenda=(), epsilon: float = TIME_EPSILON) -> "DeSession":
        return cls(module, initial_state(module), tuple(agenda), epsilon=epsilon)

    @property
    def shared_vars(self) -> Tuple[str, ...]:
        return self.module.shared_names

    def shared_values(self) -> Dict[str, Value]:
        return {name: self.state[name] for name in self.shared_vars}


@dataclass(frozen=True)
class PlantSpec:
    states: Tuple[Tuple[str, float], ...]
    derivatives: Mapping[str, Node]
    outputs: Mapping[str, str]
    inputs: Tuple[str, ...]
    h: float

    @property
    def initial(self) -> Dict[str, float]:
        return dict(self.states)


@dataclass(frozen=True)
class CosimConfig:
    plant: PlantSpec
    sync_step: float
    end_time: float
    agenda: Tuple[AgendaEntry, ...] = ()


@dataclass(frozen=True)
class Scenario:
    module: BaseModule
    plant: PlantSpec
    config: CosimConfig


@dataclass(frozen=True)
class TimelineRow:
    time: float
    plant: Mapping[str, float]
    shared: Mapping[str, Value]
    events: Tuple[Tuple[float, str], ...] = ()


def _check_epsilon(eps: float) -> None:
    if not eps > 0:
        raise ConfigError(f"time epsilon must be positive, got {eps} (TREEFORGE_TIME_EPSILON)")


def _schedule(session: DeSession, bound: float) -> List[Tuple[float, int, str]]:
    eps = session.epsilon
    due: List[Tuple[float, int, str]] = []
    for order, entry in enumerate(session.agenda):
        k = math.floor((session.clock + eps) / entry.period) + 1
        while k * entry.period <= bound + eps:
            due.append((k * entry.period, order, entry.op))
            k += 1
    due.sort(key=lambda item: (round(item[0] / eps), item[1]))
    return due


def run_until(session: DeSession, bound: float) -> Tuple[List[Tuple[float, str]], List[Access]]:
    """
    Run every agenda invocation scheduled in (clock, bound], then set the
    clock to ``bound``. Invocations of an entry fall at multiples of its
    period; ties go in agenda order.

    :return: The (time, operation) events run and the accesses they made.
    :raises CosimError: For a bound before the clock, or a failing operation.
    """
    if bound < session.clock - session.epsilon:
        raise CosimError(f"time bound {bound} lies before the clock {session.clock}")
    events: List[Tuple[float, str]] = []
    first_access = len(session.access_log)
    for time, _, op in _schedule(session, bound):

        def record(name: str, kind: str, value: Value, time: float = time) -> None:
            session.access_log.append(Access(time, name, kind, value))

        try:
            session.state, _ = exec_operation(session.module, session.state, op, (), on_access=record)
        except TreeforgeError as exc:
            raise CosimError(f"t={format_value(round(time, 9))}: operation '{op}' failed: {exc}") from exc
        events.append((time, op))
    session.clock = max(session.clock, bound)
    return events, session.access_log[first_access:]


def plant_step(
    plant: PlantSpec,
    state: Mapping[str, float],
    inputs: Mapping[str, Value],
    h: float,
    ctx: Optional[EvalContext] = None,
) -> Dict[str, float]:
    """One forward-Euler step: every derivative is evaluated at the old state."""
    dispatcher = interpreter_dispatcher()
    ctx = (ctx or EvalContext()).bind(**inputs, **state)
    rates = {name: float(dispatcher(exp, ctx)) for name, exp in plant.derivatives.items()}
    return {name: value + h * rates.get(name, 0.0) for name, value in state.items()}


def _check_config(config: CosimConfig, eps: float) -> int:
    _check_epsilon(eps)
    if config.sync_step <= 0:
        raise CosimError(f"sync step must be positive, got {config.sync_step}")
    if config.plant.h <= 0 or config.plant.h > config.sync_step + eps:
        raise CosimError(f"plant step {config.plant.h} must lie in (0, {config.sync_step}]")
    steps = round(config.end_time / config.sync_step)
    if steps < 0 or abs(steps * config.sync_step - config.end_time) > eps:
        raise CosimError(f"end time {config.end_time} is not a multiple of the sync step {config.sync_step}")
    for entry in config.agenda:
        if entry.period <= 0:
            raise CosimError(f"agenda period of '{entry.op}' must be positive")
    return steps


def cosimulate(
    module: BaseModule,
    config: CosimConfig,
    session: Optional[DeSession] = None,
    epsilon: float = TIME_EPSILON,
) -> List[TimelineRow]:
    """
    Run the fixed-step master from time 0 to ``config.end_time``.

    :param session: A prepared session; one is started from ``module`` otherwise.
    :return: The initial row followed by one row per sync step.
    """
    steps = _check_config(config, epsilon)
    plant = config.plant
    session = session or DeSession.start(module, config.agenda, epsilon)
    substeps = max(1, math.ceil(config.sync_step / plant.h - epsilon))
    h = config.sync_step / substeps
    ctx = EvalContext.for_module(module)
    x = plant.initial
    timeline = [TimelineRow(0.0, dict(x), session.shared_values())]
    for k in range(steps):
        t = k * config.sync_step
        for shared, plant_state in plant.outputs.items():
            session.state[shared] = x[plant_state]
        events, _ = run_until(session, (k + 1) * config.sync_step)
        inputs = {name: session.state[name] for name in plant.inputs}
        try:
            for _ in range(substeps):
                x = plant_step(plant, x, inputs, h, ctx)
        except TreeforgeError as exc:
            raise CosimError(f"t={format_value(round(t, 9))}: plant failed: {exc}") from exc
        timeline.append(
            TimelineRow((k + 1) * config.sync_step, dict(x), session.shared_values(), tuple(events))
        )
        logger.debug("sync %d at t=%s: %d event(s)", k + 1, (k + 1) * config.sync_step, len(events))
    return timeline


class ScenarioParser(BaseParser):
    sections = SECTIONS + ("plant", "cosim")

    def __init__(self, text: str):
        super().__init__(text)
        self.plant_states: List[Tuple[Token, float]] = []
        self.derivatives: List[Tuple[Token, Node]] = []
        self.outputs: List[Tuple[Token, str]] = []
        self.settings: Dict[str, Tuple[Token, float]] = {}
        self.agenda: List[AgendaEntry] = []

    def number(self) -> float:
        s = self.stream
        negative = s.accept("-") is not None
        token = s.peek()
        if token.kind not in (INT, REAL):
            raise s.error("expected a number")
        s.advance()
        value = float(token.text)
        return -value if negative else value

    def setting(self, name: str) -> None:
        token = self.stream.advance()
        self.stream.expect(":=")
        self.settings[name] = (token, self.number())

    def section(self, keyword: Token) -> List[Node]:
        s = self.stream
        if keyword.text == "plant":
            while True:
                if s.accept("state"):
                    name = self.name("plant state name")
                    s.expect(":=")
                    self.plant_states.append((name, self.number()))
                elif s.accept("deriv"):
                    name = self.name("plant state name")
                    s.expect(":=")
                    self.derivatives.append((name, self.expression()))
                elif s.accept("output"):
                    shared = self.name("shared variable name")
                    s.expect("<-")
                    self.outputs.append((shared, self.name("plant state name").text))
                elif s.at("h") and s.peek(1).text == ":=":
                    self.setting("h")
                else:
                    return []
        if keyword.text == "cosim":
            while True:
                if s.at("H", "end") and s.peek(1).text == ":=":
                    self.setting(s.peek().text)
                elif s.accept("agenda"):
                    op = self.name("operation name")
                    s.expect("every")
                    self.agenda.append(AgendaEntry(op.text, self.number()))
                else:
                    return []
        return super().section(keyword)


def _free_names(exp: Node) -> List[str]:
    return [node["name"] for node in traverse(exp) if node.alternative == "Var"]


def _build_plant(parser: ScenarioParser, module: BaseModule) -> PlantSpec:
    states = [(token.text, value) for token, value in parser.plant_states]
    state_names = {name for name, _ in states}
    shared = module.shared_names
    declared = module.state_types
    for token, _ in parser.derivatives:
        if token.text not in state_names:
            raise ParseError(f"derivative of undeclared plant state '{token.text}'", token.span)
    for token, plant_state in parser.outputs:
        if token.text not in shared:
            raise ParseError(f"output target '{token.text}' is not a shared variable", token.span)
        if plant_state not in state_names:
            raise ParseError(f"output source '{plant_state}' is not a plant state", token.span)
    inputs: List[str] = []
    for _, exp in parser.derivatives:
        for name in _free_names(exp):
            if name in shared and name not in state_names and name not in inputs:
                inputs.append(name)
    # derivatives see module values, plant inputs and plant states, not the controller state
    env = replace(
        module_env(module),
        state={},
        locals={**{name: declared[name] for name in inputs}, **{name: "real" for name in state_names}},
    )
    for token, exp in parser.derivatives:
        found = type_of(exp, env)
        if env.diagnostics:
            first: Diagnostic = env.diagnostics[0]
            raise ParseError(f"derivative of '{token.text}': {first.message}", first.span or token.span)
        if found not in NUMERIC:
            raise ParseError(f"derivative of '{token.text}' must be real, found {found}", token.span)
    if "h" not in parser.settings:
        raise ParseError("plant section needs a step 'h := <real>'")
    return PlantSpec(
        states=tuple(states),
        derivatives={token.text: exp for token, exp in parser.derivatives},
        outputs={token.text: plant_state for token, plant_state in parser.outputs},
        inputs=tuple(inputs),
        h=parser.settings["h"][1],
    )


def parse_scenario(text: str) -> Scenario:
    """
    Parse a co-simulation scenario.

    :raises ParseError: On syntax errors or an inconsistent plant or cosim section.
    """
    parser = ScenarioParser(text)
    root = parser.parse_module()
    parser.expect_end()
    module = BaseModule(root, text)
    plant = _build_plant(parser, module)
    for key in ("H", "end"):
        if key not in parser.settings:
            raise ParseError(f"cosim section needs '{key} := <real>'")
    for entry in parser.agenda:
        if module.operation(entry.op) is None:
            raise ParseError(f"agenda names unknown operation '{entry.op}'")
    config = CosimConfig(
        plant=plant,
        sync_step=parser.settings["H"][1],
        end_time=parser.settings["end"][1],
        agenda=tuple(parser.agenda),
    )
    return Scenario(module, plant, config)


def _time(t: float) -> str:
    return format_value(round(t, 9))


def render_timeline(timeline: List[TimelineRow]) -> str:
    """Tab-separated rows: time, plant states, shared values, then events as ``op@time``."""
    if not timeline:
        return ""
    first = timeline[0]
    header = ["t", *first.plant, *(f"shared:{name}" for name in first.shared), "events"]
    lines = ["\t".join(header)]
    for row in timeline:
        cells = [_time(row.time)]
        cells += [format_value(row.plant[name]) for name in first.plant]
        cells += [format_value(row.shared[name]) for name in first.shared]
        cells.append(",".join(f"{op}@{_time(t)}" for t, op in row.events) or "-")
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def export_access_log(session: DeSession) -> str:
    return "".join(
        f"{_time(a.time)}\t{a.name}\t{a.kind}\t{format_value(a.value)}\n" for a in session.access_log
    )
